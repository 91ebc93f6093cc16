//! Corpus container, IDF-based informativeness filtering, ranker pair sets,
//! instruction-tuning records and the symmetric in-batch contrastive loss.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    fault_analysis_text, FaultAnalysis, FaultAnalysisRecord, LabelSet, TeamLabel, Ticket,
    TicketFaultLink, TicketRecord,
};
use crate::error::Error;
use crate::prompts;
use crate::text::tokenize;

/// Tickets, fault analyses, their links and optional team labels.
///
/// Each ticket links to at most one fault analysis; a fault analysis may
/// resolve many tickets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    tickets: BTreeMap<String, Ticket>,
    fault_analyses: BTreeMap<String, FaultAnalysis>,
    links: Vec<TicketFaultLink>,
    team_labels: BTreeMap<String, TeamLabel>,
    ticket_fault: BTreeMap<String, String>,
    fault_tickets: BTreeMap<String, Vec<String>>,
}

impl Corpus {
    pub fn new(
        tickets: Vec<Ticket>,
        fault_analyses: Vec<FaultAnalysis>,
        links: Vec<TicketFaultLink>,
        team_labels: Vec<(String, TeamLabel)>,
    ) -> Result<Self, Error> {
        let mut ticket_map = BTreeMap::new();
        for t in tickets {
            if t.id.is_empty() {
                return Err(Error::Integrity("ticket with empty id".into()));
            }
            let id = t.id.clone();
            if ticket_map.insert(id.clone(), t).is_some() {
                return Err(Error::Integrity(format!("duplicate ticket id `{id}`")));
            }
        }
        let mut fa_map = BTreeMap::new();
        for f in fault_analyses {
            if f.id.is_empty() {
                return Err(Error::Integrity("fault analysis with empty id".into()));
            }
            let id = f.id.clone();
            if fa_map.insert(id.clone(), f).is_some() {
                return Err(Error::Integrity(format!("duplicate fault analysis id `{id}`")));
            }
        }
        let mut links = links;
        links.sort();
        links.dedup();
        let mut ticket_fault = BTreeMap::new();
        let mut fault_tickets: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for l in &links {
            if !ticket_map.contains_key(&l.ticket_id) {
                return Err(Error::Integrity(format!("link to unknown ticket `{}`", l.ticket_id)));
            }
            if !fa_map.contains_key(&l.fault_analysis_id) {
                return Err(Error::Integrity(format!(
                    "link to unknown fault analysis `{}`",
                    l.fault_analysis_id
                )));
            }
            if let Some(prev) = ticket_fault.insert(l.ticket_id.clone(), l.fault_analysis_id.clone()) {
                return Err(Error::Integrity(format!(
                    "ticket `{}` linked to both `{prev}` and `{}`",
                    l.ticket_id, l.fault_analysis_id
                )));
            }
            fault_tickets
                .entry(l.fault_analysis_id.clone())
                .or_default()
                .push(l.ticket_id.clone());
        }
        let mut label_map = BTreeMap::new();
        for (id, label) in team_labels {
            if !ticket_map.contains_key(&id) {
                return Err(Error::Integrity(format!("team label for unknown ticket `{id}`")));
            }
            label_map.insert(id, label);
        }
        Ok(Corpus {
            tickets: ticket_map,
            fault_analyses: fa_map,
            links,
            team_labels: label_map,
            ticket_fault,
            fault_tickets,
        })
    }

    /// Builds a corpus from JSONL records, validating labels against `labels`.
    pub fn from_records(
        tickets: &[TicketRecord],
        faults: &[FaultAnalysisRecord],
        labels: &LabelSet,
    ) -> Result<Self, Error> {
        let mut team_labels = Vec::new();
        for r in tickets {
            if let Some(l) = &r.team_label {
                team_labels.push((r.id.clone(), labels.parse(l)?));
            }
        }
        let links = faults
            .iter()
            .flat_map(|f| {
                f.ticket_ids.iter().map(move |t| TicketFaultLink {
                    ticket_id: t.clone(),
                    fault_analysis_id: f.id.clone(),
                })
            })
            .collect();
        Corpus::new(
            tickets.iter().map(TicketRecord::ticket).collect(),
            faults.iter().map(FaultAnalysisRecord::fault_analysis).collect(),
            links,
            team_labels,
        )
    }

    pub fn to_records(&self) -> (Vec<TicketRecord>, Vec<FaultAnalysisRecord>) {
        let tickets = self
            .tickets
            .values()
            .map(|t| TicketRecord::from_ticket(t, self.team_labels.get(&t.id)))
            .collect();
        let faults = self
            .fault_analyses
            .values()
            .map(|f| FaultAnalysisRecord {
                id: f.id.clone(),
                identification: f.identification.clone(),
                root_cause: f.root_cause.clone(),
                resolution: f.resolution.clone(),
                ticket_ids: self.fault_tickets.get(&f.id).cloned().unwrap_or_default(),
            })
            .collect();
        (tickets, faults)
    }

    /// Fails when any fault analysis carries a root cause outside `root_causes`.
    pub fn check_root_causes(&self, root_causes: &[String]) -> Result<(), Error> {
        for f in self.fault_analyses.values() {
            if !root_causes.contains(&f.root_cause) {
                return Err(Error::Integrity(format!(
                    "fault analysis `{}` has undeclared root cause `{}`",
                    f.id, f.root_cause
                )));
            }
        }
        Ok(())
    }

    pub fn tickets(&self) -> impl Iterator<Item = &Ticket> {
        self.tickets.values()
    }

    pub fn fault_analyses(&self) -> impl Iterator<Item = &FaultAnalysis> {
        self.fault_analyses.values()
    }

    pub fn links(&self) -> &[TicketFaultLink] {
        &self.links
    }

    pub fn ticket(&self, id: &str) -> Option<&Ticket> {
        self.tickets.get(id)
    }

    pub fn fault_analysis(&self, id: &str) -> Option<&FaultAnalysis> {
        self.fault_analyses.get(id)
    }

    /// The fault analysis linked to a ticket, if any.
    pub fn fault_of(&self, ticket_id: &str) -> Option<&FaultAnalysis> {
        self.ticket_fault
            .get(ticket_id)
            .and_then(|f| self.fault_analyses.get(f))
    }

    pub fn fault_id_of(&self, ticket_id: &str) -> Option<&str> {
        self.ticket_fault.get(ticket_id).map(String::as_str)
    }

    /// Ticket ids linked to a fault analysis, ascending.
    pub fn tickets_of(&self, fault_id: &str) -> &[String] {
        self.fault_tickets.get(fault_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn team_label(&self, ticket_id: &str) -> Option<&TeamLabel> {
        self.team_labels.get(ticket_id)
    }

    pub fn has_team_labels(&self) -> bool {
        !self.team_labels.is_empty()
    }

    pub fn ticket_count(&self) -> usize {
        self.tickets.len()
    }

    pub fn fault_count(&self) -> usize {
        self.fault_analyses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickets.is_empty() && self.fault_analyses.is_empty()
    }

    /// Adds (or replaces) a ticket with an optional label, keeping links intact.
    pub fn upsert_ticket(&mut self, ticket: Ticket, label: Option<TeamLabel>) -> Result<(), Error> {
        if ticket.id.is_empty() {
            return Err(Error::Integrity("ticket with empty id".into()));
        }
        match label {
            Some(l) => {
                self.team_labels.insert(ticket.id.clone(), l);
            }
            None => {
                self.team_labels.remove(&ticket.id);
            }
        }
        self.tickets.insert(ticket.id.clone(), ticket);
        Ok(())
    }

    /// Sub-corpus restricted to the given tickets and the reports they link to.
    pub fn restrict_tickets(&self, keep: &BTreeSet<String>) -> Corpus {
        let faults: BTreeSet<String> = self
            .links
            .iter()
            .filter(|l| keep.contains(&l.ticket_id))
            .map(|l| l.fault_analysis_id.clone())
            .collect();
        self.restrict(keep, &faults)
    }

    /// Sub-corpus holding the given tickets and reports and the links among them.
    pub fn restrict(&self, tickets: &BTreeSet<String>, faults: &BTreeSet<String>) -> Corpus {
        let links: Vec<TicketFaultLink> = self
            .links
            .iter()
            .filter(|l| tickets.contains(&l.ticket_id) && faults.contains(&l.fault_analysis_id))
            .cloned()
            .collect();
        Corpus::new(
            self.tickets.values().filter(|t| tickets.contains(&t.id)).cloned().collect(),
            self.fault_analyses
                .values()
                .filter(|f| faults.contains(&f.id))
                .cloned()
                .collect(),
            links,
            self.team_labels
                .iter()
                .filter(|(id, _)| tickets.contains(*id))
                .map(|(id, l)| (id.clone(), l.clone()))
                .collect(),
        )
        .expect("restriction of a valid corpus is valid")
    }
}

/// Tokens of a report's content fields (section labels excluded).
pub fn report_tokens(f: &FaultAnalysis) -> Vec<String> {
    let mut tokens = tokenize(&f.identification);
    tokens.extend(tokenize(&f.root_cause));
    tokens.extend(tokenize(&f.resolution));
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    weights: BTreeMap<String, f64>,
    document_count: usize,
}

impl IdfTable {
    pub fn lookup(&self, token: &str) -> Result<f64, Error> {
        self.weights
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight assigned to tokens absent from the table: `ln N`.
    pub fn unknown_weight(&self) -> f64 {
        libm::log(self.document_count as f64)
    }
}

/// `idf(token) = ln(N / df)` over the reports' content tokens.
pub fn compute_idf(reports: &[FaultAnalysis]) -> Result<IdfTable, Error> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for r in reports {
        let unique: BTreeSet<String> = report_tokens(r).into_iter().collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = reports.len() as f64;
    let weights = df
        .into_iter()
        .map(|(t, d)| (t, libm::log(n / d as f64)))
        .collect();
    Ok(IdfTable {
        weights,
        document_count: reports.len(),
    })
}

pub const DEFAULT_INFORMATIVENESS_TOP_K: usize = 15;
pub const DEFAULT_INFORMATIVENESS_THRESHOLD: f64 = 5.0;

/// Mean of the `k` largest IDF weights among the report's unique tokens.
pub fn informativeness_score(report: &FaultAnalysis, idf: &IdfTable, k: usize) -> Result<f64, Error> {
    if k == 0 {
        return Err(Error::invalid("informativeness top-k must be >= 1"));
    }
    let unique: BTreeSet<String> = report_tokens(report).into_iter().collect();
    if unique.is_empty() {
        return Ok(0.0);
    }
    let mut weights: Vec<f64> = unique
        .iter()
        .map(|t| idf.lookup(t).unwrap_or_else(|_| idf.unknown_weight()))
        .collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    weights.truncate(k);
    Ok(weights.iter().sum::<f64>() / weights.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped: usize,
    pub kept_tickets: usize,
    /// Per-report informativeness score, ascending id.
    pub scores: Vec<(String, f64)>,
}

/// Keeps reports scoring strictly above `threshold` and the tickets linked to them.
pub fn filter_reports(
    corpus: &Corpus,
    threshold: f64,
    k: usize,
) -> Result<(Corpus, FilterReport), Error> {
    if k == 0 {
        return Err(Error::invalid("informativeness top-k must be >= 1"));
    }
    let reports: Vec<FaultAnalysis> = corpus.fault_analyses().cloned().collect();
    if reports.is_empty() {
        return Ok((
            Corpus::default(),
            FilterReport {
                kept: 0,
                dropped: 0,
                kept_tickets: 0,
                scores: Vec::new(),
            },
        ));
    }
    let idf = compute_idf(&reports)?;
    let mut scores = Vec::with_capacity(reports.len());
    let mut kept_ids = BTreeSet::new();
    for r in &reports {
        let s = informativeness_score(r, &idf, k)?;
        if s > threshold {
            kept_ids.insert(r.id.clone());
        }
        scores.push((r.id.clone(), s));
    }
    let keep_tickets: BTreeSet<String> = corpus
        .links()
        .iter()
        .filter(|l| kept_ids.contains(&l.fault_analysis_id))
        .map(|l| l.ticket_id.clone())
        .collect();
    let filtered = corpus.restrict(&keep_tickets, &kept_ids);
    let report = FilterReport {
        kept: kept_ids.len(),
        dropped: reports.len() - kept_ids.len(),
        kept_tickets: keep_tickets.len(),
        scores,
    };
    Ok((filtered, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairSet {
    /// (ticket_id, fault_analysis_id)
    pub implicit_pairs: Vec<(String, String)>,
    /// Unordered ticket pairs sharing a report, smaller id first.
    pub explicit_pairs: Vec<(String, String)>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.implicit_pairs.len() + self.explicit_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_pair_set(corpus: &Corpus) -> PairSet {
    let implicit_pairs = corpus
        .links()
        .iter()
        .map(|l| (l.ticket_id.clone(), l.fault_analysis_id.clone()))
        .collect();
    let mut explicit = BTreeSet::new();
    for f in corpus.fault_analyses() {
        let ids = corpus.tickets_of(&f.id);
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let pair = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                explicit.insert(pair);
            }
        }
    }
    PairSet {
        implicit_pairs,
        explicit_pairs: explicit.into_iter().collect(),
    }
}

/// One line of the pair-set export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub kind: PairKind,
    pub left_id: String,
    pub right_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    TicketFault,
    TicketTicket,
}

pub fn pair_records(pairs: &PairSet) -> Vec<PairRecord> {
    let implicit = pairs.implicit_pairs.iter().map(|(l, r)| PairRecord {
        kind: PairKind::TicketFault,
        left_id: l.clone(),
        right_id: r.clone(),
    });
    let explicit = pairs.explicit_pairs.iter().map(|(l, r)| PairRecord {
        kind: PairKind::TicketTicket,
        left_id: l.clone(),
        right_id: r.clone(),
    });
    implicit.chain(explicit).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionTask {
    Routing,
    FaultAnalysis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub system: String,
    pub user: String,
    pub assistant: String,
}

/// Instruction-tuning records in ascending ticket-id order.
pub fn instruction_records(
    corpus: &Corpus,
    task: InstructionTask,
) -> Result<Vec<InstructionRecord>, Error> {
    match task {
        InstructionTask::Routing => {
            let missing: Vec<String> = corpus
                .tickets()
                .filter(|t| corpus.team_label(&t.id).is_none())
                .map(|t| t.id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingLabels(missing));
            }
            Ok(corpus
                .tickets()
                .map(|t| {
                    let msgs = prompts::build_routing_prompt(t);
                    InstructionRecord {
                        system: msgs[0].content.clone(),
                        user: msgs[1].content.clone(),
                        assistant: corpus.team_label(&t.id).expect("checked").as_str().to_string(),
                    }
                })
                .collect())
        }
        InstructionTask::FaultAnalysis => Ok(corpus
            .tickets()
            .filter_map(|t| corpus.fault_of(&t.id).map(|f| (t, f)))
            .map(|(t, f)| {
                let msgs = prompts::build_fa_prompt(t);
                InstructionRecord {
                    system: msgs[0].content.clone(),
                    user: msgs[1].content.clone(),
                    assistant: fault_analysis_text(f),
                }
            })
            .collect()),
    }
}

pub const DEFAULT_LOSS_TEMPERATURE: f64 = 0.1;

/// Symmetric in-batch-negatives loss over a `B x B` similarity matrix whose
/// diagonal holds the positive pairs: the mean of the row-wise softmax
/// cross-entropy of `sim / temperature` and of its transpose.
pub fn contrastive_loss<R: AsRef<[f64]>>(sim: &[R], temperature: f64) -> Result<f64, Error> {
    let b = sim.len();
    if b == 0 {
        return Err(Error::invalid("similarity matrix is empty"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("temperature must be > 0"));
    }
    for (i, row) in sim.iter().enumerate() {
        if row.as_ref().len() != b {
            return Err(Error::NonSquare {
                row: i,
                len: row.as_ref().len(),
                expected: b,
            });
        }
    }
    let at = |i: usize, j: usize| sim[i].as_ref()[j] / temperature;
    // running means stay exact when every term is equal
    let (mut rows, mut cols) = (0.0, 0.0);
    for i in 0..b {
        let n = (i + 1) as f64;
        rows += (cross_entropy((0..b).map(|j| at(i, j)), at(i, i)) - rows) / n;
        cols += (cross_entropy((0..b).map(|j| at(j, i)), at(i, i)) - cols) / n;
    }
    Ok((rows + cols) / 2.0)
}

/// `logsumexp(logits) - target`, shifted by the max logit.
fn cross_entropy(logits: impl Iterator<Item = f64> + Clone, target: f64) -> f64 {
    let max = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    libm::log(logits.map(|v| libm::exp(v - max)).sum::<f64>()) + (max - target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fa(id: &str, text: &str) -> FaultAnalysis {
        FaultAnalysis {
            id: id.into(),
            identification: text.into(),
            ..Default::default()
        }
    }

    fn ticket(id: &str) -> Ticket {
        Ticket {
            id: id.into(),
            ..Default::default()
        }
    }

    fn link(t: &str, f: &str) -> TicketFaultLink {
        TicketFaultLink {
            ticket_id: t.into(),
            fault_analysis_id: f.into(),
        }
    }

    #[test]
    fn idf_single_report_is_zero() {
        let idf = compute_idf(&[fa("1", "a b")]).unwrap();
        assert_eq!(idf.lookup("a").unwrap(), 0.0);
        assert_eq!(idf.lookup("b").unwrap(), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn idf_two_reports() {
        let idf = compute_idf(&[fa("1", "a b"), fa("2", "a c")]).unwrap();
        assert_eq!(idf.lookup("a").unwrap(), 0.0);
        assert!((idf.lookup("b").unwrap() - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert!((idf.lookup("c").unwrap() - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert_eq!(idf.lookup("zzz"), Err(Error::UnknownToken("zzz".into())));
    }

    #[test]
    fn idf_rejects_empty_input() {
        assert_eq!(compute_idf(&[]), Err(Error::EmptyCorpus));
    }

    #[test]
    fn informativeness_examples() {
        let idf = compute_idf(&[fa("1", "a b"), fa("2", "a c")]).unwrap();
        assert_eq!(informativeness_score(&fa("x", "a a a"), &idf, 15).unwrap(), 0.0);
        // unique idfs {0, ln2, ln2}, k = 2
        let s = informativeness_score(&fa("x", "a b c b"), &idf, 2).unwrap();
        assert!((s - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(informativeness_score(&fa("x", ""), &idf, 15).unwrap(), 0.0);
        // unknown tokens count as ln N
        let s = informativeness_score(&fa("x", "never"), &idf, 15).unwrap();
        assert!((s - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(informativeness_score(&fa("x", "a"), &idf, 0).is_err());
    }

    #[test]
    fn pair_counts_follow_formula() {
        let corpus = Corpus::new(
            vec![ticket("t1"), ticket("t2"), ticket("t3"), ticket("t4")],
            vec![fa("f1", "x"), fa("f2", "y")],
            vec![link("t3", "f1"), link("t1", "f1"), link("t2", "f1"), link("t4", "f2")],
            vec![],
        )
        .unwrap();
        let p = build_pair_set(&corpus);
        assert_eq!(p.implicit_pairs.len(), 4);
        assert_eq!(
            p.explicit_pairs,
            vec![
                ("t1".into(), "t2".into()),
                ("t1".into(), "t3".into()),
                ("t2".into(), "t3".into())
            ]
        );
    }

    #[test]
    fn paper_scale_pair_total() {
        // |S| = |D_f| + |ES|
        let d_f: u64 = 130_781;
        let es: u64 = 71_570;
        assert_eq!(d_f + es, 202_351);
    }

    #[test]
    fn corpus_rejects_broken_links() {
        assert!(Corpus::new(vec![ticket("t1")], vec![], vec![link("t1", "f")], vec![]).is_err());
        assert!(Corpus::new(
            vec![ticket("t1")],
            vec![fa("f1", ""), fa("f2", "")],
            vec![link("t1", "f1"), link("t1", "f2")],
            vec![]
        )
        .is_err());
        assert!(Corpus::new(vec![ticket("t1"), ticket("t1")], vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn filter_extremes() {
        let corpus = Corpus::new(
            vec![ticket("t1"), ticket("t2")],
            vec![fa("f1", "common rare1"), fa("f2", "common rare2"), fa("f3", "common")],
            vec![link("t1", "f1"), link("t2", "f3")],
            vec![],
        )
        .unwrap();
        let (all, rep) = filter_reports(&corpus, 0.0, 15).unwrap();
        assert_eq!(rep.kept, 2);
        assert_eq!(rep.dropped, 1);
        assert!(all.fault_analysis("f3").is_none());
        assert!(all.ticket("t1").is_some());
        assert!(all.ticket("t2").is_none());
        let (none, rep) = filter_reports(&corpus, f64::INFINITY, 15).unwrap();
        assert_eq!(rep.kept, 0);
        assert_eq!(none.fault_count(), 0);
    }

    #[test]
    fn loss_small_cases() {
        assert_eq!(contrastive_loss(&[vec![3.0]], 0.1).unwrap(), 0.0);
        let l = contrastive_loss(&[vec![0.4, 0.4], vec![0.4, 0.4]], 0.1).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            contrastive_loss(&[vec![1.0, 0.0], vec![1.0]], 0.1),
            Err(Error::NonSquare { .. })
        ));
        assert!(contrastive_loss(&[vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn instruction_records_require_labels() {
        let corpus = Corpus::new(vec![ticket("t1"), ticket("t2")], vec![], vec![], vec![]).unwrap();
        match instruction_records(&corpus, InstructionTask::Routing) {
            Err(Error::MissingLabels(ids)) => assert_eq!(ids, vec!["t1", "t2"]),
            other => panic!("{other:?}"),
        }
        assert!(instruction_records(&Corpus::default(), InstructionTask::Routing)
            .unwrap()
            .is_empty());
    }
}
