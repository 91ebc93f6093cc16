//! Exact vector search, multi-ranker consensus retrieval and demonstration
//! selection under a token budget.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{Embedder, EmbeddingVector};
use crate::curation::Corpus;
use crate::domain::{fault_analysis_text, ticket_text, FaultAnalysis, Ticket};
use crate::error::Error;
use crate::text::{truncate_to_budget, TokenCounter};

pub const DEFAULT_RANKERS: usize = 6;
pub const DEFAULT_CANDIDATE_ORDER: usize = 2500;
pub const DEFAULT_TOKEN_BUDGET: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Ticket,
    FaultAnalysis,
}

impl Modality {
    pub fn to_byte(self) -> u8 {
        match self {
            Modality::Ticket => 0,
            Modality::FaultAnalysis => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Modality::Ticket),
            1 => Some(Modality::FaultAnalysis),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub score: f64,
}

/// Sorts by descending score, ties by ascending id.
pub fn sort_scored(items: &mut [ScoredItem]) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.item_id.cmp(&b.item_id)));
}

/// `dot(u, v) / (|u| |v|)`, or 0 when either vector is zero.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, Error> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.values().iter().zip(v.values()) {
        let (a, b) = (f64::from(*a), f64::from(*b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (libm::sqrt(nu) * libm::sqrt(nv))).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub modality: Modality,
    pub vector: EmbeddingVector,
}

/// Flat exhaustive index over tickets and fault analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<IndexEntry>,
    lookup: BTreeMap<(Modality, String), usize>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        VectorIndex {
            dimension,
            entries: Vec::new(),
            lookup: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: String, modality: Modality, vector: EmbeddingVector) -> Result<(), Error> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        let key = (modality, id.clone());
        if self.lookup.contains_key(&key) {
            return Err(Error::Integrity(format!("duplicate {modality:?} id `{id}` in index")));
        }
        self.lookup.insert(key, self.entries.len());
        self.entries.push(IndexEntry { id, modality, vector });
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str, modality: Modality) -> Option<&EmbeddingVector> {
        self.lookup
            .get(&(modality, String::from(id)))
            .map(|&i| &self.entries[i].vector)
    }

    fn position(&self, id: &str, modality: Modality) -> Option<usize> {
        self.lookup.get(&(modality, String::from(id))).copied()
    }

    /// Ids of one modality, ascending.
    pub fn ids(&self, modality: Modality) -> Vec<&str> {
        self.lookup
            .keys()
            .filter(|(m, _)| *m == modality)
            .map(|(_, id)| id.as_str())
            .collect()
    }
}

/// The `k` highest-cosine items of `modality` by exhaustive scan.
pub fn top_k(
    index: &VectorIndex,
    query: &EmbeddingVector,
    k: usize,
    modality: Modality,
) -> Result<Vec<ScoredItem>, Error> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let mut scored = Vec::new();
    for e in index.entries.iter().filter(|e| e.modality == modality) {
        scored.push(ScoredItem {
            item_id: e.id.clone(),
            score: cosine(query, &e.vector)?,
        });
    }
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// One embedding backend with its index over the corpus.
#[derive(Clone)]
pub struct Ranker {
    pub embedder: Arc<dyn Embedder>,
    pub index: VectorIndex,
}

impl core::fmt::Debug for Ranker {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Ranker")
            .field("embedder", &self.embedder.id())
            .field("entries", &self.index.len())
            .finish()
    }
}

impl Ranker {
    /// Embeds every ticket and fault analysis of the corpus.
    pub fn build(embedder: Arc<dyn Embedder>, corpus: &Corpus) -> Result<Self, Error> {
        let mut index = VectorIndex::new(embedder.dimension());
        let tickets: Vec<&Ticket> = corpus.tickets().collect();
        let texts: Vec<String> = tickets.iter().map(|t| ticket_text(t)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vecs = embed_checked(embedder.as_ref(), &refs)?;
        for (t, v) in tickets.iter().zip(vecs) {
            index.insert(t.id.clone(), Modality::Ticket, v)?;
        }
        let faults: Vec<&FaultAnalysis> = corpus.fault_analyses().collect();
        let texts: Vec<String> = faults.iter().map(|f| fault_analysis_text(f)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vecs = embed_checked(embedder.as_ref(), &refs)?;
        for (f, v) in faults.iter().zip(vecs) {
            index.insert(f.id.clone(), Modality::FaultAnalysis, v)?;
        }
        Ok(Ranker { embedder, index })
    }
}

/// Embeds and checks the backend honoured count and dimension.
pub fn embed_checked(embedder: &dyn Embedder, texts: &[&str]) -> Result<Vec<EmbeddingVector>, Error> {
    let vecs = embedder.embed(texts)?;
    if vecs.len() != texts.len() {
        return Err(Error::Backend(crate::backend::BackendError::Contract(format!(
            "requested {} embeddings, got {}",
            texts.len(),
            vecs.len()
        ))));
    }
    for v in &vecs {
        if v.len() != embedder.dimension() {
            return Err(Error::Backend(crate::backend::BackendError::Contract(format!(
                "embedding of length {} from a backend declaring {}",
                v.len(),
                embedder.dimension()
            ))));
        }
    }
    Ok(vecs)
}

#[derive(Debug, Clone)]
struct Alignment {
    ticket_pos: Vec<usize>,
    fault_pos: Vec<Option<usize>>,
}

/// `rn` rankers indexed over the same tickets and fault analyses.
#[derive(Debug, Clone)]
pub struct RankerEnsemble {
    rankers: Vec<Ranker>,
    ticket_ids: Vec<String>,
    fault_of: Vec<Option<String>>,
    alignment: Vec<Alignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    /// Top `final_k` survivors.
    pub items: Vec<ScoredItem>,
    /// Every ticket in the intersection of the per-ranker candidate sets, ranked.
    pub pool: Vec<ScoredItem>,
    pub empty_intersection: bool,
}

impl RankerEnsemble {
    pub fn build(embedders: Vec<Arc<dyn Embedder>>, corpus: &Corpus) -> Result<Self, Error> {
        let rankers = embedders
            .into_iter()
            .map(|e| Ranker::build(e, corpus))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rankers(rankers, corpus)
    }

    /// Assembles prebuilt (e.g. loaded) indexes; each must cover exactly the
    /// corpus tickets and fault analyses.
    pub fn from_rankers(rankers: Vec<Ranker>, corpus: &Corpus) -> Result<Self, Error> {
        if rankers.is_empty() {
            return Err(Error::invalid("ensemble needs at least one ranker"));
        }
        let ticket_ids: Vec<String> = corpus.tickets().map(|t| t.id.clone()).collect();
        let fault_of: Vec<Option<String>> = ticket_ids
            .iter()
            .map(|id| corpus.fault_id_of(id).map(String::from))
            .collect();
        let fault_ids: Vec<&str> = corpus.fault_analyses().map(|f| f.id.as_str()).collect();
        let mut alignment = Vec::with_capacity(rankers.len());
        for (i, r) in rankers.iter().enumerate() {
            if r.index.dimension() != r.embedder.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: r.embedder.dimension(),
                    actual: r.index.dimension(),
                });
            }
            let idx_tickets = r.index.ids(Modality::Ticket);
            let idx_faults = r.index.ids(Modality::FaultAnalysis);
            if idx_tickets != ticket_ids.iter().map(String::as_str).collect::<Vec<_>>()
                || idx_faults != fault_ids
            {
                return Err(Error::Integrity(format!(
                    "ranker {i} index does not cover the corpus id sets"
                )));
            }
            let ticket_pos = ticket_ids
                .iter()
                .map(|id| r.index.position(id, Modality::Ticket).expect("checked"))
                .collect();
            let fault_pos = fault_of
                .iter()
                .map(|f| f.as_ref().map(|f| r.index.position(f, Modality::FaultAnalysis).expect("checked")))
                .collect();
            alignment.push(Alignment { ticket_pos, fault_pos });
        }
        Ok(RankerEnsemble {
            rankers,
            ticket_ids,
            fault_of,
            alignment,
        })
    }

    pub fn rankers(&self) -> &[Ranker] {
        &self.rankers
    }

    pub fn len(&self) -> usize {
        self.rankers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankers.is_empty()
    }

    pub fn ticket_ids(&self) -> &[String] {
        &self.ticket_ids
    }

    /// Ensemble made of a single ranker of this one.
    pub fn single(&self, i: usize) -> RankerEnsemble {
        RankerEnsemble {
            rankers: vec![self.rankers[i].clone()],
            ticket_ids: self.ticket_ids.clone(),
            fault_of: self.fault_of.clone(),
            alignment: vec![self.alignment[i].clone()],
        }
    }

    /// Query embedding under every ranker.
    pub fn embed_query(&self, ticket: &Ticket) -> Result<Vec<EmbeddingVector>, Error> {
        let text = ticket_text(ticket);
        self.rankers
            .iter()
            .map(|r| Ok(embed_checked(r.embedder.as_ref(), &[&text])?.remove(0)))
            .collect()
    }

    /// Per-ticket `sim(q, T_j) + sim(q, f_j)` under ranker `i`, aligned with
    /// [`Self::ticket_ids`]; unlinked tickets get 0 for the report term.
    pub fn dual_scores(&self, i: usize, query: &EmbeddingVector) -> Result<Vec<f64>, Error> {
        let r = &self.rankers[i];
        let a = &self.alignment[i];
        let entries = r.index.entries();
        let mut fault_cache: BTreeMap<usize, f64> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.ticket_ids.len());
        for (row, &tp) in a.ticket_pos.iter().enumerate() {
            let mut s = cosine(query, &entries[tp].vector)?;
            if let Some(fp) = a.fault_pos[row] {
                let fs = match fault_cache.get(&fp) {
                    Some(v) => *v,
                    None => {
                        let v = cosine(query, &entries[fp].vector)?;
                        fault_cache.insert(fp, v);
                        v
                    }
                };
                s += fs;
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn consensus_retrieve(
        &self,
        ticket: &Ticket,
        candidate_order: usize,
        final_k: usize,
    ) -> Result<ConsensusResult, Error> {
        let q = self.embed_query(ticket)?;
        self.consensus_from_embeddings(&q, candidate_order, final_k)
    }

    /// Intersects the per-ranker top-`candidate_order` ticket sets (ranked by
    /// the dual-level score) and scores survivors by
    /// `sum_i (sim_i(q, T_j) + sim_i(q, f_j)) / (2 rn)`.
    pub fn consensus_from_embeddings(
        &self,
        query: &[EmbeddingVector],
        candidate_order: usize,
        final_k: usize,
    ) -> Result<ConsensusResult, Error> {
        if final_k == 0 || candidate_order < final_k {
            return Err(Error::invalid("require candidate_order >= final_k >= 1"));
        }
        if query.len() != self.rankers.len() {
            return Err(Error::invalid(format!(
                "expected {} query embeddings, got {}",
                self.rankers.len(),
                query.len()
            )));
        }
        let n = self.ticket_ids.len();
        let mut membership = vec![0usize; n];
        let mut totals = vec![0.0f64; n];
        for (i, q) in query.iter().enumerate() {
            let scores = self.dual_scores(i, q)?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then_with(|| self.ticket_ids[a].cmp(&self.ticket_ids[b]))
            });
            for &row in order.iter().take(candidate_order) {
                membership[row] += 1;
            }
            for (t, s) in totals.iter_mut().zip(&scores) {
                *t += s;
            }
        }
        let rn = self.rankers.len();
        let denom = 2.0 * rn as f64;
        let mut pool: Vec<ScoredItem> = (0..n)
            .filter(|&row| membership[row] == rn)
            .map(|row| ScoredItem {
                item_id: self.ticket_ids[row].clone(),
                score: totals[row] / denom,
            })
            .collect();
        sort_scored(&mut pool);
        let items = pool.iter().take(final_k).cloned().collect();
        Ok(ConsensusResult {
            items,
            empty_intersection: pool.is_empty(),
            pool,
        })
    }

    /// Mean over rankers of `sim_i(ticket, report)`.
    pub fn aggregate_report_score(&self, ticket: &Ticket, report_text: &str) -> Result<f64, Error> {
        Ok(self.aggregate_report_scores(ticket, &[report_text])?[0])
    }

    /// [`Self::aggregate_report_score`] for several reports, batching embeddings.
    pub fn aggregate_report_scores(&self, ticket: &Ticket, reports: &[&str]) -> Result<Vec<f64>, Error> {
        let text = ticket_text(ticket);
        let mut batch = Vec::with_capacity(reports.len() + 1);
        batch.push(text.as_str());
        batch.extend_from_slice(reports);
        let mut totals = vec![0.0f64; reports.len()];
        for r in &self.rankers {
            let vecs = embed_checked(r.embedder.as_ref(), &batch)?;
            for (t, v) in totals.iter_mut().zip(&vecs[1..]) {
                *t += cosine(&vecs[0], v)?;
            }
        }
        let rn = self.rankers.len() as f64;
        Ok(totals.into_iter().map(|t| t / rn).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub ticket: Ticket,
    pub fault_analysis: FaultAnalysis,
    pub score: f64,
    pub tokens: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemonstrationSelection {
    pub demonstrations: Vec<Demonstration>,
    pub total_tokens: usize,
    /// The top-ranked demonstration alone exceeded the budget and was truncated.
    pub oversized_top1: bool,
}

impl DemonstrationSelection {
    pub fn pairs(&self) -> Vec<(Ticket, FaultAnalysis)> {
        self.demonstrations
            .iter()
            .map(|d| (d.ticket.clone(), d.fault_analysis.clone()))
            .collect()
    }
}

/// Rendered demonstration block used for budgeting.
pub fn demonstration_block(t: &Ticket, f: &FaultAnalysis) -> String {
    let mut s = ticket_text(t);
    s.push('\n');
    s.push_str(&fault_analysis_text(f));
    s
}

/// Greedily takes linked (ticket, report) pairs in consensus rank order until
/// the next one would overflow `token_budget`. The top pair is always kept,
/// truncated when it alone exceeds the budget.
pub fn select_demonstrations(
    ensemble: &RankerEnsemble,
    corpus: &Corpus,
    ticket: &Ticket,
    token_budget: usize,
    counter: &dyn TokenCounter,
) -> Result<DemonstrationSelection, Error> {
    if token_budget == 0 {
        return Err(Error::invalid("token budget must be >= 1"));
    }
    let n = ensemble.ticket_ids().len();
    if n == 0 {
        return Ok(DemonstrationSelection::default());
    }
    let ranked = ensemble.consensus_retrieve(ticket, n, n)?;
    let mut sel = DemonstrationSelection::default();
    for item in ranked.items {
        let Some(f) = corpus.fault_of(&item.item_id) else {
            continue;
        };
        let t = corpus
            .ticket(&item.item_id)
            .ok_or_else(|| Error::Integrity(format!("indexed ticket `{}` missing from corpus", item.item_id)))?;
        let tokens = counter.count(&demonstration_block(t, f));
        if sel.total_tokens + tokens <= token_budget {
            sel.total_tokens += tokens;
            sel.demonstrations.push(Demonstration {
                ticket: t.clone(),
                fault_analysis: f.clone(),
                score: item.score,
                tokens,
                truncated: false,
            });
            continue;
        }
        if sel.demonstrations.is_empty() {
            let (t, f) = truncate_demonstration(t, f, token_budget, counter);
            let tokens = counter.count(&demonstration_block(&t, &f));
            sel.total_tokens = tokens;
            sel.oversized_top1 = true;
            sel.demonstrations.push(Demonstration {
                ticket: t,
                fault_analysis: f,
                score: item.score,
                tokens,
                truncated: true,
            });
        }
        break;
    }
    Ok(sel)
}

/// Shortens fields from the end of the rendered block backwards until the
/// block fits (the labelled skeleton itself may still exceed tiny budgets).
fn truncate_demonstration(
    t: &Ticket,
    f: &FaultAnalysis,
    budget: usize,
    counter: &dyn TokenCounter,
) -> (Ticket, FaultAnalysis) {
    let mut t = t.clone();
    let mut f = f.clone();
    let fits = |t: &Ticket, f: &FaultAnalysis| counter.count(&demonstration_block(t, f)) <= budget;
    let field_count = 5 + t.log_snippets.len() + 3;
    for k in (0..field_count).rev() {
        if fits(&t, &f) {
            break;
        }
        let original = field(&t, &f, k).clone();
        set_field(&mut t, &mut f, k, String::new());
        let empty_fits = fits(&t, &f);
        if !empty_fits {
            continue;
        }
        // longest prefix of this field that still fits
        let base = counter.count(&demonstration_block(&t, &f));
        let room = budget.saturating_sub(base);
        let mut lo = truncate_to_budget(&original, room, counter);
        set_field(&mut t, &mut f, k, lo.clone());
        // estimator is not additive in general; grow or shrink by chars
        while !fits(&t, &f) && !lo.is_empty() {
            lo.pop();
            set_field(&mut t, &mut f, k, lo.clone());
        }
        for c in original[lo.len()..].chars() {
            let mut next = lo.clone();
            next.push(c);
            set_field(&mut t, &mut f, k, next.clone());
            if !fits(&t, &f) {
                set_field(&mut t, &mut f, k, lo.clone());
                break;
            }
            lo = next;
        }
        break;
    }
    t.log_snippets.retain(|s| !s.is_empty());
    (t, f)
}

fn field<'a>(t: &'a Ticket, f: &'a FaultAnalysis, k: usize) -> &'a String {
    let n = t.log_snippets.len();
    match k {
        0 => &t.product_name,
        1 => &t.hardware_unit,
        2 => &t.software_build,
        3 => &t.title,
        4 => &t.problem_description,
        k if k < 5 + n => &t.log_snippets[k - 5],
        k if k == 5 + n => &f.identification,
        k if k == 6 + n => &f.root_cause,
        _ => &f.resolution,
    }
}

fn set_field(t: &mut Ticket, f: &mut FaultAnalysis, k: usize, v: String) {
    let n = t.log_snippets.len();
    match k {
        0 => t.product_name = v,
        1 => t.hardware_unit = v,
        2 => t.software_build = v,
        3 => t.title = v,
        4 => t.problem_description = v,
        k if k < 5 + n => t.log_snippets[k - 5] = v,
        k if k == 5 + n => f.identification = v,
        k if k == 6 + n => f.root_cause = v,
        _ => f.resolution = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TicketFaultLink;
    use crate::mock::MockEmbedder;
    use crate::text::ByteEstimator;

    fn v(x: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let x = v(&[0.3, -1.2, 4.0]);
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77)), evaluated with mpmath at 50 digits
        let c = cosine(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974_631_846_197_075_8).abs() < 1e-9);
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
        assert!(cosine(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn top_k_small_index() {
        let mut idx = VectorIndex::new(2);
        idx.insert("b".into(), Modality::Ticket, v(&[1.0, 0.0])).unwrap();
        idx.insert("a".into(), Modality::Ticket, v(&[1.0, 0.0])).unwrap();
        idx.insert("c".into(), Modality::Ticket, v(&[0.0, 1.0])).unwrap();
        idx.insert("a".into(), Modality::FaultAnalysis, v(&[1.0, 1.0])).unwrap();
        assert!(idx.insert("a".into(), Modality::Ticket, v(&[1.0, 0.0])).is_err());
        assert!(idx.insert("z".into(), Modality::Ticket, v(&[1.0])).is_err());
        let r = top_k(&idx, &v(&[1.0, 0.0]), 10, Modality::Ticket).unwrap();
        let ids: Vec<&str> = r.iter().map(|s| s.item_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!((r[0].score - 1.0).abs() < 1e-12);
        assert!(top_k(&idx, &v(&[1.0, 0.0]), 0, Modality::Ticket).is_err());
    }

    fn corpus(n: usize, words: usize) -> Corpus {
        let tickets = (0..n)
            .map(|i| Ticket {
                id: format!("t{i}"),
                title: format!("shared{} word{i}", i % 3),
                problem_description: "x".repeat(words),
                ..Default::default()
            })
            .collect();
        let faults = (0..n)
            .map(|i| FaultAnalysis {
                id: format!("f{i}"),
                identification: format!("shared{} report{i}", i % 3),
                ..Default::default()
            })
            .collect();
        let links = (0..n)
            .map(|i| TicketFaultLink {
                ticket_id: format!("t{i}"),
                fault_analysis_id: format!("f{i}"),
            })
            .collect();
        Corpus::new(tickets, faults, links, vec![]).unwrap()
    }

    fn ensemble(c: &Corpus, seeds: &[u64]) -> RankerEnsemble {
        let embedders: Vec<Arc<dyn Embedder>> = seeds
            .iter()
            .map(|&s| Arc::new(MockEmbedder::new(64, s).unwrap()) as Arc<dyn Embedder>)
            .collect();
        RankerEnsemble::build(embedders, c).unwrap()
    }

    #[test]
    fn single_ranker_consensus_is_dual_level_ranking() {
        let c = corpus(8, 4);
        let e = ensemble(&c, &[1]);
        let q = c.ticket("t2").unwrap().clone();
        let res = e.consensus_retrieve(&q, 8, 8).unwrap();
        let qv = e.embed_query(&q).unwrap();
        let dual = e.dual_scores(0, &qv[0]).unwrap();
        let mut oracle: Vec<ScoredItem> = e
            .ticket_ids()
            .iter()
            .zip(&dual)
            .map(|(id, s)| ScoredItem {
                item_id: id.clone(),
                score: s / 2.0,
            })
            .collect();
        sort_scored(&mut oracle);
        assert_eq!(res.items, oracle);
        assert_eq!(res.items[0].item_id, "t2");
    }

    #[test]
    fn consensus_argument_validation() {
        let c = corpus(3, 1);
        let e = ensemble(&c, &[1, 2]);
        let q = c.ticket("t0").unwrap().clone();
        assert!(e.consensus_retrieve(&q, 1, 2).is_err());
        assert!(e.consensus_retrieve(&q, 1, 0).is_err());
    }

    #[test]
    fn aggregate_report_score_is_mean_of_rankers() {
        let c = corpus(3, 1);
        let e = ensemble(&c, &[1, 2, 3]);
        let t = c.ticket("t0").unwrap();
        let s = e.aggregate_report_score(t, &ticket_text(t)).unwrap();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn budget_larger_than_corpus_takes_everything() {
        let c = corpus(5, 10);
        let e = ensemble(&c, &[4, 5]);
        let q = c.ticket("t1").unwrap().clone();
        let sel = select_demonstrations(&e, &c, &q, 1_000_000, &ByteEstimator).unwrap();
        assert_eq!(sel.demonstrations.len(), 5);
        assert!(!sel.oversized_top1);
        let ranked = e.consensus_retrieve(&q, 5, 5).unwrap();
        let ids: Vec<&str> = sel.demonstrations.iter().map(|d| d.ticket.id.as_str()).collect();
        let expect: Vec<&str> = ranked.items.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(ids, expect);
    }

    #[test]
    fn budget_one_keeps_single_truncated_demo() {
        let c = corpus(4, 50);
        let e = ensemble(&c, &[4]);
        let q = c.ticket("t1").unwrap().clone();
        let sel = select_demonstrations(&e, &c, &q, 1, &ByteEstimator).unwrap();
        assert_eq!(sel.demonstrations.len(), 1);
        assert!(sel.oversized_top1);
        assert!(sel.demonstrations[0].truncated);
        assert!(sel.demonstrations[0].ticket.problem_description.is_empty());
    }

    #[test]
    fn truncation_fills_budget_exactly_when_possible() {
        let c = corpus(2, 400);
        let e = ensemble(&c, &[4]);
        let q = c.ticket("t0").unwrap().clone();
        let sel = select_demonstrations(&e, &c, &q, 60, &ByteEstimator).unwrap();
        assert!(sel.oversized_top1);
        assert!(sel.total_tokens <= 60);
        assert!(sel.total_tokens >= 59);
    }

    #[test]
    fn ensemble_rejects_mismatched_indexes() {
        let c = corpus(3, 1);
        let other = corpus(2, 1);
        let emb: Arc<dyn Embedder> = Arc::new(MockEmbedder::new(8, 0).unwrap());
        let r = Ranker::build(emb, &other).unwrap();
        assert!(RankerEnsemble::from_rankers(vec![r], &c).is_err());
        assert!(RankerEnsemble::from_rankers(vec![], &c).is_err());
    }
}
