//! Held-out evaluation runs producing a JSON report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use troubleshoot_core::domain::fault_analysis_text;
use troubleshoot_core::fault_analysis::{post_followup, CanonicalFollowUp, FollowUp};
use troubleshoot_core::judge::judge;
use troubleshoot_core::metrics::{
    bleu, macro_prf, meteor, pathology_ratio, rankers_score, recall_at_k, rouge_l, rouge_n, ConfusionMatrix,
};
use troubleshoot_core::routing::RoutingMethod;
use troubleshoot_core::text::stable_hash;
use troubleshoot_core::{Corpus, RankerEnsemble, Ticket};

use crate::config::ServiceConfig;
use crate::engine::{memory_pairs, Engine};
use crate::error::{AppError, Result};

pub const RECALL_KS: [usize; 4] = [1, 10, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Retrieval,
    Routing,
    Generation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub task: Task,
    pub seed: u64,
    pub test_fraction: f64,
    pub max_queries: usize,
    pub judge: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            task: Task::Retrieval,
            seed: 0,
            test_fraction: 0.2,
            max_queries: 200,
            judge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: Task,
    pub seed: u64,
    pub queries: usize,
    pub metrics: BTreeMap<String, f64>,
    pub details: Vec<serde_json::Value>,
}

impl EvaluationReport {
    /// Two-column plain-text table of the metrics.
    pub fn table(&self) -> String {
        let width = self.metrics.keys().map(String::len).max().unwrap_or(6).max(6);
        let mut s = format!("{:width$}  value\n", "metric");
        for (k, v) in &self.metrics {
            s.push_str(&format!("{k:width$}  {v:.4}\n"));
        }
        s
    }
}

/// Held-out queries and the corpus they are evaluated against.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Corpus,
    pub queries: Vec<Ticket>,
}

/// Picks query tickets whose report stays linked to at least one training
/// ticket, in seeded hash order.
pub fn split(corpus: &Corpus, test_fraction: f64, max_queries: usize, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(AppError::Validation("test_fraction must be in [0, 1)".into()));
    }
    let mut candidates: Vec<&Ticket> = corpus
        .tickets()
        .filter(|t| corpus.fault_id_of(&t.id).is_some_and(|f| corpus.tickets_of(f).len() >= 2))
        .collect();
    candidates.sort_by_key(|t| (stable_hash(seed, t.id.as_bytes()), t.id.clone()));
    let want = ((corpus.ticket_count() as f64 * test_fraction).ceil() as usize).min(max_queries);
    let mut remaining: BTreeMap<&str, usize> = BTreeMap::new();
    let mut held: BTreeSet<String> = BTreeSet::new();
    for t in candidates {
        if held.len() >= want {
            break;
        }
        let f = corpus.fault_id_of(&t.id).expect("filtered");
        let left = remaining.entry(f).or_insert_with(|| corpus.tickets_of(f).len());
        if *left >= 2 {
            *left -= 1;
            held.insert(t.id.clone());
        }
    }
    let train_ids: BTreeSet<String> = corpus.tickets().map(|t| t.id.clone()).filter(|id| !held.contains(id)).collect();
    Ok(Split {
        train: corpus.restrict_tickets(&train_ids),
        queries: held.iter().map(|id| corpus.ticket(id).expect("held id").clone()).collect(),
    })
}

pub fn run(config: &ServiceConfig, corpus: &Corpus, opts: &EvalOptions) -> Result<EvaluationReport> {
    let sp = split(corpus, opts.test_fraction, opts.max_queries, opts.seed)?;
    if sp.queries.is_empty() {
        return Err(AppError::Validation("no held-out queries: corpus has no report shared by two tickets".into()));
    }
    let ensemble = RankerEnsemble::build(config.build_embedders()?, &sp.train)?;
    let generator = config.build_generator(|| memory_pairs(&sp.train));
    let engine = Engine::from_parts(config.clone(), sp.train.clone(), ensemble, generator)?;
    match opts.task {
        Task::Retrieval => retrieval(&engine, corpus, &sp.queries, opts),
        Task::Routing => routing(&engine, corpus, &sp.queries, opts),
        Task::Generation => generation(&engine, corpus, &sp.queries, opts),
    }
}

fn retrieval(engine: &Engine, full: &Corpus, queries: &[Ticket], opts: &EvalOptions) -> Result<EvaluationReport> {
    let max_k = *RECALL_KS.iter().max().expect("non-empty");
    let order = engine.config.defaults.candidate_order.max(max_k);
    let ens = &engine.ensemble;
    let fault_ranking = |items: &[troubleshoot_core::ScoredItem]| -> Vec<String> {
        items
            .iter()
            .map(|i| engine.corpus.fault_id_of(&i.item_id).unwrap_or_default().to_string())
            .collect()
    };
    let mut consensus = Vec::with_capacity(queries.len());
    let mut singles: Vec<Vec<Vec<String>>> = vec![Vec::new(); ens.len()];
    let mut gt = Vec::with_capacity(queries.len());
    let mut details = Vec::new();
    for q in queries {
        let emb = ens.embed_query(q)?;
        let res = ens.consensus_from_embeddings(&emb, order, max_k)?;
        let ranking = fault_ranking(&res.items);
        let f = full.fault_id_of(&q.id).expect("queries are linked").to_string();
        details.push(json!({
            "ticket_id": q.id,
            "fault_analysis_id": f,
            "first_hit_rank": ranking.iter().position(|x| *x == f).map(|p| p + 1),
            "pool_size": res.pool.len(),
        }));
        consensus.push(ranking);
        for (i, s) in singles.iter_mut().enumerate() {
            let r = ens.single(i).consensus_from_embeddings(&emb[i..=i], order, max_k)?;
            s.push(fault_ranking(&r.items));
        }
        gt.push(f);
    }
    let mut metrics = BTreeMap::new();
    for (k, v) in recall_at_k(&consensus, &gt, &RECALL_KS)? {
        metrics.insert(format!("recall@{k}"), v);
    }
    for (i, s) in singles.iter().enumerate() {
        for (k, v) in recall_at_k(s, &gt, &RECALL_KS)? {
            metrics.insert(format!("ranker_{i}.recall@{k}"), v);
        }
    }
    Ok(EvaluationReport {
        task: Task::Retrieval,
        seed: opts.seed,
        queries: queries.len(),
        metrics,
        details,
    })
}

fn routing(engine: &Engine, full: &Corpus, queries: &[Ticket], opts: &EvalOptions) -> Result<EvaluationReport> {
    let labelled: Vec<&Ticket> = queries.iter().filter(|q| full.team_label(&q.id).is_some()).collect();
    if labelled.is_empty() {
        return Err(AppError::Validation("held-out queries carry no team labels".into()));
    }
    let mut metrics = BTreeMap::new();
    let mut details = Vec::new();
    for (name, method) in [("retrieval", RoutingMethod::Retrieval), ("generative", RoutingMethod::Generative)] {
        let mut cm = ConfusionMatrix::new(engine.labels.labels().to_vec());
        let mut top2_hits = 0usize;
        let mut fallbacks = 0usize;
        for (n, q) in labelled.iter().enumerate() {
            let actual = full.team_label(&q.id).expect("filtered");
            let p = engine.route(q, method, opts.seed.wrapping_add(2 * n as u64))?;
            cm.record(actual, &p.top1)?;
            if &p.top1 == actual || p.top2.as_ref() == Some(actual) {
                top2_hits += 1;
            }
            if p.method != method {
                fallbacks += 1;
            }
        }
        let rep = macro_prf(&cm)?;
        let total = labelled.len() as f64;
        metrics.insert(format!("{name}.accuracy"), rep.accuracy);
        metrics.insert(format!("{name}.macro_p"), rep.macro_p);
        metrics.insert(format!("{name}.macro_r"), rep.macro_r);
        metrics.insert(format!("{name}.macro_f1"), rep.macro_f1);
        metrics.insert(format!("{name}.top2_accuracy"), top2_hits as f64 / total);
        metrics.insert(format!("{name}.fallback_rate"), fallbacks as f64 / total);
        details.push(json!({ "method": name, "labels": cm.labels(), "confusion": cm.counts() }));
    }
    Ok(EvaluationReport {
        task: Task::Routing,
        seed: opts.seed,
        queries: labelled.len(),
        metrics,
        details,
    })
}

#[derive(Default)]
struct TextScores {
    pairs: Vec<(Ticket, String, String)>,
}

impl TextScores {
    fn push(&mut self, ticket: &Ticket, predicted: String, reference: String) {
        self.pairs.push((ticket.clone(), predicted, reference));
    }

    fn into_metrics(self, prefix: &str, ensemble: &RankerEnsemble, th: f64, out: &mut BTreeMap<String, f64>) -> Result<()> {
        let n = self.pairs.len() as f64;
        let mut sums = [0.0f64; 5];
        for (_, p, r) in &self.pairs {
            sums[0] += rouge_n(p, r, 1)?.f1;
            sums[1] += rouge_n(p, r, 2)?.f1;
            sums[2] += rouge_l(p, r).f1;
            sums[3] += bleu(p, r, 4)?;
            sums[4] += meteor(p, r);
        }
        for (name, s) in ["rouge1", "rouge2", "rougeL", "bleu", "meteor"].iter().zip(sums) {
            out.insert(format!("{prefix}.{name}"), s / n);
        }
        let scored: Vec<(Ticket, String)> = self.pairs.iter().map(|(t, p, _)| (t.clone(), p.clone())).collect();
        out.insert(format!("{prefix}.rankers_score"), rankers_score(ensemble, &scored)?);
        let pr: Vec<(&str, &str)> = self.pairs.iter().map(|(_, p, r)| (p.as_str(), r.as_str())).collect();
        out.insert(format!("{prefix}.pathology_ratio"), pathology_ratio(&pr, th)?);
        Ok(())
    }
}

fn generation(engine: &Engine, full: &Corpus, queries: &[Ticket], opts: &EvalOptions) -> Result<EvaluationReport> {
    let mut best_of_n = TextScores::default();
    let mut rag = TextScores::default();
    let mut judged: BTreeMap<&str, f64> = BTreeMap::new();
    let mut details = Vec::new();
    for (n, q) in queries.iter().enumerate() {
        let gt = full.fault_of(&q.id).expect("queries are linked");
        let reference = fault_analysis_text(gt);
        let seed = opts.seed.wrapping_add(1000 * n as u64);
        let analyzed = engine.analyze(q, None, seed)?;
        let best = analyzed.candidates[0].text.clone();
        let mut session = engine.open_session(q, None, seed, format!("eval-{n}"), 0)?;
        let reply = post_followup(
            &mut session,
            engine.generator.as_ref(),
            &FollowUp::Canonical(CanonicalFollowUp::FinalJsonReport),
        )?;
        let rag_text = reply
            .parsed_report
            .as_ref()
            .map(fault_analysis_text)
            .unwrap_or_else(|| reply.text.clone());
        if opts.judge {
            let v = judge(engine.generator.as_ref(), q, gt, &best)?;
            for (k, s) in [
                ("accuracy", v.accuracy.score),
                ("completeness", v.completeness.score),
                ("relevance", v.relevance.score),
                ("clarity", v.clarity.score),
            ] {
                *judged.entry(k).or_default() += f64::from(s);
            }
        }
        details.push(json!({
            "ticket_id": q.id,
            "best_score": analyzed.candidates[0].score,
            "candidates": analyzed.candidates.len(),
            "rag_parse_failed": reply.parse_failed,
            "demonstrations": session.demonstrations.len(),
        }));
        best_of_n.push(q, best, reference.clone());
        rag.push(q, rag_text, reference);
    }
    let th = engine.config.defaults.pathology_threshold;
    let mut metrics = BTreeMap::new();
    best_of_n.into_metrics("best_of_n", &engine.ensemble, th, &mut metrics)?;
    rag.into_metrics("rag", &engine.ensemble, th, &mut metrics)?;
    for (k, total) in judged {
        metrics.insert(format!("judge.{k}"), total / queries.len() as f64);
    }
    Ok(EvaluationReport {
        task: Task::Generation,
        seed: opts.seed,
        queries: queries.len(),
        metrics,
        details,
    })
}
