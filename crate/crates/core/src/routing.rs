//! Team routing by retrieval majority vote and by generative label prediction.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{Adapter, GenerationParams, GenerationRequest, Generator};
use crate::curation::Corpus;
use crate::domain::{LabelSet, TeamLabel, Ticket};
use crate::error::Error;
use crate::prompts::build_routing_prompt;
use crate::retrieval::{RankerEnsemble, ScoredItem};

pub const DEFAULT_ROUTE_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMethod {
    Retrieval,
    Generative,
}

/// One generation call made by the generative router.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedLabel {
    pub call: usize,
    pub seed: u64,
    pub temperature: f64,
    pub raw: String,
    pub label: Option<TeamLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum RoutingEvidence {
    Retrieved(Vec<ScoredItem>),
    Generated(Vec<GeneratedLabel>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPrediction {
    pub top1: TeamLabel,
    pub top2: Option<TeamLabel>,
    pub method: RoutingMethod,
    pub evidence: RoutingEvidence,
    /// Generated outputs that failed validation before falling back to retrieval.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_generations: Vec<GeneratedLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Majority vote over labelled neighbours.
///
/// Ties go to the larger summed score, then to the lexicographically smaller
/// label. Returns the winner and the runner-up label.
pub fn majority_vote(votes: &[(TeamLabel, f64)]) -> Option<(TeamLabel, Option<TeamLabel>)> {
    let mut tally: BTreeMap<&TeamLabel, (usize, f64)> = BTreeMap::new();
    for (label, score) in votes {
        let e = tally.entry(label).or_default();
        e.0 += 1;
        e.1 += score;
    }
    let mut ranked: Vec<(&TeamLabel, (usize, f64))> = tally.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1 .0
            .cmp(&a.1 .0)
            .then_with(|| b.1 .1.total_cmp(&a.1 .1))
            .then_with(|| a.0.cmp(b.0))
    });
    let mut it = ranked.into_iter().map(|(l, _)| l.clone());
    let top1 = it.next()?;
    Some((top1, it.next()))
}

/// Majority label among the consensus top-`k` neighbours.
pub fn route_by_retrieval(
    ensemble: &RankerEnsemble,
    corpus: &Corpus,
    labels: &LabelSet,
    ticket: &Ticket,
    k: usize,
    candidate_order: usize,
) -> Result<RoutingPrediction, Error> {
    let res = ensemble.consensus_retrieve(ticket, candidate_order.max(k), k)?;
    let votes: Vec<(TeamLabel, f64)> = res
        .items
        .iter()
        .filter_map(|i| corpus.team_label(&i.item_id).map(|l| (l.clone(), i.score)))
        .filter(|(l, _)| labels.contains(l))
        .collect();
    match majority_vote(&votes) {
        Some((top1, top2)) => Ok(RoutingPrediction {
            top1,
            top2,
            method: RoutingMethod::Retrieval,
            evidence: RoutingEvidence::Retrieved(res.items),
            rejected_generations: Vec::new(),
            diagnostic: None,
        }),
        None => Ok(RoutingPrediction {
            top1: labels.catch_all(),
            top2: None,
            method: RoutingMethod::Retrieval,
            evidence: RoutingEvidence::Retrieved(Vec::new()),
            rejected_generations: Vec::new(),
            diagnostic: Some(if res.empty_intersection {
                "empty retrieval: ranker candidate sets do not intersect".into()
            } else {
                "empty retrieval: no labelled neighbours".into()
            }),
        }),
    }
}

/// Two routing-adapter calls emulate a top-2 decode: seed `seed` at
/// temperature 0, then `seed + 1` at temperature 0.1. Outputs are validated
/// against `labels`; if none is valid, `fallback` (normally
/// [`route_by_retrieval`]) decides and the rejected outputs are recorded.
pub fn route_by_generation<F>(
    generator: &dyn Generator,
    ticket: &Ticket,
    labels: &LabelSet,
    seed: u64,
    fallback: F,
) -> Result<RoutingPrediction, Error>
where
    F: FnOnce() -> Result<RoutingPrediction, Error>,
{
    let messages = build_routing_prompt(ticket);
    let mut calls = Vec::with_capacity(2);
    for (call, temperature) in [0.0, 0.1].into_iter().enumerate() {
        let call_seed = seed.wrapping_add(call as u64);
        let params = GenerationParams::default()
            .with_temperature(temperature)
            .with_seed(call_seed);
        let req = GenerationRequest::new(Some(Adapter::Routing), messages.clone(), params)?;
        let raw = generator.generate(&req)?;
        let label = labels.normalize(&raw);
        calls.push(GeneratedLabel {
            call,
            seed: call_seed,
            temperature,
            raw,
            label,
        });
    }
    let mut valid = calls.iter().filter_map(|c| c.label.clone());
    match valid.next() {
        Some(top1) => {
            let top2 = valid.find(|l| *l != top1);
            Ok(RoutingPrediction {
                top1,
                top2,
                method: RoutingMethod::Generative,
                evidence: RoutingEvidence::Generated(calls),
                rejected_generations: Vec::new(),
                diagnostic: None,
            })
        }
        None => {
            let mut p = fallback()?;
            p.rejected_generations = calls;
            p.diagnostic = Some("generated labels outside the label set; fell back to retrieval".into());
            Ok(p)
        }
    }
}
