//! Preference triples from ranker score gaps, plus character-histogram
//! detection of degenerate generations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Generator;
use crate::curation::Corpus;
use crate::domain::fault_analysis_text;
use crate::error::Error;
use crate::fault_analysis::{generate_candidates, TemperatureGrid};
use crate::prompts::build_fa_prompt;
use crate::retrieval::RankerEnsemble;
use crate::text::stable_hash;

pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_P_GROUNDTRUTH: f64 = 0.5;
pub const DEFAULT_PATHOLOGY_THRESHOLD: f64 = 0.07;

/// Relative frequency of each Unicode scalar value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CharHistogram(BTreeMap<char, f64>);

impl CharHistogram {
    pub fn get(&self, c: char) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, f64)> + '_ {
        self.0.iter().map(|(c, f)| (*c, *f))
    }
}

pub fn char_histogram(text: &str) -> CharHistogram {
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    let mut total = 0usize;
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    CharHistogram(
        counts
            .into_iter()
            .map(|(c, n)| (c, n as f64 / total as f64))
            .collect(),
    )
}

/// How two histograms are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramDistance {
    /// Largest per-character absolute frequency difference.
    #[default]
    MaxAbs,
    /// Half the L1 distance.
    TotalVariation,
}

pub fn histogram_distance(a: &CharHistogram, b: &CharHistogram, metric: HistogramDistance) -> f64 {
    let chars: BTreeSet<char> = a.0.keys().chain(b.0.keys()).copied().collect();
    let diffs = chars.into_iter().map(|c| libm::fabs(a.get(c) - b.get(c)));
    match metric {
        HistogramDistance::MaxAbs => diffs.fold(0.0, f64::max),
        HistogramDistance::TotalVariation => diffs.sum::<f64>() / 2.0,
    }
}

/// Max per-character frequency difference between the two texts, in [0, 1].
pub fn pathology_score(generated: &str, reference: &str) -> f64 {
    histogram_distance(
        &char_histogram(generated),
        &char_histogram(reference),
        HistogramDistance::MaxAbs,
    )
}

pub fn is_pathological(generated: &str, reference: &str, threshold: f64) -> bool {
    pathology_score(generated, reference) > threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ScoreGap,
    Pathology,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChosenSource {
    Groundtruth,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriple {
    pub ticket_id: String,
    pub chosen: String,
    pub rejected: String,
    pub provenance: Provenance,
    pub chosen_source: ChosenSource,
    /// (higher, lower) scores of the candidate pair behind a score-gap triple.
    pub pair_scores: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceConfig {
    pub grid: TemperatureGrid,
    pub tau: f64,
    pub p_groundtruth: f64,
    pub pathology_threshold: f64,
    pub include_pathology: bool,
    pub seed: u64,
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        PreferenceConfig {
            grid: TemperatureGrid::preference(),
            tau: DEFAULT_TAU,
            p_groundtruth: DEFAULT_P_GROUNDTRUTH,
            pathology_threshold: DEFAULT_PATHOLOGY_THRESHOLD,
            include_pathology: false,
            seed: 0,
        }
    }
}

impl PreferenceConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.grid.validate()?;
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(Error::invalid("tau must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p_groundtruth) {
            return Err(Error::invalid("p_groundtruth must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.pathology_threshold) {
            return Err(Error::invalid("pathology threshold must be in [0, 1]"));
        }
        Ok(())
    }

    fn ticket_rng(&self, ticket_id: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stable_hash(self.seed, ticket_id.as_bytes()))
    }
}

/// Triples for one ticket from already-scored candidates.
///
/// Every candidate pair whose score gap exceeds `tau` yields one score-gap
/// triple whose rejected side is the lower-scored candidate; the chosen side
/// is the groundtruth with probability `p_groundtruth`, else the higher-scored
/// candidate. Pathology triples are appended afterwards so the score-gap
/// draws do not depend on `include_pathology`.
pub fn triples_for_ticket(
    ticket_id: &str,
    groundtruth: &str,
    scored: &[(String, f64)],
    cfg: &PreferenceConfig,
) -> Vec<PreferenceTriple> {
    let mut rng = cfg.ticket_rng(ticket_id);
    let mut out = Vec::new();
    for i in 0..scored.len() {
        for j in i + 1..scored.len() {
            let (hi, lo) = if scored[i].1 >= scored[j].1 {
                (&scored[i], &scored[j])
            } else {
                (&scored[j], &scored[i])
            };
            if hi.1 - lo.1 <= cfg.tau {
                continue;
            }
            let use_gt = rng.random_bool(cfg.p_groundtruth);
            let (chosen, source) = if use_gt {
                (groundtruth, ChosenSource::Groundtruth)
            } else {
                (hi.0.as_str(), ChosenSource::Generated)
            };
            out.push(PreferenceTriple {
                ticket_id: ticket_id.into(),
                chosen: chosen.into(),
                rejected: lo.0.clone(),
                provenance: Provenance::ScoreGap,
                chosen_source: source,
                pair_scores: Some((hi.1, lo.1)),
            });
        }
    }
    if cfg.include_pathology {
        for (text, _) in scored {
            if is_pathological(text, groundtruth, cfg.pathology_threshold) {
                out.push(PreferenceTriple {
                    ticket_id: ticket_id.into(),
                    chosen: groundtruth.into(),
                    rejected: text.clone(),
                    provenance: Provenance::Pathology,
                    chosen_source: ChosenSource::Groundtruth,
                    pair_scores: None,
                });
            }
        }
    }
    out.retain(|t| t.chosen != t.rejected);
    out
}

/// Sorts by (ticket, provenance, rejected, chosen) and drops repeats.
pub fn normalize_triples(triples: &mut Vec<PreferenceTriple>) {
    triples.sort_by(|a, b| {
        a.ticket_id
            .cmp(&b.ticket_id)
            .then(a.provenance.cmp(&b.provenance))
            .then_with(|| a.rejected.cmp(&b.rejected))
            .then_with(|| a.chosen.cmp(&b.chosen))
    });
    triples.dedup_by(|a, b| {
        a.ticket_id == b.ticket_id
            && a.provenance == b.provenance
            && a.rejected == b.rejected
            && a.chosen == b.chosen
    });
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub triples: Vec<PreferenceTriple>,
    /// Tickets without a groundtruth report.
    pub skipped: Vec<String>,
}

/// Generates `cfg.grid` candidates per linked ticket, scores them with the
/// ensemble and collects the triples.
pub fn build_preference_dataset(
    corpus: &Corpus,
    generator: &dyn Generator,
    ensemble: &RankerEnsemble,
    cfg: &PreferenceConfig,
) -> Result<PreferenceDataset, Error> {
    cfg.validate()?;
    let mut ds = PreferenceDataset::default();
    for ticket in corpus.tickets() {
        let Some(gt) = corpus.fault_of(&ticket.id) else {
            ds.skipped.push(ticket.id.clone());
            continue;
        };
        let seed = stable_hash(cfg.seed, ticket.id.as_bytes());
        let batch = generate_candidates(generator, ticket, &cfg.grid, seed)?;
        let texts: Vec<&str> = batch.candidates.iter().map(|c| c.text.as_str()).collect();
        let scores = ensemble.aggregate_report_scores(ticket, &texts)?;
        let scored: Vec<(String, f64)> = batch
            .candidates
            .into_iter()
            .map(|c| c.text)
            .zip(scores)
            .collect();
        ds.triples
            .extend(triples_for_ticket(&ticket.id, &fault_analysis_text(gt), &scored, cfg));
    }
    normalize_triples(&mut ds.triples);
    Ok(ds)
}

/// One line of the DPO export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub ticket_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub provenance: Provenance,
}

pub fn preference_records(corpus: &Corpus, triples: &[PreferenceTriple]) -> Vec<PreferenceRecord> {
    triples
        .iter()
        .map(|t| PreferenceRecord {
            ticket_id: t.ticket_id.clone(),
            prompt: corpus
                .ticket(&t.ticket_id)
                .map(|tk| build_fa_prompt(tk)[1].content.clone())
                .unwrap_or_default(),
            chosen: t.chosen.clone(),
            rejected: t.rejected.clone(),
            provenance: t.provenance,
        })
        .collect()
}
