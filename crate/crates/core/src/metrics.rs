//! Retrieval, text-generation and classification metrics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{TeamLabel, Ticket};
use crate::error::Error;
use crate::retrieval::RankerEnsemble;
use crate::rlrf::pathology_score;
use crate::text::tokenize;

/// Fraction of queries whose groundtruth id is in the top `k`, per `k`.
pub fn recall_at_k<S: AsRef<str>>(
    rankings: &[Vec<S>],
    groundtruth: &[S],
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>, Error> {
    if rankings.len() != groundtruth.len() {
        return Err(Error::invalid("one groundtruth id per ranking is required"));
    }
    let n = rankings.len();
    let mut out = BTreeMap::new();
    for &k in ks {
        let hits = rankings
            .iter()
            .zip(groundtruth)
            .filter(|(r, gt)| r.iter().take(k).any(|id| id.as_ref() == gt.as_ref()))
            .count();
        out.insert(k, if n == 0 { 0.0 } else { hits as f64 / n as f64 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(overlap: usize, cand: usize, refr: usize) -> Self {
        let precision = if cand == 0 { 0.0 } else { overlap as f64 / cand as f64 };
        let recall = if refr == 0 { 0.0 } else { overlap as f64 / refr as f64 };
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

/// Clipped overlap and totals of n-grams.
fn clipped_overlap(cand: &[String], refr: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(refr, n);
    let overlap = c
        .iter()
        .map(|(g, &cc)| cc.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (overlap, c.values().sum(), r.values().sum())
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<Prf, Error> {
    if n == 0 {
        return Err(Error::invalid("ROUGE-N needs n >= 1"));
    }
    let (o, c, r) = clipped_overlap(&tokenize(candidate), &tokenize(reference), n);
    Ok(Prf::from_counts(o, c, r))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    Prf::from_counts(lcs_len(&c, &r), c.len(), r.len())
}

const BLEU_EPSILON: f64 = 1e-9;

/// Sentence BLEU with epsilon smoothing of zero n-gram matches.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, Error> {
    if max_n == 0 {
        return Err(Error::invalid("BLEU needs max_n >= 1"));
    }
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (o, total, _) = clipped_overlap(&c, &r, n);
        let p = if o == 0 {
            BLEU_EPSILON / total.max(1) as f64
        } else {
            o as f64 / total as f64
        };
        log_sum += libm::log(p);
    }
    let geo = libm::exp(log_sum / max_n as f64);
    let bp = if c.len() < r.len() {
        libm::exp(1.0 - r.len() as f64 / c.len() as f64)
    } else {
        1.0
    };
    Ok((geo * bp).clamp(0.0, 1.0))
}

/// Decides whether a candidate token may align with a reference token.
pub trait TokenMatcher {
    fn matches(&self, candidate: &str, reference: &str) -> bool;
}

/// Exact string equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl TokenMatcher for ExactMatch {
    fn matches(&self, candidate: &str, reference: &str) -> bool {
        candidate == reference
    }
}

pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_with(candidate, reference, &ExactMatch)
}

/// Greedy left-to-right unigram alignment, `F_mean = 10PR / (R + 9P)`,
/// fragmentation penalty `0.5 (chunks / matches)^3`.
pub fn meteor_with(candidate: &str, reference: &str, matcher: &dyn TokenMatcher) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    let mut used = vec![false; r.len()];
    let mut alignment: Vec<usize> = Vec::new();
    for ct in &c {
        if let Some(j) = (0..r.len()).find(|&j| !used[j] && matcher.matches(ct, &r[j])) {
            used[j] = true;
            alignment.push(j);
        }
    }
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + alignment.windows(2).filter(|w| w[1] != w[0] + 1).count();
    let p = m as f64 / c.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f_mean = 10.0 * p * rc / (rc + 9.0 * p);
    let frag = chunks as f64 / m as f64;
    let penalty = 0.5 * frag * frag * frag;
    f_mean * (1.0 - penalty)
}

/// Square count matrix, rows = actual label, columns = predicted label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, Error> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix must be square over its labels"));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn record(&mut self, actual: &TeamLabel, predicted: &TeamLabel) -> Result<(), Error> {
        let a = self.position(actual.as_str())?;
        let p = self.position(predicted.as_str())?;
        self.counts[a][p] += 1;
        Ok(())
    }

    fn position(&self, label: &str) -> Result<usize, Error> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.into()))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    /// (label, precision, recall, f1)
    pub per_label: Vec<(String, Prf)>,
}

pub fn macro_prf(cm: &ConfusionMatrix) -> Result<ClassificationReport, Error> {
    let n = cm.labels.len();
    if n == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let total = cm.total();
    let mut per_label = Vec::with_capacity(n);
    let mut diag = 0u64;
    for i in 0..n {
        let tp = cm.counts[i][i];
        diag += tp;
        let predicted: u64 = (0..n).map(|r| cm.counts[r][i]).sum();
        let actual: u64 = cm.counts[i].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        per_label.push((
            cm.labels[i].clone(),
            Prf {
                precision,
                recall,
                f1: f1(precision, recall),
            },
        ));
    }
    let mean = |f: fn(&Prf) -> f64| per_label.iter().map(|(_, p)| f(p)).sum::<f64>() / n as f64;
    Ok(ClassificationReport {
        accuracy: if total == 0 { 0.0 } else { diag as f64 / total as f64 },
        macro_p: mean(|p| p.precision),
        macro_r: mean(|p| p.recall),
        macro_f1: mean(|p| p.f1),
        per_label,
    })
}

/// Mean ensemble score over (ticket, report text) pairs.
pub fn rankers_score(ensemble: &RankerEnsemble, pairs: &[(Ticket, String)]) -> Result<f64, Error> {
    if pairs.is_empty() {
        return Err(Error::invalid("rankers score over an empty set"));
    }
    let mut total = 0.0;
    for (t, r) in pairs {
        total += ensemble.aggregate_report_score(t, r)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Fraction of (generated, groundtruth) pairs flagged as pathological.
pub fn pathology_ratio<S: AsRef<str>>(pairs: &[(S, S)], threshold: f64) -> Result<f64, Error> {
    if pairs.is_empty() {
        return Err(Error::invalid("pathology ratio over an empty set"));
    }
    let flagged = pairs
        .iter()
        .filter(|(g, r)| pathology_score(g.as_ref(), r.as_ref()) > threshold)
        .count();
    Ok(flagged as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    const TOL: f64 = 1e-12;

    #[test]
    fn recall_examples() {
        let r = vec![vec!["a", "b"], vec!["c", "d"]];
        let gt = vec!["a", "c"];
        assert_eq!(recall_at_k(&r, &gt, &[1, 10]).unwrap()[&1], 1.0);
        let gt = vec!["z", "y"];
        assert_eq!(recall_at_k(&r, &gt, &[1]).unwrap()[&1], 0.0);
        let r: Vec<Vec<String>> = vec![
            (0..20).map(|i| i.to_string()).collect(),
            (0..20).map(|i| i.to_string()).collect(),
        ];
        let gt = vec!["0".to_string(), "10".to_string()];
        assert_eq!(recall_at_k(&r, &gt, &[10]).unwrap()[&10], 0.5);
    }

    #[test]
    fn rouge_hand_example() {
        let p = rouge_n("the cat sat", "the cat sat down", 1).unwrap();
        assert!((p.precision - 1.0).abs() < TOL);
        assert!((p.recall - 0.75).abs() < TOL);
        assert!((p.f1 - 6.0 / 7.0).abs() < TOL);
        let l = rouge_l("the cat sat", "the cat sat down");
        assert!((l.f1 - 6.0 / 7.0).abs() < TOL);
        assert_eq!(rouge_n("a b", "c d", 2).unwrap().f1, 0.0);
        assert!(rouge_n("a", "a", 0).is_err());
    }

    #[test]
    fn bleu_examples() {
        assert!((bleu("a b c d e f", "a b c d e f", 4).unwrap() - 1.0).abs() < TOL);
        assert_eq!(bleu("", "a b", 4).unwrap(), 0.0);
        // precisions all 1, BP = exp(1 - 5/4)
        let b = bleu("a b c d", "a b c d e", 4).unwrap();
        assert!((b - libm::exp(-0.25)).abs() < 1e-12);
        assert!((b - 0.778_800_783_071_404_9).abs() < 1e-6);
    }

    #[test]
    fn meteor_examples() {
        // 1 chunk, 4 matches: 1 - 0.5 / 64
        assert!((meteor("a b c d", "a b c d") - 0.992_187_5).abs() < 1e-12);
        assert_eq!(meteor("a b", "c d"), 0.0);
        // reversed distinct tokens: chunks == matches, penalty 0.5
        assert!((meteor("d c b a", "a b c d") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn macro_hand_example() {
        let cm = ConfusionMatrix::from_counts(
            vec!["0".into(), "1".into()],
            vec![vec![3, 1], vec![2, 4]],
        )
        .unwrap();
        let r = macro_prf(&cm).unwrap();
        assert!((r.accuracy - 0.7).abs() < TOL);
        let f0 = 2.0 * 0.6 * 0.75 / (0.6 + 0.75);
        let f1v = 2.0 * 0.8 * (4.0 / 6.0) / (0.8 + 4.0 / 6.0);
        assert!((r.macro_f1 - (f0 + f1v) / 2.0).abs() < TOL);
        assert!((r.macro_f1 - 0.697).abs() < 1e-3);
    }

    #[test]
    fn never_predicted_label_has_zero_precision() {
        let cm = ConfusionMatrix::from_counts(
            vec!["a".into(), "b".into()],
            vec![vec![2, 0], vec![3, 0]],
        )
        .unwrap();
        let r = macro_prf(&cm).unwrap();
        assert_eq!(r.per_label[1].1.precision, 0.0);
        assert!(r.macro_p < 1.0);
        let perfect = ConfusionMatrix::from_counts(vec!["a".into()], vec![vec![5]]).unwrap();
        let r = macro_prf(&perfect).unwrap();
        assert_eq!((r.accuracy, r.macro_p, r.macro_r, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn pathology_ratio_examples() {
        let same = [("abc", "abc"), ("xyz", "xyz")];
        assert_eq!(pathology_ratio(&same, 0.07).unwrap(), 0.0);
        let bad = [("aaaa", "a fluent sentence")];
        assert_eq!(pathology_ratio(&bad, 0.07).unwrap(), 1.0);
        let mixed = [("aaaa", "prose text"), ("abc", "abc"), ("x", "x"), ("y", "y")];
        assert_eq!(pathology_ratio(&mixed, 0.07).unwrap(), 0.25);
    }
}
