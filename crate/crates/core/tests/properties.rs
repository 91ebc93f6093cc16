use std::collections::BTreeSet;

use proptest::prelude::*;
use troubleshoot_core::curation::{compute_idf, contrastive_loss, filter_reports, informativeness_score};
use troubleshoot_core::metrics::{bleu, macro_prf, meteor, recall_at_k, rouge_l, rouge_n, ConfusionMatrix};
use troubleshoot_core::mock::MockEmbedder;
use troubleshoot_core::rlrf::{char_histogram, pathology_score};
use troubleshoot_core::routing::majority_vote;
use troubleshoot_core::synthetic::{generate, SyntheticConfig};
use troubleshoot_core::{Embedder, FaultAnalysis, LabelSet, TeamLabel};

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["alarm", "cell", "reset", "rru", "link", "down", "sw", "port", "vswr", "the"]), 0..30)
        .prop_map(|w| w.join(" "))
}

fn square(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max).prop_flat_map(|b| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, b), b))
}

fn labels() -> LabelSet {
    LabelSet::new(vec!["RAN".into(), "Core".into(), "Transport".into(), "Other".into()], "Other").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn loss_is_non_negative(sim in square(12), temp in 0.05f64..2.0) {
        prop_assert!(contrastive_loss(&sim, temp).unwrap() >= -1e-12);
    }

    #[test]
    fn loss_of_constant_matrix_is_ln_b(b in 1usize..40, c in -1.0f64..1.0, temp in 0.05f64..2.0) {
        let sim = vec![vec![c; b]; b];
        let loss = contrastive_loss(&sim, temp).unwrap();
        prop_assert!((loss - (b as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn raising_the_diagonal_lowers_the_loss(sim in square(10), bump in 0.01f64..1.0) {
        let before = contrastive_loss(&sim, 0.1).unwrap();
        let mut raised = sim.clone();
        for (i, row) in raised.iter_mut().enumerate() {
            row[i] += bump;
        }
        let after = contrastive_loss(&raised, 0.1).unwrap();
        prop_assert!(after <= before + 1e-12);
        if sim.len() > 1 {
            prop_assert!(after < before);
        }
    }

    #[test]
    fn idf_ignores_report_order(texts in prop::collection::vec(words(), 1..20), shift in 0usize..20) {
        let reports: Vec<FaultAnalysis> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| FaultAnalysis { id: format!("F{i}"), identification: t.clone(), ..Default::default() })
            .collect();
        let mut rotated = reports.clone();
        rotated.rotate_left(shift % reports.len());
        let a = compute_idf(&reports).unwrap();
        let b = compute_idf(&rotated).unwrap();
        prop_assert_eq!(&a, &b);
        for r in &reports {
            let s = informativeness_score(r, &a, 15).unwrap();
            prop_assert!(s >= 0.0 && s <= a.unknown_weight() + 1e-12);
        }
    }

    #[test]
    fn filtering_is_monotone_in_threshold(seed in 0u64..1000, lo in 0.0f64..6.0, gap in 0.0f64..3.0) {
        let cfg = SyntheticConfig { tickets: 60, faults: 20, seed, low_information_fraction: 0.3, ..Default::default() };
        let corpus = generate(&cfg, &labels()).unwrap();
        let (a, ra) = filter_reports(&corpus, lo, 15).unwrap();
        let (b, rb) = filter_reports(&corpus, lo + gap, 15).unwrap();
        prop_assert!(rb.kept <= ra.kept);
        prop_assert_eq!(ra.kept + ra.dropped, corpus.fault_count());
        let kept_a: BTreeSet<_> = a.fault_analyses().map(|f| f.id.clone()).collect();
        prop_assert!(b.fault_analyses().all(|f| kept_a.contains(&f.id)));
        prop_assert!(b.tickets().all(|t| b.fault_of(&t.id).is_some()));
    }

    #[test]
    fn pathology_score_is_a_bounded_symmetric_distance(a in ".{0,80}", b in ".{0,80}") {
        let ab = pathology_score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, pathology_score(&b, &a));
        prop_assert_eq!(pathology_score(&a, &a), 0.0);
        let reversed: String = a.chars().rev().collect();
        prop_assert!(pathology_score(&a, &reversed) < 1e-12);
    }

    #[test]
    fn histogram_sums_to_one(s in ".{1,200}") {
        let h = char_histogram(&s);
        let total: f64 = h.iter().map(|(_, f)| f).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn text_metrics_are_bounded(c in words(), r in words()) {
        for n in 1..=2 {
            let p = rouge_n(&c, &r, n).unwrap();
            for v in [p.precision, p.recall, p.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let l = rouge_l(&c, &r);
        prop_assert!((0.0..=1.0).contains(&l.f1));
        let b = bleu(&c, &r, 4).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
        let m = meteor(&c, &r);
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn rouge_l_is_one_on_identity(c in words()) {
        prop_assume!(!c.is_empty());
        prop_assert!((rouge_l(&c, &c).f1 - 1.0).abs() < 1e-12);
        prop_assert!((rouge_n(&c, &c, 1).unwrap().f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn macro_scores_ignore_label_order(counts in prop::collection::vec(prop::collection::vec(0u64..20, 4), 4), rot in 0usize..4) {
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let base = macro_prf(&ConfusionMatrix::from_counts(names.clone(), counts.clone()).unwrap()).unwrap();
        let perm: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
        let pnames = perm.iter().map(|&i| names[i].clone()).collect();
        let pcounts = perm.iter().map(|&i| perm.iter().map(|&j| counts[i][j]).collect()).collect();
        let other = macro_prf(&ConfusionMatrix::from_counts(pnames, pcounts).unwrap()).unwrap();
        prop_assert!((base.macro_p - other.macro_p).abs() < 1e-12);
        prop_assert!((base.macro_r - other.macro_r).abs() < 1e-12);
        prop_assert!((base.macro_f1 - other.macro_f1).abs() < 1e-12);
        prop_assert!((base.accuracy - other.accuracy).abs() < 1e-12);
    }

    #[test]
    fn recall_grows_with_k(rankings in prop::collection::vec(prop::collection::vec(0u8..30, 0..40), 1..20), gt_seed in any::<u64>()) {
        let rankings: Vec<Vec<String>> = rankings.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
        let gt: Vec<String> = (0..rankings.len()).map(|i| ((gt_seed >> (i % 60)) % 30).to_string()).collect();
        let ks = [1, 2, 5, 10, 20, 50];
        let r = recall_at_k(&rankings, &gt, &ks).unwrap();
        for w in ks.windows(2) {
            prop_assert!(r[&w[0]] <= r[&w[1]]);
        }
    }

    #[test]
    fn mock_embeddings_are_unit_or_zero(text in ".{0,120}", seed in any::<u64>(), dim in 1usize..256) {
        let e = MockEmbedder::new(dim, seed).unwrap();
        let v = e.embed_one(&text).unwrap();
        prop_assert_eq!(v.len(), dim);
        let n = v.norm();
        prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn majority_vote_picks_a_top_count_voter(votes in prop::collection::vec((0usize..4, 0.0f64..1.0), 1..12)) {
        let names = ["RAN", "Core", "Transport", "Other"];
        let ls = labels();
        let votes: Vec<(TeamLabel, f64)> = votes.iter().map(|(i, s)| (ls.parse(names[*i]).unwrap(), *s)).collect();
        let (winner, _) = majority_vote(&votes).unwrap();
        let count = |l: &TeamLabel| votes.iter().filter(|(v, _)| v == l).count();
        let best = votes.iter().map(|(l, _)| count(l)).max().unwrap();
        prop_assert_eq!(count(&winner), best);
    }
}
