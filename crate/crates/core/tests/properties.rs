mod common;

use common::{manifest, record, BINARY_SMILES};
use proptest::prelude::*;
use txf_core::analysis::{
    relative_difference, scoreboard, wilcoxon_signed_rank, ScoreRow, ScoreboardOptions,
};
use txf_core::bioseq::{percent_identity, BioSequence, SequenceKind};
use txf_core::corpus::{assign_splits, split_sizes, Label, MetricId, Split, SplitMethod, SplitSpec};
use txf_core::evalharness::metrics::{auprc, auroc, mae, spearman};
use txf_core::promptgen::{bin_label, render_target, BinningSpec};

fn dna() -> impl Strategy<Value = String> {
    "[ACGT]{1,30}"
}

proptest! {
    #[test]
    fn identity_is_symmetric(a in dna(), b in dna()) {
        let x = BioSequence::new(&a, SequenceKind::Nucleotide).unwrap();
        let y = BioSequence::new(&b, SequenceKind::Nucleotide).unwrap();
        let (ab, ba) = (percent_identity(&x, &y).unwrap(), percent_identity(&y, &x).unwrap());
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert_eq!(ab == 100.0, a == b);
    }

    #[test]
    fn one_corruption_lowers_identity_from_100(a in "[ACGT]{1,40}", pick in any::<prop::sample::Index>(), shift in 1u8..4) {
        let original = BioSequence::new(&a, SequenceKind::Nucleotide).unwrap();
        let mut bytes = a.clone().into_bytes();
        let i = pick.index(bytes.len());
        let bases = *b"ACGT";
        let at = bases.iter().position(|&c| c == bytes[i]).unwrap();
        bytes[i] = bases[(at + shift as usize) % 4];
        let corrupted = BioSequence::new(std::str::from_utf8(&bytes).unwrap(), SequenceKind::Nucleotide).unwrap();
        let same = percent_identity(&original, &original).unwrap();
        let after = percent_identity(&original, &corrupted).unwrap();
        prop_assert_eq!(same, 100.0);
        prop_assert!(after < same);
    }

    #[test]
    fn relative_difference_is_scale_invariant(model in 0.01f64..100.0, sota in 0.01f64..100.0, c in 0.001f64..1000.0, lower in any::<bool>()) {
        let row = |m: f64, s: f64| ScoreRow {
            task: "t".into(), feature_type: "SMILES".into(), metric: MetricId::Auroc,
            lower_is_better: lower, sota: Some(s), model: m,
        };
        let a = relative_difference(&row(model, sota)).unwrap();
        let b = relative_difference(&row(model * c, sota * c)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn scoreboard_partitions_rows(rows in prop::collection::vec((0.0f64..2.0, prop::option::of(0.1f64..2.0), any::<bool>()), 0..60), na_exceeds in any::<bool>()) {
        let rows: Vec<ScoreRow> = rows.into_iter().map(|(m, s, l)| ScoreRow {
            task: "t".into(), feature_type: "SMILES".into(), metric: MetricId::Mae,
            lower_is_better: l, sota: s, model: m,
        }).collect();
        let b = scoreboard(&rows, ScoreboardOptions { missing_sota_exceeds: na_exceeds, ..Default::default() });
        prop_assert_eq!(b.total(), rows.len());
    }

    #[test]
    fn signed_rank_p_is_symmetric_in_its_arguments(pairs in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0, any::<bool>()), 5..40)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let l: Vec<bool> = pairs.iter().map(|p| p.2).collect();
        let ab = wilcoxon_signed_rank(&a, &b, &l).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a, &l).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        prop_assert_eq!(ab.wins_a + ab.wins_b + ab.ties, pairs.len());
        prop_assert_eq!(ab.wins_a, ba.wins_b);
    }

    #[test]
    fn binning_is_monotone(x in -50.0f64..150.0, y in -50.0f64..150.0) {
        let spec = BinningSpec::new(0.0, 100.0, 1000).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(bin_label(lo, &spec).unwrap().0 <= bin_label(hi, &spec).unwrap().0);
    }

    #[test]
    fn distinct_bins_render_distinct_targets(x in 0.0f64..10.0, y in 0.0f64..10.0) {
        let mut m = manifest("task = t\nkind = regression\nlabel = Y\nlabel_range = 0 10\n");
        m.levels = 1000;
        let spec = BinningSpec::from_manifest(&m).unwrap();
        let (bx, by) = (bin_label(x, &spec).unwrap().0, bin_label(y, &spec).unwrap().0);
        let (tx, ty) = (render_target(&Label::Number(x), &m).unwrap(), render_target(&Label::Number(y), &m).unwrap());
        prop_assert_eq!(bx == by, tx == ty);
    }

    #[test]
    fn metrics_ignore_example_order(v in prop::collection::vec((0u8..10, any::<bool>(), 0.0f64..5.0), 2..80), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut w = v.clone();
        w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let cols = |v: &[(u8, bool, f64)]| -> (Vec<f64>, Vec<bool>, Vec<f64>) {
            (v.iter().map(|t| t.0 as f64).collect(), v.iter().map(|t| t.1).collect(), v.iter().map(|t| t.2).collect())
        };
        let (s1, l1, y1) = cols(&v);
        let (s2, l2, y2) = cols(&w);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-9,
            (a, b) => a == b,
        };
        prop_assert!(close(auroc(&s1, &l1), auroc(&s2, &l2)));
        prop_assert!(close(mae(&s1, &y1), mae(&s2, &y2)));
        prop_assert!(close(spearman(&s1, &y1), spearman(&s2, &y2)));
        // average precision breaks score ties by input order, so only tie-free scores are order-free
        let distinct: Vec<f64> = y1.clone();
        let mut sorted = distinct.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() == distinct.len() {
            prop_assert!(close(auprc(&y1, &l1), auprc(&y2, &l2)));
        }
    }

    #[test]
    fn random_split_partitions_and_repeats(n in 1usize..300, seed in 0u64..1000) {
        let m = manifest(BINARY_SMILES);
        let base: Vec<_> = (0..n).map(|i| record(&i.to_string(), &[("drug", "C")], Label::Binary(i % 2 == 0))).collect();
        let spec = SplitSpec { seed, ..SplitSpec::new(SplitMethod::Random) };
        let mut a = base.clone();
        assign_splits(&mut a, &m, &spec).unwrap();
        let mut b = base.clone();
        assign_splits(&mut b, &m, &spec).unwrap();
        prop_assert_eq!(&a, &b);
        let sizes = split_sizes(n, spec.fractions);
        for (k, s) in Split::ALL.iter().enumerate() {
            let got = a.iter().filter(|r| r.split == Some(*s)).count();
            prop_assert_eq!(got, sizes[k]);
            prop_assert!((got as f64 - spec.fractions[k] * n as f64).abs() <= 1.0 + 1e-9);
        }
        prop_assert!(a.iter().all(|r| r.split.is_some()));
    }
}
