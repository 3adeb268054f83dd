use std::collections::HashSet;

use nalgebra::DMatrix;
use proptest::prelude::*;

use spce::metrics::{centered_l2_discrepancy, max_abs_correlation, maximin_distance};
use spce::sampling::*;

fn stratum_counts(col: impl Iterator<Item = f64>, strata: usize) -> Vec<usize> {
    let mut count = vec![0; strata];
    for v in col {
        count[((v * strata as f64) as usize).min(strata - 1)] += 1;
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lhs_stratification_is_exact(n in 1usize..80, m in 1usize..6, seed in any::<u64>()) {
        let d = lhs(n, m, seed).unwrap();
        for k in 0..m {
            let counts = stratum_counts(d.points().column(k).iter().copied(), n);
            prop_assert!(counts.iter().all(|&c| c == 1));
            let rec = &d.strata().unwrap()[k];
            for i in 0..n {
                prop_assert_eq!(((d.points()[(i, k)] * n as f64) as usize).min(n - 1), rec[i]);
            }
        }
    }

    #[test]
    fn optimized_lhs_stays_latin(n in 2usize..40, seed in any::<u64>(), corr in any::<bool>()) {
        let crit = if corr { LhsCriterion::MinCorr } else { LhsCriterion::Maximin };
        let d = optimized_lhs(n, 3, seed, crit, 4).unwrap();
        for k in 0..3 {
            let counts = stratum_counts(d.points().column(k).iter().copied(), n);
            prop_assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn nested_enrichment_keeps_prefix_and_bound(n in 1usize..30, m in 1usize..4, seed in any::<u64>()) {
        let base = lhs(n, m, seed).unwrap();
        let e = nested_lhs_enrich(&base, n, seed.wrapping_add(1)).unwrap();
        prop_assert_eq!(e.len(), 2 * n);
        prop_assert_eq!(&e.points().rows(0, n).clone_owned(), base.points());
        for k in 0..m {
            let counts = stratum_counts(e.points().column(k).iter().copied(), 2 * n);
            prop_assert!(counts.iter().all(|&c| c <= 2));
        }
    }

    #[test]
    fn nested_enrichment_fills_least_occupied(n_en in 1usize..12, seed in any::<u64>()) {
        // all originals crowd the first fine stratum
        let base = UnitDesign::new(DMatrix::from_element(6, 1, 0.01), Generator::External, 0).unwrap();
        let e = nested_lhs_enrich(&base, n_en, seed).unwrap();
        let total = 6 + n_en;
        let counts = stratum_counts(e.points().rows(6, n_en).iter().copied(), total);
        let empties = total - 1;
        if n_en <= empties {
            prop_assert!(counts[0] == 0 && counts.iter().all(|&c| c <= 1));
        }
    }

    #[test]
    fn samplers_are_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(monte_carlo(20, 3, seed).unwrap(), monte_carlo(20, 3, seed).unwrap());
        prop_assert_eq!(lhs(20, 3, seed).unwrap(), lhs(20, 3, seed).unwrap());
        prop_assert_eq!(sobol_sequence(20, 3, seed % 1000).unwrap(), sobol_sequence(20, 3, seed % 1000).unwrap());
    }
}

#[test]
fn monte_carlo_mean_and_shape() {
    let d = monte_carlo(100_000, 1, 42).unwrap();
    let mean = d.points().mean();
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
    let single = monte_carlo(1, 62, 1).unwrap();
    assert_eq!(single.points().shape(), (1, 62));
    assert!(single.points().iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn sobol_dyadic_net() {
    for k in 1..=10 {
        let n = 1usize << k;
        // the first 2^k points of the full sequence including the origin form a net;
        // skipping the origin, points 1..2^k still hit each interval except that
        // point 2^k lands in the interval of the origin
        let d = sobol_points(n - 1, 1, 0).unwrap();
        let mut counts = stratum_counts(d.column(0).iter().copied(), n);
        counts[0] += 1;
        assert!(counts.iter().all(|&c| c == 1), "k={k}");
    }
}

#[test]
fn sobol_offsets_are_disjoint() {
    let a = sobol_points(1000, 4, 0).unwrap();
    let b = sobol_points(1000, 4, 1000).unwrap();
    let key = |m: &DMatrix<f64>, i: usize| -> Vec<u64> { m.row(i).iter().map(|v| v.to_bits()).collect() };
    let sa: HashSet<_> = (0..1000).map(|i| key(&a, i)).collect();
    assert!((0..1000).all(|i| !sa.contains(&key(&b, i))));
}

#[test]
fn sobol_supports_high_dimension() {
    let d = sobol_sequence(64, 62, 0).unwrap();
    assert!(d.points().iter().all(|v| (0.0..1.0).contains(v)));
    // every one-dimensional projection of the first 63 points misses only the origin cell
    for k in 0..62 {
        let col = sobol_points(63, 62, 0).unwrap().column(k).clone_owned();
        let mut counts = stratum_counts(col.iter().copied(), 64);
        counts[0] += 1;
        assert!(counts.iter().all(|&c| c == 1), "dim {k}");
    }
}

#[test]
fn sobol_discrepancy_decreases() {
    for m in [1, 2, 4, 8] {
        let small = centered_l2_discrepancy(&sobol_points(64, m, 0).unwrap()).unwrap();
        let large = centered_l2_discrepancy(&sobol_points(1024, m, 0).unwrap()).unwrap();
        assert!(large < small, "m={m}");
    }
}

#[test]
fn lhs_single_point() {
    let d = lhs(1, 4, 3).unwrap();
    assert_eq!(d.len(), 1);
    assert!(d.points().iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn optimized_lhs_single_candidate_is_plain_lhs() {
    for crit in [LhsCriterion::Maximin, LhsCriterion::MinCorr] {
        let a = optimized_lhs(25, 3, 17, crit, 1).unwrap();
        let b = lhs(25, 3, 17).unwrap();
        assert_eq!(a.points(), b.points());
    }
}

#[test]
fn maximin_lhs_beats_every_candidate() {
    let chosen = optimized_lhs(30, 3, 5, LhsCriterion::Maximin, 5).unwrap();
    let dmin = maximin_distance(chosen.points()).unwrap();
    let pool = lhs_candidates(30, 3, 5, 5).unwrap();
    assert!(pool.iter().any(|c| c.points() == chosen.points()));
    for c in &pool {
        assert!(dmin >= maximin_distance(c.points()).unwrap());
    }
}

#[test]
fn min_corr_lhs_beats_median_candidate() {
    let chosen = optimized_lhs(50, 2, 9, LhsCriterion::MinCorr, 5).unwrap();
    let mut corr: Vec<f64> = lhs_candidates(50, 2, 9, 5)
        .unwrap()
        .iter()
        .map(|c| max_abs_correlation(c.points()))
        .collect();
    corr.sort_by(|a, b| a.total_cmp(b));
    assert!(max_abs_correlation(chosen.points()) <= corr[2]);
    assert_eq!(max_abs_correlation(chosen.points()), corr[0]);
}

#[test]
fn sobol_matches_reference_values() {
    // frozen from an independent direction-number implementation, unscrambled
    let cols = [0usize, 1, 2, 5, 9, 30, 61, 99];
    let reference: [(u64, [f64; 8]); 4] = [
        (
            100,
            [
                0.4140625, 0.2578125, 0.7734375, 0.7421875, 0.6953125, 0.7109375, 0.0234375, 0.8828125,
            ],
        ),
        (
            777,
            [
                0.6923828125,
                0.9365234375,
                0.1630859375,
                0.3564453125,
                0.3232421875,
                0.5419921875,
                0.4892578125,
                0.5107421875,
            ],
        ),
        (
            1023,
            [
                0.0009765625,
                0.7529296875,
                0.6123046875,
                0.4384765625,
                0.8505859375,
                0.9287109375,
                0.1962890625,
                0.5302734375,
            ],
        ),
        (
            1099,
            [
                0.46240234375,
                0.58740234375,
                0.56494140625,
                0.72705078125,
                0.64794921875,
                0.14306640625,
                0.41162109375,
                0.64697265625,
            ],
        ),
    ];
    for (index, want) in reference {
        let p = sobol_points(1, 100, index - 1).unwrap();
        for (k, w) in cols.iter().zip(want) {
            assert_eq!(p[(0, *k)], w, "index {index}, dim {k}");
        }
    }
}
