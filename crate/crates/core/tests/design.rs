use nalgebra::DMatrix;
use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
use proptest::test_runner::RngSeed;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spce::design::{
    adaptive_sequential_run, d_optimal_select, s_optimal_select, seq_maximin_select, CandidatePool, FedorovOptions,
    SequentialConfig, Strategy,
};
use spce::input::{InputModel, Marginal};
use spce::metrics::s_value;
use spce::pce::{build_basis, degree_adaptive_fit, ModelMatrix, MultiIndex, PceConfig};
use spce::sampling::{monte_carlo, optimized_lhs, LhsCriterion};
use spce::Error;

fn uniform_input(m: usize) -> InputModel {
    InputModel::iid(Marginal::uniform(-1.0, 1.0).unwrap(), m).unwrap()
}

/// Orthonormal Legendre polynomials on [-1, 1], written out.
fn legendre(d: u32, x: f64) -> f64 {
    match d {
        0 => 1.0,
        1 => 3f64.sqrt() * x,
        2 => 5f64.sqrt() * (3.0 * x * x - 1.0) / 2.0,
        3 => 7f64.sqrt() * (5.0 * x * x * x - 3.0 * x) / 2.0,
        _ => unreachable!(),
    }
}

fn model_row(x: &[f64], basis: &[MultiIndex]) -> Vec<f64> {
    basis
        .iter()
        .map(|a| a.0.iter().zip(x).map(|(&d, &v)| legendre(d, v)).product())
        .collect()
}

fn model_matrix(points: &[Vec<f64>], basis: &[MultiIndex]) -> DMatrix<f64> {
    let rows: Vec<f64> = points.iter().flat_map(|p| model_row(p, basis)).collect();
    DMatrix::from_row_slice(points.len(), basis.len(), &rows)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn log_det(a: &DMatrix<f64>) -> f64 {
    let det = (a.transpose() * a).determinant();
    if det > 0.0 {
        det.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Random sub-basis of the degree-3 total-order basis, constant term first.
fn random_basis(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<MultiIndex> {
    let full = build_basis(m, 3, 1.0).unwrap();
    let mut picks = sample(rng, full.len() - 1, k - 1).into_vec();
    picks.sort_unstable();
    let mut basis = vec![full.indices()[0].clone()];
    basis.extend(picks.into_iter().map(|i| full.indices()[i + 1].clone()));
    basis
}

fn pool_from_unit(m: usize, unit: DMatrix<f64>) -> CandidatePool {
    CandidatePool::new(&uniform_input(m), unit).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 60,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    })]

    #[test]
    fn maximin_single_pick_is_brute_force_argmax(n_pool in 2usize..500, n_cur in 1usize..20, m in 1usize..4, seed in any::<u64>()) {
        let pool = pool_from_unit(m, monte_carlo(n_pool, m, seed).unwrap().into_points());
        let current = monte_carlo(n_cur, m, seed ^ 7).unwrap().into_points();
        let sel = seq_maximin_select(&pool, &current, 1).unwrap();
        let dist = |c: usize| -> f64 {
            (0..n_cur)
                .map(|i| (0..m).map(|k| (pool.unit()[(c, k)] - current[(i, k)]).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let best = (0..n_pool).map(dist).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(sel.rows.len(), 1);
        prop_assert!((dist(sel.rows[0]) - best).abs() <= 1e-12);
        prop_assert!((sel.criterion - best).abs() <= 1e-12);
    }

    #[test]
    fn s_optimal_single_pick_is_brute_force_argmax(n_pool in 2usize..500, k in 1usize..=6, extra in 0usize..12, seed in any::<u64>()) {
        let m = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_basis(m, k, &mut rng);
        let pool = pool_from_unit(m, monte_carlo(n_pool, m, seed).unwrap().into_points());
        let n_cur = (k + extra).saturating_sub(1);
        let current = monte_carlo(n_cur.max(1), m, seed ^ 3).unwrap().into_points();
        let current_std = uniform_input(m).unit_to_standard(&current).unwrap();
        let sel = s_optimal_select(&pool, &basis, 1, &current_std).unwrap();
        let cur_rows = rows_of(&current_std);
        let s_with = |c: usize| -> f64 {
            let mut pts = cur_rows.clone();
            pts.push(pool.standard().row(c).iter().copied().collect());
            s_value(&ModelMatrix::new(model_matrix(&pts, &basis)))
        };
        let scores: Vec<f64> = (0..n_pool).map(s_with).collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let chosen = scores[sel.rows[0]];
        prop_assert!(chosen >= best - 1e-10 * best.max(1e-300), "chosen {chosen} best {best}");
        let first = scores.iter().position(|&s| s >= best - 1e-10 * best).unwrap();
        if best > 0.0 && scores.iter().filter(|&&s| s >= best - 1e-8 * best).count() == 1 {
            prop_assert_eq!(sel.rows[0], first);
        }
    }

    #[test]
    fn fedorov_reaches_brute_force_optimum(n_pool in 4usize..=40, k in 1usize..=4, slack in 0usize..=3, seed in any::<u64>()) {
        let m = 2;
        let n_total = (k + slack).min(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_basis(m, k, &mut rng);
        let pool = pool_from_unit(m, monte_carlo(n_pool, m, seed).unwrap().into_points());
        let empty = DMatrix::zeros(0, m);
        let sel = d_optimal_select(&pool, &basis, n_total, &empty, &FedorovOptions::default()).unwrap();
        let pts = rows_of(pool.standard());
        let ld = |rows: &[usize]| -> f64 {
            let sub: Vec<Vec<f64>> = rows.iter().map(|&r| pts[r].clone()).collect();
            log_det(&model_matrix(&sub, &basis))
        };
        let mut best = f64::NEG_INFINITY;
        let mut idx: Vec<usize> = (0..n_total).collect();
        loop {
            best = best.max(ld(&idx));
            let mut i = n_total;
            while i > 0 && idx[i - 1] == n_pool - n_total + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..n_total {
                idx[j] = idx[j - 1] + 1;
            }
        }
        let got = ld(&sel.rows);
        prop_assert!(got >= best + 0.999f64.ln(), "got {got} best {best}");
        prop_assert!((sel.criterion - got).abs() < 1e-8 * (1.0 + got.abs()));
    }

    #[test]
    fn fedorov_is_locally_optimal_and_keeps_frozen_rows(seed in any::<u64>(), n_new in 1usize..6) {
        let m = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_basis(m, 5, &mut rng);
        let input = uniform_input(m);
        let pool = pool_from_unit(m, monte_carlo(150, m, seed).unwrap().into_points());
        let current = input.unit_to_standard(&monte_carlo(4, m, seed ^ 11).unwrap().into_points()).unwrap();
        let sel = d_optimal_select(&pool, &basis, n_new, &current, &FedorovOptions::default()).unwrap();
        let mut uniq = sel.rows.clone();
        uniq.sort_unstable();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), n_new);
        let pts = rows_of(pool.standard());
        let cur = rows_of(&current);
        let ld = |rows: &[usize]| -> f64 {
            let mut all = cur.clone();
            all.extend(rows.iter().map(|&r| pts[r].clone()));
            log_det(&model_matrix(&all, &basis))
        };
        let base = ld(&sel.rows);
        for slot in 0..n_new {
            for c in (0..pool.len()).filter(|c| !sel.rows.contains(c)) {
                let mut swapped = sel.rows.clone();
                swapped[slot] = c;
                prop_assert!(ld(&swapped) <= base + 1e-6, "swap {slot}->{c} improves");
            }
        }
    }

    #[test]
    fn greedy_s_beats_earlier_rejects(seed in any::<u64>()) {
        // every accepted point has S at least that of each rejected candidate at its step
        let m = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_basis(m, 4, &mut rng);
        let input = uniform_input(m);
        let pool = pool_from_unit(m, monte_carlo(80, m, seed).unwrap().into_points());
        let current = input.unit_to_standard(&monte_carlo(5, m, seed ^ 5).unwrap().into_points()).unwrap();
        let sel = s_optimal_select(&pool, &basis, 4, &current).unwrap();
        let pts = rows_of(pool.standard());
        let mut design = rows_of(&current);
        for &r in &sel.rows {
            let s = |c: usize| -> f64 {
                let mut d = design.clone();
                d.push(pts[c].clone());
                s_value(&ModelMatrix::new(model_matrix(&d, &basis)))
            };
            let chosen = s(r);
            for c in (0..pool.len()).filter(|c| !sel.rows.contains(c)) {
                prop_assert!(chosen >= s(c) - 1e-10);
            }
            design.push(pts[r].clone());
        }
    }
}

#[test]
fn maximin_examples() {
    let pool = pool_from_unit(1, DMatrix::from_column_slice(2, 1, &[0.2, 0.9]));
    let current = DMatrix::from_element(1, 1, 0.5);
    assert_eq!(seq_maximin_select(&pool, &current, 1).unwrap().rows, vec![1]);
    let tie = pool_from_unit(1, DMatrix::from_column_slice(2, 1, &[0.1, 0.9]));
    assert_eq!(seq_maximin_select(&tie, &current, 1).unwrap().rows, vec![0]);
}

#[test]
fn maximin_batch_spreads_out() {
    let unit = DMatrix::from_column_slice(5, 1, &[0.1, 0.3, 0.5, 0.7, 0.9]);
    let pool = pool_from_unit(1, unit);
    let sel = seq_maximin_select(&pool, &DMatrix::from_element(1, 1, 0.0), 2).unwrap();
    assert_eq!(sel.rows, vec![4, 2]);
}

#[test]
fn s_constant_basis_ties_to_first_row() {
    let pool = pool_from_unit(2, monte_carlo(50, 2, 1).unwrap().into_points());
    let basis = vec![MultiIndex::zero(2)];
    let sel = s_optimal_select(&pool, &basis, 3, &DMatrix::zeros(0, 2)).unwrap();
    assert_eq!(sel.rows, vec![0, 1, 2]);
    assert_eq!(sel.criterion, 1.0);
}

#[test]
fn s_prefers_new_direction_over_duplicate() {
    // current row {x = 0.5}; a duplicate adds no information on the linear term
    let input = uniform_input(1);
    let unit = DMatrix::from_column_slice(2, 1, &[0.75, 0.25]);
    let pool = CandidatePool::new(&input, unit).unwrap();
    let basis = vec![MultiIndex(vec![0]), MultiIndex(vec![1])];
    let current = DMatrix::from_element(1, 1, 0.5);
    let sel = s_optimal_select(&pool, &basis, 1, &current).unwrap();
    assert_eq!(sel.rows, vec![1]);
}

#[test]
fn d_optimal_picks_endpoints_in_one_dimension() {
    let input = uniform_input(1);
    let pool = CandidatePool::new(&input, DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0])).unwrap();
    assert_eq!(pool.standard().as_slice(), &[-1.0, 0.0, 1.0]);
    let basis = vec![MultiIndex(vec![0]), MultiIndex(vec![1])];
    let sel = d_optimal_select(&pool, &basis, 2, &DMatrix::zeros(0, 1), &FedorovOptions::default()).unwrap();
    let mut rows = sel.rows.clone();
    rows.sort_unstable();
    assert_eq!(rows, vec![0, 2]);
    // det of the normal matrix with psi_1 = sqrt(3) x is 4 * 3
    assert!((sel.criterion - 12f64.ln()).abs() < 1e-12);
}

#[test]
fn d_optimal_clusters_at_boundary() {
    let input = uniform_input(1);
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let pool = CandidatePool::new(&input, DMatrix::from_column_slice(41, 1, &grid)).unwrap();
    let basis: Vec<MultiIndex> = (0..3).map(|d| MultiIndex(vec![d])).collect();
    let sel = d_optimal_select(&pool, &basis, 3, &DMatrix::zeros(0, 1), &FedorovOptions::default()).unwrap();
    let mut rows = sel.rows.clone();
    rows.sort_unstable();
    assert_eq!(rows, vec![0, 20, 40]);
}

#[test]
fn d_optimal_rejects_underdetermined_request() {
    let pool = pool_from_unit(2, monte_carlo(30, 2, 2).unwrap().into_points());
    let basis = build_basis(2, 2, 1.0).unwrap().indices().to_vec();
    let err = d_optimal_select(&pool, &basis, 3, &DMatrix::zeros(0, 2), &FedorovOptions::default());
    assert!(matches!(err, Err(Error::SingularDesign(_))));
}

#[test]
fn fedorov_restarts_never_lower_the_determinant() {
    let pool = pool_from_unit(2, monte_carlo(200, 2, 8).unwrap().into_points());
    let basis = build_basis(2, 2, 1.0).unwrap().indices().to_vec();
    let empty = DMatrix::zeros(0, 2);
    let plain = d_optimal_select(&pool, &basis, 8, &empty, &FedorovOptions::default()).unwrap();
    let opts = FedorovOptions {
        restarts: 4,
        seed: 3,
        ..FedorovOptions::default()
    };
    let restarted = d_optimal_select(&pool, &basis, 8, &empty, &opts).unwrap();
    assert!(restarted.criterion >= plain.criterion);
}

#[test]
fn s_optimal_beats_random_subsets() {
    let m = 2;
    let basis = build_basis(m, 3, 1.0).unwrap().indices().to_vec();
    let input = uniform_input(m);
    let empty = DMatrix::zeros(0, m);
    let n = 20;
    let mut wins = 0;
    for trial in 0..100u64 {
        let pool = CandidatePool::new(&input, monte_carlo(2000, m, trial).unwrap().into_points()).unwrap();
        let sel = s_optimal_select(&pool, &basis, n, &empty).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 0xabc);
        let random = sample(&mut rng, pool.len(), n).into_vec();
        let s_random = s_value(&ModelMatrix::new(model_matrix(
            &random
                .iter()
                .map(|&r| pool.standard().row(r).iter().copied().collect())
                .collect::<Vec<_>>(),
            &basis,
        )));
        if sel.criterion >= s_random {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins} of 100");
}

#[test]
fn exhausted_pool_is_an_error() {
    let mut pool = pool_from_unit(1, DMatrix::from_column_slice(3, 1, &[0.1, 0.5, 0.9]));
    pool.mark_used(&[0, 1]).unwrap();
    assert!(pool.mark_used(&[1]).is_err());
    let err = seq_maximin_select(&pool, &DMatrix::zeros(0, 1), 2);
    assert_eq!(
        err,
        Err(Error::PoolExhausted {
            requested: 2,
            available: 1
        })
    );
    // consumed rows are never offered again
    assert_eq!(
        seq_maximin_select(&pool, &DMatrix::zeros(0, 1), 1).unwrap().rows,
        vec![2]
    );
}

fn toy_oracle(x: &[f64]) -> Result<f64, String> {
    Ok(x[0].sin() + 2.0 * x[1] * x[1] + 0.5 * x[0] * x[1])
}

fn toy_config(strategy: Strategy, n_init: usize, n_add: usize, n_max: usize) -> SequentialConfig {
    let mut c = SequentialConfig::new(strategy, PceConfig::new(1, 4, 1.0), n_init, n_add, n_max, 5);
    c.pool_size = 3000;
    c
}

#[test]
fn sequential_trajectories() {
    let input = uniform_input(2);
    for strategy in [Strategy::SeqSOpt, Strategy::SeqDOpt, Strategy::SeqMaximin] {
        let cfg = toy_config(strategy, 40, 20, 160);
        let out = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
        let sizes: Vec<usize> = out.record.steps.iter().map(|s| s.n).collect();
        assert_eq!(sizes, vec![40, 60, 80, 100, 120, 140, 160], "{strategy}");
        assert_eq!(out.record.enrichments.len(), 6);
        assert_eq!(out.record.schedule, sizes);
        assert_eq!(out.design.len(), 160);
        assert!(out.record.enrichments.iter().all(|e| e.added.len() == 20));
        let mut all: Vec<usize> = out.record.enrichments.iter().flat_map(|e| e.added.clone()).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 120);
        assert!(out.record.steps.last().unwrap().loo < 1e-3, "{strategy}");
    }
    let cfg = toy_config(Strategy::SeqSOpt, 100, 50, 250);
    let out = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
    let sizes: Vec<usize> = out.record.steps.iter().map(|s| s.n).collect();
    assert_eq!(sizes, vec![100, 150, 200, 250]);
}

#[test]
fn sequential_truncates_last_batch() {
    let input = uniform_input(2);
    let cfg = toy_config(Strategy::SeqMaximin, 20, 15, 50);
    let out = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
    let sizes: Vec<usize> = out.record.steps.iter().map(|s| s.n).collect();
    assert_eq!(sizes, vec![20, 35, 50]);
}

#[test]
fn sequential_without_enrichment_is_plain_fit() {
    let input = uniform_input(2);
    let cfg = toy_config(Strategy::SeqSOpt, 30, 10, 30);
    let mut calls = 0;
    let out = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| {
        calls += 1;
        Some(0.5)
    })
    .unwrap();
    assert_eq!(calls, 1);
    assert!(out.record.enrichments.is_empty());
    assert_eq!(out.record.steps[0].rmse, Some(0.5));
    let init = optimized_lhs(30, 2, 5, LhsCriterion::Maximin, 5).unwrap();
    let std = input.unit_to_standard(init.points()).unwrap();
    let y: Vec<f64> = (0..30)
        .map(|i| toy_oracle(&[std[(i, 0)], std[(i, 1)]]).unwrap())
        .collect();
    let plain = degree_adaptive_fit(&input, &cfg.pce, &std, &y).unwrap();
    assert_eq!(out.model, plain);
}

#[test]
fn sequential_active_basis_is_recorded() {
    let input = uniform_input(2);
    let cfg = toy_config(Strategy::SeqSOpt, 30, 10, 50);
    let out = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
    for (step, e) in out.record.steps.iter().zip(&out.record.enrichments) {
        assert_eq!(step.basis, e.basis);
        assert!(e.criterion > 0.0 && e.criterion <= 1.0);
    }
    let maximin = adaptive_sequential_run(
        &toy_oracle,
        &input,
        &toy_config(Strategy::SeqMaximin, 30, 10, 50),
        &mut |_, _| None,
    )
    .unwrap();
    assert!(maximin.record.enrichments.iter().all(|e| e.basis.is_empty()));
}

#[test]
fn sequential_is_reproducible() {
    let input = uniform_input(2);
    let cfg = toy_config(Strategy::SeqDOpt, 20, 10, 40);
    let a = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
    let b = adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.design, b.design);
}

#[test]
fn oracle_failure_reports_point() {
    let input = uniform_input(2);
    let failing = |x: &[f64]| -> Result<f64, String> {
        if x[0] > 0.9 {
            Err("out of range".into())
        } else {
            Ok(x[0])
        }
    };
    let cfg = toy_config(Strategy::SeqMaximin, 30, 10, 60);
    match adaptive_sequential_run(&failing, &input, &cfg, &mut |_, _| None) {
        Err(Error::Oracle { point, message }) => {
            assert!(point[0] > 0.9);
            assert_eq!(message, "out of range");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejects_bad_schedule() {
    let input = uniform_input(2);
    let cfg = toy_config(Strategy::SeqSOpt, 40, 20, 30);
    assert!(matches!(
        adaptive_sequential_run(&toy_oracle, &input, &cfg, &mut |_, _| None),
        Err(Error::InvalidArgument(_))
    ));
}
