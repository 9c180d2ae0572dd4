use std::sync::Arc;

use fdcov::bootstrap::{independence_test, Method};
use fdcov::dcov::{c0_constant, dist_matrix, sample_dcor, sample_dcov, DcovParams, DistMatrix};
use fdcov::grid::{embed, step_l2_distance, PairedSample, Partition, Trajectory};
use fdcov::kernels::{h2_matrix, h2_product_law, CenteredMatrix, KernelContext};
use fdcov::rng::RngSpec;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn partition_from(steps: &[f64]) -> Arc<Partition> {
    let total: f64 = steps.iter().sum();
    let mut acc = 0.0;
    let mut points = vec![0.0];
    for s in &steps[..steps.len() - 1] {
        acc += s / total;
        points.push(acc);
    }
    points.push(1.0);
    Arc::new(Partition::new(points).unwrap())
}

fn paths(part: &Arc<Partition>, rows: &[Vec<f64>]) -> Vec<Trajectory> {
    rows.iter().map(|r| Trajectory::new(part.clone(), r.clone()).unwrap()).collect()
}

/// A paired sample on a random (possibly non-uniform) partition where `Y` is
/// a noisy function of `X`, so dependence strength varies across cases.
fn sample_strategy() -> impl Strategy<Value = (PairedSample, f64)> {
    (2usize..10, 1usize..6)
        .prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(0.05f64..1.0, p),
                prop::collection::vec(prop::collection::vec(-5.0f64..5.0, p), n),
                prop::collection::vec(prop::collection::vec(-5.0f64..5.0, p), n),
                0.0f64..1.0,
                prop::sample::select(vec![0.5, 1.0, 1.5]),
            )
        })
        .prop_map(|(steps, xs, noise, mix, beta)| {
            let part = partition_from(&steps);
            let ys: Vec<Vec<f64>> = xs
                .iter()
                .zip(&noise)
                .map(|(x, e)| x.iter().zip(e).map(|(a, b)| mix * a * a.abs() + (1.0 - mix) * b).collect())
                .collect();
            (PairedSample::new(paths(&part, &xs), paths(&part, &ys)).unwrap(), beta)
        })
}

fn matrices(s: &PairedSample, beta: f64) -> (DistMatrix, DistMatrix) {
    let params = DcovParams::new(beta).unwrap();
    (dist_matrix(s.x(), params).unwrap(), dist_matrix(s.y(), params).unwrap())
}

fn scale(a: &DistMatrix, b: &DistMatrix) -> f64 {
    (a.grand_mean() * b.grand_mean()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_embedding_norm(s in sample_strategy()) {
        let (sample, _) = s;
        for (a, b) in sample.x().iter().zip(sample.y()) {
            let d = step_l2_distance(a, b).unwrap();
            let e = embed(a).distance(&embed(b));
            prop_assert!((d - e).abs() <= 1e-12 * d.max(1e-300));
        }
    }

    #[test]
    fn distance_is_translation_invariant(s in sample_strategy(), shift in prop::collection::vec(-3.0f64..3.0, 6)) {
        let (sample, _) = s;
        let part = sample.partition().clone();
        let shift = &shift[..part.len()];
        let moved = |t: &Trajectory| {
            Trajectory::new(part.clone(), t.values().iter().zip(shift).map(|(v, c)| v + c).collect()).unwrap()
        };
        let (a, b) = (&sample.x()[0], &sample.y()[0]);
        let d = step_l2_distance(a, b).unwrap();
        let d2 = step_l2_distance(&moved(a), &moved(b)).unwrap();
        prop_assert!((d - d2).abs() <= 1e-12 * (1.0 + d));
    }

    #[test]
    fn dcov_is_nonnegative_and_dcor_bounded(s in sample_strategy()) {
        let (sample, beta) = s;
        let (a, b) = matrices(&sample, beta);
        prop_assert!(sample_dcov(&a, &b).unwrap() >= -1e-10 * scale(&a, &b));
        if let Some(r) = sample_dcor(&a, &b).unwrap().value() {
            prop_assert!((0.0..=1.0 + 1e-8).contains(&r), "R = {}", r);
        }
    }

    #[test]
    fn scaling_paths_scales_dcov(s in sample_strategy(), c in 0.1f64..10.0) {
        let (sample, beta) = s;
        let (a, b) = matrices(&sample, beta);
        let (ac, bc) = matrices(&sample.scaled(c).unwrap(), beta);
        let t = sample_dcov(&a, &b).unwrap();
        let tc = sample_dcov(&ac, &bc).unwrap();
        let factor = c.powf(2.0 * beta);
        prop_assert!((tc - factor * t).abs() <= 1e-10 * factor * scale(&a, &b));
        match (sample_dcor(&a, &b).unwrap().value(), sample_dcor(&ac, &bc).unwrap().value()) {
            (Some(r), Some(rc)) => prop_assert!((r - rc).abs() <= 1e-8),
            (None, None) => {}
            other => prop_assert!(false, "definedness changed: {:?}", other),
        }
    }

    #[test]
    fn dcor_is_exact_under_power_of_two_scaling(s in sample_strategy(), k in -4i32..5) {
        let (sample, beta) = s;
        let (a, b) = matrices(&sample, beta);
        let (ac, bc) = matrices(&sample.scaled(2f64.powi(k)).unwrap(), beta);
        prop_assert_eq!(sample_dcor(&a, &b).unwrap(), sample_dcor(&ac, &bc).unwrap());
    }

    #[test]
    fn joint_permutation_leaves_dcov_unchanged(s in sample_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let (sample, beta) = s;
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.shuffle(&mut RngSpec::new(seed).stream(0));
        let (a, b) = matrices(&sample, beta);
        let (ap, bp) = matrices(&sample.permuted(&order).unwrap(), beta);
        let t = sample_dcov(&a, &b).unwrap();
        prop_assert!((t - sample_dcov(&ap, &bp).unwrap()).abs() <= 1e-12 * scale(&a, &b));
    }

    #[test]
    fn h2_constructions_are_symmetric(s in sample_strategy()) {
        let (sample, beta) = s;
        let (a, b) = matrices(&sample, beta);
        let n = a.n();
        let paired = h2_matrix(&KernelContext::new(a.clone(), b.clone()).unwrap()).unwrap();
        let product = h2_product_law(&a, &b).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(paired.get(i, j), paired.get(j, i));
                prop_assert_eq!(product.get(i, j), product.get(j, i));
            }
            prop_assert!(paired.row_means()[i].abs() <= 1e-10 * paired.max_abs().max(scale(&a, &b)));
        }
    }

    #[test]
    fn centered_product_mean_is_dcov(s in sample_strategy()) {
        let (sample, beta) = s;
        let (a, b) = matrices(&sample, beta);
        let (ac, bc) = (CenteredMatrix::new(&a), CenteredMatrix::new(&b));
        let n = a.n();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += ac.get(i, j) * bc.get(i, j);
            }
        }
        let t = sample_dcov(&a, &b).unwrap();
        prop_assert!((total / (n * n) as f64 - t).abs() <= 1e-10 * scale(&a, &b));
    }
}

#[test]
fn c0_matches_gamma_closed_form() {
    let mut previous = f64::INFINITY;
    for k in 1..=9 {
        let beta = 0.2 * k as f64;
        let gam = beta / 4.0;
        let exact = 2f64.powf(-gam) * gamma(1.0 - gam) / gam;
        let c0 = c0_constant(DcovParams::new(beta).unwrap()).unwrap();
        assert!((c0 - exact).abs() <= 1e-8, "beta {beta}: {c0} vs {exact}");
        assert!(c0 < previous);
        previous = c0;
    }
}

#[test]
fn doubling_paths_keeps_p_values() {
    let part = partition_from(&[1.0; 12]);
    let rows = |shift: f64| -> Vec<Vec<f64>> {
        (0..20)
            .map(|k| (0..12).map(|i| ((k * 7 + i * 3) % 11) as f64 * 0.3 + shift * (k as f64).sin()).collect())
            .collect()
    };
    let sample = PairedSample::new(paths(&part, &rows(0.0)), paths(&part, &rows(1.0))).unwrap();
    let doubled = sample.scaled(2.0).unwrap();
    for beta in [0.5, 1.0, 1.5] {
        let params = DcovParams::new(beta).unwrap();
        for m in Method::ALL {
            let r = independence_test(&sample, params, 99, &RngSpec::new(4), m).unwrap();
            let r2 = independence_test(&doubled, params, 99, &RngSpec::new(4), m).unwrap();
            assert_eq!(r.p_value, r2.p_value, "{m} beta {beta}");
            let f = 2f64.powf(2.0 * beta);
            assert!((r2.statistic - f * r.statistic).abs() <= 1e-10 * f * r.statistic.abs());
        }
    }
}
