//! Cross-engine distribution properties beyond the per-module unit tests.

use csdtest::{
    limiting_critical_value, refined_critical_value, ExactNull, RefinedSpec,
};
use rand::{Rng, SeedableRng};

/// The scaled finite-sample critical value never exceeds the limiting one
/// on a desk-scale grid of sizes and the usual levels.
#[test]
fn scaled_critical_value_below_limiting() {
    for alpha in [0.1, 0.05, 0.01] {
        let lim = limiting_critical_value(alpha).unwrap();
        for q_y in [10usize, 40, 70, 100] {
            for q_x in [10usize, 40, 70, 100] {
                let c = ExactNull::new(q_y, q_x)
                    .unwrap()
                    .critical_value(alpha)
                    .unwrap();
                let scaled = ((q_y * q_x) as f64 / (q_y + q_x) as f64).sqrt() * c;
                assert!(
                    scaled <= lim + 1e-12,
                    "({q_y},{q_x}) alpha={alpha}: scaled {scaled} above limiting {lim}"
                );
            }
        }
    }
}

/// The lower bound of the refined search is the quantile at the equally
/// spaced probe tuple; check it against a direct Monte Carlo estimate.
#[test]
fn equally_spaced_tuple_quantile_matches_monte_carlo() {
    let (q_y, q_x, r, alpha) = (3usize, 3usize, 2usize, 0.1f64);
    let exact_lb = refined_critical_value(q_y, q_x, alpha, &RefinedSpec::new(r))
        .unwrap()
        .lower_bound;

    // directly simulate max_k Delta(u_k) at u = {1/3, 2/3}
    let probes = [1.0 / 3.0, 2.0 / 3.0];
    let draws = 200_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut stats: Vec<i64> = Vec::with_capacity(draws);
    for _ in 0..draws {
        let y: Vec<f64> = (0..q_y).map(|_| rng.random()).collect();
        let x: Vec<f64> = (0..q_x).map(|_| rng.random()).collect();
        let mut max = i64::MIN;
        for &u in &probes {
            let a = y.iter().filter(|&&v| v <= u).count() as i64;
            let b = x.iter().filter(|&&v| v <= u).count() as i64;
            max = max.max(a * q_x as i64 - b * q_y as i64);
        }
        stats.push(max);
    }
    stats.sort_unstable();
    let idx = ((1.0 - alpha) * draws as f64).ceil() as usize - 1;
    let mc_quantile = stats[idx] as f64 / (q_y * q_x) as f64;

    assert!(
        (exact_lb - mc_quantile).abs() <= 0.005,
        "equally spaced quantile: exact {exact_lb} vs Monte Carlo {mc_quantile}"
    );
}

/// Richer probe tuples cannot lower the refined critical value below what
/// a sparser set achieves.
#[test]
fn refined_cv_monotone_in_r() {
    let exact = ExactNull::new(4, 4).unwrap();
    let default = exact.critical_value(0.1).unwrap();
    let mut prev = 0.0f64;
    for r in [1usize, 2, 3] {
        let cv = refined_critical_value(4, 4, 0.1, &RefinedSpec::new(r)).unwrap();
        assert!(cv.value <= default);
        assert!(
            cv.value >= prev - 1e-12,
            "refined cv should not shrink as r grows: r={r} gave {} after {prev}",
            cv.value
        );
        prev = cv.value;
    }
}
