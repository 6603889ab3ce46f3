//! Permutation critical value over relabelings of the pooled sample.
//!
//! The statistic depends on a permutation only through which pooled
//! positions carry the Y label, so the `q!` permutations collapse to the
//! `C(q, q_y)` label assignments, each carrying equal weight. On tie-free
//! data this reproduces the data-independent critical value exactly; with
//! ties it can differ.

use crate::error::{Error, Result};
use crate::induced::EffectiveSample;
use crate::stats::delta_value;

/// Practical bound on the number of enumerated label assignments.
pub const MAX_PERMUTATION_ASSIGNMENTS: u64 = 5_000_000;

fn assignments(q: usize, q_y: usize) -> Option<u64> {
    let mut c: u64 = 1;
    for i in 1..=q_y.min(q - q_y) {
        c = c.checked_mul((q - i + 1) as u64)? / i as u64;
        if c > MAX_PERMUTATION_ASSIGNMENTS {
            return None;
        }
    }
    Some(c)
}

/// The `1 - alpha` quantile of the statistic over all label assignments of
/// the pooled effective sample.
pub fn permutation_critical_value(s: &EffectiveSample, alpha: f64) -> Result<f64> {
    super::exact::check_alpha(alpha)?;
    let q_y = s.q_y();
    let q_x = s.q_x();
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "permutation test requires observations on both sides".into(),
        ));
    }
    let q = q_y + q_x;
    let Some(total) = (if q <= 62 { assignments(q, q_y) } else { None }) else {
        return Err(Error::UnsupportedSize(format!(
            "enumerating C({q}, {q_y}) label assignments exceeds the bound \
             {MAX_PERMUTATION_ASSIGNMENTS}; use the data-independent critical value"
        )));
    };

    let mut pooled: Vec<f64> = s
        .y_values
        .iter()
        .chain(s.x_values.iter())
        .copied()
        .collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample value".into()));
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    // group boundaries of tied pooled values, as (start, end) position ranges
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let start = i;
        while i < pooled.len() && pooled[i] == pooled[start] {
            i += 1;
        }
        groups.push((start, i));
    }

    // statistic values over every assignment, in integer units
    let mut stats: Vec<i64> = Vec::with_capacity(total as usize);
    let top: u64 = 1 << q;
    let mut mask: u64 = (1 << q_y) - 1;
    while mask < top {
        let mut cy = 0i64;
        let mut cx = 0i64;
        let mut best = i64::MIN;
        for &(start, end) in &groups {
            let my = (mask >> start & ((1 << (end - start)) - 1)).count_ones() as i64;
            cy += my;
            cx += (end - start) as i64 - my;
            if my > 0 {
                best = best.max(cy * q_x as i64 - cx * q_y as i64);
            }
        }
        stats.push(best);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    debug_assert_eq!(stats.len() as u64, total);

    // quantile with the same count/total float arithmetic as the exact engine
    stats.sort_unstable();
    let thr = 1.0 - alpha;
    let total_f = total as f64;
    let mut i = 0;
    while i < stats.len() {
        let v = stats[i];
        while i < stats.len() && stats[i] == v {
            i += 1;
        }
        if i as f64 / total_f >= thr {
            return Ok(delta_value(v, q_y, q_x));
        }
    }
    Ok(delta_value(*stats.last().expect("nonempty"), q_y, q_x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulldist::ExactNull;
    use rand::{Rng, SeedableRng};

    fn es(y: &[f64], x: &[f64]) -> EffectiveSample {
        EffectiveSample::from_values(y.to_vec(), x.to_vec(), 0.0)
    }

    #[test]
    fn tie_free_matches_data_independent_cv() {
        let s = es(&[0.2], &[0.7]);
        assert_eq!(permutation_critical_value(&s, 0.1).unwrap(), 1.0);
        let exact = ExactNull::new(1, 1).unwrap().critical_value(0.1).unwrap();
        assert_eq!(permutation_critical_value(&s, 0.1).unwrap(), exact);
    }

    #[test]
    fn all_ties_collapse_to_zero() {
        let s = es(&[1.0], &[1.0]);
        assert_eq!(permutation_critical_value(&s, 0.1).unwrap(), 0.0);
        let s = es(&[3.0, 3.0, 3.0], &[3.0, 3.0]);
        assert_eq!(permutation_critical_value(&s, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn randomized_tie_free_equivalence() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let q_y = rng.random_range(1..=6);
            let q_x = rng.random_range(1..=6);
            let y: Vec<f64> = (0..q_y).map(|_| rng.random::<f64>()).collect();
            let x: Vec<f64> = (0..q_x).map(|_| rng.random::<f64>()).collect();
            let s = es(&y, &x);
            let exact = ExactNull::new(q_y, q_x).unwrap();
            for alpha in [0.05, 0.1] {
                let perm = permutation_critical_value(&s, alpha).unwrap();
                let keep = exact.critical_value(alpha).unwrap();
                assert_eq!(
                    perm.to_bits(),
                    keep.to_bits(),
                    "trial {trial}: ({q_y},{q_x}) alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let y: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let x: Vec<f64> = (0..40).map(|i| 100.0 + i as f64).collect();
        let s = es(&y, &x);
        assert!(matches!(
            permutation_critical_value(&s, 0.1),
            Err(Error::UnsupportedSize(_))
        ));
    }
}
