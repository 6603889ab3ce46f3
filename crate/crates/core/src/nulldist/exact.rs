//! Exact finite-sample null distribution of the supremum of the uniform
//! two-sample ECDF difference.
//!
//! With probability one the pooled uniforms are distinct, so the supremum
//! depends only on the interleaving of the two groups, and all
//! `C(q, q_y)` interleavings are equally likely. Walking the pooled order,
//! the running difference moves by `+1/q_y` at a Y point and `-1/q_x` at an
//! X point; in integer units of `1/(q_y q_x)` these are `+q_x` and `-q_y`.
//! The engine counts monotone lattice paths whose running value never
//! exceeds a threshold, using exact big-integer arithmetic.

use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nulldist::{NullDistribution, NullMethod};
use crate::stats::delta_value;

/// Largest pooled size the exact engine accepts. Path counts stay exact at
/// any size; this bound keeps single queries comfortably interactive.
pub const MAX_EXACT_Q: usize = 2000;

/// Exact null engine for a fixed pair `(q_y, q_x)`.
///
/// Critical values and p-values need only a handful of threshold queries
/// (each one dynamic program), so they stay cheap even when the full support
/// is large; `full_distribution` evaluates every achievable level.
pub struct ExactNull {
    q_y: usize,
    q_x: usize,
    /// Achievable values of the supremum, ascending, in integer units.
    support_int: Vec<i64>,
    total: BigUint,
    total_f64: f64,
    /// Set when `total` is exactly representable as f64; enables the direct
    /// count/total division that small-sample oracles reproduce bit-for-bit.
    total_exact: bool,
    memo: Mutex<std::collections::BTreeMap<i64, f64>>,
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k.min(n));
    let mut res = BigUint::one();
    for i in 1..=k {
        res = res * BigUint::from(n - k + i) / BigUint::from(i);
    }
    res
}

impl ExactNull {
    pub fn new(q_y: usize, q_x: usize) -> Result<Self> {
        if q_y == 0 || q_x == 0 {
            return Err(Error::InvalidParameter(
                "q_y and q_x must be at least 1".into(),
            ));
        }
        let q = q_y + q_x;
        if q > MAX_EXACT_Q {
            return Err(Error::UnsupportedSize(format!(
                "exact engine supports q = q_y + q_x <= {MAX_EXACT_Q}, got {q}; \
                 use the Monte Carlo engine instead"
            )));
        }
        let support_int = sup_support_int(q_y, q_x);
        let total = binomial(q, q_y);
        let total_f64 = total.to_f64().unwrap_or(f64::INFINITY);
        let total_exact = total.bits() <= 53;
        Ok(ExactNull {
            q_y,
            q_x,
            support_int,
            total,
            total_f64,
            total_exact,
            memo: Mutex::new(std::collections::BTreeMap::new()),
        })
    }

    pub fn q_y(&self) -> usize {
        self.q_y
    }

    pub fn q_x(&self) -> usize {
        self.q_x
    }

    /// Achievable supremum values, ascending.
    pub fn support(&self) -> Vec<f64> {
        self.support_int
            .iter()
            .map(|&v| delta_value(v, self.q_y, self.q_x))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn support_int(&self) -> &[i64] {
        &self.support_int
    }

    fn ratio(&self, count: &BigUint) -> f64 {
        if self.total_exact {
            count.to_f64().expect("count <= total") / self.total_f64
        } else {
            // scale so the quotient fits f64 with full precision
            let scaled = (count << 64u32) / &self.total;
            scaled.to_f64().expect("scaled quotient fits") / 2.0f64.powi(64)
        }
    }

    /// `P{ sup <= v }` for a threshold in integer units.
    pub(crate) fn cdf_le_int(&self, v: i64) -> f64 {
        if v < 0 {
            return 0.0;
        }
        if let Some(&c) = self.memo.lock().unwrap().get(&v) {
            return c;
        }
        let count = self.count_paths_le(v);
        let c = self.ratio(&count);
        self.memo.lock().unwrap().insert(v, c);
        c
    }

    /// Number of interleavings whose running value never exceeds `v >= 0`.
    fn count_paths_le(&self, v: i64) -> BigUint {
        let qx = self.q_x as i64;
        let qy = self.q_y as i64;
        // row[j] = #paths to (i, j) staying <= v; i advances over Y steps
        let mut row: Vec<BigUint> = vec![BigUint::one(); self.q_x + 1];
        for i in 1..=self.q_y as i64 {
            for j in 0..=self.q_x as i64 {
                let ju = j as usize;
                if i * qx - j * qy > v {
                    row[ju] = BigUint::zero();
                } else if j > 0 {
                    let prev = row[ju - 1].clone();
                    row[ju] += prev;
                }
                // j == 0 keeps row[0] from the previous i (pure Y prefix)
            }
        }
        row[self.q_x].clone()
    }

    /// Critical value in integer units: smallest achievable `v` with
    /// `P{sup <= v} >= 1 - alpha`.
    pub(crate) fn critical_value_int(&self, alpha: f64) -> Result<i64> {
        check_alpha(alpha)?;
        let thr = 1.0 - alpha;
        let mut lo = 0usize;
        let mut hi = self.support_int.len() - 1; // cdf at the top is 1
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.cdf_le_int(self.support_int[mid]) >= thr {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(self.support_int[lo])
    }

    /// The `1 - alpha` quantile of the supremum.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        Ok(delta_value(
            self.critical_value_int(alpha)?,
            self.q_y,
            self.q_x,
        ))
    }

    /// Exact null rejection probability of the test at level `alpha`.
    pub fn achieved_level(&self, alpha: f64) -> Result<f64> {
        let c = self.critical_value_int(alpha)?;
        Ok(1.0 - self.cdf_le_int(c))
    }

    /// `P{ sup >= t_obs }`.
    pub fn p_value(&self, t_obs: f64) -> Result<f64> {
        if !t_obs.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite observed statistic {t_obs}"
            )));
        }
        // number of achievable values strictly below t_obs
        let below = self
            .support_int
            .partition_point(|&v| delta_value(v, self.q_y, self.q_x) < t_obs);
        if below == 0 {
            return Ok(1.0);
        }
        Ok(1.0 - self.cdf_le_int(self.support_int[below - 1]))
    }

    /// Evaluates the CDF at every achievable level.
    pub fn full_distribution(&self) -> NullDistribution {
        let cdf: Vec<f64> = self
            .support_int
            .par_iter()
            .map(|&v| self.cdf_le_int(v))
            .collect();
        NullDistribution {
            q_y: self.q_y,
            q_x: self.q_x,
            support: self.support(),
            cdf,
            method: NullMethod::ExactDp,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Distinct achievable values of the running difference, in integer units,
/// over the whole lattice (both signs).
pub(crate) fn delta_support_int(q_y: usize, q_x: usize) -> Vec<i64> {
    let mut vals = Vec::with_capacity((q_y + 1) * (q_x + 1));
    for i in 0..=q_y as i64 {
        for j in 0..=q_x as i64 {
            vals.push(i * q_x as i64 - j * q_y as i64);
        }
    }
    vals.sort_unstable();
    vals.dedup();
    vals
}

/// Achievable values of the supremum: the nonnegative part of the lattice
/// support (the empty prefix contributes 0; any nonnegative lattice value is
/// attained as a maximum by some path).
fn sup_support_int(q_y: usize, q_x: usize) -> Vec<i64> {
    delta_support_int(q_y, q_x)
        .into_iter()
        .filter(|&v| v >= 0)
        .collect()
}
