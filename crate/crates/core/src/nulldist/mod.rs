//! Null distribution of the supremum of the uniform ECDF difference, the
//! data-independent critical values built from it, and related engines:
//! exact lattice-path counting, Monte Carlo simulation, the refined
//! critical value for discrete data, and the permutation oracle.

mod exact;
mod permutation;
mod refined;
mod sim;

pub use exact::{ExactNull, MAX_EXACT_Q};
pub use permutation::{permutation_critical_value, MAX_PERMUTATION_ASSIGNMENTS};
pub use refined::{refined_critical_value, tuple_cdf, RefinedCv, RefinedSpec};
pub use sim::{
    limiting_critical_value, mc_null_cdf, rank_null_enumerated, rank_null_mc, replication_rng,
    MAX_ENUM_INTERLEAVINGS,
};

use crate::error::Result;
use crate::stats::delta_value;
use serde::{Deserialize, Serialize};

/// How a null distribution was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullMethod {
    ExactDp,
    MonteCarlo { draws: u64, seed: u64 },
}

impl std::fmt::Display for NullMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NullMethod::ExactDp => write!(f, "exact"),
            NullMethod::MonteCarlo { .. } => write!(f, "mc"),
        }
    }
}

/// A discrete distribution of a nonnegative test statistic under the null:
/// sorted achievable (or observed) values with their CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullDistribution {
    pub q_y: usize,
    pub q_x: usize,
    /// Ascending statistic values.
    pub support: Vec<f64>,
    /// `cdf[i] = P{ statistic <= support[i] }`; nondecreasing, ends at 1.
    pub cdf: Vec<f64>,
    pub method: NullMethod,
}

impl NullDistribution {
    /// Smallest support value whose CDF reaches `1 - alpha`.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        exact::check_alpha(alpha)?;
        let thr = 1.0 - alpha;
        let idx = self.cdf.partition_point(|&c| c < thr);
        Ok(self.support[idx.min(self.support.len() - 1)])
    }

    /// Exact null rejection probability `P{ statistic > critical value }`;
    /// at most `alpha` by construction.
    pub fn achieved_level(&self, alpha: f64) -> Result<f64> {
        exact::check_alpha(alpha)?;
        let thr = 1.0 - alpha;
        let idx = self.cdf.partition_point(|&c| c < thr);
        Ok(1.0 - self.cdf[idx.min(self.cdf.len() - 1)])
    }

    /// Tail probability `P{ statistic >= t_obs }` (inclusive, so the
    /// decision `T > c` matches `p <= alpha` up to atoms at `c`).
    pub fn p_value(&self, t_obs: f64) -> Result<f64> {
        if !t_obs.is_finite() {
            return Err(crate::error::Error::InvalidParameter(format!(
                "non-finite observed statistic {t_obs}"
            )));
        }
        let below = self.support.partition_point(|&v| v < t_obs);
        if below == 0 {
            return Ok(1.0);
        }
        Ok(1.0 - self.cdf[below - 1])
    }

    /// Largest absolute CDF difference against another distribution,
    /// evaluated over the union of both supports.
    pub fn sup_distance(&self, other: &NullDistribution) -> f64 {
        let eval = |nd: &NullDistribution, t: f64| -> f64 {
            let idx = nd.support.partition_point(|&v| v <= t);
            if idx == 0 {
                0.0
            } else {
                nd.cdf[idx - 1]
            }
        };
        let mut d: f64 = 0.0;
        for &t in self.support.iter().chain(other.support.iter()) {
            d = d.max((eval(self, t) - eval(other, t)).abs());
        }
        d
    }
}

/// Exact distribution of the supremum for `(q_y, q_x)` at every achievable
/// level.
pub fn exact_null_cdf(q_y: usize, q_x: usize) -> Result<NullDistribution> {
    Ok(ExactNull::new(q_y, q_x)?.full_distribution())
}

/// All achievable values of the ECDF difference itself (both signs),
/// ascending: `{ i/q_y - j/q_x : 0 <= i <= q_y, 0 <= j <= q_x }`.
pub fn support_of_delta(q_y: usize, q_x: usize) -> Result<Vec<f64>> {
    if q_y == 0 || q_x == 0 {
        return Err(crate::error::Error::InvalidParameter(
            "q_y and q_x must be at least 1".into(),
        ));
    }
    Ok(exact::delta_support_int(q_y, q_x)
        .into_iter()
        .map(|v| delta_value(v, q_y, q_x))
        .collect())
}
