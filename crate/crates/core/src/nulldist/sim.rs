//! Simulation and enumeration engines for null distributions.
//!
//! The Monte Carlo engine draws pooled uniforms and records the supremum of
//! the ECDF difference. Replication `r` always uses stream `r` of a
//! counter-based generator seeded with the root seed, so results are
//! bit-identical for a given seed regardless of how the work is split
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::induced::EffectiveSample;
use crate::nulldist::exact::check_alpha;
use crate::nulldist::{NullDistribution, NullMethod};
use crate::stats::{delta_value, StatisticKind};

/// Counter-based generator for replication `rep` of a run rooted at
/// `seed`: same seed, independent stream per replication.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Supremum of the ECDF difference over pooled uniforms, in integer units.
/// The first `q_y` entries of `us` belong to the Y group.
pub(crate) fn sup_delta_int(us: &[f64], q_y: usize, q_x: usize) -> i64 {
    let mut order: Vec<usize> = (0..us.len()).collect();
    order.sort_by(|&a, &b| (us[a], a).partial_cmp(&(us[b], b)).expect("finite"));
    let mut val = 0i64;
    let mut max = 0i64;
    for &idx in &order {
        if idx < q_y {
            val += q_x as i64;
        } else {
            val -= q_y as i64;
        }
        max = max.max(val);
    }
    max
}

/// Monte Carlo null distribution of the supremum for `(q_y, q_x)`.
pub fn mc_null_cdf(q_y: usize, q_x: usize, draws: u64, seed: u64) -> Result<NullDistribution> {
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "q_y and q_x must be at least 1".into(),
        ));
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let q = q_y + q_x;
    let mut maxima: Vec<i64> = (0..draws)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(q),
            |buf, rep| {
                let mut rng = replication_rng(seed, rep);
                buf.clear();
                buf.extend((0..q).map(|_| rng.random::<f64>()));
                sup_delta_int(buf, q_y, q_x)
            },
        )
        .collect();
    maxima.sort_unstable();

    let mut support = Vec::new();
    let mut cdf = Vec::new();
    let total = draws as f64;
    let mut i = 0;
    while i < maxima.len() {
        let v = maxima[i];
        while i < maxima.len() && maxima[i] == v {
            i += 1;
        }
        support.push(delta_value(v, q_y, q_x));
        cdf.push(i as f64 / total);
    }
    Ok(NullDistribution {
        q_y,
        q_x,
        support,
        cdf,
        method: NullMethod::MonteCarlo { draws, seed },
    })
}

/// Practical bound on exhaustive interleaving enumeration.
pub const MAX_ENUM_INTERLEAVINGS: u64 = 2_000_000;

fn interleavings(q: usize, q_y: usize) -> Option<u64> {
    let mut c: u64 = 1;
    for i in 1..=q_y.min(q - q_y) {
        c = c.checked_mul((q - i + 1) as u64)? / i as u64;
        if c > MAX_ENUM_INTERLEAVINGS {
            return None;
        }
    }
    Some(c)
}

/// Null distribution of a rank statistic under continuously distributed
/// exchangeable data, by exhaustive enumeration of the `C(q, q_y)` group
/// interleavings (all equally likely in the tie-free case).
///
/// Used for the CvM and AD variants, whose null quantiles have no lattice
/// shortcut. Errors when the interleaving count exceeds
/// [`MAX_ENUM_INTERLEAVINGS`]; fall back to [`rank_null_mc`] then.
pub fn rank_null_enumerated(
    q_y: usize,
    q_x: usize,
    kind: StatisticKind,
) -> Result<NullDistribution> {
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "q_y and q_x must be at least 1".into(),
        ));
    }
    let q = q_y + q_x;
    if q > 62 || interleavings(q, q_y).is_none() {
        return Err(Error::UnsupportedSize(format!(
            "enumerating C({q}, {q_y}) interleavings exceeds the bound \
             {MAX_ENUM_INTERLEAVINGS}; use a Monte Carlo null instead"
        )));
    }

    let mut values = Vec::new();
    // Gosper's hack over bitmasks with q_y set bits; bit p set means the
    // p-th smallest pooled value carries the Y label.
    let top: u64 = 1 << q;
    let mut mask: u64 = (1 << q_y) - 1;
    while mask < top {
        let mut y = Vec::with_capacity(q_y);
        let mut x = Vec::with_capacity(q_x);
        for pos in 0..q {
            if mask >> pos & 1 == 1 {
                y.push(pos as f64);
            } else {
                x.push(pos as f64);
            }
        }
        let s = EffectiveSample::from_values(y, x, 0.0);
        values.push(kind.compute(&s)?);
        // next mask with the same popcount
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok(distribution_from_values(q_y, q_x, values, NullMethod::ExactDp))
}

/// Monte Carlo null distribution of a rank statistic from pooled uniforms.
pub fn rank_null_mc(
    q_y: usize,
    q_x: usize,
    kind: StatisticKind,
    draws: u64,
    seed: u64,
) -> Result<NullDistribution> {
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "q_y and q_x must be at least 1".into(),
        ));
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep);
            let y: Vec<f64> = (0..q_y).map(|_| rng.random::<f64>()).collect();
            let x: Vec<f64> = (0..q_x).map(|_| rng.random::<f64>()).collect();
            let s = EffectiveSample::from_values(y, x, 0.0);
            kind.compute(&s)
        })
        .collect::<Result<_>>()?;
    Ok(distribution_from_values(
        q_y,
        q_x,
        values,
        NullMethod::MonteCarlo { draws, seed },
    ))
}

fn distribution_from_values(
    q_y: usize,
    q_x: usize,
    mut values: Vec<f64>,
    method: NullMethod,
) -> NullDistribution {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
    let total = values.len() as f64;
    let mut support = Vec::new();
    let mut cdf = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        while i < values.len() && values[i] == v {
            i += 1;
        }
        support.push(v);
        cdf.push(i as f64 / total);
    }
    NullDistribution {
        q_y,
        q_x,
        support,
        cdf,
        method,
    }
}

/// Limiting critical value of the scaled one-sided statistic,
/// `sqrt(-ln(alpha) / 2)`.
pub fn limiting_critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((-alpha.ln() / 2.0).sqrt())
}
