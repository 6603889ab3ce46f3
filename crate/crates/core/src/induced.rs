//! Induced order statistics: selection of the outcomes whose covariates
//! are nearest a target point, and assembly of the pooled effective sample.

use crate::error::{Error, Result};

/// One observation: an outcome `w` paired with a conditioning covariate `z`.
///
/// `index` is the 0-based position of the record in the original sample and
/// drives deterministic tie-breaking when two covariates are equally distant
/// from the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationPair {
    pub w: f64,
    pub z: f64,
    pub index: usize,
}

impl ObservationPair {
    pub fn new(w: f64, z: f64, index: usize) -> Self {
        ObservationPair { w, z, index }
    }
}

/// A covariate value at which dominance is tested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPoint {
    pub z0: f64,
}

impl TargetPoint {
    pub fn new(z0: f64) -> Self {
        TargetPoint { z0 }
    }
}

/// The pooled sample at one target point: the `q_y` induced outcomes from the
/// first sample followed by the `q_x` induced outcomes from the second, each
/// in increasing order of covariate distance to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSample {
    pub y_values: Vec<f64>,
    pub x_values: Vec<f64>,
    /// Original indices of the selected records, aligned with `y_values`.
    pub y_indices: Vec<usize>,
    /// Original indices of the selected records, aligned with `x_values`.
    pub x_indices: Vec<usize>,
    pub target: TargetPoint,
}

impl EffectiveSample {
    pub fn q_y(&self) -> usize {
        self.y_values.len()
    }

    pub fn q_x(&self) -> usize {
        self.x_values.len()
    }

    pub fn q(&self) -> usize {
        self.q_y() + self.q_x()
    }

    /// Builds an effective sample directly from value vectors. Intended for
    /// tests and for callers that already hold the induced outcomes.
    pub fn from_values(y_values: Vec<f64>, x_values: Vec<f64>, target: f64) -> Self {
        let y_indices = (0..y_values.len()).collect();
        let x_indices = (0..x_values.len()).collect();
        EffectiveSample {
            y_values,
            x_values,
            y_indices,
            x_indices,
            target: TargetPoint::new(target),
        }
    }
}

fn check_finite(sample: &[ObservationPair]) -> Result<()> {
    for obs in sample {
        if !obs.w.is_finite() || !obs.z.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite observation (w={}, z={}) at index {}",
                obs.w, obs.z, obs.index
            )));
        }
    }
    Ok(())
}

/// Selects the `q` records whose covariates are nearest `z0`, ordered by
/// ascending `(|z - z0|, index)`. Ties in distance are broken by the original
/// sample index, which makes the selection deterministic and
/// permutation-invariant.
pub fn g_order_pairs(
    sample: &[ObservationPair],
    z0: f64,
    q: usize,
) -> Result<Vec<ObservationPair>> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("g-order selection on empty sample".into()));
    }
    if q == 0 || q > sample.len() {
        return Err(Error::InvalidParameter(format!(
            "q = {} out of range 1..={}",
            q,
            sample.len()
        )));
    }
    if !z0.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite target {z0}")));
    }
    check_finite(sample)?;

    let key = |o: &ObservationPair| ((o.z - z0).abs(), o.index);
    let mut picked: Vec<ObservationPair> = sample.to_vec();
    if q < picked.len() {
        picked.select_nth_unstable_by(q - 1, |a, b| {
            key(a).partial_cmp(&key(b)).expect("finite keys")
        });
        picked.truncate(q);
    }
    picked.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite keys"));
    Ok(picked)
}

/// Returns the `q` outcomes whose covariates are nearest `z0` (the induced
/// order statistics), in increasing order of distance.
pub fn g_order_select(sample: &[ObservationPair], z0: f64, q: usize) -> Result<Vec<f64>> {
    Ok(g_order_pairs(sample, z0, q)?.into_iter().map(|o| o.w).collect())
}

/// Assembles the pooled effective sample at `z0` from the two samples.
pub fn build_effective_sample(
    ysample: &[ObservationPair],
    xsample: &[ObservationPair],
    z0: f64,
    q_y: usize,
    q_x: usize,
) -> Result<EffectiveSample> {
    let y = g_order_pairs(ysample, z0, q_y)?;
    let x = g_order_pairs(xsample, z0, q_x)?;
    Ok(EffectiveSample {
        y_values: y.iter().map(|o| o.w).collect(),
        y_indices: y.iter().map(|o| o.index).collect(),
        x_values: x.iter().map(|o| o.w).collect(),
        x_indices: x.iter().map(|o| o.index).collect(),
        target: TargetPoint::new(z0),
    })
}

/// Splits a single sample at a cutoff for a sharp regression discontinuity
/// design: records with `z <= cutoff` form the first (Y) sample, records with
/// `z > cutoff` form the second (X) sample.
pub fn rdd_split(
    sample: &[ObservationPair],
    cutoff: f64,
) -> Result<(Vec<ObservationPair>, Vec<ObservationPair>)> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("rdd split on empty sample".into()));
    }
    check_finite(sample)?;
    let (ysample, xsample): (Vec<_>, Vec<_>) =
        sample.iter().partition(|o| o.z <= cutoff);
    if ysample.is_empty() {
        return Err(Error::DegenerateSplit { side: "below-cutoff (Y)", cutoff });
    }
    if xsample.is_empty() {
        return Err(Error::DegenerateSplit { side: "above-cutoff (X)", cutoff });
    }
    Ok((ysample, xsample))
}
