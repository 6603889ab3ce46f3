//! Data-dependent choice of the effective sample sizes.
//!
//! The rule scales as `sqrt(n)` times a constant built from a normal
//! working model for the covariate: the density at the target over a
//! curvature penalty that grows with the outcome-covariate correlation.
//! A steep or thin covariate density at the target, or a strong
//! correlation, shrinks the effective sample.

use crate::error::{Error, Result};
use crate::induced::ObservationPair;
use serde::{Deserialize, Serialize};

/// Moments feeding the selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningInputs {
    /// Size of the sample the rule is applied to.
    pub n: usize,
    pub mu_z: f64,
    pub sigma_z: f64,
    /// Outcome-covariate correlation, clamped away from +-1.
    pub rho: f64,
}

/// Magnitude at which the correlation estimate is clamped, keeping the
/// rule away from its singularity at |rho| = 1.
pub const RHO_CLAMP: f64 = 0.99;

/// Default clamp bounds for the selected size.
pub const MIN_Q: usize = 2;

/// Sample moments of `(w, z)` with the correlation clamped to
/// `[-RHO_CLAMP, RHO_CLAMP]`.
pub fn estimate_moments(sample: &[ObservationPair]) -> Result<TuningInputs> {
    estimate_moments_with_clamp(sample, RHO_CLAMP)
}

/// As [`estimate_moments`] with an explicit correlation clamp.
pub fn estimate_moments_with_clamp(
    sample: &[ObservationPair],
    rho_clamp: f64,
) -> Result<TuningInputs> {
    if !(rho_clamp > 0.0 && rho_clamp < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho clamp must lie in (0, 1), got {rho_clamp}"
        )));
    }
    let n = sample.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "moment estimation needs at least 3 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = |f: fn(&ObservationPair) -> f64| sample.iter().map(f).sum::<f64>() / nf;
    let mu_z = mean(|o| o.z);
    let mu_w = mean(|o| o.w);
    let mut szz = 0.0;
    let mut sww = 0.0;
    let mut swz = 0.0;
    for o in sample {
        let dz = o.z - mu_z;
        let dw = o.w - mu_w;
        szz += dz * dz;
        sww += dw * dw;
        swz += dw * dz;
    }
    if szz == 0.0 {
        return Err(Error::DegenerateMoments(
            "covariate has zero variance".into(),
        ));
    }
    if sww == 0.0 {
        return Err(Error::DegenerateMoments("outcome has zero variance".into()));
    }
    let sigma_z = (szz / (nf - 1.0)).sqrt();
    let rho = (swz / (szz * sww).sqrt()).clamp(-rho_clamp, rho_clamp);
    Ok(TuningInputs { n, mu_z, sigma_z, rho })
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// The selection rule before rounding: `sqrt(n)` times a moment-driven
/// constant. Exposed for property checks on the continuous formula.
pub fn rule_of_thumb_raw(t: &TuningInputs, z0: f64) -> Result<f64> {
    if !(t.sigma_z > 0.0) || !t.sigma_z.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma_z must be positive and finite, got {}",
            t.sigma_z
        )));
    }
    if !(t.rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (-1, 1), got {}",
            t.rho
        )));
    }
    let pdf = normal_pdf(z0, t.mu_z, t.sigma_z);
    let two_pi = 2.0 * std::f64::consts::PI;
    let denom = (2.0 / t.sigma_z) / (two_pi * std::f64::consts::E).sqrt()
        + (t.rho.abs() / (t.sigma_z * (1.0 - t.rho * t.rho).sqrt())) / two_pi.sqrt();
    let ratio = 4.0 * pdf * pdf / denom;
    Ok((t.n as f64).sqrt() * ratio.powf(2.0 / 3.0))
}

/// The rule rounded to the nearest integer and clamped to `[lo, hi]`.
pub fn rule_of_thumb_q_clamped(
    t: &TuningInputs,
    z0: f64,
    lo: usize,
    hi: usize,
) -> Result<usize> {
    let raw = rule_of_thumb_raw(t, z0)?;
    let rounded = raw.round().max(0.0) as usize;
    Ok(rounded.clamp(lo, hi.max(lo)))
}

/// The rule with the default clamp `[2, n]`.
pub fn rule_of_thumb_q(t: &TuningInputs, z0: f64) -> Result<usize> {
    rule_of_thumb_q_clamped(t, z0, MIN_Q, t.n)
}
