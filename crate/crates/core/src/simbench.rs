//! Simulation designs and the Monte Carlo harness for size and power
//! studies.
//!
//! Seven data-generating processes, each in four cases: (a) the null holds
//! with equality at the target, (b) it holds strictly, (c) it holds with
//! equality at two targets, (d) it fails. Designs 1-3 and 5 are
//! location-scale models on a Beta(2, 2) covariate, design 4 is a sharp
//! regression discontinuity on `2 Beta(2,2) - 1`, designs 6 and 7 are
//! discrete (a three-category logit and a binomial).

use rand::Rng;
use rand_distr::{Beta, Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::induced::{rdd_split, ObservationPair};
use crate::nulldist::{rank_null_enumerated, rank_null_mc, ExactNull, RefinedSpec};
use crate::runner::{CvCache, CvMethod, QMode, Tester, TestConfig};
use crate::stats::StatisticKind;

pub use crate::nulldist::replication_rng;

/// Simulation case within a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignCase {
    A,
    B,
    C,
    D,
}

impl DesignCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(DesignCase::A),
            "b" => Ok(DesignCase::B),
            "c" => Ok(DesignCase::C),
            "d" => Ok(DesignCase::D),
            _ => Err(Error::InvalidParameter(format!(
                "unknown design case '{s}' (expected a, b, c, or d)"
            ))),
        }
    }
}

impl std::fmt::Display for DesignCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignCase::A => write!(f, "a"),
            DesignCase::B => write!(f, "b"),
            DesignCase::C => write!(f, "c"),
            DesignCase::D => write!(f, "d"),
        }
    }
}

/// One design/case/sample-size triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: u8,
    pub case: DesignCase,
    pub n: usize,
}

impl DesignSpec {
    pub fn new(design: u8, case: DesignCase, n: usize) -> Result<Self> {
        if !(1..=7).contains(&design) {
            return Err(Error::InvalidParameter(format!(
                "design must lie in 1..=7, got {design}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        Ok(DesignSpec { design, case, n })
    }

    /// Target covariate points for this design and case.
    pub fn targets(&self) -> Vec<f64> {
        match (self.design, self.case) {
            (4, DesignCase::C) => vec![-0.5, 0.5],
            (4, _) => vec![0.0],
            (_, DesignCase::C) => vec![0.25, 0.75],
            _ => vec![0.5],
        }
    }

    /// Design 4 is a single-sample regression discontinuity.
    pub fn is_rdd(&self) -> bool {
        self.design == 4
    }

    /// Smaller outcome support size at a target, for the refined critical
    /// value. Defined for the discrete designs only.
    pub fn refined_support(&self, target: f64) -> Result<usize> {
        match self.design {
            6 => Ok(3),
            7 => {
                let trials_x = nearest_int(25.0 * target);
                let trials_y = (trials_x + design7_mu(self.case)).max(0);
                Ok((trials_x.min(trials_y) + 1) as usize)
            }
            _ => Err(Error::InvalidParameter(format!(
                "refined critical value needs a finite outcome support; \
                 design {} is not discrete",
                self.design
            ))),
        }
    }
}

/// Data produced by one replication.
#[derive(Debug, Clone)]
pub enum DrawnData {
    TwoSample {
        ysample: Vec<ObservationPair>,
        xsample: Vec<ObservationPair>,
    },
    Pooled {
        sample: Vec<ObservationPair>,
        cutoff: f64,
    },
}

fn nearest_int(x: f64) -> i64 {
    x.round() as i64
}

fn design7_mu(case: DesignCase) -> i64 {
    match case {
        DesignCase::A | DesignCase::C => 0,
        DesignCase::B => 1,
        DesignCase::D => -1,
    }
}

fn design6_mu(case: DesignCase) -> f64 {
    match case {
        DesignCase::A | DesignCase::C => 0.0,
        DesignCase::B => 1.0,
        DesignCase::D => -0.5,
    }
}

/// Location-scale coefficients for one side of designs 1-3 and 5.
struct LocScale {
    mu: fn(f64) -> f64,
    sigma: fn(f64) -> f64,
}

fn loc_scale_params(design: u8, case: DesignCase) -> (LocScale, LocScale) {
    let zsq = |z: f64| z * z;
    let (mu_y, mu_x): (fn(f64) -> f64, fn(f64) -> f64) = match (design, case) {
        (1, DesignCase::B) => (|z| 1.05 * z, |z| z),
        (1, DesignCase::D) => (|z| 0.95 * z, |z| z),
        (1, _) => (|z| z, |z| z),
        (2, DesignCase::A) => (|z| z, |z| z * z + 0.25),
        (2, DesignCase::B) => (|z| 1.05 * z, |z| 0.5 * z + 0.25),
        (2, DesignCase::C) => (|z| z, |z| z - (z - 0.25) * (z - 0.75)),
        (2, DesignCase::D) => (|z| z, |z| 0.6 * z + 0.25),
        (3, DesignCase::B) => (|z| z + 0.1 * z * z, |z| z),
        (3, _) => (|z| z, |z| z),
        (5, _) => (|_| 0.0, |_| 0.0),
        _ => unreachable!("location-scale designs are 1-3 and 5"),
    };
    let (sigma_y, sigma_x): (fn(f64) -> f64, fn(f64) -> f64) = match (design, case) {
        (3, DesignCase::B) => (|z| 0.95 * z * z, zsq),
        (3, DesignCase::D) | (5, DesignCase::D) => (|z| 0.90 * z * z, zsq),
        (5, DesignCase::B) => (|z| 1.05 * z * z, zsq),
        _ => (zsq, zsq),
    };
    (
        LocScale { mu: mu_y, sigma: sigma_y },
        LocScale { mu: mu_x, sigma: sigma_x },
    )
}

/// The design-4 conditional mean polynomial.
fn design4_mu(z: f64) -> f64 {
    0.61 - 0.02 * z + 0.06 * z * z + 0.17 * z * z * z
}

/// Left-censoring point of the design-5 noise: the 20th percentile of a
/// standard lognormal, about 0.43101.
pub fn design5_censor_point() -> f64 {
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.2).exp()
}

/// Draws one replication of the design.
///
/// Design 4 emits a single pooled sample with cutoff 0, oriented so the
/// side whose distribution dominates under cases (b) and (d) sits at
/// `z <= 0`, matching the split convention of [`rdd_split`].
pub fn draw_design<R: Rng>(spec: &DesignSpec, rng: &mut R) -> Result<DrawnData> {
    let n = spec.n;
    let beta = Beta::new(2.0, 2.0).expect("valid beta");
    match spec.design {
        1..=3 | 5 => {
            let (py, px) = loc_scale_params(spec.design, spec.case);
            let censor = if spec.design == 5 {
                Some(design5_censor_point())
            } else {
                None
            };
            let lognormal = LogNormal::new(0.0, 1.0).expect("valid lognormal");
            let draw_side = |p: &LocScale, rng: &mut R| -> Vec<ObservationPair> {
                (0..n)
                    .map(|i| {
                        let z: f64 = beta.sample(rng);
                        let noise: f64 = match (spec.design, censor) {
                            (3, _) => rng.random::<f64>(),
                            (_, Some(c)) => {
                                let v: f64 = lognormal.sample(rng);
                                v.max(c)
                            }
                            _ => rng.sample(StandardNormal),
                        };
                        ObservationPair::new((p.mu)(z) + (p.sigma)(z) * noise, z, i)
                    })
                    .collect()
            };
            let ysample = draw_side(&py, rng);
            let xsample = draw_side(&px, rng);
            Ok(DrawnData::TwoSample { ysample, xsample })
        }
        4 => {
            let sample = (0..n)
                .map(|i| {
                    let z: f64 = 2.0 * beta.sample(rng) - 1.0;
                    let noise: f64 = rng.sample(StandardNormal);
                    // the generating covariate is -z, so the dominant side
                    // of cases (b)/(d) lands on z <= 0
                    let zg = -z;
                    let w = if z <= 0.0 {
                        let mu = match spec.case {
                            DesignCase::B => design4_mu(zg) + 0.1,
                            _ => design4_mu(zg),
                        };
                        let sigma = match spec.case {
                            DesignCase::D => 0.5 + zg * zg,
                            _ => 1.0,
                        };
                        mu + sigma * noise
                    } else {
                        design4_mu(zg) + noise
                    };
                    ObservationPair::new(w, z, i)
                })
                .collect();
            Ok(DrawnData::Pooled { sample, cutoff: 0.0 })
        }
        6 => {
            let mu = design6_mu(spec.case);
            let theta_x = [-0.5, -1.5, -2.0];
            let theta_y = [theta_x[0] - mu, theta_x[1] + mu, theta_x[2]];
            let draw_side = |theta: [f64; 3], rng: &mut R| -> Vec<ObservationPair> {
                (0..n)
                    .map(|i| {
                        let z: f64 = beta.sample(rng);
                        let s = 1.5 - z;
                        let e: Vec<f64> = theta.iter().map(|t| (t * s).exp()).collect();
                        let total: f64 = e.iter().sum();
                        let u: f64 = rng.random::<f64>() * total;
                        let w = if u < e[0] {
                            1.0
                        } else if u < e[0] + e[1] {
                            2.0
                        } else {
                            3.0
                        };
                        ObservationPair::new(w, z, i)
                    })
                    .collect()
            };
            let ysample = draw_side(theta_y, rng);
            let xsample = draw_side(theta_x, rng);
            Ok(DrawnData::TwoSample { ysample, xsample })
        }
        7 => {
            let shift = design7_mu(spec.case);
            let draw_side = |shift: i64, rng: &mut R| -> Vec<ObservationPair> {
                (0..n)
                    .map(|i| {
                        // trials never go negative even deep in the covariate
                        // tail where nearest_int(25 z) is 0 or 1
                        let z: f64 = beta.sample(rng);
                        let trials = (nearest_int(25.0 * z) + shift).max(0) as u64;
                        let w = rand_distr::Binomial::new(trials, 0.5)
                            .expect("valid binomial")
                            .sample(rng) as f64;
                        ObservationPair::new(w, z, i)
                    })
                    .collect()
            };
            let ysample = draw_side(shift, rng);
            let xsample = draw_side(0, rng);
            Ok(DrawnData::TwoSample { ysample, xsample })
        }
        d => Err(Error::InvalidParameter(format!("unknown design {d}"))),
    }
}

/// Options of a Monte Carlo run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimOptions {
    pub alpha: f64,
    pub reps: u64,
    pub seed: u64,
    pub statistic: StatisticKind,
    /// Use the refined critical value (discrete designs 6-7 only).
    pub refined: bool,
    /// Fixed `(q_y, q_x)` instead of the data-dependent rule.
    pub q_override: Option<(usize, usize)>,
    pub cv_method: CvMethod,
}

impl SimOptions {
    pub fn new(alpha: f64, reps: u64, seed: u64) -> Self {
        SimOptions {
            alpha,
            reps,
            seed,
            statistic: StatisticKind::Ks,
            refined: false,
            q_override: None,
            cv_method: CvMethod::ExactDp,
        }
    }
}

/// Per-target rejection breakdown.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerTargetRate {
    pub target: f64,
    pub rejection_rate: f64,
}

/// Aggregated Monte Carlo result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub design: u8,
    pub case: DesignCase,
    pub n: usize,
    pub alpha: f64,
    pub reps: u64,
    pub seed: u64,
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub se: f64,
    pub mean_q_y: f64,
    pub mean_q_x: f64,
    /// Replications that errored (counted, not fatal below 1%).
    pub failures: u64,
    pub per_target: Vec<PerTargetRate>,
}

struct RepSummary {
    rejected: bool,
    target_rejects: Vec<bool>,
    sum_q_y: f64,
    sum_q_x: f64,
    targets: usize,
}

/// Runs the design `reps` times: draw, select sizes, test, aggregate.
/// Deterministic for a given seed, independent of thread count.
pub fn run_monte_carlo(spec: &DesignSpec, opts: &SimOptions) -> Result<SimResult> {
    if opts.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let targets = spec.targets();
    let mut config = TestConfig::new(opts.alpha, targets.clone())?;
    config.statistic = opts.statistic;
    config.cv_method = opts.cv_method;
    if let Some((q_y, q_x)) = opts.q_override {
        config.q_mode = QMode::Manual(vec![(q_y, q_x); targets.len()]);
    }
    if opts.refined {
        // one spec must serve every target: the largest support keeps the
        // richer tuple set, whose critical value is valid at all targets
        let r = targets
            .iter()
            .map(|&t| spec.refined_support(t))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .expect("nonempty targets");
        config.refined = Some(RefinedSpec::new(r));
    }
    if spec.is_rdd() {
        config.rdd_cutoff = Some(0.0);
    }

    let cache = std::sync::Arc::new(CvCache::new());
    let tester = Tester::with_cache(config, cache)?;
    let rdd_multi = spec.is_rdd() && targets.len() > 1;

    let summaries: Vec<Result<RepSummary>> = (0..opts.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(opts.seed, rep);
            let data = draw_design(spec, &mut rng)?;
            let outcome = match data {
                DrawnData::TwoSample { ysample, xsample } => tester.run(&ysample, &xsample)?,
                DrawnData::Pooled { sample, cutoff } => {
                    if rdd_multi {
                        let (ysample, xsample) = rdd_split(&sample, cutoff)?;
                        tester.run(&ysample, &xsample)?
                    } else {
                        tester.run_rdd(&sample)?
                    }
                }
            };
            Ok(RepSummary {
                rejected: outcome.overall_reject,
                target_rejects: outcome.per_target.iter().map(|t| t.reject).collect(),
                sum_q_y: outcome.per_target.iter().map(|t| t.q_y as f64).sum(),
                sum_q_x: outcome.per_target.iter().map(|t| t.q_x as f64).sum(),
                targets: outcome.per_target.len(),
            })
        })
        .collect();

    let mut failures = 0u64;
    let mut rejected = 0u64;
    let mut per_target_rejects = vec![0u64; targets.len()];
    let mut sum_q_y = 0.0;
    let mut sum_q_x = 0.0;
    let mut target_count = 0u64;
    let mut successes = 0u64;
    let mut first_error = None;
    for s in summaries {
        match s {
            Ok(s) => {
                successes += 1;
                rejected += s.rejected as u64;
                for (k, &r) in s.target_rejects.iter().enumerate() {
                    per_target_rejects[k] += r as u64;
                }
                sum_q_y += s.sum_q_y;
                sum_q_x += s.sum_q_x;
                target_count += s.targets as u64;
            }
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures * 100 > opts.reps {
        return Err(Error::InvalidParameter(format!(
            "{failures} of {} replications failed; first error: {}",
            opts.reps,
            first_error.expect("at least one failure")
        )));
    }
    if successes == 0 {
        return Err(first_error.expect("no successes implies a failure"));
    }

    let rate = rejected as f64 / successes as f64;
    Ok(SimResult {
        design: spec.design,
        case: spec.case,
        n: spec.n,
        alpha: opts.alpha,
        reps: opts.reps,
        seed: opts.seed,
        rejection_rate: rate,
        se: (rate * (1.0 - rate) / successes as f64).sqrt(),
        mean_q_y: sum_q_y / target_count as f64,
        mean_q_x: sum_q_x / target_count as f64,
        failures,
        per_target: targets
            .iter()
            .zip(per_target_rejects)
            .map(|(&target, c)| PerTargetRate {
                target,
                rejection_rate: c as f64 / successes as f64,
            })
            .collect(),
    })
}

/// A finite discrete outcome distribution for limit-experiment draws.
#[derive(Debug, Clone)]
pub struct DiscreteDist {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidParameter(
                "discrete distribution needs matching nonempty values and probabilities".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(DiscreteDist { values, cumulative })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        DiscreteDist::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Rejection frequency of the chosen test when sampling the limit
/// experiment directly: `q_y` draws from `dist_y` and `q_x` from `dist_x`
/// per replication.
pub fn limit_experiment_check(
    dist_y: &DiscreteDist,
    dist_x: &DiscreteDist,
    q_y: usize,
    q_x: usize,
    statistic: StatisticKind,
    alpha: f64,
    reps: u64,
    seed: u64,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let cv = match statistic {
        StatisticKind::Ks => ExactNull::new(q_y, q_x)?.critical_value(alpha)?,
        kind => {
            let nd = match rank_null_enumerated(q_y, q_x, kind) {
                Ok(nd) => nd,
                Err(Error::UnsupportedSize(_)) => {
                    rank_null_mc(q_y, q_x, kind, 1_000_000, seed ^ 0x9e3779b97f4a7c15)?
                }
                Err(e) => return Err(e),
            };
            nd.critical_value(alpha)?
        }
    };
    let rejections: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep);
            let y: Vec<f64> = (0..q_y).map(|_| dist_y.sample(&mut rng)).collect();
            let x: Vec<f64> = (0..q_x).map(|_| dist_x.sample(&mut rng)).collect();
            let s = crate::induced::EffectiveSample::from_values(y, x, 0.0);
            match statistic.compute(&s) {
                Ok(t) => (t > cv) as u64,
                // an undefined statistic cannot exceed the critical value
                Err(_) => 0,
            }
        })
        .sum();
    Ok(rejections as f64 / reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn censor_point_value() {
        assert!((design5_censor_point() - 0.43101).abs() < 1e-5);
    }

    #[test]
    fn design4_mu_at_zero() {
        assert_eq!(design4_mu(0.0), 0.61);
        assert!((design4_mu(1.0) - 0.82).abs() < 1e-12);
    }

    #[test]
    fn design6_probabilities_at_half() {
        // softmax of (-0.5, -1.5, -2.0) at z = 0.5
        let theta: [f64; 3] = [-0.5, -1.5, -2.0];
        let e: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let total: f64 = e.iter().sum();
        let probs: Vec<f64> = e.iter().map(|v| v / total).collect();
        assert!((probs[0] - 0.6285).abs() < 5e-4);
        assert!((probs[1] - 0.2312).abs() < 5e-4);
        assert!((probs[2] - 0.1403).abs() < 5e-4);
    }

    #[test]
    fn draws_have_expected_shape() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for design in 1..=7u8 {
            let spec = DesignSpec::new(design, DesignCase::A, 50).unwrap();
            match draw_design(&spec, &mut rng).unwrap() {
                DrawnData::TwoSample { ysample, xsample } => {
                    assert!(!spec.is_rdd());
                    assert_eq!(ysample.len(), 50);
                    assert_eq!(xsample.len(), 50);
                    for o in ysample.iter().chain(xsample.iter()) {
                        assert!((0.0..=1.0).contains(&o.z));
                        assert!(o.w.is_finite());
                    }
                }
                DrawnData::Pooled { sample, cutoff } => {
                    assert!(spec.is_rdd());
                    assert_eq!(cutoff, 0.0);
                    assert_eq!(sample.len(), 50);
                    for o in &sample {
                        assert!((-1.0..=1.0).contains(&o.z));
                    }
                }
            }
        }
    }

    #[test]
    fn design5_draws_respect_censoring() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spec = DesignSpec::new(5, DesignCase::A, 400).unwrap();
        let DrawnData::TwoSample { ysample, .. } = draw_design(&spec, &mut rng).unwrap()
        else {
            panic!("two-sample design");
        };
        let c = design5_censor_point();
        // w = z^2 * noise with noise >= censor point
        for o in &ysample {
            assert!(o.w >= o.z * o.z * c - 1e-12);
        }
        // the censor atom is hit with probability 0.2
        let at_atom = ysample
            .iter()
            .filter(|o| (o.w - o.z * o.z * c).abs() < 1e-12)
            .count();
        assert!((at_atom as f64 / 400.0 - 0.2).abs() < 0.08);
    }

    #[test]
    fn design7_support_sizes() {
        let spec_a = DesignSpec::new(7, DesignCase::A, 100).unwrap();
        assert_eq!(spec_a.refined_support(0.5).unwrap(), 14);
        let spec_d = DesignSpec::new(7, DesignCase::D, 100).unwrap();
        assert_eq!(spec_d.refined_support(0.5).unwrap(), 13);
        let spec6 = DesignSpec::new(6, DesignCase::A, 100).unwrap();
        assert_eq!(spec6.refined_support(0.5).unwrap(), 3);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_seed_sensitive() {
        let spec = DesignSpec::new(1, DesignCase::A, 120).unwrap();
        let mut opts = SimOptions::new(0.1, 40, 11);
        opts.q_override = Some((8, 8));
        let a = run_monte_carlo(&spec, &opts).unwrap();
        let b = run_monte_carlo(&spec, &opts).unwrap();
        assert_eq!(a.rejection_rate, b.rejection_rate);
        assert_eq!(a.mean_q_y, b.mean_q_y);
        opts.seed = 12;
        let c = run_monte_carlo(&spec, &opts).unwrap();
        assert!(a.rejection_rate != c.rejection_rate || a.mean_q_y == c.mean_q_y);
    }

    #[test]
    fn refined_rejected_for_continuous_designs() {
        let spec = DesignSpec::new(1, DesignCase::A, 100).unwrap();
        let mut opts = SimOptions::new(0.1, 10, 1);
        opts.refined = true;
        assert!(run_monte_carlo(&spec, &opts).is_err());
    }

    #[test]
    fn limit_experiment_ks_identical_bernoulli() {
        let d = DiscreteDist::bernoulli(0.5).unwrap();
        let rate =
            limit_experiment_check(&d, &d, 2, 1, StatisticKind::Ks, 0.05, 20_000, 9).unwrap();
        assert_eq!(rate, 0.0, "T never strictly exceeds c = 1 here");
    }
}
