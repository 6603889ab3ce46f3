//! End-to-end test orchestration: single target, multiple targets with a
//! per-target level adjustment, the refined-critical-value variant, and
//! sharp regression discontinuity mode.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::induced::{build_effective_sample, rdd_split, ObservationPair, TargetPoint};
use crate::nulldist::{
    mc_null_cdf, rank_null_enumerated, rank_null_mc, refined_critical_value, ExactNull,
    NullDistribution, RefinedCv, RefinedSpec,
};
use crate::stats::StatisticKind;
use crate::tuning::{estimate_moments, rule_of_thumb_q_clamped, MIN_Q};

/// How the effective sample sizes are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QMode {
    /// Data-dependent rule per sample side, evaluated at each target.
    Auto,
    /// Explicit `(q_y, q_x)` per target (must match the target count).
    Manual(Vec<(usize, usize)>),
}

/// How critical values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CvMethod {
    ExactDp,
    MonteCarlo { draws: u64, seed: u64 },
}

impl Default for CvMethod {
    fn default() -> Self {
        CvMethod::ExactDp
    }
}

/// Full configuration of a test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub targets: Vec<f64>,
    pub statistic: StatisticKind,
    pub q_mode: QMode,
    pub cv_method: CvMethod,
    /// Refined critical value parameters; applies to the KS statistic only.
    pub refined: Option<RefinedSpec>,
    pub rdd_cutoff: Option<f64>,
    /// Lower clamp for the automatic size rule.
    pub q_min: usize,
    /// Optional upper clamp for the automatic size rule (defaults to the
    /// sample size).
    pub q_max: Option<usize>,
}

impl TestConfig {
    pub fn new(alpha: f64, targets: Vec<f64>) -> Result<Self> {
        let cfg = TestConfig {
            alpha,
            targets,
            statistic: StatisticKind::Ks,
            q_mode: QMode::Auto,
            cv_method: CvMethod::ExactDp,
            refined: None,
            rdd_cutoff: None,
            q_min: MIN_Q,
            q_max: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidParameter("no target points given".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite target {t}")));
            }
            if self.targets[..i].contains(t) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate target point {t}"
                )));
            }
        }
        if let QMode::Manual(qs) = &self.q_mode {
            if qs.len() != self.targets.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} manual (q_y, q_x) pairs for {} targets",
                    qs.len(),
                    self.targets.len()
                )));
            }
        }
        Ok(())
    }

    /// Level each individual target is tested at so the overall test holds
    /// level `alpha`: `1 - (1 - alpha)^(1/L)`.
    pub fn per_target_level(&self) -> f64 {
        per_target_level(self.alpha, self.targets.len())
    }
}

pub fn per_target_level(alpha: f64, l: usize) -> f64 {
    if l <= 1 {
        alpha
    } else {
        1.0 - (1.0 - alpha).powf(1.0 / l as f64)
    }
}

/// Outcome at one target point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub target: f64,
    pub q_y: usize,
    pub q_x: usize,
    pub statistic: StatisticKind,
    pub statistic_value: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub per_target_level: f64,
}

/// Metadata echoed with every outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMetadata {
    pub statistic: StatisticKind,
    pub cv_method: CvMethod,
    pub refined: Option<RefinedSpec>,
    pub library_version: String,
}

/// Result of a full (possibly multi-target) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub per_target: Vec<TargetResult>,
    pub overall_reject: bool,
    pub warnings: Vec<String>,
    pub metadata: OutcomeMetadata,
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct RankNullKey {
    q_y: usize,
    q_x: usize,
    kind: StatisticKind,
    method: CvMethod,
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct RefinedKey {
    q_y: usize,
    q_x: usize,
    level_bits: u64,
    spec: RefinedSpec,
}

type Slot<T> = Arc<std::sync::OnceLock<Result<T>>>;

/// Get-or-compute with per-key deduplication: concurrent callers of the
/// same key block on one computation instead of repeating it.
fn memoize<K, T, F>(map: &Mutex<HashMap<K, Slot<T>>>, key: K, compute: F) -> Result<T>
where
    K: std::hash::Hash + Eq,
    T: Clone,
    F: FnOnce() -> Result<T>,
{
    let slot = Arc::clone(map.lock().unwrap().entry(key).or_default());
    match slot.get_or_init(compute) {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(e.clone_shallow()),
    }
}

/// Memoizes null-distribution engines across targets and replications.
/// Everything cached is a pure function of its key, so sharing a cache
/// never changes results.
#[derive(Default)]
pub struct CvCache {
    exact: Mutex<HashMap<(usize, usize), Slot<Arc<ExactNull>>>>,
    mc: Mutex<HashMap<(usize, usize, u64, u64), Slot<Arc<NullDistribution>>>>,
    rank: Mutex<HashMap<RankNullKey, Slot<Arc<NullDistribution>>>>,
    refined: Mutex<HashMap<RefinedKey, Slot<RefinedCv>>>,
}

impl CvCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn exact_engine(&self, q_y: usize, q_x: usize) -> Result<Arc<ExactNull>> {
        memoize(&self.exact, (q_y, q_x), || {
            Ok(Arc::new(ExactNull::new(q_y, q_x)?))
        })
    }

    fn mc_null(
        &self,
        q_y: usize,
        q_x: usize,
        draws: u64,
        seed: u64,
    ) -> Result<Arc<NullDistribution>> {
        memoize(&self.mc, (q_y, q_x, draws, seed), || {
            Ok(Arc::new(mc_null_cdf(q_y, q_x, draws, seed)?))
        })
    }

    fn rank_null(
        &self,
        q_y: usize,
        q_x: usize,
        kind: StatisticKind,
        method: CvMethod,
    ) -> Result<Arc<NullDistribution>> {
        let key = RankNullKey { q_y, q_x, kind, method };
        memoize(&self.rank, key, || {
            Ok(Arc::new(match method {
                CvMethod::ExactDp => rank_null_enumerated(q_y, q_x, kind)?,
                CvMethod::MonteCarlo { draws, seed } => {
                    rank_null_mc(q_y, q_x, kind, draws, seed)?
                }
            }))
        })
    }

    fn refined_cv(
        &self,
        q_y: usize,
        q_x: usize,
        level: f64,
        spec: &RefinedSpec,
    ) -> Result<RefinedCv> {
        let key = RefinedKey {
            q_y,
            q_x,
            level_bits: level.to_bits(),
            spec: *spec,
        };
        memoize(&self.refined, key, || {
            refined_critical_value(q_y, q_x, level, spec)
        })
    }
}

/// A reusable test runner: configuration plus a shared critical-value cache.
pub struct Tester {
    config: TestConfig,
    cache: Arc<CvCache>,
}

impl Tester {
    pub fn new(config: TestConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tester {
            config,
            cache: Arc::new(CvCache::new()),
        })
    }

    /// Shares a critical-value cache across testers (used by simulation
    /// harnesses where tuning re-selects sizes every replication).
    pub fn with_cache(config: TestConfig, cache: Arc<CvCache>) -> Result<Self> {
        config.validate()?;
        Ok(Tester { config, cache })
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    fn choose_q(
        &self,
        sample: &[ObservationPair],
        z0: f64,
        manual: Option<usize>,
    ) -> Result<usize> {
        if let Some(q) = manual {
            return Ok(q);
        }
        let t = estimate_moments(sample)?;
        let hi = self.config.q_max.unwrap_or(sample.len()).min(sample.len());
        rule_of_thumb_q_clamped(&t, z0, self.config.q_min, hi)
    }

    fn single_target(
        &self,
        ysample: &[ObservationPair],
        xsample: &[ObservationPair],
        target: f64,
        level: f64,
        manual_q: Option<(usize, usize)>,
        warnings: &mut Vec<String>,
    ) -> Result<(TargetResult, Vec<usize>, Vec<usize>)> {
        let q_y = self.choose_q(ysample, target, manual_q.map(|m| m.0))?;
        let q_x = self.choose_q(xsample, target, manual_q.map(|m| m.1))?;
        let sample = build_effective_sample(ysample, xsample, target, q_y, q_x)?;
        let statistic_value = self.config.statistic.compute(&sample)?;

        let (critical_value, p_value) = match self.config.statistic {
            StatisticKind::Ks => {
                let refined = match &self.config.refined {
                    Some(spec) => Some(self.cache.refined_cv(q_y, q_x, level, spec)?),
                    None => None,
                };
                if let Some(rc) = &refined {
                    if rc.grid_warning {
                        warnings.push(format!(
                            "target {target}: refined search grid may be too coarse \
                             (local descent left the starting cell)"
                        ));
                    }
                }
                match self.config.cv_method {
                    CvMethod::ExactDp => {
                        let engine = self.cache.exact_engine(q_y, q_x)?;
                        let cv = match &refined {
                            Some(rc) => rc.value,
                            None => engine.critical_value(level)?,
                        };
                        (cv, engine.p_value(statistic_value)?)
                    }
                    CvMethod::MonteCarlo { draws, seed } => {
                        let nd = self.cache.mc_null(q_y, q_x, draws, seed)?;
                        let cv = match &refined {
                            Some(rc) => rc.value,
                            None => nd.critical_value(level)?,
                        };
                        (cv, nd.p_value(statistic_value)?)
                    }
                }
            }
            kind => {
                if self.config.refined.is_some() {
                    warnings.push(format!(
                        "refined critical value applies to the KS statistic only; \
                         ignored for {kind}"
                    ));
                }
                let nd = self
                    .cache
                    .rank_null(q_y, q_x, kind, self.config.cv_method)?;
                (
                    nd.critical_value(level)?,
                    nd.p_value(statistic_value)?,
                )
            }
        };

        let result = TargetResult {
            target,
            q_y,
            q_x,
            statistic: self.config.statistic,
            statistic_value,
            critical_value,
            p_value,
            reject: statistic_value > critical_value,
            per_target_level: level,
        };
        Ok((result, sample.y_indices, sample.x_indices))
    }

    /// Runs the test at every configured target; the overall decision is the
    /// maximum (any single rejection rejects).
    pub fn run(
        &self,
        ysample: &[ObservationPair],
        xsample: &[ObservationPair],
    ) -> Result<TestOutcome> {
        if ysample.is_empty() || xsample.is_empty() {
            return Err(Error::EmptyInput("both samples must be nonempty".into()));
        }
        let level = self.config.per_target_level();
        let mut warnings = Vec::new();
        if self.config.statistic == StatisticKind::Cvm {
            warnings.push(
                "CvM statistic: level control requires continuously distributed \
                 outcomes; invalid for discrete or mixed data"
                    .into(),
            );
        } else if self.config.statistic == StatisticKind::Ad {
            warnings.push(
                "AD statistic: level control is unproven even for continuous \
                 outcomes and fails for discrete data"
                    .into(),
            );
        }

        let mut per_target = Vec::with_capacity(self.config.targets.len());
        let mut selections: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for (i, &target) in self.config.targets.iter().enumerate() {
            let manual = match &self.config.q_mode {
                QMode::Auto => None,
                QMode::Manual(qs) => Some(qs[i]),
            };
            let (res, yi, xi) = self
                .single_target(ysample, xsample, target, level, manual, &mut warnings)
                .map_err(|e| e.at_target(target))?;
            per_target.push(res);
            selections.push((yi, xi));
        }

        overlap_warnings(&self.config.targets, &selections, &mut warnings);

        let overall_reject = per_target.iter().any(|r| r.reject);
        Ok(TestOutcome {
            per_target,
            overall_reject,
            warnings,
            metadata: OutcomeMetadata {
                statistic: self.config.statistic,
                cv_method: self.config.cv_method,
                refined: self.config.refined,
                library_version: env!("CARGO_PKG_VERSION").into(),
            },
        })
    }

    /// Sharp regression discontinuity mode: splits the pooled sample at the
    /// configured cutoff and tests dominance at the cutoff itself.
    pub fn run_rdd(&self, sample: &[ObservationPair]) -> Result<TestOutcome> {
        let Some(cutoff) = self.config.rdd_cutoff else {
            return Err(Error::InvalidParameter(
                "rdd mode requires a cutoff".into(),
            ));
        };
        let (ysample, xsample) = rdd_split(sample, cutoff)?;
        let mut config = self.config.clone();
        config.targets = vec![cutoff];
        if let QMode::Manual(qs) = &config.q_mode {
            config.q_mode = QMode::Manual(vec![qs[0]]);
        }
        let tester = Tester::with_cache(config, Arc::clone(&self.cache))?;
        tester.run(&ysample, &xsample)
    }
}

fn overlap_warnings(
    targets: &[f64],
    selections: &[(Vec<usize>, Vec<usize>)],
    warnings: &mut Vec<String>,
) {
    if targets.len() < 2 {
        return;
    }
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            for (side, pick) in [("Y", 0usize), ("X", 1usize)] {
                let a: std::collections::BTreeSet<usize> = match pick {
                    0 => selections[i].0.iter().copied().collect(),
                    _ => selections[i].1.iter().copied().collect(),
                };
                let shared: Vec<usize> = match pick {
                    0 => selections[j].0.iter().filter(|k| a.contains(k)).copied().collect(),
                    _ => selections[j].1.iter().filter(|k| a.contains(k)).copied().collect(),
                };
                if !shared.is_empty() {
                    let head: Vec<String> =
                        shared.iter().take(20).map(|k| k.to_string()).collect();
                    let tail = if shared.len() > 20 {
                        format!(" and {} more", shared.len() - 20)
                    } else {
                        String::new()
                    };
                    warnings.push(format!(
                        "targets {} and {} share {} {side}-sample observations \
                         (indices {}{})",
                        targets[i],
                        targets[j],
                        shared.len(),
                        head.join(", "),
                        tail
                    ));
                }
            }
        }
    }
}

/// One-shot single-target run at an explicit level.
pub fn run_single_target(
    ysample: &[ObservationPair],
    xsample: &[ObservationPair],
    target: TargetPoint,
    level: f64,
    config: &TestConfig,
) -> Result<TargetResult> {
    let mut config = config.clone();
    config.alpha = level;
    config.targets = vec![target.z0];
    if let QMode::Manual(qs) = &config.q_mode {
        config.q_mode = QMode::Manual(vec![qs[0]]);
    }
    let tester = Tester::new(config)?;
    let outcome = tester.run(ysample, xsample)?;
    Ok(outcome.per_target.into_iter().next().expect("one target"))
}

/// One-shot multi-target run.
pub fn run_multi_target(
    ysample: &[ObservationPair],
    xsample: &[ObservationPair],
    config: &TestConfig,
) -> Result<TestOutcome> {
    Tester::new(config.clone())?.run(ysample, xsample)
}

/// One-shot regression discontinuity run.
pub fn run_rdd(sample: &[ObservationPair], config: &TestConfig) -> Result<TestOutcome> {
    Tester::new(config.clone())?.run_rdd(sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(ws: &[f64], zs: &[f64]) -> Vec<ObservationPair> {
        ws.iter()
            .zip(zs)
            .enumerate()
            .map(|(i, (&w, &z))| ObservationPair::new(w, z, i))
            .collect()
    }

    fn manual_config(alpha: f64, q_y: usize, q_x: usize) -> TestConfig {
        let mut cfg = TestConfig::new(alpha, vec![0.5]).unwrap();
        cfg.q_mode = QMode::Manual(vec![(q_y, q_x)]);
        cfg
    }

    #[test]
    fn identical_samples_never_reject() {
        let y = pairs(&[1.0, 2.0, 3.0], &[0.4, 0.5, 0.6]);
        let x = y.clone();
        let cfg = manual_config(0.1, 3, 3);
        let out = run_multi_target(&y, &x, &cfg).unwrap();
        assert!(!out.overall_reject);
        assert_eq!(out.per_target[0].statistic_value, 0.0);
        assert_eq!(out.per_target[0].p_value, 1.0);
    }

    #[test]
    fn boundary_statistic_needs_strict_exceedance() {
        // T = 0.5 equals c_{0.25}(2, 4): no rejection on ties with the cv
        let y = pairs(&[1.0, 3.0], &[0.49, 0.51]);
        let x = pairs(&[2.0, 4.0], &[0.48, 0.52]);
        let cfg = manual_config(0.25, 2, 2);
        let out = run_multi_target(&y, &x, &cfg).unwrap();
        let r = &out.per_target[0];
        assert_eq!(r.statistic_value, 0.5);
        assert_eq!(r.critical_value, 0.5);
        assert!(!r.reject);
    }

    #[test]
    fn per_target_level_formula() {
        assert_eq!(per_target_level(0.1, 1), 0.1);
        let l2 = per_target_level(0.1, 2);
        assert!((l2 - (1.0 - 0.9f64.sqrt())).abs() < 1e-15);
        assert!((l2 - 0.051317).abs() < 1e-6);
    }

    #[test]
    fn multi_target_rejects_if_any_rejects() {
        // y far below x near 0.8, identical near 0.2
        let mut y = Vec::new();
        let mut x = Vec::new();
        for i in 0..40 {
            let z = 0.1 + 0.2 * (i as f64 / 40.0);
            y.push((0.0 + i as f64 * 1e-3, z));
            x.push((0.0 + i as f64 * 1e-3, z + 1e-4));
        }
        for i in 0..40 {
            let z = 0.7 + 0.2 * (i as f64 / 40.0);
            y.push((-10.0 - i as f64, z));
            x.push((10.0 + i as f64, z + 1e-4));
        }
        let ys: Vec<ObservationPair> = y
            .iter()
            .enumerate()
            .map(|(i, &(w, z))| ObservationPair::new(w, z, i))
            .collect();
        let xs: Vec<ObservationPair> = x
            .iter()
            .enumerate()
            .map(|(i, &(w, z))| ObservationPair::new(w, z, i))
            .collect();
        let mut cfg = TestConfig::new(0.1, vec![0.2, 0.8]).unwrap();
        cfg.q_mode = QMode::Manual(vec![(20, 20), (20, 20)]);
        let out = run_multi_target(&ys, &xs, &cfg).unwrap();
        assert!(!out.per_target[0].reject);
        assert!(out.per_target[1].reject);
        assert!(out.overall_reject);
    }

    #[test]
    fn rdd_mode_splits_and_tests_at_cutoff() {
        let mut sample = Vec::new();
        for i in 0..60 {
            let z = -1.0 + 2.0 * (i as f64 + 0.5) / 60.0;
            let w = z * 0.1 + if i % 2 == 0 { 0.01 } else { -0.01 };
            sample.push(ObservationPair::new(w, z, i));
        }
        let mut cfg = TestConfig::new(0.1, vec![0.0]).unwrap();
        cfg.rdd_cutoff = Some(0.0);
        cfg.q_mode = QMode::Manual(vec![(10, 10)]);
        let out = run_rdd(&sample, &cfg).unwrap();
        assert_eq!(out.per_target.len(), 1);
        assert_eq!(out.per_target[0].target, 0.0);
    }

    #[test]
    fn rdd_degenerate_split_propagates() {
        let sample = pairs(&[1.0, 2.0], &[1.0, 2.0]);
        let mut cfg = TestConfig::new(0.1, vec![0.0]).unwrap();
        cfg.rdd_cutoff = Some(0.0);
        assert!(matches!(
            run_rdd(&sample, &cfg),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn refined_cv_dominated_by_default() {
        let y = pairs(&[1.0, 2.0, 1.0, 2.0, 1.0], &[0.48, 0.49, 0.5, 0.51, 0.52]);
        let x = pairs(&[1.0, 2.0, 2.0, 1.0, 2.0], &[0.47, 0.49, 0.5, 0.51, 0.53]);
        let plain = manual_config(0.1, 4, 4);
        let mut refined = plain.clone();
        refined.refined = Some(RefinedSpec::new(2));
        let out_plain = run_multi_target(&y, &x, &plain).unwrap();
        let out_ref = run_multi_target(&y, &x, &refined).unwrap();
        assert!(
            out_ref.per_target[0].critical_value <= out_plain.per_target[0].critical_value
        );
    }

    #[test]
    fn cvm_run_carries_warning() {
        let y = pairs(&[1.0, 2.0, 3.0], &[0.4, 0.5, 0.6]);
        let x = y.clone();
        let mut cfg = manual_config(0.1, 3, 3);
        cfg.statistic = StatisticKind::Cvm;
        let out = run_multi_target(&y, &x, &cfg).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("CvM")));
    }

    #[test]
    fn overlapping_targets_warn() {
        let y = pairs(&[1.0, 2.0, 3.0], &[0.4, 0.5, 0.6]);
        let x = y.clone();
        let mut cfg = TestConfig::new(0.1, vec![0.45, 0.55]).unwrap();
        cfg.q_mode = QMode::Manual(vec![(3, 3), (3, 3)]);
        let out = run_multi_target(&y, &x, &cfg).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("share")));
    }

    #[test]
    fn determinism_with_mc_critical_values() {
        let y = pairs(&[0.3, 1.4, -0.2, 2.2, 0.8], &[0.41, 0.46, 0.5, 0.55, 0.61]);
        let x = pairs(&[1.3, 0.4, 0.9, -0.5, 1.8], &[0.39, 0.44, 0.52, 0.57, 0.63]);
        let mut cfg = manual_config(0.1, 4, 4);
        cfg.cv_method = CvMethod::MonteCarlo { draws: 20_000, seed: 5 };
        let a = run_multi_target(&y, &x, &cfg).unwrap();
        let b = run_multi_target(&y, &x, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decision_invariant_under_increasing_transform() {
        let y = pairs(&[0.3, 1.4, -0.2, 2.2, 0.8], &[0.41, 0.46, 0.5, 0.55, 0.61]);
        let x = pairs(&[1.3, 0.4, 0.9, -0.5, 1.8], &[0.39, 0.44, 0.52, 0.57, 0.63]);
        let cfg = manual_config(0.1, 5, 5);
        let base = run_multi_target(&y, &x, &cfg).unwrap();
        let f = |w: f64| (w * 0.7).exp() + 3.0 * w;
        let ty: Vec<ObservationPair> = y
            .iter()
            .map(|o| ObservationPair::new(f(o.w), o.z, o.index))
            .collect();
        let tx: Vec<ObservationPair> = x
            .iter()
            .map(|o| ObservationPair::new(f(o.w), o.z, o.index))
            .collect();
        let mapped = run_multi_target(&ty, &tx, &cfg).unwrap();
        assert_eq!(base, mapped);
    }
}
