//! One-sided two-sample test statistics on an effective sample.
//!
//! All three statistics are rank statistics: they depend on the pooled values
//! only through the pattern of orderings and ties, so a common strictly
//! increasing transform of all values leaves them exactly unchanged. The
//! implementation works in integer units (counts scaled by `q_y * q_x`) and
//! converts to floating point once, which makes that invariance bit-exact.

use crate::error::{Error, Result};
use crate::induced::EffectiveSample;
use serde::{Deserialize, Serialize};

/// Empirical CDF of a sample: `eval(t)` is the fraction of points `<= t`.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted_points: Vec<f64>,
}

impl Ecdf {
    pub fn new(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("ecdf of empty sample".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite ecdf point".into()));
        }
        let mut sorted_points = points.to_vec();
        sorted_points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Ecdf { sorted_points })
    }

    pub fn len(&self) -> usize {
        self.sorted_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_points.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.sorted_points.partition_point(|&p| p <= t);
        k as f64 / self.sorted_points.len() as f64
    }

    /// Kolmogorov distance `sup_t |F_hat(t) - F(t)|` against a reference CDF.
    pub fn ks_distance_to<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted_points.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &p) in self.sorted_points.iter().enumerate() {
            let f = cdf(p);
            d = d.max(((i + 1) as f64 / n - f).abs());
            d = d.max((f - i as f64 / n).abs());
        }
        d
    }
}

/// Which one-sided statistic to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StatisticKind {
    Ks,
    Cvm,
    Ad,
}

impl StatisticKind {
    pub fn compute(self, s: &EffectiveSample) -> Result<f64> {
        match self {
            StatisticKind::Ks => ks_statistic(s),
            StatisticKind::Cvm => cvm_statistic(s),
            StatisticKind::Ad => ad_statistic(s),
        }
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatisticKind::Ks => write!(f, "KS"),
            StatisticKind::Cvm => write!(f, "CvM"),
            StatisticKind::Ad => write!(f, "AD"),
        }
    }
}

/// Converts a statistic value in integer units to its real value. Shared by
/// the statistics and every null-distribution engine so that equal integer
/// values map to bit-identical floats.
pub(crate) fn delta_value(v: i64, q_y: usize, q_x: usize) -> f64 {
    v as f64 / (q_y as f64 * q_x as f64)
}

/// Sweep over the pooled sample in ascending value order, yielding at each
/// distinct value the cumulative counts and the multiplicity of that value.
fn sweep_distinct(s: &EffectiveSample) -> Result<Vec<SweepPoint>> {
    let q_y = s.q_y();
    let q_x = s.q_x();
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "statistic requires at least one observation on each side".into(),
        ));
    }
    let mut pooled: Vec<(f64, bool)> = s
        .y_values
        .iter()
        .map(|&v| (v, true))
        .chain(s.x_values.iter().map(|&v| (v, false)))
        .collect();
    if pooled.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample value".into()));
    }
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));

    let mut out = Vec::new();
    let mut cy = 0usize;
    let mut cx = 0usize;
    let mut i = 0;
    while i < pooled.len() {
        let v = pooled[i].0;
        let mut my = 0usize;
        let mut mx = 0usize;
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                my += 1;
            } else {
                mx += 1;
            }
            i += 1;
        }
        cy += my;
        cx += mx;
        out.push(SweepPoint { cy, cx, my, mx });
    }
    Ok(out)
}

struct SweepPoint {
    /// Y points with value <= this one.
    cy: usize,
    /// X points with value <= this one.
    cx: usize,
    /// Y multiplicity at this value.
    my: usize,
    /// X multiplicity at this value.
    mx: usize,
}

/// One-sided Kolmogorov-Smirnov statistic: the maximum of
/// `F_hat_Y(t) - F_hat_X(t)` over the Y sample points. Always in `[0, 1]`.
pub fn ks_statistic(s: &EffectiveSample) -> Result<f64> {
    Ok(delta_value(ks_statistic_int(s)?, s.q_y(), s.q_x()))
}

/// KS statistic in integer units of `1 / (q_y * q_x)`.
pub(crate) fn ks_statistic_int(s: &EffectiveSample) -> Result<i64> {
    let q_y = s.q_y() as i64;
    let q_x = s.q_x() as i64;
    let mut best = i64::MIN;
    for p in sweep_distinct(s)? {
        if p.my > 0 {
            best = best.max(p.cy as i64 * q_x - p.cx as i64 * q_y);
        }
    }
    Ok(best)
}

/// One-sided Cramer-von Mises statistic: the average over all pooled points
/// of the squared positive part of `F_hat_Y - F_hat_X`. Note the squared
/// positive-part convention: a difference `v` contributes `max(v, 0)^2`.
pub fn cvm_statistic(s: &EffectiveSample) -> Result<f64> {
    let q_y = s.q_y();
    let q_x = s.q_x();
    let q = (q_y + q_x) as f64;
    let mut sum = 0.0;
    for p in sweep_distinct(s)? {
        let d = p.cy as i64 * q_x as i64 - p.cx as i64 * q_y as i64;
        if d > 0 {
            let v = delta_value(d, q_y, q_x);
            sum += v * v * (p.my + p.mx) as f64;
        }
    }
    Ok(sum / q)
}

/// One-sided Anderson-Darling statistic: as CvM but each term is weighted by
/// `1 / (F_hat_S (1 - F_hat_S))` with `F_hat_S` the pooled ECDF. Terms whose
/// denominator vanishes (always the largest pooled value) are excluded; if
/// every term is excluded the statistic is undefined.
pub fn ad_statistic(s: &EffectiveSample) -> Result<f64> {
    let q_y = s.q_y();
    let q_x = s.q_x();
    let q = q_y + q_x;
    let mut sum = 0.0;
    let mut any_term = false;
    for p in sweep_distinct(s)? {
        let cs = p.cy + p.cx;
        if cs == q {
            // pooled ECDF reaches 1; denominator is zero
            continue;
        }
        any_term = true;
        let d = p.cy as i64 * q_x as i64 - p.cx as i64 * q_y as i64;
        if d > 0 {
            let v = delta_value(d, q_y, q_x);
            let fs = cs as f64 / q as f64;
            sum += v * v / (fs * (1.0 - fs)) * (p.my + p.mx) as f64;
        }
    }
    if !any_term {
        return Err(Error::UndefinedStatistic(
            "all pooled values are tied; every AD term has a zero denominator".into(),
        ));
    }
    Ok(sum / q as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn es(y: &[f64], x: &[f64]) -> EffectiveSample {
        EffectiveSample::from_values(y.to_vec(), x.to_vec(), 0.0)
    }

    #[test]
    fn ecdf_contract() {
        let e = Ecdf::new(&[2.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 1.0 / 3.0);
        assert_eq!(e.eval(2.0), 1.0);
        assert_eq!(e.eval(f64::INFINITY), 1.0);
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        assert_eq!(ks_statistic(&es(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn ks_complete_separation_is_one() {
        assert_eq!(ks_statistic(&es(&[1.0, 2.0], &[3.0, 4.0])).unwrap(), 1.0);
    }

    #[test]
    fn ks_interleaved() {
        assert_eq!(ks_statistic(&es(&[1.0, 3.0], &[2.0, 4.0])).unwrap(), 0.5);
    }

    #[test]
    fn cvm_examples() {
        assert_eq!(cvm_statistic(&es(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(cvm_statistic(&es(&[1.0, 2.0], &[3.0, 4.0])).unwrap(), 0.375);
        assert_eq!(cvm_statistic(&es(&[2.0], &[1.0])).unwrap(), 0.0);
    }

    #[test]
    fn ad_examples() {
        assert_eq!(ad_statistic(&es(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.0);
        let t = ad_statistic(&es(&[1.0, 2.0], &[3.0, 4.0])).unwrap();
        assert!((t - 5.0 / 3.0).abs() < 1e-15, "got {t}");
        assert_eq!(ad_statistic(&es(&[2.0], &[1.0])).unwrap(), 0.0);
    }

    #[test]
    fn ad_all_tied_is_undefined() {
        assert!(matches!(
            ad_statistic(&es(&[1.0, 1.0], &[1.0])),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn empty_side_rejected() {
        assert!(ks_statistic(&es(&[], &[1.0])).is_err());
        assert!(ks_statistic(&es(&[1.0], &[])).is_err());
    }

    proptest! {
        #[test]
        fn ks_bounds_and_rank_invariance(
            y in proptest::collection::vec(-50.0f64..50.0, 1..12),
            x in proptest::collection::vec(-50.0f64..50.0, 1..12),
            a in 0.1f64..5.0,
            b in -10.0f64..10.0,
        ) {
            let s = es(&y, &x);
            let t = ks_statistic(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));

            // affine map preserves order exactly, so the statistic is bit-identical
            let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let t2 = ks_statistic(&es(&ty, &tx)).unwrap();
            prop_assert_eq!(t.to_bits(), t2.to_bits());
        }

        #[test]
        fn cvm_dominated_by_ks_squared(
            y in proptest::collection::vec(-9.0f64..9.0, 1..10),
            x in proptest::collection::vec(-9.0f64..9.0, 1..10),
        ) {
            let s = es(&y, &x);
            let ks = ks_statistic(&s).unwrap();
            let cvm = cvm_statistic(&s).unwrap();
            prop_assert!(cvm <= ks * ks + 1e-15);
        }

        #[test]
        fn ks_zero_iff_no_positive_gap(
            y in proptest::collection::vec(0i32..6, 1..8),
            x in proptest::collection::vec(0i32..6, 1..8),
        ) {
            let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let s = es(&yf, &xf);
            let t = ks_statistic(&s).unwrap();
            let ey = Ecdf::new(&yf).unwrap();
            let ex = Ecdf::new(&xf).unwrap();
            let any_pos = yf.iter().any(|&p| ey.eval(p) > ex.eval(p));
            prop_assert_eq!(t > 0.0, any_pos);
        }
    }
}
