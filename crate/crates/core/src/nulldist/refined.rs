//! Refined critical value for discretely distributed data.
//!
//! When both outcomes have at most `r` support points, the ECDF difference
//! is only ever probed at `r` interior points, so the quantile of the
//! maximum over the worst ordered `r`-tuple of probe points replaces the
//! quantile of the full supremum. The inner probability for a fixed tuple
//! is exact: the group counts falling below each probe point form a Markov
//! chain with conditional binomial increments, and the joint chain is small
//! enough to run as a dense dynamic program. The outer infimum over tuples
//! is approximated by grid search followed by a local descent.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nulldist::exact::{check_alpha, delta_support_int, ExactNull};
use crate::stats::delta_value;
use serde::{Deserialize, Serialize};

/// Parameters of the refined critical value search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RefinedSpec {
    /// Smaller of the two outcome support sizes.
    pub r: usize,
    /// Number of uniformly spaced interior grid points per coordinate.
    pub grid_resolution: usize,
    /// Rounds of local step-halving descent from the best grid tuple.
    pub refinement_iterations: usize,
}

impl RefinedSpec {
    /// Defaults that keep the tuple count manageable as `r` grows.
    pub fn new(r: usize) -> Self {
        let grid_resolution = match r {
            0 | 1 => 101,
            2 => 41,
            3 => 21,
            _ => {
                let mut g = r + 1;
                while tuple_count(g + 1, r).is_some_and(|c| c <= 300) {
                    g += 1;
                }
                g
            }
        };
        RefinedSpec {
            r,
            grid_resolution,
            refinement_iterations: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidParameter("refined r must be >= 1".into()));
        }
        if self.grid_resolution < self.r {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {} cannot seat an ordered {}-tuple",
                self.grid_resolution, self.r
            )));
        }
        match tuple_count(self.grid_resolution, self.r) {
            Some(c) if c <= MAX_GRID_TUPLES => Ok(()),
            _ => Err(Error::UnsupportedSize(format!(
                "grid of {} points yields more than {MAX_GRID_TUPLES} ordered \
                 {}-tuples; lower the resolution",
                self.grid_resolution, self.r
            ))),
        }
    }
}

/// Hard bound on the exhaustive tuple grid.
pub const MAX_GRID_TUPLES: u64 = 500_000;

fn tuple_count(g: usize, r: usize) -> Option<u64> {
    if r > g {
        return Some(0);
    }
    let mut c: u64 = 1;
    for i in 1..=r.min(g - r) {
        c = c.checked_mul((g - i + 1) as u64)? / i as u64;
        if c > MAX_GRID_TUPLES {
            return None;
        }
    }
    Some(c)
}

/// Result of the refined search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedCv {
    pub value: f64,
    /// Quantile at the equally spaced tuple; a valid lower bound.
    pub lower_bound: f64,
    /// The default critical value for the same `(q_y, q_x, alpha)`.
    pub upper_bound: f64,
    /// Set when local descent moved a coordinate by more than one grid
    /// cell, a sign the grid was too coarse to bracket the minimizer.
    pub grid_warning: bool,
}

/// `P{ max_k Delta(u_k) <= x }` for an ordered tuple of probe points.
pub fn tuple_cdf(q_y: usize, q_x: usize, u_tuple: &[f64], x: f64) -> Result<f64> {
    if q_y == 0 || q_x == 0 {
        return Err(Error::InvalidParameter(
            "q_y and q_x must be at least 1".into(),
        ));
    }
    validate_tuple(u_tuple)?;
    let denom = (q_y * q_x) as f64;
    if x >= 1.0 {
        return Ok(1.0);
    }
    if x < -1.0 {
        return Ok(0.0);
    }
    // snap to the value lattice: achievable differences are multiples of
    // 1/(q_y q_x), and the event {Delta <= x} only sees the floor
    let scaled = x * denom;
    let near = scaled.round();
    let v = if (scaled - near).abs() < 1e-9 {
        near as i64
    } else {
        scaled.floor() as i64
    };
    let out = tuple_cdf_int(q_y, q_x, u_tuple, v, None, PMF_EPS);
    if out.needs_exact() {
        Ok(tuple_cdf_int(q_y, q_x, u_tuple, v, None, 0.0).p)
    } else {
        Ok(out.p)
    }
}

fn validate_tuple(u_tuple: &[f64]) -> Result<()> {
    if u_tuple.is_empty() {
        return Err(Error::InvalidParameter("empty probe tuple".into()));
    }
    let mut prev = 0.0;
    for &u in u_tuple {
        if !(u > prev && u < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "probe points must be strictly increasing within (0, 1); got {u_tuple:?}"
            )));
        }
        prev = u;
    }
    Ok(())
}

const PMF_EPS: f64 = 1e-12;

thread_local! {
    // DP scratch reused across evaluations; the grid search runs the DP
    // thousands of times per call
    static SCRATCH: std::cell::RefCell<(Vec<f64>, Vec<f64>)> =
        const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
}

struct TupleProb {
    /// Mass that provably satisfies every constraint.
    p: f64,
    /// Mass dropped by pmf tail truncation; the true probability lies in
    /// `[p, p + lost]`.
    lost: f64,
}

impl TupleProb {
    fn needs_exact(&self) -> bool {
        // resolve only when truncation could flip a comparison
        self.lost > 1e-12
    }
}

/// Binomial pmf with tails below `eps * pmf(mode)` dropped.
/// Returns the first retained count and the retained probabilities.
fn binom_pmf(m: usize, p: f64, eps: f64) -> (usize, Vec<f64>) {
    if m == 0 || p <= 0.0 {
        return (0, vec![1.0]);
    }
    if p >= 1.0 {
        return (m, vec![1.0]);
    }
    let mf = m as f64;
    let mode = ((mf + 1.0) * p).floor().min(mf) as usize;
    let ln_pmf_mode = statrs::function::gamma::ln_gamma(mf + 1.0)
        - statrs::function::gamma::ln_gamma(mode as f64 + 1.0)
        - statrs::function::gamma::ln_gamma((m - mode) as f64 + 1.0)
        + mode as f64 * p.ln()
        + (m - mode) as f64 * (1.0 - p).ln();
    let pmf_mode = ln_pmf_mode.exp();
    let cut = eps * pmf_mode;

    // extend downward from the mode
    let mut lower = Vec::new();
    let mut val = pmf_mode;
    let mut d = mode;
    while d > 0 {
        let next = val * d as f64 / (m - d + 1) as f64 * (1.0 - p) / p;
        if next < cut {
            break;
        }
        lower.push(next);
        val = next;
        d -= 1;
    }
    let dlo = d;
    let mut probs: Vec<f64> = lower.into_iter().rev().collect();
    probs.push(pmf_mode);
    // extend upward
    let mut val = pmf_mode;
    let mut d = mode;
    while d < m {
        let next = val * (m - d) as f64 / (d + 1) as f64 * p / (1.0 - p);
        if next < cut {
            break;
        }
        probs.push(next);
        val = next;
        d += 1;
    }
    (dlo, probs)
}

/// Exact joint DP over `(count_y, count_x)` below each probe point.
/// `fail_below`: abort early once the retained mass can no longer reach it.
///
/// Mass concentrates on a product of binomial bells, so the sweep tracks
/// the bounding window of nonzero cells. `f` is row-major over the Y count
/// and the intermediate buffer is column-major, keeping both increment
/// passes on contiguous memory.
fn tuple_cdf_int(
    q_y: usize,
    q_x: usize,
    us: &[f64],
    v: i64,
    fail_below: Option<f64>,
    eps: f64,
) -> TupleProb {
    let ny = q_y + 1;
    let nx = q_x + 1;
    SCRATCH.with_borrow_mut(|(f, gt)| {
        if f.len() < ny * nx {
            f.resize(ny * nx, 0.0);
            gt.resize(ny * nx, 0.0);
        }
        f[0] = 1.0;
        let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (0usize, 0usize, 0usize, 0usize);
        let mut prev_u = 0.0f64;
        let mut violated = 0.0f64;

        for &u in us {
            let span = 1.0 - prev_u;
            let p_gap = if span > 0.0 {
                ((u - prev_u) / span).clamp(0.0, 1.0)
            } else {
                1.0
            };

            let pmf_y: Vec<(usize, Vec<f64>)> = (a_lo..=a_hi)
                .map(|a| binom_pmf(q_y - a, p_gap, eps))
                .collect();
            let pmf_x: Vec<(usize, Vec<f64>)> = (b_lo..=b_hi)
                .map(|b| binom_pmf(q_x - b, p_gap, eps))
                .collect();

            // Y increment: gt[b][a + d] += f[a][b] * pmf_y(q_y - a, d)
            let new_a_lo = (a_lo..=a_hi)
                .map(|a| a + pmf_y[a - a_lo].0)
                .min()
                .expect("nonempty window");
            let new_a_hi = (a_lo..=a_hi)
                .map(|a| a + pmf_y[a - a_lo].0 + pmf_y[a - a_lo].1.len() - 1)
                .max()
                .expect("nonempty window");
            for b in b_lo..=b_hi {
                for cell in gt[b * ny + new_a_lo..=b * ny + new_a_hi].iter_mut() {
                    *cell = 0.0;
                }
            }
            for a in a_lo..=a_hi {
                let (dlo, probs) = &pmf_y[a - a_lo];
                for b in b_lo..=b_hi {
                    let mass = f[a * nx + b];
                    if mass == 0.0 {
                        continue;
                    }
                    let dst = &mut gt[b * ny + a + dlo..b * ny + a + dlo + probs.len()];
                    for (cell, &pr) in dst.iter_mut().zip(probs) {
                        *cell += mass * pr;
                    }
                }
            }
            (a_lo, a_hi) = (new_a_lo, new_a_hi);

            // X increment: f[a][b + d] += gt[b][a] * pmf_x(q_x - b, d)
            let new_b_lo = (b_lo..=b_hi)
                .map(|b| b + pmf_x[b - b_lo].0)
                .min()
                .expect("nonempty window");
            let new_b_hi = (b_lo..=b_hi)
                .map(|b| b + pmf_x[b - b_lo].0 + pmf_x[b - b_lo].1.len() - 1)
                .max()
                .expect("nonempty window");
            for a in a_lo..=a_hi {
                for cell in f[a * nx + new_b_lo..=a * nx + new_b_hi].iter_mut() {
                    *cell = 0.0;
                }
            }
            for b in b_lo..=b_hi {
                let (dlo, probs) = &pmf_x[b - b_lo];
                for a in a_lo..=a_hi {
                    let mass = gt[b * ny + a];
                    if mass == 0.0 {
                        continue;
                    }
                    let dst = &mut f[a * nx + b + dlo..a * nx + b + dlo + probs.len()];
                    for (cell, &pr) in dst.iter_mut().zip(probs) {
                        *cell += mass * pr;
                    }
                }
            }
            (b_lo, b_hi) = (new_b_lo, new_b_hi);

            // constraint at this probe point; shrink the window to what's left
            let mut remaining = 0.0f64;
            let (mut na_lo, mut na_hi, mut nb_lo, mut nb_hi) = (ny, 0usize, nx, 0usize);
            for a in a_lo..=a_hi {
                for b in b_lo..=b_hi {
                    let cell = &mut f[a * nx + b];
                    if *cell == 0.0 {
                        continue;
                    }
                    if (a * q_x) as i64 - (b * q_y) as i64 > v {
                        violated += *cell;
                        *cell = 0.0;
                    } else {
                        remaining += *cell;
                        na_lo = na_lo.min(a);
                        na_hi = na_hi.max(a);
                        nb_lo = nb_lo.min(b);
                        nb_hi = nb_hi.max(b);
                    }
                }
            }
            prev_u = u;
            let lost_so_far = (1.0 - violated - remaining).max(0.0);
            if remaining == 0.0 {
                return TupleProb { p: 0.0, lost: lost_so_far };
            }
            if let Some(thr) = fail_below {
                // retained mass only shrinks from here on
                if remaining + lost_so_far < thr {
                    return TupleProb {
                        p: remaining,
                        lost: lost_so_far,
                    };
                }
            }
            (a_lo, a_hi, b_lo, b_hi) = (na_lo, na_hi, nb_lo, nb_hi);
        }
        let mut p = 0.0f64;
        for a in a_lo..=a_hi {
            for b in b_lo..=b_hi {
                p += f[a * nx + b];
            }
        }
        TupleProb {
            p,
            lost: (1.0 - violated - p).max(0.0),
        }
    })
}

fn equally_spaced(r: usize) -> Vec<f64> {
    (1..=r).map(|k| k as f64 / (r + 1) as f64).collect()
}

/// Decide whether the tuple keeps `P{max <= v} >= thr`, retrying exactly
/// when truncation leaves the comparison ambiguous.
fn tuple_passes(q_y: usize, q_x: usize, us: &[f64], v: i64, thr: f64) -> (bool, f64) {
    let out = tuple_cdf_int(q_y, q_x, us, v, Some(thr), PMF_EPS);
    if out.p >= thr {
        return (true, out.p);
    }
    if out.p + out.lost < thr {
        return (false, out.p);
    }
    let exact = tuple_cdf_int(q_y, q_x, us, v, None, 0.0);
    (exact.p >= thr, exact.p)
}

/// Smallest achievable value `v` with `P{max over tuple <= v} >= 1 - alpha`,
/// searched over the given support.
fn tuple_quantile_int(
    q_y: usize,
    q_x: usize,
    us: &[f64],
    support: &[i64],
    thr: f64,
) -> i64 {
    let mut lo = 0usize;
    let mut hi = support.len() - 1; // P at the top value is 1
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tuple_passes(q_y, q_x, us, support[mid], thr).0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    support[lo]
}

/// Refined critical value: smallest achievable statistic level that every
/// ordered `r`-tuple of probe points accepts with probability `1 - alpha`.
///
/// A level passes exactly when it is at least every tuple's own quantile,
/// so the search keeps a running maximum of tuple quantiles: most tuples
/// are dismissed with a single probability evaluation at the current
/// maximum, and only record-raising tuples pay for a quantile search. The
/// result always lies between the equally-spaced-tuple quantile (a valid
/// lower bound) and the default critical value.
pub fn refined_critical_value(
    q_y: usize,
    q_x: usize,
    alpha: f64,
    spec: &RefinedSpec,
) -> Result<RefinedCv> {
    check_alpha(alpha)?;
    spec.validate()?;
    let exact = ExactNull::new(q_y, q_x)?;
    let c_ub = exact.critical_value_int(alpha)?;
    let thr = 1.0 - alpha;
    let support: Vec<i64> = delta_support_int(q_y, q_x)
        .into_iter()
        .filter(|&v| v <= c_ub)
        .collect();
    let c_lb = tuple_quantile_int(q_y, q_x, &equally_spaced(spec.r), &support, thr);

    let to_cv = |v: i64, warning: bool| RefinedCv {
        value: delta_value(v, q_y, q_x),
        lower_bound: delta_value(c_lb, q_y, q_x),
        upper_bound: delta_value(c_ub, q_y, q_x),
        grid_warning: warning,
    };

    if c_lb >= c_ub {
        return Ok(to_cv(c_ub, false));
    }

    let grid: Vec<f64> = (1..=spec.grid_resolution)
        .map(|k| k as f64 / (spec.grid_resolution + 1) as f64)
        .collect();
    let spacing = 1.0 / (spec.grid_resolution + 1) as f64;
    let tuples: Vec<Vec<f64>> = combination_tuples(&grid, spec.r).collect();

    let mut best = c_lb;
    let mut argmax: Vec<f64> = equally_spaced(spec.r);
    for chunk in tuples.chunks(256) {
        let snapshot = best;
        let evals: Vec<bool> = chunk
            .par_iter()
            .map(|us| tuple_passes(q_y, q_x, us, snapshot, thr).0)
            .collect();
        for (us, ok) in chunk.iter().zip(evals) {
            if ok {
                continue; // quantile at or below the running maximum
            }
            if best > snapshot && tuple_passes(q_y, q_x, us, best, thr).0 {
                continue;
            }
            best = tuple_quantile_int(q_y, q_x, us, &support, thr);
            argmax = us.clone();
            if best >= c_ub {
                return Ok(to_cv(c_ub, false));
            }
        }
    }

    // local descent around the binding tuple can still raise the quantile
    let (value, warning) = refine_descent(
        q_y,
        q_x,
        argmax,
        best,
        c_ub,
        &support,
        thr,
        spacing,
        spec.refinement_iterations,
    );
    Ok(to_cv(value, warning))
}

/// Coordinate descent on the probe tuple, minimizing the acceptance
/// probability at the current level and raising the level whenever a tuple
/// drops below the target probability. Returns the final level and whether
/// a coordinate drifted beyond one grid cell (a coarse-grid symptom).
#[allow(clippy::too_many_arguments)]
fn refine_descent(
    q_y: usize,
    q_x: usize,
    start: Vec<f64>,
    mut level: i64,
    c_ub: i64,
    support: &[i64],
    thr: f64,
    spacing: f64,
    iterations: usize,
) -> (i64, bool) {
    let eps = 1e-9;
    let mut tuple = start.clone();
    let mut best_p = tuple_cdf_int(q_y, q_x, &tuple, level, None, PMF_EPS).p;
    let mut step = spacing;
    let mut max_drift = 0.0f64;
    for _ in 0..iterations {
        for k in 0..tuple.len() {
            for dir in [-1.0, 1.0] {
                let mut trial = tuple.clone();
                trial[k] += dir * step;
                let lo = if k == 0 { 0.0 } else { trial[k - 1] };
                let hi = if k + 1 == trial.len() { 1.0 } else { trial[k + 1] };
                if trial[k] <= lo + eps || trial[k] >= hi - eps {
                    continue;
                }
                let (ok, p) = tuple_passes(q_y, q_x, &trial, level, thr);
                if !ok {
                    level = tuple_quantile_int(q_y, q_x, &trial, support, thr);
                    max_drift = max_drift.max((trial[k] - start[k]).abs());
                    tuple = trial;
                    if level >= c_ub {
                        return (c_ub, max_drift > spacing + 1e-12);
                    }
                    best_p = tuple_cdf_int(q_y, q_x, &tuple, level, None, PMF_EPS).p;
                } else if p < best_p {
                    best_p = p;
                    max_drift = max_drift.max((trial[k] - start[k]).abs());
                    tuple = trial;
                }
            }
        }
        step /= 2.0;
    }
    (level, max_drift > spacing + 1e-12)
}

/// Iterator over ordered `r`-subsets of the grid.
fn combination_tuples(grid: &[f64], r: usize) -> CombinationTuples<'_> {
    CombinationTuples {
        grid,
        idx: (0..r).collect(),
        done: r > grid.len(),
    }
}

struct CombinationTuples<'a> {
    grid: &'a [f64],
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for CombinationTuples<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out: Vec<f64> = self.idx.iter().map(|&i| self.grid[i]).collect();
        // advance to the next ascending index vector
        let r = self.idx.len();
        let n = self.grid.len();
        let mut k = r;
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            if self.idx[k] < n - (r - k) {
                self.idx[k] += 1;
                for j in k + 1..r {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuple_cdf_binomial_examples() {
        // q_y = q_x = 2, single probe at 1/2: counts are independent
        // Binomial(2, 1/2); P{A <= B} = 0.6875
        let p = tuple_cdf(2, 2, &[0.5], 0.0).unwrap();
        assert!((p - 0.6875).abs() < 1e-12, "got {p}");
        let p = tuple_cdf(2, 2, &[0.5], 0.5).unwrap();
        assert!((p - 0.9375).abs() < 1e-12, "got {p}");
        assert_eq!(tuple_cdf(2, 2, &[0.5], 1.0).unwrap(), 1.0);
        assert_eq!(tuple_cdf(7, 3, &[0.2, 0.9], 2.0).unwrap(), 1.0);
    }

    #[test]
    fn tuple_cdf_rejects_bad_tuples() {
        assert!(tuple_cdf(2, 2, &[0.5, 0.5], 0.0).is_err());
        assert!(tuple_cdf(2, 2, &[0.7, 0.2], 0.0).is_err());
        assert!(tuple_cdf(2, 2, &[0.0], 0.0).is_err());
        assert!(tuple_cdf(2, 2, &[], 0.0).is_err());
    }

    #[test]
    fn tuple_cdf_matches_brute_force_momentum() {
        // brute force over the joint counts for two probe points
        let (q_y, q_x) = (3, 2);
        let us = [0.3, 0.8];
        let p2 = (0.8 - 0.3) / (1.0 - 0.3); // second-gap conditional probability
        for x in [-0.5f64, 0.0, 1.0 / 6.0, 0.5] {
            let v = (x * 6.0).round() as i64;
            let mut total = 0.0;
            let binom = |n: i64, k: i64, p: f64| -> f64 {
                let mut c = 1.0;
                for i in 1..=k {
                    c = c * (n - k + i) as f64 / i as f64;
                }
                c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
            };
            for a1 in 0..=3i64 {
                for a2 in a1..=3i64 {
                    for b1 in 0..=2i64 {
                        for b2 in b1..=2i64 {
                            if a1 * 2 - b1 * 3 > v || a2 * 2 - b2 * 3 > v {
                                continue;
                            }
                            let pa = binom(3, a1, 0.3) * binom(3 - a1, a2 - a1, p2);
                            let pb = binom(2, b1, 0.3) * binom(2 - b1, b2 - b1, p2);
                            total += pa * pb;
                        }
                    }
                }
            }
            let got = tuple_cdf(q_y, q_x, &us, x).unwrap();
            assert!((got - total).abs() < 1e-10, "x={x}: got {got}, want {total}");
        }
    }

    #[test]
    fn refined_2_2_r1() {
        let cv = refined_critical_value(2, 2, 0.1, &RefinedSpec::new(1)).unwrap();
        assert_eq!(cv.value, 0.5);
        assert_eq!(cv.upper_bound, 1.0);
        assert!(cv.lower_bound <= cv.value);
    }

    #[test]
    fn refined_never_exceeds_default() {
        for (q_y, q_x, r) in [(3, 3, 1), (4, 3, 2), (5, 5, 3)] {
            for alpha in [0.05, 0.1, 0.2] {
                let cv = refined_critical_value(q_y, q_x, alpha, &RefinedSpec::new(r)).unwrap();
                let def = ExactNull::new(q_y, q_x)
                    .unwrap()
                    .critical_value(alpha)
                    .unwrap();
                assert!(cv.value <= def, "({q_y},{q_x},r={r},a={alpha})");
                assert!(cv.lower_bound <= cv.value);
                assert_eq!(cv.upper_bound, def);
            }
        }
    }

    #[test]
    fn rich_tuple_set_recovers_default() {
        // with probe tuples as rich as the whole lattice the refinement
        // cannot improve on the default critical value
        let spec = RefinedSpec {
            r: 8,
            grid_resolution: 14,
            refinement_iterations: 2,
        };
        let cv = refined_critical_value(2, 2, 0.1, &spec).unwrap();
        let def = ExactNull::new(2, 2).unwrap().critical_value(0.1).unwrap();
        assert_eq!(cv.value, def);
    }

    #[test]
    fn combination_iterator_counts() {
        let grid: Vec<f64> = (1..=6).map(|k| k as f64 / 7.0).collect();
        assert_eq!(combination_tuples(&grid, 2).count(), 15);
        assert_eq!(combination_tuples(&grid, 6).count(), 1);
        let first = combination_tuples(&grid, 3).next().unwrap();
        assert_eq!(first, vec![1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0]);
    }
}
