//! Best n-term approximation in `b^α_{p,q}` norms, empirical rate fits, and a DeVore–Triebel
//! diagram exporter.

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::seq::{admissible_tuple, quasi_norm, BesovParams, CoeffSequence, QExp};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Indices sorted by decreasing weighted magnitude `2^{j(α+d[1/2−1/p])}|a|`; ties keep index order.
fn greedy_order(a: &CoeffSequence, target: &BesovParams) -> Vec<((u32, usize), f64)> {
    let mut v: Vec<((u32, usize), f64)> = a
        .iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(&k, c)| (k, target.level_weight(k.0) * c.norm()))
        .collect();
    v.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    v
}

fn remainder_norm(a: &CoeffSequence, order: &[((u32, usize), f64)], n: usize, target: &BesovParams) -> Result<f64> {
    let rest = CoeffSequence::from_entries(order.iter().skip(n).map(|&(k, _)| (k, a.get(k.0, k.1))));
    quasi_norm(&rest, target)
}

/// Keeps the `n` entries of largest weighted magnitude; returns them and the target quasi-norm
/// of what is left. This is the exact optimum when `p = q`.
pub fn greedy_nterm(a: &CoeffSequence, target: &BesovParams, n: usize) -> Result<(Vec<(u32, usize)>, f64)> {
    target.validate()?;
    let order = greedy_order(a, target);
    let err = remainder_norm(a, &order, n, target)?;
    Ok((order.into_iter().take(n).map(|(k, _)| k).collect(), err))
}

#[derive(Debug, Clone)]
pub struct ErrorCurve {
    /// `(n, error)`, `n` strictly increasing, errors nonincreasing.
    pub points: Vec<(usize, f64)>,
    pub target: BesovParams,
    pub source: String,
    /// Support size of the approximated sequence.
    pub support: usize,
    /// Set when `p ≠ q`: greedy errors only bound `σ_n` from above.
    pub upper_bound: bool,
}

/// Greedy errors for every `n` in `schedule` (sorted and deduplicated first).
pub fn error_curve(a: &CoeffSequence, target: &BesovParams, schedule: &[usize], source: &str) -> Result<ErrorCurve> {
    target.validate()?;
    let order = greedy_order(a, target);
    let mut ns = schedule.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let points = ns
        .par_iter()
        .map(|&n| Ok((n, remainder_norm(a, &order, n, target)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurve {
        points,
        target: *target,
        source: source.to_string(),
        support: order.len(),
        upper_bound: target.q.as_f64() != target.p,
    })
}

/// `1 ≤ n ≤ max_n` spaced by `2^{1/per_octave}`, rounded and deduplicated.
pub fn geometric_schedule(max_n: usize, per_octave: usize) -> Vec<usize> {
    let mut out = vec![];
    let mut k = 0;
    loop {
        let n = 2f64.powf(k as f64 / per_octave as f64).round() as usize;
        if n > max_n {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_min: usize,
    pub n_max: usize,
}

/// Middle two quartiles of `log n` over `[1, support]`.
pub fn default_window(curve: &ErrorCurve) -> (usize, usize) {
    let top = (curve.support.max(1) as f64).ln();
    (((0.25 * top).exp() - 1e-9).ceil() as usize, ((0.75 * top).exp() + 1e-9).floor() as usize)
}

/// Log-log least squares of the curve's positive errors with `n` in `window` (inclusive).
pub fn rate_fit(curve: &ErrorCurve, window: Option<(usize, usize)>) -> Result<RateFit> {
    let (n_min, n_max) = window.unwrap_or_else(|| default_window(curve));
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|&&(n, e)| n >= n_min.max(1) && n <= n_max && e > 0.0)
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Empty(format!("fewer than two positive points in window [{n_min}, {n_max}]")));
    }
    let f = linear_fit(&pts);
    Ok(RateFit {
        slope: f.slope,
        intercept: f.intercept,
        r_squared: f.r_squared,
        n_min,
        n_max,
    })
}

/// Predicted exponent of `σ_n(b^{α+γ}_{p0,q0} → b^α_{p1,q1})` as a slope, or an error when the
/// rate law does not apply.
pub fn predicted_slope(source: &BesovParams, target: &BesovParams) -> Result<f64> {
    if source.d != target.d {
        return Err(Error::DomainMismatch("source and target dimensions differ".into()));
    }
    let d = source.d as f64;
    let gamma = source.alpha - target.alpha;
    let thr = d * (1.0 / source.p - 1.0 / target.p).max(0.0);
    if gamma > thr + 1e-12 {
        Ok(-gamma / d)
    } else if (gamma - thr).abs() <= 1e-12 && source.q.recip() >= target.q.recip() {
        Ok(-(gamma / d).min(source.q.recip() - target.q.recip()))
    } else {
        Err(Error::Precondition(format!(
            "γ = {gamma} is below d·max(0, 1/p0 − 1/p1) = {thr} or q0 > q1 at equality; no embedding"
        )))
    }
}

/// Random sequence with every index of levels `0..=j_max` filled: magnitudes
/// `2^{-j(α_target+γ+d/2)}` times a uniform factor in `[1/2, 1]`, random phases, scaled to unit
/// source norm. Each level has equal source weight, and the sorted target-weighted magnitudes fall
/// like `k^{-(γ/d + 1/p_1)}`.
pub fn spread_profile(source: &BesovParams, target: &BesovParams, j_max: u32, seed: u64) -> Result<CoeffSequence> {
    let d = source.d;
    let gamma = source.alpha - target.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = CoeffSequence::with_grid_ref("synthetic");
    for j in 0..=j_max {
        let base = 2f64.powf(-(j as f64) * (target.alpha + gamma + d as f64 / 2.0));
        for xi in 0..1usize << (d as u32 * j) {
            let mag = base * rng.random_range(0.5..=1.0);
            let ph = rng.random::<f64>() * std::f64::consts::TAU;
            a.set(j, xi, Complex64::from_polar(mag, ph));
        }
    }
    let nrm = quasi_norm(&a, source)?;
    Ok(a.scaled(Complex64::new(1.0 / nrm, 0.0)))
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub gamma: f64,
    pub predicted: f64,
    pub slopes: Vec<f64>,
    pub mean_slope: f64,
    pub r_squared_min: f64,
    pub upper_bound: bool,
}

/// Fits greedy error curves of `trials` spread-profile samples and compares the mean slope with
/// the predicted rate.
pub fn rate_experiment(source: &BesovParams, target: &BesovParams, j_max: u32, trials: usize, seed: u64) -> Result<RateReport> {
    source.validate()?;
    target.validate()?;
    if !admissible_tuple(source.alpha, source.p, source.q.as_f64(), source.d, true)
        || !admissible_tuple(target.alpha, target.p, target.q.as_f64(), target.d, true)
    {
        return Err(Error::NotAdmissible("source and target tuples must be admissible".into()));
    }
    let predicted = predicted_slope(source, target)?;
    if trials == 0 {
        return Err(Error::Empty("need at least one trial".into()));
    }
    let fits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let a = spread_profile(source, target, j_max, seed.wrapping_add(t))?;
            let curve = error_curve(&a, target, &geometric_schedule(a.len(), 8), "spread")?;
            rate_fit(&curve, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    Ok(RateReport {
        gamma: source.alpha - target.alpha,
        predicted,
        mean_slope: slopes.iter().sum::<f64>() / slopes.len() as f64,
        r_squared_min: fits.iter().map(|f| f.r_squared).fold(1.0, f64::min),
        slopes,
        upper_bound: target.q.as_f64() != target.p,
    })
}

const DIAGRAM_HEADER: &str = "kind,d,inv_p,alpha,q,admissible,on_adaptivity_line,l2_anchor";

/// DeVore–Triebel diagram as CSV: one `point` row per parameter tuple, and per dimension present
/// the adaptivity line `α = d(1/p − 1/2)` and the admissibility boundary `α = d·max(1/p − 1/2, 0)`
/// sampled at `samples` values of `1/p` in `[0, max(1, largest 1/p)]`.
pub fn diagram_export(params: &[BesovParams], samples: usize) -> String {
    let mut out = String::from(DIAGRAM_HEADER);
    out.push('\n');
    let f = crate::report::fmt_f64;
    for prm in params {
        let inv_p = 1.0 / prm.p;
        let d = prm.d as f64;
        let on_line = (prm.alpha - d * (inv_p - 0.5)).abs() <= 1e-12;
        let anchor = (inv_p - 0.5).abs() <= 1e-12 && prm.alpha.abs() <= 1e-12;
        let _ = writeln!(
            out,
            "point,{},{},{},{},{},{},{}",
            prm.d,
            f(inv_p),
            f(prm.alpha),
            match prm.q {
                QExp::Inf => "inf".to_string(),
                QExp::Finite(q) => f(q),
            },
            admissible_tuple(prm.alpha, prm.p, prm.q.as_f64(), prm.d, true),
            on_line,
            anchor
        );
    }
    let mut dims: Vec<usize> = params.iter().map(|p| p.d).collect();
    dims.sort_unstable();
    dims.dedup();
    let top = params.iter().map(|p| 1.0 / p.p).fold(1.0, f64::max);
    for d in dims {
        let df = d as f64;
        for i in 0..samples {
            let inv_p = top * i as f64 / (samples.max(2) - 1) as f64;
            let line = df * (inv_p - 0.5);
            if line >= 0.0 {
                let _ = writeln!(out, "adaptivity,{d},{},{},,,true,", f(inv_p), f(line));
            }
            let _ = writeln!(out, "admissibility,{d},{},{},,,,", f(inv_p), f(line.max(0.0)));
        }
    }
    out
}
