//! Structural checks: normalization, Riesz bounds, vanishing moments, support size and coefficient decay.

use super::masks::{binom, CellMoments};
use super::{analyze, l2_norm, synthesize, Kind, Side, WaveletSystem};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::geometry::PatchFunction;
use crate::quad::UnitRule;
use crate::seq::CoeffSequence;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::SQRT_2;

const MOMENT_TOL: f64 = 1e-8;
const SUPPORT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub primal_min: f64,
    pub primal_max: f64,
    pub dual_min: f64,
    pub dual_max: f64,
    /// `(level, tag)` of the first norm outside `[1/2, 2]`.
    pub witness: Option<(u32, u32)>,
    pub ok: bool,
}

/// Exact periodized L2 norms of every primal and dual function type up to level `j_max`.
pub fn normalization_check(sys: &WaveletSystem, j_max: u32) -> Result<NormalizationReport> {
    sys.check_level(j_max)?;
    let uni = &sys.univariate;
    let mut rep = NormalizationReport {
        primal_min: f64::INFINITY,
        primal_max: 0.0,
        dual_min: f64::INFINITY,
        dual_max: 0.0,
        witness: None,
        ok: true,
    };
    for j in 0..=j_max {
        for tag in WaveletSystem::first_tag(j)..(1u32 << sys.d()) {
            let w = sys.weight(j, tag);
            let (mut p, mut q) = (w, 1.0 / w);
            for a in 0..sys.d() {
                let kind = sys.axis_kind(tag, a);
                p *= uni.periodized_norm(Side::Primal, kind, j);
                q *= uni.periodized_norm(Side::Dual, kind, j);
            }
            rep.primal_min = rep.primal_min.min(p);
            rep.primal_max = rep.primal_max.max(p);
            rep.dual_min = rep.dual_min.min(q);
            rep.dual_max = rep.dual_max.max(q);
            if rep.witness.is_none() && !((0.5..=2.0).contains(&p) && (0.5..=2.0).contains(&q)) {
                rep.witness = Some((j, tag));
            }
        }
    }
    rep.ok = rep.witness.is_none();
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct RieszReport {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub trials: usize,
    pub ok: bool,
}

/// `‖Σ a ψ‖_{L2} / ‖a‖_{ℓ2}` over random dense, single-level and single-entry coefficient vectors.
pub fn riesz_check(sys: &WaveletSystem, j_max: u32, trials: usize, seed: u64) -> Result<RieszReport> {
    sys.check_level(j_max)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for t in 0..trials {
        let mut a = CoeffSequence::with_grid_ref(&sys.label);
        let draw = |rng: &mut ChaCha8Rng| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        match t % 3 {
            0 => {
                for j in 0..=j_max {
                    for i in 0..sys.level_len(j) {
                        a.set(j, i, draw(&mut rng));
                    }
                }
            }
            1 => {
                let j = rng.random_range(0..=j_max);
                for i in 0..sys.level_len(j) {
                    a.set(j, i, draw(&mut rng));
                }
            }
            _ => {
                let j = rng.random_range(0..=j_max);
                let i = rng.random_range(0..sys.level_len(j));
                a.set(j, i, draw(&mut rng));
            }
        }
        let l2 = a.lr_norm(2.0);
        if l2 == 0.0 {
            continue;
        }
        let r = l2_norm(&a, sys, j_max)? / l2;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(RieszReport {
        ratio_min: lo,
        ratio_max: hi,
        trials,
        ok: hi / lo < 4.0,
    })
}

#[derive(Debug, Clone)]
pub struct MomentsReport {
    /// Largest unperiodized primal moment of degree `< Dt` over all levels, shifts and tags.
    pub line_primal_max: f64,
    /// Largest unperiodized dual moment of degree `< D`.
    pub line_dual_max: f64,
    /// Largest `∫_{[0,1]^d} ψ p` over non-wrapping primal functions, every patch.
    pub patch_primal_max: f64,
    /// Largest analysis coefficient of a monomial at a non-wrapping dual function, every patch.
    pub patch_dual_max: f64,
    /// `|∫ ψ x^{Dt}|` and `|∫ ψ̃ x^D|` for the mother functions.
    pub first_nonvanishing: (f64, f64),
    pub checked: usize,
    pub ok: bool,
}

/// `∫ φ_{L,m}(x) x^r dx` for the dual refinable function via its cell moments.
fn dual_scaling_moment(cells: &CellMoments, level: u32, m: i64, r: usize) -> f64 {
    let n = 2f64.powi(level as i32);
    let s: f64 = (0..cells.n_cells())
        .map(|ci| {
            let base = (cells.lo + ci as i64 + m) as f64 / n;
            (0..=r)
                .map(|i| binom(r, i) * base.powi((r - i) as i32) * n.powi(-(i as i32)) * cells.nu[ci][i])
                .sum::<f64>()
        })
        .sum();
    s / n.sqrt()
}

/// `∫ f_{j,k}(x) x^r dx` on the line for the 1D factor of the given side and kind.
fn line_moment(sys: &WaveletSystem, side: Side, kind: Kind, j: u32, k: i64, r: usize, rule: &UnitRule) -> f64 {
    let uni = &sys.univariate;
    match side {
        Side::Primal => {
            let (lo, hi) = uni.support(Side::Primal, kind);
            let scale = 0.5f64.powi(j as i32);
            let mut total = 0.0;
            let mut y0 = lo;
            while y0 < hi - 1e-12 {
                for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                    let y = y0 + 0.5 * t;
                    let f = match kind {
                        Kind::Scaling => uni.phi(y),
                        Kind::Wavelet => uni.psi(y),
                    };
                    total += 0.5 * w * f * ((y + k as f64) * scale).powi(r as i32);
                }
                y0 += 0.5;
            }
            total * scale.sqrt()
        }
        Side::Dual => match kind {
            Kind::Scaling => dual_scaling_moment(&uni.dual_cells, j, k, r),
            Kind::Wavelet => uni
                .dual_wavelet
                .iter()
                .map(|(n, b)| SQRT_2 * b * dual_scaling_moment(&uni.dual_cells, j + 1, 2 * k + n, r))
                .sum(),
        },
    }
}

/// Multi-indices `r ∈ N^d` with `|r| < bound`.
fn multi_indices(d: usize, bound: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                let used: usize = v.iter().sum();
                (0..bound.saturating_sub(used)).map(move |r| {
                    let mut w = v.clone();
                    w.push(r);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().sum::<usize>() < bound);
    out
}

/// Per-axis unperiodized support `[lo, hi]` in patch coordinates.
fn support_box(sys: &WaveletSystem, side: Side, j: u32, tag: u32, kflat: usize) -> Vec<(f64, f64)> {
    let scale = 0.5f64.powi(j as i32);
    sys.shift(j, kflat)
        .into_iter()
        .enumerate()
        .map(|(a, k)| {
            let (lo, hi) = sys.univariate.support(side, sys.axis_kind(tag, a));
            ((k as f64 + lo) * scale, (k as f64 + hi) * scale)
        })
        .collect()
}

fn inside_unit_cube(bx: &[(f64, f64)]) -> bool {
    bx.iter().all(|&(lo, hi)| lo >= -1e-12 && hi <= 1.0 + 1e-12)
}

/// Vanishing moments on the line and, for functions whose support stays inside a patch, through the transforms.
pub fn moments_check(sys: &WaveletSystem, j_max: u32) -> Result<MomentsReport> {
    sys.check_level(j_max)?;
    let uni = sys.univariate.clone();
    let d = sys.d();
    let rule = UnitRule::new(20);
    let mut rep = MomentsReport {
        line_primal_max: 0.0,
        line_dual_max: 0.0,
        patch_primal_max: 0.0,
        patch_dual_max: 0.0,
        first_nonvanishing: (0.0, 0.0),
        checked: 0,
        ok: false,
    };

    for (side, bound) in [(Side::Primal, uni.dual_order), (Side::Dual, uni.order)] {
        let degrees = multi_indices(d, bound);
        let mut worst: f64 = 0.0;
        for j in 0..=j_max {
            let side_len = 1i64 << j;
            // Tables of factor moments indexed [kind][k][r].
            let table: Vec<Vec<Vec<f64>>> = [Kind::Scaling, Kind::Wavelet]
                .iter()
                .map(|&kind| {
                    (0..side_len)
                        .map(|k| (0..bound).map(|r| line_moment(sys, side, kind, j, k, r, &rule)).collect())
                        .collect()
                })
                .collect();
            for tag in 1..(1u32 << d) {
                let w = match side {
                    Side::Primal => sys.weight(j, tag),
                    Side::Dual => 1.0 / sys.weight(j, tag),
                };
                for kflat in 0..1usize << (d * j as usize) {
                    let ks = sys.shift(j, kflat);
                    for r in &degrees {
                        let v: f64 = (0..d)
                            .map(|a| {
                                let kind = sys.axis_kind(tag, a) as usize;
                                table[kind][ks[a]][r[a]]
                            })
                            .product();
                        worst = worst.max((w * v).abs());
                        rep.checked += 1;
                    }
                }
            }
        }
        match side {
            Side::Primal => rep.line_primal_max = worst,
            Side::Dual => rep.line_dual_max = worst,
        }
    }
    rep.first_nonvanishing = (
        line_moment(sys, Side::Primal, Kind::Wavelet, 0, 0, uni.dual_order, &rule).abs(),
        line_moment(sys, Side::Dual, Kind::Wavelet, 0, 0, uni.order, &rule).abs(),
    );

    // Dual side through analysis: monomials of degree < D on every patch.
    for r in multi_indices(d, uni.order) {
        let rr = r.clone();
        let p = PatchFunction::real(d, sys.n_patches(), move |_, x| x.iter().zip(&rr).map(|(v, &e)| v.powi(e as i32)).product());
        let a = analyze(&p, sys, j_max)?;
        for j in 0..=j_max {
            for idx in 0..sys.level_len(j) {
                let (_, tag, k) = sys.decode(j, idx)?;
                if tag == 0 || !inside_unit_cube(&support_box(sys, Side::Dual, j, tag, k)) {
                    continue;
                }
                rep.patch_dual_max = rep.patch_dual_max.max(a.get(j, idx).norm());
                rep.checked += 1;
            }
        }
    }

    // Primal side through synthesis: composite quadrature over the support of sampled functions.
    let degrees = multi_indices(d, uni.dual_order);
    let fine = 1usize << (j_max + 1);
    let qrule = UnitRule::new(8);
    for j in 0..=j_max {
        let mut candidates = Vec::new();
        for idx in 0..sys.level_len(j) {
            let (p, tag, k) = sys.decode(j, idx)?;
            let bx = support_box(sys, Side::Primal, j, tag, k);
            if tag != 0 && inside_unit_cube(&bx) {
                candidates.push((idx, p, bx));
            }
        }
        let step = (candidates.len() / 48).max(1);
        for (idx, p, bx) in candidates.into_iter().step_by(step) {
            let f = synthesize(&CoeffSequence::from_entries([((j, idx), Complex64::new(1.0, 0.0))]), sys, j_max)?;
            let ranges: Vec<(usize, usize)> = bx
                .iter()
                .map(|&(lo, hi)| (((lo * fine as f64).round()) as usize, ((hi * fine as f64).round()) as usize))
                .collect();
            let mut sums = vec![0.0; degrees.len()];
            let mut cell = ranges.iter().map(|r| r.0).collect::<Vec<_>>();
            loop {
                for (x, w) in qrule.tensor(d) {
                    let pt: Vec<f64> = x.iter().zip(&cell).map(|(t, &c)| (c as f64 + t) / fine as f64).collect();
                    let v = f.eval(p, &pt).re * w / (fine as f64).powi(d as i32);
                    for (s, r) in sums.iter_mut().zip(&degrees) {
                        *s += v * pt.iter().zip(r).map(|(y, &e)| y.powi(e as i32)).product::<f64>();
                    }
                }
                let mut a = d;
                let mut done = true;
                while a > 0 {
                    a -= 1;
                    cell[a] += 1;
                    if cell[a] < ranges[a].1 {
                        done = false;
                        break;
                    }
                    cell[a] = ranges[a].0;
                }
                if done {
                    break;
                }
            }
            for s in sums {
                rep.patch_primal_max = rep.patch_primal_max.max(s.abs());
                rep.checked += 1;
            }
        }
    }

    rep.ok = rep.line_primal_max < MOMENT_TOL
        && rep.line_dual_max < MOMENT_TOL
        && rep.patch_primal_max < MOMENT_TOL
        && rep.patch_dual_max < MOMENT_TOL;
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct SupportReport {
    /// `(level, min, max)` of `diam(supp)·2^j` over primal and dual functions.
    pub per_level: Vec<(u32, f64, f64)>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub anchors_checked: usize,
    pub anchors_ok: bool,
    pub ok: bool,
}

/// Numerical support of the 1D factor in units of `2^{-j}`, from half-cell scans.
fn factor_support(sys: &WaveletSystem, side: Side, kind: Kind) -> (f64, f64) {
    let uni = &sys.univariate;
    let (lo, hi) = uni.support(side, kind);
    let rule = UnitRule::new(8);
    let cells: Vec<f64> = {
        let mut v = Vec::new();
        let mut y = lo;
        while y < hi - 1e-12 {
            v.push(y);
            y += 0.5;
        }
        v
    };
    let size: Vec<f64> = match side {
        Side::Primal => cells
            .iter()
            .map(|&y0| {
                rule.nodes
                    .iter()
                    .map(|t| {
                        let y = y0 + 0.5 * t;
                        match kind {
                            Kind::Scaling => uni.phi(y),
                            Kind::Wavelet => uni.psi(y),
                        }
                        .abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect(),
        Side::Dual => cells
            .iter()
            .map(|&y0| {
                // Moments of f on [y0, y0 + 1/2] in terms of half-scale dual cell moments.
                let c = (2.0 * y0).round() as i64;
                (0..=uni.dual_cells.degree)
                    .map(|r| match kind {
                        Kind::Scaling => uni
                            .dual
                            .iter()
                            .map(|(n, a)| 2.0 * a * uni.dual_cells.get(c - n, r))
                            .sum::<f64>()
                            .abs(),
                        Kind::Wavelet => uni
                            .dual_wavelet
                            .iter()
                            .map(|(n, b)| 2.0 * b * uni.dual_cells.get(c - n, r))
                            .sum::<f64>()
                            .abs(),
                    })
                    .fold(0.0, f64::max)
            })
            .collect(),
    };
    let top = size.iter().cloned().fold(0.0, f64::max);
    let first = size.iter().position(|&s| s > SUPPORT_THRESHOLD * top).unwrap_or(0);
    let last = size.iter().rposition(|&s| s > SUPPORT_THRESHOLD * top).unwrap_or(0);
    (cells[first], cells[last] + 0.5)
}

/// Diameters of numerical supports in patch coordinates and anchor containment, for levels `≤ j_max`.
pub fn support_check(sys: &WaveletSystem, j_max: u32) -> Result<SupportReport> {
    sys.check_level(j_max)?;
    let d = sys.d();
    let mut supports = [[(0.0, 0.0); 2]; 2];
    for (si, side) in [Side::Primal, Side::Dual].into_iter().enumerate() {
        for (ki, kind) in [Kind::Scaling, Kind::Wavelet].into_iter().enumerate() {
            supports[si][ki] = factor_support(sys, side, kind);
        }
    }
    let mut rep = SupportReport {
        per_level: Vec::new(),
        ratio_min: f64::INFINITY,
        ratio_max: 0.0,
        anchors_checked: 0,
        anchors_ok: true,
        ok: false,
    };
    for j in 0..=j_max {
        let scale = 0.5f64.powi(j as i32);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for tag in WaveletSystem::first_tag(j)..(1u32 << d) {
            for (si, _) in [Side::Primal, Side::Dual].iter().enumerate() {
                let diam = (0..d)
                    .map(|a| {
                        let (s0, s1) = supports[si][sys.axis_kind(tag, a) as usize];
                        ((s1 - s0) * scale).min(1.0).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                lo = lo.min(diam / scale);
                hi = hi.max(diam / scale);
            }
            for k in 0..1usize << (d * j as usize) {
                let anchor = sys.anchor_local(j, tag, k);
                let ks = sys.shift(j, k);
                for a in 0..d {
                    let (s0, s1) = supports[0][sys.axis_kind(tag, a) as usize];
                    let width = (s1 - s0) * scale;
                    let start = (ks[a] as f64 + s0) * scale;
                    let offset = (anchor[a] - start).rem_euclid(1.0);
                    if width < 1.0 && offset > width + 1e-12 {
                        rep.anchors_ok = false;
                    }
                }
                rep.anchors_checked += 1;
            }
        }
        rep.ratio_min = rep.ratio_min.min(lo);
        rep.ratio_max = rep.ratio_max.max(hi);
        rep.per_level.push((j, lo, hi));
    }
    rep.ok = rep.anchors_ok && rep.ratio_min >= 1.0 - 1e-12;
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `(level, max |⟨f, ψ̃_{j,ξ}⟩|)` for `j ≥ 1`.
    pub per_level: Vec<(u32, f64)>,
    /// Index attaining the level maximum.
    pub witnesses: Vec<(u32, usize)>,
    /// Fitted decay exponent; infinite when all wavelet coefficients vanish.
    pub rho: f64,
    pub s: f64,
    pub ok: bool,
}

/// Coefficients below this are treated as exact zeros in the decay fit.
pub const DECAY_FLOOR: f64 = 1e-13;

/// Fits `max_ξ |⟨f, ψ̃_{j,ξ}⟩| ≈ C 2^{-jρ}` over `1 ≤ j ≤ j_max`.
pub fn coefficient_decay_check(sys: &WaveletSystem, f: &PatchFunction, s: f64, j_max: u32) -> Result<DecayReport> {
    let d = sys.d() as f64;
    if !(s > d / 2.0 && s <= sys.univariate.order as f64) {
        return Err(Error::Precondition(format!(
            "smoothness {s} outside (d/2, D] = ({}, {}]",
            d / 2.0,
            sys.univariate.order
        )));
    }
    if j_max < 2 {
        return Err(Error::Precondition("decay fit needs at least two levels".into()));
    }
    let a = analyze(f, sys, j_max)?;
    let mut per_level = Vec::new();
    let mut witnesses = Vec::new();
    for j in 1..=j_max {
        let (mut best, mut arg) = (0.0, 0usize);
        for i in 0..sys.level_len(j) {
            let v = a.get(j, i).norm();
            if v > best {
                best = v;
                arg = i;
            }
        }
        per_level.push((j, best));
        witnesses.push((j, arg));
    }
    let pts: Vec<(f64, f64)> = per_level
        .iter()
        .filter(|(_, m)| *m > DECAY_FLOOR)
        .map(|&(j, m)| (j as f64, m.log2()))
        .collect();
    let rho = if pts.len() < 2 {
        f64::INFINITY
    } else {
        -linear_fit(&pts).slope
    };
    Ok(DecayReport {
        per_level,
        witnesses,
        rho,
        s,
        ok: rho >= s - 0.25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BASES: [&str; 4] = ["haar", "spline:D=2,Dt=2", "spline:D=2,Dt=4", "spline:D=3,Dt=3"];

    #[test]
    fn normalization_in_one_dimension() {
        for b in BASES {
            let sys = WaveletSystem::from_names(b, "interval", 6).unwrap();
            let rep = normalization_check(&sys, 6).unwrap();
            assert!(rep.ok, "{b}: {rep:?}");
            assert_abs_diff_eq!(rep.primal_min, rep.dual_min, epsilon = 1e-12);
        }
        let haar = normalization_check(&WaveletSystem::from_names("haar", "square2", 3).unwrap(), 3).unwrap();
        assert_abs_diff_eq!(haar.primal_min, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(haar.primal_max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cubic_pair_in_two_dimensions_exceeds_normalization_band() {
        let sys = WaveletSystem::from_names("spline:D=3,Dt=3", "square2", 4).unwrap();
        let rep = normalization_check(&sys, 4).unwrap();
        assert!(!rep.ok);
        assert!(rep.primal_max > 2.0);
    }

    #[test]
    fn haar_riesz_is_isometric() {
        let sys = WaveletSystem::from_names("haar", "square2", 3).unwrap();
        let rep = riesz_check(&sys, 3, 9, 1).unwrap();
        assert_abs_diff_eq!(rep.ratio_min, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.ratio_max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn riesz_bounds_are_stable() {
        for b in BASES {
            let sys = WaveletSystem::from_names(b, "interval", 6).unwrap();
            let r4 = riesz_check(&sys, 4, 30, 2).unwrap();
            let r6 = riesz_check(&sys, 6, 30, 2).unwrap();
            assert!(r4.ok && r6.ok, "{b}: {r4:?} {r6:?}");
        }
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(1, 3), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices(2, 4).len(), 10);
    }

    #[test]
    fn moments_vanish() {
        for b in BASES {
            let sys = WaveletSystem::from_names(b, "interval", 4).unwrap();
            let rep = moments_check(&sys, 4).unwrap();
            assert!(rep.ok, "{b}: {rep:?}");
            assert!(rep.first_nonvanishing.0 > 1e-6 && rep.first_nonvanishing.1 > 1e-6, "{b}: {rep:?}");
        }
        let sys = WaveletSystem::from_names("spline:D=2,Dt=2", "square2", 3).unwrap();
        assert!(moments_check(&sys, 3).unwrap().ok);
    }

    #[test]
    fn dual_scaling_moments_match_recursion() {
        let sys = WaveletSystem::from_names("spline:D=2,Dt=4", "interval", 2).unwrap();
        let m = super::super::masks::moments_by_recursion(&sys.univariate.dual, 4);
        for (r, mr) in m.iter().enumerate() {
            assert_abs_diff_eq!(dual_scaling_moment(&sys.univariate.dual_cells, 0, 0, r), *mr, epsilon = 1e-12);
        }
    }

    #[test]
    fn support_diameters() {
        let haar = support_check(&WaveletSystem::from_names("haar", "interval", 5).unwrap(), 5).unwrap();
        for &(_, lo, hi) in &haar.per_level {
            assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
        }
        let lin = WaveletSystem::from_names("spline:D=2,Dt=2", "interval", 5).unwrap();
        let (lo, hi) = factor_support(&lin, Side::Primal, Kind::Wavelet);
        assert_abs_diff_eq!(hi - lo, 3.0, epsilon = 1e-12);
        let rep = support_check(&lin, 5).unwrap();
        assert!(rep.ok && rep.anchors_ok);
        for b in BASES {
            let rep = support_check(&WaveletSystem::from_names(b, "square2", 3).unwrap(), 3).unwrap();
            assert!(rep.ok, "{b}: {rep:?}");
            assert!(rep.ratio_max < 16.0);
        }
    }

    #[test]
    fn decay_of_constant_is_infinite() {
        let sys = WaveletSystem::from_names("haar", "interval", 5).unwrap();
        let rep = coefficient_decay_check(&sys, &PatchFunction::constant(1, 1, Complex64::new(1.0, 0.0)), 1.0, 5).unwrap();
        assert!(rep.rho.is_infinite() && rep.ok);
    }

    #[test]
    fn haar_decay_of_sine() {
        let sys = WaveletSystem::from_names("haar", "interval", 8).unwrap();
        let f = PatchFunction::real(1, 1, |_, x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let rep = coefficient_decay_check(&sys, &f, 1.0, 8).unwrap();
        assert!(rep.ok);
        assert!((rep.rho - 1.5).abs() < 0.1, "{rep:?}");
    }

    #[test]
    fn decay_precondition() {
        let sys = WaveletSystem::from_names("haar", "interval", 5).unwrap();
        let f = PatchFunction::zero(1, 1);
        assert!(coefficient_decay_check(&sys, &f, 0.4, 5).is_err());
        assert!(coefficient_decay_check(&sys, &f, 1.5, 5).is_err());
    }

    #[test]
    fn kink_only_affects_wavelets_meeting_it() {
        // |x - 1/2| is linear except at the dyadic points 1/2 and, periodically, 0; the C¹ primal cannot absorb it.
        let sys = WaveletSystem::from_names("spline:D=3,Dt=3", "interval", 8).unwrap();
        let f = PatchFunction::real(1, 1, |_, x| (x[0] - 0.5).abs());
        let a = analyze(&f, &sys, 8).unwrap();
        let meets = |j: u32, idx: usize| {
            let (_, tag, k) = sys.decode(j, idx).unwrap();
            let (lo, hi) = support_box(&sys, Side::Dual, j, tag, k)[0];
            lo < 0.0 || hi > 1.0 || (lo < 0.5 && 0.5 < hi)
        };
        let rep = coefficient_decay_check(&sys, &f, 1.0, 8).unwrap();
        for j in 4..=8u32 {
            let (mut near, mut away) = (0.0f64, 0.0f64);
            for idx in 0..sys.level_len(j) {
                let v = a.get(j, idx).norm();
                if meets(j, idx) {
                    near = near.max(v);
                } else {
                    away = away.max(v);
                }
            }
            assert!(away < 1e-12 && near > 1e-6, "level {j}: near {near:e}, away {away:e}");
            let (wj, widx) = rep.witnesses[j as usize - 1];
            assert!(wj == j && meets(j, widx));
        }
        assert!((rep.rho - 1.5).abs() < 0.1, "{rep:?}");
    }
}
