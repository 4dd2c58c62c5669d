//! Periodized biorthogonal spline wavelets on `[0,1]^d`, lifted patchwise to a manifold.
//!
//! Level 0 carries the scaling function (tag 0) and the `2^d - 1` mixed wavelets at shift 0.
//! Level `j ≥ 1` carries tags `1..2^d` with shifts `k ∈ [0, 2^j)^d`. Bit `d-1-i` of a tag
//! selects the wavelet factor along axis `i`.

pub mod checks;
pub mod masks;
pub(crate) mod transform;

pub use checks::{
    coefficient_decay_check, moments_check, normalization_check, riesz_check, support_check, DecayReport, MomentsReport,
    NormalizationReport, RieszReport, SupportReport,
};
pub use masks::{Kind, Mask, Side, UnivariateSystem};

use crate::error::{Error, Result};
use crate::geometry::{builtin_manifold, Decomposition, PatchFunction};
use crate::grid::{stretch_bounds, Constants, Domain, IndexPoint, MultiscaleGrid};
use crate::quad::UnitRule;
use crate::seq::CoeffSequence;
use masks::{bspline, CellMoments, PROJ_DEGREE};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use transform::{forward, inverse, Arr, Pyramid};

/// Gauss points per axis and cell used when projecting onto local polynomials.
const PROJ_POINTS: usize = 6;

/// Parsed `spline:D=..,Dt=..[,mode=periodic]` or `haar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub order: usize,
    pub dual_order: usize,
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("haar") {
            return Ok(Self { order: 1, dual_order: 1 });
        }
        let body = s
            .strip_prefix("spline:")
            .ok_or_else(|| Error::Parse(format!("basis `{s}` must start with `spline:`")))?;
        let (mut order, mut dual_order) = (None, None);
        for kv in body.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in `{kv}`")))?;
            match k.trim() {
                "D" => order = Some(v.trim().parse().map_err(|_| Error::Parse(format!("bad D `{v}`")))?),
                "Dt" => dual_order = Some(v.trim().parse().map_err(|_| Error::Parse(format!("bad Dt `{v}`")))?),
                "mode" if v.trim() == "periodic" => {}
                "mode" => return Err(Error::Parse(format!("unsupported boundary mode `{v}`"))),
                other => return Err(Error::Parse(format!("unknown basis key `{other}`"))),
            }
        }
        let order = order.ok_or_else(|| Error::Parse("missing D".into()))?;
        Ok(Self {
            order,
            dual_order: dual_order.unwrap_or(order),
        })
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spline:D={},Dt={},mode=periodic", self.order, self.dual_order)
    }
}

/// Primal/dual wavelet families on every patch of a decomposition, indexed by a multiscale grid.
#[derive(Clone)]
pub struct WaveletSystem {
    pub univariate: Arc<UnivariateSystem>,
    pub dec: Arc<Decomposition>,
    pub grid: Arc<MultiscaleGrid>,
    pub max_level: u32,
    pub label: String,
    /// `weights[j] = [scaling, wavelet]` balance factors per axis.
    weights: Vec<[f64; 2]>,
}

impl fmt::Debug for WaveletSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveletSystem")
            .field("label", &self.label)
            .field("max_level", &self.max_level)
            .finish()
    }
}

impl WaveletSystem {
    pub fn new(univariate: UnivariateSystem, dec: Decomposition, max_level: u32) -> Result<Self> {
        let d = dec.d;
        if d == 0 || d > 3 {
            return Err(Error::InvalidParameter(format!("parameter dimension {d} not supported")));
        }
        if max_level > 24 / d as u32 {
            return Err(Error::InvalidParameter(format!("max level {max_level} too large for d = {d}")));
        }
        let weights = (0..=max_level + 1)
            .map(|j| [univariate.balance_weight(Kind::Scaling, j), univariate.balance_weight(Kind::Wavelet, j)])
            .collect();
        let label = format!("{}@{}", univariate.label(), dec.name);
        let mut sys = Self {
            univariate: Arc::new(univariate),
            dec: Arc::new(dec),
            grid: Arc::new(MultiscaleGrid::new(
                Vec::new(),
                Domain::Points,
                Constants { c1: 1.0, c2: 1.0, c3: 1.0 },
                1,
                true,
            )?),
            max_level,
            label,
            weights,
        };
        sys.grid = Arc::new(sys.build_grid()?);
        Ok(sys)
    }

    /// Builds from a basis string and a builtin manifold name.
    pub fn from_names(basis: &str, manifold: &str, max_level: u32) -> Result<Self> {
        let spec: BasisSpec = basis.parse()?;
        let uni = UnivariateSystem::new(spec.order, spec.dual_order)?;
        Self::new(uni, builtin_manifold(manifold)?, max_level)
    }

    pub fn d(&self) -> usize {
        self.dec.d
    }

    pub fn n_patches(&self) -> usize {
        self.dec.patches.len()
    }

    pub fn first_tag(j: u32) -> u32 {
        if j == 0 {
            0
        } else {
            1
        }
    }

    pub fn n_tags(&self, j: u32) -> usize {
        let all = 1usize << self.d();
        if j == 0 {
            all
        } else {
            all - 1
        }
    }

    pub fn per_patch_len(&self, j: u32) -> usize {
        self.n_tags(j) << (self.d() * j as usize)
    }

    pub fn level_len(&self, j: u32) -> usize {
        self.n_patches() * self.per_patch_len(j)
    }

    /// Total number of functions with level `≤ j`.
    pub fn len_through(&self, j: u32) -> usize {
        (0..=j).map(|l| self.level_len(l)).sum()
    }

    pub fn encode(&self, j: u32, patch: usize, tag: u32, kflat: usize) -> usize {
        let block = 1usize << (self.d() * j as usize);
        patch * self.per_patch_len(j) + (tag - Self::first_tag(j)) as usize * block + kflat
    }

    /// `(patch, tag, flat shift)` of index `idx` at level `j`.
    pub fn decode(&self, j: u32, idx: usize) -> Result<(usize, u32, usize)> {
        if idx >= self.level_len(j) {
            return Err(Error::Precondition(format!("index {idx} out of range at level {j}")));
        }
        let per = self.per_patch_len(j);
        let block = 1usize << (self.d() * j as usize);
        let r = idx % per;
        Ok((idx / per, (r / block) as u32 + Self::first_tag(j), r % block))
    }

    pub fn axis_kind(&self, tag: u32, axis: usize) -> Kind {
        if (tag >> (self.d() - 1 - axis)) & 1 == 1 {
            Kind::Wavelet
        } else {
            Kind::Scaling
        }
    }

    /// Shift vector of a flat index at level `j`, axis 0 slowest.
    pub fn shift(&self, j: u32, kflat: usize) -> Vec<usize> {
        let side = 1usize << j;
        let d = self.d();
        (0..d).map(|a| (kflat / side.pow((d - 1 - a) as u32)) % side).collect()
    }

    /// Factor `w` with primal function `w·ψ` and dual `ψ̃/w`.
    pub fn weight(&self, j: u32, tag: u32) -> f64 {
        (0..self.d())
            .map(|a| match self.axis_kind(tag, a) {
                Kind::Scaling => self.weights[j as usize][0],
                Kind::Wavelet => self.weights[j as usize][1],
            })
            .product()
    }

    /// Anchor of a function in patch coordinates: midpoint of its primal support, wrapped to `[0,1)`.
    pub fn anchor_local(&self, j: u32, tag: u32, kflat: usize) -> Vec<f64> {
        let scale = 0.5f64.powi(j as i32);
        self.shift(j, kflat)
            .into_iter()
            .enumerate()
            .map(|(a, k)| {
                let (lo, hi) = self.univariate.support(Side::Primal, self.axis_kind(tag, a));
                ((k as f64 + 0.5 * (lo + hi)) * scale).rem_euclid(1.0)
            })
            .collect()
    }

    fn build_grid(&self) -> Result<MultiscaleGrid> {
        let mut levels = Vec::with_capacity(self.max_level as usize + 1);
        for j in 0..=self.max_level {
            let mut lvl = Vec::with_capacity(self.level_len(j));
            for (p, patch) in self.dec.patches.iter().enumerate() {
                for tag in Self::first_tag(j)..(1u32 << self.d()) {
                    for k in 0..1usize << (self.d() * j as usize) {
                        let x = self.anchor_local(j, tag, k);
                        lvl.push(IndexPoint::new(j, patch.eval(&x), tag).with_chart(p, x));
                    }
                }
            }
            levels.push(lvl);
        }
        let (smin, smax) = stretch_bounds(&self.dec);
        MultiscaleGrid::new(
            levels,
            Domain::Manifold(self.dec.clone()),
            Constants {
                c1: (self.d() as f64).sqrt() * smax,
                c2: 0.5 * smin,
                c3: 1.0,
            },
            self.d(),
            true,
        )
    }

    fn check_level(&self, j_max: u32) -> Result<()> {
        if j_max > self.max_level {
            Err(Error::Precondition(format!("level {j_max} above system max level {}", self.max_level)))
        } else {
            Ok(())
        }
    }

    fn check_function(&self, u: &PatchFunction) -> Result<()> {
        if u.d != self.d() || u.n_patches != self.n_patches() {
            return Err(Error::DomainMismatch(format!(
                "function on {} patches of dimension {}, system `{}` has {} of dimension {}",
                u.n_patches,
                u.d,
                self.label,
                self.n_patches(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Raw per-patch pyramids of a sequence truncated at level `j_max`.
    pub(crate) fn to_pyramids(&self, a: &CoeffSequence, j_max: u32) -> Result<Vec<Pyramid>> {
        let mut pyrs = vec![Pyramid::zeros(self.d(), j_max as usize + 1); self.n_patches()];
        for (&(j, idx), &v) in a.iter() {
            if j > j_max {
                continue;
            }
            let (p, tag, k) = self.decode(j, idx)?;
            pyrs[p].levels[j as usize][tag as usize][k] = v * self.weight(j, tag);
        }
        Ok(pyrs)
    }

    pub(crate) fn from_pyramids(&self, pyrs: &[Pyramid]) -> CoeffSequence {
        let mut out = CoeffSequence::with_grid_ref(&self.label);
        for (p, pyr) in pyrs.iter().enumerate() {
            for (j, lvl) in pyr.levels.iter().enumerate() {
                let j = j as u32;
                for (tag, band) in lvl.iter().enumerate() {
                    let tag = tag as u32;
                    if band.is_empty() {
                        continue;
                    }
                    let w = self.weight(j, tag);
                    for (k, v) in band.iter().enumerate() {
                        out.set(j, self.encode(j, p, tag, k), v / w);
                    }
                }
            }
        }
        out
    }

    /// Level-`j_max + 1` primal scaling coefficients of the partial sum, per patch.
    pub(crate) fn scaling_coefficients(&self, a: &CoeffSequence, j_max: u32) -> Result<Vec<Arr>> {
        let uni = &self.univariate;
        Ok(self
            .to_pyramids(a, j_max)?
            .par_iter()
            .map(|p| inverse(p, &uni.primal, &uni.wavelet))
            .collect())
    }

    /// Pyramids from level-`j_max + 1` dual scaling coefficients.
    pub(crate) fn decompose(&self, tops: Vec<Arr>, j_max: u32) -> Vec<Pyramid> {
        let uni = &self.univariate;
        tops.into_par_iter()
            .map(|t| forward(t, j_max as usize + 1, &uni.dual, &uni.dual_wavelet))
            .collect()
    }
}

/// Maps `[P̃_0..P̃_R]` Gauss values to monomial coefficients: `W[r][q]`.
fn projection_matrix(rule: &UnitRule) -> Vec<Vec<f64>> {
    let r1 = PROJ_DEGREE + 1;
    // Monomial coefficients of shifted Legendre polynomials P_n(2t - 1).
    let mut mono: Vec<Vec<f64>> = vec![vec![0.0; r1]; r1];
    mono[0][0] = 1.0;
    if r1 > 1 {
        mono[1][0] = -1.0;
        mono[1][1] = 2.0;
    }
    for n in 1..r1 - 1 {
        let nf = n as f64;
        for r in 0..r1 {
            let mut v = -(2.0 * nf + 1.0) * mono[n][r] - nf * mono[n - 1][r];
            if r > 0 {
                v += 2.0 * (2.0 * nf + 1.0) * mono[n][r - 1];
            }
            mono[n + 1][r] = v / (nf + 1.0);
        }
    }
    let eval = |n: usize, t: f64| mono[n].iter().rev().fold(0.0, |acc, c| acc * t + c);
    (0..r1)
        .map(|r| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| (0..r1).map(|n| (2 * n + 1) as f64 * eval(n, t) * w * mono[n][r]).sum())
                .collect()
        })
        .collect()
}

/// Applies `mat` (rows × cols) along `axis` of a row-major tensor.
pub(crate) fn apply_axis(data: &[Complex64], shape: &[usize], axis: usize, mat: &[Vec<f64>]) -> (Vec<Complex64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let cols = shape[axis];
    let rows = mat.len();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        for (r, row) in mat.iter().enumerate() {
            for (c, m) in row.iter().enumerate() {
                let src = (o * cols + c) * inner;
                let dst = (o * rows + r) * inner;
                for i in 0..inner {
                    out[dst + i] += data[src + i] * *m;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Tensor monomial coefficients of `u` on every level-`level` cell of `patch`: `[cell][r_0..r_{d-1}]`.
pub(crate) fn project_patch(u: &PatchFunction, patch: usize, d: usize, level: u32) -> Vec<Complex64> {
    let rule = UnitRule::new(PROJ_POINTS);
    let mat = projection_matrix(&rule);
    let n = 1usize << level;
    let r1 = PROJ_DEGREE + 1;
    let rsize = r1.pow(d as u32);
    let q = rule.len();
    let qsize = q.pow(d as u32);
    let ncells = n.pow(d as u32);
    let mut out = vec![Complex64::new(0.0, 0.0); ncells * rsize];
    out.par_chunks_mut(rsize).enumerate().for_each(|(cell, dst)| {
        let cidx: Vec<usize> = (0..d).map(|a| (cell / n.pow((d - 1 - a) as u32)) % n).collect();
        let mut vals = Vec::with_capacity(qsize);
        let mut x = vec![0.0; d];
        for qf in 0..qsize {
            for a in 0..d {
                let qa = (qf / q.pow((d - 1 - a) as u32)) % q;
                x[a] = (cidx[a] as f64 + rule.nodes[qa]) / n as f64;
            }
            vals.push(u.eval(patch, &x));
        }
        let mut shape = vec![q; d];
        for a in 0..d {
            let (v, s) = apply_axis(&vals, &shape, a, &mat);
            vals = v;
            shape = s;
        }
        dst.copy_from_slice(&vals);
    });
    out
}

/// `s_m = 2^{-d·level/2} Σ_c Σ_r coef[(m+c) mod n][r] Π_i ν_{c_i, r_i}`.
pub(crate) fn contract_cells(proj: &[Complex64], d: usize, level: u32, cells: &CellMoments) -> Arr {
    let n = 1usize << level;
    let r1 = PROJ_DEGREE + 1;
    let ncells = n.pow(d as u32);
    let mut cur = proj.to_vec();
    let mut rb = r1.pow(d as u32);
    for axis in 0..d {
        let rb_next = rb / r1;
        let stride = n.pow((d - 1 - axis) as u32);
        let mut next = vec![Complex64::new(0.0, 0.0); ncells * rb_next];
        next.par_chunks_mut(rb_next).enumerate().for_each(|(m, dst)| {
            let ma = (m / stride) % n;
            let base = m - ma * stride;
            for ci in 0..cells.n_cells() {
                let c = cells.lo + ci as i64;
                let g = (ma as i64 + c).rem_euclid(n as i64) as usize;
                let src = (base + g * stride) * rb;
                for r in 0..r1 {
                    let nu = cells.nu[ci][r];
                    if nu == 0.0 {
                        continue;
                    }
                    let row = &cur[src + r * rb_next..src + (r + 1) * rb_next];
                    for (o, v) in dst.iter_mut().zip(row) {
                        *o += v * nu;
                    }
                }
            }
        });
        cur = next;
        rb = rb_next;
    }
    let scale = 0.5f64.powf(d as f64 * level as f64 / 2.0);
    for v in cur.iter_mut() {
        *v *= scale;
    }
    Arr::from_data(vec![n; d], cur)
}

/// `X(t) = ∫ φ^Ψ(y) φ̃^Φ(y + t) dy` between the primal scaling function of `psi` and the dual of `phi`, `t` from the returned offset.
pub fn transfer_kernel(psi: &UnivariateSystem, phi: &UnivariateSystem) -> (i64, Vec<f64>) {
    let rule = UnitRule::new(PROJ_POINTS);
    let mat = projection_matrix(&rule);
    let a = &psi.primal;
    let cells = &phi.dual_cells;
    let lo = a.lo - (cells.lo + cells.n_cells() as i64);
    let hi = a.hi() - cells.lo;
    let mut out = vec![0.0; (hi - lo + 1) as usize];
    for g in a.lo..a.hi() {
        let vals: Vec<f64> = rule.nodes.iter().map(|t| psi.phi(g as f64 + t)).collect();
        let coef: Vec<f64> = mat.iter().map(|row| row.iter().zip(&vals).map(|(m, v)| m * v).sum()).collect();
        for (ti, x) in out.iter_mut().enumerate() {
            let t = lo + ti as i64;
            *x += coef.iter().enumerate().map(|(r, c)| c * cells.get(g + t, r)).sum::<f64>();
        }
    }
    (lo, out)
}

/// Coefficients `⟨u, ψ̃_{j,ξ}⟩` for all levels `≤ j_max`.
pub fn analyze(u: &PatchFunction, sys: &WaveletSystem, j_max: u32) -> Result<CoeffSequence> {
    Ok(analyze_many(u, &[sys], j_max)?.pop().expect("one system"))
}

/// [`analyze`] against several systems on the same decomposition, sharing the local projections.
pub fn analyze_many(u: &PatchFunction, systems: &[&WaveletSystem], j_max: u32) -> Result<Vec<CoeffSequence>> {
    let first = systems
        .first()
        .ok_or_else(|| Error::Empty("no wavelet systems given".into()))?;
    for s in systems {
        s.check_level(j_max)?;
        s.check_function(u)?;
        if s.dec.name != first.dec.name || s.n_patches() != first.n_patches() {
            return Err(Error::DomainMismatch(format!("systems on `{}` and `{}`", first.dec.name, s.dec.name)));
        }
    }
    let d = first.d();
    let level = j_max + 1;
    let mut tops: Vec<Vec<Arr>> = vec![Vec::with_capacity(first.n_patches()); systems.len()];
    for p in 0..first.n_patches() {
        let proj = project_patch(u, p, d, level);
        for (s, t) in systems.iter().zip(tops.iter_mut()) {
            t.push(contract_cells(&proj, d, level, &s.univariate.dual_cells));
        }
    }
    Ok(systems
        .iter()
        .zip(tops)
        .map(|(s, t)| s.from_pyramids(&s.decompose(t, j_max)))
        .collect())
}

/// Values `(m mod n, φ(n x - m))` of the level-`log2 n` primal scaling functions at `x`.
fn axis_terms(uni: &UnivariateSystem, n: usize, x: f64) -> Vec<(usize, f64)> {
    let t = x * n as f64;
    let lo = -((uni.order / 2) as f64);
    let hi = lo + uni.order as f64;
    let m0 = (t - hi).floor() as i64;
    let m1 = (t - lo).ceil() as i64;
    (m0..=m1)
        .filter_map(|m| {
            let v = bspline(uni.order, t - m as f64 - lo);
            (v != 0.0).then(|| (m.rem_euclid(n as i64) as usize, v))
        })
        .collect()
}

/// Evaluates `Σ_m c_m 2^{dL/2} Π φ(2^L x_i - m_i)` on `[0,1]^d`.
pub(crate) fn eval_scaling(uni: &UnivariateSystem, c: &Arr, x: &[f64]) -> Complex64 {
    let d = c.shape.len();
    let n = c.shape[0];
    let terms: Vec<Vec<(usize, f64)>> = x.iter().map(|&xi| axis_terms(uni, n, xi)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; d];
    if terms.iter().any(|t| t.is_empty()) {
        return total;
    }
    loop {
        let mut flat = 0;
        let mut w = 1.0;
        for a in 0..d {
            let (m, v) = terms[a][idx[a]];
            flat = flat * n + m;
            w *= v;
        }
        total += c.data[flat] * w;
        let mut a = d;
        loop {
            if a == 0 {
                return total * (n as f64).powf(d as f64 / 2.0);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < terms[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Partial sum `Σ_{j ≤ j_max} a_{j,ξ} ψ_{j,ξ}` as a patchwise function.
pub fn synthesize(a: &CoeffSequence, sys: &WaveletSystem, j_max: u32) -> Result<PatchFunction> {
    sys.check_level(j_max)?;
    let tops = Arc::new(sys.scaling_coefficients(a, j_max)?);
    let uni = sys.univariate.clone();
    Ok(PatchFunction::new(sys.d(), sys.n_patches(), move |p, x| eval_scaling(&uni, &tops[p], x)))
}

/// Exact patchwise L2 norm of the partial sum, from the primal autocorrelation.
pub fn l2_norm(a: &CoeffSequence, sys: &WaveletSystem, j_max: u32) -> Result<f64> {
    sys.check_level(j_max)?;
    let tops = sys.scaling_coefficients(a, j_max)?;
    let n = 1usize << (j_max + 1);
    let kernel = sys.univariate.primal_autocorr.periodic(n);
    let total: f64 = tops
        .par_iter()
        .map(|c| {
            let mut g = c.clone();
            for axis in 0..sys.d() {
                g = g.correlate(axis, 0, &kernel);
            }
            c.dot(&g).re
        })
        .sum();
    Ok(total.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::inner_product_composite;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn transfer_kernel_of_a_system_with_itself_is_a_delta() {
        for (d, dt) in [(1, 1), (2, 2), (2, 4), (3, 3)] {
            let s = UnivariateSystem::new(d, dt).unwrap();
            let (lo, x) = transfer_kernel(&s, &s);
            for (i, v) in x.iter().enumerate() {
                let want = if lo + i as i64 == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn haar_against_hat_dual_kernel_matches_quadrature() {
        // Oracle: ∫_0^1 φ̃(y + t) dy = ν_{t,0} for Haar against any dual.
        let haar = UnivariateSystem::haar();
        let lin = UnivariateSystem::new(2, 2).unwrap();
        let (lo, x) = transfer_kernel(&haar, &lin);
        for (i, v) in x.iter().enumerate() {
            assert_abs_diff_eq!(*v, lin.dual_cells.get(lo + i as i64, 0), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn basis_spec_parsing() {
        let b: BasisSpec = "spline:D=2,Dt=4,mode=periodic".parse().unwrap();
        assert_eq!(b, BasisSpec { order: 2, dual_order: 4 });
        assert_eq!(b.to_string(), "spline:D=2,Dt=4,mode=periodic");
        assert_eq!("spline:D=1,Dt=1".parse::<BasisSpec>().unwrap(), BasisSpec { order: 1, dual_order: 1 });
        assert_eq!("haar".parse::<BasisSpec>().unwrap(), BasisSpec { order: 1, dual_order: 1 });
        assert!("spline:D=2,Dt=2,mode=reflect".parse::<BasisSpec>().is_err());
        assert!("bspline:D=2".parse::<BasisSpec>().is_err());
        assert!(WaveletSystem::from_names("spline:D=2,Dt=3", "interval", 2).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let sys = WaveletSystem::from_names("spline:D=2,Dt=2", "cube-surface", 3).unwrap();
        for j in 0..=3 {
            assert_eq!(sys.grid.level(j as usize).len(), sys.level_len(j));
            for idx in (0..sys.level_len(j)).step_by(7) {
                let (p, t, k) = sys.decode(j, idx).unwrap();
                assert_eq!(sys.encode(j, p, t, k), idx);
                let pt = &sys.grid.level(j as usize)[idx];
                assert_eq!(pt.tag(), t);
                assert_eq!(pt.chart.as_ref().unwrap().patch, p);
            }
        }
        assert!(sys.decode(0, sys.level_len(0)).is_err());
    }

    #[test]
    fn index_set_satisfies_grid_axioms() {
        use crate::grid::{check_dimension, check_net, check_separation};
        for (basis, manifold) in [("spline:D=2,Dt=2", "interval"), ("spline:D=3,Dt=3", "cube-surface"), ("haar", "fichera-surface")] {
            let sys = WaveletSystem::from_names(basis, manifold, 4).unwrap();
            let mut ratios = Vec::new();
            for j in 0..=4 {
                assert!(check_net(&sys.grid, j, 6).unwrap().ok, "{basis} {manifold} net at {j}");
                let sep = check_separation(&sys.grid, j, 64).unwrap();
                assert!(sep.ok, "{basis} {manifold} separation at {j}: {sep:?}");
                ratios.push(check_dimension(&sys.grid, j, 40).unwrap().ratio);
            }
            let (lo, hi) = ratios[1..].iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
            assert!(hi / lo < 4.0, "{basis} {manifold}: {ratios:?}");
        }
    }

    #[test]
    fn haar_constant_has_only_scaling_coefficient() {
        let sys = WaveletSystem::from_names("haar", "interval", 5).unwrap();
        let a = analyze(&PatchFunction::constant(1, 1, c(1.0)), &sys, 5).unwrap();
        assert_abs_diff_eq!(a.get(0, 0).re, 1.0, epsilon = 1e-13);
        for (&(j, i), v) in a.iter() {
            if (j, i) != (0, 0) {
                assert!(v.norm() < 1e-13, "({j},{i}) = {v}");
            }
        }
    }

    #[test]
    fn haar_coefficients_of_identity() {
        // Oracle: ⟨x, ψ_{j,k}⟩ = 2^{j/2}(∫_{left half} x - ∫_{right half} x) = -2^{-3j/2}/4.
        let sys = WaveletSystem::from_names("haar", "interval", 6).unwrap();
        let a = analyze(&PatchFunction::real(1, 1, |_, x| x[0]), &sys, 6).unwrap();
        assert_abs_diff_eq!(a.get(0, 0).re, 0.5, epsilon = 1e-13);
        for j in 0..=6u32 {
            for k in 0..(1usize << j) {
                let idx = sys.encode(j, 0, 1, k);
                assert_abs_diff_eq!(a.get(j, idx).re, -0.25 * 2f64.powf(-1.5 * j as f64), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn synthesis_of_unit_vector_matches_refinement() {
        for basis in ["haar", "spline:D=2,Dt=2", "spline:D=3,Dt=3"] {
            let sys = WaveletSystem::from_names(basis, "interval", 3).unwrap();
            let uni = sys.univariate.clone();
            let j = 2u32;
            let k = 1usize;
            let idx = sys.encode(j, 0, 1, k);
            let f = synthesize(&CoeffSequence::from_entries([((j, idx), c(1.0))]), &sys, 3).unwrap();
            let w = sys.weight(j, 1);
            for i in 0..97 {
                let x = i as f64 / 97.0;
                // Periodized oracle: Σ_l 2^{j/2} ψ(2^j (x + l) - k).
                let want: f64 = (-4..=4)
                    .map(|l| w * 2f64.powf(j as f64 / 2.0) * uni.psi(4.0 * (x + l as f64) - k as f64))
                    .sum();
                assert_abs_diff_eq!(f.eval(0, &[x]).re, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_sequence_gives_zero_function() {
        let sys = WaveletSystem::from_names("spline:D=2,Dt=4", "square2", 2).unwrap();
        let f = synthesize(&CoeffSequence::new(), &sys, 2).unwrap();
        assert_eq!(f.eval(1, &[0.3, 0.7]), c(0.0));
    }

    #[test]
    fn single_wavelet_analyzes_to_unit_vector() {
        for basis in ["haar", "spline:D=2,Dt=2", "spline:D=2,Dt=4", "spline:D=3,Dt=3"] {
            let sys = WaveletSystem::from_names(basis, "square2", 3).unwrap();
            for (j, idx) in [(0u32, 3usize), (0, 4), (1, 5), (2, 17)] {
                let e = CoeffSequence::from_entries([((j, idx), c(1.0))]);
                let back = analyze(&synthesize(&e, &sys, 3).unwrap(), &sys, 3).unwrap();
                for (&key, v) in back.iter() {
                    let want = if key == (j, idx) { 1.0 } else { 0.0 };
                    assert!((v - c(want)).norm() < 1e-10, "{basis} ({j},{idx}) -> {key:?}: {v}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn analyze_synthesize_round_trip(seed in any::<u64>(), pair in 0usize..4) {
            let basis = ["haar", "spline:D=2,Dt=2", "spline:D=2,Dt=4", "spline:D=3,Dt=3"][pair];
            let sys = WaveletSystem::from_names(basis, "interval", 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = CoeffSequence::new();
            for j in 0..=5u32 {
                for i in 0..sys.level_len(j) {
                    if rng.random_bool(0.4) {
                        a.set(j, i, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let back = analyze(&synthesize(&a, &sys, 5).unwrap(), &sys, 5).unwrap();
            let diff = back.plus(&a.scaled(c(-1.0)));
            prop_assert!(diff.iter().all(|(_, v)| v.norm() < 1e-8));
        }
    }

    #[test]
    fn exact_norm_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for basis in ["haar", "spline:D=2,Dt=2", "spline:D=3,Dt=3"] {
            let sys = WaveletSystem::from_names(basis, "square2", 3).unwrap();
            let mut a = CoeffSequence::new();
            for j in 0..=3u32 {
                for i in 0..sys.level_len(j) {
                    a.set(j, i, c(rng.random_range(-1.0..1.0)));
                }
            }
            let f = synthesize(&a, &sys, 3).unwrap();
            let q = inner_product_composite(&f, &f, &sys.dec, 4, 4).unwrap().re.sqrt();
            assert_abs_diff_eq!(l2_norm(&a, &sys, 3).unwrap(), q, epsilon = 1e-10 * q);
        }
    }

    #[test]
    fn analysis_matches_quadrature_against_dual_for_primal_dual_haar() {
        // Haar is self-dual, so ⟨u, ψ̃⟩ can be checked by direct quadrature against the synthesized ψ.
        let sys = WaveletSystem::from_names("haar", "interval", 4).unwrap();
        let u = PatchFunction::real(1, 1, |_, x| (3.0 * x[0]).sin() + x[0] * x[0]);
        let a = analyze(&u, &sys, 4).unwrap();
        for (j, idx) in [(0u32, 0usize), (0, 1), (2, 3), (4, 11)] {
            let psi = synthesize(&CoeffSequence::from_entries([((j, idx), c(1.0))]), &sys, 4).unwrap();
            let q = inner_product_composite(&u, &psi, &sys.dec, 8, 6).unwrap();
            assert_abs_diff_eq!(a.get(j, idx).re, q.re, epsilon = 1e-12);
        }
    }

    #[test]
    fn level_and_domain_preconditions() {
        let sys = WaveletSystem::from_names("haar", "interval", 2).unwrap();
        assert!(analyze(&PatchFunction::zero(1, 1), &sys, 3).is_err());
        assert!(analyze(&PatchFunction::zero(2, 1), &sys, 2).is_err());
        let other = WaveletSystem::from_names("haar", "arc", 2).unwrap();
        assert!(analyze_many(&PatchFunction::zero(1, 1), &[&sys, &other], 2).is_err());
    }
}
