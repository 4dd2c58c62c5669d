//! Almost-diagonal matrices `ad^{α0,α1}_p(∇⁰, ∇¹)`: the weight `ω`, membership tests,
//! level-block sparse application with the `M⁻ / M⁺` split, the Schur bound and
//! empirical operator-norm estimates.

use crate::error::{Error, Result};
use crate::grid::{euclid, GridJson, MultiscaleGrid};
use crate::seq::{quasi_norm, sigma_p, BesovParams, CoeffSequence, QExp};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::sync::Arc;

/// Entries with `ω` below this fraction of the block maximum are dropped at generation.
pub const GENERATION_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub p: f64,
    pub epsilon: f64,
    pub d: usize,
}

impl AdParams {
    pub fn new(alpha0: f64, alpha1: f64, p: f64, epsilon: f64, d: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("ε must be positive, got {epsilon}")));
        }
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        Ok(Self {
            alpha0,
            alpha1,
            p,
            epsilon,
            d,
        })
    }

    pub fn sigma_p(&self) -> f64 {
        sigma_p(self.p, self.d)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn with_p(self, p: f64) -> Self {
        Self { p, ..self }
    }
}

/// `ω_{(j,ξ),(k,η)}(ε)` in terms of the levels and `dist(ξ, η)`.
pub fn omega_dist(j: u32, k: u32, dist: f64, prm: &AdParams) -> f64 {
    let d = prm.d as f64;
    let eps = prm.epsilon;
    let sig = prm.sigma_p();
    let diff = j as f64 - k as f64;
    let scale = 2f64.powf(k as f64 * prm.alpha0 - j as f64 * prm.alpha1);
    let level = (-diff * (d / 2.0 + eps)).min(diff * (d / 2.0 + eps + sig));
    let spread = 2f64.powi(j.min(k) as i32);
    scale * 2f64.powf(level) / (1.0 + spread * dist).powf(d + eps + sig)
}

/// `ω` between `(j, ξ) ∈ ∇¹` and `(k, η) ∈ ∇⁰`, addressed by in-level indices.
pub fn omega(row: &MultiscaleGrid, j: u32, xi: usize, col: &MultiscaleGrid, k: u32, eta: usize, prm: &AdParams) -> Result<f64> {
    let a = row
        .level(j as usize)
        .get(xi)
        .ok_or_else(|| Error::InvalidParameter(format!("row index ({j},{xi}) outside grid")))?;
    let b = col
        .level(k as usize)
        .get(eta)
        .ok_or_else(|| Error::InvalidParameter(format!("column index ({k},{eta}) outside grid")))?;
    let dist = crate::grid::pseudo_dist(a, b)?;
    Ok(omega_dist(j, k, dist, prm))
}

/// One stored entry `m_{(j,ξ),(k,η)}` of the block `(j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub xi: usize,
    pub eta: usize,
    pub val: Complex64,
}

/// Level-block sparse matrix `(m_{(j,ξ),(k,η)})` with rows on `∇¹` and columns on `∇⁰`.
#[derive(Debug, Clone)]
pub struct ScaleMatrix {
    pub row_grid: Arc<MultiscaleGrid>,
    pub col_grid: Arc<MultiscaleGrid>,
    blocks: BTreeMap<(u32, u32), Vec<Entry>>,
}

impl ScaleMatrix {
    pub fn zeros(row_grid: Arc<MultiscaleGrid>, col_grid: Arc<MultiscaleGrid>) -> Self {
        Self {
            row_grid,
            col_grid,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(grid: Arc<MultiscaleGrid>) -> Self {
        Self::diagonal(grid, |_| Complex64::new(1.0, 0.0))
    }

    /// Diagonal matrix with value `f(j)` on level `j`.
    pub fn diagonal(grid: Arc<MultiscaleGrid>, f: impl Fn(u32) -> Complex64) -> Self {
        let mut m = Self::zeros(grid.clone(), grid.clone());
        for j in 0..grid.n_levels() as u32 {
            let v = f(j);
            let entries = (0..grid.level(j as usize).len()).map(|i| Entry { xi: i, eta: i, val: v }).collect();
            m.blocks.insert((j, j), entries);
        }
        m
    }

    /// Matrix with entries `f(j, ξ, k, η, dist)`, keeping per block only entries whose weight
    /// `w(j, k, dist)` is at least [`GENERATION_CUTOFF`] times the block's largest weight.
    pub fn from_fn(
        row_grid: Arc<MultiscaleGrid>,
        col_grid: Arc<MultiscaleGrid>,
        weight: impl Fn(u32, u32, f64) -> f64 + Sync,
        f: impl Fn(u32, usize, u32, usize, f64) -> Complex64 + Sync,
    ) -> Result<Self> {
        if row_grid.ambient_dim() != col_grid.ambient_dim() {
            return Err(Error::DomainMismatch("row and column grids live in different spaces".into()));
        }
        let pairs: Vec<(u32, u32)> = (0..row_grid.n_levels() as u32)
            .flat_map(|j| (0..col_grid.n_levels() as u32).map(move |k| (j, k)))
            .collect();
        let blocks: BTreeMap<(u32, u32), Vec<Entry>> = pairs
            .par_iter()
            .map(|&(j, k)| {
                let rows = row_grid.level(j as usize);
                let cols = col_grid.level(k as usize);
                let mut raw = Vec::with_capacity(rows.len() * cols.len());
                let mut wmax: f64 = 0.0;
                for (xi, a) in rows.iter().enumerate() {
                    for (eta, b) in cols.iter().enumerate() {
                        let dist = euclid(&a.y, &b.y);
                        let w = weight(j, k, dist);
                        wmax = wmax.max(w);
                        raw.push((xi, eta, dist, w));
                    }
                }
                let entries: Vec<Entry> = raw
                    .into_iter()
                    .filter(|&(_, _, _, w)| w >= GENERATION_CUTOFF * wmax)
                    .filter_map(|(xi, eta, dist, _)| {
                        let val = f(j, xi, k, eta, dist);
                        (val != Complex64::new(0.0, 0.0)).then_some(Entry { xi, eta, val })
                    })
                    .collect();
                ((j, k), entries)
            })
            .filter(|(_, e)| !e.is_empty())
            .collect();
        Ok(Self {
            row_grid,
            col_grid,
            blocks,
        })
    }

    /// Entries `±ω(ε)` with signs drawn from a hash of `(seed, j, ξ, k, η)`, so that matrices
    /// on nested grids agree on their common indices.
    pub fn omega_random_sign(
        row_grid: Arc<MultiscaleGrid>,
        col_grid: Arc<MultiscaleGrid>,
        prm: &AdParams,
        seed: u64,
    ) -> Result<Self> {
        let prm = *prm;
        Self::from_fn(
            row_grid,
            col_grid,
            move |j, k, dist| omega_dist(j, k, dist, &prm),
            move |j, xi, k, eta, dist| {
                let sign = if entry_uniform(seed, j, xi, k, eta) < 0.5 { -1.0 } else { 1.0 };
                Complex64::new(sign * omega_dist(j, k, dist, &prm), 0.0)
            },
        )
    }

    /// Entries `ω(ε)·u` with `u` uniform in `[−1, 1]`, hashed like [`Self::omega_random_sign`].
    pub fn omega_uniform(
        row_grid: Arc<MultiscaleGrid>,
        col_grid: Arc<MultiscaleGrid>,
        prm: &AdParams,
        seed: u64,
    ) -> Result<Self> {
        let prm = *prm;
        Self::from_fn(
            row_grid,
            col_grid,
            move |j, k, dist| omega_dist(j, k, dist, &prm),
            move |j, xi, k, eta, dist| {
                let u = 2.0 * entry_uniform(seed, j, xi, k, eta) - 1.0;
                Complex64::new(omega_dist(j, k, dist, &prm) * u, 0.0)
            },
        )
    }

    /// Entries exactly `ω(ε)`.
    pub fn omega_valued(row_grid: Arc<MultiscaleGrid>, col_grid: Arc<MultiscaleGrid>, prm: &AdParams) -> Result<Self> {
        let prm = *prm;
        Self::from_fn(
            row_grid,
            col_grid,
            move |j, k, dist| omega_dist(j, k, dist, &prm),
            move |j, _, k, _, dist| Complex64::new(omega_dist(j, k, dist, &prm), 0.0),
        )
    }

    /// Matrix from `(j, ξ, k, η, value)` triplets; zero values are dropped and duplicates summed.
    pub fn from_triplets(
        row_grid: Arc<MultiscaleGrid>,
        col_grid: Arc<MultiscaleGrid>,
        triplets: impl IntoIterator<Item = (u32, usize, u32, usize, Complex64)>,
    ) -> Result<Self> {
        let mut blocks: BTreeMap<(u32, u32), Vec<Entry>> = BTreeMap::new();
        for (j, xi, k, eta, val) in triplets {
            if j as usize >= row_grid.n_levels() || xi >= row_grid.level(j as usize).len() {
                return Err(Error::InvalidParameter(format!("row index ({j},{xi}) outside grid")));
            }
            if k as usize >= col_grid.n_levels() || eta >= col_grid.level(k as usize).len() {
                return Err(Error::InvalidParameter(format!("column index ({k},{eta}) outside grid")));
            }
            if val != Complex64::new(0.0, 0.0) {
                blocks.entry((j, k)).or_default().push(Entry { xi, eta, val });
            }
        }
        for entries in blocks.values_mut() {
            entries.sort_by_key(|e| (e.xi, e.eta));
            entries.dedup_by(|b, a| {
                let same = (a.xi, a.eta) == (b.xi, b.eta);
                if same {
                    a.val += b.val;
                }
                same
            });
        }
        Ok(Self {
            row_grid,
            col_grid,
            blocks,
        })
    }

    pub fn set(&mut self, j: u32, xi: usize, k: u32, eta: usize, val: Complex64) -> Result<()> {
        if xi >= self.row_grid.level(j as usize).len() {
            return Err(Error::InvalidParameter(format!("row index ({j},{xi}) outside grid")));
        }
        if eta >= self.col_grid.level(k as usize).len() {
            return Err(Error::InvalidParameter(format!("column index ({k},{eta}) outside grid")));
        }
        let block = self.blocks.entry((j, k)).or_default();
        match block.binary_search_by(|e| (e.xi, e.eta).cmp(&(xi, eta))) {
            Ok(pos) => block[pos].val = val,
            Err(pos) => block.insert(pos, Entry { xi, eta, val }),
        }
        Ok(())
    }

    pub fn get(&self, j: u32, xi: usize, k: u32, eta: usize) -> Complex64 {
        self.blocks
            .get(&(j, k))
            .and_then(|b| b.binary_search_by(|e| (e.xi, e.eta).cmp(&(xi, eta))).ok().map(|pos| b[pos].val))
            .unwrap_or_default()
    }

    pub fn block(&self, j: u32, k: u32) -> &[Entry] {
        self.blocks.get(&(j, k)).map_or(&[], Vec::as_slice)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(u32, u32), &Vec<Entry>)> {
        self.blocks.iter()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.values().map(Vec::len).sum()
    }

    /// Dense per-level copy of `a` on the column grid.
    fn dense_input(&self, a: &CoeffSequence) -> Result<Vec<Vec<Complex64>>> {
        let mut x: Vec<Vec<Complex64>> = self
            .col_grid
            .levels()
            .iter()
            .map(|l| vec![Complex64::default(); l.len()])
            .collect();
        for (&(k, eta), &v) in a.iter() {
            let slot = x
                .get_mut(k as usize)
                .and_then(|l| l.get_mut(eta))
                .ok_or_else(|| Error::DomainMismatch(format!("sequence index ({k},{eta}) not in the column grid")))?;
            *slot = v;
        }
        Ok(x)
    }

    /// Dense `(M⁻a, M⁺a)` per row level.
    fn apply_dense(&self, x: &[Vec<Complex64>]) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
        (0..self.row_grid.n_levels() as u32)
            .into_par_iter()
            .map(|j| {
                let n = self.row_grid.level(j as usize).len();
                let mut lower = vec![Complex64::default(); n];
                let mut upper = vec![Complex64::default(); n];
                for (&(_, k), entries) in self.blocks.range((j, 0)..=(j, u32::MAX)) {
                    let xk = &x[k as usize];
                    let out = if k < j { &mut lower } else { &mut upper };
                    for e in entries {
                        out[e.xi] += e.val * xk[e.eta];
                    }
                }
                (lower, upper)
            })
            .collect()
    }

    /// Dense `Mᴴ y` per column level.
    fn apply_adjoint_dense(&self, y: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        (0..self.col_grid.n_levels() as u32)
            .into_par_iter()
            .map(|k| {
                let mut out = vec![Complex64::default(); self.col_grid.level(k as usize).len()];
                for (&(j, _), entries) in self.blocks.iter().filter(|(key, _)| key.1 == k) {
                    let yj = &y[j as usize];
                    for e in entries {
                        out[e.eta] += e.val.conj() * yj[e.xi];
                    }
                }
                out
            })
            .collect()
    }

    fn to_sequence(&self, levels: impl Iterator<Item = Vec<Complex64>>) -> CoeffSequence {
        let mut s = CoeffSequence::with_grid_ref(&self.row_ref());
        for (j, lvl) in levels.enumerate() {
            for (xi, v) in lvl.into_iter().enumerate() {
                s.set(j as u32, xi, v);
            }
        }
        s
    }

    fn row_ref(&self) -> String {
        format!("rows:{}", self.row_grid.total_len())
    }
}

/// `(Ma)_{(j,ξ)} = Σ_{(k,η)} m_{(j,ξ),(k,η)} a_{(k,η)}`, computed as `M⁻a + M⁺a`.
pub fn apply(m: &ScaleMatrix, a: &CoeffSequence) -> Result<CoeffSequence> {
    let x = m.dense_input(a)?;
    let parts = m.apply_dense(&x);
    Ok(m.to_sequence(parts.into_iter().map(|(lo, up)| lo.iter().zip(&up).map(|(a, b)| a + b).collect())))
}

/// `(M⁻a, M⁺a)`: contributions of the columns with `k < j` and with `k ≥ j`.
pub fn apply_split(m: &ScaleMatrix, a: &CoeffSequence) -> Result<(CoeffSequence, CoeffSequence)> {
    let x = m.dense_input(a)?;
    let parts = m.apply_dense(&x);
    let (lo, up): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok((m.to_sequence(lo.into_iter()), m.to_sequence(up.into_iter())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub sup_ratio: f64,
    /// `((j, ξ), (k, η))` of the maximizing entry.
    pub witness: Option<((u32, usize), (u32, usize))>,
}

fn check_dims(m: &ScaleMatrix, d: usize) -> Result<()> {
    if m.row_grid.d != d || m.col_grid.d != d {
        return Err(Error::DomainMismatch(format!(
            "parameter dimension {d} vs grid dimensions {} / {}",
            m.row_grid.d, m.col_grid.d
        )));
    }
    Ok(())
}

/// `(j, k, dist, |m|, ξ, η)` for every stored entry.
fn entry_table(m: &ScaleMatrix) -> Vec<(u32, u32, f64, f64, usize, usize)> {
    m.blocks
        .par_iter()
        .flat_map_iter(|(&(j, k), entries)| {
            let rows = m.row_grid.level(j as usize);
            let cols = m.col_grid.level(k as usize);
            entries
                .iter()
                .map(move |e| (j, k, euclid(&rows[e.xi].y, &cols[e.eta].y), e.val.norm(), e.xi, e.eta))
        })
        .collect()
}

fn sup_ratio_of(table: &[(u32, u32, f64, f64, usize, usize)], prm: &AdParams) -> MembershipReport {
    let best = table
        .par_iter()
        .map(|&(j, k, dist, mag, xi, eta)| (mag / omega_dist(j, k, dist, prm), ((j, xi), (k, eta))))
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    match best {
        Some((r, w)) => MembershipReport {
            sup_ratio: r,
            witness: Some(w),
        },
        None => MembershipReport {
            sup_ratio: 0.0,
            witness: None,
        },
    }
}

/// `sup |m| / ω(ε)` over the stored entries.
pub fn ad_membership(m: &ScaleMatrix, prm: &AdParams) -> Result<MembershipReport> {
    check_dims(m, prm.d)?;
    Ok(sup_ratio_of(&entry_table(m), prm))
}

pub const FIT_TOL: f64 = 1e-3;

/// Largest `ε ∈ (0, eps_max]` (to [`FIT_TOL`]) with `sup_ratio ≤ cap`, by bisection.
pub fn ad_fit_epsilon(m: &ScaleMatrix, alpha0: f64, alpha1: f64, p: f64, cap: f64, eps_max: f64) -> Result<f64> {
    let d = m.row_grid.d;
    let base = AdParams::new(alpha0, alpha1, p, eps_max, d)?;
    check_dims(m, d)?;
    let table = entry_table(m);
    let ok = |eps: f64| sup_ratio_of(&table, &base.with_epsilon(eps)).sup_ratio <= cap;
    if ok(eps_max) {
        return Ok(eps_max);
    }
    let (mut lo, mut hi) = (0.0, eps_max);
    if !ok(FIT_TOL * 1e-3) {
        return Err(Error::NotAdmissible(format!("no ε > 0 keeps sup_ratio ≤ {cap}")));
    }
    while hi - lo > FIT_TOL * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Deterministic uniform `[0, 1)` value attached to a matrix position.
pub fn entry_uniform(seed: u64, j: u32, xi: usize, k: u32, eta: usize) -> f64 {
    let mut h = FxHasher::default();
    (seed, j, xi, k, eta).hash(&mut h);
    ChaCha8Rng::seed_from_u64(h.finish()).random::<f64>()
}

/// `C1 = sup_x Σ_y |K(x,y)|` and `C2 = sup_y Σ_x |K(x,y)|` (rows indexed by `x`).
pub fn schur_constants(k: &DMatrix<f64>) -> (f64, f64) {
    let c1 = k.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let c2 = k.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    (c1, c2)
}

/// `C1^{1/p} C2^{1/p'}` bounding `T f(y) = Σ_x K(x,y) f(x)` on `ℓ_p`, `1 ≤ p ≤ ∞`.
pub fn schur_bound(k: &DMatrix<f64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Schur bound needs p ≥ 1, got {p}")));
    }
    let (c1, c2) = schur_constants(k);
    Ok(if p == 1.0 {
        c1
    } else if p.is_infinite() {
        c2
    } else {
        c1.powf(1.0 / p) * c2.powf(1.0 - 1.0 / p)
    })
}

fn lp(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `T f = Kᵀ f`.
pub fn kernel_apply(k: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let fv = nalgebra::DVector::from_column_slice(f);
    (k.transpose() * fv).as_slice().to_vec()
}

/// Lower bound for `‖T‖_{ℓp → ℓp}` from spikes, the constant vector, random inputs and,
/// for `p = 2`, power iteration.
pub fn kernel_norm_lower_bound<R: Rng>(k: &DMatrix<f64>, p: f64, trials: usize, rng: &mut R) -> f64 {
    let n = k.nrows();
    let ratio = |f: &[f64]| {
        let nf = lp(f, p);
        if nf == 0.0 {
            0.0
        } else {
            lp(&kernel_apply(k, f), p) / nf
        }
    };
    let mut best: f64 = 0.0;
    for x in 0..n {
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        best = best.max(ratio(&e));
    }
    best = best.max(ratio(&vec![1.0; n]));
    for t in 0..trials {
        let f: Vec<f64> = if t % 2 == 0 {
            (0..n).map(|_| rng.random::<f64>()).collect()
        } else {
            (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
        };
        best = best.max(ratio(&f));
    }
    if p == 2.0 && n > 0 {
        let mut f = vec![1.0; n];
        for _ in 0..100 {
            let g = kernel_apply(k, &f);
            let back: Vec<f64> = (k * nalgebra::DVector::from_column_slice(&g)).as_slice().to_vec();
            let nb = lp(&back, 2.0);
            if nb == 0.0 {
                break;
            }
            f = back.iter().map(|v| v / nb).collect();
        }
        best = best.max(ratio(&f));
    }
    best
}

/// Lower bound for `‖M : b^{α}_{p,q}(∇⁰) → b^{α'}_{p',q'}(∇¹)‖` as the largest ratio over
/// spikes on every column index, row-aligned inputs and `trials` random inputs.
pub fn empirical_operator_norm(m: &ScaleMatrix, from: &BesovParams, to: &BesovParams, trials: usize, seed: u64) -> Result<f64> {
    from.validate()?;
    to.validate()?;
    let col = &m.col_grid;
    let mut inputs: Vec<CoeffSequence> = Vec::new();
    for k in 0..col.n_levels() as u32 {
        for eta in 0..col.level(k as usize).len() {
            inputs.push(CoeffSequence::from_entries([((k, eta), Complex64::new(1.0, 0.0))]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // level-flat magnitude profile: every level carries the same weighted ℓp norm
    let flat = |k: u32| -> f64 {
        let n = col.level(k as usize).len().max(1) as f64;
        from.level_weight(k).recip() * n.powf(-1.0 / from.p)
    };
    let rows: Vec<(u32, usize)> = (0..m.row_grid.n_levels() as u32)
        .flat_map(|j| (0..m.row_grid.level(j as usize).len()).map(move |xi| (j, xi)))
        .collect();
    for t in 0..trials {
        let mut s = CoeffSequence::new();
        match t % 3 {
            0 => {
                for k in 0..col.n_levels() as u32 {
                    for eta in 0..col.level(k as usize).len() {
                        let mag = flat(k) * (1.0 - rng.random::<f64>());
                        let ph = rng.random::<f64>() * std::f64::consts::TAU;
                        s.set(k, eta, Complex64::from_polar(mag, ph));
                    }
                }
            }
            1 => {
                let k = rng.random_range(0..col.n_levels() as u32);
                for eta in 0..col.level(k as usize).len() {
                    s.set(k, eta, Complex64::new(2.0 * rng.random::<f64>() - 1.0, 0.0));
                }
            }
            _ => {
                if rows.is_empty() {
                    continue;
                }
                let (j, xi) = rows[rng.random_range(0..rows.len())];
                for (&(_, k), entries) in m.blocks.range((j, 0)..=(j, u32::MAX)) {
                    for e in entries.iter().filter(|e| e.xi == xi) {
                        let v = e.val;
                        if v.norm() > 0.0 {
                            s.set(k, e.eta, v.conj() / v.norm() * flat(k));
                        }
                    }
                }
            }
        }
        if !s.is_empty() {
            inputs.push(s);
        }
    }
    let ratios: Vec<f64> = inputs
        .par_iter()
        .map(|a| -> Result<f64> {
            let nf = quasi_norm(a, from)?;
            if nf == 0.0 {
                return Ok(0.0);
            }
            Ok(quasi_norm(&apply(m, a)?, to)? / nf)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (best_idx, mut best) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    let diagonal_lp = |b: &BesovParams| b.q == QExp::Finite(b.p);
    if best > 0.0 && from.p == to.p && from.p > 1.0 && diagonal_lp(from) && diagonal_lp(to) {
        best = best.max(boyd_power(m, from, to, &inputs[best_idx])?);
    }
    Ok(best)
}

/// Power iteration for `‖D₁ M D₀⁻¹‖_{ℓp → ℓp}` where `b^α_{p,p}` is `ℓ_p` with level weights
/// `D`; every iterate is a valid lower bound and `p = 2` converges to the exact norm.
fn boyd_power(m: &ScaleMatrix, from: &BesovParams, to: &BesovParams, start: &CoeffSequence) -> Result<f64> {
    let p = from.p;
    let pd = p / (p - 1.0);
    let w_from: Vec<f64> = (0..m.col_grid.n_levels() as u32).map(|k| from.level_weight(k)).collect();
    let w_to: Vec<f64> = (0..m.row_grid.n_levels() as u32).map(|j| to.level_weight(j)).collect();
    let lp_levels = |v: &[Vec<Complex64>]| -> f64 {
        v.iter().flatten().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    };
    // dual map |v|^{r-1} sgn v
    let dual = |v: &mut [Vec<Complex64>], r: f64| {
        for z in v.iter_mut().flatten() {
            let n = z.norm();
            *z = if n > 0.0 { *z * n.powf(r - 2.0) } else { Complex64::default() };
        }
    };
    // x lives in weighted coordinates: a = D₀⁻¹ x
    let mut x = m.dense_input(start)?;
    for (k, lvl) in x.iter_mut().enumerate() {
        for z in lvl.iter_mut() {
            *z *= w_from[k];
        }
    }
    let mut best: f64 = 0.0;
    for _ in 0..60 {
        let nx = lp_levels(&x);
        if nx == 0.0 {
            break;
        }
        let a: Vec<Vec<Complex64>> = x
            .iter()
            .enumerate()
            .map(|(k, l)| l.iter().map(|z| z / (nx * w_from[k])).collect())
            .collect();
        let mut y: Vec<Vec<Complex64>> = m
            .apply_dense(&a)
            .into_iter()
            .enumerate()
            .map(|(j, (lo, up))| lo.iter().zip(&up).map(|(u, v)| (u + v) * w_to[j]).collect())
            .collect();
        let ny = lp_levels(&y);
        if ny <= best * (1.0 + 1e-12) {
            best = best.max(ny);
            break;
        }
        best = ny;
        dual(&mut y, p);
        for (j, lvl) in y.iter_mut().enumerate() {
            for z in lvl.iter_mut() {
                *z *= w_to[j];
            }
        }
        let mut z = m.apply_adjoint_dense(&y);
        for (k, lvl) in z.iter_mut().enumerate() {
            for v in lvl.iter_mut() {
                *v /= w_from[k];
            }
        }
        dual(&mut z, pd);
        x = z;
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TripletJson {
    pub xi: usize,
    pub eta: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlockJson {
    pub j: u32,
    pub k: u32,
    pub entries: Vec<TripletJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub row_grid: GridJson,
    pub col_grid: GridJson,
    pub blocks: Vec<BlockJson>,
}

impl From<&ScaleMatrix> for MatrixJson {
    fn from(m: &ScaleMatrix) -> Self {
        MatrixJson {
            row_grid: GridJson::from(m.row_grid.as_ref()),
            col_grid: GridJson::from(m.col_grid.as_ref()),
            blocks: m
                .blocks
                .iter()
                .map(|(&(j, k), es)| BlockJson {
                    j,
                    k,
                    entries: es
                        .iter()
                        .map(|e| TripletJson {
                            xi: e.xi,
                            eta: e.eta,
                            re: e.val.re,
                            im: e.val.im,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl MatrixJson {
    pub fn into_matrix(self) -> Result<ScaleMatrix> {
        let mut m = ScaleMatrix::zeros(Arc::new(self.row_grid.into_grid()?), Arc::new(self.col_grid.into_grid()?));
        for b in self.blocks {
            for e in b.entries {
                m.set(b.j, e.xi, b.k, e.eta, Complex64::new(e.re, e.im))?;
            }
        }
        Ok(m)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"BKM1";

/// Binary layout: magic, grids as length-prefixed JSON, then per block `j, k, count` and
/// `count` records `(ξ: u64, η: u64, re: f64, im: f64)`, all little-endian.
pub fn write_binary(m: &ScaleMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    for g in [&m.row_grid, &m.col_grid] {
        let text = serde_json::to_vec(&GridJson::from(g.as_ref()))?;
        w.write_all(&(text.len() as u64).to_le_bytes())?;
        w.write_all(&text)?;
    }
    w.write_all(&(m.blocks.len() as u64).to_le_bytes())?;
    for (&(j, k), es) in &m.blocks {
        w.write_all(&j.to_le_bytes())?;
        w.write_all(&k.to_le_bytes())?;
        w.write_all(&(es.len() as u64).to_le_bytes())?;
        for e in es {
            w.write_all(&(e.xi as u64).to_le_bytes())?;
            w.write_all(&(e.eta as u64).to_le_bytes())?;
            w.write_all(&e.val.re.to_le_bytes())?;
            w.write_all(&e.val.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(r: &mut impl Read) -> Result<ScaleMatrix> {
    fn u64_(r: &mut impl Read) -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn u32_(r: &mut impl Read) -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("not a besovkit matrix file".into()));
    }
    let mut grids = Vec::new();
    for _ in 0..2 {
        let len = u64_(r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        grids.push(Arc::new(serde_json::from_slice::<GridJson>(&buf)?.into_grid()?));
    }
    let col = grids.pop().expect("two grids");
    let row = grids.pop().expect("two grids");
    let mut m = ScaleMatrix::zeros(row, col);
    for _ in 0..u64_(r)? {
        let j = u32_(r)?;
        let k = u32_(r)?;
        for _ in 0..u64_(r)? {
            let xi = u64_(r)? as usize;
            let eta = u64_(r)? as usize;
            let re = f64::from_bits(u64_(r)?);
            let im = f64::from_bits(u64_(r)?);
            m.set(j, xi, k, eta, Complex64::new(re, im))?;
        }
    }
    Ok(m)
}
