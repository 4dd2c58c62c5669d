//! Besov-type function spaces defined through wavelet coefficients, Gramians between two
//! wavelet systems, and norm-equivalence experiments.

use crate::admat::{apply, ScaleMatrix};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::geometry::{Decomposition, PatchFunction};
use crate::seq::{admissible_tuple, quasi_norm, sigma_p, BesovParams, CoeffSequence};
use crate::wavelet::transform::{forward, inverse, Arr, Pyramid};
use crate::wavelet::{analyze_many, apply_axis, transfer_kernel, WaveletSystem};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Default slack `ε₀` in the Gramian decay requirement.
pub const DEFAULT_EPS0: f64 = 0.1;

/// Gramian entries below this magnitude are treated as round-off and dropped.
pub const GRAMIAN_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SpaceParams {
    pub basis: WaveletSystem,
    pub prm: BesovParams,
    pub admissible: bool,
}

impl SpaceParams {
    pub fn new(basis: WaveletSystem, prm: BesovParams) -> Result<Self> {
        if prm.d != basis.d() {
            return Err(Error::DomainMismatch(format!("parameters for d = {}, basis on d = {}", prm.d, basis.d())));
        }
        prm.validate()?;
        let admissible = admissible_tuple(prm.alpha, prm.p, prm.q.as_f64(), prm.d, true);
        Ok(Self { basis, prm, admissible })
    }

    fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::NotAdmissible(format!(
                "(α, p, q) = ({}, {}, {}) is not admissible for d = {}",
                self.prm.alpha, self.prm.p, self.prm.q, self.prm.d
            )))
        }
    }
}

/// Truncated quasi-norm of `u` in the space spanned by `sp.basis`, levels `≤ j_max`.
pub fn besov_norm(u: &PatchFunction, sp: &SpaceParams, j_max: u32) -> Result<f64> {
    Ok(besov_norms(u, &[sp], j_max)?[0])
}

/// [`besov_norm`] for several spaces on the same decomposition with one shared projection of `u`.
pub fn besov_norms(u: &PatchFunction, spaces: &[&SpaceParams], j_max: u32) -> Result<Vec<f64>> {
    for sp in spaces {
        sp.require_admissible()?;
    }
    let systems: Vec<&WaveletSystem> = spaces.iter().map(|s| &s.basis).collect();
    let coeffs = analyze_many(u, &systems, j_max)?;
    spaces.iter().zip(&coeffs).map(|(sp, a)| quasi_norm(a, &sp.prm)).collect()
}

fn check_pair(psi: &WaveletSystem, phi: &WaveletSystem, j_max: u32) -> Result<()> {
    if psi.dec.name != phi.dec.name || psi.n_patches() != phi.n_patches() || psi.d() != phi.d() {
        return Err(Error::DomainMismatch(format!(
            "systems live on `{}` and `{}`",
            psi.dec.name, phi.dec.name
        )));
    }
    if j_max > psi.max_level || j_max > phi.max_level {
        return Err(Error::Precondition(format!(
            "level {j_max} above system max levels {} / {}",
            psi.max_level, phi.max_level
        )));
    }
    Ok(())
}

/// Periodized transfer kernel on `n` points.
fn periodic_kernel(psi: &WaveletSystem, phi: &WaveletSystem, n: usize) -> Vec<f64> {
    let (lo, x) = transfer_kernel(&psi.univariate, &phi.univariate);
    let mut out = vec![0.0; n];
    for (i, v) in x.iter().enumerate() {
        out[(lo + i as i64).rem_euclid(n as i64) as usize] += v;
    }
    out
}

/// Gramian `G[(j,ξ),(k,η)] = ⟨ψ_{k,η}, φ̃_{j,ξ}⟩` for levels `≤ j_max`; rows index `phi`, columns `psi`.
///
/// Patches are congruent in parameter space, so one patch's block is computed and replicated.
pub fn gramian(psi: &WaveletSystem, phi: &WaveletSystem, j_max: u32) -> Result<ScaleMatrix> {
    check_pair(psi, phi, j_max)?;
    let d = psi.d();
    let n_levels = j_max as usize + 1;
    let n = 1usize << (j_max + 1);
    let kernel = periodic_kernel(psi, phi, n);
    let uni_psi = psi.univariate.clone();
    let uni_phi = phi.univariate.clone();

    let columns: Vec<(u32, usize)> = (0..=j_max)
        .flat_map(|k| (0..psi.per_patch_len(k)).map(move |c| (k, c)))
        .collect();
    let block: Vec<(u32, usize, u32, usize, f64)> = columns
        .par_iter()
        .flat_map_iter(|&(k, col)| {
            let (_, tag, kflat) = psi.decode(k, col).expect("column in range");
            let mut pyr = Pyramid::zeros(d, n_levels);
            pyr.levels[k as usize][tag as usize][kflat] = Complex64::new(psi.weight(k, tag), 0.0);
            let mut top = inverse(&pyr, &uni_psi.primal, &uni_psi.wavelet);
            for axis in 0..d {
                top = top.correlate(axis, 0, &kernel);
            }
            let out = forward(top, n_levels, &uni_phi.dual, &uni_phi.dual_wavelet);
            let mut entries = Vec::new();
            for (j, lvl) in out.levels.iter().enumerate() {
                let j = j as u32;
                for (t, band) in lvl.iter().enumerate() {
                    if band.is_empty() {
                        continue;
                    }
                    let w = phi.weight(j, t as u32);
                    for (kf, v) in band.iter().enumerate() {
                        let val = v.re / w;
                        if val.abs() > GRAMIAN_CUTOFF {
                            entries.push((j, phi.encode(j, 0, t as u32, kf), k, col, val));
                        }
                    }
                }
            }
            entries.into_iter()
        })
        .collect();

    let triplets = (0..psi.n_patches()).flat_map(|p| {
        block.iter().map(move |&(j, row, k, col, v)| {
            (
                j,
                row + p * phi.per_patch_len(j),
                k,
                col + p * psi.per_patch_len(k),
                Complex64::new(v, 0.0),
            )
        })
    });
    ScaleMatrix::from_triplets(phi.grid.clone(), psi.grid.clone(), triplets)
}

/// Coefficients with respect to `phi` of `Σ a_{k,η} ψ_{k,η}`, by `a ↦ G a`.
pub fn change_of_basis(a: &CoeffSequence, g: &ScaleMatrix) -> Result<CoeffSequence> {
    apply(g, a)
}

/// Below this, a symbol value of the periodized transfer kernel counts as zero.
const SINGULAR_SYMBOL: f64 = 1e-9;

/// Exact inverse of the truncated Gramian `gramian(psi, phi, j_max)`, applied without assembling it.
///
/// Fails when the orders of `psi` and `phi` differ in parity: the two scaling functions are then
/// symmetric about points half a cell apart and the alternating mode is lost.
pub fn inverse_change_of_basis(b: &CoeffSequence, psi: &WaveletSystem, phi: &WaveletSystem, j_max: u32) -> Result<CoeffSequence> {
    check_pair(psi, phi, j_max)?;
    let d = psi.d();
    let n = 1usize << (j_max + 1);
    let kernel = periodic_kernel(psi, phi, n);
    let smallest = (0..n)
        .map(|f| {
            let w = 2.0 * std::f64::consts::PI * f as f64 / n as f64;
            kernel.iter().enumerate().map(|(t, x)| Complex64::from_polar(*x, w * t as f64)).sum::<Complex64>().norm()
        })
        .fold(f64::INFINITY, f64::min);
    if smallest < SINGULAR_SYMBOL {
        return Err(Error::Precondition(format!(
            "transfer kernel between {} and {} vanishes at some frequency; the Gramian is singular",
            psi.univariate.label(),
            phi.univariate.label()
        )));
    }
    // Circulant C[m][m'] = X[(m' - m) mod n], the one-axis factor of the middle map.
    let circ = DMatrix::from_fn(n, n, |m, mp| kernel[(mp + n - m) % n]);
    let inv = circ
        .try_inverse()
        .ok_or_else(|| Error::Precondition("transfer kernel is singular at this level".into()))?;
    let inv_rows: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| inv[(r, c)]).collect()).collect();

    // Undo phi's analysis, then psi's synthesis.
    let uni_phi = &phi.univariate;
    let uni_psi = &psi.univariate;
    let pyrs: Vec<Pyramid> = phi
        .to_pyramids(b, j_max)?
        .par_iter()
        .map(|pyr| {
            let mut top = inverse(pyr, &uni_phi.primal, &uni_phi.wavelet);
            for axis in 0..d {
                let (data, shape) = apply_axis(&top.data, &top.shape, axis, &inv_rows);
                top = Arr::from_data(shape, data);
            }
            forward(top, j_max as usize + 1, &uni_psi.dual, &uni_psi.dual_wavelet)
        })
        .collect();
    let a = psi.from_pyramids(&pyrs);
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct GramianDecayReport {
    /// `(ℓ, max |G|)` over blocks with row level minus column level equal to `ℓ`.
    pub offsets: Vec<(i32, f64)>,
    /// Fitted slope of `log₂ max|G|` against `ℓ` for `ℓ > 0`; `-∞` when those blocks vanish.
    pub slope_up: f64,
    /// Fitted slope against `|ℓ|` for `ℓ < 0`.
    pub slope_down: f64,
    pub required_up: f64,
    pub required_down: f64,
    pub ok: bool,
}

fn fit_offsets(pts: &[(i32, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(l, m)| (l.unsigned_abs() as f64, m.log2()))
        .collect();
    match data.len() {
        0 => f64::NEG_INFINITY,
        1 => f64::NAN,
        _ => linear_fit(&data).slope,
    }
}

/// Level-offset decay of a Gramian against the thresholds `d/2 + α + ε₀` (finer rows) and
/// `d/2 - α + ε₀ + σ_τ` (finer columns), `1/τ = α/d + 1/2`.
pub fn gramian_decay_check(g: &ScaleMatrix, psi: &WaveletSystem, phi: &WaveletSystem, alpha: f64, eps0: f64) -> Result<GramianDecayReport> {
    if psi.d() != phi.d() {
        return Err(Error::DomainMismatch("systems of different dimension".into()));
    }
    let d = psi.d() as f64;
    let mut per: BTreeMap<i32, f64> = BTreeMap::new();
    for (&(j, k), entries) in g.blocks() {
        let l = j as i32 - k as i32;
        let m = entries.iter().map(|e| e.val.norm()).fold(0.0, f64::max);
        let slot = per.entry(l).or_insert(0.0);
        *slot = slot.max(m);
    }
    let offsets: Vec<(i32, f64)> = per.into_iter().collect();
    let up: Vec<(i32, f64)> = offsets.iter().copied().filter(|(l, _)| *l > 0).collect();
    let down: Vec<(i32, f64)> = offsets.iter().copied().filter(|(l, _)| *l < 0).collect();
    let tau_inv = alpha / d + 0.5;
    let sigma_tau = sigma_p(1.0 / tau_inv, psi.d());
    let required_up = -(d / 2.0 + alpha + eps0);
    let required_down = -(d / 2.0 - alpha + eps0 + sigma_tau);
    let slope_up = fit_offsets(&up);
    let slope_down = fit_offsets(&down);
    // NaN (single offset) cannot certify decay and fails the comparison.
    let ok = slope_up <= required_up && slope_down <= required_down;
    Ok(GramianDecayReport {
        offsets,
        slope_up,
        slope_down,
        required_up,
        required_down,
        ok,
    })
}

/// `min{D^Φ, γ̃^Φ, D̃^Ψ, γ^Ψ}`, using catalog values for the dual regularities.
pub fn decay_exponent(psi: &WaveletSystem, phi: &WaveletSystem) -> Option<f64> {
    let gt = phi.univariate.gamma_dual?;
    Some(
        (phi.univariate.order as f64)
            .min(gt)
            .min(psi.univariate.dual_order as f64)
            .min(psi.univariate.gamma),
    )
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub labels: Vec<String>,
    /// `(J, ratios per corpus function)`.
    pub ratios: Vec<(u32, Vec<f64>)>,
    /// `(J, min, max)` over the corpus.
    pub bands: Vec<(u32, f64, f64)>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Ratios `besov_norm(u, Ψ) / besov_norm(u, Φ)` over a corpus and a range of truncation levels.
pub fn equivalence_ratio(
    corpus: &[(String, PatchFunction)],
    psi: &WaveletSystem,
    phi: &WaveletSystem,
    prm: &BesovParams,
    levels: &[u32],
) -> Result<EquivalenceReport> {
    if corpus.is_empty() || levels.is_empty() {
        return Err(Error::Empty("corpus and level list must be nonempty".into()));
    }
    let jmax = *levels.iter().max().expect("nonempty");
    check_pair(psi, phi, jmax)?;
    let sp_psi = SpaceParams::new(psi.clone(), *prm)?;
    let sp_phi = SpaceParams::new(phi.clone(), *prm)?;
    sp_psi.require_admissible()?;
    let mut ratios = Vec::new();
    let mut bands = Vec::new();
    for &j in levels {
        let mut row = Vec::with_capacity(corpus.len());
        for (_, u) in corpus {
            let v = besov_norms(u, &[&sp_psi, &sp_phi], j)?;
            row.push(if v[1] == 0.0 && v[0] == 0.0 { 1.0 } else { v[0] / v[1] });
        }
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        bands.push((j, lo, hi));
        ratios.push((j, row));
    }
    Ok(EquivalenceReport {
        labels: corpus.iter().map(|(l, _)| l.clone()).collect(),
        min_ratio: bands.iter().map(|b| b.1).fold(f64::INFINITY, f64::min),
        max_ratio: bands.iter().map(|b| b.2).fold(f64::NEG_INFINITY, f64::max),
        ratios,
        bands,
    })
}

/// Ten test functions written in ambient coordinates, so they agree across patch interfaces.
pub fn default_corpus(dec: &Decomposition) -> Vec<(String, PatchFunction)> {
    let dec = Arc::new(dec.clone());
    let x0 = dec.patches[0].eval(&vec![0.3; dec.d]);
    let x1 = dec.patches[dec.patches.len() - 1].eval(&vec![0.6; dec.d]);
    let pi = std::f64::consts::PI;
    let make = |name: &str, f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>| {
        let dec = dec.clone();
        (
            name.to_string(),
            PatchFunction::real(dec.d, dec.patches.len(), move |p, x| f(&dec.patches[p].eval(x))),
        )
    };
    let c = |y: &[f64], i: usize| y.get(i).copied().unwrap_or(0.0);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let (xa, xb, xc) = (x0.clone(), x0, x1);
    vec![
        make("constant", Arc::new(|_| 1.0)),
        make("sin", Arc::new(move |y| (2.0 * pi * c(y, 0)).sin())),
        make("cos-product", Arc::new(move |y| (2.0 * pi * c(y, 0)).cos() * (pi * c(y, 1)).cos())),
        make("ramp", Arc::new(move |y| c(y, 0) + 0.5 * c(y, 1) - 0.25 * c(y, 2))),
        make("quadratic", Arc::new(move |y| c(y, 0) * c(y, 0) - c(y, 1) * c(y, 2))),
        make("exp", Arc::new(move |y| (c(y, 0) + c(y, 1) + c(y, 2)).exp())),
        make("high-frequency", Arc::new(move |y| (6.0 * pi * c(y, 0)).sin() * (4.0 * pi * c(y, 1) + 1.0).cos())),
        make("point-singularity-0.5", Arc::new(move |y| dist(y, &xa).powf(0.5))),
        make("point-singularity-0.75", Arc::new(move |y| dist(y, &xc).powf(0.75))),
        make(
            "kink",
            Arc::new(move |y| (c(y, 0) - xb[0] - 0.07).abs() + 0.5 * (c(y, 1) - 0.4 * c(y, 2)).abs()),
        ),
    ]
}
