//! Sequence spaces `b^α_{p,q}(∇)`: quasi-norms, `σ_p`, the adaptivity scale, admissibility,
//! the embedding characterization and the sequences witnessing its sharpness.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fine index `q ∈ (0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QExp {
    Finite(f64),
    Inf,
}

impl QExp {
    pub fn from_f64(q: f64) -> Self {
        if q.is_infinite() {
            QExp::Inf
        } else {
            QExp::Finite(q)
        }
    }

    /// `1/q`, zero for `q = ∞`.
    pub fn recip(self) -> f64 {
        match self {
            QExp::Finite(q) => 1.0 / q,
            QExp::Inf => 0.0,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            QExp::Finite(q) => q,
            QExp::Inf => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for QExp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QExp::Finite(q) => write!(f, "{q}"),
            QExp::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovParams {
    pub alpha: f64,
    pub p: f64,
    pub q: QExp,
    pub d: usize,
}

impl BesovParams {
    pub fn new(alpha: f64, p: f64, q: f64, d: usize) -> Result<Self> {
        let prm = Self {
            alpha,
            p,
            q: QExp::from_f64(q),
            d,
        };
        prm.validate()?;
        Ok(prm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || self.p.is_infinite() {
            return Err(Error::InvalidParameter(format!("p must lie in (0, ∞), got {}", self.p)));
        }
        if let QExp::Finite(q) = self.q {
            if !(q > 0.0) {
                return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
            }
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        Ok(())
    }

    /// Exponent `α + d(1/2 − 1/p)` of the level weight `2^{j(·)}`.
    pub fn level_exponent(&self) -> f64 {
        self.alpha + self.d as f64 * (0.5 - 1.0 / self.p)
    }

    pub fn level_weight(&self, j: u32) -> f64 {
        2f64.powf(j as f64 * self.level_exponent())
    }

    /// Parses `alpha,p,q` with `q` possibly `inf`.
    pub fn parse_triple(s: &str, d: usize) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected alpha,p,q, got `{s}`")));
        }
        let num = |t: &str| -> Result<f64> {
            match t {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                _ => t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))),
            }
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?, d)
    }
}

/// Sparse complex sequence indexed by `(level, index within level)`; absent keys are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoeffSequence {
    pub grid_ref: String,
    entries: BTreeMap<(u32, usize), Complex64>,
}

impl CoeffSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_grid_ref(grid_ref: &str) -> Self {
        Self {
            grid_ref: grid_ref.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ((u32, usize), Complex64)>) -> Self {
        let mut s = Self::new();
        for (k, v) in entries {
            s.add(k.0, k.1, v);
        }
        s
    }

    pub fn set(&mut self, j: u32, xi: usize, v: Complex64) {
        if v == Complex64::new(0.0, 0.0) {
            self.entries.remove(&(j, xi));
        } else {
            self.entries.insert((j, xi), v);
        }
    }

    pub fn add(&mut self, j: u32, xi: usize, v: Complex64) {
        let cur = self.get(j, xi);
        self.set(j, xi, cur + v);
    }

    pub fn get(&self, j: u32, xi: usize) -> Complex64 {
        self.entries.get(&(j, xi)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, usize), &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_level(&self) -> Option<u32> {
        self.entries.keys().map(|k| k.0).max()
    }

    /// Magnitudes grouped by level.
    pub fn level_magnitudes(&self) -> BTreeMap<u32, Vec<f64>> {
        let mut out: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (&(j, _), v) in &self.entries {
            out.entry(j).or_default().push(v.norm());
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_entries(self.entries.iter().map(|(&k, &v)| (k, v * c)))
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for (&(j, xi), &v) in &other.entries {
            s.add(j, xi, v);
        }
        s
    }

    /// Entries up to and including level `max_level`.
    pub fn truncated(&self, max_level: u32) -> Self {
        Self {
            grid_ref: self.grid_ref.clone(),
            entries: self.entries.iter().filter(|(k, _)| k.0 <= max_level).map(|(&k, &v)| (k, v)).collect(),
        }
    }

    /// Plain `ℓ_r` (quasi-)norm of all entries.
    pub fn lr_norm(&self, r: f64) -> f64 {
        let mags: Vec<f64> = self.entries.values().map(|v| v.norm()).collect();
        lp_sorted(&mags, r)
    }
}

/// `(Σ|v|^p)^{1/p}` accumulated in descending magnitude order with max-scaling.
fn lp_sorted(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let m = v[0];
    let s: f64 = v.iter().map(|x| (x / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

fn lq_or_sup(values: &[f64], q: QExp) -> f64 {
    match q {
        QExp::Inf => values.iter().copied().fold(0.0, f64::max),
        QExp::Finite(q) => lp_sorted(values, q),
    }
}

/// `σ_p = d·max{1/p − 1, 0}`.
pub fn sigma_p(p: f64, d: usize) -> f64 {
    d as f64 * (1.0 / p - 1.0).max(0.0)
}

/// `τ = (α_τ/d + 1/2)^{-1}`.
pub fn adaptivity(alpha_tau: f64, d: usize) -> Result<f64> {
    if alpha_tau < 0.0 || d == 0 {
        return Err(Error::InvalidParameter(format!("need α_τ ≥ 0 and d ≥ 1, got {alpha_tau}, {d}")));
    }
    Ok(1.0 / (alpha_tau / d as f64 + 0.5))
}

/// Inverse of [`adaptivity`]: `α_τ = d(1/τ − 1/2)`.
pub fn adaptivity_inverse(tau: f64, d: usize) -> Result<f64> {
    if !(tau > 0.0 && tau <= 2.0) {
        return Err(Error::InvalidParameter(format!("τ must lie in (0, 2], got {tau}")));
    }
    Ok(d as f64 * (1.0 / tau - 0.5))
}

/// `‖a | b^α_{p,q}‖ = ‖(2^{j(α+d[1/2−1/p])} ‖(a_{(j,ξ)})_ξ‖_{ℓp})_j‖_{ℓq}`.
pub fn quasi_norm(a: &CoeffSequence, prm: &BesovParams) -> Result<f64> {
    prm.validate()?;
    let levels: Vec<f64> = a
        .level_magnitudes()
        .into_iter()
        .map(|(j, mags)| prm.level_weight(j) * lp_sorted(&mags, prm.p))
        .collect();
    Ok(lq_or_sup(&levels, prm.q))
}

/// Comparison tolerance for the equality branches of the embedding and admissibility tests.
const EQ_TOL: f64 = 1e-12;

/// Whether `b^{α+γ}_{p0,q0} ⊂ b^α_{p1,q1}`, with `γ = from.alpha − to.alpha`.
pub fn embedding_exists(from: &BesovParams, to: &BesovParams, bounded: bool) -> Result<bool> {
    from.validate()?;
    to.validate()?;
    if from.d != to.d {
        return Err(Error::DomainMismatch("embedding between different dimensions".into()));
    }
    let gamma = from.alpha - to.alpha;
    let thr = embedding_threshold(from.p, to.p, from.d);
    let ok = if gamma > thr + EQ_TOL {
        true
    } else if (gamma - thr).abs() <= EQ_TOL {
        from.q.as_f64() <= to.q.as_f64()
    } else {
        false
    };
    Ok(ok && (bounded || from.p <= to.p))
}

/// `d·max{0, 1/p0 − 1/p1}`.
pub fn embedding_threshold(p0: f64, p1: f64, d: usize) -> f64 {
    d as f64 * (1.0 / p0 - 1.0 / p1).max(0.0)
}

/// Admissibility of `(α, p, q)`: the space embeds into `ℓ_2`.
pub fn admissible_tuple(alpha: f64, p: f64, q: f64, d: usize, bounded: bool) -> bool {
    if !(p > 0.0) || !(q > 0.0) {
        return false;
    }
    let p_ok = if bounded { p.is_finite() } else { p <= 2.0 };
    let thr = d as f64 * (1.0 / p - 0.5).max(0.0);
    p_ok && (alpha > thr + EQ_TOL || ((alpha - thr).abs() <= EQ_TOL && q <= 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardyDirection {
    Below,
    Above,
}

/// `‖([Σ_{k<j} 2^{−δ(j−k)r}|x_k|^r]^{1/r})_j‖_{ℓq}` (`Below`) or the `k ≥ j` variant with
/// weights `2^{δ(j−k)r}` (`Above`).
pub fn hardy_sums(x: &[f64], delta: f64, r: f64, q: QExp, dir: HardyDirection) -> Result<f64> {
    if !(delta > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidParameter("need δ > 0 and r > 0".into()));
    }
    let n = x.len();
    let terms: Vec<f64> = match dir {
        HardyDirection::Below => {
            // beyond the support the terms decay like 2^{-δ j}; stop once below 2^{-64}
            let extra = ((64.0 / delta).ceil() as usize).min(4096);
            (0..n + extra)
                .map(|j| {
                    let s: f64 = (0..j.min(n))
                        .map(|k| 2f64.powf(-delta * (j - k) as f64 * r) * x[k].abs().powf(r))
                        .sum();
                    s.powf(1.0 / r)
                })
                .collect()
        }
        HardyDirection::Above => (0..n)
            .map(|j| {
                let s: f64 = (j..n)
                    .map(|k| 2f64.powf(delta * (j as f64 - k as f64) * r) * x[k].abs().powf(r))
                    .sum();
                s.powf(1.0 / r)
            })
            .collect(),
    };
    Ok(lq_or_sup(&terms, q))
}

/// Plain `ℓ_q` norm of a finite real sequence.
pub fn lq_norm(x: &[f64], q: QExp) -> f64 {
    lq_or_sup(x, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    /// `γ < 0`: constant value `2^{−j(d/2+α+γ/2)}` on all `2^{dj}` indices of level `j`.
    NegativeGamma,
    /// `0 ≤ γ < d(1/p0 − 1/p1)`: one spike `2^{−j(α+γ+d[1/2−1/p0])}(1+j)^{−2/q0}` per level.
    GammaBoundary,
    /// Unbounded grids with `p0 > p1`: `x_λ = (1+λ)^{−1/p1}` on `2^{dJ}` indices of level 0.
    UnboundedP,
}

/// Truncation to levels `0..=max_level` of the sequence witnessing that
/// `b^{α+γ}_{p0,q0} ⊄ b^α_{p1,q1}`.
pub fn counterexample_sequence(kind: Counterexample, from: &BesovParams, to: &BesovParams, max_level: u32) -> Result<CoeffSequence> {
    from.validate()?;
    to.validate()?;
    let d = from.d as f64;
    let alpha = to.alpha;
    let gamma = from.alpha - to.alpha;
    let mut s = CoeffSequence::with_grid_ref("synthetic");
    match kind {
        Counterexample::NegativeGamma => {
            let total: u64 = (0..=max_level).map(|j| 1u64 << (from.d as u32 * j)).sum();
            if total > 1 << 26 {
                return Err(Error::InvalidParameter("counterexample too large to materialize".into()));
            }
            for j in 0..=max_level {
                let v = 2f64.powf(-(j as f64) * (d / 2.0 + alpha + gamma / 2.0));
                for xi in 0..(1usize << (from.d as u32 * j)) {
                    s.set(j, xi, Complex64::new(v, 0.0));
                }
            }
        }
        Counterexample::GammaBoundary => {
            let e = alpha + gamma + d * (0.5 - 1.0 / from.p);
            let qexp = 2.0 * from.q.recip();
            for j in 0..=max_level {
                let v = 2f64.powf(-(j as f64) * e) * (1.0 + j as f64).powf(-qexp);
                s.set(j, 0, Complex64::new(v, 0.0));
            }
        }
        Counterexample::UnboundedP => {
            let n = 1usize << (from.d as u32 * max_level).min(26);
            for xi in 0..n {
                s.set(0, xi, Complex64::new((1.0 + xi as f64).powf(-1.0 / to.p), 0.0));
            }
        }
    }
    Ok(s)
}

/// Random sparse sequence on a grid with `2^{dj}` indices per level: each index is filled with
/// probability `fill`, values complex with magnitudes in `(0, 1]` scaled by `scale(j)`.
pub fn random_sparse<R: Rng>(rng: &mut R, max_level: u32, d: usize, fill: f64, scale: impl Fn(u32) -> f64) -> CoeffSequence {
    let mut s = CoeffSequence::with_grid_ref("synthetic");
    for j in 0..=max_level {
        let n = 1usize << (d as u32 * j);
        let sc = scale(j);
        for xi in 0..n {
            if rng.random::<f64>() < fill {
                let mag = 1.0 - rng.random::<f64>();
                let ph = rng.random::<f64>() * std::f64::consts::TAU;
                s.set(j, xi, Complex64::from_polar(mag * sc, ph));
            }
        }
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntryJson {
    pub j: u32,
    pub xi_index: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceJson {
    pub grid_ref: String,
    pub entries: Vec<EntryJson>,
}

impl From<&CoeffSequence> for SequenceJson {
    fn from(s: &CoeffSequence) -> Self {
        SequenceJson {
            grid_ref: s.grid_ref.clone(),
            entries: s
                .iter()
                .map(|(&(j, xi), v)| EntryJson {
                    j,
                    xi_index: xi,
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
    }
}

impl From<SequenceJson> for CoeffSequence {
    fn from(js: SequenceJson) -> Self {
        let mut s = CoeffSequence::with_grid_ref(&js.grid_ref);
        for e in js.entries {
            s.add(e.j, e.xi_index, Complex64::new(e.re, e.im));
        }
        s
    }
}
