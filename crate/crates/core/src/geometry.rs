//! Patchwise parametrized manifolds `Γ = ∪ κ_i([0,1]^d)`, interface conformity and the
//! patchwise inner product `Σ_i ⟨f∘κ_i, g∘κ_i⟩_{L2([0,1]^d)}`.

use crate::error::{Error, Result};
use crate::quad::UnitRule;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Ambient tolerance used to decide that two points coincide.
pub const CONFORMITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PatchMap {
    /// `κ(x) = origin + Σ_r x_r · axes[r]`.
    Affine { origin: Vec<f64>, axes: Vec<Vec<f64>> },
    /// Tensor-product Bézier map; control points are stored with the last parameter fastest.
    Bezier {
        degrees: Vec<usize>,
        control: Vec<Vec<f64>>,
    },
    /// Circular arc `t ↦ c + r(cos θ, sin θ)`, `θ = a0 + t(a1 − a0)`.
    Arc {
        center: [f64; 2],
        radius: f64,
        a0: f64,
        a1: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub map: PatchMap,
}

impl Patch {
    pub fn affine(id: usize, origin: Vec<f64>, axes: Vec<Vec<f64>>) -> Self {
        Self {
            id,
            map: PatchMap::Affine { origin, axes },
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.map {
            PatchMap::Affine { axes, .. } => axes.len(),
            PatchMap::Bezier { degrees, .. } => degrees.len(),
            PatchMap::Arc { .. } => 1,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.map {
            PatchMap::Affine { origin, .. } => origin.len(),
            PatchMap::Bezier { control, .. } => control.first().map_or(0, Vec::len),
            PatchMap::Arc { .. } => 2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.map {
            PatchMap::Affine { origin, axes } => {
                let mut y = origin.clone();
                for (xr, ax) in x.iter().zip(axes) {
                    for (yi, ai) in y.iter_mut().zip(ax) {
                        *yi += xr * ai;
                    }
                }
                y
            }
            PatchMap::Bezier { degrees, control } => eval_bezier(degrees, control, x),
            PatchMap::Arc {
                center,
                radius,
                a0,
                a1,
            } => {
                let th = a0 + x[0] * (a1 - a0);
                vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
        }
    }

    /// Jacobian `∂κ/∂x` as `m` rows of length `d`. Exact for affine and arc maps, central
    /// differences otherwise.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match &self.map {
            PatchMap::Affine { origin, axes } => (0..origin.len())
                .map(|i| axes.iter().map(|ax| ax[i]).collect())
                .collect(),
            PatchMap::Arc { radius, a0, a1, .. } => {
                let th = a0 + x[0] * (a1 - a0);
                let s = a1 - a0;
                vec![vec![-radius * th.sin() * s], vec![radius * th.cos() * s]]
            }
            PatchMap::Bezier { .. } => {
                let d = x.len();
                let m = self.ambient_dim();
                let h = 1e-6;
                let mut jac = vec![vec![0.0; d]; m];
                for r in 0..d {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[r] += h;
                    xm[r] -= h;
                    let yp = self.eval(&xp);
                    let ym = self.eval(&xm);
                    for i in 0..m {
                        jac[i][r] = (yp[i] - ym[i]) / (2.0 * h);
                    }
                }
                jac
            }
        }
    }
}

fn bernstein(n: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for k in 1..=n {
        let mut prev = 0.0;
        for i in 0..=k {
            let cur = b[i];
            b[i] = (1.0 - t) * cur + t * prev;
            prev = cur;
        }
    }
    b
}

fn eval_bezier(degrees: &[usize], control: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let m = control.first().map_or(0, Vec::len);
    let basis: Vec<Vec<f64>> = degrees
        .iter()
        .zip(x)
        .map(|(&n, &t)| bernstein(n, t))
        .collect();
    let mut y = vec![0.0; m];
    let d = degrees.len();
    let mut idx = vec![0usize; d];
    for cp in control {
        let w: f64 = idx.iter().enumerate().map(|(r, &i)| basis[r][i]).product();
        for (yi, ci) in y.iter_mut().zip(cp) {
            *yi += w * ci;
        }
        for r in (0..d).rev() {
            idx[r] += 1;
            if idx[r] <= degrees[r] {
                break;
            }
            idx[r] = 0;
        }
    }
    y
}

/// Face `2·axis + side` of `[0,1]^d`, where `side` is the value of the fixed coordinate.
pub fn face_axis_side(face: usize) -> (usize, usize) {
    (face / 2, face % 2)
}

/// Signed coordinate permutation `x'_r = x_{src[r]}` or `1 − x_{src[r]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedPerm {
    pub src: Vec<usize>,
    pub flip: Vec<bool>,
}

impl SignedPerm {
    pub fn identity(d: usize) -> Self {
        Self {
            src: (0..d).collect(),
            flip: vec![false; d],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.src
            .iter()
            .zip(&self.flip)
            .map(|(&s, &f)| if f { 1.0 - x[s] } else { x[s] })
            .collect()
    }

    /// Encoding as signed one-based integers, negative meaning reflected.
    pub fn to_signed(&self) -> Vec<i64> {
        self.src
            .iter()
            .zip(&self.flip)
            .map(|(&s, &f)| if f { -(s as i64 + 1) } else { s as i64 + 1 })
            .collect()
    }

    pub fn from_signed(v: &[i64]) -> Result<Self> {
        let d = v.len();
        let mut src = Vec::with_capacity(d);
        let mut flip = Vec::with_capacity(d);
        for &e in v {
            if e == 0 || e.unsigned_abs() as usize > d {
                return Err(Error::Parse(format!("bad permutation entry {e}")));
            }
            src.push(e.unsigned_abs() as usize - 1);
            flip.push(e < 0);
        }
        let mut seen = src.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != d {
            return Err(Error::Parse("permutation repeats a coordinate".into()));
        }
        Ok(Self { src, flip })
    }

    /// All signed permutations sending face `fi` onto face `fj`.
    fn candidates(d: usize, fi: usize, fj: usize) -> Vec<Self> {
        let (ai, si) = face_axis_side(fi);
        let (aj, sj) = face_axis_side(fj);
        let mut out = Vec::new();
        for perm in permutations(d) {
            if perm[aj] != ai {
                continue;
            }
            for mask in 0..(1usize << d) {
                let flip: Vec<bool> = (0..d).map(|r| mask >> r & 1 == 1).collect();
                if flip[aj] != (si != sj) {
                    continue;
                }
                out.push(Self {
                    src: perm.clone(),
                    flip,
                });
            }
        }
        out
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub i: usize,
    pub j: usize,
    pub face_i: usize,
    pub face_j: usize,
    pub perm: SignedPerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub name: String,
    pub d: usize,
    pub m: usize,
    pub patches: Vec<Patch>,
    pub interfaces: Vec<Interface>,
}

/// Points of face `face` of `[0,1]^d` on a regular sample lattice with `n` points per free axis.
fn face_samples(d: usize, face: usize, n: usize) -> Vec<Vec<f64>> {
    let (axis, side) = face_axis_side(face);
    let free = d - 1;
    let total = n.max(1).pow(free as u32);
    let mut out = Vec::with_capacity(total);
    for lin in 0..total {
        let mut rem = lin;
        let mut x = vec![0.0; d];
        for r in (0..d).rev() {
            if r == axis {
                continue;
            }
            let k = rem % n;
            rem /= n;
            x[r] = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
        }
        x[axis] = side as f64;
        out.push(x);
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceReport {
    pub interface: usize,
    pub max_deviation: f64,
    pub witness: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformityReport {
    pub interfaces: Vec<InterfaceReport>,
    /// Sampled interior points of two different patches that coincide.
    pub overlap_witness: Option<(usize, usize, Vec<f64>)>,
    pub ok: bool,
}

impl Decomposition {
    pub fn new(name: &str, d: usize, m: usize, patches: Vec<Patch>, interfaces: Vec<Interface>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Empty("decomposition without patches".into()));
        }
        for p in &patches {
            if p.param_dim() != d || p.ambient_dim() != m {
                return Err(Error::DomainMismatch(format!(
                    "patch {} has dimensions ({}, {}), expected ({d}, {m})",
                    p.id,
                    p.param_dim(),
                    p.ambient_dim()
                )));
            }
        }
        for itf in &interfaces {
            if itf.i >= patches.len() || itf.j >= patches.len() || itf.face_i >= 2 * d || itf.face_j >= 2 * d {
                return Err(Error::Construction(format!("interface {itf:?} out of range")));
            }
            if itf.perm.src.len() != d {
                return Err(Error::Construction("permutation length differs from d".into()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            d,
            m,
            patches,
            interfaces,
        })
    }

    /// Builds a decomposition and detects shared faces and their permutations by sampling.
    pub fn with_detected_interfaces(name: &str, d: usize, m: usize, patches: Vec<Patch>) -> Result<Self> {
        let n = 5;
        let mut interfaces = Vec::new();
        for i in 0..patches.len() {
            for fi in 0..2 * d {
                let pts_i: Vec<Vec<f64>> = face_samples(d, fi, n);
                let img_i: Vec<Vec<f64>> = pts_i.iter().map(|x| patches[i].eval(x)).collect();
                for j in (i + 1)..patches.len() {
                    for fj in 0..2 * d {
                        for cand in SignedPerm::candidates(d, fi, fj) {
                            let ok = pts_i.iter().zip(&img_i).all(|(x, y)| {
                                dist(y, &patches[j].eval(&cand.apply(x))) <= CONFORMITY_TOL
                            });
                            if ok {
                                interfaces.push(Interface {
                                    i,
                                    j,
                                    face_i: fi,
                                    face_j: fj,
                                    perm: cand,
                                });
                                break;
                            }
                        }
                    }
                }
            }
        }
        Self::new(name, d, m, patches, interfaces)
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Samples `samples` points along each shared face (per free axis) and compares
    /// `κ_i(x)` with `κ_j(π(x))`.
    pub fn conformity_check(&self, samples: usize) -> ConformityReport {
        let mut reports = Vec::with_capacity(self.interfaces.len());
        for (idx, itf) in self.interfaces.iter().enumerate() {
            let mut worst = 0.0;
            let mut witness = Vec::new();
            for x in face_samples(self.d, itf.face_i, samples) {
                let y = self.patches[itf.i].eval(&x);
                let xp = itf.perm.apply(&x);
                let (ax, side) = face_axis_side(itf.face_j);
                let off_face = (xp[ax] - side as f64).abs();
                let dev = dist(&y, &self.patches[itf.j].eval(&xp)).max(off_face);
                if dev > worst || witness.is_empty() {
                    worst = dev;
                    witness = y;
                }
            }
            reports.push(InterfaceReport {
                interface: idx,
                max_deviation: worst,
                witness,
                ok: worst <= CONFORMITY_TOL,
            });
        }
        let overlap_witness = self.overlap_probe(8);
        let ok = reports.iter().all(|r| r.ok) && overlap_witness.is_none();
        ConformityReport {
            interfaces: reports,
            overlap_witness,
            ok,
        }
    }

    /// Looks for coinciding interior sample points of distinct patches.
    fn overlap_probe(&self, n: usize) -> Option<(usize, usize, Vec<f64>)> {
        let cell = 1e-6;
        let mut buckets: HashMap<Vec<i64>, Vec<(usize, Vec<f64>)>> = HashMap::new();
        let total = n.pow(self.d as u32);
        for (pi, p) in self.patches.iter().enumerate() {
            for lin in 0..total {
                let mut rem = lin;
                let mut x = vec![0.0; self.d];
                for r in (0..self.d).rev() {
                    x[r] = (rem % n) as f64 / n as f64 + 0.5 / n as f64;
                    rem /= n;
                }
                let y = p.eval(&x);
                let key: Vec<i64> = y.iter().map(|v| (v / cell).floor() as i64).collect();
                for nb in neighbor_keys(&key) {
                    if let Some(list) = buckets.get(&nb) {
                        for (pj, yj) in list {
                            if *pj != pi && dist(yj, &y) <= CONFORMITY_TOL {
                                return Some((*pj, pi, y));
                            }
                        }
                    }
                }
                buckets.entry(key).or_default().push((pi, y));
            }
        }
        None
    }

    pub fn is_conforming(&self) -> bool {
        self.conformity_check(64).ok
    }
}

pub(crate) fn neighbor_keys(key: &[i64]) -> Vec<Vec<i64>> {
    let m = key.len();
    let mut out = Vec::with_capacity(3usize.pow(m as u32));
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let mut k = key.to_vec();
        for v in k.iter_mut() {
            *v += (c % 3) as i64 - 1;
            c /= 3;
        }
        out.push(k);
    }
    out
}

/// Boundary faces of a union of axis-aligned unit cubes in `R^3`, one affine patch per face.
fn unit_cube_union_surface(cells: &[[i64; 3]]) -> Vec<Patch> {
    let inside = |c: [i64; 3]| cells.contains(&c);
    let mut patches = Vec::new();
    for &c in cells {
        for axis in 0..3 {
            for side in 0..2i64 {
                let mut nb = c;
                nb[axis] += 2 * side - 1;
                if inside(nb) {
                    continue;
                }
                let mut origin: Vec<f64> = c.iter().map(|&v| v as f64).collect();
                origin[axis] += side as f64;
                let axes: Vec<Vec<f64>> = (0..3)
                    .filter(|&a| a != axis)
                    .map(|a| {
                        let mut e = vec![0.0; 3];
                        e[a] = 1.0;
                        e
                    })
                    .collect();
                let id = patches.len();
                patches.push(Patch::affine(id, origin, axes));
            }
        }
    }
    patches
}

/// Catalog: `interval`, `square2`, `cube-surface`, `fichera-surface`, `arc`.
pub fn builtin_manifold(name: &str) -> Result<Decomposition> {
    match name {
        "interval" => Decomposition::new(
            name,
            1,
            1,
            vec![Patch::affine(0, vec![0.0], vec![vec![1.0]])],
            vec![],
        ),
        "arc" => Decomposition::new(
            name,
            1,
            2,
            vec![Patch {
                id: 0,
                map: PatchMap::Arc {
                    center: [0.0, 0.0],
                    radius: 1.0,
                    a0: 0.0,
                    a1: std::f64::consts::FRAC_PI_2,
                },
            }],
            vec![],
        ),
        "square2" => Decomposition::with_detected_interfaces(
            name,
            2,
            2,
            vec![
                Patch::affine(0, vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                Patch::affine(1, vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        ),
        "cube-surface" => {
            Decomposition::with_detected_interfaces(name, 2, 3, unit_cube_union_surface(&[[0, 0, 0]]))
        }
        "fichera-surface" => {
            let mut cells = Vec::new();
            for x in [-1, 0] {
                for y in [-1, 0] {
                    for z in [-1, 0] {
                        if [x, y, z] != [0, 0, 0] {
                            cells.push([x, y, z]);
                        }
                    }
                }
            }
            Decomposition::with_detected_interfaces(name, 2, 3, unit_cube_union_surface(&cells))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

pub const BUILTIN_NAMES: [&str; 5] = ["interval", "arc", "square2", "cube-surface", "fichera-surface"];

type PatchFn = dyn Fn(usize, &[f64]) -> Complex64 + Send + Sync;

/// A function on `Γ` given through its patch representations `f∘κ_i`.
#[derive(Clone)]
pub struct PatchFunction {
    pub d: usize,
    pub n_patches: usize,
    f: Arc<PatchFn>,
}

impl std::fmt::Debug for PatchFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PatchFunction")
            .field("d", &self.d)
            .field("n_patches", &self.n_patches)
            .finish()
    }
}

impl PatchFunction {
    pub fn new(d: usize, n_patches: usize, f: impl Fn(usize, &[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            d,
            n_patches,
            f: Arc::new(f),
        }
    }

    pub fn real(d: usize, n_patches: usize, f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(d, n_patches, move |i, x| Complex64::new(f(i, x), 0.0))
    }

    pub fn constant(d: usize, n_patches: usize, c: Complex64) -> Self {
        Self::new(d, n_patches, move |_, _| c)
    }

    pub fn zero(d: usize, n_patches: usize) -> Self {
        Self::constant(d, n_patches, Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, patch: usize, x: &[f64]) -> Complex64 {
        (self.f)(patch, x)
    }

    /// Values at the tensor Gauss–Legendre nodes of the given order on every patch.
    pub fn sample(&self, order: usize) -> SampledPatchFunction {
        let rule = UnitRule::new(order);
        let nodes = rule.tensor(self.d);
        let values = (0..self.n_patches)
            .map(|i| nodes.iter().map(|(x, _)| self.eval(i, x)).collect())
            .collect();
        SampledPatchFunction {
            d: self.d,
            order,
            values,
        }
    }
}

/// Samples of `f∘κ_i` on tensor Gauss–Legendre nodes of a declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPatchFunction {
    pub d: usize,
    pub order: usize,
    pub values: Vec<Vec<Complex64>>,
}

impl SampledPatchFunction {
    /// Patchwise inner product of two sample sets of equal order.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.order != other.order || self.d != other.d || self.values.len() != other.values.len() {
            return Err(Error::DomainMismatch("sample layouts differ".into()));
        }
        let rule = UnitRule::new(self.order);
        let w: Vec<f64> = rule.tensor(self.d).into_iter().map(|p| p.1).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            for ((fa, gb), wi) in a.iter().zip(b).zip(&w) {
                acc += fa * gb.conj() * wi;
            }
        }
        Ok(acc)
    }
}

/// `f ∘ κ_i` on every patch for a function given in ambient coordinates.
pub fn pullback(f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static, dec: &Decomposition) -> PatchFunction {
    let patches = dec.patches.clone();
    PatchFunction::new(dec.d, dec.n_patches(), move |i, x| f(&patches[i].eval(x)))
}

/// Ambient location `κ_i(x)` together with the value of a patch function there.
pub fn pushforward(u: &PatchFunction, dec: &Decomposition, patch: usize, x: &[f64]) -> (Vec<f64>, Complex64) {
    (dec.patches[patch].eval(x), u.eval(patch, x))
}

/// Default quadrature order per axis at a given refinement level.
pub fn default_quad_order(level: usize) -> usize {
    (12usize >> level.min(8)).max(4)
}

/// `Σ_i ∫_{[0,1]^d} f(κ_i x) conj(g(κ_i x)) dx` by tensor Gauss–Legendre of the given order.
pub fn inner_product(f: &PatchFunction, g: &PatchFunction, dec: &Decomposition, order: usize) -> Result<Complex64> {
    inner_product_composite(f, g, dec, order, 0)
}

/// Composite variant splitting each patch into `2^{level·d}` congruent cells.
pub fn inner_product_composite(
    f: &PatchFunction,
    g: &PatchFunction,
    dec: &Decomposition,
    order: usize,
    level: usize,
) -> Result<Complex64> {
    if f.d != dec.d || g.d != dec.d || f.n_patches != dec.n_patches() || g.n_patches != dec.n_patches() {
        return Err(Error::DomainMismatch("function and decomposition disagree".into()));
    }
    let rule = UnitRule::new(order).tensor(dec.d);
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let cells = n.pow(dec.d as u32);
    let vol = h.powi(dec.d as i32);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut x = vec![0.0; dec.d];
    for i in 0..dec.n_patches() {
        for c in 0..cells {
            let mut rem = c;
            let mut lo = vec![0.0; dec.d];
            for r in (0..dec.d).rev() {
                lo[r] = (rem % n) as f64 * h;
                rem /= n;
            }
            for (node, w) in &rule {
                for r in 0..dec.d {
                    x[r] = lo[r] + h * node[r];
                }
                acc += f.eval(i, &x) * g.eval(i, &x).conj() * (w * vol);
            }
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PatchJson {
    pub id: usize,
    pub kind: String,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InterfaceJson {
    pub i: usize,
    pub j: usize,
    pub face_i: usize,
    pub face_j: usize,
    pub perm: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifoldJson {
    pub d: usize,
    pub m: usize,
    pub patches: Vec<PatchJson>,
    pub interfaces: Vec<InterfaceJson>,
}

impl From<&Decomposition> for ManifoldJson {
    fn from(dec: &Decomposition) -> Self {
        let patches = dec
            .patches
            .iter()
            .map(|p| match &p.map {
                PatchMap::Affine { origin, axes } => PatchJson {
                    id: p.id,
                    kind: "affine".into(),
                    coeffs: origin.iter().chain(axes.iter().flatten()).copied().collect(),
                },
                PatchMap::Bezier { degrees, control } => PatchJson {
                    id: p.id,
                    kind: "bezier".into(),
                    coeffs: degrees
                        .iter()
                        .map(|&n| n as f64)
                        .chain(control.iter().flatten().copied())
                        .collect(),
                },
                PatchMap::Arc {
                    center,
                    radius,
                    a0,
                    a1,
                } => PatchJson {
                    id: p.id,
                    kind: "arc".into(),
                    coeffs: vec![center[0], center[1], *radius, *a0, *a1],
                },
            })
            .collect();
        let interfaces = dec
            .interfaces
            .iter()
            .map(|itf| InterfaceJson {
                i: itf.i,
                j: itf.j,
                face_i: itf.face_i,
                face_j: itf.face_j,
                perm: itf.perm.to_signed(),
            })
            .collect();
        ManifoldJson {
            d: dec.d,
            m: dec.m,
            patches,
            interfaces,
        }
    }
}

impl ManifoldJson {
    pub fn into_decomposition(self, name: &str) -> Result<Decomposition> {
        let (d, m) = (self.d, self.m);
        let patches = self
            .patches
            .into_iter()
            .map(|p| {
                let map = match p.kind.as_str() {
                    "affine" => {
                        if p.coeffs.len() != m * (d + 1) {
                            return Err(Error::Parse(format!("affine patch {} needs {} coeffs", p.id, m * (d + 1))));
                        }
                        PatchMap::Affine {
                            origin: p.coeffs[..m].to_vec(),
                            axes: p.coeffs[m..].chunks(m).map(<[f64]>::to_vec).collect(),
                        }
                    }
                    "bezier" => {
                        if p.coeffs.len() < d {
                            return Err(Error::Parse("bezier patch lacks degrees".into()));
                        }
                        let degrees: Vec<usize> = p.coeffs[..d].iter().map(|&v| v as usize).collect();
                        let count: usize = degrees.iter().map(|n| n + 1).product();
                        if p.coeffs.len() != d + count * m {
                            return Err(Error::Parse(format!("bezier patch {} has wrong control count", p.id)));
                        }
                        PatchMap::Bezier {
                            degrees,
                            control: p.coeffs[d..].chunks(m).map(<[f64]>::to_vec).collect(),
                        }
                    }
                    "arc" => {
                        if p.coeffs.len() != 5 {
                            return Err(Error::Parse("arc patch needs 5 coeffs".into()));
                        }
                        PatchMap::Arc {
                            center: [p.coeffs[0], p.coeffs[1]],
                            radius: p.coeffs[2],
                            a0: p.coeffs[3],
                            a1: p.coeffs[4],
                        }
                    }
                    other => return Err(Error::UnknownName(other.to_string())),
                };
                Ok(Patch { id: p.id, map })
            })
            .collect::<Result<Vec<_>>>()?;
        let interfaces = self
            .interfaces
            .into_iter()
            .map(|i| {
                Ok(Interface {
                    i: i.i,
                    j: i.j,
                    face_i: i.face_i,
                    face_j: i.face_j,
                    perm: SignedPerm::from_signed(&i.perm)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Decomposition::new(name, d, m, patches, interfaces)
    }
}
