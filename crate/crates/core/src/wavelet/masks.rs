//! Univariate biorthogonal spline masks, refinable-function moments and autocorrelations.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Finitely supported sequence `(a_n)_{n=lo}^{lo+len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub lo: i64,
    pub coeffs: Vec<f64>,
}

impl Mask {
    pub fn new(lo: i64, coeffs: Vec<f64>) -> Self {
        Self { lo, coeffs }
    }

    /// Last index with a stored coefficient.
    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> f64 {
        if n < self.lo || n > self.hi() {
            0.0
        } else {
            self.coeffs[(n - self.lo) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, &c)| (self.lo + i as i64, c))
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    fn convolve(&self, other: &Mask) -> Mask {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (k, b) in other.coeffs.iter().enumerate() {
                out[i + k] += a * b;
            }
        }
        Mask::new(self.lo + other.lo, out)
    }

    fn scaled(&self, s: f64) -> Mask {
        Mask::new(self.lo, self.coeffs.iter().map(|c| c * s).collect())
    }

    fn plus(&self, other: &Mask) -> Mask {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        Mask::new(lo, (lo..=hi).map(|n| self.get(n) + other.get(n)).collect())
    }

    /// Drops leading and trailing entries below `tol` in magnitude.
    fn trimmed(&self, tol: f64) -> Mask {
        let first = self.coeffs.iter().position(|c| c.abs() > tol).unwrap_or(0);
        let last = self.coeffs.iter().rposition(|c| c.abs() > tol).unwrap_or(0);
        Mask::new(self.lo + first as i64, self.coeffs[first..=last].to_vec())
    }

    /// `(-1)^n m_{1-n}`, the quadrature-mirror partner.
    pub fn mirror(&self) -> Mask {
        let lo = 1 - self.hi();
        let coeffs = (lo..=1 - self.lo)
            .map(|n| if n.rem_euclid(2) == 0 { self.get(1 - n) } else { -self.get(1 - n) })
            .collect();
        Mask::new(lo, coeffs)
    }
}

/// `Σ_n a_n b_{n+2m}`.
pub fn mask_correlation(a: &Mask, b: &Mask, m: i64) -> f64 {
    a.iter().map(|(n, v)| v * b.get(n + 2 * m)).sum()
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cardinal B-spline `N_D` with integer knots `0..=D`, right-continuous.
pub fn bspline(order: usize, x: f64) -> f64 {
    let d = order as f64;
    if !(0.0..d).contains(&x) {
        return 0.0;
    }
    let mut vals: Vec<f64> = (0..order).map(|i| if x >= i as f64 && x < (i + 1) as f64 { 1.0 } else { 0.0 }).collect();
    for k in 2..=order {
        for i in 0..=order - k {
            let fi = i as f64;
            vals[i] = ((x - fi) * vals[i] + (fi + k as f64 - x) * vals[i + 1]) / (k - 1) as f64;
        }
    }
    vals[0]
}

/// Refinement mask of the B-spline of order `order` shifted to start at `-⌊order/2⌋`.
pub fn bspline_mask(order: usize) -> Mask {
    let scale = 0.5f64.powi(order as i32);
    Mask::new(-((order / 2) as i64), (0..=order).map(|k| binom(order, k) * scale).collect())
}

/// Dual mask of exactness order `dual_order` biorthogonal to [`bspline_mask`].
pub fn dual_spline_mask(order: usize, dual_order: usize) -> Mask {
    let k = (order + dual_order) / 2;
    let shift = (dual_order as i64 - order as i64) / 2 + (order / 2) as i64;
    let y = Mask::new(-1, vec![-0.25, 0.5, -0.25]);
    let mut p = Mask::new(0, vec![0.0]);
    let mut y_pow = Mask::new(0, vec![1.0]);
    for n in 0..k {
        p = p.plus(&y_pow.scaled(binom(k - 1 + n, n)));
        y_pow = y_pow.convolve(&y);
    }
    let mut m = Mask::new(-shift, vec![1.0]);
    let half_one = Mask::new(0, vec![0.5, 0.5]);
    for _ in 0..dual_order {
        m = m.convolve(&half_one);
    }
    m.convolve(&p).trimmed(1e-15)
}

/// Cell moments `ν_{c,r} = ∫_0^1 t^r φ(c+t) dt` of the refinable function with mask `a`.
#[derive(Debug, Clone)]
pub struct CellMoments {
    pub lo: i64,
    pub degree: usize,
    /// `nu[c - lo][r]`.
    pub nu: Vec<Vec<f64>>,
}

impl CellMoments {
    pub fn compute(a: &Mask, degree: usize) -> Result<Self> {
        let lo = a.lo;
        let ncell = (a.hi() - a.lo) as usize;
        if ncell == 0 {
            return Err(Error::Construction("mask with a single coefficient".into()));
        }
        let transfer = DMatrix::from_fn(ncell, ncell, |ci, cj| {
            let c = lo + ci as i64;
            let cp = lo + cj as i64;
            a.get(2 * c - cp) + a.get(2 * c - cp + 1)
        });
        let mut nu = vec![vec![0.0; degree + 1]; ncell];

        // r = 0: fixed point of the transfer matrix normalized to unit integral.
        let mut sys = DMatrix::zeros(ncell + 1, ncell);
        for i in 0..ncell {
            for k in 0..ncell {
                sys[(i, k)] = if i == k { 1.0 } else { 0.0 } - transfer[(i, k)];
            }
            sys[(ncell, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(ncell + 1);
        rhs[ncell] = 1.0;
        let nu0 = sys
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::Construction(format!("cell moment solve: {e}")))?;
        let resid = (&sys * &nu0 - &rhs).amax();
        if resid > 1e-10 {
            return Err(Error::Construction(format!("zeroth cell moments inconsistent (residual {resid:.3e})")));
        }
        for (c, v) in nu0.iter().enumerate() {
            nu[c][0] = *v;
        }

        for r in 1..=degree {
            let mut lhs = transfer.scale(-1.0);
            for i in 0..ncell {
                lhs[(i, i)] += 2f64.powi(r as i32);
            }
            let rhs = DVector::from_fn(ncell, |ci, _| {
                let c = lo + ci as i64;
                (0..ncell)
                    .map(|cj| {
                        let w = a.get(2 * c - (lo + cj as i64) + 1);
                        if w == 0.0 {
                            return 0.0;
                        }
                        w * (0..r).map(|i| binom(r, i) * nu[cj][i]).sum::<f64>()
                    })
                    .sum()
            });
            let sol = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Construction(format!("singular cell moment system at degree {r}")))?;
            for (c, v) in sol.iter().enumerate() {
                nu[c][r] = *v;
            }
        }
        Ok(Self { lo, degree, nu })
    }

    pub fn n_cells(&self) -> usize {
        self.nu.len()
    }

    pub fn get(&self, c: i64, r: usize) -> f64 {
        let i = c - self.lo;
        if i < 0 || i as usize >= self.nu.len() || r > self.degree {
            0.0
        } else {
            self.nu[i as usize][r]
        }
    }

    /// `∫ φ(x) (x + shift)^r dx` assembled from the cells.
    pub fn shifted_moment(&self, shift: f64, r: usize) -> f64 {
        (0..self.n_cells())
            .map(|ci| {
                let base = (self.lo + ci as i64) as f64 + shift;
                (0..=r).map(|i| binom(r, i) * base.powi((r - i) as i32) * self.nu[ci][i]).sum::<f64>()
            })
            .sum()
    }
}

/// Full moments `∫ x^r φ(x) dx`, `r ≤ rmax`, from the refinement equation alone.
pub fn moments_by_recursion(a: &Mask, rmax: usize) -> Vec<f64> {
    let mut m = vec![1.0];
    for r in 1..=rmax {
        let scale = 0.5f64.powi(r as i32);
        let s: f64 = (0..r)
            .map(|i| {
                let am: f64 = a.iter().map(|(n, v)| v * (n as f64).powi((r - i) as i32)).sum();
                binom(r, i) * am * m[i]
            })
            .sum();
        m.push(scale * s / (1.0 - scale));
    }
    m
}

/// Autocorrelation `γ_t = ∫ φ(x) φ(x - t) dx` for `t = -(w-1)..=w-1`, where `w` is the mask width.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl Autocorrelation {
    pub fn compute(a: &Mask) -> Result<Self> {
        let w = a.hi() - a.lo;
        let lo = -(w - 1).max(0);
        let n = (2 * (w - 1).max(0) + 1) as usize;
        let mut sys = DMatrix::zeros(n + 1, n);
        for ti in 0..n {
            let t = lo + ti as i64;
            for si in 0..n {
                let s = lo + si as i64;
                let v: f64 = a.iter().map(|(k, ak)| ak * a.get(k + s - 2 * t)).sum();
                sys[(ti, si)] = if ti == si { 1.0 } else { 0.0 } - 2.0 * v;
            }
            sys[(n, ti)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let sol = sys
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::Construction(format!("autocorrelation solve: {e}")))?;
        let resid = (&sys * &sol - &rhs).amax();
        if resid > 1e-10 {
            return Err(Error::Construction(format!(
                "refinable function has no square-integrable autocorrelation (residual {resid:.3e})"
            )));
        }
        if sol[(-lo) as usize] <= 0.0 {
            return Err(Error::Construction("autocorrelation has nonpositive energy".into()));
        }
        Ok(Self {
            lo,
            values: sol.iter().copied().collect(),
        })
    }

    pub fn get(&self, t: i64) -> f64 {
        let i = t - self.lo;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// `Σ_{s ≡ t mod period} γ_s`.
    pub fn periodic(&self, period: usize) -> Vec<f64> {
        let mut out = vec![0.0; period];
        for (i, v) in self.values.iter().enumerate() {
            let t = self.lo + i as i64;
            out[t.rem_euclid(period as i64) as usize] += v;
        }
        out
    }
}

/// Catalog Sobolev regularity of the dual scaling function, where known.
pub fn gamma_dual_catalog(order: usize, dual_order: usize) -> Option<f64> {
    match (order, dual_order) {
        (1, 1) => Some(0.5),
        (2, 2) => Some(0.440765),
        (2, 4) => Some(1.175132),
        (3, 3) => Some(0.175132),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scaling,
    Wavelet,
}

/// Biorthogonal spline pair on the line with masks normalized to `Σ a_n = 1`.
#[derive(Debug, Clone)]
pub struct UnivariateSystem {
    pub order: usize,
    pub dual_order: usize,
    pub gamma: f64,
    pub gamma_dual: Option<f64>,
    pub primal: Mask,
    pub dual: Mask,
    pub wavelet: Mask,
    pub dual_wavelet: Mask,
    pub primal_cells: CellMoments,
    pub dual_cells: CellMoments,
    pub primal_autocorr: Autocorrelation,
    pub dual_autocorr: Autocorrelation,
}

/// Highest degree of local polynomial reproduction used by the transforms.
pub const PROJ_DEGREE: usize = 4;

const MASK_TOL: f64 = 1e-12;

impl UnivariateSystem {
    pub fn new(order: usize, dual_order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("spline order must be at least 1".into()));
        }
        if dual_order < order {
            return Err(Error::InvalidParameter(format!("dual order {dual_order} below primal order {order}")));
        }
        if (order + dual_order) % 2 != 0 {
            return Err(Error::InvalidParameter(format!("D + Dt = {} is odd", order + dual_order)));
        }
        if order > PROJ_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!("spline order {order} above {}", PROJ_DEGREE + 1)));
        }
        let primal = bspline_mask(order);
        let dual = dual_spline_mask(order, dual_order);
        let wavelet = dual.mirror();
        let dual_wavelet = primal.mirror();

        let degree = PROJ_DEGREE.max(order + 1).max(dual_order + 1);
        let primal_cells = CellMoments::compute(&primal, degree)?;
        let dual_cells = CellMoments::compute(&dual, degree)?;
        let primal_autocorr = Autocorrelation::compute(&primal)?;
        let dual_autocorr = Autocorrelation::compute(&dual)?;

        let sys = Self {
            order,
            dual_order,
            gamma: order as f64 - 0.5,
            gamma_dual: gamma_dual_catalog(order, dual_order),
            primal,
            dual,
            wavelet,
            dual_wavelet,
            primal_cells,
            dual_cells,
            primal_autocorr,
            dual_autocorr,
        };
        let err = sys.mask_biorthogonality_error();
        if err > MASK_TOL {
            return Err(Error::Construction(format!("mask biorthogonality violated by {err:.3e}")));
        }
        Ok(sys)
    }

    pub fn haar() -> Self {
        Self::new(1, 1).expect("Haar masks")
    }

    /// Largest deviation of the four discrete biorthogonality relations.
    pub fn mask_biorthogonality_error(&self) -> f64 {
        let span = (self.primal.coeffs.len() + self.dual.coeffs.len() + self.wavelet.coeffs.len()) as i64;
        let mut worst: f64 = 0.0;
        for m in -span..=span {
            let delta = if m == 0 { 0.5 } else { 0.0 };
            worst = worst.max((mask_correlation(&self.primal, &self.dual, m) - delta).abs());
            worst = worst.max((mask_correlation(&self.wavelet, &self.dual_wavelet, m) - delta).abs());
            worst = worst.max(mask_correlation(&self.primal, &self.dual_wavelet, m).abs());
            worst = worst.max(mask_correlation(&self.wavelet, &self.dual, m).abs());
        }
        worst
    }

    pub fn scaling_mask(&self, side: Side) -> &Mask {
        match side {
            Side::Primal => &self.primal,
            Side::Dual => &self.dual,
        }
    }

    pub fn wavelet_mask(&self, side: Side) -> &Mask {
        match side {
            Side::Primal => &self.wavelet,
            Side::Dual => &self.dual_wavelet,
        }
    }

    pub fn cells(&self, side: Side) -> &CellMoments {
        match side {
            Side::Primal => &self.primal_cells,
            Side::Dual => &self.dual_cells,
        }
    }

    pub fn autocorr(&self, side: Side) -> &Autocorrelation {
        match side {
            Side::Primal => &self.primal_autocorr,
            Side::Dual => &self.dual_autocorr,
        }
    }

    /// Closed support `[lo, hi]` of the level-0, shift-0 function on the line.
    pub fn support(&self, side: Side, kind: Kind) -> (f64, f64) {
        let a = self.scaling_mask(side);
        match kind {
            Kind::Scaling => (a.lo as f64, a.hi() as f64),
            Kind::Wavelet => {
                let b = self.wavelet_mask(side);
                ((b.lo + a.lo) as f64 / 2.0, (b.hi() + a.hi()) as f64 / 2.0)
            }
        }
    }

    /// Primal scaling function `φ` on the line.
    pub fn phi(&self, x: f64) -> f64 {
        bspline(self.order, x + (self.order / 2) as f64)
    }

    /// Primal mother wavelet `ψ` on the line.
    pub fn psi(&self, x: f64) -> f64 {
        2.0 * self.wavelet.iter().map(|(n, b)| b * self.phi(2.0 * x - n as f64)).sum::<f64>()
    }

    /// L2 norm of the mother function on the line.
    pub fn mother_norm(&self, side: Side, kind: Kind) -> f64 {
        match kind {
            Kind::Scaling => self.autocorr(side).get(0).sqrt(),
            Kind::Wavelet => mother_norm(self.wavelet_mask(side), self.autocorr(side)),
        }
    }

    /// L2 norm of the level-`level` function periodized to `[0,1]`.
    pub fn periodized_norm(&self, side: Side, kind: Kind, level: u32) -> f64 {
        match kind {
            Kind::Scaling => self.autocorr(side).periodic(1 << level)[0].sqrt(),
            Kind::Wavelet => {
                let n = 1usize << (level + 1);
                let g = self.autocorr(side).periodic(n);
                let mut c = vec![0.0; n];
                for (k, b) in self.wavelet_mask(side).iter() {
                    c[k.rem_euclid(n as i64) as usize] += std::f64::consts::SQRT_2 * b;
                }
                let mut s = 0.0;
                for (m, cm) in c.iter().enumerate() {
                    for (mp, cmp) in c.iter().enumerate() {
                        s += cm * cmp * g[(m + n - mp) % n];
                    }
                }
                s.max(0.0).sqrt()
            }
        }
    }

    /// Factor `w` such that `w·f` and `f̃/w` have equal periodized norms.
    pub fn balance_weight(&self, kind: Kind, level: u32) -> f64 {
        (self.periodized_norm(Side::Dual, kind, level) / self.periodized_norm(Side::Primal, kind, level)).sqrt()
    }

    /// Unit-sum masks encoded as `spline:D=..,Dt=..,mode=periodic`.
    pub fn label(&self) -> String {
        format!("spline:D={},Dt={},mode=periodic", self.order, self.dual_order)
    }
}

/// `‖√2 Σ b_n φ(2·-n)‖` with `φ`'s autocorrelation given.
fn mother_norm(b: &Mask, gamma: &Autocorrelation) -> f64 {
    let mut s = 0.0;
    for (n, bn) in b.iter() {
        for (m, bm) in b.iter() {
            s += bn * bm * gamma.get(n - m);
        }
    }
    (2.0 * s).sqrt()
}
