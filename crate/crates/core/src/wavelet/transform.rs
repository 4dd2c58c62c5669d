//! Separable periodic filter bank on `[2^j]^d` coefficient arrays.

use super::masks::Mask;
use num_complex::Complex64;
use std::f64::consts::SQRT_2;

/// Row-major complex array.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Arr {
    pub shape: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl Arr {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_data(shape: Vec<usize>, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    fn strides(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        (outer, self.shape[axis], inner)
    }

    /// Periodic analysis along `axis`: `out[k] = √2 Σ_n h_n x[(2k+n) mod N]`.
    pub fn split(&self, axis: usize, lo: &Mask, hi: &Mask) -> (Arr, Arr) {
        let (outer, len, inner) = self.strides(axis);
        let half = len / 2;
        let mut shape = self.shape.clone();
        shape[axis] = half.max(1);
        let mut low = Arr::zeros(shape.clone());
        let mut high = Arr::zeros(shape);
        let modn = len as i64;
        for o in 0..outer {
            for k in 0..half {
                let dst = (o * half + k) * inner;
                for (n, h) in lo.iter() {
                    let src = (o * len + (2 * k as i64 + n).rem_euclid(modn) as usize) * inner;
                    for i in 0..inner {
                        low.data[dst + i] += self.data[src + i] * (SQRT_2 * h);
                    }
                }
                for (n, g) in hi.iter() {
                    let src = (o * len + (2 * k as i64 + n).rem_euclid(modn) as usize) * inner;
                    for i in 0..inner {
                        high.data[dst + i] += self.data[src + i] * (SQRT_2 * g);
                    }
                }
            }
        }
        (low, high)
    }

    /// Periodic synthesis along `axis`, the adjoint pattern of [`Arr::split`] with the primal masks.
    pub fn merge(axis: usize, low: &Arr, high: &Arr, lo: &Mask, hi: &Mask) -> Arr {
        let (outer, half, inner) = low.strides(axis);
        let len = 2 * half;
        let mut shape = low.shape.clone();
        shape[axis] = len;
        let mut out = Arr::zeros(shape);
        let modn = len as i64;
        for o in 0..outer {
            for k in 0..half {
                let s = (o * half + k) * inner;
                for (n, h) in lo.iter() {
                    let dst = (o * len + (2 * k as i64 + n).rem_euclid(modn) as usize) * inner;
                    for i in 0..inner {
                        out.data[dst + i] += low.data[s + i] * (SQRT_2 * h);
                    }
                }
                for (n, g) in hi.iter() {
                    let dst = (o * len + (2 * k as i64 + n).rem_euclid(modn) as usize) * inner;
                    for i in 0..inner {
                        out.data[dst + i] += high.data[s + i] * (SQRT_2 * g);
                    }
                }
            }
        }
        out
    }

    /// Periodic correlation along `axis`: `out[m] = Σ_t k[t] x[(m+t) mod N]`, `k` indexed from `k_lo`.
    pub fn correlate(&self, axis: usize, k_lo: i64, k: &[f64]) -> Arr {
        let (outer, len, inner) = self.strides(axis);
        let mut out = Arr::zeros(self.shape.clone());
        let modn = len as i64;
        for o in 0..outer {
            for m in 0..len {
                let dst = (o * len + m) * inner;
                for (ti, kv) in k.iter().enumerate() {
                    if *kv == 0.0 {
                        continue;
                    }
                    let src = (o * len + (m as i64 + k_lo + ti as i64).rem_euclid(modn) as usize) * inner;
                    for i in 0..inner {
                        out.data[dst + i] += self.data[src + i] * *kv;
                    }
                }
            }
        }
        out
    }

    pub fn dot(&self, other: &Arr) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Per-patch coefficients `levels[j][tag]`, each a row-major `[2^j]^d` array; tag 0 is populated only at level 0.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pyramid {
    pub d: usize,
    pub levels: Vec<Vec<Vec<Complex64>>>,
}

impl Pyramid {
    pub fn zeros(d: usize, n_levels: usize) -> Self {
        let tags = 1usize << d;
        let levels = (0..n_levels)
            .map(|j| {
                let side = 1usize << (j * d);
                (0..tags)
                    .map(|t| if t == 0 && j > 0 { Vec::new() } else { vec![Complex64::new(0.0, 0.0); side] })
                    .collect()
            })
            .collect();
        Self { d, levels }
    }
}

/// Splits every axis in order; band index has axis 0 as its most significant bit.
fn split_all(x: Arr, lo: &Mask, hi: &Mask) -> Vec<Arr> {
    let mut bands = vec![x];
    for axis in 0..bands[0].shape.len() {
        bands = bands
            .into_iter()
            .flat_map(|b| {
                let (l, h) = b.split(axis, lo, hi);
                [l, h]
            })
            .collect();
    }
    bands
}

fn merge_all(mut bands: Vec<Arr>, lo: &Mask, hi: &Mask) -> Arr {
    let d = bands[0].shape.len();
    for axis in (0..d).rev() {
        bands = bands.chunks(2).map(|p| Arr::merge(axis, &p[0], &p[1], lo, hi)).collect();
    }
    bands.pop().expect("one band left")
}

/// Decomposes level-`n_levels` scaling coefficients into a pyramid with levels `0..n_levels`.
pub(crate) fn forward(top: Arr, n_levels: usize, lo: &Mask, hi: &Mask) -> Pyramid {
    let d = top.shape.len();
    let mut pyr = Pyramid::zeros(d, n_levels);
    let mut cur = top;
    for j in (0..n_levels).rev() {
        let mut bands = split_all(cur, lo, hi).into_iter();
        cur = bands.next().expect("low band");
        for (t, b) in bands.enumerate() {
            pyr.levels[j][t + 1] = b.data;
        }
    }
    pyr.levels[0][0] = cur.data;
    pyr
}

/// Inverse of [`forward`] with the synthesis masks.
pub(crate) fn inverse(pyr: &Pyramid, lo: &Mask, hi: &Mask) -> Arr {
    let d = pyr.d;
    let mut cur = Arr::from_data(vec![1; d], pyr.levels[0][0].clone());
    for (j, lvl) in pyr.levels.iter().enumerate() {
        let side = 1usize << j;
        let mut bands = vec![cur];
        for band in lvl.iter().skip(1) {
            bands.push(Arr::from_data(vec![side; d], band.clone()));
        }
        cur = merge_all(bands, lo, hi);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::super::masks::UnivariateSystem;
    use super::*;
    use proptest::prelude::*;

    fn random_arr(d: usize, side: usize, seed: &[f64]) -> Arr {
        let n = side.pow(d as u32);
        let data = (0..n)
            .map(|i| Complex64::new(seed[i % seed.len()] + i as f64 * 0.01, seed[(i * 7 + 3) % seed.len()]))
            .collect();
        Arr::from_data(vec![side; d], data)
    }

    proptest! {
        #[test]
        fn forward_inverse_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 7..20), d in 1usize..=2, levels in 1usize..=4, pair in 0usize..4) {
            let (p, q) = [(1, 1), (2, 2), (2, 4), (3, 3)][pair];
            let s = UnivariateSystem::new(p, q).unwrap();
            let top = random_arr(d, 1 << levels, &seed);
            let pyr = forward(top.clone(), levels, &s.dual, &s.dual_wavelet);
            let back = inverse(&pyr, &s.primal, &s.wavelet);
            for (a, b) in top.data.iter().zip(&back.data) {
                prop_assert!((a - b).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn haar_split_of_constant_is_pure_lowpass() {
        let s = UnivariateSystem::haar();
        let x = Arr::from_data(vec![4], vec![Complex64::new(1.0, 0.0); 4]);
        let (l, h) = x.split(0, &s.dual, &s.dual_wavelet);
        for v in &l.data {
            assert!((v.re - SQRT_2).abs() < 1e-15);
        }
        assert!(h.data.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn correlate_shifts() {
        let x = Arr::from_data(vec![4], (0..4).map(|i| Complex64::new(i as f64, 0.0)).collect());
        let y = x.correlate(0, 1, &[1.0]);
        let re: Vec<f64> = y.data.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![1.0, 2.0, 3.0, 0.0]);
    }
}
