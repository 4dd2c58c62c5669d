//! Gauss–Legendre rules mapped to the unit interval and tensorized over cubes.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Nodes and weights of an `order`-point rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("nonzero");
        let gl = GaussLegendre::new(order);
        let mut pairs: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tensor product nodes on `[0,1]^d`, last coordinate fastest.
    pub fn tensor(&self, d: usize) -> Vec<(Vec<f64>, f64)> {
        let n = self.len();
        let total = n.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let x: Vec<f64> = idx.iter().map(|&i| self.nodes[i]).collect();
            let w: f64 = idx.iter().map(|&i| self.weights[i]).product();
            out.push((x, w));
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

/// Legendre polynomials `P_0..=P_n` at `x ∈ [-1, 1]`.
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rule_integrates_polynomials_exactly() {
        let r = UnitRule::new(4);
        for k in 0..8 {
            let s: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(k))
                .sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn tensor_rule_volume() {
        let r = UnitRule::new(3);
        let t = r.tensor(2);
        assert_eq!(t.len(), 9);
        let v: f64 = t.iter().map(|p| p.1).sum();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_recurrence() {
        let p = legendre_values(3, 0.5);
        assert!((p[2] - (3.0 * 0.25 - 1.0) / 2.0).abs() < 1e-15);
        assert!((p[3] - (5.0 * 0.125 - 1.5) / 2.0).abs() < 1e-15);
    }
}
