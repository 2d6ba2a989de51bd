use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Default Gauss-Legendre order per parameter axis.
pub const DEFAULT_ORDER: usize = 16;

/// Gauss-Legendre rule mapped to `[0, 1]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitRule {
    /// Returns `None` for order zero.
    pub fn new(order: usize) -> Option<Self> {
        let rule = GaussLegendre::new(NonZeroUsize::new(order)?);
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Tensor-product nodes on `[0,1]^dim`, last axis varying fastest.
    pub fn tensor(&self, dim: usize) -> Vec<(Vec<f64>, f64)> {
        let q = self.order();
        let total = q.pow(dim as u32);
        (0..total)
            .map(|mut flat| {
                let mut u = vec![0.0; dim];
                let mut w = 1.0;
                for axis in (0..dim).rev() {
                    let i = flat % q;
                    flat /= q;
                    u[axis] = self.nodes[i];
                    w *= self.weights[i];
                }
                (u, w)
            })
            .collect()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
