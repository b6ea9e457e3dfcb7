use nalgebra::DMatrix;

use crate::error::{param, Result};
use crate::graphs::{GraphKind, GraphSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HamiltonianVariant {
    /// `H = γA`.
    Adjacency,
    /// `H = γ(A − D)`.
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSpec {
    pub gamma: f64,
    pub variant: HamiltonianVariant,
}

impl HamiltonianSpec {
    pub fn new(gamma: f64, variant: HamiltonianVariant) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(param("gamma", format!("{gamma} must be finite and positive")));
        }
        Ok(HamiltonianSpec { gamma, variant })
    }

    pub fn adjacency(gamma: f64) -> Result<Self> {
        Self::new(gamma, HamiltonianVariant::Adjacency)
    }

    /// Hypercube walk with energy `k = γn`.
    pub fn hypercube(n: usize, k: f64) -> Result<Self> {
        Self::adjacency(k / n as f64)
    }

    /// `k = γn` on a hypercube, `None` elsewhere.
    pub fn energy(&self, graph: &GraphSpec) -> Option<f64> {
        match graph.kind() {
            GraphKind::Hypercube { dim } => Some(self.gamma * *dim as f64),
            _ => None,
        }
    }

    /// Dense real symmetric matrix of `H`.
    pub fn matrix(&self, graph: &GraphSpec) -> DMatrix<f64> {
        let mut h = graph.adjacency_matrix() * self.gamma;
        if self.variant == HamiltonianVariant::Laplacian {
            for x in 0..graph.vertex_count() {
                h[(x, x)] -= self.gamma * graph.degree(x) as f64;
            }
        }
        h
    }

    /// Sparse rows of `H`: `(diagonal, off-diagonal weight)`; every
    /// off-diagonal entry is `γ` on an edge.
    pub(crate) fn diagonal(&self, graph: &GraphSpec) -> Vec<f64> {
        (0..graph.vertex_count())
            .map(|x| match self.variant {
                HamiltonianVariant::Adjacency => 0.0,
                HamiltonianVariant::Laplacian => -self.gamma * graph.degree(x) as f64,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_cycle;

    #[test]
    fn laplacian_has_zero_row_sums() {
        let g = build_cycle(6).unwrap();
        let h = HamiltonianSpec::new(0.3, HamiltonianVariant::Laplacian).unwrap().matrix(&g);
        for r in 0..6 {
            assert!(h.row(r).sum().abs() < 1e-15);
        }
        assert!(HamiltonianSpec::adjacency(0.0).is_err());
    }
}
