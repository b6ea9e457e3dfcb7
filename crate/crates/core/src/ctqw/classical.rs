use nalgebra::DVector;

use crate::error::{param, Error, Result};
use crate::graphs::GraphSpec;

/// Continuous-time classical random walk `dP/dt = γ(A − D)P`, each edge
/// carrying rate `γ`.
#[derive(Debug, Clone)]
pub struct ClassicalCtrw {
    values: DVector<f64>,
    vectors: nalgebra::DMatrix<f64>,
}

impl ClassicalCtrw {
    pub fn new(graph: &GraphSpec, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(param("gamma", format!("{gamma} must be finite and positive")));
        }
        let mut l = graph.adjacency_matrix() * gamma;
        for x in 0..graph.vertex_count() {
            l[(x, x)] -= gamma * graph.degree(x) as f64;
        }
        let eig = l.symmetric_eigen();
        Ok(ClassicalCtrw {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// Distribution at time `t` from `p0`.
    pub fn evolve(&self, p0: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.values.len();
        if p0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: p0.len(),
            });
        }
        let p = DVector::from_column_slice(p0);
        let c = self.vectors.transpose() * p;
        let c = DVector::from_fn(n, |k, _| c[k] * (self.values[k] * t).exp());
        Ok((&self.vectors * c).iter().map(|v| v.max(0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_cycle;

    #[test]
    fn conserves_probability_and_relaxes_to_uniform() {
        let g = build_cycle(6).unwrap();
        let w = ClassicalCtrw::new(&g, 1.0).unwrap();
        let mut p0 = vec![0.0; 6];
        p0[0] = 1.0;
        let p = w.evolve(&p0, 0.7).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let late = w.evolve(&p0, 200.0).unwrap();
        assert!(late.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-12));
    }
}
