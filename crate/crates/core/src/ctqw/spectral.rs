use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use super::hamiltonian::{HamiltonianSpec, HamiltonianVariant};
use crate::error::{param, Error, Result};
use crate::graphs::GraphSpec;
use crate::C64;

/// Eigendecomposition `H = V Λ Vᵀ` of a real symmetric Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralPropagator {
    pub fn new(h: &DMatrix<f64>) -> Self {
        let eig = h.clone().symmetric_eigen();
        SpectralPropagator {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `e^{−iHt} ψ₀`.
    pub fn evolve(&self, psi0: &[C64], t: f64) -> Result<Vec<C64>> {
        if psi0.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: psi0.len(),
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(param("t", format!("{t} must be finite and ≥ 0")));
        }
        let n = self.dim();
        let v = &self.vectors;
        let mut coeff = vec![C64::new(0.0, 0.0); n];
        for (k, c) in coeff.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (x, &a) in psi0.iter().enumerate() {
                acc += a * v[(x, k)];
            }
            *c = acc * C64::from_polar(1.0, -self.values[k] * t);
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &c) in coeff.iter().enumerate() {
                acc += c * v[(x, k)];
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Dense `e^{−iHt}`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let n = self.dim();
        let vc = self.vectors.map(|a| C64::new(a, 0.0));
        let phases = DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| {
            C64::from_polar(1.0, -self.values[k] * t)
        }));
        &vc * phases * vc.transpose()
    }
}

/// Key identifying a Hamiltonian up to the graph's edge set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    edges: Vec<(usize, usize)>,
    vertices: usize,
    variant: HamiltonianVariant,
    gamma_bits: u64,
}

/// Shared store of spectral decompositions keyed by (graph, variant, γ).
#[derive(Debug, Default, Clone)]
pub struct SpectralCache {
    inner: Arc<Mutex<HashMap<CacheKey, Arc<SpectralPropagator>>>>,
}

impl SpectralCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, graph: &GraphSpec, h: &HamiltonianSpec) -> Arc<SpectralPropagator> {
        let edges = (0..graph.vertex_count())
            .flat_map(|x| graph.neighbours(x).iter().filter(move |&&y| y > x).map(move |&y| (x, y)))
            .collect();
        let key = CacheKey {
            edges,
            vertices: graph.vertex_count(),
            variant: h.variant,
            gamma_bits: h.gamma.to_bits(),
        };
        if let Some(p) = self.inner.lock().expect("cache lock").get(&key) {
            return Arc::clone(p);
        }
        let p = Arc::new(SpectralPropagator::new(&h.matrix(graph)));
        self.inner
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&p))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `e^{−iHt} ψ₀` for `H` built from `spec` on `graph`.
pub fn evolve_ctqw_pure(
    graph: &GraphSpec,
    spec: &HamiltonianSpec,
    t: f64,
    psi0: &[C64],
) -> Result<Vec<C64>> {
    SpectralPropagator::new(&spec.matrix(graph)).evolve(psi0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_cycle, build_hypercube, build_line};

    fn point(n: usize, x: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[x] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn cycle_four_spectrum() {
        let g = build_cycle(4).unwrap();
        let p = SpectralPropagator::new(&HamiltonianSpec::adjacency(1.0).unwrap().matrix(&g));
        let mut ev: Vec<f64> = p.values.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity_and_norm_is_kept() {
        let g = build_line(10).unwrap();
        let spec = HamiltonianSpec::adjacency(0.5).unwrap();
        let psi0 = point(21, 10);
        let same = evolve_ctqw_pure(&g, &spec, 0.0, &psi0).unwrap();
        assert!(same.iter().zip(&psi0).all(|(a, b)| (a - b).norm() < 1e-14));
        let later = evolve_ctqw_pure(&g, &spec, 3.0, &psi0).unwrap();
        let n: f64 = later.iter().map(|a| a.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_and_adjacency_agree_on_regular_graphs() {
        let g = build_hypercube(4).unwrap();
        let a = HamiltonianSpec::adjacency(0.25).unwrap();
        let l = HamiltonianSpec::new(0.25, HamiltonianVariant::Laplacian).unwrap();
        for t in [0.5, 2.0, 7.3] {
            let pa = evolve_ctqw_pure(&g, &a, t, &point(16, 3)).unwrap();
            let pl = evolve_ctqw_pure(&g, &l, t, &point(16, 3)).unwrap();
            for (x, y) in pa.iter().zip(&pl) {
                assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cache_reuses_decompositions() {
        let cache = SpectralCache::new();
        let g = build_cycle(5).unwrap();
        let h = HamiltonianSpec::adjacency(1.0).unwrap();
        let a = cache.get(&g, &h);
        let b = cache.get(&build_cycle(5).unwrap(), &h);
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(&g, &HamiltonianSpec::adjacency(2.0).unwrap());
        assert_eq!(cache.len(), 2);
    }
}
