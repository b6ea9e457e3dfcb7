//! Dephasing master equation `dρ/dt = −i[H, ρ] − pρ + p𝒫ρ`.
//!
//! Both supported channels act elementwise in the vertex basis, so the
//! dissipative part is a diagonal linear operator `L` on the entries of ρ
//! and the equation is integrated with exponential time differencing
//! (ETDRK4, fourth order). `L` is treated exactly, so large rates deep in the
//! Zeno regime cost no more steps than small ones.

use nalgebra::DMatrix;

use super::hamiltonian::HamiltonianSpec;
use crate::error::{param, Error, Result};
use crate::graphs::{GraphKind, GraphSpec};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtqwNoise {
    /// `𝒫ρ = diag(ρ)`.
    VertexProject,
    /// `𝒫ρ = (1/n) Σ_j (Π₀ʲ ρ Π₀ʲ + Π₁ʲ ρ Π₁ʲ)` on the n-cube.
    PerQubitDephase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtqwNoiseSpec {
    pub model: CtqwNoise,
    pub rate: f64,
}

impl CtqwNoiseSpec {
    pub fn new(model: CtqwNoise, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(param("rate", format!("{rate} must be finite and ≥ 0")));
        }
        Ok(CtqwNoiseSpec { model, rate })
    }

    /// Decay rate of `ρ_{xy}`.
    pub fn element_rate(&self, graph: &GraphSpec, x: usize, y: usize) -> Result<f64> {
        Ok(match self.model {
            CtqwNoise::VertexProject => {
                if x == y {
                    0.0
                } else {
                    self.rate
                }
            }
            CtqwNoise::PerQubitDephase => {
                let GraphKind::Hypercube { dim } = graph.kind() else {
                    return Err(Error::Unsupported(
                        "per-qubit dephasing is defined on the hypercube only".into(),
                    ));
                };
                self.rate * (x ^ y).count_ones() as f64 / *dim as f64
            }
        })
    }
}

/// Step-size control for [`evolve_master`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Starting step; `None` picks `min(0.01, 0.1/(γ·d_max))`.
    pub initial_step: Option<f64>,
    /// Accept when the diagonal at the final time moves by less than this
    /// (total variation) after halving the step.
    pub tolerance: f64,
    pub max_halvings: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: None,
            tolerance: 1e-8,
            max_halvings: 10,
        }
    }
}

/// Output of [`evolve_master`].
#[derive(Debug, Clone)]
pub struct MasterSolution<T> {
    /// One entry per requested time.
    pub samples: Vec<T>,
    /// Step used for the accepted run.
    pub step: f64,
    pub halvings: u32,
    /// Diagonal change measured at acceptance.
    pub residual: f64,
}

/// φ₁, φ₂, φ₃ of a real argument.
fn phi123(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        let mut p = [0.0; 3];
        for (k, pk) in p.iter_mut().enumerate() {
            // Σ_j z^j / (j + k + 1)!
            let mut term = 1.0 / (1..=k + 1).map(|i| i as f64).product::<f64>();
            let mut acc = term;
            for j in 1..30 {
                term *= z / (j + k + 1) as f64;
                acc += term;
            }
            *pk = acc;
        }
        (p[0], p[1], p[2])
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - z * z / 2.0) / (z * z * z);
        (p1, p2, p3)
    }
}

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    e: f64,
    e2: f64,
    q: f64,
    f1: f64,
    f2: f64,
    f3: f64,
}

impl Coeffs {
    fn new(rate: f64, h: f64) -> Self {
        let z = -rate * h;
        let (a1, _, _) = phi123(z / 2.0);
        let (p1, p2, p3) = phi123(z);
        Coeffs {
            e: z.exp(),
            e2: (z / 2.0).exp(),
            q: h * a1 / 2.0,
            f1: h * (p1 - 3.0 * p2 + 4.0 * p3),
            f2: h * (p2 - 2.0 * p3),
            f3: h * (4.0 * p3 - p2),
        }
    }
}

struct Integrator<'a> {
    n: usize,
    gamma: f64,
    diag: Vec<f64>,
    neighbours: Vec<&'a [usize]>,
    class_of: Vec<u16>,
    rates: Vec<f64>,
}

impl Integrator<'_> {
    /// `−i[H, ρ]` on a row-major buffer.
    fn commutator(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        let mi = C64::new(0.0, -1.0);
        for x in 0..n {
            for y in 0..n {
                let mut hr = rho[x * n + y] * (self.diag[x] - self.diag[y]);
                let mut s = C64::new(0.0, 0.0);
                for &k in self.neighbours[x] {
                    s += rho[k * n + y];
                }
                for &k in self.neighbours[y] {
                    s -= rho[x * n + k];
                }
                hr += s * self.gamma;
                out[x * n + y] = mi * hr;
            }
        }
    }

    fn step(&self, v: &mut [C64], c: &[Coeffs], buf: &mut [Vec<C64>; 6]) {
        let [nv, a, na, b, nb, nc] = buf;
        self.commutator(v, nv);
        for i in 0..v.len() {
            let k = &c[self.class_of[i] as usize];
            a[i] = v[i] * k.e2 + nv[i] * k.q;
        }
        self.commutator(a, na);
        for i in 0..v.len() {
            let k = &c[self.class_of[i] as usize];
            b[i] = v[i] * k.e2 + na[i] * k.q;
        }
        self.commutator(b, nb);
        // c-stage reuses `a`'s storage once `na` is stored.
        for i in 0..v.len() {
            let k = &c[self.class_of[i] as usize];
            a[i] = a[i] * k.e2 + (nb[i] * 2.0 - nv[i]) * k.q;
        }
        self.commutator(a, nc);
        for i in 0..v.len() {
            let k = &c[self.class_of[i] as usize];
            v[i] = v[i] * k.e + nv[i] * k.f1 + (na[i] + nb[i]) * (2.0 * k.f2) + nc[i] * k.f3;
        }
    }

    /// Integrates through `times`, recording `extract(ρ)` at each.
    fn run<T>(
        &self,
        rho0: &[C64],
        times: &[f64],
        h_max: f64,
        extract: &impl Fn(&DMatrix<C64>) -> T,
    ) -> (Vec<T>, Vec<f64>) {
        let n = self.n;
        let mut v = rho0.to_vec();
        let mut buf: [Vec<C64>; 6] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n * n]);
        let mut out = Vec::with_capacity(times.len());
        let mut now = 0.0;
        let mut cached: Option<(f64, Vec<Coeffs>)> = None;
        for &t in times {
            let span = t - now;
            if span > 0.0 {
                let steps = (span / h_max).ceil().max(1.0);
                let h = span / steps;
                let reuse = matches!(&cached, Some((hc, _)) if *hc == h);
                if !reuse {
                    cached = Some((h, self.rates.iter().map(|&r| Coeffs::new(r, h)).collect()));
                }
                let coeffs = &cached.as_ref().expect("coefficients").1;
                for _ in 0..steps as u64 {
                    self.step(&mut v, coeffs, &mut buf);
                }
                now = t;
            }
            out.push(extract(&to_matrix(&v, n)));
        }
        let diag = (0..n).map(|x| v[x * n + x].re).collect();
        (out, diag)
    }
}

fn to_matrix(v: &[C64], n: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(n, n, v)
}

/// Integrates the master equation from `rho0`, recording `extract(ρ(t))` at
/// each of the non-decreasing `times`.
///
/// The whole run is repeated with the step halved until the final diagonal
/// changes by less than `control.tolerance` in total variation.
pub fn evolve_master_with<T>(
    graph: &GraphSpec,
    h: &HamiltonianSpec,
    noise: Option<&CtqwNoiseSpec>,
    rho0: &DMatrix<C64>,
    times: &[f64],
    control: &StepControl,
    extract: impl Fn(&DMatrix<C64>) -> T,
) -> Result<MasterSolution<T>> {
    let n = graph.vertex_count();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: rho0.nrows(),
        });
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(param("times", "sample times must be finite, ≥ 0 and non-decreasing"));
    }
    let mut rates: Vec<f64> = Vec::new();
    let mut class_of = vec![0u16; n * n];
    for x in 0..n {
        for y in 0..n {
            let r = match noise {
                Some(s) => s.element_rate(graph, x, y)?,
                None => 0.0,
            };
            let idx = match rates.iter().position(|&q| q == r) {
                Some(i) => i,
                None => {
                    rates.push(r);
                    rates.len() - 1
                }
            };
            class_of[x * n + y] = u16::try_from(idx)
                .map_err(|_| Error::Unsupported("too many distinct dephasing rates".into()))?;
        }
    }
    let integrator = Integrator {
        n,
        gamma: h.gamma,
        diag: h.diagonal(graph),
        neighbours: (0..n).map(|x| graph.neighbours(x)).collect(),
        class_of,
        rates,
    };
    let d_max = graph.degrees().iter().copied().max().unwrap_or(1).max(1) as f64;
    let mut step = control
        .initial_step
        .unwrap_or_else(|| 0.01f64.min(0.1 / (h.gamma * d_max)));
    if !(step > 0.0 && step.is_finite()) {
        return Err(param("initial_step", format!("{step} must be finite and positive")));
    }
    let flat: Vec<C64> = (0..n * n).map(|i| rho0[(i / n, i % n)]).collect();
    let (_, mut diag) = integrator.run(&flat, times, step, &extract);
    let mut residual = f64::INFINITY;
    for halvings in 1..=control.max_halvings {
        step /= 2.0;
        let (samples, d2) = integrator.run(&flat, times, step, &extract);
        residual = diag.iter().zip(&d2).map(|(a, b)| (a - b).abs()).sum();
        diag = d2;
        if residual < control.tolerance {
            return Ok(MasterSolution {
                samples,
                step,
                halvings,
                residual,
            });
        }
    }
    Err(Error::Integration {
        halvings: control.max_halvings,
        residual,
    })
}

/// [`evolve_master_with`] returning the density matrices themselves.
pub fn evolve_master(
    graph: &GraphSpec,
    h: &HamiltonianSpec,
    noise: Option<&CtqwNoiseSpec>,
    rho0: &DMatrix<C64>,
    times: &[f64],
    control: &StepControl,
) -> Result<MasterSolution<DMatrix<C64>>> {
    evolve_master_with(graph, h, noise, rho0, times, control, |m| m.clone())
}

/// Vertex-basis diagonal of ρ.
pub fn density_diagonal(rho: &DMatrix<C64>) -> Vec<f64> {
    (0..rho.nrows()).map(|i| rho[(i, i)].re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctqw::spectral::evolve_ctqw_pure;
    use crate::graphs::{build_cycle, build_hypercube, build_line};
    use crate::linalg::{hermiticity_deviation, outer, trace};

    fn point(n: usize, x: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[x] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn phi_functions_are_continuous_across_the_series_switch() {
        let a = phi123(0.999_999);
        let b = phi123(1.000_001);
        assert!((a.0 - b.0).abs() < 1e-5 && (a.1 - b.1).abs() < 1e-5 && (a.2 - b.2).abs() < 1e-5);
        let z = phi123(0.0);
        assert!((z.0 - 1.0).abs() < 1e-15 && (z.1 - 0.5).abs() < 1e-15 && (z.2 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_run_matches_spectral_propagation() {
        let g = build_cycle(7).unwrap();
        let h = HamiltonianSpec::adjacency(0.5).unwrap();
        let rho0 = outer(&point(7, 2));
        let sol = evolve_master(&g, &h, None, &rho0, &[1.0, 5.0], &StepControl::default()).unwrap();
        let psi = evolve_ctqw_pure(&g, &h, 5.0, &point(7, 2)).unwrap();
        let tv: f64 = density_diagonal(&sol.samples[1])
            .iter()
            .zip(&psi)
            .map(|(p, a)| (p - a.norm_sqr()).abs())
            .sum();
        assert!(tv < 1e-8, "{tv}");
    }

    #[test]
    fn dephasing_preserves_trace_and_hermiticity() {
        let g = build_line(6).unwrap();
        let h = HamiltonianSpec::adjacency(0.5).unwrap();
        let noise = CtqwNoiseSpec::new(CtqwNoise::VertexProject, 0.7).unwrap();
        let sol = evolve_master(&g, &h, Some(&noise), &outer(&point(13, 6)), &[3.0], &StepControl::default())
            .unwrap();
        let r = &sol.samples[0];
        assert!((trace(r) - C64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(hermiticity_deviation(r) < 1e-8);
    }

    #[test]
    fn per_qubit_rates_follow_hamming_distance() {
        let g = build_hypercube(3).unwrap();
        let s = CtqwNoiseSpec::new(CtqwNoise::PerQubitDephase, 0.9).unwrap();
        assert!((s.element_rate(&g, 0b000, 0b101).unwrap() - 0.6).abs() < 1e-15);
        let c = build_cycle(4).unwrap();
        assert!(s.element_rate(&c, 0, 1).is_err());
        assert!(CtqwNoiseSpec::new(CtqwNoise::VertexProject, -1.0).is_err());
    }
}
