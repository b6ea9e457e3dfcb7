use nalgebra::DMatrix;
use rayon::prelude::*;

use super::coin::{make_coin, CoinSpec};
use crate::error::{Error, Result};
use crate::graphs::{GraphKind, GraphSpec};
use crate::linalg::{hermiticity_deviation, outer, trace};
use crate::C64;

const UNWIRED: usize = usize::MAX;

/// Squared amplitude above which a value on an empty port slot is a contract
/// violation rather than rounding noise.
const UNWIRED_TOL: f64 = 1e-24;

/// How the shift relabels the coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    /// `S|x,c> = |x + c, c>`: the walker keeps its direction label. Used on the
    /// line, the cycle and the hypercube.
    CoinKept,
    /// `S|x,c> = |ζ(x,c)>`: the walker arrives on the port it came in through.
    PortSwap,
}

impl ShiftRule {
    pub fn default_for(graph: &GraphSpec) -> Self {
        match graph.kind() {
            GraphKind::Line { .. } | GraphKind::Cycle { .. } | GraphKind::Hypercube { .. } => {
                ShiftRule::CoinKept
            }
            _ => ShiftRule::PortSwap,
        }
    }
}

/// Pure state over the (vertex, port) basis, vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkStatePure {
    pub amplitudes: Vec<C64>,
    pub time: u64,
}

impl WalkStatePure {
    /// Walker at `vertex` with the given coin amplitudes on its port slots.
    pub fn localized(graph: &GraphSpec, vertex: usize, coin: &[C64]) -> Result<Self> {
        let d = graph.max_degree();
        if coin.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: coin.len(),
            });
        }
        if vertex >= graph.vertex_count() {
            return Err(Error::Parameter {
                name: "vertex",
                message: format!("{vertex} is not a vertex"),
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); graph.basis_size()];
        amplitudes[vertex * d..(vertex + 1) * d].copy_from_slice(coin);
        let state = WalkStatePure { amplitudes, time: 0 };
        state.check_norm(1e-10)?;
        Ok(state)
    }

    /// Basis state `|vertex, port>`.
    pub fn basis(graph: &GraphSpec, vertex: usize, port: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); graph.basis_size()];
        amplitudes[vertex * graph.max_degree() + port] = C64::new(1.0, 0.0);
        WalkStatePure { amplitudes, time: 0 }
    }

    /// Equal superposition over every wired (vertex, port) slot.
    pub fn uniform(graph: &GraphSpec) -> Self {
        let wired: Vec<usize> = (0..graph.basis_size())
            .filter(|&i| graph.paired_index(i).is_some())
            .collect();
        let a = C64::new(1.0 / (wired.len() as f64).sqrt(), 0.0);
        let mut amplitudes = vec![C64::new(0.0, 0.0); graph.basis_size()];
        for i in wired {
            amplitudes[i] = a;
        }
        WalkStatePure { amplitudes, time: 0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn check_norm(&self, tol: f64) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > tol {
            return Err(Error::Contract(format!("state norm² is {n}")));
        }
        Ok(())
    }

    /// Squared overlap `|<self|other>|²`.
    pub fn fidelity(&self, other: &WalkStatePure) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }
}

/// Density operator over the (vertex, port) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkStateDensity {
    pub rho: DMatrix<C64>,
    pub time: u64,
}

impl WalkStateDensity {
    pub fn from_pure(state: &WalkStatePure) -> Self {
        WalkStateDensity {
            rho: outer(&state.amplitudes),
            time: state.time,
        }
    }

    pub fn trace(&self) -> C64 {
        trace(&self.rho)
    }

    /// Hermiticity and unit trace within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Contract(format!("density trace is {tr}")));
        }
        let h = hermiticity_deviation(&self.rho);
        if h > tol {
            return Err(Error::Contract(format!("density is not Hermitian (deviation {h:e})")));
        }
        Ok(())
    }

    /// Full check including positivity (eigenvalues ≥ −1e−8). Costs a
    /// diagonalisation.
    pub fn check_positive(&self, tol: f64) -> Result<()> {
        self.check(tol)?;
        let eig = self.rho.clone().symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::Contract(format!("density has eigenvalue {min}")));
        }
        Ok(())
    }

    /// Diagonal of ρ as real probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)].re).collect()
    }
}

/// A coined walk: a graph, a coin at each vertex and a shift rule.
///
/// One step is `U = S C`: the coin acts on the port register at every vertex,
/// then the shift moves each amplitude along its port.
#[derive(Debug, Clone)]
pub struct CoinedWalk<'g> {
    graph: &'g GraphSpec,
    rule: ShiftRule,
    coins: Vec<DMatrix<C64>>,
    coin_of: Vec<usize>,
    dest: Vec<usize>,
}

impl<'g> CoinedWalk<'g> {
    pub fn new(graph: &'g GraphSpec, coin: &CoinSpec) -> Result<Self> {
        Self::with_rule(graph, coin, ShiftRule::default_for(graph))
    }

    pub fn with_rule(graph: &'g GraphSpec, coin: &CoinSpec, rule: ShiftRule) -> Result<Self> {
        let d = graph.max_degree();
        let lattice = matches!(
            graph.kind(),
            GraphKind::Line { .. } | GraphKind::Cycle { .. } | GraphKind::Hypercube { .. }
        );
        let mut coins: Vec<DMatrix<C64>> = Vec::new();
        let mut keys: Vec<(CoinSpec, usize)> = Vec::new();
        let mut coin_of = Vec::with_capacity(graph.vertex_count());
        for x in 0..graph.vertex_count() {
            let spec = coin.at_vertex(x);
            let dim = if lattice { d } else { graph.degree(x) };
            let idx = match keys.iter().position(|(s, k)| s == spec && *k == dim) {
                Some(i) => i,
                None => {
                    let block = make_coin(spec, dim.max(1))?;
                    let mut full = DMatrix::<C64>::identity(d, d);
                    full.view_mut((0, 0), (dim.max(1).min(d), dim.max(1).min(d)))
                        .copy_from(&block.view((0, 0), (dim.max(1).min(d), dim.max(1).min(d))));
                    keys.push((spec.clone(), dim));
                    coins.push(full);
                    coins.len() - 1
                }
            };
            coin_of.push(idx);
        }
        let mut dest = vec![UNWIRED; graph.basis_size()];
        for (i, slot) in dest.iter_mut().enumerate() {
            if let Some(j) = graph.paired_index(i) {
                *slot = match rule {
                    ShiftRule::PortSwap => j,
                    ShiftRule::CoinKept => (j / d) * d + i % d,
                };
            }
        }
        // Coin-kept shifts are only permutations on graphs whose ports carry a
        // consistent direction meaning.
        let mut hit = vec![false; dest.len()];
        for &t in dest.iter().filter(|&&t| t != UNWIRED) {
            if hit[t] {
                return Err(Error::Unsupported(
                    "coin-kept shift is not a permutation on this graph".into(),
                ));
            }
            hit[t] = true;
        }
        Ok(CoinedWalk {
            graph,
            rule,
            coins,
            coin_of,
            dest,
        })
    }

    pub fn graph(&self) -> &'g GraphSpec {
        self.graph
    }

    pub fn rule(&self) -> ShiftRule {
        self.rule
    }

    pub fn dim(&self) -> usize {
        self.dest.len()
    }

    pub fn coin_at(&self, vertex: usize) -> &DMatrix<C64> {
        &self.coins[self.coin_of[vertex]]
    }

    /// Target basis index of the shift for `index`, or `None` on an empty slot.
    pub fn shift_target(&self, index: usize) -> Option<usize> {
        match self.dest[index] {
            UNWIRED => None,
            t => Some(t),
        }
    }

    /// Applies the coin at every vertex, writing into `out`.
    pub fn apply_coin(&self, input: &[C64], out: &mut [C64]) {
        let d = self.graph.max_degree();
        for (x, (a, o)) in input.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
            apply_block(&self.coins[self.coin_of[x]], a, o);
        }
    }

    /// Applies an explicit per-vertex coin override (used by stochastic-coin
    /// channels) at every vertex.
    pub fn apply_coin_matrix(&self, coin: &DMatrix<C64>, input: &[C64], out: &mut [C64]) {
        let d = self.graph.max_degree();
        for (a, o) in input.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            apply_block(coin, a, o);
        }
    }

    /// Moves every amplitude along its port. Fails if a non-negligible amplitude
    /// sits on an empty slot (the walker ran off a finite line).
    pub fn shift_into(&self, input: &[C64], out: &mut [C64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (i, &a) in input.iter().enumerate() {
            match self.dest[i] {
                UNWIRED => {
                    if a.norm_sqr() > UNWIRED_TOL {
                        let d = self.graph.max_degree();
                        return Err(Error::Contract(format!(
                            "amplitude {a} on empty port {} of vertex {}",
                            i % d,
                            i / d
                        )));
                    }
                }
                t => out[t] = a,
            }
        }
        Ok(())
    }

    /// One step `S C` from `input` into `out`, using `scratch` for the coin output.
    pub fn step_into(&self, input: &[C64], scratch: &mut [C64], out: &mut [C64]) -> Result<()> {
        self.apply_coin(input, scratch);
        self.shift_into(scratch, out)
    }

    pub fn step_pure(&self, state: &WalkStatePure) -> Result<WalkStatePure> {
        if state.amplitudes.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: state.amplitudes.len(),
            });
        }
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim()];
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.step_into(&state.amplitudes, &mut scratch, &mut out)?;
        Ok(WalkStatePure {
            amplitudes: out,
            time: state.time + 1,
        })
    }

    /// `steps` unitary steps.
    pub fn evolve_pure(&self, state: &WalkStatePure, steps: u64) -> Result<WalkStatePure> {
        let mut cur = state.amplitudes.clone();
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim()];
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for _ in 0..steps {
            self.step_into(&cur, &mut scratch, &mut out)?;
            std::mem::swap(&mut cur, &mut out);
        }
        Ok(WalkStatePure {
            amplitudes: cur,
            time: state.time + steps,
        })
    }

    /// Basis indices of the wired (vertex, port) slots, in order.
    pub fn wired_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.dest[i] != UNWIRED).collect()
    }

    /// Dense matrix of `S C` restricted to the wired slots (rows and columns
    /// follow [`Self::wired_indices`]). On graphs where every slot is wired
    /// this is the full step operator.
    pub fn unitary_matrix(&self) -> Result<DMatrix<C64>> {
        let n = self.dim();
        let wired = self.wired_indices();
        let mut u = DMatrix::<C64>::zeros(n, wired.len());
        for (k, &i) in wired.iter().enumerate() {
            u[(i, k)] = C64::new(1.0, 0.0);
        }
        u.as_mut_slice().par_chunks_mut(n).try_for_each(|col| -> Result<()> {
            let mut scratch = vec![C64::new(0.0, 0.0); n];
            let mut out = vec![C64::new(0.0, 0.0); n];
            self.step_into(col, &mut scratch, &mut out)?;
            col.copy_from_slice(&out);
            Ok(())
        })?;
        Ok(u.select_rows(&wired))
    }

    /// Replaces each column `v` of `m` by `U v`.
    pub fn apply_left(&self, m: &mut DMatrix<C64>) -> Result<()> {
        let n = self.dim();
        if m.nrows() != n {
            return Err(Error::Dimension {
                expected: n,
                found: m.nrows(),
            });
        }
        m.as_mut_slice().par_chunks_mut(n).try_for_each(|col| {
            let mut scratch = vec![C64::new(0.0, 0.0); n];
            let mut out = vec![C64::new(0.0, 0.0); n];
            self.step_into(col, &mut scratch, &mut out)?;
            col.copy_from_slice(&out);
            Ok(())
        })
    }

    /// `U ρ U†` for Hermitian `ρ`.
    pub fn conjugate(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let mut a = rho.clone();
        self.apply_left(&mut a)?;
        // (Uρ)† = ρU† because ρ is Hermitian.
        let mut b = a.adjoint();
        self.apply_left(&mut b)?;
        Ok(b)
    }
}

/// The shift alone, applied to a pure state.
pub fn shift_apply(state: &WalkStatePure, walk: &CoinedWalk<'_>) -> Result<WalkStatePure> {
    let mut out = vec![C64::new(0.0, 0.0); walk.dim()];
    walk.shift_into(&state.amplitudes, &mut out)?;
    Ok(WalkStatePure {
        amplitudes: out,
        time: state.time,
    })
}

#[inline]
pub(crate) fn apply_block(m: &DMatrix<C64>, a: &[C64], out: &mut [C64]) {
    let d = a.len();
    if d == 2 {
        out[0] = m[(0, 0)] * a[0] + m[(0, 1)] * a[1];
        out[1] = m[(1, 0)] * a[0] + m[(1, 1)] * a[1];
        return;
    }
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, &v) in a.iter().enumerate() {
            acc += m[(r, c)] * v;
        }
        *o = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_cycle, build_glued_trees, build_hypercube, build_line, load_graph};
    use crate::linalg::unitarity_deviation;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn line_shift_moves_along_direction() {
        let g = build_line(3).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let o = g.line_index(0).unwrap();
        let s = WalkStatePure::basis(&g, o, 1);
        let moved = shift_apply(&s, &walk).unwrap();
        assert_eq!(moved.amplitudes[g.line_index(1).unwrap() * 2 + 1], c(1.0, 0.0));
    }

    #[test]
    fn cycle_shift_wraps() {
        let g = build_cycle(4).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let moved = shift_apply(&WalkStatePure::basis(&g, 3, 1), &walk).unwrap();
        assert_eq!(moved.amplitudes[1], c(1.0, 0.0));
    }

    #[test]
    fn port_swap_shift_is_an_involution() {
        let g = load_graph("N 5\n0 1\n1 2\n2 3\n3 4\n4 0\n0 2\n").unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Grover).unwrap();
        assert_eq!(walk.rule(), ShiftRule::PortSwap);
        let mut amps = vec![c(0.0, 0.0); walk.dim()];
        for i in 0..walk.dim() {
            if g.paired_index(i).is_some() {
                amps[i] = c((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos());
            }
        }
        let state = WalkStatePure { amplitudes: amps, time: 0 };
        let twice = shift_apply(&shift_apply(&state, &walk).unwrap(), &walk).unwrap();
        let err = twice
            .amplitudes
            .iter()
            .zip(&state.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn coin_kept_shift_inverts_by_reversing_direction() {
        // On the cycle, S_kept = F S_swap with F flipping the port label.
        let g = build_cycle(7).unwrap();
        let kept = CoinedWalk::with_rule(&g, &CoinSpec::Hadamard, ShiftRule::CoinKept).unwrap();
        let swap = CoinedWalk::with_rule(&g, &CoinSpec::Hadamard, ShiftRule::PortSwap).unwrap();
        for i in 0..kept.dim() {
            let k = kept.shift_target(i).unwrap();
            let s = swap.shift_target(i).unwrap();
            assert_eq!(k, (s / 2) * 2 + (1 - s % 2));
        }
    }

    #[test]
    fn one_hadamard_step() {
        let g = build_line(5).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let o = g.line_index(0).unwrap();
        let s = WalkStatePure::basis(&g, o, 0);
        let next = walk.step_pure(&s).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let left = g.line_index(-1).unwrap() * 2;
        let right = g.line_index(1).unwrap() * 2 + 1;
        assert!((next.amplitudes[left] - c(h, 0.0)).norm() < 1e-15);
        assert!((next.amplitudes[right] - c(h, 0.0)).norm() < 1e-15);
        assert_eq!(next.time, 1);
    }

    #[test]
    fn running_off_the_line_is_an_error() {
        let g = build_line(2).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let o = g.line_index(0).unwrap();
        let s = WalkStatePure::basis(&g, o, 1);
        assert!(walk.evolve_pure(&s, 2).is_ok());
        assert!(matches!(walk.evolve_pure(&s, 3), Err(Error::Contract(_))));
    }

    #[test]
    fn step_unitary_on_many_graphs() {
        let graphs = vec![
            build_cycle(6).unwrap(),
            build_cycle(2).unwrap(),
            build_hypercube(3).unwrap(),
            build_glued_trees(2, 3).unwrap(),
            load_graph("N 4\n0 1\n1 2\n2 3\n0 2\n").unwrap(),
        ];
        for g in &graphs {
            for spec in [CoinSpec::Grover, CoinSpec::Dft] {
                let walk = CoinedWalk::new(g, &spec).unwrap();
                let u = walk.unitary_matrix().unwrap();
                assert!(unitarity_deviation(&u) < 1e-12, "{:?}", g.kind());
            }
        }
    }

    #[test]
    fn variable_degree_coin_blocks_do_not_touch_empty_ports() {
        let g = load_graph("N 4\n0 1\n0 2\n0 3\n").unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Grover).unwrap();
        let leaf = walk.coin_at(1);
        for r in 0..3 {
            for cc in 0..3 {
                if r != cc && (r >= 1 || cc >= 1) {
                    assert_eq!(leaf[(r, cc)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn conjugation_matches_dense_product() {
        let g = build_cycle(5).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Biased { eta: 0.3, delta: 0.4 }).unwrap();
        let psi = WalkStatePure::localized(&g, 2, &[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let rho = WalkStateDensity::from_pure(&psi);
        let u = walk.unitary_matrix().unwrap();
        let direct = &u * &rho.rho * u.adjoint();
        let fast = walk.conjugate(&rho.rho).unwrap();
        assert!(crate::linalg::max_abs_diff(&direct, &fast) < 1e-14);
    }
}
