use rayon::prelude::*;

use crate::coined::{CoinSpec, CoinedWalk, WalkStatePure};
use crate::error::Result;
use crate::graphs::build_cycle;
use crate::C64;

/// Default fidelity tolerance for a return.
pub const PERIOD_TOLERANCE: f64 = 1e-10;

/// Smallest `Ω ≤ horizon` with `|⟨ψ(0)|ψ(Ω)⟩|² > 1 − tol`.
pub fn find_period(walk: &CoinedWalk<'_>, initial: &WalkStatePure, horizon: u64, tol: f64) -> Result<Option<u64>> {
    let n = walk.dim();
    let mut cur = initial.amplitudes.clone();
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    let mut next = vec![C64::new(0.0, 0.0); n];
    for t in 1..=horizon {
        walk.step_into(&cur, &mut scratch, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
        let overlap: C64 = initial.amplitudes.iter().zip(&cur).map(|(a, b)| a.conj() * b).sum();
        if overlap.norm_sqr() > 1.0 - tol {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Start used for cycle periodicity: vertex 0 with coin `|−1⟩`.
pub fn cycle_period_start(size: usize) -> Result<WalkStatePure> {
    let g = build_cycle(size)?;
    WalkStatePure::localized(&g, 0, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

/// `(η, δ, Ω)` for every biased-coin grid point whose `N`-cycle walk returns
/// within `horizon`, in grid order.
pub fn periodicity_search(size: usize, eta_grid: &[f64], delta_grid: &[f64], horizon: u64) -> Result<Vec<(f64, f64, u64)>> {
    let g = build_cycle(size)?;
    let start = cycle_period_start(size)?;
    let points: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&e| delta_grid.iter().map(move |&d| (e, d)))
        .collect();
    let found: Vec<Result<Option<(f64, f64, u64)>>> = points
        .par_iter()
        .map(|&(eta, delta)| {
            let walk = CoinedWalk::new(&g, &CoinSpec::Biased { eta, delta })?;
            Ok(find_period(&walk, &start, horizon, PERIOD_TOLERANCE)?.map(|o| (eta, delta, o)))
        })
        .collect();
    let mut out = Vec::new();
    for f in found {
        if let Some(hit) = f? {
            out.push(hit);
        }
    }
    Ok(out)
}
