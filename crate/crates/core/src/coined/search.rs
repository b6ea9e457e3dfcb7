use super::coin::CoinSpec;
use super::walk::{CoinedWalk, WalkStatePure};
use crate::error::{param, Result};
use crate::graphs::GraphSpec;

/// Coin for the search walk: Grover everywhere, `−I` at the marked vertex.
pub fn search_coin(marked: usize) -> CoinSpec {
    CoinSpec::PerVertex {
        default: Box::new(CoinSpec::Grover),
        overrides: vec![(marked, CoinSpec::NegativeIdentity)],
    }
}

/// Probability of finding the walker at `marked` at times `0..=steps`, from
/// the uniform superposition over all (vertex, port) slots.
pub fn search_evolve(graph: &GraphSpec, marked: usize, steps: u64) -> Result<Vec<f64>> {
    if marked >= graph.vertex_count() {
        return Err(param(
            "marked",
            format!("{marked} is not a vertex of a {}-vertex graph", graph.vertex_count()),
        ));
    }
    let walk = CoinedWalk::new(graph, &search_coin(marked))?;
    let d = graph.max_degree();
    let mut state = WalkStatePure::uniform(graph);
    let at_marked = |s: &WalkStatePure| -> f64 {
        s.amplitudes[marked * d..(marked + 1) * d]
            .iter()
            .map(|a| a.norm_sqr())
            .sum()
    };
    let mut out = vec![at_marked(&state)];
    for _ in 0..steps {
        state = walk.step_pure(&state)?;
        out.push(at_marked(&state));
    }
    Ok(out)
}
