use rayon::prelude::*;

use super::distribution::tv_distance;
use crate::coined::noise::step_density_with_strength;
use crate::coined::{CoinSpec, CoinedWalk, NoiseChannel, WalkStateDensity, WalkStatePure};
use crate::error::{param, Result};
use crate::graphs::build_line;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct TopHatFit {
    pub p_star: f64,
    pub tv_star: f64,
    /// Every evaluated `(p, TV)`, coarse points first.
    pub evaluated: Vec<(f64, f64)>,
}

/// Ideal top-hat on a `2T+1`-site line: uniform over sites `|x| ≤ ⌊T/√2⌋`
/// with `x ≡ T (mod 2)`, each carrying `1/(⌊T/√2⌋ + 1)` when that bound has
/// the parity of `T` (otherwise `1/⌊T/√2⌋`); zero elsewhere.
pub fn ideal_top_hat(steps: u64) -> Vec<f64> {
    let t = steps as i64;
    let edge = (steps as f64 / std::f64::consts::SQRT_2).floor() as i64;
    let sites: Vec<i64> = (-t..=t).collect();
    let count = sites
        .iter()
        .filter(|&&x| x.abs() <= edge && (x - t).rem_euclid(2) == 0)
        .count() as f64;
    sites
        .iter()
        .map(|&x| {
            if x.abs() <= edge && (x - t).rem_euclid(2) == 0 {
                1.0 / count
            } else {
                0.0
            }
        })
        .collect()
}

/// Vertex distribution after `steps` steps of a line walk from the origin with
/// per-step channel rate `p`, in density form.
pub fn line_density_distribution(
    coin: &CoinSpec,
    initial_coin: [C64; 2],
    channel: NoiseChannel,
    p: f64,
    steps: u64,
) -> Result<Vec<f64>> {
    let g = build_line(steps as usize)?;
    let walk = CoinedWalk::new(&g, coin)?;
    let origin = g.line_index(0).expect("origin");
    let mut rho = WalkStateDensity::from_pure(&WalkStatePure::localized(&g, origin, &initial_coin)?);
    for _ in 0..steps {
        rho = step_density_with_strength(&walk, &rho, channel, p)?;
    }
    Ok(rho.diagonal().chunks_exact(2).map(|c| c[0] + c[1]).collect())
}

/// Grid search for the rate whose distribution at `steps` is closest in TV
/// to [`ideal_top_hat`], refined once on a grid between the coarse minimum's
/// neighbours.
pub fn top_hat_fit(
    coin: &CoinSpec,
    initial_coin: [C64; 2],
    channel: NoiseChannel,
    steps: u64,
    p_grid: &[f64],
) -> Result<TopHatFit> {
    if p_grid.is_empty() {
        return Err(param("p_grid", "needs at least one rate"));
    }
    let ideal = ideal_top_hat(steps);
    let eval = |ps: &[f64]| -> Result<Vec<(f64, f64)>> {
        ps.par_iter()
            .map(|&p| {
                let d = line_density_distribution(coin, initial_coin, channel, p, steps)?;
                Ok((p, tv_distance(&d, &ideal)?))
            })
            .collect()
    };
    let mut grid = p_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let coarse = eval(&grid)?;
    let best = argmin(&coarse);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let mut evaluated = coarse;
    if hi > lo {
        let fine: Vec<f64> = (1..10).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect();
        evaluated.extend(eval(&fine)?);
    }
    let b = argmin(&evaluated);
    Ok(TopHatFit {
        p_star: evaluated[b].0,
        tv_star: evaluated[b].1,
        evaluated,
    })
}

fn argmin(v: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (k, e) in v.iter().enumerate() {
        if e.1 < v[best].1 {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_is_normalised_on_one_parity() {
        for t in [10u64, 11, 100] {
            let h = ideal_top_hat(t);
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let off: f64 = h.iter().skip(1).step_by(2).sum();
            assert_eq!(off, 0.0);
        }
    }
}
