use rand::seq::SliceRandom;

use super::coin::{make_coin, CoinSpec};
use super::noise::MultiCoinOrder;
use crate::error::{param, Error, Result};
use crate::rng::step_rng;
use crate::C64;

/// Largest amplitude vector the multi-coin engine will allocate.
pub const MULTI_COIN_AMPLITUDE_CAP: usize = 1 << 26;

/// Coin used at each step `1..=steps`.
pub fn coin_sequence(coins: usize, steps: u64, order: MultiCoinOrder, seed: u64) -> Vec<usize> {
    let mut seq = Vec::with_capacity(steps as usize);
    let mut block: Vec<usize> = (0..coins).collect();
    let mut b = 0u64;
    while (seq.len() as u64) < steps {
        if order == MultiCoinOrder::Random {
            block.sort_unstable();
            block.shuffle(&mut step_rng(seed, b, 0));
        }
        seq.extend(block.iter().copied().take((steps - seq.len() as u64) as usize));
        b += 1;
    }
    seq
}

/// Line walk with `coins` two-state coins, one used per step, all starting in
/// `initial_coin`. Returns the position distribution over coordinates
/// `−steps..=steps` at every time `0..=steps`.
///
/// When no coin is used twice (`coins ≥ steps`) the used coins are fresh at
/// every step, the paths are distinguishable and the position marginal is an
/// exact classical convolution; otherwise the full position ⊗ `2^coins`
/// register is evolved.
pub fn multi_coin_line_walk(
    coin: &CoinSpec,
    coins: usize,
    steps: u64,
    order: MultiCoinOrder,
    initial_coin: [C64; 2],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if coins == 0 {
        return Err(param("coins", "at least one coin is required"));
    }
    let c = make_coin(coin, 2)?;
    let norm: f64 = initial_coin.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(param("initial_coin", format!("norm² is {norm}")));
    }
    let t = steps as usize;
    let width = 2 * t + 1;
    let seq = coin_sequence(coins, steps, order, seed);
    if coins as u64 >= steps {
        let after = [
            c[(0, 0)] * initial_coin[0] + c[(0, 1)] * initial_coin[1],
            c[(1, 0)] * initial_coin[0] + c[(1, 1)] * initial_coin[1],
        ];
        let (pl, pr) = (after[0].norm_sqr(), after[1].norm_sqr());
        let mut p = vec![0.0; width];
        p[t] = 1.0;
        let mut out = vec![p.clone()];
        for _ in 0..t {
            let mut q = vec![0.0; width];
            for i in 0..width {
                if p[i] != 0.0 {
                    q[i - 1] += pl * p[i];
                    q[i + 1] += pr * p[i];
                }
            }
            p = q;
            out.push(p.clone());
        }
        return Ok(out);
    }
    let reg = 1usize << coins;
    let dim = width.checked_mul(reg).filter(|&n| n <= MULTI_COIN_AMPLITUDE_CAP);
    let Some(dim) = dim else {
        return Err(Error::Size(format!(
            "{coins} coins over {steps} steps need more than {MULTI_COIN_AMPLITUDE_CAP} amplitudes"
        )));
    };
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    for r in 0..reg {
        let mut a = C64::new(1.0, 0.0);
        for k in 0..coins {
            a *= initial_coin[(r >> k) & 1];
        }
        psi[t * reg + r] = a;
    }
    let mut out = vec![marginal(&psi, reg)];
    let mut next = vec![C64::new(0.0, 0.0); dim];
    for (step, &k) in seq.iter().enumerate() {
        let bit = 1usize << k;
        let reach = step + 1;
        for x in t - step..=t + step {
            let base = x * reg;
            for r in (0..reg).filter(|r| r & bit == 0) {
                let (a0, a1) = (psi[base + r], psi[base + r + bit]);
                psi[base + r] = c[(0, 0)] * a0 + c[(0, 1)] * a1;
                psi[base + r + bit] = c[(1, 0)] * a0 + c[(1, 1)] * a1;
            }
        }
        next[(t - reach) * reg..(t + reach + 1) * reg]
            .iter_mut()
            .for_each(|a| *a = C64::new(0.0, 0.0));
        for x in t - step..=t + step {
            for r in 0..reg {
                let to = if r & bit == 0 { x - 1 } else { x + 1 };
                next[to * reg + r] = psi[x * reg + r];
            }
        }
        std::mem::swap(&mut psi, &mut next);
        out.push(marginal(&psi, reg));
    }
    Ok(out)
}

fn marginal(psi: &[C64], reg: usize) -> Vec<f64> {
    psi.chunks_exact(reg)
        .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coined::walk::{CoinedWalk, WalkStatePure};
    use crate::graphs::build_line;

    fn sym() -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [C64::new(s, 0.0), C64::new(0.0, s)]
    }

    #[test]
    fn one_coin_is_the_hadamard_walk() {
        let steps = 25;
        let dists =
            multi_coin_line_walk(&CoinSpec::Hadamard, 1, steps, MultiCoinOrder::Cyclic, sym(), 0).unwrap();
        let g = build_line(steps as usize).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let s = WalkStatePure::localized(&g, g.line_index(0).unwrap(), &sym()).unwrap();
        let end = walk.evolve_pure(&s, steps).unwrap();
        for (x, p) in dists[steps as usize].iter().enumerate() {
            let q = end.amplitudes[2 * x].norm_sqr() + end.amplitudes[2 * x + 1].norm_sqr();
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn convolution_matches_register_evolution_when_coins_are_fresh() {
        // Up to time 7 no coin of the 7-coin register run has been reused.
        let steps = 6;
        let fresh =
            multi_coin_line_walk(&CoinSpec::Hadamard, 8, steps, MultiCoinOrder::Cyclic, sym(), 0).unwrap();
        let reg =
            multi_coin_line_walk(&CoinSpec::Hadamard, 7, 8, MultiCoinOrder::Cyclic, sym(), 0).unwrap();
        for t in 0..=steps as usize {
            for x in 0..=2 * steps as usize {
                let a = fresh[t][x];
                let b = reg[t][x + 2];
                assert!((a - b).abs() < 1e-13, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn random_order_uses_each_coin_once_per_block() {
        let seq = coin_sequence(4, 12, MultiCoinOrder::Random, 3);
        for block in seq.chunks(4) {
            let mut b = block.to_vec();
            b.sort_unstable();
            assert_eq!(b, vec![0, 1, 2, 3]);
        }
        assert_eq!(seq, coin_sequence(4, 12, MultiCoinOrder::Random, 3));
    }

    #[test]
    fn memory_guard() {
        assert!(matches!(
            multi_coin_line_walk(&CoinSpec::Hadamard, 30, 40, MultiCoinOrder::Cyclic, sym(), 0),
            Err(Error::Size(_))
        ));
    }
}
