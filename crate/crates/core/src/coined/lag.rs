//! Position moments of a line walk under coin-only noise, without storing the
//! density matrix.
//!
//! For coin-only Kraus channels every quantity we need is carried by the
//! 2×2 coin blocks summed along each diagonal of ρ. With `Δ = y − x` and
//! `M_a(Δ) = Σ_x x^a ρ(x,·; x+Δ,·)`, one step maps lag `Δ` to
//! `Δ + s_{c'} − s_c` and `M'_a` is a binomial combination of
//! `M_0..M_a`. The moments are `⟨x^a⟩ = Tr M_a(0)`. Memory is `O(T)`
//! instead of `O(T²)` for ρ.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::C64;

type M2 = Matrix2<C64>;

/// Step of the walker for coin state `c` (port 0 is −1, port 1 is +1).
const STEP: [i64; 2] = [-1, 1];

/// `(t, ⟨x⟩, ⟨x²⟩)` after every step `1..=steps`.
pub fn line_moments_coin_noise(
    coin: &M2,
    kraus: &[M2],
    initial_coin: [C64; 2],
    steps: u64,
) -> Result<Vec<(u64, f64, f64)>> {
    if kraus.is_empty() {
        return Err(Error::Parameter {
            name: "kraus",
            message: "at least one Kraus operator is required".into(),
        });
    }
    let t = steps as usize;
    let width = 4 * t + 1;
    let centre = 2 * t;
    let zero = M2::zeros();
    let mut m: [Vec<M2>; 3] = [vec![zero; width], vec![zero; width], vec![zero; width]];
    let psi = nalgebra::Vector2::new(initial_coin[0], initial_coin[1]);
    m[0][centre] = psi * psi.adjoint();
    let coin_adj = coin.adjoint();
    let kraus_adj: Vec<M2> = kraus.iter().map(|k| k.adjoint()).collect();
    let mut out = Vec::with_capacity(t);
    let mut span = 0usize;
    for step in 1..=t {
        let mut next: [Vec<M2>; 3] = [vec![zero; width], vec![zero; width], vec![zero; width]];
        let lo = centre - span;
        let hi = centre + span;
        for lag in lo..=hi {
            let rotated: [M2; 3] = [
                coin * m[0][lag] * coin_adj,
                coin * m[1][lag] * coin_adj,
                coin * m[2][lag] * coin_adj,
            ];
            for c in 0..2 {
                for cp in 0..2 {
                    let target = (lag as i64 + STEP[cp] - STEP[c]) as usize;
                    let s = STEP[c] as f64;
                    let v0 = rotated[0][(c, cp)];
                    let v1 = rotated[1][(c, cp)];
                    let v2 = rotated[2][(c, cp)];
                    next[0][target][(c, cp)] += v0;
                    next[1][target][(c, cp)] += v1 + v0 * s;
                    next[2][target][(c, cp)] += v2 + v1 * (2.0 * s) + v0;
                }
            }
        }
        span = (span + 2).min(centre);
        for a in next.iter_mut() {
            for lag in centre - span..=centre + span {
                let v = a[lag];
                let mut acc = zero;
                for (k, kd) in kraus.iter().zip(&kraus_adj) {
                    acc += k * v * kd;
                }
                a[lag] = acc;
            }
        }
        m = next;
        let mean = m[1][centre].trace().re;
        let second = m[2][centre].trace().re;
        out.push((step as u64, mean, second));
    }
    Ok(out)
}
