use crate::error::{param, Result};
use crate::C64;

/// Per-coordinate occupation `(P[0], P[1])` of the dephased hypercube walk with
/// energy `k` and per-walk dephasing rate `p`, after time `t`, from `0…0`.
///
/// Each coordinate is an independent two-level system; `β = √(16k² − p²)` is
/// taken as a complex number, so the underdamped and overdamped regimes share
/// one expression. At `p = 4k` the removable singularity is replaced by its
/// limit.
pub fn hypercube_factored_evolve(n: usize, k: f64, p: f64, t: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(param("n", "dimension must be at least 1"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(param("k", format!("{k} must be finite and positive")));
    }
    if !(p >= 0.0) {
        return Err(param("p", format!("{p} must be ≥ 0")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(param("t", format!("{t} must be finite and ≥ 0")));
    }
    let tau = t / (2.0 * n as f64);
    if p.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let disc = (4.0 * k - p) * (4.0 * k + p);
    let z2 = disc * tau * tau;
    let damped = if z2.abs() < 2.5e-3 {
        // cos z + pτ·sin(z)/z as power series in z² = β²τ², valid for either sign.
        let (mut c, mut sc, mut term) = (0.0, 0.0, 1.0);
        for j in 0..8 {
            let fact_c = (1..=2 * j).map(|m| m as f64).product::<f64>();
            c += term / fact_c;
            sc += term / (fact_c * (2 * j + 1) as f64);
            term *= -z2;
        }
        (-p * tau).exp() * (c + p * tau * sc)
    } else {
        // e^{−pτ}[cos βτ + (p/β) sin βτ] with each exponential formed whole,
        // so cosh/sinh never overflow in the overdamped regime.
        let beta = C64::new(disc, 0.0).sqrt();
        let i = C64::new(0.0, 1.0);
        let decay = C64::new(-p * tau, 0.0);
        let ratio = i * (p / beta);
        let up = (decay + i * beta * tau).exp() * (C64::new(1.0, 0.0) - ratio);
        let down = (decay - i * beta * tau).exp() * (C64::new(1.0, 0.0) + ratio);
        ((up + down) * 0.5).re
    };
    let p0 = 0.5 + 0.5 * damped;
    Ok((p0, 1.0 - p0))
}

/// Probability of vertex `x` when each coordinate is independently `(p0, p1)`.
pub fn product_probability(x: usize, n: usize, p0: f64, p1: f64) -> f64 {
    let w = x.count_ones() as i32;
    p0.powi(n as i32 - w) * p1.powi(w)
}

/// Full `2ⁿ` distribution of the factored solution.
pub fn product_distribution(n: usize, p0: f64, p1: f64) -> Vec<f64> {
    (0..1usize << n).map(|x| product_probability(x, n, p0, p1)).collect()
}
