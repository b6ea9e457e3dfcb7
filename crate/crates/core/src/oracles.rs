//! Closed-form reference values. Every oracle carries a note on the regime in
//! which its formula holds; values outside that regime are still returned,
//! flagged.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{param, Error, Result};
use crate::observables::PositionDistribution;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue<T = f64> {
    pub value: T,
    pub regime: &'static str,
    pub in_regime: bool,
}

impl<T> OracleValue<T> {
    fn new(value: T, regime: &'static str, in_regime: bool) -> Self {
        OracleValue {
            value,
            regime,
            in_regime,
        }
    }
}

/// Asymptotic `(|⟨x⟩|/T, σ²/T²)` of the Hadamard line walk from a basis coin.
pub fn hadamard_moments(steps: u64) -> OracleValue<(f64, f64)> {
    let c = 1.0 - FRAC_1_SQRT_2;
    OracleValue::new((c, c), "asymptotic, T ≫ 1", steps >= 20)
}

/// Bessel function `J_n(x)` of integer order `n ≥ 0` and real `x ≥ 0`.
///
/// Miller's downward recurrence normalised with `J₀ + 2ΣJ_{2k} = 1`; for
/// orders past `x²/4`, where the power series terms shrink from the start,
/// the series is summed directly.
pub fn bessel_j(n: u64, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if n as f64 > x * x / 4.0 + 20.0 {
        let q = -(x / 2.0).powi(2);
        let mut term = (1..=n).fold(1.0, |acc, j| acc * (x / 2.0) / j as f64);
        let mut sum = term;
        for m in 1..200u64 {
            term *= q / (m * (m + n)) as f64;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        return sum;
    }
    let start = {
        let m = (n as f64).max(x) as u64 + 40 + (x.sqrt() * 10.0) as u64;
        m + m % 2
    };
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (0..=start).rev() {
        // cur = J_k (unnormalised), next = J_{k+1}
        if k == n {
            want = cur;
        }
        if k == 0 {
            norm += cur;
        } else if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    want / norm
}

/// Continuous-time walk amplitude on the infinite line, `(−i)^|x| J_|x|(t)`,
/// for `H = ½A` (unit total hopping rate) from the origin.
pub fn ctqw_line_amplitude(x: i64, t: f64) -> C64 {
    let n = x.unsigned_abs();
    let phase = match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    phase * bessel_j(n, t)
}

/// Long-time growth rate of the variance of the coin-dephased Hadamard walk.
pub fn brun_dephase_variance_rate(theta: f64) -> OracleValue {
    let s = (2.0 * theta).sin();
    let c = (2.0 * theta).cos();
    let v = (c * c + 1.0) / (s * s);
    OracleValue::new(v, "large t, θ ≠ 0", s.abs() > 1e-12)
}

/// `σ(T)` of the pure Hadamard walk with its second-order correction.
pub fn hadamard_sigma(steps: f64) -> f64 {
    (1.0 - FRAC_1_SQRT_2).sqrt() * (steps - 1.0 / steps)
}

/// First-order upper bound on `σ(T, p)` under per-step measurement.
pub fn position_decoherence_sigma_bound(steps: f64, p: f64) -> OracleValue {
    let v = hadamard_sigma(steps) * (1.0 - p * steps / (6.0 * SQRT_2) + p / SQRT_2 * (1.0 - FRAC_1_SQRT_2));
    OracleValue::new(v, "pT ≪ 1, T ≫ 1", p * steps < 1.0 && steps >= 20.0)
}

/// Coefficient of `p` in [`position_decoherence_sigma_bound`], relative to `σ(T)`.
pub fn position_decoherence_p_coefficient() -> f64 {
    FRAC_1_SQRT_2 * (1.0 - FRAC_1_SQRT_2)
}

/// `σ(T, q) ≃ √T(1 + q⁴/2)` near the classical end of per-step measurement.
pub fn classical_end_sigma(steps: f64, q: f64) -> OracleValue {
    OracleValue::new(steps.sqrt() * (1.0 + q.powi(4) / 2.0), "q ≪ 1, T ≫ 1", q < 0.5 && steps >= 20.0)
}

fn check_mixing_args(n: usize, p: f64, eps: f64) -> Result<()> {
    if n < 3 {
        return Err(param("N", format!("cycle size {n} must be at least 3")));
    }
    if !(p > 0.0) {
        return Err(param("p", format!("{p} must be positive")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(param("epsilon", format!("{eps} must lie in (0, 1)")));
    }
    Ok(())
}

/// Small-rate upper bound on the instantaneous mixing time of the dephased
/// continuous-time walk on the `N`-cycle.
pub fn fedichkin_smallp_bound(n: usize, p: f64, eps: f64) -> Result<OracleValue> {
    check_mixing_args(n, p, eps)?;
    let nf = n as f64;
    let v = (1.0 / p) * (nf / eps).ln() * (1.0 + 2.0 / (nf - 2.0));
    Ok(OracleValue::new(v, "pN ≪ 1", p * nf < 1.0))
}

/// Large-rate `(lower, upper)` bounds on the same mixing time.
pub fn fedichkin_largep_bounds(n: usize, p: f64, eps: f64) -> Result<OracleValue<(f64, f64)>> {
    check_mixing_args(n, p, eps)?;
    let nf = n as f64;
    let lower = p * nf * nf / (PI * PI) * (2.0 / (nf * eps)).ln();
    let upper = p * nf * nf / 2.0 * ((2.0 + eps) / eps).ln();
    Ok(OracleValue::new((lower, upper), "p ≫ 1", p >= 10.0))
}

/// Lower bound on the time-averaged mixing time.
pub fn fedichkin_timeavg_bound(n: usize, p: f64, eps: f64) -> Result<OracleValue> {
    check_mixing_args(n, p, eps)?;
    let nf = n as f64;
    Ok(OracleValue::new(nf / (p * eps), "N ≫ 1, pN ≪ 1, pT ≫ 1", nf >= 10.0 && p * nf < 1.0))
}

/// Per-coordinate occupation `(P[0], P[1])` of the dephased hypercube walk,
/// with separate branches for under-, critically and over-damped rates.
pub fn alagic_probs(n: usize, k: f64, p: f64, t: f64) -> Result<OracleValue<(f64, f64)>> {
    if n == 0 || !(k > 0.0) || !(p >= 0.0) || !(t >= 0.0) {
        return Err(param("alagic", format!("needs n ≥ 1, k > 0, p ≥ 0, t ≥ 0 (n={n}, k={k}, p={p}, t={t})")));
    }
    let tau = t / (2.0 * n as f64);
    let disc = (4.0 * k - p) * (4.0 * k + p);
    let envelope = (-p * tau).exp();
    let damped = if disc > 0.0 {
        let x = disc.sqrt() * tau;
        let sinc = if x < 1e-8 { 1.0 } else { x.sin() / x };
        envelope * (x.cos() + p * tau * sinc)
    } else if disc == 0.0 {
        envelope * (1.0 + p * tau)
    } else {
        // e^{−pτ}(cosh x + pτ sinh(x)/x) with x = bτ, kept free of overflow
        // and of cancellation near the critical rate.
        let b = (-disc).sqrt();
        let x = b * tau;
        let a = ((b - p) * tau).exp();
        let cosh_part = 0.5 * (a + (-(b + p) * tau).exp());
        let sinhc_part = if x < 1e-8 { envelope } else { -a * (-2.0 * x).exp_m1() / (2.0 * x) };
        cosh_part + p * tau * sinhc_part
    };
    Ok(OracleValue::new((0.5 + 0.5 * damped, 0.5 - 0.5 * damped), "exact", true))
}

/// The `c`-th exact instantaneous mixing time (`c ≥ 1`), for `p < 4k`.
pub fn alagic_mixing_times(n: usize, k: f64, p: f64, c: u32) -> Result<OracleValue> {
    if !(p >= 0.0 && p < 4.0 * k) {
        return Err(param("p", format!("{p} must lie in [0, 4k) = [0, {})", 4.0 * k)));
    }
    if c == 0 {
        return Err(param("c", "must be a positive integer"));
    }
    let beta = (16.0 * k * k - p * p).sqrt();
    let a = (p * p / (8.0 * k * k) - 1.0).clamp(-1.0, 1.0).acos();
    Ok(OracleValue::new(
        n as f64 * (2.0 * PI * c as f64 - a) / beta,
        "exact, p < 4k",
        true,
    ))
}

/// Approximate `c`-th hitting time of the antipode and the hitting
/// probability there, for `p < 4k`.
pub fn alagic_hitting(n: usize, k: f64, p: f64, c: u32) -> Result<OracleValue<(f64, f64)>> {
    if !(p >= 0.0 && p < 4.0 * k) {
        return Err(param("p", format!("{p} must lie in [0, 4k) = [0, {})", 4.0 * k)));
    }
    let beta = (16.0 * k * k - p * p).sqrt();
    let m = (2 * c + 1) as f64;
    let time = 2.0 * PI * n as f64 * m / beta;
    let prob = (0.5 + 0.5 * (-p * PI * m / beta).exp()).powi(n as i32);
    Ok(OracleValue::new((time, prob), "p ≪ 4k", p < k))
}

/// Number of steps at which the hypercube search success probability peaks,
/// for `N` vertices.
pub fn search_peak_time(vertices: usize) -> f64 {
    PI / 2.0 * (vertices as f64 / 2.0).sqrt()
}

/// Binomial distribution of the classical ±1 walk after `T` steps, on
/// coordinates `−T..=T`.
pub fn classical_binomial(steps: u64) -> Result<PositionDistribution> {
    let t = steps as usize;
    let mut row = vec![1.0f64];
    for _ in 0..t {
        let mut next = vec![0.0; row.len() + 1];
        for (k, v) in row.iter().enumerate() {
            next[k] += 0.5 * v;
            next[k + 1] += 0.5 * v;
        }
        row = next;
    }
    let mut p = vec![0.0; 2 * t + 1];
    for (k, v) in row.into_iter().enumerate() {
        p[2 * k] = v;
    }
    Ok(PositionDistribution::new(p, steps as f64)?.with_parity(Some((steps % 2) as u8)))
}

/// Hamming-weight distribution of the simple random walk on the
/// `n`-cube after `t` steps from `0…0`.
pub fn classical_hypercube_weights(n: usize, t: u64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    w[0] = 1.0;
    for _ in 0..t {
        let mut next = vec![0.0; n + 1];
        for (k, v) in w.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let up = (n - k) as f64 / n as f64;
            if k < n {
                next[k + 1] += v * up;
            }
            if k > 0 {
                next[k - 1] += v * (1.0 - up);
            }
        }
        w = next;
    }
    w
}

/// Probability that the simple random walk on the `n`-cube sits at the
/// antipode of its start after `t` steps.
pub fn classical_hypercube_antipode(n: usize, t: u64) -> f64 {
    classical_hypercube_weights(n, t)[n]
}

/// Lookup by name for the command line: oracle name and numeric arguments to
/// printable `(label, value)` pairs.
pub fn evaluate(name: &str, args: &[f64]) -> Result<Vec<(String, f64)>> {
    let need = |k: usize| -> Result<()> {
        if args.len() != k {
            return Err(param("oracle arguments", format!("{name} takes {k} numbers, got {}", args.len())));
        }
        Ok(())
    };
    let u = |x: f64| x.max(0.0).round() as usize;
    Ok(match name {
        "hadamard_moments" => {
            need(1)?;
            let v = hadamard_moments(u(args[0]) as u64).value;
            vec![("mean_over_t".into(), v.0), ("variance_over_t2".into(), v.1)]
        }
        "ctqw_line_amplitude" => {
            need(2)?;
            let a = ctqw_line_amplitude(args[0].round() as i64, args[1]);
            vec![("re".into(), a.re), ("im".into(), a.im), ("probability".into(), a.norm_sqr())]
        }
        "brun_dephase_variance_rate" => {
            need(1)?;
            vec![("rate".into(), brun_dephase_variance_rate(args[0]).value)]
        }
        "position_decoherence_sigma_bound" => {
            need(2)?;
            vec![("sigma_bound".into(), position_decoherence_sigma_bound(args[0], args[1]).value)]
        }
        "classical_end_sigma" => {
            need(2)?;
            vec![("sigma".into(), classical_end_sigma(args[0], args[1]).value)]
        }
        "fedichkin_smallp_bound" => {
            need(3)?;
            vec![("upper".into(), fedichkin_smallp_bound(u(args[0]), args[1], args[2])?.value)]
        }
        "fedichkin_largep_bounds" => {
            need(3)?;
            let v = fedichkin_largep_bounds(u(args[0]), args[1], args[2])?.value;
            vec![("lower".into(), v.0), ("upper".into(), v.1)]
        }
        "fedichkin_timeavg_bound" => {
            need(3)?;
            vec![("lower".into(), fedichkin_timeavg_bound(u(args[0]), args[1], args[2])?.value)]
        }
        "alagic_probs" => {
            need(4)?;
            let v = alagic_probs(u(args[0]), args[1], args[2], args[3])?.value;
            vec![("p0".into(), v.0), ("p1".into(), v.1)]
        }
        "alagic_mixing_times" => {
            need(4)?;
            vec![("time".into(), alagic_mixing_times(u(args[0]), args[1], args[2], u(args[3]) as u32)?.value)]
        }
        "alagic_hitting" => {
            need(4)?;
            let v = alagic_hitting(u(args[0]), args[1], args[2], u(args[3]) as u32)?.value;
            vec![("time".into(), v.0), ("probability".into(), v.1)]
        }
        "search_peak_time" => {
            need(1)?;
            vec![("steps".into(), search_peak_time(u(args[0])))]
        }
        "classical_binomial" => {
            need(1)?;
            let t = u(args[0]) as i64;
            classical_binomial(t as u64)?
                .probabilities
                .into_iter()
                .enumerate()
                .map(|(k, v)| (format!("x={}", k as i64 - t), v))
                .collect()
        }
        other => return Err(Error::Unsupported(format!("no oracle named `{other}`"))),
    })
}

/// Names accepted by [`evaluate`].
pub const ORACLE_NAMES: &[&str] = &[
    "hadamard_moments",
    "ctqw_line_amplitude",
    "brun_dephase_variance_rate",
    "position_decoherence_sigma_bound",
    "classical_end_sigma",
    "fedichkin_smallp_bound",
    "fedichkin_largep_bounds",
    "fedichkin_timeavg_bound",
    "alagic_probs",
    "alagic_mixing_times",
    "alagic_hitting",
    "search_peak_time",
    "classical_binomial",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_known_values() {
        // Reference values from standard tables.
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(2, 10.0) - 0.254_630_313_685_120_6).abs() < 1e-13);
        assert_eq!(bessel_j(0, 0.0), 1.0);
    }

    #[test]
    fn bessel_branches_meet() {
        // Order 25 at x=4 takes the series, 24 and 23 the recurrence.
        let a = bessel_j(24, 4.0);
        let b = bessel_j(25, 4.0);
        let c = bessel_j(23, 4.0);
        assert!((c + b - 2.0 * 24.0 / 4.0 * a).abs() < 1e-12 * c);

        let a = bessel_j(60, 40.0);
        let b = bessel_j(61, 40.0);
        let c = bessel_j(59, 40.0);
        // Three-term recurrence J_{n−1} + J_{n+1} = (2n/x) J_n.
        assert!((c + b - 2.0 * 60.0 / 40.0 * a).abs() < 1e-12 * a);
        // Reference value from a standard library implementation.
        assert!((b / 4.875_472_633_403_446_5e-8 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bessel_normalisation() {
        let s: f64 = (-200i64..=200).map(|x| ctqw_line_amplitude(x, 40.0).norm_sqr()).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moment_and_bound_arithmetic() {
        let (m, v) = hadamard_moments(100).value;
        assert!((m - 0.292_893_218_813_452_5).abs() < 1e-15 && m == v);
        assert!((brun_dephase_variance_rate(PI / 4.0).value - 1.0).abs() < 1e-12);
        assert!((brun_dephase_variance_rate(PI / 8.0).value - 3.0).abs() < 1e-12);
        assert!((position_decoherence_p_coefficient() - 0.20711).abs() < 1e-5);
        assert_eq!(position_decoherence_sigma_bound(100.0, 0.0).value, hadamard_sigma(100.0));
        assert_eq!(classical_end_sigma(100.0, 0.0).value, 10.0);
    }

    #[test]
    fn fedichkin_arithmetic() {
        let v = fedichkin_smallp_bound(10, 0.01, 0.01).unwrap().value;
        assert!((v - 100.0 * 1000f64.ln() * 1.25).abs() < 1e-9);
        let w = fedichkin_smallp_bound(10, 0.02, 0.01).unwrap().value;
        assert!((v / w - 2.0).abs() < 1e-12);
        let (lo, hi) = fedichkin_largep_bounds(5, 20.0, 0.02).unwrap().value;
        assert!((hi - 250.0 * 101f64.ln()).abs() < 1e-9);
        assert!((lo - 500.0 / (PI * PI) * 20f64.ln()).abs() < 1e-9);
        assert!(lo < hi);
        assert!((fedichkin_timeavg_bound(100, 0.001, 0.01).unwrap().value - 1e7).abs() < 1e-3);
    }

    #[test]
    fn alagic_regimes() {
        let n = 4;
        assert_eq!(alagic_probs(n, 1.0, 0.0, 0.0).unwrap().value, (1.0, 0.0));
        let t = alagic_mixing_times(n, 1.0, 0.0, 1).unwrap().value;
        assert!((t - n as f64 * PI / 4.0).abs() < 1e-12);
        for p in [0.0, 1.0, 3.9] {
            for c in 1..4 {
                let t = alagic_mixing_times(n, 1.0, p, c).unwrap().value;
                let (p0, _) = alagic_probs(n, 1.0, p, t).unwrap().value;
                assert!((p0 - 0.5).abs() < 1e-10);
            }
        }
        assert!(alagic_mixing_times(n, 1.0, 4.0, 1).is_err());
        // Overdamped approach to ½ is monotone.
        let mut last = 1.0;
        for k in 0..50 {
            let p0 = alagic_probs(n, 1.0, 6.0, k as f64).unwrap().value.0;
            assert!(p0 <= last + 1e-15 && p0 >= 0.5);
            last = p0;
        }
        let (h, r) = alagic_hitting(n, 1.0, 0.0, 0).unwrap().value;
        assert!((h - n as f64 * PI / 2.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let r1 = alagic_hitting(n, 1.0, 0.5, 0).unwrap().value.1;
        assert!(r1 < r);
    }

    #[test]
    fn classical_references() {
        let b = classical_binomial(2).unwrap();
        assert_eq!(b.probabilities, vec![0.25, 0.0, 0.5, 0.0, 0.25]);
        assert!((search_peak_time(512) - 25.132_741_228_718_345).abs() < 1e-9);
        assert!((search_peak_time(2) - PI / 2.0).abs() < 1e-15);
        let w = classical_hypercube_weights(3, 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // 0→1→2→3 with probabilities 1, 2/3, 1/3.
        assert!((w[3] - 2.0 / 9.0).abs() < 1e-15);
    }
}
