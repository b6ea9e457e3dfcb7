use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::walk::{CoinedWalk, WalkStateDensity};
use crate::error::{param, Error, Result};
use crate::graphs::GraphKind;
use crate::C64;

/// Largest (vertex, port) basis for which density-matrix evolution is offered.
pub const DENSITY_BASIS_CAP: usize = 4096;

/// Order in which the coins of a multi-coin walk are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiCoinOrder {
    Cyclic,
    /// A fresh random permutation of the coins for every block of `M` steps.
    Random,
}

/// The decoherence family applied after each unitary step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseChannel {
    None,
    MeasurePosition,
    MeasureCoin,
    MeasureBoth,
    /// Two coin Kraus operators `diag(e^{±iθ}, e^{∓iθ})/√2`.
    CoinDephase { theta: f64 },
    /// Each edge broken independently for one step with probability `p_link`.
    BrokenLinks { p_link: f64 },
    /// Coin angle drawn from `N(π/2, (√p_spread·π/4)²)`.
    ImperfectCoin { p_spread: f64 },
    MultiCoin { coins: usize, order: MultiCoinOrder },
}

/// When noise events may happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Every step, with probability `rate`.
    PerStep,
    /// Only at steps that are multiples of `m`, with probability `rate`.
    FixedInterval { m: u64 },
    /// At `count` distinct steps drawn uniformly from `1..=horizon`.
    RandomTimes { count: u64, horizon: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub channel: NoiseChannel,
    pub rate: f64,
    pub schedule: Schedule,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            channel: NoiseChannel::None,
            rate: 0.0,
            schedule: Schedule::PerStep,
        }
    }

    /// `channel` every step with probability `rate`.
    pub fn per_step(channel: NoiseChannel, rate: f64) -> Result<Self> {
        let spec = NoiseSpec {
            channel,
            rate,
            schedule: Schedule::PerStep,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(param("rate", format!("{} is outside [0, 1]", self.rate)));
        }
        match self.channel {
            NoiseChannel::CoinDephase { theta } if !(0.0..=FRAC_PI_4).contains(&theta) => {
                return Err(param("theta", format!("{theta} is outside [0, π/4]")));
            }
            NoiseChannel::BrokenLinks { p_link } if !(0.0..=1.0).contains(&p_link) => {
                return Err(param("p_link", format!("{p_link} is outside [0, 1]")));
            }
            NoiseChannel::ImperfectCoin { p_spread } if !(p_spread >= 0.0 && p_spread.is_finite()) => {
                return Err(param("p_spread", format!("{p_spread} must be finite and ≥ 0")));
            }
            NoiseChannel::MultiCoin { coins: 0, .. } => {
                return Err(param("coins", "at least one coin is required"));
            }
            _ => {}
        }
        match self.schedule {
            Schedule::FixedInterval { m: 0 } => Err(param("m", "interval must be at least 1")),
            Schedule::RandomTimes { count, horizon, .. } if count > horizon => Err(param(
                "count",
                format!("{count} event times do not fit in a horizon of {horizon}"),
            )),
            _ => Ok(()),
        }
    }

    /// Event probability at steps `1..=steps` (index 0 is step 1).
    pub fn strengths(&self, steps: u64) -> Vec<f64> {
        let mut out = vec![0.0; steps as usize];
        match self.schedule {
            Schedule::PerStep => out.iter_mut().for_each(|s| *s = self.rate),
            Schedule::FixedInterval { m } => {
                for t in (m..=steps).step_by(m as usize) {
                    out[(t - 1) as usize] = self.rate;
                }
            }
            Schedule::RandomTimes { count, horizon, seed } => {
                for t in random_event_times(count, horizon, seed) {
                    if t <= steps {
                        out[(t - 1) as usize] = self.rate;
                    }
                }
            }
        }
        out
    }
}

/// The sorted event steps of a [`Schedule::RandomTimes`] schedule.
pub fn random_event_times(count: u64, horizon: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<u64> = sample(&mut rng, horizon as usize, count.min(horizon) as usize)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    times.sort_unstable();
    times
}

/// Coin Kraus pair for dephasing strength `theta`.
pub fn coin_dephase_kraus(theta: f64) -> [DMatrix<C64>; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e = C64::from_polar(s, theta);
    let f = C64::from_polar(s, -theta);
    let z = C64::new(0.0, 0.0);
    [
        DMatrix::from_row_slice(2, 2, &[e, z, z, f]),
        DMatrix::from_row_slice(2, 2, &[f, z, z, e]),
    ]
}

/// `Σ_k (I ⊗ K_k) ρ (I ⊗ K_k)†` for coin-only Kraus operators.
pub fn apply_coin_kraus(rho: &DMatrix<C64>, d: usize, kraus: &[DMatrix<C64>]) -> DMatrix<C64> {
    let n = rho.nrows();
    let v = n / d;
    let mut out = DMatrix::<C64>::zeros(n, n);
    for k in kraus {
        let kd = k.adjoint();
        for y in 0..v {
            for x in 0..v {
                let block = rho.view((x * d, y * d), (d, d));
                let b = k * block * &kd;
                let mut target = out.view_mut((x * d, y * d), (d, d));
                target += b;
            }
        }
    }
    out
}

/// Mixes `ρ` with its dephased version: entries not kept by `keep` are scaled
/// by `1 − s`.
fn partial_mask(rho: &mut DMatrix<C64>, s: f64, keep: impl Fn(usize, usize) -> bool) {
    let n = rho.nrows();
    let f = 1.0 - s;
    for j in 0..n {
        for i in 0..n {
            if !keep(i, j) {
                rho[(i, j)] *= f;
            }
        }
    }
}

/// One density step `ρ → (1−s) UρU† + s 𝒩(UρU†)` with event strength `s`.
pub fn step_density_with_strength(
    walk: &CoinedWalk<'_>,
    rho: &WalkStateDensity,
    channel: NoiseChannel,
    s: f64,
) -> Result<WalkStateDensity> {
    let d = walk.graph().max_degree();
    let rho_next = match channel {
        NoiseChannel::BrokenLinks { p_link } => {
            let unbroken = walk.conjugate(&rho.rho)?;
            if s == 0.0 {
                unbroken
            } else {
                let broken = broken_links_density(walk, &rho.rho, p_link)?;
                unbroken * C64::new(1.0 - s, 0.0) + broken * C64::new(s, 0.0)
            }
        }
        NoiseChannel::ImperfectCoin { .. } | NoiseChannel::MultiCoin { .. } => {
            return Err(Error::Unsupported(format!(
                "{channel:?} has no density form; use trajectories or the multi-coin engine"
            )));
        }
        _ => {
            let mut u = walk.conjugate(&rho.rho)?;
            match channel {
                NoiseChannel::MeasurePosition => partial_mask(&mut u, s, |i, j| i / d == j / d),
                NoiseChannel::MeasureCoin => partial_mask(&mut u, s, |i, j| i % d == j % d),
                NoiseChannel::MeasureBoth => partial_mask(&mut u, s, |i, j| i == j),
                NoiseChannel::CoinDephase { theta } => {
                    if d != 2 {
                        return Err(Error::Unsupported("coin dephasing needs a two-state coin".into()));
                    }
                    if s > 0.0 {
                        let k = apply_coin_kraus(&u, d, &coin_dephase_kraus(theta));
                        u = u * C64::new(1.0 - s, 0.0) + k * C64::new(s, 0.0);
                    }
                }
                _ => {}
            }
            u
        }
    };
    Ok(WalkStateDensity {
        rho: rho_next,
        time: rho.time + 1,
    })
}

/// One noisy density step, with the event strength taken from the schedule
/// at step `rho.time + 1`.
pub fn step_density_noisy(
    walk: &CoinedWalk<'_>,
    rho: &WalkStateDensity,
    noise: &NoiseSpec,
) -> Result<WalkStateDensity> {
    noise.validate()?;
    let t = rho.time + 1;
    let s = noise.strengths(t)[(t - 1) as usize];
    step_density_with_strength(walk, rho, noise.channel, s)
}

/// Coin dephasing step at full strength.
pub fn coin_dephase_step(
    walk: &CoinedWalk<'_>,
    rho: &WalkStateDensity,
    theta: f64,
) -> Result<WalkStateDensity> {
    let noise = NoiseSpec::per_step(NoiseChannel::CoinDephase { theta }, 1.0)?;
    step_density_with_strength(walk, rho, noise.channel, 1.0)
}

/// Runs `steps` noisy density steps, calling `observe` after each one.
pub fn evolve_density(
    walk: &CoinedWalk<'_>,
    initial: &WalkStateDensity,
    noise: &NoiseSpec,
    steps: u64,
    mut observe: impl FnMut(&WalkStateDensity) -> Result<()>,
) -> Result<WalkStateDensity> {
    noise.validate()?;
    let strengths = noise.strengths(steps);
    let mut cur = initial.clone();
    for s in strengths {
        cur = step_density_with_strength(walk, &cur, noise.channel, s)?;
        observe(&cur)?;
    }
    Ok(cur)
}

/// Where the broken-link step sends basis index `a`: along its edge when the
/// edge holds, back onto the same vertex with the coin flipped when it breaks.
/// Also returns an edge id shared by both directions of the edge.
pub(crate) struct BrokenLinkMap {
    pub normal: Vec<usize>,
    pub flipped: Vec<usize>,
    pub edge: Vec<usize>,
    pub edge_count: usize,
}

pub(crate) const NO_EDGE: usize = usize::MAX;

impl BrokenLinkMap {
    pub fn new(walk: &CoinedWalk<'_>) -> Result<Self> {
        let g = walk.graph();
        if !matches!(g.kind(), GraphKind::Line { .. } | GraphKind::Cycle { .. }) {
            return Err(Error::Unsupported(
                "broken links are defined on the line and the cycle only".into(),
            ));
        }
        let n = walk.dim();
        let mut normal = vec![NO_EDGE; n];
        let mut flipped = vec![NO_EDGE; n];
        let mut edge = vec![NO_EDGE; n];
        let mut ids = std::collections::BTreeMap::new();
        for a in 0..n {
            let Some(t) = walk.shift_target(a) else { continue };
            let (x, y) = (a / 2, t / 2);
            let key = (x.min(y), x.max(y));
            let next = ids.len();
            edge[a] = *ids.entry(key).or_insert(next);
            normal[a] = t;
            flipped[a] = x * 2 + (1 - a % 2);
        }
        Ok(BrokenLinkMap {
            normal,
            flipped,
            edge,
            edge_count: ids.len(),
        })
    }
}

/// Exact average over breakage patterns of `U_B ρ U_B†`, edges breaking
/// independently with probability `q`.
pub fn broken_links_density(
    walk: &CoinedWalk<'_>,
    rho: &DMatrix<C64>,
    q: f64,
) -> Result<DMatrix<C64>> {
    let map = BrokenLinkMap::new(walk)?;
    let n = walk.dim();
    let d = 2;
    // σ = C ρ C† (coin only).
    let mut sigma = DMatrix::<C64>::zeros(n, n);
    {
        let mut tmp = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let col: Vec<C64> = rho.column(j).iter().copied().collect();
            let mut out = vec![C64::new(0.0, 0.0); n];
            walk.apply_coin(&col, &mut out);
            tmp.column_mut(j).copy_from_slice(&out);
        }
        let adj = tmp.adjoint();
        for j in 0..n {
            let col: Vec<C64> = adj.column(j).iter().copied().collect();
            let mut out = vec![C64::new(0.0, 0.0); n];
            walk.apply_coin(&col, &mut out);
            sigma.column_mut(j).copy_from_slice(&out);
        }
    }
    for a in 0..n {
        if map.edge[a] == NO_EDGE && sigma[(a, a)].norm() > 1e-24 {
            return Err(Error::Contract(format!(
                "population on empty port {} of vertex {}",
                a % d,
                a / d
            )));
        }
    }
    let mut out = DMatrix::<C64>::zeros(n, n);
    let (p, r) = (1.0 - q, q);
    for b in 0..n {
        if map.edge[b] == NO_EDGE {
            continue;
        }
        for a in 0..n {
            if map.edge[a] == NO_EDGE {
                continue;
            }
            let v = sigma[(a, b)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            if map.edge[a] == map.edge[b] {
                out[(map.normal[a], map.normal[b])] += v * p;
                out[(map.flipped[a], map.flipped[b])] += v * r;
            } else {
                out[(map.normal[a], map.normal[b])] += v * (p * p);
                out[(map.normal[a], map.flipped[b])] += v * (p * r);
                out[(map.flipped[a], map.normal[b])] += v * (r * p);
                out[(map.flipped[a], map.flipped[b])] += v * (r * r);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coined::coin::CoinSpec;
    use crate::coined::walk::WalkStatePure;
    use crate::graphs::{build_cycle, build_line};
    use crate::linalg::{hermiticity_deviation, max_abs_diff, trace};

    fn start(g: &crate::graphs::GraphSpec) -> WalkStateDensity {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let o = g.line_index(0).unwrap();
        WalkStateDensity::from_pure(
            &WalkStatePure::localized(g, o, &[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap(),
        )
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(NoiseSpec::per_step(NoiseChannel::MeasureBoth, 1.5).is_err());
        assert!(NoiseSpec::per_step(NoiseChannel::MeasureBoth, f64::NAN).is_err());
        assert!(NoiseSpec::per_step(NoiseChannel::CoinDephase { theta: 1.0 }, 1.0).is_err());
        let bad = NoiseSpec {
            channel: NoiseChannel::MeasureBoth,
            rate: 1.0,
            schedule: Schedule::FixedInterval { m: 0 },
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn schedules_place_events() {
        let every3 = NoiseSpec {
            channel: NoiseChannel::MeasureBoth,
            rate: 1.0,
            schedule: Schedule::FixedInterval { m: 3 },
        };
        assert_eq!(every3.strengths(7), vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let random = NoiseSpec {
            schedule: Schedule::RandomTimes { count: 4, horizon: 10, seed: 9 },
            ..every3
        };
        let s = random.strengths(10);
        assert_eq!(s.iter().filter(|&&v| v == 1.0).count(), 4);
        assert_eq!(s, random.strengths(10));
    }

    #[test]
    fn zero_rate_is_the_unitary_step() {
        let g = build_line(6).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let rho = start(&g);
        for ch in [
            NoiseChannel::MeasureBoth,
            NoiseChannel::MeasureCoin,
            NoiseChannel::MeasurePosition,
            NoiseChannel::CoinDephase { theta: 0.3 },
            NoiseChannel::BrokenLinks { p_link: 0.4 },
        ] {
            let noisy =
                step_density_noisy(&walk, &rho, &NoiseSpec::per_step(ch, 0.0).unwrap()).unwrap();
            let exact = walk.conjugate(&rho.rho).unwrap();
            assert!(max_abs_diff(&noisy.rho, &exact) < 1e-14, "{ch:?}");
        }
    }

    #[test]
    fn full_measurement_diagonalises() {
        let g = build_line(6).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::MeasureBoth, 1.0).unwrap();
        let r = step_density_noisy(&walk, &start(&g), &noise).unwrap();
        for j in 0..r.rho.ncols() {
            for i in 0..r.rho.nrows() {
                if i != j {
                    assert_eq!(r.rho[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn channels_preserve_trace_and_hermiticity() {
        let g = build_cycle(5).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let mut rho = WalkStateDensity::from_pure(
            &WalkStatePure::localized(&g, 0, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap(),
        );
        let channels = [
            NoiseChannel::MeasurePosition,
            NoiseChannel::MeasureCoin,
            NoiseChannel::CoinDephase { theta: 0.2 },
            NoiseChannel::BrokenLinks { p_link: 0.3 },
            NoiseChannel::MeasureBoth,
        ];
        for (k, ch) in channels.iter().cycle().take(20).enumerate() {
            let noise = NoiseSpec::per_step(*ch, 0.1 + 0.04 * k as f64).unwrap();
            rho = step_density_noisy(&walk, &rho, &noise).unwrap();
            assert!((trace(&rho.rho) - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(hermiticity_deviation(&rho.rho) < 1e-12);
        }
        rho.check_positive(1e-10).unwrap();
    }

    #[test]
    fn coin_dephasing_scales_coin_coherences_by_cos_two_theta() {
        let theta = 0.3;
        let rho = DMatrix::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let out = apply_coin_kraus(&rho, 2, &coin_dephase_kraus(theta));
        for j in 0..4 {
            for i in 0..4 {
                let f = if i % 2 == j % 2 { 1.0 } else { (2.0 * theta).cos() };
                assert!((out[(i, j)] - rho[(i, j)] * f).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn measure_position_keeps_position_blocks() {
        let g = build_cycle(3).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let rho = WalkStateDensity::from_pure(&WalkStatePure::uniform(&g));
        let noise = NoiseSpec::per_step(NoiseChannel::MeasurePosition, 1.0).unwrap();
        let out = step_density_noisy(&walk, &rho, &noise).unwrap();
        let u = walk.conjugate(&rho.rho).unwrap();
        for j in 0..6 {
            for i in 0..6 {
                let expect = if i / 2 == j / 2 { u[(i, j)] } else { C64::new(0.0, 0.0) };
                assert!((out.rho[(i, j)] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn all_links_broken_freezes_position() {
        let g = build_line(5).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::BrokenLinks { p_link: 1.0 }, 1.0).unwrap();
        let o = g.line_index(0).unwrap();
        let mut rho = start(&g);
        for _ in 0..5 {
            rho = step_density_noisy(&walk, &rho, &noise).unwrap();
            let diag = rho.diagonal();
            assert!((diag[2 * o] + diag[2 * o + 1] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn trajectory_only_channels_are_refused_in_density_mode() {
        let g = build_line(3).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::ImperfectCoin { p_spread: 0.5 }, 1.0).unwrap();
        assert!(matches!(
            step_density_noisy(&walk, &start(&g), &noise),
            Err(Error::Unsupported(_))
        ));
    }
}
