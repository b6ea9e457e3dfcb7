use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::coin::angle_coin;
use super::noise::{BrokenLinkMap, NoiseChannel, NoiseSpec, NO_EDGE};
use super::walk::{CoinedWalk, WalkStatePure};
use crate::error::{Error, Result};
use crate::rng::step_rng;
use crate::C64;

/// Trajectories per work unit; ensembles reduce unit sums in index order, so
/// results do not depend on the thread count.
pub const ENSEMBLE_CHUNK: u64 = 64;

/// What happened at a noise event.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Vertex(usize),
    Port(usize),
    Basis { vertex: usize, port: usize },
    /// Lower endpoint of every edge broken this step (cycle wrap edge: the
    /// larger-index vertex's `+1` end is reported as its lower index `N−1`).
    BrokenLinks(Vec<usize>),
    CoinAngle(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: WalkStatePure,
    pub record: Vec<(u64, Outcome)>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Samples index `k` of `weights` (which sum to `total`) with one uniform draw.
fn sample_index(weights: impl Iterator<Item = f64>, total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last = k;
            acc += w;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Projective measurement on a pure state; collapses in place and keeps the
/// incoming norm (absorbed runs carry a sub-unit weight).
fn measure(amps: &mut [C64], d: usize, channel: NoiseChannel, rng: &mut ChaCha8Rng) -> Outcome {
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let outcome = match channel {
        NoiseChannel::MeasurePosition => {
            let w = amps.chunks_exact(d).map(|c| c.iter().map(|a| a.norm_sqr()).sum());
            let x = sample_index(w, total, rng);
            for (y, c) in amps.chunks_exact_mut(d).enumerate() {
                if y != x {
                    c.iter_mut().for_each(|a| *a = zero());
                }
            }
            Outcome::Vertex(x)
        }
        NoiseChannel::MeasureCoin => {
            let w = (0..d).map(|c| amps.iter().skip(c).step_by(d).map(|a| a.norm_sqr()).sum());
            let c = sample_index(w, total, rng);
            for (i, a) in amps.iter_mut().enumerate() {
                if i % d != c {
                    *a = zero();
                }
            }
            Outcome::Port(c)
        }
        _ => {
            let i = sample_index(amps.iter().map(|a| a.norm_sqr()), total, rng);
            amps.iter_mut().for_each(|a| *a = zero());
            amps[i] = C64::new(total.sqrt(), 0.0);
            return Outcome::Basis {
                vertex: i / d,
                port: i % d,
            };
        }
    };
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let scale = total.sqrt() / norm;
    amps.iter_mut().for_each(|a| *a *= scale);
    outcome
}

/// One step with every edge in `broken` replaced by a reflection that flips
/// the coin.
pub fn broken_links_step(
    walk: &CoinedWalk<'_>,
    state: &WalkStatePure,
    broken: &[bool],
) -> Result<WalkStatePure> {
    let map = BrokenLinkMap::new(walk)?;
    broken_step_with_map(walk, &map, &state.amplitudes, broken).map(|amplitudes| WalkStatePure {
        amplitudes,
        time: state.time + 1,
    })
}

fn broken_step_with_map(
    walk: &CoinedWalk<'_>,
    map: &BrokenLinkMap,
    input: &[C64],
    broken: &[bool],
) -> Result<Vec<C64>> {
    if broken.len() != map.edge_count {
        return Err(Error::Dimension {
            expected: map.edge_count,
            found: broken.len(),
        });
    }
    let mut coin = vec![zero(); input.len()];
    walk.apply_coin(input, &mut coin);
    let mut out = vec![zero(); input.len()];
    for (a, &v) in coin.iter().enumerate() {
        match map.edge[a] {
            NO_EDGE => {
                if v.norm_sqr() > 1e-24 {
                    return Err(Error::Contract(format!("amplitude on empty port at index {a}")));
                }
            }
            e if broken[e] => out[map.flipped[a]] += v,
            _ => out[map.normal[a]] += v,
        }
    }
    Ok(out)
}

/// Coin step with a random angle drawn about `π/2` with spread `√p·π/4`.
pub fn imperfect_coin_step(
    walk: &CoinedWalk<'_>,
    state: &WalkStatePure,
    p_spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(WalkStatePure, f64)> {
    if walk.graph().max_degree() != 2 {
        return Err(Error::Unsupported("imperfect coin needs a two-state coin".into()));
    }
    let phi = draw_angle(p_spread, rng)?;
    let coin = angle_coin(phi);
    let n = walk.dim();
    let mut scratch = vec![zero(); n];
    walk.apply_coin_matrix(&coin, &state.amplitudes, &mut scratch);
    let mut out = vec![zero(); n];
    walk.shift_into(&scratch, &mut out)?;
    Ok((
        WalkStatePure {
            amplitudes: out,
            time: state.time + 1,
        },
        phi,
    ))
}

fn draw_angle(p_spread: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let sd = p_spread.sqrt() * FRAC_PI_4;
    let normal = Normal::new(FRAC_PI_2, sd)
        .map_err(|e| Error::Parameter { name: "p_spread", message: e.to_string() })?;
    Ok(normal.sample(rng))
}

/// One pure-state unravelling of `noise` over `steps` steps.
///
/// The random stream for step `t` is keyed by `(master_seed, index, t)`, so a
/// trajectory is reproducible on its own regardless of how an ensemble is
/// scheduled.
pub fn trajectory_sample(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    noise: &NoiseSpec,
    steps: u64,
    master_seed: u64,
    index: u64,
) -> Result<Trajectory> {
    noise.validate()?;
    let strengths = noise.strengths(steps);
    let plan = TrajectoryPlan::new(walk, noise)?;
    plan.run(initial, &strengths, master_seed, index, |_, _| Ok(()))
}

/// Precomputed per-walk tables for fast repeated trajectories.
pub(crate) struct TrajectoryPlan<'a, 'g> {
    walk: &'a CoinedWalk<'g>,
    channel: NoiseChannel,
    links: Option<BrokenLinkMap>,
}

impl<'a, 'g> TrajectoryPlan<'a, 'g> {
    pub fn new(walk: &'a CoinedWalk<'g>, noise: &NoiseSpec) -> Result<Self> {
        let links = match noise.channel {
            NoiseChannel::CoinDephase { .. } => {
                return Err(Error::Unsupported(
                    "coin dephasing has non-orthogonal Kraus branches; use density mode".into(),
                ));
            }
            NoiseChannel::MultiCoin { .. } => {
                return Err(Error::Unsupported(
                    "multi-coin walks run on their own engine".into(),
                ));
            }
            NoiseChannel::ImperfectCoin { .. } if walk.graph().max_degree() != 2 => {
                return Err(Error::Unsupported("imperfect coin needs a two-state coin".into()));
            }
            NoiseChannel::BrokenLinks { .. } => Some(BrokenLinkMap::new(walk)?),
            _ => None,
        };
        Ok(TrajectoryPlan {
            walk,
            channel: noise.channel,
            links,
        })
    }

    /// Runs one trajectory; `observe(t, amplitudes)` sees the state after each
    /// step.
    pub fn run(
        &self,
        initial: &WalkStatePure,
        strengths: &[f64],
        master_seed: u64,
        index: u64,
        mut observe: impl FnMut(u64, &mut [C64]) -> Result<()>,
    ) -> Result<Trajectory> {
        let walk = self.walk;
        let d = walk.graph().max_degree();
        let n = walk.dim();
        let mut cur = initial.amplitudes.clone();
        let mut scratch = vec![zero(); n];
        let mut next = vec![zero(); n];
        let mut record = Vec::new();
        for (k, &s) in strengths.iter().enumerate() {
            let t = initial.time + k as u64 + 1;
            let mut rng = step_rng(master_seed, index, t);
            let event = s > 0.0 && rng.random::<f64>() < s;
            match self.channel {
                NoiseChannel::BrokenLinks { p_link } if event => {
                    let map = self.links.as_ref().expect("link map");
                    let broken: Vec<bool> =
                        (0..map.edge_count).map(|_| rng.random::<f64>() < p_link).collect();
                    next = broken_step_with_map(walk, map, &cur, &broken)?;
                    let lows = lower_endpoints(walk, map, &broken);
                    record.push((t, Outcome::BrokenLinks(lows)));
                }
                NoiseChannel::ImperfectCoin { p_spread } if event => {
                    let phi = draw_angle(p_spread, &mut rng)?;
                    walk.apply_coin_matrix(&angle_coin(phi), &cur, &mut scratch);
                    walk.shift_into(&scratch, &mut next)?;
                    record.push((t, Outcome::CoinAngle(phi)));
                }
                _ => walk.step_into(&cur, &mut scratch, &mut next)?,
            }
            std::mem::swap(&mut cur, &mut next);
            if event
                && cur.iter().any(|a| a.norm_sqr() > 0.0)
                && matches!(
                    self.channel,
                    NoiseChannel::MeasurePosition | NoiseChannel::MeasureCoin | NoiseChannel::MeasureBoth
                )
            {
                record.push((t, measure(&mut cur, d, self.channel, &mut rng)));
            }
            observe(t, &mut cur)?;
        }
        Ok(Trajectory {
            state: WalkStatePure {
                amplitudes: cur,
                time: initial.time + strengths.len() as u64,
            },
            record,
        })
    }
}

fn lower_endpoints(walk: &CoinedWalk<'_>, map: &BrokenLinkMap, broken: &[bool]) -> Vec<usize> {
    let mut lows: Vec<usize> = Vec::new();
    for a in 0..walk.dim() {
        let e = map.edge[a];
        if e != NO_EDGE && broken[e] {
            let x = a / 2;
            let y = map.normal[a] / 2;
            lows.push(x.min(y));
        }
    }
    lows.sort_unstable();
    lows.dedup();
    lows
}

/// Mean final vertex distribution over `count` trajectories.
pub fn ensemble_position_distribution(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    noise: &NoiseSpec,
    steps: u64,
    count: u64,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let v = walk.graph().vertex_count();
    let d = walk.graph().max_degree();
    ensemble_reduce(walk, initial, noise, steps, count, master_seed, v, |traj, acc| {
        for (x, c) in traj.state.amplitudes.chunks_exact(d).enumerate() {
            acc[x] += c.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
    })
    .map(|mut sum| {
        sum.iter_mut().for_each(|s| *s /= count as f64);
        sum
    })
}

/// Runs `count` trajectories in parallel chunks, folding each finished
/// trajectory into a `width`-long accumulator; chunk sums are added in index
/// order.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_reduce(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    noise: &NoiseSpec,
    steps: u64,
    count: u64,
    master_seed: u64,
    width: usize,
    fold: impl Fn(&Trajectory, &mut [f64]) + Sync,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let strengths = noise.strengths(steps);
    let plan = TrajectoryPlan::new(walk, noise)?;
    let chunks = count.div_ceil(ENSEMBLE_CHUNK);
    let partial: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let end = ((c + 1) * ENSEMBLE_CHUNK).min(count);
            for i in c * ENSEMBLE_CHUNK..end {
                let traj = plan.run(initial, &strengths, master_seed, i, |_, _| Ok(()))?;
                fold(&traj, &mut acc);
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Mean vertex distribution at each of `times` (a subset of `0..=steps`,
/// in any order) over `count` trajectories.
pub fn ensemble_marginals(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    noise: &NoiseSpec,
    steps: u64,
    count: u64,
    master_seed: u64,
    times: &[u64],
) -> Result<Vec<Vec<f64>>> {
    noise.validate()?;
    if count == 0 {
        return Err(Error::Parameter {
            name: "trajectories",
            message: "count must be positive".into(),
        });
    }
    let v = walk.graph().vertex_count();
    let d = walk.graph().max_degree();
    let strengths = noise.strengths(steps);
    let plan = TrajectoryPlan::new(walk, noise)?;
    // slot[t] = position of t in `times`, if requested.
    let mut slot = vec![usize::MAX; steps as usize + 1];
    for (k, &t) in times.iter().enumerate() {
        if t > steps {
            return Err(Error::Parameter {
                name: "times",
                message: format!("{t} is beyond the {steps}-step horizon"),
            });
        }
        slot[t as usize] = k;
    }
    let width = times.len() * v;
    let add = |amps: &[C64], k: usize, acc: &mut [f64]| {
        for (x, c) in amps.chunks_exact(d).enumerate() {
            acc[k * v + x] += c.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
    };
    let chunks = count.div_ceil(ENSEMBLE_CHUNK);
    let partial: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let end = ((c + 1) * ENSEMBLE_CHUNK).min(count);
            for i in c * ENSEMBLE_CHUNK..end {
                if slot[0] != usize::MAX {
                    add(&initial.amplitudes, slot[0], &mut acc);
                }
                plan.run(initial, &strengths, master_seed, i, |t, amps| {
                    let k = slot[(t - initial.time) as usize];
                    if k != usize::MAX {
                        add(amps, k, &mut acc);
                    }
                    Ok(())
                })?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in partial {
        for (t, x) in total.iter_mut().zip(p?) {
            *t += x;
        }
    }
    Ok(total
        .chunks_exact(v.max(1))
        .map(|c| c.iter().map(|x| x / count as f64).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coined::coin::CoinSpec;
    use crate::graphs::{build_cycle, build_line};

    fn sym(g: &crate::graphs::GraphSpec) -> WalkStatePure {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        WalkStatePure::localized(g, g.line_index(0).unwrap(), &[C64::new(s, 0.0), C64::new(0.0, s)])
            .unwrap()
    }

    #[test]
    fn noiseless_trajectory_is_the_unitary_walk() {
        let g = build_line(20).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::MeasureBoth, 0.0).unwrap();
        let t = trajectory_sample(&walk, &sym(&g), &noise, 20, 1, 0).unwrap();
        assert!(t.record.is_empty());
        assert_eq!(t.state, walk.evolve_pure(&sym(&g), 20).unwrap());
    }

    #[test]
    fn full_rate_measurement_records_every_step() {
        let g = build_line(15).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::MeasureBoth, 1.0).unwrap();
        let t = trajectory_sample(&walk, &sym(&g), &noise, 15, 3, 7).unwrap();
        assert_eq!(t.record.len(), 15);
        assert_eq!(t.record, trajectory_sample(&walk, &sym(&g), &noise, 15, 3, 7).unwrap().record);
    }

    #[test]
    fn broken_links_limits() {
        let g = build_cycle(9).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let s0 = WalkStatePure::basis(&g, 4, 0);
        let none = broken_links_step(&walk, &s0, &[false; 9]).unwrap();
        assert_eq!(none, walk.step_pure(&s0).unwrap());
        let all = broken_links_step(&walk, &s0, &[true; 9]).unwrap();
        let p4: f64 = all.amplitudes[8..10].iter().map(|a| a.norm_sqr()).sum();
        assert!((p4 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_spread_imperfect_coin_is_hadamard() {
        let g = build_line(10).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::ImperfectCoin { p_spread: 0.0 }, 1.0).unwrap();
        let t = trajectory_sample(&walk, &sym(&g), &noise, 10, 0, 0).unwrap();
        let exact = walk.evolve_pure(&sym(&g), 10).unwrap();
        let err = t
            .state
            .amplitudes
            .iter()
            .zip(&exact.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn coin_dephasing_has_no_trajectory_form() {
        let g = build_line(4).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::CoinDephase { theta: 0.2 }, 1.0).unwrap();
        assert!(matches!(
            trajectory_sample(&walk, &sym(&g), &noise, 3, 0, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let g = build_line(12).unwrap();
        let walk = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let noise = NoiseSpec::per_step(NoiseChannel::MeasurePosition, 0.2).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_position_distribution(&walk, &sym(&g), &noise, 12, 300, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
