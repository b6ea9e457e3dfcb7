use std::collections::HashMap;

use rayon::prelude::*;

use crate::coined::noise::step_density_with_strength;
use crate::coined::trajectory::{TrajectoryPlan, ENSEMBLE_CHUNK};
use crate::coined::{CoinedWalk, NoiseChannel, NoiseSpec, WalkStateDensity, WalkStatePure, DENSITY_BASIS_CAP};
use crate::error::{param, Error, Result};
use crate::graphs::{GraphKind, GraphSpec};
use crate::C64;

/// Cumulative arrival below `1 − TRUNCATION_SLACK` marks the average as truncated.
pub const TRUNCATION_SLACK: f64 = 1e-3;

/// Arrival statistics at one target vertex. Series are indexed from `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingResult {
    pub target: usize,
    /// First-arrival probabilities `r(t)` of the absorbing walk.
    pub r_series: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `P(target, t)` of the walk without the absorbing measurement.
    pub one_shot_series: Vec<f64>,
    /// First local peak of `one_shot_series`.
    pub one_shot: Option<(u64, f64)>,
    /// First local peak of `r_series`.
    pub first_arrival_peak: Option<(u64, f64)>,
    /// `Σ t·r(t)` over the simulated window.
    pub average: f64,
    pub truncated: bool,
}

impl HittingResult {
    /// Builds the derived values; `stride` is 2 on bipartite graphs so peaks
    /// are compared within one time parity.
    pub fn from_series(target: usize, r_series: Vec<f64>, one_shot_series: Vec<f64>, stride: usize) -> Self {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = r_series
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect();
        let average = r_series.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r).sum();
        let truncated = cumulative.last().copied().unwrap_or(0.0) < 1.0 - TRUNCATION_SLACK;
        HittingResult {
            target,
            one_shot: first_peak(&one_shot_series, stride),
            first_arrival_peak: first_peak(&r_series, stride),
            r_series,
            cumulative,
            one_shot_series,
            average,
            truncated,
        }
    }

    /// First `t` at which the cumulative arrival reaches `r0`.
    pub fn concurrent(&self, r0: f64) -> Option<u64> {
        self.cumulative.iter().position(|&c| c >= r0).map(|k| k as u64 + 1)
    }
}

/// Time stride for peak detection: 2 on bipartite lattices, 1 elsewhere.
pub fn peak_stride(graph: &GraphSpec) -> usize {
    match graph.kind() {
        GraphKind::Line { .. } | GraphKind::Hypercube { .. } => 2,
        GraphKind::Cycle { size } if size % 2 == 0 => 2,
        _ => 1,
    }
}

/// First local maximum of a `t = 1..` series, ignoring the leading zero
/// stretch and comparing values `stride` apart.
pub fn first_peak(series: &[f64], stride: usize) -> Option<(u64, f64)> {
    let stride = stride.max(1);
    let start = series.iter().position(|&v| v > 1e-14)?;
    let mut k = start;
    while k + stride < series.len() {
        let prev_ok = k < start + stride || series[k] >= series[k - stride];
        if prev_ok && series[k] > series[k + stride] {
            return Some((k as u64 + 1, series[k]));
        }
        k += stride;
    }
    None
}

/// How a measured walk is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HittingMode {
    /// Pure if there is no noise, density otherwise.
    Auto,
    Pure,
    Density,
    Trajectories { count: u64, seed: u64 },
    /// Exact per-step basis measurement via renewal over symmetry orbits;
    /// `MeasureBoth` with a per-step schedule on a hypercube only.
    OrbitRenewal,
}

fn target_indices(graph: &GraphSpec, target: usize) -> Result<std::ops::Range<usize>> {
    if target >= graph.vertex_count() {
        return Err(param("target", format!("{target} is not a vertex")));
    }
    let d = graph.max_degree();
    Ok(target * d..(target + 1) * d)
}

fn check_start(initial: &[C64], range: &std::ops::Range<usize>, target: usize) -> Result<()> {
    if initial[range.clone()].iter().any(|a| a.norm_sqr() > 1e-24) {
        return Err(Error::Degenerate(format!("walk starts on the absorbing vertex {target}")));
    }
    Ok(())
}

/// Runs the absorbing walk and its unmeasured twin for `t_max` steps.
pub fn measured_walk_run(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    target: usize,
    noise: &NoiseSpec,
    t_max: u64,
    mode: HittingMode,
) -> Result<HittingResult> {
    noise.validate()?;
    let g = walk.graph();
    let range = target_indices(g, target)?;
    check_start(&initial.amplitudes, &range, target)?;
    let noiseless = noise.channel == NoiseChannel::None || noise.rate == 0.0;
    let mode = match mode {
        HittingMode::Auto if noiseless => HittingMode::Pure,
        HittingMode::Auto => HittingMode::Density,
        m => m,
    };
    let (r, one) = match mode {
        HittingMode::Pure => {
            if !noiseless {
                return Err(Error::Unsupported("pure mode needs a noiseless walk".into()));
            }
            (pure_series(walk, initial, &range, t_max, true)?, pure_series(walk, initial, &range, t_max, false)?)
        }
        HittingMode::Density => {
            let rho = WalkStateDensity::from_pure(initial);
            (
                density_series(walk, &rho, &range, noise, t_max, true)?,
                density_series(walk, &rho, &range, noise, t_max, false)?,
            )
        }
        HittingMode::Trajectories { count, seed } => (
            trajectory_series(walk, initial, &range, noise, t_max, count, seed, true)?,
            trajectory_series(walk, initial, &range, noise, t_max, count, seed, false)?,
        ),
        HittingMode::OrbitRenewal => {
            let n = match g.kind() {
                GraphKind::Hypercube { dim } => *dim,
                _ => return Err(Error::Unsupported("orbit renewal needs a hypercube".into())),
            };
            if noise.channel != NoiseChannel::MeasureBoth
                || noise.schedule != crate::coined::Schedule::PerStep
            {
                return Err(Error::Unsupported(
                    "orbit renewal covers per-step basis measurement only".into(),
                ));
            }
            let start = initial
                .amplitudes
                .chunks_exact(g.max_degree())
                .position(|c| c.iter().any(|a| a.norm_sqr() > 0.0))
                .unwrap_or(0);
            let labels = hypercube_orbit_labels(n, start, target);
            (
                orbit_renewal(walk, initial, target, noise.rate, t_max, &labels, true)?,
                orbit_renewal(walk, initial, target, noise.rate, t_max, &labels, false)?,
            )
        }
        HittingMode::Auto => unreachable!(),
    };
    Ok(HittingResult::from_series(target, r, one, peak_stride(g)))
}

fn target_weight(amps: &[C64], range: &std::ops::Range<usize>) -> f64 {
    amps[range.clone()].iter().map(|a| a.norm_sqr()).sum()
}

/// Noiseless walk; with `absorb` the target amplitudes are removed each step.
fn pure_series(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    range: &std::ops::Range<usize>,
    t_max: u64,
    absorb: bool,
) -> Result<Vec<f64>> {
    let n = walk.dim();
    let mut cur = initial.amplitudes.clone();
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    let mut next = vec![C64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(t_max as usize);
    for _ in 0..t_max {
        walk.step_into(&cur, &mut scratch, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
        out.push(target_weight(&cur, range));
        if absorb {
            cur[range.clone()].iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        }
    }
    Ok(out)
}

fn density_series(
    walk: &CoinedWalk<'_>,
    initial: &WalkStateDensity,
    range: &std::ops::Range<usize>,
    noise: &NoiseSpec,
    t_max: u64,
    absorb: bool,
) -> Result<Vec<f64>> {
    let dim = walk.dim();
    if dim > DENSITY_BASIS_CAP {
        return Err(Error::Size(format!(
            "density mode needs basis ≤ {DENSITY_BASIS_CAP}, got {dim}"
        )));
    }
    let strengths = noise.strengths(t_max);
    let mut rho = initial.clone();
    let mut out = Vec::with_capacity(t_max as usize);
    for &s in &strengths {
        rho = step_density_with_strength(walk, &rho, noise.channel, s)?;
        out.push(range.clone().map(|i| rho.rho[(i, i)].re).sum());
        if absorb {
            for i in range.clone() {
                rho.rho.row_mut(i).fill(C64::new(0.0, 0.0));
                rho.rho.column_mut(i).fill(C64::new(0.0, 0.0));
            }
        }
    }
    Ok(out)
}

/// Weighted unravelling: measurement outcomes are drawn relative to the
/// surviving weight, absorbed weight is accumulated.
#[allow(clippy::too_many_arguments)]
fn trajectory_series(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    range: &std::ops::Range<usize>,
    noise: &NoiseSpec,
    t_max: u64,
    count: u64,
    seed: u64,
    absorb: bool,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(param("trajectories", "count must be positive"));
    }
    let strengths = noise.strengths(t_max);
    let plan = TrajectoryPlan::new(walk, noise)?;
    let width = t_max as usize;
    let chunks = count.div_ceil(ENSEMBLE_CHUNK);
    let partial: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let end = ((c + 1) * ENSEMBLE_CHUNK).min(count);
            for i in c * ENSEMBLE_CHUNK..end {
                plan.run(initial, &strengths, seed, i, |t, amps| {
                    let k = (t - initial.time - 1) as usize;
                    acc[k] += target_weight(amps, range);
                    if absorb {
                        amps[range.clone()].iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                    }
                    Ok(())
                })?;
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
    total.iter_mut().for_each(|v| *v /= count as f64);
    Ok(total)
}

/// Orbit labels of hypercube basis states under the bit permutations that
/// fix `start` and `target`: for `y = x ⊕ start` and mask `m = start ⊕ target`,
/// the label is `(|y ∧ m|, |y ∧ ¬m|, bit c of y, c ∈ m)`.
pub fn hypercube_orbit_labels(n: usize, start: usize, target: usize) -> Vec<usize> {
    let mask = start ^ target;
    let mut ids: HashMap<(u32, u32, bool, bool), usize> = HashMap::new();
    let mut labels = Vec::with_capacity(n << n);
    for x in 0..1usize << n {
        let y = x ^ start;
        let a = (y & mask).count_ones();
        let b = (y & !mask).count_ones();
        for c in 0..n {
            let key = (a, b, (y >> c) & 1 == 1, (mask >> c) & 1 == 1);
            let next = ids.len();
            labels.push(*ids.entry(key).or_insert(next));
        }
    }
    labels
}

/// Target-vertex probability (`absorb = false`) or first-arrival series
/// (`absorb = true`) of a walk whose full basis state is measured after every
/// step with probability `p`.
///
/// Between measurements the walk is coherent, so the series is a renewal sum
/// over the last collapse. Collapsed states in one orbit of `labels` (a
/// partition invariant under walk symmetries that fix `target`) evolve
/// identically up to symmetry, so one representative per orbit suffices.
pub fn orbit_renewal(
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    target: usize,
    p: f64,
    t_max: u64,
    labels: &[usize],
    absorb: bool,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(param("rate", format!("{p} must lie in [0, 1]")));
    }
    let g = walk.graph();
    let dim = walk.dim();
    if labels.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: labels.len(),
        });
    }
    let range = target_indices(g, target)?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut reps = vec![usize::MAX; k];
    let mut at_target = vec![None::<bool>; k];
    for (i, &o) in labels.iter().enumerate() {
        if reps[o] == usize::MAX {
            reps[o] = i;
        }
        let here = range.contains(&i);
        match at_target[o] {
            None => at_target[o] = Some(here),
            Some(v) if v != here => {
                return Err(Error::Contract(format!("orbit {o} mixes the target with other vertices")));
            }
            _ => {}
        }
    }
    let wired: Vec<bool> = {
        let mut w = vec![false; dim];
        walk.wired_indices().into_iter().for_each(|i| w[i] = true);
        w
    };
    let tm = t_max as usize;
    // Per source: (target weight, orbit weights) at each lag 1..=t_max.
    let evolve = |amps: Vec<C64>| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut cur = amps;
        let mut scratch = vec![C64::new(0.0, 0.0); dim];
        let mut next = vec![C64::new(0.0, 0.0); dim];
        let mut tg = Vec::with_capacity(tm);
        let mut ow = Vec::with_capacity(tm);
        for _ in 0..tm {
            walk.step_into(&cur, &mut scratch, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
            tg.push(target_weight(&cur, &range));
            let mut w = vec![0.0; k];
            for (i, a) in cur.iter().enumerate() {
                w[labels[i]] += a.norm_sqr();
            }
            if absorb {
                for (o, wo) in w.iter_mut().enumerate() {
                    if at_target[o] == Some(true) {
                        *wo = 0.0;
                    }
                }
                cur[range.clone()].iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
            }
            ow.push(w);
        }
        Ok((tg, ow))
    };
    let (tg0, ow0) = evolve(initial.amplitudes.clone())?;
    let sources: Vec<Result<(Vec<f64>, Vec<Vec<f64>>)>> = reps
        .par_iter()
        .map(|&r| {
            if !wired[r] {
                return Ok((vec![0.0; tm], vec![vec![0.0; k]; tm]));
            }
            let mut a = vec![C64::new(0.0, 0.0); dim];
            a[r] = C64::new(1.0, 0.0);
            evolve(a)
        })
        .collect();
    let sources: Vec<(Vec<f64>, Vec<Vec<f64>>)> = sources.into_iter().collect::<Result<_>>()?;

    let q = 1.0 - p;
    let qpow: Vec<f64> = (0..=tm).map(|j| q.powi(j as i32)).collect();
    // w[s][o]: mass collapsed into orbit o at step s (s = 1..=t_max).
    let mut w = vec![vec![0.0; k]; tm + 1];
    let mut out = vec![0.0; tm];
    for t in 1..=tm {
        let mut val = qpow[t - 1] * tg0[t - 1];
        let mut coll: Vec<f64> = ow0[t - 1].iter().map(|x| p * qpow[t - 1] * x).collect();
        for s in 1..t {
            let lag = t - s;
            let f = qpow[lag - 1];
            for (o, &ws) in w[s].iter().enumerate() {
                if ws == 0.0 {
                    continue;
                }
                let (tg, ow) = &sources[o];
                val += ws * f * tg[lag - 1];
                for (c, x) in coll.iter_mut().zip(&ow[lag - 1]) {
                    *c += ws * p * f * x;
                }
            }
        }
        out[t - 1] = val;
        w[t] = coll;
    }
    Ok(out)
}

/// Every basis state in its own orbit.
pub fn identity_labels(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}
