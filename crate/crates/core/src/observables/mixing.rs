use nalgebra::DMatrix;

use super::distribution::{running_average, tv_distance, uniform_reference, ObservableSeries};
use crate::coined::noise::step_density_with_strength;
use crate::coined::{CoinedWalk, NoiseSpec, WalkStateDensity};
use crate::ctqw::{density_diagonal, evolve_master_with, CtqwNoiseSpec, HamiltonianSpec, StepControl};
use crate::error::{param, Result};
use crate::graphs::GraphSpec;
use crate::C64;

/// Default factor between the candidate mixing time and the horizon that
/// must stay below ε before the result counts as converged.
pub const DEFAULT_MARGIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingKind {
    /// TV of the instantaneous distribution.
    Instantaneous,
    /// TV of the running time average.
    TimeAveraged,
    /// Every sampled time at which the instantaneous TV is below ε.
    InstantaneousMixingTimes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingResult {
    pub epsilon: f64,
    pub kind: MixingKind,
    /// `M(ε)`: the last sampled time with TV ≥ ε (0 if there is none). For
    /// [`MixingKind::InstantaneousMixingTimes`], the first time below ε.
    pub value: Option<f64>,
    /// Times below ε ([`MixingKind::InstantaneousMixingTimes`] only).
    pub times: Vec<f64>,
    /// Last sampled time.
    pub horizon: f64,
    pub margin: f64,
    pub converged: bool,
}

/// Incremental `M(ε)` tracker over a time-ordered stream of TV values.
#[derive(Debug, Clone)]
pub struct MixingTracker {
    epsilon: f64,
    margin: f64,
    kind: MixingKind,
    last_violation: f64,
    last_time: f64,
    last_tv: f64,
    below: Vec<f64>,
}

impl MixingTracker {
    pub fn new(epsilon: f64, margin: f64, kind: MixingKind) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(param("epsilon", format!("{epsilon} must be positive")));
        }
        if !(margin >= 1.0) {
            return Err(param("margin", format!("{margin} must be at least 1")));
        }
        Ok(MixingTracker {
            epsilon,
            margin,
            kind,
            last_violation: 0.0,
            last_time: 0.0,
            last_tv: f64::INFINITY,
            below: Vec::new(),
        })
    }

    pub fn push(&mut self, t: f64, tv: f64) {
        if tv >= self.epsilon {
            self.last_violation = t;
        } else {
            self.below.push(t);
        }
        self.last_time = t;
        self.last_tv = tv;
    }

    /// True once the margin window past the last violation has been seen.
    pub fn settled(&self) -> bool {
        self.last_tv < self.epsilon && self.last_time >= self.margin * self.last_violation
    }

    pub fn result(&self) -> MixingResult {
        let (value, converged) = match self.kind {
            MixingKind::InstantaneousMixingTimes => {
                (self.below.first().copied(), !self.below.is_empty())
            }
            _ => (Some(self.last_violation), self.settled()),
        };
        MixingResult {
            epsilon: self.epsilon,
            kind: self.kind,
            value,
            times: if self.kind == MixingKind::InstantaneousMixingTimes {
                self.below.clone()
            } else {
                Vec::new()
            },
            horizon: self.last_time,
            margin: self.margin,
            converged,
        }
    }
}

/// `M(ε)` from sampled TV values.
pub fn mixing_time_from_tv(
    times: &[f64],
    tv: &[f64],
    epsilon: f64,
    margin: f64,
    kind: MixingKind,
) -> Result<MixingResult> {
    let mut tr = MixingTracker::new(epsilon, margin, kind)?;
    for (&t, &v) in times.iter().zip(tv) {
        tr.push(t, v);
    }
    Ok(tr.result())
}

/// `M(ε)` of a series against `reference`; time-averaged kinds use the
/// running average of the series.
pub fn mixing_time(
    series: &ObservableSeries,
    reference: &[f64],
    epsilon: f64,
    margin: f64,
    kind: MixingKind,
) -> Result<MixingResult> {
    let times = series.times();
    let tv = match kind {
        MixingKind::TimeAveraged => {
            let d: Vec<Vec<f64>> = series.entries().iter().map(|e| e.probabilities.clone()).collect();
            running_average(&d)
                .iter()
                .map(|a| tv_distance(a, reference))
                .collect::<Result<Vec<_>>>()?
        }
        _ => series.tv_to(reference)?,
    };
    mixing_time_from_tv(&times, &tv, epsilon, margin, kind)
}

/// Mixing of a coined walk run in density form, stepping until the margin
/// window is clean or `max_steps` is reached. The instantaneous reference is
/// parity-restricted on bipartite line/cycle graphs (walk started on vertex
/// `start`); the time-averaged reference is plain uniform.
#[allow(clippy::too_many_arguments)]
pub fn discrete_mixing(
    walk: &CoinedWalk<'_>,
    initial: &WalkStateDensity,
    start: usize,
    noise: &NoiseSpec,
    epsilon: f64,
    margin: f64,
    kind: MixingKind,
    max_steps: u64,
) -> Result<MixingResult> {
    noise.validate()?;
    let g = walk.graph();
    let d = g.max_degree();
    let strengths = noise.strengths(max_steps);
    let mut tr = MixingTracker::new(epsilon, margin, kind)?;
    let plain = uniform_reference(g, None).probabilities;
    let mut rho = initial.clone();
    let mut sum = vec![0.0; g.vertex_count()];
    for (k, &s) in strengths.iter().enumerate() {
        let t = k as u64 + 1;
        rho = step_density_with_strength(walk, &rho, noise.channel, s)?;
        let p: Vec<f64> = rho.diagonal().chunks_exact(d).map(|c| c.iter().sum()).collect();
        let tv = match kind {
            MixingKind::TimeAveraged => {
                sum.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
                let avg: Vec<f64> = sum.iter().map(|a| a / t as f64).collect();
                tv_distance(&avg, &plain)?
            }
            _ => {
                let parity = ((start as u64 + t) % 2) as u8;
                tv_distance(&p, &uniform_reference(g, Some(parity)).probabilities)?
            }
        };
        tr.push(t as f64, tv);
        if kind != MixingKind::InstantaneousMixingTimes && tr.settled() {
            break;
        }
    }
    Ok(tr.result())
}

/// Mixing of a continuous-time walk under the master equation, sampled every
/// `dt`, integrated in windows until the margin window is clean or
/// `max_time` is reached. Returns the result and the largest step halving
/// count used.
#[allow(clippy::too_many_arguments)]
pub fn ctqw_mixing(
    graph: &GraphSpec,
    h: &HamiltonianSpec,
    noise: Option<&CtqwNoiseSpec>,
    rho0: &DMatrix<C64>,
    epsilon: f64,
    margin: f64,
    kind: MixingKind,
    dt: f64,
    max_time: f64,
    control: &StepControl,
) -> Result<MixingResult> {
    if !(dt > 0.0) {
        return Err(param("dt", format!("{dt} must be positive")));
    }
    let reference = uniform_reference(graph, None).probabilities;
    let mut tr = MixingTracker::new(epsilon, margin, kind)?;
    let mut rho = rho0.clone();
    let total = (max_time / dt).round() as u64;
    let window = 200u64;
    let mut k = 0u64;
    let mut sum = vec![0.0; graph.vertex_count()];
    let mut prev = density_diagonal(rho0);
    'outer: while k < total {
        let n = window.min(total - k);
        let times: Vec<f64> = (1..=n).map(|j| j as f64 * dt).collect();
        let sol = evolve_master_with(graph, h, noise, &rho, &times, control, |m| m.clone())?;
        for m in &sol.samples {
            k += 1;
            let t = k as f64 * dt;
            let p = density_diagonal(m);
            let tv = match kind {
                MixingKind::TimeAveraged => {
                    // Trapezoid running integral.
                    for ((a, x), y) in sum.iter_mut().zip(&p).zip(&prev) {
                        *a += 0.5 * dt * (x + y);
                    }
                    let avg: Vec<f64> = sum.iter().map(|a| a / t).collect();
                    tv_distance(&avg, &reference)?
                }
                _ => tv_distance(&p, &reference)?,
            };
            prev = p;
            tr.push(t, tv);
            if kind != MixingKind::InstantaneousMixingTimes && tr.settled() {
                break 'outer;
            }
        }
        rho = sol.samples.last().expect("window sample").clone();
    }
    Ok(tr.result())
}
