//! Evaluation of one concrete experiment (a single sweep point).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use qwalkdec_core::coined::{ensemble_marginals, multi_coin_line_walk, search_evolve, DENSITY_BASIS_CAP};
use qwalkdec_core::coined::noise::step_density_with_strength;
use qwalkdec_core::ctqw::{
    evolve_master_with, hypercube_factored_evolve, product_probability, ClassicalCtrw, SpectralPropagator, StepControl,
};
use qwalkdec_core::graphs::{build_cycle, build_glued_trees, build_hypercube, build_line, load_graph};
use qwalkdec_core::observables::hitting::{first_peak, measured_walk_run, peak_stride, HittingMode};
use qwalkdec_core::observables::mixing::{ctqw_mixing, discrete_mixing, DEFAULT_MARGIN};
use qwalkdec_core::observables::periodicity::{find_period, PERIOD_TOLERANCE};
use qwalkdec_core::observables::{moments, top_hat_fit, tv_distance, uniform_reference, PositionDistribution};
use qwalkdec_core::{
    CoinSpec, CoinedWalk, CtqwNoise, CtqwNoiseSpec, Error as CoreError, GraphKind, GraphSpec, HamiltonianSpec,
    HamiltonianVariant, MixingKind, MultiCoinOrder, NoiseChannel, NoiseSpec, Schedule, WalkStateDensity,
    WalkStatePure, C64,
};

use crate::config::*;
use crate::error::RunError;

/// One output record before the sweep columns are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub time: Option<f64>,
    pub observable: &'static str,
    pub x: Option<String>,
    pub value: Option<f64>,
    pub converged: bool,
}

impl Row {
    fn at(time: f64, observable: &'static str, x: Option<String>, value: f64) -> Self {
        Row {
            time: Some(time),
            observable,
            x,
            value: Some(value),
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PointOutput {
    pub rows: Vec<Row>,
    pub converged: bool,
}

/// Maps a core error to a config error on `prefix.<name>` when it is a
/// parameter error, keeping the core classification otherwise.
fn under(prefix: &'static str) -> impl Fn(CoreError) -> RunError {
    move |e| match e {
        CoreError::Parameter { name, message } => RunError::Config {
            field: format!("{prefix}.{name}"),
            message,
        },
        other => RunError::core(prefix, other),
    }
}

fn bad(field: impl Into<String>, message: impl Into<String>) -> RunError {
    RunError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn gamma_of(cfg: &ExperimentConfig) -> f64 {
    let c = &cfg.continuous;
    match (cfg.kind, c.k, cfg.graph.dim) {
        (ExperimentKind::Hypercube, Some(k), Some(n)) => k / n as f64,
        _ => c.gamma.unwrap_or(0.5),
    }
}

pub fn build_graph(cfg: &ExperimentConfig, base: &Path) -> Result<GraphSpec, RunError> {
    let g = &cfg.graph;
    let made = match cfg.kind {
        ExperimentKind::Line => {
            let w = match (g.size, cfg.walk) {
                (Some(w), _) => w,
                (None, WalkType::Discrete) => cfg.steps() as usize,
                // Ballistic front moves at speed 2γ.
                (None, WalkType::Continuous) => (2.0 * gamma_of(cfg) * cfg.horizon).ceil() as usize + 40,
            };
            build_line(w)
        }
        ExperimentKind::Cycle => build_cycle(g.size.unwrap_or(0)),
        ExperimentKind::Hypercube | ExperimentKind::Search => build_hypercube(g.dim.unwrap_or(0)),
        ExperimentKind::GluedTrees => build_glued_trees(g.depth.unwrap_or(0), g.wiring_seed),
        ExperimentKind::CustomGraph => {
            let rel = g.edges.as_deref().unwrap_or_default();
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| bad("graph.edges", format!("{}: {e}", path.display())))?;
            load_graph(&text)
        }
    };
    made.map_err(under("graph"))
}

fn coin_spec(cfg: &ExperimentConfig, graph: &GraphSpec) -> Result<CoinSpec, RunError> {
    if cfg.kind == ExperimentKind::Search {
        return Ok(qwalkdec_core::coined::search::search_coin(cfg.graph.marked.unwrap_or(0)));
    }
    Ok(match &cfg.coin {
        None => match graph.kind() {
            GraphKind::Line { .. } | GraphKind::Cycle { .. } => CoinSpec::Hadamard,
            _ => CoinSpec::Grover,
        },
        Some(CoinConfig::Hadamard) => CoinSpec::Hadamard,
        Some(CoinConfig::Grover) => CoinSpec::Grover,
        Some(CoinConfig::Dft) => CoinSpec::Dft,
        Some(CoinConfig::Biased { eta, delta }) => CoinSpec::Biased {
            eta: *eta,
            delta: *delta,
        },
        Some(CoinConfig::Custom { re, im }) => {
            let d = re.len();
            let square = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
            if d == 0 || !square(re) || im.as_ref().is_some_and(|m| !square(m)) {
                return Err(bad("coin.re", "custom coin must be a square matrix"));
            }
            CoinSpec::Custom(DMatrix::from_fn(d, d, |i, j| {
                C64::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j]))
            }))
        }
    })
}

fn make_walk<'g>(cfg: &ExperimentConfig, graph: &'g GraphSpec) -> Result<CoinedWalk<'g>, RunError> {
    let spec = coin_spec(cfg, graph)?;
    CoinedWalk::new(graph, &spec).map_err(|e| match e {
        CoreError::NotUnitary { max_deviation } => bad("coin", format!("not unitary (deviation {max_deviation:e})")),
        other => under("coin")(other),
    })
}

fn start_vertex(cfg: &ExperimentConfig, graph: &GraphSpec) -> Result<usize, RunError> {
    let v = cfg.initial.vertex;
    match graph.kind() {
        GraphKind::Line { .. } => graph
            .line_index(v.unwrap_or(0))
            .ok_or_else(|| bad("initial.vertex", format!("{} is off the line", v.unwrap_or(0)))),
        _ => {
            let x = v.unwrap_or(0);
            if x < 0 || x as usize >= graph.vertex_count() {
                return Err(bad("initial.vertex", format!("{x} is not a vertex")));
            }
            Ok(x as usize)
        }
    }
}

fn coin_amplitudes(cfg: &ExperimentConfig, graph: &GraphSpec, vertex: usize) -> Result<Vec<C64>, RunError> {
    let d = graph.max_degree();
    let wired: Vec<usize> = (0..d).filter(|&j| graph.port(vertex, j).is_some()).collect();
    let default = if d == 2 && matches!(graph.kind(), GraphKind::Line { .. } | GraphKind::Cycle { .. }) {
        NamedCoinState::Symmetric
    } else {
        NamedCoinState::Uniform
    };
    let mut c = vec![C64::new(0.0, 0.0); d];
    match cfg.initial.coin.clone().unwrap_or(CoinState::Named(default)) {
        CoinState::Named(NamedCoinState::Minus) => c[0] = C64::new(1.0, 0.0),
        CoinState::Named(NamedCoinState::Plus) => {
            if d < 2 {
                return Err(bad("initial.coin", "needs at least two ports"));
            }
            c[1] = C64::new(1.0, 0.0)
        }
        CoinState::Named(NamedCoinState::Symmetric) => {
            if d != 2 {
                return Err(bad("initial.coin", "symmetric state needs a two-state coin"));
            }
            let s = std::f64::consts::FRAC_1_SQRT_2;
            c[0] = C64::new(s, 0.0);
            c[1] = C64::new(0.0, s);
        }
        CoinState::Named(NamedCoinState::Uniform) => {
            let a = 1.0 / (wired.len() as f64).sqrt();
            for &j in &wired {
                c[j] = C64::new(a, 0.0);
            }
        }
        CoinState::Amplitudes(v) => {
            if v.len() != d {
                return Err(bad("initial.coin", format!("expected {d} amplitudes, got {}", v.len())));
            }
            c = v.iter().map(|a| C64::new(a[0], a[1])).collect();
        }
    }
    Ok(c)
}

fn noise_spec(cfg: &ExperimentConfig, seed: u64) -> Result<NoiseSpec, RunError> {
    let n = &cfg.noise;
    let channel = match n.channel {
        ChannelName::None => NoiseChannel::None,
        ChannelName::MeasurePosition => NoiseChannel::MeasurePosition,
        ChannelName::MeasureCoin => NoiseChannel::MeasureCoin,
        ChannelName::MeasureBoth => NoiseChannel::MeasureBoth,
        ChannelName::CoinDephase => NoiseChannel::CoinDephase {
            theta: n.theta.unwrap_or(0.0),
        },
        ChannelName::BrokenLinks => NoiseChannel::BrokenLinks {
            p_link: n.p_link.unwrap_or(0.0),
        },
        ChannelName::ImperfectCoin => NoiseChannel::ImperfectCoin {
            p_spread: n.p_spread.unwrap_or(0.0),
        },
        ChannelName::MultiCoin => NoiseChannel::MultiCoin {
            coins: n.coins.unwrap_or(0),
            order: match n.order {
                OrderName::Cyclic => MultiCoinOrder::Cyclic,
                OrderName::Random => MultiCoinOrder::Random,
            },
        },
    };
    let schedule = match n.schedule {
        ScheduleConfig::PerStep => Schedule::PerStep,
        ScheduleConfig::FixedInterval { m } => Schedule::FixedInterval { m },
        ScheduleConfig::RandomTimes {
            count,
            horizon,
            seed: s,
        } => Schedule::RandomTimes {
            count,
            horizon: horizon.unwrap_or(cfg.steps()),
            seed: s.unwrap_or(seed),
        },
    };
    let spec = NoiseSpec {
        channel,
        rate: n.rate,
        schedule,
    };
    spec.validate().map_err(|e| match e {
        CoreError::Parameter { name, message } => {
            let field = if matches!(name, "m" | "count") {
                format!("noise.schedule.{name}")
            } else {
                format!("noise.{name}")
            };
            RunError::Config { field, message }
        }
        other => RunError::core("noise", other),
    })?;
    Ok(spec)
}

fn noiseless(noise: &NoiseSpec) -> bool {
    noise.channel == NoiseChannel::None || noise.rate == 0.0
}

/// Vertex label written in the `x` column.
fn vertex_label(graph: &GraphSpec, x: usize) -> String {
    match graph.kind() {
        GraphKind::Line { .. } => graph.coordinate(x).unwrap_or(x as i64).to_string(),
        _ => x.to_string(),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Evaluates every observable of a concrete config.
pub fn run_point(cfg: &ExperimentConfig, seed: u64, base: &Path) -> Result<PointOutput, RunError> {
    let graph = build_graph(cfg, base)?;
    let mut out = match cfg.walk {
        WalkType::Discrete => run_discrete(cfg, &graph, seed)?,
        WalkType::Continuous => run_continuous(cfg, &graph)?,
    };
    out.converged = out.rows.iter().all(|r| r.converged);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Engine {
    Pure,
    Density,
    Trajectories,
    MultiCoin,
}

fn discrete_engine(cfg: &ExperimentConfig, graph: &GraphSpec, noise: &NoiseSpec) -> Result<Engine, RunError> {
    if matches!(noise.channel, NoiseChannel::MultiCoin { .. }) {
        return Ok(Engine::MultiCoin);
    }
    let dim = graph.basis_size();
    let fits = dim <= DENSITY_BASIS_CAP;
    Ok(match cfg.mode {
        ModeName::Pure => {
            if !noiseless(noise) {
                return Err(bad("mode", "pure mode needs a noiseless walk"));
            }
            Engine::Pure
        }
        ModeName::Density => {
            if !fits {
                return Err(RunError::core(
                    "mode",
                    CoreError::Size(format!(
                        "density mode needs basis ≤ {DENSITY_BASIS_CAP}, got {dim}; use trajectories"
                    )),
                ));
            }
            Engine::Density
        }
        ModeName::Trajectories => Engine::Trajectories,
        ModeName::Auto => {
            if noiseless(noise) {
                Engine::Pure
            } else if fits && !matches!(noise.channel, NoiseChannel::ImperfectCoin { .. }) {
                Engine::Density
            } else {
                Engine::Trajectories
            }
        }
    })
}

/// Vertex marginals at the requested steps.
fn discrete_marginals(
    cfg: &ExperimentConfig,
    graph: &GraphSpec,
    walk: &CoinedWalk<'_>,
    initial: &WalkStatePure,
    noise: &NoiseSpec,
    engine: Engine,
    times: &[u64],
    seed: u64,
) -> Result<BTreeMap<u64, Vec<f64>>, RunError> {
    let steps = times.iter().copied().max().unwrap_or(0);
    let d = graph.max_degree();
    let want: std::collections::BTreeSet<u64> = times.iter().copied().collect();
    let mut out = BTreeMap::new();
    let marginal = |diag: &[f64]| -> Vec<f64> { diag.chunks_exact(d).map(|c| c.iter().sum()).collect() };
    let ctx = |e| RunError::core("evolution", e);
    match engine {
        Engine::Pure => {
            let mut s = initial.clone();
            for t in 0..=steps {
                if t > 0 {
                    s = walk.step_pure(&s).map_err(ctx)?;
                }
                if want.contains(&t) {
                    let p: Vec<f64> = s.amplitudes.iter().map(|a| a.norm_sqr()).collect();
                    out.insert(t, marginal(&p));
                }
            }
        }
        Engine::Density => {
            let strengths = noise.strengths(steps);
            let mut rho = WalkStateDensity::from_pure(initial);
            for t in 0..=steps {
                if t > 0 {
                    rho = step_density_with_strength(walk, &rho, noise.channel, strengths[(t - 1) as usize])
                        .map_err(ctx)?;
                }
                if want.contains(&t) {
                    out.insert(t, marginal(&rho.diagonal()));
                }
            }
        }
        Engine::Trajectories => {
            let list: Vec<u64> = want.iter().copied().collect();
            let m = ensemble_marginals(walk, initial, noise, steps, cfg.trajectories, seed, &list).map_err(ctx)?;
            out.extend(list.into_iter().zip(m));
        }
        Engine::MultiCoin => {
            let NoiseChannel::MultiCoin { coins, order } = noise.channel else {
                unreachable!()
            };
            let c = coin_amplitudes(cfg, graph, start_vertex(cfg, graph)?)?;
            if cfg.initial.vertex.unwrap_or(0) != 0 {
                return Err(bad("initial.vertex", "multi-coin walks start at the origin"));
            }
            let spec = coin_spec(cfg, graph)?;
            let dists = multi_coin_line_walk(&spec, coins, steps, order, [c[0], c[1]], seed).map_err(under("noise"))?;
            for t in want {
                let mut p = vec![0.0; graph.vertex_count()];
                for (k, v) in dists[t as usize].iter().enumerate() {
                    let x = k as i64 - steps as i64;
                    if *v != 0.0 {
                        let i = graph
                            .line_index(x)
                            .ok_or_else(|| bad("graph.size", "line too short for the multi-coin walk"))?;
                        p[i] = *v;
                    }
                }
                out.insert(t, p);
            }
        }
    }
    Ok(out)
}

fn step_of(t: f64, steps: u64, field: String) -> Result<u64, RunError> {
    if !(t >= 0.0) || (t - t.round()).abs() > 1e-9 || t.round() as u64 > steps {
        return Err(bad(field, format!("{t} is not a step in 0..={steps}")));
    }
    Ok(t.round() as u64)
}

fn default_target(cfg: &ExperimentConfig, graph: &GraphSpec, start: usize, given: Option<usize>, field: String) -> Result<usize, RunError> {
    let t = match (given, graph.kind()) {
        (Some(t), _) => t,
        (None, GraphKind::Hypercube { dim }) => start ^ ((1usize << dim) - 1),
        (None, GraphKind::GluedTrees { .. }) => graph.vertex_count() - 1,
        _ => return Err(bad(field, format!("a target vertex is required for {:?}", cfg.kind))),
    };
    if t >= graph.vertex_count() {
        return Err(bad(field, format!("{t} is not a vertex")));
    }
    Ok(t)
}

fn moment_rows(graph: &GraphSpec, t: f64, p: &[f64], rows: &mut Vec<Row>) -> Result<(), RunError> {
    let m = moments(graph, &PositionDistribution::unchecked(p.to_vec(), t)).map_err(|e| RunError::core("moments", e))?;
    rows.push(Row::at(t, "mean", None, m.mean));
    rows.push(Row::at(t, "second_moment", None, m.second));
    rows.push(Row::at(t, "variance", None, m.variance));
    rows.push(Row::at(t, "sigma", None, m.sigma()));
    Ok(())
}

fn mixing_kind(k: MixingKindName) -> MixingKind {
    match k {
        MixingKindName::Instantaneous => MixingKind::Instantaneous,
        MixingKindName::TimeAveraged => MixingKind::TimeAveraged,
        MixingKindName::InstantaneousTimes => MixingKind::InstantaneousMixingTimes,
    }
}

fn mixing_rows(r: &qwalkdec_core::MixingResult, rows: &mut Vec<Row>) {
    let eps = Some(fmt_num(r.epsilon));
    if r.kind == MixingKind::InstantaneousMixingTimes {
        for &t in &r.times {
            rows.push(Row::at(t, "mixing_dip", eps.clone(), t));
        }
    }
    rows.push(Row {
        time: Some(r.horizon),
        observable: match r.kind {
            MixingKind::TimeAveraged => "mixing_time_averaged",
            MixingKind::Instantaneous => "mixing_time",
            MixingKind::InstantaneousMixingTimes => "first_mixing_dip",
        },
        x: eps,
        // Continuous mixing times are multiples of dt.
        value: r.value.map(|v| (v * 1e9).round() / 1e9),
        converged: r.converged,
    });
}

fn run_discrete(cfg: &ExperimentConfig, graph: &GraphSpec, seed: u64) -> Result<PointOutput, RunError> {
    let steps = cfg.steps();
    let mut rows = Vec::new();
    if cfg.kind == ExperimentKind::Search {
        let marked = cfg.graph.marked.unwrap_or(0);
        let s = search_evolve(graph, marked, steps).map_err(under("graph"))?;
        for (t, v) in s.iter().enumerate() {
            rows.push(Row::at(t as f64, "success", Some(marked.to_string()), *v));
        }
        let peak = first_peak(&s[1..], peak_stride(graph));
        rows.push(Row {
            time: peak.map(|p| p.0 as f64),
            observable: "success_peak",
            x: Some(marked.to_string()),
            value: peak.map(|p| p.1),
            converged: peak.is_some(),
        });
        return Ok(PointOutput { rows, converged: true });
    }
    let walk = make_walk(cfg, graph)?;
    let start = start_vertex(cfg, graph)?;
    let coin = coin_amplitudes(cfg, graph, start)?;
    let initial = WalkStatePure::localized(graph, start, &coin).map_err(under("initial"))?;
    let noise = noise_spec(cfg, seed)?;
    let engine = discrete_engine(cfg, graph, &noise)?;

    // Which steps the distribution-based observables need.
    let mut times: Vec<u64> = Vec::new();
    for (i, o) in cfg.observables.iter().enumerate() {
        match o {
            ObservableConfig::Distribution { times: ts } => match ts {
                None => times.push(steps),
                Some(ts) => {
                    for &t in ts {
                        times.push(step_of(t, steps, format!("observables[{i}].times"))?);
                    }
                }
            },
            ObservableConfig::Moments | ObservableConfig::TvUniform => times.extend(0..=steps),
            _ => {}
        }
    }
    times.sort_unstable();
    times.dedup();
    let marg = if times.is_empty() {
        BTreeMap::new()
    } else {
        discrete_marginals(cfg, graph, &walk, &initial, &noise, engine, &times, seed)?
    };
    let bipartite = matches!(graph.kind(), GraphKind::Line { .. })
        || matches!(graph.kind(), GraphKind::Cycle { size } if size % 2 == 0);

    for (i, o) in cfg.observables.iter().enumerate() {
        match o {
            ObservableConfig::Distribution { times: ts } => {
                let list: Vec<u64> = match ts {
                    None => vec![steps],
                    Some(ts) => ts.iter().map(|&t| t.round() as u64).collect(),
                };
                for t in list {
                    for (x, v) in marg[&t].iter().enumerate() {
                        rows.push(Row::at(t as f64, "probability", Some(vertex_label(graph, x)), *v));
                    }
                }
            }
            ObservableConfig::Moments => {
                for (t, p) in &marg {
                    moment_rows(graph, *t as f64, p, &mut rows)?;
                }
            }
            ObservableConfig::TvUniform => {
                for (t, p) in &marg {
                    let parity = bipartite.then_some(((start as u64 + t) % 2) as u8);
                    let r = uniform_reference(graph, parity);
                    let tv = tv_distance(p, &r.probabilities).map_err(|e| RunError::core("tv_uniform", e))?;
                    rows.push(Row::at(*t as f64, "tv_uniform", None, tv));
                }
            }
            ObservableConfig::Mixing {
                epsilon,
                kind,
                margin,
                max_horizon,
            } => {
                if matches!(engine, Engine::Trajectories | Engine::MultiCoin) {
                    return Err(bad(format!("observables[{i}].type"), "mixing runs in density mode"));
                }
                if graph.basis_size() > DENSITY_BASIS_CAP {
                    return Err(RunError::core(
                        "mixing",
                        CoreError::Size(format!("mixing needs basis ≤ {DENSITY_BASIS_CAP}")),
                    ));
                }
                let max = match max_horizon {
                    Some(h) => step_of(*h, u64::MAX, format!("observables[{i}].max_horizon"))?,
                    None => steps,
                };
                let r = discrete_mixing(
                    &walk,
                    &WalkStateDensity::from_pure(&initial),
                    start,
                    &noise,
                    *epsilon,
                    margin.unwrap_or(DEFAULT_MARGIN),
                    mixing_kind(*kind),
                    max,
                )
                .map_err(|e| RunError::core("mixing", e))?;
                mixing_rows(&r, &mut rows);
            }
            ObservableConfig::Hitting {
                target,
                t_max,
                concurrent,
            } => {
                let target = default_target(cfg, graph, start, *target, format!("observables[{i}].target"))?;
                let t_max = match t_max {
                    Some(t) => step_of(*t, u64::MAX, format!("observables[{i}].t_max"))?,
                    None => steps,
                };
                let mode = hitting_mode(cfg, graph, &noise, engine, seed)?;
                let h = measured_walk_run(&walk, &initial, target, &noise, t_max, mode).map_err(|e| match e {
                    CoreError::Degenerate(m) => bad(format!("observables[{i}].target"), m),
                    other => RunError::core("hitting", other),
                })?;
                let x = Some(target.to_string());
                for k in 0..h.r_series.len() {
                    let t = (k + 1) as f64;
                    rows.push(Row::at(t, "first_arrival", x.clone(), h.r_series[k]));
                    rows.push(Row::at(t, "cumulative_arrival", x.clone(), h.cumulative[k]));
                    rows.push(Row::at(t, "one_shot", x.clone(), h.one_shot_series[k]));
                }
                for (name, peak) in [("one_shot_peak", h.one_shot), ("first_arrival_peak", h.first_arrival_peak)] {
                    rows.push(Row {
                        time: peak.map(|p| p.0 as f64),
                        observable: name,
                        x: x.clone(),
                        value: peak.map(|p| p.1),
                        converged: peak.is_some(),
                    });
                }
                rows.push(Row {
                    time: Some(t_max as f64),
                    observable: "average_hitting",
                    x: x.clone(),
                    value: Some(h.average),
                    converged: !h.truncated,
                });
                for &r0 in concurrent {
                    let c = h.concurrent(r0);
                    rows.push(Row {
                        time: c.map(|t| t as f64),
                        observable: "concurrent_hitting",
                        x: Some(fmt_num(r0)),
                        value: c.map(|t| t as f64),
                        converged: c.is_some(),
                    });
                }
            }
            ObservableConfig::Period { tol } => {
                if !noiseless(&noise) {
                    return Err(bad(format!("observables[{i}].type"), "period needs a noiseless walk"));
                }
                let p = find_period(&walk, &initial, steps, tol.unwrap_or(PERIOD_TOLERANCE))
                    .map_err(|e| RunError::core("period", e))?;
                rows.push(Row {
                    time: Some(steps as f64),
                    observable: "period",
                    x: None,
                    value: p.map(|v| v as f64),
                    converged: p.is_some(),
                });
            }
            ObservableConfig::TopHat { p_grid } => {
                if coin.len() != 2 {
                    return Err(bad("initial.coin", "top_hat needs a two-state coin"));
                }
                let spec = coin_spec(cfg, graph)?;
                let fit = top_hat_fit(&spec, [coin[0], coin[1]], noise.channel, steps, p_grid)
                    .map_err(|e| RunError::core("top_hat", e))?;
                let mut ev = fit.evaluated.clone();
                ev.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (p, tv) in ev {
                    rows.push(Row::at(steps as f64, "top_hat_tv", Some(fmt_num(p)), tv));
                }
                rows.push(Row::at(steps as f64, "top_hat_p_star", None, fit.p_star));
                rows.push(Row::at(steps as f64, "top_hat_tv_star", None, fit.tv_star));
            }
            ObservableConfig::Success | ObservableConfig::Classical { .. } => {
                return Err(bad(format!("observables[{i}].type"), "not available for this walk"));
            }
        }
    }
    Ok(PointOutput { rows, converged: true })
}

fn hitting_mode(
    cfg: &ExperimentConfig,
    graph: &GraphSpec,
    noise: &NoiseSpec,
    engine: Engine,
    seed: u64,
) -> Result<HittingMode, RunError> {
    let renewal = matches!(graph.kind(), GraphKind::Hypercube { .. })
        && noise.channel == NoiseChannel::MeasureBoth
        && noise.schedule == Schedule::PerStep;
    Ok(match engine {
        Engine::MultiCoin => return Err(bad("noise.channel", "hitting is not defined for multi-coin walks")),
        Engine::Pure => HittingMode::Pure,
        Engine::Trajectories => HittingMode::Trajectories {
            count: cfg.trajectories,
            seed,
        },
        Engine::Density if cfg.mode == ModeName::Auto && renewal && graph.basis_size() > 1024 => {
            HittingMode::OrbitRenewal
        }
        Engine::Density => HittingMode::Density,
    })
    .map(|m| {
        // Large hypercubes in auto mode fall back from trajectories to the exact renewal form.
        if cfg.mode == ModeName::Auto && renewal && matches!(m, HittingMode::Trajectories { .. }) {
            HittingMode::OrbitRenewal
        } else {
            m
        }
    })
}

fn run_continuous(cfg: &ExperimentConfig, graph: &GraphSpec) -> Result<PointOutput, RunError> {
    let c = &cfg.continuous;
    let gamma = gamma_of(cfg);
    let variant = match c.variant {
        VariantName::Adjacency => HamiltonianVariant::Adjacency,
        VariantName::Laplacian => HamiltonianVariant::Laplacian,
    };
    let h = HamiltonianSpec::new(gamma, variant).map_err(under("continuous"))?;
    let noise = match c.noise {
        CtqwNoiseName::None => None,
        _ if c.rate == 0.0 => None,
        CtqwNoiseName::VertexProject => Some(CtqwNoise::VertexProject),
        CtqwNoiseName::PerQubitDephase => Some(CtqwNoise::PerQubitDephase),
    }
    .map(|m| CtqwNoiseSpec::new(m, c.rate))
    .transpose()
    .map_err(under("continuous"))?;
    let start = start_vertex(cfg, graph)?;
    let n = graph.vertex_count();
    let samples = (cfg.horizon / c.dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=samples).map(|k| k as f64 * c.dt).collect();

    let hyper = match graph.kind() {
        GraphKind::Hypercube { dim } => Some(*dim),
        _ => None,
    };
    let factorable = hyper.is_some()
        && variant == HamiltonianVariant::Adjacency
        && noise.as_ref().is_none_or(|s| s.model == CtqwNoise::PerQubitDephase);
    let engine = match c.engine {
        CtqwEngine::Auto if factorable => CtqwEngine::Factored,
        CtqwEngine::Auto if noise.is_none() => CtqwEngine::Spectral,
        CtqwEngine::Auto => CtqwEngine::Master,
        CtqwEngine::Factored if !factorable => {
            return Err(bad("continuous.engine", "factored needs a hypercube with adjacency Hamiltonian and per-qubit dephasing"))
        }
        CtqwEngine::Spectral if noise.is_some() => {
            return Err(bad("continuous.engine", "spectral propagation is noiseless"))
        }
        e => e,
    };
    let diags: Vec<Vec<f64>> = match engine {
        CtqwEngine::Factored => {
            let dim = hyper.unwrap_or(0);
            let p = noise.map_or(0.0, |s| s.rate);
            let k = gamma * dim as f64;
            times
                .iter()
                .map(|&t| {
                    let (p0, p1) = hypercube_factored_evolve(dim, k, p, t).map_err(under("continuous"))?;
                    Ok((0..n).map(|x| product_probability(x ^ start, dim, p0, p1)).collect())
                })
                .collect::<Result<_, RunError>>()?
        }
        CtqwEngine::Spectral => {
            let prop = SpectralPropagator::new(&h.matrix(graph));
            let mut psi0 = vec![C64::new(0.0, 0.0); n];
            psi0[start] = C64::new(1.0, 0.0);
            times
                .iter()
                .map(|&t| {
                    prop.evolve(&psi0, t)
                        .map(|v| v.iter().map(|a| a.norm_sqr()).collect())
                        .map_err(|e| RunError::core("spectral", e))
                })
                .collect::<Result<_, RunError>>()?
        }
        _ => {
            if n > DENSITY_BASIS_CAP {
                return Err(RunError::core(
                    "master",
                    CoreError::Size(format!("master equation needs ≤ {DENSITY_BASIS_CAP} vertices")),
                ));
            }
            let mut rho0 = DMatrix::zeros(n, n);
            rho0[(start, start)] = C64::new(1.0, 0.0);
            evolve_master_with(graph, &h, noise.as_ref(), &rho0, &times, &StepControl::default(), |m| {
                (0..n).map(|i| m[(i, i)].re).collect::<Vec<f64>>()
            })
            .map_err(|e| RunError::core("master", e))?
            .samples
        }
    };

    let mut rows = Vec::new();
    let sample_of = |t: f64, field: String| -> Result<usize, RunError> {
        let k = (t / c.dt).round();
        if !(t >= 0.0) || k as usize > samples || (k * c.dt - t).abs() > 1e-9 * (1.0 + t) {
            return Err(bad(field, format!("{t} is not a sample time (dt = {})", c.dt)));
        }
        Ok(k as usize)
    };
    for (i, o) in cfg.observables.iter().enumerate() {
        match o {
            ObservableConfig::Distribution { times: ts } => {
                let ks: Vec<usize> = match ts {
                    None => vec![samples],
                    Some(ts) => ts
                        .iter()
                        .map(|&t| sample_of(t, format!("observables[{i}].times")))
                        .collect::<Result<_, _>>()?,
                };
                for k in ks {
                    for (x, v) in diags[k].iter().enumerate() {
                        rows.push(Row::at(times[k], "probability", Some(vertex_label(graph, x)), *v));
                    }
                }
            }
            ObservableConfig::Moments => {
                for (k, p) in diags.iter().enumerate() {
                    moment_rows(graph, times[k], p, &mut rows)?;
                }
            }
            ObservableConfig::TvUniform => {
                let r = uniform_reference(graph, None).probabilities;
                for (k, p) in diags.iter().enumerate() {
                    let tv = tv_distance(p, &r).map_err(|e| RunError::core("tv_uniform", e))?;
                    rows.push(Row::at(times[k], "tv_uniform", None, tv));
                }
            }
            ObservableConfig::Mixing {
                epsilon,
                kind,
                margin,
                max_horizon,
            } => {
                let mut rho0 = DMatrix::zeros(n, n);
                rho0[(start, start)] = C64::new(1.0, 0.0);
                let r = ctqw_mixing(
                    graph,
                    &h,
                    noise.as_ref(),
                    &rho0,
                    *epsilon,
                    margin.unwrap_or(DEFAULT_MARGIN),
                    mixing_kind(*kind),
                    c.dt,
                    max_horizon.unwrap_or(cfg.horizon),
                    &StepControl::default(),
                )
                .map_err(|e| RunError::core("mixing", e))?;
                mixing_rows(&r, &mut rows);
            }
            ObservableConfig::Hitting { target, .. } => {
                let target = default_target(cfg, graph, start, *target, format!("observables[{i}].target"))?;
                if target == start {
                    return Err(bad(format!("observables[{i}].target"), "target equals the start vertex"));
                }
                let series: Vec<f64> = diags.iter().map(|p| p[target]).collect();
                let x = Some(target.to_string());
                for (k, v) in series.iter().enumerate().skip(1) {
                    rows.push(Row::at(times[k], "one_shot", x.clone(), *v));
                }
                let peak = first_peak(&series[1..], 1);
                rows.push(Row {
                    time: peak.map(|p| times[p.0 as usize]),
                    observable: "one_shot_peak",
                    x,
                    value: peak.map(|p| p.1),
                    converged: peak.is_some(),
                });
            }
            ObservableConfig::Classical { target } => {
                let target = default_target(cfg, graph, start, *target, format!("observables[{i}].target"))?;
                let walk = ClassicalCtrw::new(graph, gamma).map_err(under("continuous"))?;
                let mut p0 = vec![0.0; n];
                p0[start] = 1.0;
                for &t in &times {
                    let p = walk.evolve(&p0, t).map_err(|e| RunError::core("classical", e))?;
                    rows.push(Row::at(t, "classical", Some(target.to_string()), p[target]));
                }
            }
            ObservableConfig::Period { .. } | ObservableConfig::TopHat { .. } | ObservableConfig::Success => {
                return Err(bad(format!("observables[{i}].type"), "not available for continuous walks"));
            }
        }
    }
    Ok(PointOutput { rows, converged: true })
}
