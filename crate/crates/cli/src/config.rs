//! Experiment configuration documents.
//!
//! A config is one JSON object; unknown keys are rejected everywhere. See the
//! README for the field reference.

use serde::{Deserialize, Serialize};

use crate::error::RunError;

pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Line,
    Cycle,
    Hypercube,
    GluedTrees,
    Search,
    CustomGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkType {
    #[default]
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Line halfwidth (default: the horizon) or cycle size.
    pub size: Option<usize>,
    /// Hypercube dimension (also used by `search`).
    pub dim: Option<usize>,
    /// Glued-trees depth.
    pub depth: Option<usize>,
    #[serde(default)]
    pub wiring_seed: u64,
    /// Edge-list file for `custom_graph`, relative to the config file.
    pub edges: Option<String>,
    /// Marked vertex for `search` (default 0).
    pub marked: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoinConfig {
    Hadamard,
    Grover,
    Dft,
    Biased { eta: f64, delta: f64 },
    /// Row-major real and imaginary parts.
    Custom { re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedCoinState {
    /// Port 0 (the `−1` direction on the line).
    Minus,
    /// Port 1.
    Plus,
    /// `(|−1⟩ + i|+1⟩)/√2`.
    Symmetric,
    /// Equal real amplitudes on every port.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoinState {
    Named(NamedCoinState),
    /// `[re, im]` per port.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Start vertex; line coordinates are signed offsets from the origin.
    pub vertex: Option<i64>,
    pub coin: Option<CoinState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelName {
    #[default]
    None,
    MeasurePosition,
    MeasureCoin,
    MeasureBoth,
    CoinDephase,
    BrokenLinks,
    ImperfectCoin,
    MultiCoin,
}

impl ChannelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelName::None => "none",
            ChannelName::MeasurePosition => "measure_position",
            ChannelName::MeasureCoin => "measure_coin",
            ChannelName::MeasureBoth => "measure_both",
            ChannelName::CoinDephase => "coin_dephase",
            ChannelName::BrokenLinks => "broken_links",
            ChannelName::ImperfectCoin => "imperfect_coin",
            ChannelName::MultiCoin => "multi_coin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderName {
    #[default]
    Cyclic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    #[default]
    PerStep,
    FixedInterval {
        m: u64,
    },
    /// `horizon` defaults to the experiment horizon, `seed` to the point seed.
    RandomTimes {
        count: u64,
        horizon: Option<u64>,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub channel: ChannelName,
    #[serde(default)]
    pub rate: f64,
    pub theta: Option<f64>,
    pub p_link: Option<f64>,
    pub p_spread: Option<f64>,
    pub coins: Option<usize>,
    #[serde(default)]
    pub order: OrderName,
    #[serde(default)]
    pub schedule: ScheduleConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Adjacency,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtqwNoiseName {
    #[default]
    None,
    VertexProject,
    PerQubitDephase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtqwEngine {
    #[default]
    Auto,
    Spectral,
    Master,
    Factored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    /// Hopping rate; defaults to ½ (or `k/n` on the hypercube when `k` is set).
    pub gamma: Option<f64>,
    /// Hypercube energy, giving `γ = k/n`.
    pub k: Option<f64>,
    #[serde(default)]
    pub variant: VariantName,
    #[serde(default)]
    pub noise: CtqwNoiseName,
    #[serde(default)]
    pub rate: f64,
    /// Sample spacing.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub engine: CtqwEngine,
}

fn default_dt() -> f64 {
    0.1
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        ContinuousConfig {
            gamma: None,
            k: None,
            variant: VariantName::Adjacency,
            noise: CtqwNoiseName::None,
            rate: 0.0,
            dt: default_dt(),
            engine: CtqwEngine::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Auto,
    Pure,
    Density,
    Trajectories,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKindName {
    #[default]
    Instantaneous,
    TimeAveraged,
    InstantaneousTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// Vertex distributions at `times` (default: the horizon).
    Distribution { times: Option<Vec<f64>> },
    /// Mean, variance and σ at every sample.
    Moments,
    /// TV distance to the uniform reference at every sample.
    TvUniform,
    Mixing {
        epsilon: f64,
        #[serde(default)]
        kind: MixingKindName,
        margin: Option<f64>,
        /// Longest run (default: the horizon).
        max_horizon: Option<f64>,
    },
    Hitting {
        target: Option<usize>,
        t_max: Option<f64>,
        #[serde(default)]
        concurrent: Vec<f64>,
    },
    Period { tol: Option<f64> },
    TopHat { p_grid: Vec<f64> },
    /// Success probability of the search walk.
    Success,
    /// Classical continuous-time random walk probability at `target`.
    Classical { target: Option<usize> },
}

impl ObservableConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ObservableConfig::Distribution { .. } => "distribution",
            ObservableConfig::Moments => "moments",
            ObservableConfig::TvUniform => "tv_uniform",
            ObservableConfig::Mixing { .. } => "mixing",
            ObservableConfig::Hitting { .. } => "hitting",
            ObservableConfig::Period { .. } => "period",
            ObservableConfig::TopHat { .. } => "top_hat",
            ObservableConfig::Success => "success",
            ObservableConfig::Classical { .. } => "classical",
        }
    }
}

/// Sweep axes; the cartesian product runs with `p` outermost, in field order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    /// Noise rate (discrete) or dephasing rate (continuous).
    pub p: Option<Vec<f64>>,
    /// Line halfwidth or cycle size.
    #[serde(rename = "N")]
    pub size: Option<Vec<usize>>,
    /// Hypercube dimension.
    pub n: Option<Vec<usize>>,
    pub theta: Option<Vec<f64>>,
    /// Number of coins.
    #[serde(rename = "M")]
    pub coins: Option<Vec<usize>>,
    pub channel: Option<Vec<ChannelName>>,
}

/// One coordinate of a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisValue {
    P(f64),
    Size(usize),
    Dim(usize),
    Theta(f64),
    Coins(usize),
    Channel(ChannelName),
}

impl AxisValue {
    pub fn axis(&self) -> &'static str {
        match self {
            AxisValue::P(_) => "p",
            AxisValue::Size(_) => "N",
            AxisValue::Dim(_) => "n",
            AxisValue::Theta(_) => "theta",
            AxisValue::Coins(_) => "M",
            AxisValue::Channel(_) => "channel",
        }
    }

    pub fn render(&self) -> String {
        match self {
            AxisValue::P(v) | AxisValue::Theta(v) => format!("{v}"),
            AxisValue::Size(v) | AxisValue::Dim(v) | AxisValue::Coins(v) => v.to_string(),
            AxisValue::Channel(c) => c.as_str().to_string(),
        }
    }
}

impl SweepAxes {
    /// Axes that are present, each as its list of values, in canonical order.
    pub fn axes(&self) -> Vec<Vec<AxisValue>> {
        let mut out = Vec::new();
        if let Some(v) = &self.p {
            out.push(v.iter().map(|&x| AxisValue::P(x)).collect());
        }
        if let Some(v) = &self.size {
            out.push(v.iter().map(|&x| AxisValue::Size(x)).collect());
        }
        if let Some(v) = &self.n {
            out.push(v.iter().map(|&x| AxisValue::Dim(x)).collect());
        }
        if let Some(v) = &self.theta {
            out.push(v.iter().map(|&x| AxisValue::Theta(x)).collect());
        }
        if let Some(v) = &self.coins {
            out.push(v.iter().map(|&x| AxisValue::Coins(x)).collect());
        }
        if let Some(v) = &self.channel {
            out.push(v.iter().map(|&x| AxisValue::Channel(x)).collect());
        }
        out
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.axes().iter().map(|a| a[0].axis()).collect()
    }

    /// Size of the cartesian product (0 if any axis is empty).
    pub fn size(&self) -> usize {
        let axes = self.axes();
        if axes.is_empty() {
            return 1;
        }
        axes.iter().map(Vec::len).product()
    }

    /// Every point, first axis outermost.
    pub fn points(&self) -> Vec<Vec<AxisValue>> {
        let mut pts: Vec<Vec<AxisValue>> = vec![Vec::new()];
        for axis in self.axes() {
            let mut next = Vec::with_capacity(pts.len() * axis.len());
            for p in &pts {
                for v in &axis {
                    let mut q = p.clone();
                    q.push(v.clone());
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory.
    pub dir: Option<String>,
    /// CSV file name (default `<experiment_id>.csv`).
    pub csv: Option<String>,
    /// Manifest file name (default `<experiment_id>.manifest.json`).
    pub manifest: Option<String>,
}

fn default_trajectories() -> u64 {
    1000
}

fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub walk: WalkType,
    #[serde(default)]
    pub graph: GraphConfig,
    pub coin: Option<CoinConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub continuous: ContinuousConfig,
    /// Steps (discrete) or time (continuous).
    pub horizon: f64,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default)]
    pub seed: u64,
    pub observables: Vec<ObservableConfig>,
    pub sweep: Option<SweepAxes>,
    #[serde(default = "default_cap")]
    pub sweep_cap: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

fn bad(field: impl Into<String>, message: impl Into<String>) -> RunError {
    RunError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Parse(e.to_string()))
    }

    /// Steps of a discrete run.
    pub fn steps(&self) -> u64 {
        self.horizon.round() as u64
    }

    /// Checks the document as written, before sweep substitution.
    pub fn validate_document(&self) -> Result<(), RunError> {
        if self.experiment_id.is_empty()
            || !self
                .experiment_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(bad("experiment_id", "must be non-empty and use only [A-Za-z0-9_.-]"));
        }
        if let Some(s) = &self.sweep {
            for axis in s.axes() {
                if axis.is_empty() {
                    return Err(bad("sweep", "sweep axes must be non-empty lists"));
                }
            }
            let p = s.points().len();
            if p > self.sweep_cap {
                return Err(RunError::Cap {
                    size: p,
                    cap: self.sweep_cap,
                });
            }
        }
        if self.observables.is_empty() {
            return Err(bad("observables", "at least one observable is required"));
        }
        if self.trajectories == 0 {
            return Err(bad("trajectories", "must be positive"));
        }
        Ok(())
    }

    /// The concrete config at one sweep point.
    pub fn at_point(&self, point: &[AxisValue]) -> ExperimentConfig {
        let mut c = self.clone();
        c.sweep = None;
        for v in point {
            match *v {
                AxisValue::P(p) => match c.walk {
                    WalkType::Discrete => c.noise.rate = p,
                    WalkType::Continuous => c.continuous.rate = p,
                },
                AxisValue::Size(n) => c.graph.size = Some(n),
                AxisValue::Dim(n) => c.graph.dim = Some(n),
                AxisValue::Theta(t) => c.noise.theta = Some(t),
                AxisValue::Coins(m) => c.noise.coins = Some(m),
                AxisValue::Channel(ch) => c.noise.channel = ch,
            }
        }
        c
    }

    /// Checks a concrete (swept) config.
    pub fn validate_point(&self) -> Result<(), RunError> {
        let h = self.horizon;
        if !(h > 0.0 && h.is_finite()) {
            return Err(bad("horizon", format!("{h} must be finite and positive")));
        }
        let discrete = self.walk == WalkType::Discrete;
        if discrete && (h - h.round()).abs() > 1e-9 {
            return Err(bad("horizon", format!("{h} must be a whole number of steps")));
        }
        match self.kind {
            ExperimentKind::Line => {
                if let Some(w) = self.graph.size {
                    if discrete && (w as f64) < h.round() {
                        return Err(bad(
                            "graph.size",
                            format!("line halfwidth {w} is below the horizon {}", h.round()),
                        ));
                    }
                }
            }
            ExperimentKind::Cycle => {
                if self.graph.size.is_none() {
                    return Err(bad("graph.size", "cycle size is required"));
                }
            }
            ExperimentKind::Hypercube | ExperimentKind::Search => {
                if self.graph.dim.is_none() {
                    return Err(bad("graph.dim", "hypercube dimension is required"));
                }
            }
            ExperimentKind::GluedTrees => {
                if self.graph.depth.is_none() {
                    return Err(bad("graph.depth", "glued-trees depth is required"));
                }
            }
            ExperimentKind::CustomGraph => {
                if self.graph.edges.is_none() {
                    return Err(bad("graph.edges", "edge-list path is required"));
                }
            }
        }
        if self.kind == ExperimentKind::Search && !discrete {
            return Err(bad("walk", "search runs the discrete walk"));
        }
        if discrete {
            let n = &self.noise;
            if !(0.0..=1.0).contains(&n.rate) {
                return Err(bad("noise.rate", format!("{} must lie in [0, 1]", n.rate)));
            }
            let needs = |v: Option<f64>, f: &str| -> Result<(), RunError> {
                if v.is_none() {
                    return Err(bad(format!("noise.{f}"), format!("required by channel {}", n.channel.as_str())));
                }
                Ok(())
            };
            match n.channel {
                ChannelName::CoinDephase => needs(n.theta, "theta")?,
                ChannelName::BrokenLinks => needs(n.p_link, "p_link")?,
                ChannelName::ImperfectCoin => needs(n.p_spread, "p_spread")?,
                ChannelName::MultiCoin => {
                    if n.coins.is_none() {
                        return Err(bad("noise.coins", "required by channel multi_coin"));
                    }
                    if self.kind != ExperimentKind::Line {
                        return Err(bad("noise.channel", "multi_coin runs on the line only"));
                    }
                }
                _ => {}
            }
        } else {
            let c = &self.continuous;
            if !(c.rate >= 0.0 && c.rate.is_finite()) {
                return Err(bad("continuous.rate", format!("{} must be finite and ≥ 0", c.rate)));
            }
            if !(c.dt > 0.0 && c.dt.is_finite()) {
                return Err(bad("continuous.dt", format!("{} must be finite and positive", c.dt)));
            }
            if let Some(g) = c.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(bad("continuous.gamma", format!("{g} must be finite and positive")));
                }
            }
            if c.noise == CtqwNoiseName::PerQubitDephase && self.kind != ExperimentKind::Hypercube {
                return Err(bad("continuous.noise", "per_qubit_dephase needs a hypercube"));
            }
            if self.noise.channel != ChannelName::None {
                return Err(bad("noise.channel", "discrete channels do not apply to continuous walks"));
            }
        }
        for (i, o) in self.observables.iter().enumerate() {
            let field = |f: &str| format!("observables[{i}].{f}");
            match o {
                ObservableConfig::Mixing {
                    epsilon, margin, ..
                } => {
                    if !(*epsilon > 0.0 && *epsilon < 2.0) {
                        return Err(bad(field("epsilon"), format!("{epsilon} must lie in (0, 2)")));
                    }
                    if let Some(m) = margin {
                        if !(*m >= 1.0) {
                            return Err(bad(field("margin"), format!("{m} must be at least 1")));
                        }
                    }
                }
                ObservableConfig::TopHat { p_grid } => {
                    if p_grid.is_empty() || p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(bad(field("p_grid"), "rates must be a non-empty list in [0, 1]"));
                    }
                    if self.kind != ExperimentKind::Line || !discrete {
                        return Err(bad(field("type"), "top_hat needs a discrete line walk"));
                    }
                }
                ObservableConfig::Period { tol } => {
                    if !discrete {
                        return Err(bad(field("type"), "period needs a discrete walk"));
                    }
                    if let Some(t) = tol {
                        if !(*t > 0.0 && *t < 1.0) {
                            return Err(bad(field("tol"), format!("{t} must lie in (0, 1)")));
                        }
                    }
                }
                ObservableConfig::Success => {
                    if self.kind != ExperimentKind::Search {
                        return Err(bad(field("type"), "success needs a search experiment"));
                    }
                }
                ObservableConfig::Classical { .. } => {
                    if discrete {
                        return Err(bad(field("type"), "classical comparison needs a continuous walk"));
                    }
                }
                ObservableConfig::Hitting { concurrent, .. } => {
                    if concurrent.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                        return Err(bad(field("concurrent"), "thresholds must lie in (0, 1]"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"experiment_id":"t","kind":"line","horizon":10,"observables":[{"type":"moments"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_json(
            r#"{"experiment_id":"t","kind":"line","horizon":10,"observables":[],"colour":1}"#,
        );
        assert!(matches!(e, Err(RunError::Parse(m)) if m.contains("colour")));
    }

    #[test]
    fn rate_errors_name_the_field() {
        let mut c = minimal();
        c.noise.channel = ChannelName::MeasureBoth;
        c.noise.rate = 1.5;
        let e = c.validate_point().unwrap_err();
        assert!(e.to_string().contains("noise.rate"));
    }

    #[test]
    fn sweep_points_are_ordered() {
        let s = SweepAxes {
            p: Some(vec![0.1, 0.2]),
            size: Some(vec![3, 4, 5]),
            ..Default::default()
        };
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![AxisValue::P(0.1), AxisValue::Size(4)]);
        assert_eq!(s.names(), vec!["p", "N"]);
    }

    #[test]
    fn empty_axis_is_invalid() {
        let mut c = minimal();
        c.sweep = Some(SweepAxes {
            p: Some(vec![]),
            ..Default::default()
        });
        assert!(c.validate_document().is_err());
    }

    #[test]
    fn line_halfwidth_must_cover_horizon() {
        let mut c = minimal();
        c.graph.size = Some(5);
        assert!(c.validate_point().unwrap_err().to_string().contains("graph.size"));
    }
}
