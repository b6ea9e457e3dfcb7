//! Experiment runner for `qwalkdec`: JSON configs in, long CSV plus a run
//! manifest out.
//!
//! A config names one experiment and optionally a sweep. Points are evaluated
//! in parallel and written in sweep order, so output does not depend on the
//! thread count.

pub mod config;
pub mod engine;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{AxisValue, ExperimentConfig};
pub use engine::{run_point, PointOutput, Row};
pub use error::RunError;
pub use output::{PointRecord, PointRows, RunManifest};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "QWALKDEC_THREADS";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub horizon_override: Option<f64>,
}

/// Evaluated sweep, not yet written.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub threads: usize,
    pub points: Vec<PointRows>,
    pub records: Vec<PointRecord>,
    pub wall_clock_seconds: f64,
}

impl Evaluation {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }

    pub fn axis_names(&self) -> Vec<&'static str> {
        self.config.sweep.as_ref().map(|s| s.names()).unwrap_or_default()
    }

    /// Rows of every point, in sweep order.
    pub fn rows(&self) -> impl Iterator<Item = (&PointRows, &Row)> {
        self.points.iter().flat_map(|p| p.rows.iter().map(move |r| (p, r)))
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub rows: usize,
}

/// Reads a config file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn apply_overrides(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut c = cfg.clone();
    if let Some(h) = opts.horizon_override {
        c.horizon = h;
    }
    if let Some(s) = opts.seed {
        c.seed = s;
    }
    c
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<Vec<AxisValue>> {
    match &cfg.sweep {
        Some(s) => s.points(),
        None => vec![Vec::new()],
    }
}

/// Checks the document and every sweep point without running anything.
/// Returns the number of points.
pub fn validate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<usize, RunError> {
    let cfg = apply_overrides(cfg, opts);
    cfg.validate_document()?;
    let points = sweep_points(&cfg);
    for p in &points {
        cfg.at_point(p).validate_point()?;
    }
    Ok(points.len())
}

fn resolve_threads(requested: Option<usize>) -> Result<Option<usize>, RunError> {
    let n = match requested {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse::<usize>().map_err(|_| RunError::Config {
                field: THREADS_ENV.into(),
                message: format!("`{v}` is not a thread count"),
            })?),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(RunError::Config {
            field: "threads".into(),
            message: "must be positive".into(),
        });
    }
    Ok(n)
}

/// Evaluates every sweep point. Seeds are derived from the master seed and
/// the point index, never from scheduling.
pub fn evaluate(cfg: &ExperimentConfig, base: &Path, opts: &RunOptions) -> Result<Evaluation, RunError> {
    let started = Instant::now();
    validate(cfg, opts)?;
    let cfg = apply_overrides(cfg, opts);
    let points = sweep_points(&cfg);
    let master = cfg.seed;

    let threads = resolve_threads(opts.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Io(e.to_string()))?;

    let results: Vec<Result<(PointRows, PointRecord), RunError>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, coords)| {
                let t0 = Instant::now();
                let seed = qwalkdec_core::rng::derive_seed(master, index as u64);
                let out = run_point(&cfg.at_point(coords), seed, base)?;
                let record = PointRecord {
                    index,
                    coordinates: coords.iter().map(|v| (v.axis().to_string(), v.render())).collect(),
                    seed,
                    rows: out.rows.len(),
                    converged: out.converged,
                    wall_clock_seconds: t0.elapsed().as_secs_f64(),
                };
                Ok((
                    PointRows {
                        coordinates: coords.clone(),
                        seed,
                        rows: out.rows,
                    },
                    record,
                ))
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        let (p, rec) = r?;
        rows.push(p);
        records.push(rec);
    }
    Ok(Evaluation {
        config: cfg,
        master_seed: master,
        threads: pool.current_num_threads(),
        points: rows,
        records,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Evaluates and writes `<dir>/<id>.csv` and `<dir>/<id>.manifest.json`.
pub fn execute(cfg: &ExperimentConfig, base: &Path, opts: &RunOptions) -> Result<RunReport, RunError> {
    let ev = evaluate(cfg, base, opts)?;
    let c = &ev.config;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| c.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let csv_name = c.output.csv.clone().unwrap_or_else(|| format!("{}.csv", c.experiment_id));
    let manifest_name = c
        .output
        .manifest
        .clone()
        .unwrap_or_else(|| format!("{}.manifest.json", c.experiment_id));
    let csv_path = dir.join(&csv_name);
    let manifest_path = dir.join(&manifest_name);

    let axes = ev.axis_names();
    let file = std::fs::File::create(&csv_path).map_err(|e| RunError::Io(format!("{}: {e}", csv_path.display())))?;
    let rows = output::write_csv(std::io::BufWriter::new(file), &c.experiment_id, &axes, &ev.points)?;

    let canonical = serde_json::to_string(cfg).map_err(|e| RunError::Io(e.to_string()))?;
    let mut overrides = Vec::new();
    if let Some(s) = opts.seed {
        overrides.push(("seed".to_string(), s.to_string()));
    }
    if let Some(h) = opts.horizon_override {
        overrides.push(("horizon".to_string(), h.to_string()));
    }
    let manifest = RunManifest {
        experiment_id: c.experiment_id.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: output::config_digest(&canonical),
        master_seed: ev.master_seed,
        threads: ev.threads,
        overrides,
        sweep_axes: axes.iter().map(|s| s.to_string()).collect(),
        csv: csv_name,
        all_converged: ev.all_converged(),
        points: ev.records.clone(),
        wall_clock_seconds: ev.wall_clock_seconds,
    };
    output::write_manifest(&manifest_path, &manifest)?;
    Ok(RunReport {
        csv_path,
        manifest_path,
        manifest,
        rows,
    })
}
