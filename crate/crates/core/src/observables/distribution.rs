use crate::coined::{WalkStateDensity, WalkStatePure};
use crate::error::{param, Error, Result};
use crate::graphs::{GraphKind, GraphSpec};
use crate::C64;

/// Entries above `−NEGATIVE_CLAMP` but below zero are rounding noise and are
/// clamped to zero; anything more negative is an error.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Probability over vertices at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionDistribution {
    pub probabilities: Vec<f64>,
    pub time: f64,
    /// Vertex-index parity carrying the support on bipartite line/cycle walks.
    pub support_parity: Option<u8>,
}

impl PositionDistribution {
    /// Validates and clamps: entries ≥ −1e−12, sum 1 within 1e−10.
    pub fn new(mut probabilities: Vec<f64>, time: f64) -> Result<Self> {
        for (x, p) in probabilities.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_CLAMP {
                return Err(Error::Contract(format!("probability {p} at vertex {x}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = probabilities.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(format!("probabilities sum to {s}")));
        }
        Ok(PositionDistribution {
            probabilities,
            time,
            support_parity: None,
        })
    }

    /// Skips validation; for references and partial (absorbed) distributions.
    pub fn unchecked(probabilities: Vec<f64>, time: f64) -> Self {
        PositionDistribution {
            probabilities,
            time,
            support_parity: None,
        }
    }

    pub fn with_parity(mut self, parity: Option<u8>) -> Self {
        self.support_parity = parity;
        self
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// States whose vertex marginal can be taken.
pub trait VertexMarginal {
    fn vertex_marginal(&self, ports: usize) -> Vec<f64>;
    fn time(&self) -> u64;
}

impl VertexMarginal for WalkStatePure {
    fn vertex_marginal(&self, ports: usize) -> Vec<f64> {
        amplitude_marginal(&self.amplitudes, ports)
    }
    fn time(&self) -> u64 {
        self.time
    }
}

impl VertexMarginal for WalkStateDensity {
    fn vertex_marginal(&self, ports: usize) -> Vec<f64> {
        let d = self.diagonal();
        d.chunks_exact(ports).map(|c| c.iter().sum()).collect()
    }
    fn time(&self) -> u64 {
        self.time
    }
}

pub(crate) fn amplitude_marginal(amps: &[C64], ports: usize) -> Vec<f64> {
    amps.chunks_exact(ports)
        .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
        .collect()
}

/// Vertex marginal of a coined-walk state (the coin traced out).
pub fn position_distribution(graph: &GraphSpec, state: &impl VertexMarginal) -> Result<PositionDistribution> {
    let p = state.vertex_marginal(graph.max_degree());
    let t = state.time();
    let parity = match graph.kind() {
        GraphKind::Line { .. } | GraphKind::Cycle { .. } => support_parity(&p),
        _ => None,
    };
    Ok(PositionDistribution::new(p, t as f64)?.with_parity(parity))
}

/// The single vertex-index parity carrying all of `p`, if there is one.
fn support_parity(p: &[f64]) -> Option<u8> {
    let even: f64 = p.iter().step_by(2).sum();
    let odd: f64 = p.iter().skip(1).step_by(2).sum();
    if odd <= 1e-14 {
        Some(0)
    } else if even <= 1e-14 {
        Some(1)
    } else {
        None
    }
}

/// First two moments over signed coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// `⟨x²⟩` about the origin.
    pub second: f64,
    /// `⟨x²⟩ − ⟨x⟩²`.
    pub variance: f64,
}

impl Moments {
    pub fn sigma(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Moments of `dist` using the graph's signed coordinates.
pub fn moments(graph: &GraphSpec, dist: &PositionDistribution) -> Result<Moments> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (x, p) in dist.probabilities.iter().enumerate() {
        let c = graph.coordinate(x).ok_or_else(|| {
            Error::Unsupported(format!("{:?} has no signed coordinates", graph.kind()))
        })? as f64;
        mean += c * p;
        second += c * c * p;
    }
    Ok(Moments {
        mean,
        second,
        variance: second - mean * mean,
    })
}

/// Moments of a distribution over coordinates `offset, offset+1, …`.
pub fn moments_on_coordinates(p: &[f64], offset: i64) -> Moments {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (i, v) in p.iter().enumerate() {
        let c = (i as i64 + offset) as f64;
        mean += c * v;
        second += c * c * v;
    }
    Moments {
        mean,
        second,
        variance: second - mean * mean,
    }
}

/// `Σ_x |P(x) − Q(x)|` (no ½ factor; range `[0, 2]`).
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Uniform reference distribution. On bipartite line/cycle walks pass the
/// vertex-index parity carrying the support (for a walk started at vertex
/// `x₀`, that is `(x₀ + t) mod 2`); the reference is then uniform over that
/// parity class. Odd cycles and other graphs get the plain `1/N`.
pub fn uniform_reference(graph: &GraphSpec, parity: Option<u8>) -> PositionDistribution {
    let n = graph.vertex_count();
    let bipartite = match graph.kind() {
        GraphKind::Cycle { size } => size % 2 == 0,
        GraphKind::Line { .. } => true,
        _ => false,
    };
    match parity {
        Some(par) if bipartite => {
            let count = (0..n).filter(|x| x % 2 == par as usize % 2).count();
            let p = (0..n)
                .map(|x| if x % 2 == par as usize % 2 { 1.0 / count as f64 } else { 0.0 })
                .collect();
            PositionDistribution::unchecked(p, 0.0).with_parity(Some(par % 2))
        }
        _ => PositionDistribution::unchecked(vec![1.0 / n as f64; n], 0.0),
    }
}

/// Ordered `(time, distribution)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    entries: Vec<PositionDistribution>,
}

impl ObservableSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends; times must strictly increase.
    pub fn push(&mut self, dist: PositionDistribution) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if dist.time <= last.time {
                return Err(param(
                    "time",
                    format!("{} does not follow {}", dist.time, last.time),
                ));
            }
            if dist.len() != last.len() {
                return Err(Error::Dimension {
                    expected: last.len(),
                    found: dist.len(),
                });
            }
        }
        self.entries.push(dist);
        Ok(())
    }

    pub fn entries(&self) -> &[PositionDistribution] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|d| d.time).collect()
    }

    pub fn moments(&self, graph: &GraphSpec) -> Result<Vec<Moments>> {
        self.entries.iter().map(|d| moments(graph, d)).collect()
    }

    pub fn tv_to(&self, reference: &[f64]) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|d| tv_distance(&d.probabilities, reference))
            .collect()
    }
}

/// Plain mean of the distributions (discrete time averaging over the series).
pub fn time_average(series: &ObservableSeries) -> Result<PositionDistribution> {
    let first = series
        .entries()
        .first()
        .ok_or_else(|| param("series", "cannot average an empty series"))?;
    let mut acc = vec![0.0; first.len()];
    for d in series.entries() {
        for (a, p) in acc.iter_mut().zip(&d.probabilities) {
            *a += p;
        }
    }
    let k = series.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    let t = series.entries().last().map(|d| d.time).unwrap_or(0.0);
    Ok(PositionDistribution::unchecked(acc, t))
}

/// Trapezoid-rule average `(1/T)∫₀ᵀ P(t) dt` of a sampled continuous series
/// (samples must start at `t = 0`).
pub fn time_average_trapezoid(series: &ObservableSeries) -> Result<PositionDistribution> {
    let e = series.entries();
    if e.len() < 2 {
        return Err(param("series", "need at least two samples to integrate"));
    }
    let mut acc = vec![0.0; e[0].len()];
    for w in e.windows(2) {
        let dt = w[1].time - w[0].time;
        for (a, (p, q)) in acc.iter_mut().zip(w[0].probabilities.iter().zip(&w[1].probabilities)) {
            *a += 0.5 * dt * (p + q);
        }
    }
    let span = e[e.len() - 1].time - e[0].time;
    acc.iter_mut().for_each(|a| *a /= span);
    Ok(PositionDistribution::unchecked(acc, e[e.len() - 1].time))
}

/// Running mean: element `k` is the mean of `dists[0..=k]`.
pub fn running_average(dists: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(dists.len());
    let mut acc = vec![0.0; dists.first().map_or(0, Vec::len)];
    for (k, d) in dists.iter().enumerate() {
        for (a, p) in acc.iter_mut().zip(d) {
            *a += p;
        }
        out.push(acc.iter().map(|a| a / (k + 1) as f64).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_cycle, build_hypercube, build_line};

    #[test]
    fn tv_convention_has_no_half() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        let u = [0.25; 4];
        assert!((tv_distance(&u, &[1.0, 0.0, 0.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(tv_distance(&u, &[0.5; 2]).is_err());
    }

    #[test]
    fn uniform_references() {
        let c49 = build_cycle(49).unwrap();
        assert!(uniform_reference(&c49, Some(0)).probabilities.iter().all(|&p| p == 1.0 / 49.0));
        let c48 = build_cycle(48).unwrap();
        let r = uniform_reference(&c48, Some(0));
        assert_eq!(r.probabilities[0], 1.0 / 24.0);
        assert_eq!(r.probabilities[1], 0.0);
        let h = build_hypercube(3).unwrap();
        assert!(uniform_reference(&h, None).probabilities.iter().all(|&p| p == 0.125));
    }

    #[test]
    fn distribution_validation() {
        let d = PositionDistribution::new(vec![0.5, 0.5 + 1e-13, -1e-13], 0.0).unwrap();
        assert_eq!(d.probabilities[2], 0.0);
        assert!(PositionDistribution::new(vec![1.1, -0.1], 0.0).is_err());
        assert!(PositionDistribution::new(vec![0.5, 0.4], 0.0).is_err());
    }

    #[test]
    fn point_and_pair_marginals() {
        let g = build_line(2).unwrap();
        let o = g.line_index(0).unwrap();
        let s = WalkStatePure::basis(&g, o, 0);
        let d = position_distribution(&g, &s).unwrap();
        assert_eq!(d.probabilities[o], 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = vec![C64::new(0.0, 0.0); g.basis_size()];
        a[2 * g.line_index(-1).unwrap()] = C64::new(h, 0.0);
        a[2 * g.line_index(1).unwrap() + 1] = C64::new(h, 0.0);
        let d = position_distribution(&g, &WalkStatePure { amplitudes: a, time: 1 }).unwrap();
        assert!((d.probabilities[g.line_index(1).unwrap()] - 0.5).abs() < 1e-15);
        assert_eq!(d.support_parity, Some(1));
        let m = moments(&g, &d).unwrap();
        assert!((m.second - 1.0).abs() < 1e-15 && m.mean.abs() < 1e-15);
    }

    #[test]
    fn series_must_increase() {
        let mut s = ObservableSeries::new();
        s.push(PositionDistribution::unchecked(vec![1.0, 0.0], 1.0)).unwrap();
        assert!(s.push(PositionDistribution::unchecked(vec![0.0, 1.0], 1.0)).is_err());
        s.push(PositionDistribution::unchecked(vec![0.0, 1.0], 2.0)).unwrap();
        let avg = time_average(&s).unwrap();
        assert_eq!(avg.probabilities, vec![0.5, 0.5]);
        let trap = time_average_trapezoid(&s).unwrap();
        assert_eq!(trap.probabilities, vec![0.5, 0.5]);
    }
}
