/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Fits `h(p) = h₀·exp(−(n + α)p)` to peak heights and returns `α`, with the
/// fit of `ln h` against `p`.
pub fn decay_exponent(n: usize, rates: &[f64], heights: &[f64]) -> (f64, LinearFit) {
    let logs: Vec<f64> = heights.iter().map(|h| h.ln()).collect();
    let fit = linear_fit(rates, &logs);
    (-fit.slope - n as f64, fit)
}
