use serde::{Deserialize, Serialize};

/// Arithmetic mean; zero for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean, `sd / sqrt(n)` with the `n - 1` sample
/// deviation; zero below two samples.
pub fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Standard error of a difference of two independent means.
pub fn pooled_stderr(a: &[f64], b: &[f64]) -> f64 {
    stderr(a).hypot(stderr(b))
}

/// Least-squares slope of `ln y` against `ln x`, over points with both
/// coordinates positive.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// One cell of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub planner: String,
    pub budget: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl SummaryRow {
    pub fn new(planner: String, budget: String, returns: &[f64]) -> Self {
        Self {
            planner,
            budget,
            mean: mean(returns),
            stderr: stderr(returns),
            n: returns.len(),
        }
    }
}
