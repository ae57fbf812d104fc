use crate::BenchError;

/// Least-squares power law `value ≈ C·(1/h)^slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `log(value)` against `log(1/h)`; negative for decreasing
    /// quantities.
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
}

pub fn fit_scaling(h: &[f64], values: &[f64]) -> Result<ScalingFit, BenchError> {
    if h.len() != values.len() {
        return Err(BenchError::Invalid(format!(
            "{} mesh sizes but {} values",
            h.len(),
            values.len()
        )));
    }
    if h.len() < 3 {
        return Err(BenchError::Invalid(format!(
            "a scaling fit needs at least 3 levels, got {}",
            h.len()
        )));
    }
    if h.iter().any(|&x| !(x > 0.0)) || h.windows(2).any(|w| w[1] >= w[0]) {
        return Err(BenchError::Invalid("mesh sizes must be positive and strictly decreasing".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(BenchError::Invalid(format!("cannot fit a nonpositive value {v}")));
    }
    let x: Vec<f64> = h.iter().map(|h| (1.0 / h).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        h: h.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        residual,
    })
}
