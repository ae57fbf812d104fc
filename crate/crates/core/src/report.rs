use std::io::Write;
use std::time::Duration;

use crate::error::Result;

/// Number of trailing error ratios averaged into the contraction factor.
pub const RHO_WINDOW: usize = 5;

/// History of an iterative solve. `errors[n]` is the error (or residual)
/// measure after `n` iterations, `errors[0]` the initial one.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    pub errors: Vec<f64>,
    pub converged: bool,
    /// Set when the error grew for ten consecutive iterations.
    pub diverged: bool,
    pub wall_time: Duration,
    /// Global primal iterates, recorded only on request.
    pub iterates: Vec<Vec<f64>>,
}

impl SolveReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            ..Self::default()
        }
    }

    /// Geometric mean of the last five error ratios, if there are enough
    /// nonzero entries.
    pub fn rho(&self) -> Option<f64> {
        let n = self.errors.len();
        if n < RHO_WINDOW + 1 {
            return None;
        }
        let (a, b) = (self.errors[n - 1 - RHO_WINDOW], self.errors[n - 1]);
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            Some((b / a).powf(1.0 / RHO_WINDOW as f64))
        } else {
            None
        }
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }

    /// Pushes a new error value and updates the divergence flag.
    pub(crate) fn record(&mut self, err: f64) {
        self.errors.push(err);
        let n = self.errors.len();
        if n > 10 && self.errors[n - 11..].windows(2).all(|w| w[1] > w[0]) {
            self.diverged = true;
        }
    }

    /// `iter,error_norm` lines, then a `#` summary line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,error_norm")?;
        for (i, e) in self.errors.iter().enumerate() {
            writeln!(w, "{i},{e:.16e}")?;
        }
        let rho = self.rho().map_or("nan".to_string(), |r| format!("{r:.16e}"));
        writeln!(
            w,
            "# method={},iterations={},converged={},rho={}",
            self.method, self.iterations, self.converged, rho
        )?;
        Ok(())
    }
}
