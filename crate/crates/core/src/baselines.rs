//! Seasonal naive forecaster and the in-context ridge covariate model.
//!
//! The ridge model regresses the target on its covariates over the context,
//! hands the residuals to a covariate-free base forecaster, and adds the
//! regression's prediction for the horizon back onto every quantile row.

use crate::dataio::{CovariateKind, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::preprocess::{fit_scaler, ScalerState};
use crate::QuantileForecast;

/// `y[T + i] = y[T + i - S * ceil(i / S)]` for `i = 1..=h`, repeated across
/// all nine levels. A context shorter than `period` falls back to `S = 1`.
pub fn seasonal_naive(context: &[f64], period: usize, horizon: usize) -> Result<QuantileForecast> {
    if context.is_empty() {
        return Err(Error::Domain("seasonal naive needs a non-empty context".into()));
    }
    let s = if period >= 1 && context.len() >= period {
        period
    } else {
        1
    };
    let t = context.len();
    Ok((1..=horizon)
        .map(|i| [context[t + i - 1 - s * i.div_ceil(s)]; 9])
        .collect())
}

/// Seasonal naive on a sample's context with its own period and horizon.
pub fn seasonal_naive_sample(sample: &TimeSeriesSample) -> Result<QuantileForecast> {
    seasonal_naive(sample.context(), sample.period, sample.horizon)
}

/// Ridge fit of the target on its covariates over the context.
#[derive(Clone, Debug, PartialEq)]
pub struct InContextLinearModel {
    /// Coefficients on the standardized design columns.
    pub standardized: Vec<f64>,
    /// Scaler of each design column (covariate, lag) over the context.
    pub column_scalers: Vec<ScalerState>,
    /// `(covariate index, lag)` of each design column.
    pub columns: Vec<(usize, usize)>,
    /// Mean of the observed context target.
    pub target_mean: f64,
    pub ridge_lambda: f64,
}

impl InContextLinearModel {
    /// Coefficients in the covariates' original units.
    pub fn coefficients(&self) -> Vec<f64> {
        self.standardized
            .iter()
            .zip(&self.column_scalers)
            .map(|(a, s)| a / s.std)
            .collect()
    }

    /// Intercept in original units.
    pub fn intercept(&self) -> f64 {
        self.target_mean
            - self
                .coefficients()
                .iter()
                .zip(&self.column_scalers)
                .map(|(a, s)| a * s.mean)
                .sum::<f64>()
    }

    /// Regression prediction at target indices `0..len`.
    pub fn reconstruct(&self, sample: &TimeSeriesSample, len: usize) -> Vec<f64> {
        let cols: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|&(c, lag)| design_column(sample, c, lag, len))
            .collect();
        (0..len)
            .map(|t| {
                self.target_mean
                    + cols
                        .iter()
                        .zip(&self.standardized)
                        .zip(&self.column_scalers)
                        .map(|((col, a), s)| a * s.normalize_value(col[t]))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Covariate `c` shifted by `lag` at target indices `0..len`. Steps before
/// the stored history repeat its earliest value.
fn design_column(sample: &TimeSeriesSample, c: usize, lag: usize, len: usize) -> Vec<f64> {
    let cov = &sample.covariates[c];
    let n = sample.target.len();
    let first = cov.values[0];
    (0..len)
        .map(|t| cov.value_at(t as isize - lag as isize, n).unwrap_or(first))
        .collect()
}

/// A column whose context spread is below this fraction of its spread over
/// context and horizon gets a zero coefficient: the context holds no usable
/// evidence about it, and standardizing by a near-zero spread would blow up
/// its horizon values.
pub const MIN_CONTEXT_SPREAD: f64 = 1e-2;

fn spread(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky
/// factorization.
fn cholesky_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 1e-12 * scale {
            return Err(Error::Solver(
                "normal equations are singular; use ridge_lambda > 0".into(),
            ));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| a[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / a[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Ridge regression of the context target on standardized covariates (plus
/// optional lagged copies). The intercept is left unpenalized by centering.
pub fn fit_in_context(
    sample: &TimeSeriesSample,
    ridge_lambda: f64,
    lags: &[usize],
) -> Result<InContextLinearModel> {
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::Domain(format!("ridge_lambda {ridge_lambda} must be >= 0")));
    }
    if let Some(c) = sample
        .covariates
        .iter()
        .find(|c| c.kind == CovariateKind::PastOnly)
    {
        return Err(Error::Capability(format!(
            "the in-context linear model needs future covariate values; '{}' is past_only",
            c.name
        )));
    }
    let t = sample.context_length;
    let mut columns = Vec::new();
    for c in 0..sample.covariates.len() {
        columns.push((c, 0));
        for &lag in lags.iter().filter(|&&l| l > 0) {
            columns.push((c, lag));
        }
    }
    let observed: Vec<usize> = (0..t).filter(|&i| sample.missing_mask[i]).collect();
    if observed.len() <= columns.len() {
        return Err(Error::Domain(format!(
            "{} observed context steps cannot fit {} coefficients",
            observed.len(),
            columns.len()
        )));
    }
    let y = sample.context();
    let target_mean = observed.iter().map(|&i| y[i]).sum::<f64>() / observed.len() as f64;

    let mut scalers = Vec::with_capacity(columns.len());
    let mut design = Vec::with_capacity(columns.len());
    let mut used = Vec::with_capacity(columns.len());
    for (j, &(c, lag)) in columns.iter().enumerate() {
        let full = design_column(sample, c, lag, t + sample.horizon);
        let col = &full[..t];
        let s = fit_scaler(col, Some(sample.context_mask()))?;
        let ctx: Vec<f64> = observed.iter().map(|&i| col[i]).collect();
        if spread(&ctx) >= MIN_CONTEXT_SPREAD * spread(&full) && spread(&ctx) > 0.0 {
            design.push(ctx.iter().map(|&v| s.normalize_value(v)).collect::<Vec<f64>>());
            used.push(j);
        }
        scalers.push(s);
    }
    let k = design.len();
    let resid: Vec<f64> = observed.iter().map(|&i| y[i] - target_mean).collect();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..k {
        for j in 0..=i {
            let v: f64 = design[i].iter().zip(&design[j]).map(|(a, b)| a * b).sum();
            xtx[i][j] = v;
            xtx[j][i] = v;
        }
        xtx[i][i] += ridge_lambda;
        xty[i] = design[i].iter().zip(&resid).map(|(a, b)| a * b).sum();
    }
    let solved = if k == 0 {
        Vec::new()
    } else {
        cholesky_solve(xtx, &xty)?
    };
    let mut standardized = vec![0.0; columns.len()];
    for (&j, a) in used.iter().zip(solved) {
        standardized[j] = a;
    }
    Ok(InContextLinearModel {
        standardized,
        column_scalers: scalers,
        columns,
        target_mean,
        ridge_lambda,
    })
}

/// Forecasts the context residuals of `model` with `base` and adds the
/// regression's horizon prediction to every quantile row.
pub fn in_context_forecast<F>(
    model: &InContextLinearModel,
    sample: &TimeSeriesSample,
    base: F,
) -> Result<QuantileForecast>
where
    F: FnOnce(&TimeSeriesSample) -> Result<QuantileForecast>,
{
    let t = sample.context_length;
    let n = t + sample.horizon;
    let fitted = model.reconstruct(sample, n);
    let mut residual = sample.without_covariates();
    residual.target.truncate(n);
    residual.missing_mask.truncate(n);
    for (r, f) in residual.target.iter_mut().zip(&fitted) {
        *r -= f;
    }
    let mut out = base(&residual)?;
    for (row, f) in out.iter_mut().zip(&fitted[t..]) {
        for v in row.iter_mut() {
            *v += f;
        }
    }
    Ok(out)
}
