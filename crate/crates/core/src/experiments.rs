//! Scripted desk-scale studies on fully synthetic data.
//!
//! - Augmentation ablation: two forecasters are trained identically except
//!   that one sees informative covariates (sampled impacts added to the
//!   target) and the other sees covariates with no effect. Both are scored
//!   with and without covariates on data whose targets carry deterministic
//!   lag-0 covariate impacts.
//! - Impact sensitivity: covariates made of bell-shaped events drive the
//!   target through a deterministic impact. Cells vary the number of events
//!   visible in the context and the number of covariates.
//!
//! Every report is a pure function of the configuration and the seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::baselines::{fit_in_context, in_context_forecast, seasonal_naive_sample};
use crate::config::ConfigSet;
use crate::dataio::{Covariate, CovariateKind, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::evaluation::{mase, wql};
use crate::model::train::{train, TrainReport};
use crate::model::Forecaster;
use crate::preprocess::{fit_scaler, normalize};
use crate::rng::{stream, stream_indexed, Rng};
use crate::series::{generate_corpus, seasonal_series, SeriesConfig};
use crate::synthgen::{generate_synthetic_covariate, Bell, Events, SyntheticCovariate, Trend};
use crate::{QuantileForecast, MEDIAN_INDEX};

/// Seasonal periods of the synthetic base series.
pub const PERIODS: [usize; 3] = [7, 12, 24];
/// Width range, in steps, of evaluation bell events.
pub const BELL_WIDTH: (f64, f64) = (2.0, 5.0);

/// Base target corpus used for training. Series are long enough to hold
/// several training windows.
pub fn training_corpus(cfg: &ConfigSet, seed: u64) -> Result<Vec<TimeSeriesSample>> {
    let window = cfg.train.context_length + cfg.train.horizon;
    let series = SeriesConfig {
        length: (2 * window).max(256),
        horizon: cfg.train.horizon,
        periods: PERIODS.to_vec(),
        level: cfg.experiment.target_level,
    };
    generate_corpus(cfg.experiment.corpus_size, &series, seed)
}

/// Trains one forecaster on `corpus`; `augment` switches informative
/// covariate augmentation on or off. Initialization and batch draws use the
/// same seed either way.
pub fn train_variant(
    cfg: &ConfigSet,
    corpus: &[TimeSeriesSample],
    augment: bool,
    seed: u64,
) -> Result<(Forecaster, TrainReport)> {
    let mut model = Forecaster::new(cfg.model.clone(), seed)?;
    let mut tc = cfg.train.clone();
    tc.augment = augment;
    let report = train(&mut model, corpus, &cfg.augment, &tc, seed)?;
    Ok((model, report))
}

fn base_window(cfg: &ConfigSet, rng: &mut Rng) -> (Vec<f64>, usize) {
    let n = cfg.train.context_length + cfg.train.horizon;
    // MASE needs more context steps than one period.
    let periods: Vec<usize> = PERIODS
        .iter()
        .copied()
        .filter(|&p| p < cfg.train.context_length)
        .collect();
    let period = if periods.is_empty() {
        1
    } else {
        periods[rng.random_range(0..periods.len())]
    };
    (seasonal_series(n, period, cfg.experiment.target_level, rng), period)
}

/// Impact coefficient in target units: `impact_scale * std(context)` times a
/// random sign and a factor in `[0.5, 1.5)`.
fn impact_coefficient(cfg: &ConfigSet, context: &[f64], rng: &mut Rng) -> f64 {
    let std = fit_scaler(context, None).map(|s| s.std).unwrap_or(1.0);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    sign * cfg.experiment.impact_scale * std * rng.random_range(0.5..1.5)
}

/// Evaluation samples with synthetic covariates and deterministic lag-0
/// impacts `y_t += c_i x_{i,t}`. Covariate counts cycle through
/// `experiment.covariate_counts`.
pub fn ablation_eval_set(cfg: &ConfigSet, seed: u64) -> Result<Vec<TimeSeriesSample>> {
    let t = cfg.train.context_length;
    let h = cfg.train.horizon;
    let counts = &cfg.experiment.covariate_counts;
    (0..cfg.experiment.eval_samples)
        .map(|i| {
            let mut rng = stream_indexed(seed, "ablation-eval", i as u64);
            let (mut y, period) = base_window(cfg, &mut rng);
            let k = counts[i % counts.len()];
            let mut covariates = Vec::with_capacity(k);
            for c in 0..k {
                let raw = generate_synthetic_covariate(t + h, &cfg.augment.synth, &mut rng)?;
                let x = normalize(&raw, &fit_scaler(&raw, None)?);
                let coef = impact_coefficient(cfg, &y[..t], &mut rng);
                for (yv, xv) in y.iter_mut().zip(&x) {
                    *yv += coef * xv;
                }
                covariates.push(Covariate::new(format!("x{c}"), CovariateKind::PastAndFuture, x));
            }
            let mut s = TimeSeriesSample::univariate(format!("ablation/{i}"), y, t, h, period);
            s.covariates = covariates;
            Ok(s)
        })
        .collect()
}

/// Mean scores of one model and inference mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub model: String,
    pub covariates: bool,
    pub wql: f64,
    pub mase: f64,
}

fn score(
    name: &str,
    covariates: bool,
    samples: &[TimeSeriesSample],
    mut forecast: impl FnMut(&TimeSeriesSample) -> Result<QuantileForecast>,
) -> Result<ScoreRow> {
    let (mut w, mut m) = (0.0, 0.0);
    for s in samples {
        let f = forecast(s)?;
        w += wql(&f, s.future())?;
        let median: Vec<f64> = f.iter().map(|r| r[MEDIAN_INDEX]).collect();
        m += mase(&median, s.future(), s.context(), s.period)?;
    }
    let n = samples.len() as f64;
    Ok(ScoreRow {
        model: name.to_string(),
        covariates,
        wql: w / n,
        mase: m / n,
    })
}

/// Scores of both variants, with and without covariates.
pub fn evaluate_ablation(
    augmented: &Forecaster,
    unaugmented: &Forecaster,
    eval: &[TimeSeriesSample],
) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for (name, model) in [("augmented", augmented), ("unaugmented", unaugmented)] {
        for cov in [true, false] {
            rows.push(score(name, cov, eval, |s| model.predict(s, cov, true))?);
        }
    }
    rows.push(score("seasonal-naive", false, eval, seasonal_naive_sample)?);
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub seed: u64,
    /// Resolved configuration in the file format.
    pub config: String,
    pub rows: Vec<ScoreRow>,
    /// Mean training loss over the last tenth of the steps.
    pub final_train_loss: BTreeMap<String, f64>,
}

impl AblationReport {
    pub fn row(&self, model: &str, covariates: bool) -> Option<&ScoreRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.covariates == covariates)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,covariates,wql,mase\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.model, r.covariates, r.wql, r.mase);
        }
        s
    }
}

fn tail_mean(losses: &[f64]) -> f64 {
    let k = (losses.len() / 10).max(1).min(losses.len());
    if k == 0 {
        return f64::NAN;
    }
    losses[losses.len() - k..].iter().sum::<f64>() / k as f64
}

/// Builds the ablation report from already trained variants.
pub fn ablation_report(
    cfg: &ConfigSet,
    seed: u64,
    augmented: &(Forecaster, TrainReport),
    unaugmented: &(Forecaster, TrainReport),
) -> Result<AblationReport> {
    let eval = ablation_eval_set(cfg, seed)?;
    let rows = evaluate_ablation(&augmented.0, &unaugmented.0, &eval)?;
    let mut final_train_loss = BTreeMap::new();
    final_train_loss.insert("augmented".to_string(), tail_mean(&augmented.1.losses));
    final_train_loss.insert("unaugmented".to_string(), tail_mean(&unaugmented.1.losses));
    Ok(AblationReport {
        seed,
        config: cfg.to_text(),
        rows,
        final_train_loss,
    })
}

/// Trains both variants and scores them.
pub fn run_ablation(cfg: &ConfigSet, seed: u64) -> Result<AblationReport> {
    cfg.validate()?;
    let corpus = training_corpus(cfg, seed)?;
    log::info!("training augmented variant");
    let aug = train_variant(cfg, &corpus, true, seed)?;
    log::info!("training unaugmented variant");
    let unaug = train_variant(cfg, &corpus, false, seed)?;
    ablation_report(cfg, seed, &aug, &unaug)
}

/// How a covariate's events reach the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LagMode {
    /// `y_t += c x_t`
    Fixed0,
    /// `y_t += c x_{t - l}` with one lag `l ~ Geometric(p_lagpos)` per
    /// covariate, capped at `max_lag`.
    Geometric,
}

impl std::str::FromStr for LagMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed0" => Ok(LagMode::Fixed0),
            "geometric" => Ok(LagMode::Geometric),
            _ => Err(Error::Domain(format!(
                "unknown lag mode '{s}' (expected fixed0 or geometric)"
            ))),
        }
    }
}

/// One impact-sensitivity sample. Each of the `k` covariates is zero apart
/// from exactly `events` bells inside the context and, with probability
/// `1/k`, one more bell inside the horizon, so one covariate per sample has
/// a horizon event in expectation.
pub fn sensitivity_sample(
    cfg: &ConfigSet,
    events: usize,
    k: usize,
    lag_mode: LagMode,
    id: String,
    rng: &mut Rng,
) -> Result<TimeSeriesSample> {
    let t = cfg.train.context_length;
    let h = cfg.train.horizon;
    let n = t + h;
    let (mut y, period) = base_window(cfg, rng);
    let amp = cfg.experiment.bell_amplitude;
    let lag_dist = Geometric::new(cfg.augment.p_lagpos)
        .map_err(|e| Error::config("augment.p_lagpos", e.to_string()))?;
    let mut covariates = Vec::with_capacity(k);
    for c in 0..k {
        let mut positions: Vec<f64> = (0..events).map(|_| rng.random_range(0.0..t as f64)).collect();
        if rng.random_bool(1.0 / k as f64) {
            positions.push(rng.random_range(t as f64..n as f64));
        }
        let bells = positions
            .into_iter()
            .map(|position| Bell {
                position,
                amplitude: amp,
                width: rng.random_range(BELL_WIDTH.0..BELL_WIDTH.1),
            })
            .collect();
        let x = SyntheticCovariate {
            events: Events::Gauss(bells),
            trend: Trend::flat(),
        }
        .render(n);
        let coef = impact_coefficient(cfg, &y[..t], rng) / amp;
        let lag = match lag_mode {
            LagMode::Fixed0 => 0,
            LagMode::Geometric => (lag_dist.sample(rng) as usize).min(cfg.augment.max_lag),
        };
        for i in lag..n {
            y[i] += coef * x[i - lag];
        }
        covariates.push(Covariate::new(format!("x{c}"), CovariateKind::PastAndFuture, x));
    }
    let mut s = TimeSeriesSample::univariate(id, y, t, h, period);
    s.covariates = covariates;
    Ok(s)
}

/// Mean WQL of one model in one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellScore {
    pub events: usize,
    pub covariates: usize,
    pub model: String,
    pub wql: f64,
}

/// Mean WQL gain of a covariate-aware method over the no-covariate
/// forecaster in one cell (positive = covariates help).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Advantage {
    pub events: usize,
    pub covariates: usize,
    pub method: String,
    pub advantage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub seed: u64,
    pub config: String,
    pub lag_mode: LagMode,
    pub cells: Vec<CellScore>,
    pub advantages: Vec<Advantage>,
}

impl SensitivityReport {
    /// Advantage of `method` per event count, averaged over covariate counts.
    pub fn mean_advantage(&self, method: &str) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for a in self.advantages.iter().filter(|a| a.method == method) {
            let e = acc.entry(a.events).or_insert((0.0, 0));
            e.0 += a.advantage;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("events,covariates,model,wql\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{},{}", c.events, c.covariates, c.model, c.wql);
        }
        s
    }
}

/// Scores every cell of `event_counts x covariate_counts`. With a trained
/// forecaster the models are the forecaster with and without covariates and
/// the ridge model over its residual forecasts; seasonal naive and the ridge
/// model over seasonal naive are always included.
pub fn run_impact_sensitivity(
    cfg: &ConfigSet,
    forecaster: Option<&Forecaster>,
    lag_mode: LagMode,
    seed: u64,
) -> Result<SensitivityReport> {
    cfg.validate()?;
    let lambda = cfg.eval.ridge_lambda;
    let lags = &cfg.eval.ridge_lags;
    let mut cells = Vec::new();
    let mut advantages = Vec::new();
    for &events in &cfg.experiment.event_counts {
        for &k in &cfg.experiment.covariate_counts {
            let mut rng = stream(seed, &format!("sensitivity/{events}/{k}"));
            let samples: Vec<TimeSeriesSample> = (0..cfg.experiment.cell_samples)
                .map(|i| sensitivity_sample(cfg, events, k, lag_mode, format!("cell/{i}"), &mut rng))
                .collect::<Result<_>>()?;
            let mut row: Vec<(String, f64)> = Vec::new();
            if let Some(m) = forecaster {
                row.push(("cosmic".into(), score("", true, &samples, |s| m.predict(s, true, true))?.wql));
                row.push(("cosmic-nocov".into(), score("", false, &samples, |s| m.predict(s, false, true))?.wql));
                let ridge = score("", true, &samples, |s| {
                    let fit = fit_in_context(s, lambda, lags)?;
                    in_context_forecast(&fit, s, |r| m.predict(r, false, true))
                })?;
                row.push(("ridge-ctx".into(), ridge.wql));
            }
            row.push(("seasonal-naive".into(), score("", false, &samples, seasonal_naive_sample)?.wql));
            let ridge_naive = score("", true, &samples, |s| {
                let fit = fit_in_context(s, lambda, lags)?;
                in_context_forecast(&fit, s, seasonal_naive_sample)
            })?;
            row.push(("ridge-ctx-naive".into(), ridge_naive.wql));

            let get = |name: &str| row.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
            let mut adv = |method: &str, base: &str| {
                if let (Some(b), Some(m)) = (get(base), get(method)) {
                    advantages.push(Advantage {
                        events,
                        covariates: k,
                        method: method.to_string(),
                        advantage: b - m,
                    });
                }
            };
            adv("cosmic", "cosmic-nocov");
            adv("ridge-ctx", "cosmic-nocov");
            adv("ridge-ctx-naive", "seasonal-naive");
            for (model, w) in row {
                cells.push(CellScore {
                    events,
                    covariates: k,
                    model,
                    wql: w,
                });
            }
        }
    }
    Ok(SensitivityReport {
        seed,
        config: cfg.to_text(),
        lag_mode,
        cells,
        advantages,
    })
}

/// Number of adjacent pairs where `values` decreases.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
