//! Flat `key = value` configuration.
//!
//! One assignment per line, `#` starts a comment. Keys carry a section
//! prefix: `augment.*`, `model.*`, `train.*`, `eval.*`, `experiment.*`.
//! Missing keys keep their defaults, unknown keys and out-of-range values are
//! errors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Parameters of the synthetic covariate generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthGenConfig {
    /// Event count is uniform on `1..=c_e_max`.
    pub c_e_max: usize,
    /// Changepoint count is uniform on `0..=c_cp_max`.
    pub c_cp_max: usize,
    /// Standard deviation of the changepoint amplitudes.
    pub sigma_cp: f64,
    /// Bounds on the bell width, as fractions of the series length.
    pub bell_width_range: (f64, f64),
    /// Standard deviation of event amplitudes.
    pub amplitude_std: f64,
}

impl Default for SynthGenConfig {
    fn default() -> Self {
        Self {
            c_e_max: 20,
            c_cp_max: 8,
            sigma_cp: 2.0,
            bell_width_range: (0.01, 0.1),
            amplitude_std: 1.0,
        }
    }
}

impl SynthGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_e_max < 1 {
            return Err(Error::config("augment.c_e_max", "must be >= 1"));
        }
        positive("augment.sigma_cp", self.sigma_cp)?;
        positive("augment.amplitude_std", self.amplitude_std)?;
        let (lo, hi) = self.bell_width_range;
        positive("augment.bell_width_min", lo)?;
        if !(hi >= lo && hi.is_finite()) {
            return Err(Error::config(
                "augment.bell_width_max",
                "must be finite and >= bell_width_min",
            ));
        }
        Ok(())
    }
}

/// Sampling distributions of the covariate augmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationConfig {
    /// Geometric parameter of the covariate count.
    pub p: f64,
    /// Threshold of the impact branch: an impact is drawn when `U > p_fo`.
    pub p_fo: f64,
    /// Threshold of the gating branch: a gate is drawn when `U > p_pw`.
    pub p_pw: f64,
    pub k_max: usize,
    pub p_lagcount: f64,
    pub p_lagpos: f64,
    pub max_lag: usize,
    /// Impact noise variance as a fraction of the impact variance.
    pub noise_scale: f64,
    /// Probability that a covariate comes from the synthetic generator.
    pub synth_fraction: f64,
    /// Probability that a covariate is presented as past-only.
    pub past_only_prob: f64,
    pub synth: SynthGenConfig,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            p: 0.25,
            p_fo: 0.2,
            p_pw: 0.15,
            k_max: 10,
            p_lagcount: 0.85,
            p_lagpos: 0.15,
            max_lag: 500,
            noise_scale: 0.02,
            synth_fraction: 0.5,
            past_only_prob: 0.5,
            synth: SynthGenConfig::default(),
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("augment.p", self.p)?;
        open_unit("augment.p_fo", self.p_fo)?;
        open_unit("augment.p_pw", self.p_pw)?;
        open_unit("augment.p_lagcount", self.p_lagcount)?;
        open_unit("augment.p_lagpos", self.p_lagpos)?;
        closed_unit("augment.synth_fraction", self.synth_fraction)?;
        closed_unit("augment.past_only_prob", self.past_only_prob)?;
        if self.k_max < 1 {
            return Err(Error::config("augment.k_max", "must be >= 1"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config("augment.noise_scale", "must be >= 0"));
        }
        self.synth.validate()
    }
}

/// Architecture of the forecaster.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers_enc: usize,
    pub n_layers_dec: usize,
    pub n_heads: usize,
    /// Width of feed-forward layers and of both residual blocks.
    pub d_ff: usize,
    /// Input patch length.
    pub m_in: usize,
    /// Output patch length.
    pub m_out: usize,
    /// Longest context the time embedding table covers.
    pub max_context: usize,
    /// Longest horizon the time embedding table covers.
    pub max_horizon: usize,
    pub max_covariates: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_layers_enc: 2,
            n_layers_dec: 2,
            n_heads: 4,
            d_ff: 128,
            m_in: 32,
            m_out: 64,
            max_context: 512,
            max_horizon: 256,
            max_covariates: 10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("model.d_model", self.d_model),
            ("model.n_heads", self.n_heads),
            ("model.d_ff", self.d_ff),
            ("model.m_in", self.m_in),
            ("model.m_out", self.m_out),
            ("model.max_context", self.max_context),
            ("model.max_horizon", self.max_horizon),
        ] {
            if v < 1 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        if self.d_model % (2 * self.n_heads) != 0 {
            return Err(Error::config(
                "model.d_model",
                "must be divisible by 2 * n_heads for rotary pairing",
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Input patch slots available to the context (relative offsets `<= 0`).
    pub fn context_slots(&self) -> usize {
        self.max_context.div_ceil(self.m_in)
    }

    /// Total number of learned time embeddings.
    pub fn max_time_positions(&self) -> usize {
        self.context_slots() + self.max_horizon.div_ceil(self.m_in)
    }

    fn write_pairs(&self, out: &mut String) {
        for (k, v) in [
            ("d_model", self.d_model),
            ("n_layers_enc", self.n_layers_enc),
            ("n_layers_dec", self.n_layers_dec),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("m_in", self.m_in),
            ("m_out", self.m_out),
            ("max_context", self.max_context),
            ("max_horizon", self.max_horizon),
            ("max_covariates", self.max_covariates),
        ] {
            let _ = writeln!(out, "model.{k} = {v}");
        }
    }

    /// `model.*` lines, parseable by [`parse_config`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_pairs(&mut s);
        s
    }
}

/// Optimizer and data settings of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Window length drawn from the corpus for each training sample.
    pub context_length: usize,
    pub horizon: usize,
    /// Apply covariate augmentation to training windows.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            warmup_fraction: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: 1.0,
            context_length: 128,
            horizon: 32,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be >= 0"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("train.weight_decay", "must be >= 0"));
        }
        closed_unit("train.warmup_fraction", self.warmup_fraction)?;
        for (key, b) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key, "must lie in [0, 1)"));
            }
        }
        positive("train.eps", self.eps)?;
        if !(self.grad_clip >= 0.0) {
            return Err(Error::config("train.grad_clip", "must be >= 0"));
        }
        if self.context_length < 1 || self.horizon < 1 {
            return Err(Error::config(
                "train.context_length",
                "context_length and horizon must be >= 1",
            ));
        }
        Ok(())
    }
}

/// Evaluation protocol settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Horizons in units of the sample period.
    pub horizon_periods: Vec<usize>,
    /// Fraction of each series used for rolling evaluation.
    pub rolling_fraction: f64,
    pub ridge_lambda: f64,
    /// Extra lagged covariate columns for the ridge model.
    pub ridge_lags: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon_periods: vec![1, 2],
            rolling_fraction: 0.1,
            ridge_lambda: 1.0,
            ridge_lags: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_periods.is_empty() || self.horizon_periods.contains(&0) {
            return Err(Error::config(
                "eval.horizon_periods",
                "must be a non-empty list of positive integers",
            ));
        }
        if !(self.rolling_fraction > 0.0 && self.rolling_fraction <= 1.0) {
            return Err(Error::config("eval.rolling_fraction", "must lie in (0, 1]"));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::config("eval.ridge_lambda", "must be >= 0"));
        }
        Ok(())
    }
}

/// Settings of the scripted desk-scale experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Base target series in the synthetic training corpus.
    pub corpus_size: usize,
    /// Samples in the ablation evaluation set.
    pub eval_samples: usize,
    /// Samples per impact-sensitivity cell.
    pub cell_samples: usize,
    pub event_counts: Vec<usize>,
    pub covariate_counts: Vec<usize>,
    /// Magnitude of deterministic impacts in evaluation data.
    pub impact_scale: f64,
    /// Amplitude of the bell events in evaluation covariates.
    pub bell_amplitude: f64,
    /// Level offset that keeps evaluation targets away from zero.
    pub target_level: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus_size: 5000,
            eval_samples: 200,
            cell_samples: 200,
            event_counts: vec![0, 1, 2, 4, 8],
            covariate_counts: vec![1, 2, 3],
            impact_scale: 1.0,
            bell_amplitude: 1.0,
            target_level: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.corpus_size < 1 || self.eval_samples < 1 || self.cell_samples < 1 {
            return Err(Error::config(
                "experiment.corpus_size",
                "sample counts must be >= 1",
            ));
        }
        if self.covariate_counts.contains(&0) {
            return Err(Error::config(
                "experiment.covariate_counts",
                "covariate counts must be >= 1",
            ));
        }
        positive("experiment.bell_amplitude", self.bell_amplitude)?;
        Ok(())
    }
}

/// Every section of a configuration file, resolved against defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigSet {
    pub augment: AugmentationConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub experiment: ExperimentConfig,
}

impl ConfigSet {
    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.experiment.validate()
    }

    /// Full resolved configuration in the file format, every key listed.
    pub fn to_text(&self) -> String {
        let a = &self.augment;
        let t = &self.train;
        let e = &self.eval;
        let x = &self.experiment;
        let list = |v: &[usize]| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "augment.p = {}", a.p);
        let _ = writeln!(s, "augment.p_fo = {}", a.p_fo);
        let _ = writeln!(s, "augment.p_pw = {}", a.p_pw);
        let _ = writeln!(s, "augment.k_max = {}", a.k_max);
        let _ = writeln!(s, "augment.p_lagcount = {}", a.p_lagcount);
        let _ = writeln!(s, "augment.p_lagpos = {}", a.p_lagpos);
        let _ = writeln!(s, "augment.max_lag = {}", a.max_lag);
        let _ = writeln!(s, "augment.noise_scale = {}", a.noise_scale);
        let _ = writeln!(s, "augment.synth_fraction = {}", a.synth_fraction);
        let _ = writeln!(s, "augment.past_only_prob = {}", a.past_only_prob);
        let _ = writeln!(s, "augment.c_e_max = {}", a.synth.c_e_max);
        let _ = writeln!(s, "augment.c_cp_max = {}", a.synth.c_cp_max);
        let _ = writeln!(s, "augment.sigma_cp = {}", a.synth.sigma_cp);
        let _ = writeln!(s, "augment.bell_width_min = {}", a.synth.bell_width_range.0);
        let _ = writeln!(s, "augment.bell_width_max = {}", a.synth.bell_width_range.1);
        let _ = writeln!(s, "augment.amplitude_std = {}", a.synth.amplitude_std);
        self.model.write_pairs(&mut s);
        let _ = writeln!(s, "train.steps = {}", t.steps);
        let _ = writeln!(s, "train.batch_size = {}", t.batch_size);
        let _ = writeln!(s, "train.learning_rate = {}", t.learning_rate);
        let _ = writeln!(s, "train.weight_decay = {}", t.weight_decay);
        let _ = writeln!(s, "train.warmup_fraction = {}", t.warmup_fraction);
        let _ = writeln!(s, "train.beta1 = {}", t.beta1);
        let _ = writeln!(s, "train.beta2 = {}", t.beta2);
        let _ = writeln!(s, "train.eps = {}", t.eps);
        let _ = writeln!(s, "train.grad_clip = {}", t.grad_clip);
        let _ = writeln!(s, "train.context_length = {}", t.context_length);
        let _ = writeln!(s, "train.horizon = {}", t.horizon);
        let _ = writeln!(s, "train.augment = {}", t.augment);
        let _ = writeln!(s, "eval.horizon_periods = {}", list(&e.horizon_periods));
        let _ = writeln!(s, "eval.rolling_fraction = {}", e.rolling_fraction);
        let _ = writeln!(s, "eval.ridge_lambda = {}", e.ridge_lambda);
        let _ = writeln!(s, "eval.ridge_lags = {}", list(&e.ridge_lags));
        let _ = writeln!(s, "experiment.corpus_size = {}", x.corpus_size);
        let _ = writeln!(s, "experiment.eval_samples = {}", x.eval_samples);
        let _ = writeln!(s, "experiment.cell_samples = {}", x.cell_samples);
        let _ = writeln!(s, "experiment.event_counts = {}", list(&x.event_counts));
        let _ = writeln!(s, "experiment.covariate_counts = {}", list(&x.covariate_counts));
        let _ = writeln!(s, "experiment.impact_scale = {}", x.impact_scale);
        let _ = writeln!(s, "experiment.bell_amplitude = {}", x.bell_amplitude);
        let _ = writeln!(s, "experiment.target_level = {}", x.target_level);
        s
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let a = &mut self.augment;
        let m = &mut self.model;
        let t = &mut self.train;
        let e = &mut self.eval;
        let x = &mut self.experiment;
        match key {
            "augment.p" => a.p = float(key, value)?,
            "augment.p_fo" => a.p_fo = float(key, value)?,
            "augment.p_pw" => a.p_pw = float(key, value)?,
            "augment.k_max" => a.k_max = int(key, value)?,
            "augment.p_lagcount" => a.p_lagcount = float(key, value)?,
            "augment.p_lagpos" => a.p_lagpos = float(key, value)?,
            "augment.max_lag" => a.max_lag = int(key, value)?,
            "augment.noise_scale" => a.noise_scale = float(key, value)?,
            "augment.synth_fraction" => a.synth_fraction = float(key, value)?,
            "augment.past_only_prob" => a.past_only_prob = float(key, value)?,
            "augment.c_e_max" => a.synth.c_e_max = int(key, value)?,
            "augment.c_cp_max" => a.synth.c_cp_max = int(key, value)?,
            "augment.sigma_cp" => a.synth.sigma_cp = float(key, value)?,
            "augment.bell_width_min" => a.synth.bell_width_range.0 = float(key, value)?,
            "augment.bell_width_max" => a.synth.bell_width_range.1 = float(key, value)?,
            "augment.amplitude_std" => a.synth.amplitude_std = float(key, value)?,
            "model.d_model" => m.d_model = int(key, value)?,
            "model.n_layers_enc" => m.n_layers_enc = int(key, value)?,
            "model.n_layers_dec" => m.n_layers_dec = int(key, value)?,
            "model.n_heads" => m.n_heads = int(key, value)?,
            "model.d_ff" => m.d_ff = int(key, value)?,
            "model.m_in" => m.m_in = int(key, value)?,
            "model.m_out" => m.m_out = int(key, value)?,
            "model.max_context" => m.max_context = int(key, value)?,
            "model.max_horizon" => m.max_horizon = int(key, value)?,
            "model.max_covariates" => m.max_covariates = int(key, value)?,
            "train.steps" => t.steps = int(key, value)?,
            "train.batch_size" => t.batch_size = int(key, value)?,
            "train.learning_rate" => t.learning_rate = float(key, value)?,
            "train.weight_decay" => t.weight_decay = float(key, value)?,
            "train.warmup_fraction" => t.warmup_fraction = float(key, value)?,
            "train.beta1" => t.beta1 = float(key, value)?,
            "train.beta2" => t.beta2 = float(key, value)?,
            "train.eps" => t.eps = float(key, value)?,
            "train.grad_clip" => t.grad_clip = float(key, value)?,
            "train.context_length" => t.context_length = int(key, value)?,
            "train.horizon" => t.horizon = int(key, value)?,
            "train.augment" => t.augment = boolean(key, value)?,
            "eval.horizon_periods" => e.horizon_periods = int_list(key, value)?,
            "eval.rolling_fraction" => e.rolling_fraction = float(key, value)?,
            "eval.ridge_lambda" => e.ridge_lambda = float(key, value)?,
            "eval.ridge_lags" => e.ridge_lags = int_list(key, value)?,
            "experiment.corpus_size" => x.corpus_size = int(key, value)?,
            "experiment.eval_samples" => x.eval_samples = int(key, value)?,
            "experiment.cell_samples" => x.cell_samples = int(key, value)?,
            "experiment.event_counts" => x.event_counts = int_list(key, value)?,
            "experiment.covariate_counts" => x.covariate_counts = int_list(key, value)?,
            "experiment.impact_scale" => x.impact_scale = float(key, value)?,
            "experiment.bell_amplitude" => x.bell_amplitude = float(key, value)?,
            "experiment.target_level" => x.target_level = float(key, value)?,
            _ => {
                return Err(Error::UnknownConfigKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<ConfigSet> {
    let mut cfg = ConfigSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {}: expected `key = value`", i + 1))
        })?;
        cfg.set(key.trim(), value.trim(), i + 1)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn float(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("'{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn int(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::config(key, format!("'{v}' is not a non-negative integer")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    v.parse()
        .map_err(|_| Error::config(key, format!("'{v}' is not true/false")))
}

fn int_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| int(key, s))
        .collect()
}

fn open_unit(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v} outside (0, 1)")))
    }
}

fn closed_unit(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v} outside [0, 1]")))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v} must be positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_table_defaults() {
        let cfg = parse_config("").unwrap();
        let a = &cfg.augment;
        assert_eq!(a.p, 0.25);
        assert_eq!(a.p_fo, 0.2);
        assert_eq!(a.p_pw, 0.15);
        assert_eq!(a.k_max, 10);
        assert_eq!(a.p_lagcount, 0.85);
        assert_eq!(a.p_lagpos, 0.15);
        assert_eq!(a.max_lag, 500);
        assert_eq!(a.noise_scale, 0.02);
        assert_eq!(a.synth.c_e_max, 20);
        assert_eq!(a.synth.c_cp_max, 8);
        assert_eq!(a.synth.sigma_cp, 2.0);
        assert_eq!(cfg.model.m_in, 32);
        assert_eq!(cfg.model.m_out, 64);
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.train.weight_decay, 0.01);
        assert_eq!(cfg.train.warmup_fraction, 0.05);
    }

    #[test]
    fn patch_windows_as_defaults_are_accepted() {
        let cfg = parse_config("model.m_in = 32\nmodel.m_out = 64 # output\n").unwrap();
        assert_eq!(cfg.model, ModelConfig::default());
    }

    #[test]
    fn negative_probability_is_a_range_error() {
        match parse_config("augment.p = -0.1") {
            Err(Error::ConfigValue { key, .. }) => assert_eq!(key, "augment.p"),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        match parse_config("# comment\naugment.pfo = 0.3") {
            Err(Error::UnknownConfigKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "augment.pfo");
            }
            other => panic!("expected unknown key, got {other:?}"),
        }
    }

    #[test]
    fn rotary_pairing_constraint() {
        assert!(parse_config("model.d_model = 36\nmodel.n_heads = 4").is_err());
        assert!(parse_config("model.d_model = 40\nmodel.n_heads = 4").is_ok());
    }

    #[test]
    fn to_text_round_trips() {
        let mut cfg = ConfigSet::default();
        cfg.augment.p = 0.3;
        cfg.eval.ridge_lags = vec![1, 24];
        cfg.train.augment = false;
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}
