//! Synthetic base target series: seasonal harmonics, a linear trend and
//! AR(1) noise around a positive level.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataio::TimeSeriesSample;
use crate::error::{Error, Result};
use crate::rng::{stream_indexed, Rng};

/// Shape of generated target series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesConfig {
    pub length: usize,
    /// Steps held out as the forecast horizon.
    pub horizon: usize,
    /// Candidate seasonal periods, drawn uniformly.
    pub periods: Vec<usize>,
    /// Level the series oscillate around.
    pub level: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            length: 256,
            horizon: 32,
            periods: vec![7, 12, 24],
            level: 10.0,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.length <= self.horizon {
            return Err(Error::Domain(format!(
                "series length {} cannot hold horizon {}",
                self.length, self.horizon
            )));
        }
        if self.periods.is_empty() || self.periods.contains(&0) {
            return Err(Error::Domain("periods must be non-empty and >= 1".into()));
        }
        Ok(())
    }
}

/// `len` values of one random seasonal series with period `period`.
pub fn seasonal_series(len: usize, period: usize, level: f64, rng: &mut Rng) -> Vec<f64> {
    let a1 = rng.random_range(0.5..2.0);
    let a2 = rng.random_range(0.0..0.7);
    let phase1 = rng.random_range(0.0..2.0 * PI);
    let phase2 = rng.random_range(0.0..2.0 * PI);
    let slope = rng.random_range(-1.0..1.0) / len as f64;
    let phi = rng.random_range(0.0..0.8);
    let sigma = rng.random_range(0.05..0.4);
    let noise = Normal::new(0.0, sigma).expect("positive sigma");
    let w = 2.0 * PI / period as f64;
    let mut ar = 0.0;
    (0..len)
        .map(|t| {
            ar = phi * ar + noise.sample(rng);
            let x = t as f64;
            level + a1 * (w * x + phase1).sin() + a2 * (2.0 * w * x + phase2).sin() + slope * x + ar
        })
        .collect()
}

/// `count` univariate samples. Sample `i` depends only on `(seed, i)` and is
/// named `p{period}/s{i}`, so periods act as dataset groups.
pub fn generate_corpus(count: usize, cfg: &SeriesConfig, seed: u64) -> Result<Vec<TimeSeriesSample>> {
    cfg.validate()?;
    Ok((0..count)
        .map(|i| {
            let mut rng = stream_indexed(seed, "base-series", i as u64);
            let period = cfg.periods[rng.random_range(0..cfg.periods.len())];
            let y = seasonal_series(cfg.length, period, cfg.level, &mut rng);
            let t = cfg.length - cfg.horizon;
            TimeSeriesSample::univariate(format!("p{period}/s{i}"), y, t, cfg.horizon, period)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let cfg = SeriesConfig::default();
        let a = generate_corpus(20, &cfg, 5).unwrap();
        let b = generate_corpus(20, &cfg, 5).unwrap();
        assert_eq!(a, b);
        for s in &a {
            s.validate().unwrap();
            assert!(s.target.iter().all(|&v| v > 0.0));
        }
        assert_ne!(a, generate_corpus(20, &cfg, 6).unwrap());
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let cfg = SeriesConfig {
            length: 10,
            ..SeriesConfig::default()
        };
        assert!(generate_corpus(1, &cfg, 0).is_err());
    }
}
