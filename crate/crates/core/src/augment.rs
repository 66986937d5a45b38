//! Informative covariate augmentation.
//!
//! A training target `y` gets `k` sampled covariates attached, and each
//! covariate `x` pushes the target through a sampled impact function
//!
//! ```text
//! f_t(x, y) = a_0 + sum_j a_j * x_{t-j} + eps_t   if t in S(x, y)
//!           = 0                                  otherwise
//! ```
//!
//! where `S` is an active set defined by a quantile threshold on either the
//! target or the covariate. After augmentation the covariates carry
//! information about the target's horizon, which is what teaches a model to
//! read them in context.
//!
//! Everything happens in z-normalized space so that standard-normal
//! coefficients produce impacts on the scale of the target.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};

use crate::config::AugmentationConfig;
use crate::dataio::{Covariate, CovariateKind, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::preprocess::{fit_scaler, normalize};
use crate::rng::{stream_indexed, Rng};
use crate::synthgen::generate_synthetic_covariate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateVariable {
    Target,
    Covariate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Greater,
    Less,
}

/// `S = { t | z_t <relation> quantile_q(z) }` with `z` chosen by `variable`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveSetRule {
    pub variable: GateVariable,
    pub relation: Relation,
    pub quantile: f64,
}

impl ActiveSetRule {
    /// `(target, >, 0)`: the no-gate rule, every timestep active.
    pub const FULL_DOMAIN: ActiveSetRule = ActiveSetRule {
        variable: GateVariable::Target,
        relation: Relation::Greater,
        quantile: 0.0,
    };

    pub fn is_full_domain(&self) -> bool {
        *self == Self::FULL_DOMAIN
    }
}

/// A sampled sparse linear impact of one covariate on the target.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactFunction {
    pub bias: f64,
    /// Lag -> coefficient. Lag 0 is contemporaneous.
    pub lag_coefficients: BTreeMap<usize, f64>,
    pub rule: ActiveSetRule,
    /// Noise variance as a fraction of the deterministic impact variance.
    pub noise_scale: f64,
}

impl ImpactFunction {
    pub fn zero() -> Self {
        Self {
            bias: 0.0,
            lag_coefficients: BTreeMap::new(),
            rule: ActiveSetRule::FULL_DOMAIN,
            noise_scale: 0.0,
        }
    }

    /// No coefficient and no bias: the covariate does not move the target.
    pub fn is_zero(&self) -> bool {
        self.bias == 0.0 && self.lag_coefficients.values().all(|&a| a == 0.0)
    }

    pub fn max_lag(&self) -> usize {
        self.lag_coefficients.keys().next_back().copied().unwrap_or(0)
    }
}

/// `k = min(kappa, k_max)` with `kappa ~ Geom(p)` on `{0, 1, ..}`.
pub fn sample_covariate_count(cfg: &AugmentationConfig, rng: &mut Rng) -> usize {
    let kappa = Geometric::new(cfg.p).expect("validated p").sample(rng);
    kappa.min(cfg.k_max as u64) as usize
}

/// Draws an impact function by the two-branch procedure: with probability
/// `1 - p_fo` lagged coefficients are drawn, and then with probability
/// `1 - p_pw` a bias and a quantile gate are drawn on top.
pub fn sample_impact_function(cfg: &AugmentationConfig, rng: &mut Rng) -> ImpactFunction {
    let mut f = ImpactFunction::zero();
    f.noise_scale = cfg.noise_scale;
    if rng.random::<f64>() <= cfg.p_fo {
        return f;
    }
    let lag_count = 1 + Geometric::new(cfg.p_lagcount)
        .expect("validated p_lagcount")
        .sample(rng);
    let lag_pos = Geometric::new(cfg.p_lagpos).expect("validated p_lagpos");
    for _ in 0..lag_count {
        let lag = lag_pos.sample(rng).min(cfg.max_lag as u64) as usize;
        let alpha: f64 = StandardNormal.sample(rng);
        f.lag_coefficients.insert(lag, alpha);
    }
    if rng.random::<f64>() > cfg.p_pw {
        f.bias = StandardNormal.sample(rng);
        f.rule = ActiveSetRule {
            variable: if rng.random_bool(0.5) {
                GateVariable::Target
            } else {
                GateVariable::Covariate
            },
            relation: if rng.random_bool(0.5) {
                Relation::Greater
            } else {
                Relation::Less
            },
            quantile: rng.random::<f64>(),
        };
    }
    f
}

/// Nearest-rank empirical quantile: the smallest element whose cumulative
/// fraction reaches `q`.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sequence");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (q.clamp(0.0, 1.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Active timesteps of `rule` over the aligned `target` and `covariate`.
pub fn active_set(rule: &ActiveSetRule, target: &[f64], covariate: &[f64]) -> Vec<bool> {
    if rule.is_full_domain() {
        return vec![true; target.len()];
    }
    let z = match rule.variable {
        GateVariable::Target => target,
        GateVariable::Covariate => covariate,
    };
    let threshold = nearest_rank_quantile(z, rule.quantile);
    z.iter()
        .map(|&v| match rule.relation {
            Relation::Greater => v > threshold,
            Relation::Less => v < threshold,
        })
        .collect()
}

/// Impact of `f` over `target.len()` steps.
///
/// `covariate` holds `history` leading steps followed by values aligned with
/// `target`; lags reaching before the stored history read 0. Returns the
/// impact series and its active set.
pub fn compute_impact(
    f: &ImpactFunction,
    target: &[f64],
    covariate: &[f64],
    history: usize,
    rng: &mut Rng,
) -> (Vec<f64>, Vec<bool>) {
    let n = target.len();
    assert!(
        covariate.len() >= history + n,
        "covariate must cover the target span"
    );
    let aligned = &covariate[history..history + n];
    let active = active_set(&f.rule, target, aligned);
    let lagged = |t: usize, j: usize| -> f64 {
        let idx = (history + t) as isize - j as isize;
        if idx < 0 {
            0.0
        } else {
            covariate[idx as usize]
        }
    };
    let mut impact: Vec<f64> = (0..n)
        .map(|t| {
            if !active[t] {
                return 0.0;
            }
            f.bias
                + f.lag_coefficients
                    .iter()
                    .map(|(&j, &a)| a * lagged(t, j))
                    .sum::<f64>()
        })
        .collect();

    let count = active.iter().filter(|&&a| a).count();
    if f.noise_scale > 0.0 && count > 0 {
        let mean = impact
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| v)
            .sum::<f64>()
            / count as f64;
        let var = impact
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| (v - mean) * (v - mean))
            .sum::<f64>()
            / count as f64;
        if var > 0.0 {
            let noise = Normal::new(0.0, (f.noise_scale * var).sqrt()).expect("finite std");
            for (v, &a) in impact.iter_mut().zip(&active) {
                if a {
                    *v += noise.sample(rng);
                }
            }
        }
    }
    (impact, active)
}

/// Source of candidate covariates: raw corpus series plus the synthetic
/// generator.
#[derive(Clone, Debug, Default)]
pub struct CovariatePool {
    pub series: Vec<Vec<f64>>,
}

impl CovariatePool {
    pub fn new(series: Vec<Vec<f64>>) -> Self {
        Self { series }
    }

    pub fn from_corpus(corpus: &[TimeSeriesSample]) -> Self {
        Self::new(corpus.iter().map(|s| s.target.clone()).collect())
    }

    /// Draws a covariate window covering `len` steps plus up to `max_history`
    /// leading steps, z-normalized by the statistics of the `len`-step part.
    /// Returns `(values, history)`.
    fn draw(
        &self,
        len: usize,
        cfg: &AugmentationConfig,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, usize)> {
        let use_synth = self.series.is_empty() || rng.random_bool(cfg.synth_fraction);
        if use_synth {
            if cfg.synth_fraction < 1.0 && self.series.is_empty() {
                return Err(Error::config(
                    "augment.synth_fraction",
                    "covariate pool is empty but synth_fraction < 1",
                ));
            }
            let raw = generate_synthetic_covariate(len, &cfg.synth, rng)?;
            let scaler = fit_scaler(&raw, None)?;
            return Ok((normalize(&raw, &scaler), 0));
        }
        let candidates: Vec<&Vec<f64>> = self.series.iter().filter(|s| s.len() >= len).collect();
        if candidates.is_empty() {
            return Err(Error::Domain(format!(
                "no corpus series covers a covariate window of {len} steps"
            )));
        }
        let series = candidates[rng.random_range(0..candidates.len())];
        let start = rng.random_range(0..=series.len() - len);
        let history = start.min(cfg.max_lag);
        let window = &series[start - history..start + len];
        let scaler = fit_scaler(&window[history..], None)?;
        Ok((normalize(window, &scaler), history))
    }
}

/// Augmented sample together with what produced it.
#[derive(Clone, Debug)]
pub struct AugmentedSample {
    pub sample: TimeSeriesSample,
    pub impacts: Vec<ImpactFunction>,
    /// Active set of each impact over the `T + h` steps.
    pub active_sets: Vec<Vec<bool>>,
    /// The target before impacts were added.
    pub original: Vec<f64>,
}

/// Whether sampled covariates push the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImpactMode {
    /// Sampled impact functions are applied.
    Informative,
    /// Covariates are attached but every impact is zero.
    Uninformative,
}

/// Augments one normalized target window of length `context_length + horizon`.
#[allow(clippy::too_many_arguments)]
pub fn augment_sample(
    id: impl Into<String>,
    y: &[f64],
    context_length: usize,
    horizon: usize,
    period: usize,
    pool: &CovariatePool,
    cfg: &AugmentationConfig,
    mode: ImpactMode,
    rng: &mut Rng,
) -> Result<AugmentedSample> {
    let n = context_length + horizon;
    if y.len() != n {
        return Err(Error::Domain(format!(
            "target window has {} steps, expected {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("target window contains non-finite values".into()));
    }
    if pool.series.is_empty() && cfg.synth_fraction < 1.0 {
        return Err(Error::config(
            "augment.synth_fraction",
            "covariate pool is empty but synth_fraction < 1",
        ));
    }
    // Impact noise has its own stream so the structural draws do not depend
    // on whether noise is enabled.
    let mut noise_rng = stream_indexed(rng.random(), "impact-noise", 0);

    let k = sample_covariate_count(cfg, rng);
    let mut y_aug = y.to_vec();
    let mut covariates = Vec::with_capacity(k);
    let mut impacts = Vec::with_capacity(k);
    let mut active_sets = Vec::with_capacity(k);
    for i in 0..k {
        let (values, history) = pool.draw(n, cfg, rng)?;
        let f = match mode {
            ImpactMode::Informative => sample_impact_function(cfg, rng),
            ImpactMode::Uninformative => {
                // Keep the draw so both modes see the same covariates.
                let _ = sample_impact_function(cfg, rng);
                ImpactFunction::zero()
            }
        };
        let (impact, active) = compute_impact(&f, y, &values, history, &mut noise_rng);
        for (ya, d) in y_aug.iter_mut().zip(&impact) {
            *ya += d;
        }
        let past_only = rng.random_bool(cfg.past_only_prob);
        let aligned = &values[history..];
        let cov = if past_only {
            Covariate::new(
                format!("cov{i}"),
                CovariateKind::PastOnly,
                aligned[..context_length].to_vec(),
            )
        } else {
            Covariate::new(format!("cov{i}"), CovariateKind::PastAndFuture, aligned.to_vec())
        };
        covariates.push(cov);
        impacts.push(f);
        active_sets.push(active);
    }
    let sample = TimeSeriesSample {
        id: id.into(),
        target: y_aug,
        context_length,
        horizon,
        covariates,
        period,
        missing_mask: vec![true; n],
    };
    Ok(AugmentedSample {
        sample,
        impacts,
        active_sets,
        original: y.to_vec(),
    })
}

/// Draws a random `context_length + horizon` window from `source`, normalizes
/// it and augments it.
#[allow(clippy::too_many_arguments)]
pub fn augment_window(
    id: impl Into<String>,
    source: &TimeSeriesSample,
    context_length: usize,
    horizon: usize,
    pool: &CovariatePool,
    cfg: &AugmentationConfig,
    mode: ImpactMode,
    rng: &mut Rng,
) -> Result<AugmentedSample> {
    let n = context_length + horizon;
    if source.target.len() < n {
        return Err(Error::Domain(format!(
            "sample '{}' has {} steps, window needs {n}",
            source.id,
            source.target.len()
        )));
    }
    let start = rng.random_range(0..=source.target.len() - n);
    let window = &source.target[start..start + n];
    let mask = &source.missing_mask[start..start + n];
    let scaler = fit_scaler(window, Some(mask)).unwrap_or(crate::preprocess::ScalerState::IDENTITY);
    let y = normalize(window, &scaler);
    let mut out = augment_sample(
        id,
        &y,
        context_length,
        horizon,
        source.period,
        pool,
        cfg,
        mode,
        rng,
    )?;
    out.sample.missing_mask = mask.to_vec();
    Ok(out)
}

/// Produces `count` augmented samples from `corpus`, each using the source
/// sample's own context length and horizon. Sample `i` depends only on
/// `(seed, i)`.
pub fn augment_corpus(
    corpus: &[TimeSeriesSample],
    count: usize,
    cfg: &AugmentationConfig,
    seed: u64,
) -> Result<Vec<TimeSeriesSample>> {
    if corpus.is_empty() {
        return Err(Error::Domain("cannot augment an empty corpus".into()));
    }
    cfg.validate()?;
    let pool = CovariatePool::from_corpus(corpus);
    (0..count)
        .map(|i| {
            let mut rng = stream_indexed(seed, "augment-corpus", i as u64);
            let src = &corpus[rng.random_range(0..corpus.len())];
            augment_window(
                format!("{}/aug{i}", src.id),
                src,
                src.context_length,
                src.horizon,
                &pool,
                cfg,
                ImpactMode::Informative,
                &mut rng,
            )
            .map(|a| a.sample)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn lag_fn(coeffs: &[(usize, f64)]) -> ImpactFunction {
        ImpactFunction {
            bias: 0.0,
            lag_coefficients: coeffs.iter().copied().collect(),
            rule: ActiveSetRule::FULL_DOMAIN,
            noise_scale: 0.0,
        }
    }

    #[test]
    fn degenerate_geometric_gives_no_covariates() {
        let cfg = AugmentationConfig {
            p: 1.0 - 1e-12,
            ..Default::default()
        };
        let mut rng = stream(1, "k");
        assert!((0..1000).all(|_| sample_covariate_count(&cfg, &mut rng) == 0));
    }

    #[test]
    fn covariate_count_is_bounded() {
        let cfg = AugmentationConfig::default();
        let mut rng = stream(2, "k");
        assert!((0..10_000).all(|_| sample_covariate_count(&cfg, &mut rng) <= 10));
    }

    #[test]
    fn nearest_rank() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(nearest_rank_quantile(&v, 0.0), 1.0);
        assert_eq!(nearest_rank_quantile(&v, 0.5), 2.0);
        assert_eq!(nearest_rank_quantile(&v, 0.51), 3.0);
        assert_eq!(nearest_rank_quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn active_set_cases() {
        let cov = [1.0, 2.0, 3.0, 4.0];
        let target = [9.0, 7.0, 8.0, 6.0];
        let full = active_set(&ActiveSetRule::FULL_DOMAIN, &target, &cov);
        assert_eq!(full, vec![true; 4]);
        let gt = ActiveSetRule {
            variable: GateVariable::Covariate,
            relation: Relation::Greater,
            quantile: 0.5,
        };
        assert_eq!(active_set(&gt, &target, &cov), vec![false, false, true, true]);
        let lt = ActiveSetRule {
            relation: Relation::Less,
            ..gt
        };
        assert_eq!(active_set(&lt, &target, &cov), vec![true, false, false, false]);
        let on_target = ActiveSetRule {
            variable: GateVariable::Target,
            ..gt
        };
        // Median of the target is 7.
        assert_eq!(
            active_set(&on_target, &target, &cov),
            vec![true, false, true, false]
        );
    }

    #[test]
    fn identity_impact() {
        let cov = [0.5, -1.0, 2.0, 3.5];
        let y = [0.0; 4];
        let (imp, _) = compute_impact(&lag_fn(&[(0, 1.0)]), &y, &cov, 0, &mut stream(0, "n"));
        assert_eq!(imp, cov.to_vec());
    }

    #[test]
    fn zero_impact() {
        let cov = [0.5, -1.0, 2.0, 3.5];
        let (imp, _) = compute_impact(&ImpactFunction::zero(), &cov, &cov, 0, &mut stream(0, "n"));
        assert!(imp.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_convolution_with_zero_filled_history() {
        let cov = [0.0, 1.0, 2.0, 3.0];
        let f = lag_fn(&[(0, 1.0), (1, -1.0)]);
        let (imp, _) = compute_impact(&f, &[0.0; 4], &cov, 0, &mut stream(0, "n"));
        assert_eq!(imp, vec![0.0, 1.0, 1.0, 1.0]);
        // With one step of real history the first lag reads it.
        let cov_h = [5.0, 0.0, 1.0, 2.0, 3.0];
        let (imp, _) = compute_impact(&f, &[0.0; 4], &cov_h, 1, &mut stream(0, "n"));
        assert_eq!(imp, vec![-5.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gated_impact_is_zero_outside_active_set() {
        let cov = [1.0, 2.0, 3.0, 4.0];
        let f = ImpactFunction {
            bias: 0.5,
            lag_coefficients: [(0, 2.0)].into_iter().collect(),
            rule: ActiveSetRule {
                variable: GateVariable::Covariate,
                relation: Relation::Greater,
                quantile: 0.5,
            },
            noise_scale: 0.0,
        };
        let (imp, act) = compute_impact(&f, &[0.0; 4], &cov, 0, &mut stream(0, "n"));
        assert_eq!(imp, vec![0.0, 0.0, 6.5, 8.5]);
        assert_eq!(act, vec![false, false, true, true]);
    }

    #[test]
    fn noise_scales_with_impact_variance() {
        let cov: Vec<f64> = (0..2000).map(|t| (t as f64 * 0.1).sin()).collect();
        let mut f = lag_fn(&[(0, 1.0)]);
        f.noise_scale = 0.02;
        let (imp, _) = compute_impact(&f, &vec![0.0; 2000], &cov, 0, &mut stream(5, "n"));
        let resid: Vec<f64> = imp.iter().zip(&cov).map(|(a, b)| a - b).collect();
        let var_x = cov.iter().map(|v| v * v).sum::<f64>() / 2000.0;
        let var_e = resid.iter().map(|v| v * v).sum::<f64>() / 2000.0;
        let ratio = var_e / var_x;
        assert!((ratio - 0.02).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn empty_pool_requires_synthetic_only() {
        let cfg = AugmentationConfig {
            p: 0.01,
            ..Default::default()
        };
        let y = vec![0.0; 16];
        let err = augment_sample(
            "a",
            &y,
            12,
            4,
            1,
            &CovariatePool::default(),
            &cfg,
            ImpactMode::Informative,
            &mut stream(0, "a"),
        );
        assert!(matches!(err, Err(Error::ConfigValue { .. })));
        let cfg = AugmentationConfig {
            synth_fraction: 1.0,
            ..cfg
        };
        assert!(augment_sample(
            "a",
            &y,
            12,
            4,
            1,
            &CovariatePool::default(),
            &cfg,
            ImpactMode::Informative,
            &mut stream(0, "a"),
        )
        .is_ok());
    }

    #[test]
    fn no_covariates_leaves_target_untouched() {
        let cfg = AugmentationConfig {
            p: 1.0 - 1e-12,
            synth_fraction: 1.0,
            ..Default::default()
        };
        let y: Vec<f64> = (0..40).map(|t| (t as f64).cos()).collect();
        let out = augment_sample(
            "a",
            &y,
            30,
            10,
            5,
            &CovariatePool::default(),
            &cfg,
            ImpactMode::Informative,
            &mut stream(0, "a"),
        )
        .unwrap();
        assert!(out.sample.covariates.is_empty());
        assert_eq!(out.sample.target, y);
    }

    #[test]
    fn uninformative_mode_keeps_target() {
        let cfg = AugmentationConfig {
            p: 0.1,
            synth_fraction: 1.0,
            ..Default::default()
        };
        let y: Vec<f64> = (0..40).map(|t| (t as f64).cos()).collect();
        for seed in 0..20 {
            let out = augment_sample(
                "a",
                &y,
                30,
                10,
                5,
                &CovariatePool::default(),
                &cfg,
                ImpactMode::Uninformative,
                &mut stream(seed, "a"),
            )
            .unwrap();
            assert_eq!(out.sample.target, y);
            out.sample.validate().unwrap();
        }
    }

    #[test]
    fn augmented_samples_validate_and_are_deterministic() {
        let corpus: Vec<TimeSeriesSample> = (0..4)
            .map(|i| {
                let t: Vec<f64> = (0..300).map(|t| ((t + i * 7) as f64 * 0.2).sin() + 3.0).collect();
                TimeSeriesSample::univariate(format!("s{i}"), t, 64, 16, 12)
            })
            .collect();
        let cfg = AugmentationConfig {
            p: 0.3,
            ..Default::default()
        };
        let a = augment_corpus(&corpus, 25, &cfg, 42).unwrap();
        let b = augment_corpus(&corpus, 25, &cfg, 42).unwrap();
        let c = augment_corpus(&corpus, 25, &cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for s in &a {
            s.validate().unwrap();
            assert_eq!(s.target.len(), 80);
        }
        assert!(a.iter().any(|s| !s.covariates.is_empty()));
    }
}
