//! Finite-difference verification of the analytic gradients.

use super::autodiff::Graph;
use super::params::ParamStore;
use super::{forward, normalized_truth, prepare_input, random_entry};
use crate::config::ModelConfig;
use crate::dataio::{Covariate, CovariateKind, TimeSeriesSample};
use crate::error::Result;
use crate::rng::stream;
use crate::QUANTILE_LEVELS;

/// Denominator floor of the relative error, so entries whose true gradient
/// is (near) zero are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// A configuration with under 5k parameters for gradient checks.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_layers_enc: 1,
        n_layers_dec: 1,
        n_heads: 2,
        d_ff: 16,
        m_in: 4,
        m_out: 4,
        max_context: 16,
        max_horizon: 8,
        max_covariates: 2,
    }
}

/// A small sample exercising every token kind: one past-and-future and one
/// past-only covariate, a missing context value and two decoder patches.
pub fn check_sample(seed: u64) -> TimeSeriesSample {
    use rand::Rng as _;
    let mut rng = stream(seed, "gradcheck-sample");
    let (t, h) = (14, 7);
    let mut series = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let target = series(t + h);
    let c0 = series(t + h);
    let c1 = series(t);
    let mut s = TimeSeriesSample::univariate("gradcheck", target, t, h, 4);
    s.missing_mask[3] = false;
    s.covariates = vec![
        Covariate::new("a", CovariateKind::PastAndFuture, c0),
        Covariate::new("b", CovariateKind::PastOnly, c1),
    ];
    s
}

/// Quantile loss of `sample` under `params`.
pub fn loss(params: &ParamStore<f64>, cfg: &ModelConfig, sample: &TimeSeriesSample) -> Result<f64> {
    let input = prepare_input(sample, cfg)?;
    let (truth, observed) = normalized_truth(sample, &input.target_scaler);
    let mut g = Graph::new(params);
    let pred = forward(&mut g, cfg, &input)?;
    let l = g.quantile_loss(pred, truth, observed, QUANTILE_LEVELS.to_vec());
    Ok(g.value(l).data[0])
}

/// Compares analytic gradients of the loss with central differences at
/// `n_entries` parameter entries drawn from `seed`.
pub fn gradient_check(
    params: &ParamStore<f64>,
    cfg: &ModelConfig,
    sample: &TimeSeriesSample,
    epsilon: f64,
    n_entries: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let input = prepare_input(sample, cfg)?;
    let (truth, observed) = normalized_truth(sample, &input.target_scaler);
    let mut g = Graph::new(params);
    let pred = forward(&mut g, cfg, &input)?;
    let l = g.quantile_loss(pred, truth, observed, QUANTILE_LEVELS.to_vec());
    let mut analytic = params.zeros_like();
    for (id, grad) in g.backward(l, 1.0) {
        analytic.get_mut(id).add_assign(&grad);
    }

    let mut rng = stream(seed, "gradcheck-entries");
    let mut probe = params.clone();
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let (id, k) = random_entry(params, &mut rng);
        let orig = params.get(id).data[k];
        probe.get_mut(id).data[k] = orig + epsilon;
        let up = loss(&probe, cfg, sample)?;
        probe.get_mut(id).data[k] = orig - epsilon;
        let down = loss(&probe, cfg, sample)?;
        probe.get_mut(id).data[k] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic.get(id).data[k];
        entries.push(GradCheckEntry {
            name: params.name(id).to_string(),
            offset: k,
            analytic: a,
            numeric,
            relative_error: relative_error(a, numeric),
        });
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn tiny_config_is_small() {
        let p = init_params::<f64>(&tiny_config(), &mut stream(0, "x"));
        assert!(p.num_values() <= 5000, "{}", p.num_values());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = tiny_config();
        let p = init_params::<f64>(&cfg, &mut stream(7, "gc"));
        let r = gradient_check(&p, &cfg, &check_sample(7), 1e-5, 200, 7).unwrap();
        assert!(r.max_relative_error < 1e-4, "{}", r.max_relative_error);
        assert_eq!(r.entries.len(), 200);
    }

    #[test]
    fn check_is_deterministic() {
        let cfg = tiny_config();
        let p = init_params::<f64>(&cfg, &mut stream(3, "gc"));
        let a = gradient_check(&p, &cfg, &check_sample(3), 1e-5, 20, 3).unwrap();
        let b = gradient_check(&p, &cfg, &check_sample(3), 1e-5, 20, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_head_bias_gradient_is_exact() {
        let cfg = tiny_config();
        let mut p = init_params::<f64>(&cfg, &mut stream(5, "gc"));
        for name in ["output.w1", "output.b1", "output.w2", "output.b2", "output.skip"] {
            p.by_name_mut(name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
        }
        let sample = check_sample(5);
        let input = prepare_input(&sample, &cfg).unwrap();
        let (truth, observed) = normalized_truth(&sample, &input.target_scaler);
        let mut g = Graph::new(&p);
        let pred = forward(&mut g, &cfg, &input).unwrap();
        let l = g.quantile_loss(pred, truth, observed, QUANTILE_LEVELS.to_vec());
        let id = p.id("output.b2").unwrap();
        let grad = g
            .backward(l, 1.0)
            .into_iter()
            .find(|(i, _)| *i == id)
            .unwrap()
            .1;
        let eps = 1e-5;
        for k in 0..p.get(id).data.len() {
            let mut q = p.clone();
            q.get_mut(id).data[k] = eps;
            let up = loss(&q, &cfg, &sample).unwrap();
            q.get_mut(id).data[k] = -eps;
            let down = loss(&q, &cfg, &sample).unwrap();
            let numeric = (up - down) / (2.0 * eps);
            assert!((grad.data[k] - numeric).abs() < 1e-9, "entry {k}");
        }
    }
}
