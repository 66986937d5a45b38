//! Patched encoder-decoder quantile forecaster.
//!
//! Every variate (each covariate, then the target) is instance-normalized and
//! cut into patches of `m_in` steps. A residual block embeds each
//! `[values || mask]` patch into `d_model` dimensions and a learned time
//! embedding, shared across variates, is added per patch. A separator token
//! precedes each variate (`sep_c` for covariates, `sep_t` for the target).
//! The encoder runs pre-norm self-attention blocks with rotary position
//! encoding over the flat token order. The decoder holds one learned query
//! per output patch of `m_out` steps, plus that patch's time embedding, and
//! alternates self-attention, cross-attention into the encoder output, and a
//! feed-forward layer. A second residual block maps each decoder token to
//! `m_out x 9` quantile values.
//!
//! Time embeddings are indexed by the patch end relative to the forecast
//! origin, so a covariate patch and a target patch that end at the same step
//! share an embedding, and covariate patches in the horizon get their own
//! slots.

pub mod autodiff;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;
pub mod tensor;
pub mod train;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::dataio::{CovariateKind, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::preprocess::{fit_scaler, normalize, patchify, ScalerState};
use crate::rng::{stream, Rng};
use crate::{QuantileForecast, QUANTILE_LEVELS};

use autodiff::{Graph, Var};
use params::ParamStore;
use tensor::{Mat, Scalar};

/// Standard normal quantiles at [`QUANTILE_LEVELS`]; initial output bias.
const NORMAL_QUANTILES: [f64; 9] = [
    -1.281_551_565_544_600_4,
    -0.841_621_233_572_914_3,
    -0.524_400_512_708_040_7,
    -0.253_347_103_135_799_7,
    0.0,
    0.253_347_103_135_799_7,
    0.524_400_512_708_040_7,
    0.841_621_233_572_914_3,
    1.281_551_565_544_600_4,
];

/// Which variate a token belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variate {
    Covariate(usize),
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenMeta {
    pub variate: Variate,
    /// Row of the time embedding table; `None` for separators.
    pub time_position: Option<usize>,
    pub is_separator: bool,
}

/// Encoder tokens before embedding, plus what is needed to decode.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedInput {
    /// One `[values || mask]` row of width `2 m_in` per patch token.
    pub patch_inputs: Vec<Vec<f64>>,
    pub meta: Vec<TokenMeta>,
    /// Time embedding row of each decoder query.
    pub decoder_times: Vec<usize>,
    pub horizon: usize,
    pub target_scaler: ScalerState,
}

impl PreparedInput {
    pub fn n_tokens(&self) -> usize {
        self.meta.len()
    }

    pub fn n_decoder_tokens(&self) -> usize {
        self.decoder_times.len()
    }
}

/// Embedded encoder input.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSequence {
    /// `n_tokens x d_model`.
    pub embeddings: Mat<f64>,
    pub meta: Vec<TokenMeta>,
}

/// Relative end offset of a patch in units of `m_in`, mapped into the time
/// embedding table.
fn time_row(cfg: &ModelConfig, end: isize, origin: isize) -> usize {
    let r = (end - origin).div_euclid(cfg.m_in as isize)
        + if (end - origin).rem_euclid(cfg.m_in as isize) != 0 { 1 } else { 0 };
    let row = cfg.context_slots() as isize - 1 + r;
    debug_assert!(row >= 0 && (row as usize) < cfg.max_time_positions());
    row as usize
}

/// Normalizes and patches every variate of `sample`.
pub fn prepare_input(sample: &TimeSeriesSample, cfg: &ModelConfig) -> Result<PreparedInput> {
    cfg.validate()?;
    let t = sample.context_length;
    let h = sample.horizon;
    if t > cfg.max_context {
        return Err(Error::Domain(format!(
            "context length {t} exceeds the model limit {}",
            cfg.max_context
        )));
    }
    if h > cfg.max_horizon {
        return Err(Error::Domain(format!(
            "horizon {h} exceeds the model limit {}",
            cfg.max_horizon
        )));
    }
    if sample.covariates.len() > cfg.max_covariates {
        return Err(Error::Domain(format!(
            "{} covariates exceed the model limit {}",
            sample.covariates.len(),
            cfg.max_covariates
        )));
    }
    let n_target = sample.target.len();
    let mut patch_inputs = Vec::new();
    let mut meta = Vec::new();
    let mut push_variate = |values: &[f64], mask: Option<&[bool]>, span_end: usize, variate: Variate| {
        meta.push(TokenMeta {
            variate,
            time_position: None,
            is_separator: true,
        });
        let grid = patchify(values, mask, cfg.m_in);
        for i in 0..grid.n_patches() {
            let end = span_end - (grid.n_patches() - 1 - i) * cfg.m_in;
            patch_inputs.push(grid.token_input(i));
            meta.push(TokenMeta {
                variate,
                time_position: Some(time_row(cfg, end as isize, t as isize)),
                is_separator: false,
            });
        }
    };

    for (ci, cov) in sample.covariates.iter().enumerate() {
        let end = match cov.kind {
            CovariateKind::PastAndFuture => t + h,
            CovariateKind::PastOnly => t,
        };
        let values = cov.aligned(0, end, n_target);
        if values.len() < end {
            return Err(Error::validation(
                &sample.id,
                &format!("covariates.{}", cov.name),
                format!("covers {} steps, model input needs {end}", values.len()),
            ));
        }
        let scaler = fit_scaler(values, None)?;
        push_variate(&normalize(values, &scaler), None, end, Variate::Covariate(ci));
    }

    let context_mask = sample.context_mask();
    let target_scaler = fit_scaler(sample.context(), Some(context_mask)).map_err(|_| {
        Error::validation(&sample.id, "target", "no observed value in the context")
    })?;
    let z = normalize(sample.context(), &target_scaler);
    push_variate(&z, Some(context_mask), t, Variate::Target);

    let n_dec = h.div_ceil(cfg.m_out);
    let decoder_times = (0..n_dec)
        .map(|j| time_row(cfg, (t + ((j + 1) * cfg.m_out).min(h)) as isize, t as isize))
        .collect();
    Ok(PreparedInput {
        patch_inputs,
        meta,
        decoder_times,
        horizon: h,
        target_scaler,
    })
}

/// Parameter names and shapes of an architecture, in creation order.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let d = cfg.d_model;
    let f = cfg.d_ff;
    let out = cfg.m_out * QUANTILE_LEVELS.len();
    let mut v: Vec<(String, usize, usize)> = vec![
        ("input.w1".into(), 2 * cfg.m_in, f),
        ("input.b1".into(), 1, f),
        ("input.w2".into(), f, d),
        ("input.b2".into(), 1, d),
        ("input.skip".into(), 2 * cfg.m_in, d),
        ("time_embedding".into(), cfg.max_time_positions(), d),
        ("sep_c".into(), 1, d),
        ("sep_t".into(), 1, d),
    ];
    let attn = |v: &mut Vec<(String, usize, usize)>, p: &str| {
        for w in ["wq", "wk", "wv", "wo"] {
            v.push((format!("{p}.{w}"), d, d));
        }
    };
    let ffn = |v: &mut Vec<(String, usize, usize)>, p: &str| {
        v.push((format!("{p}.ff1"), d, f));
        v.push((format!("{p}.ff1_b"), 1, f));
        v.push((format!("{p}.ff2"), f, d));
        v.push((format!("{p}.ff2_b"), 1, d));
    };
    for l in 0..cfg.n_layers_enc {
        let p = format!("enc.{l}");
        v.push((format!("{p}.norm1"), 1, d));
        attn(&mut v, &format!("{p}.attn"));
        v.push((format!("{p}.norm2"), 1, d));
        ffn(&mut v, &p);
    }
    v.push(("enc.norm".into(), 1, d));
    v.push(("dec.query".into(), 1, d));
    for l in 0..cfg.n_layers_dec {
        let p = format!("dec.{l}");
        v.push((format!("{p}.norm1"), 1, d));
        attn(&mut v, &format!("{p}.self"));
        v.push((format!("{p}.norm2"), 1, d));
        attn(&mut v, &format!("{p}.cross"));
        v.push((format!("{p}.norm3"), 1, d));
        ffn(&mut v, &p);
    }
    v.push(("dec.norm".into(), 1, d));
    v.extend([
        ("output.w1".into(), d, f),
        ("output.b1".into(), 1, f),
        ("output.w2".into(), f, out),
        ("output.b2".into(), 1, out),
        ("output.skip".into(), d, out),
    ]);
    v
}

/// Random initialization: weights `N(0, 1/fan_in)`, norm gains 1, biases 0,
/// the output bias at the standard normal quantiles.
pub fn init_params<S: Scalar>(cfg: &ModelConfig, rng: &mut Rng) -> ParamStore<S> {
    let mut store = ParamStore::new();
    for (name, rows, cols) in param_shapes(cfg) {
        let leaf = name.rsplit('.').next().unwrap_or(&name);
        let data: Vec<f64> = if leaf.starts_with("norm") || name == "enc.norm" || name == "dec.norm" {
            vec![1.0; rows * cols]
        } else if name == "output.b2" {
            (0..rows * cols).map(|i| NORMAL_QUANTILES[i % 9]).collect()
        } else if rows == 1 && name != "sep_c" && name != "sep_t" && name != "dec.query" {
            vec![0.0; rows * cols]
        } else {
            let std = match name.as_str() {
                "time_embedding" | "sep_c" | "sep_t" | "dec.query" => 0.1,
                "output.w2" | "output.skip" => 0.1 / (rows as f64).sqrt(),
                _ => 1.0 / (rows as f64).sqrt(),
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            (0..rows * cols).map(|_| normal.sample(rng)).collect()
        };
        store.insert(&name, Mat::from_vec(rows, cols, data.into_iter().map(S::of).collect()));
    }
    store
}

fn check_finite<S: Scalar>(g: &Graph<S>, v: Var, layer: &str) -> Result<()> {
    if g.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.to_string(),
        })
    }
}

/// `x -> gelu(x W1 + b1) W2 + b2 + x Wskip`
fn residual_block<S: Scalar>(g: &mut Graph<S>, x: Var, prefix: &str) -> Var {
    let w1 = g.param(&format!("{prefix}.w1"));
    let b1 = g.param(&format!("{prefix}.b1"));
    let w2 = g.param(&format!("{prefix}.w2"));
    let b2 = g.param(&format!("{prefix}.b2"));
    let skip = g.param(&format!("{prefix}.skip"));
    let hidden = g.matmul(x, w1);
    let hidden = g.add_row(hidden, b1);
    let hidden = g.gelu(hidden);
    let y = g.matmul(hidden, w2);
    let y = g.add_row(y, b2);
    let s = g.matmul(x, skip);
    g.add(y, s)
}

fn feed_forward<S: Scalar>(g: &mut Graph<S>, x: Var, prefix: &str) -> Var {
    let w1 = g.param(&format!("{prefix}.ff1"));
    let b1 = g.param(&format!("{prefix}.ff1_b"));
    let w2 = g.param(&format!("{prefix}.ff2"));
    let b2 = g.param(&format!("{prefix}.ff2_b"));
    let hidden = g.matmul(x, w1);
    let hidden = g.add_row(hidden, b1);
    let hidden = g.gelu(hidden);
    let y = g.matmul(hidden, w2);
    g.add_row(y, b2)
}

/// Multi-head attention of `xq` over `xkv` with rotary encoding at the given
/// flat positions. No masking: every query sees every key.
#[allow(clippy::too_many_arguments)]
fn attention<S: Scalar>(
    g: &mut Graph<S>,
    cfg: &ModelConfig,
    xq: Var,
    q_pos: &[usize],
    xkv: Var,
    k_pos: &[usize],
    prefix: &str,
) -> Var {
    let hd = cfg.head_dim();
    let wq = g.param(&format!("{prefix}.wq"));
    let wk = g.param(&format!("{prefix}.wk"));
    let wv = g.param(&format!("{prefix}.wv"));
    let wo = g.param(&format!("{prefix}.wo"));
    let q = g.matmul(xq, wq);
    let q = g.rotary(q, q_pos.to_vec(), hd);
    let k = g.matmul(xkv, wk);
    let k = g.rotary(k, k_pos.to_vec(), hd);
    let v = g.matmul(xkv, wv);
    let scale = 1.0 / (hd as f64).sqrt();
    let heads: Vec<Var> = (0..cfg.n_heads)
        .map(|head| {
            let qh = g.slice_cols(q, head * hd, hd);
            let kh = g.slice_cols(k, head * hd, hd);
            let vh = g.slice_cols(v, head * hd, hd);
            let scores = g.matmul_t(qh, kh);
            let scores = g.scale(scores, scale);
            let weights = g.softmax_rows(scores);
            g.matmul(weights, vh)
        })
        .collect();
    let joined = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_cols(heads)
    };
    g.matmul(joined, wo)
}

/// Embedded encoder tokens in sequence order.
pub fn embed<S: Scalar>(g: &mut Graph<S>, input: &PreparedInput) -> Var {
    let width = input.patch_inputs.first().map_or(0, Vec::len);
    let flat: Vec<S> = input
        .patch_inputs
        .iter()
        .flatten()
        .map(|&v| S::of(v))
        .collect();
    let patches = g.input(Mat::from_vec(input.patch_inputs.len(), width, flat));
    let emb = residual_block(g, patches, "input");
    let times: Vec<usize> = input.meta.iter().filter_map(|m| m.time_position).collect();
    let table = g.param("time_embedding");
    let time_emb = g.gather_rows(table, times);
    let emb = g.add(emb, time_emb);

    let mut parts = Vec::new();
    let mut i = 0;
    let mut next_patch = 0;
    while i < input.meta.len() {
        let m = input.meta[i];
        if m.is_separator {
            let name = if m.variate == Variate::Target { "sep_t" } else { "sep_c" };
            parts.push(g.param(name));
            i += 1;
        } else {
            let start = i;
            while i < input.meta.len() && !input.meta[i].is_separator {
                i += 1;
            }
            parts.push(g.slice_rows(emb, next_patch, i - start));
            next_patch += i - start;
        }
    }
    g.concat_rows(parts)
}

/// Builds the embedded token sequence of `sample`.
pub fn build_input(
    params: &ParamStore<f64>,
    sample: &TimeSeriesSample,
    cfg: &ModelConfig,
) -> Result<TokenSequence> {
    let input = prepare_input(sample, cfg)?;
    let mut g = Graph::new(params);
    let x = embed(&mut g, &input);
    Ok(TokenSequence {
        embeddings: g.value(x).clone(),
        meta: input.meta,
    })
}

/// Full forward pass; returns the `h x 9` normalized quantile node.
pub fn forward<S: Scalar>(g: &mut Graph<S>, cfg: &ModelConfig, input: &PreparedInput) -> Result<Var> {
    let mut x = embed(g, input);
    check_finite(g, x, "input")?;
    let n_enc = input.n_tokens();
    let enc_pos: Vec<usize> = (0..n_enc).collect();
    for l in 0..cfg.n_layers_enc {
        let p = format!("enc.{l}");
        let gain = g.param(&format!("{p}.norm1"));
        let n = g.rms_norm(x, gain);
        let a = attention(g, cfg, n, &enc_pos, n, &enc_pos, &format!("{p}.attn"));
        x = g.add(x, a);
        let gain = g.param(&format!("{p}.norm2"));
        let n = g.rms_norm(x, gain);
        let f = feed_forward(g, n, &p);
        x = g.add(x, f);
        check_finite(g, x, &p)?;
    }
    let gain = g.param("enc.norm");
    let memory = g.rms_norm(x, gain);

    let n_dec = input.n_decoder_tokens();
    let dec_pos: Vec<usize> = (n_enc..n_enc + n_dec).collect();
    let query = g.param("dec.query");
    let queries = g.gather_rows(query, vec![0; n_dec]);
    let table = g.param("time_embedding");
    let times = g.gather_rows(table, input.decoder_times.clone());
    let mut y = g.add(queries, times);
    for l in 0..cfg.n_layers_dec {
        let p = format!("dec.{l}");
        let gain = g.param(&format!("{p}.norm1"));
        let n = g.rms_norm(y, gain);
        let a = attention(g, cfg, n, &dec_pos, n, &dec_pos, &format!("{p}.self"));
        y = g.add(y, a);
        let gain = g.param(&format!("{p}.norm2"));
        let n = g.rms_norm(y, gain);
        let a = attention(g, cfg, n, &dec_pos, memory, &enc_pos, &format!("{p}.cross"));
        y = g.add(y, a);
        let gain = g.param(&format!("{p}.norm3"));
        let n = g.rms_norm(y, gain);
        let f = feed_forward(g, n, &p);
        y = g.add(y, f);
        check_finite(g, y, &p)?;
    }
    let gain = g.param("dec.norm");
    let y = g.rms_norm(y, gain);
    let out = residual_block(g, y, "output");
    check_finite(g, out, "output")?;
    let levels = QUANTILE_LEVELS.len();
    let steps = g.reshape(out, n_dec * cfg.m_out, levels);
    Ok(g.slice_rows(steps, 0, input.horizon))
}

/// Horizon truth in the target's normalized space, with its observed mask.
pub fn normalized_truth(sample: &TimeSeriesSample, scaler: &ScalerState) -> (Vec<f64>, Vec<bool>) {
    (
        normalize(sample.future(), scaler),
        sample.future_mask().to_vec(),
    )
}

/// Quantile loss of an `h x |Q|` prediction; masked steps are excluded and
/// the normalizer shrinks with them.
pub fn quantile_loss(pred: &[Vec<f64>], truth: &[f64], observed: &[bool], levels: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let mut total = 0.0;
    let mut n = 0usize;
    for (t, row) in pred.iter().enumerate() {
        if !observed[t] {
            continue;
        }
        n += 1;
        for (&q, &p) in levels.iter().zip(row) {
            total += autodiff::pinball(q, p, truth[t]);
        }
    }
    if n == 0 {
        0.0
    } else {
        total / (n * levels.len()) as f64
    }
}

/// A model configuration with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecaster {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
}

impl Forecaster {
    /// Randomly initialized model; the draw depends only on `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, &mut stream(seed, "model-init"));
        Ok(Self { config, params })
    }

    /// Sets every output-block tensor to zero, so all forecasts equal the
    /// context mean.
    pub fn zero_output_head(&mut self) {
        for name in ["output.w1", "output.b1", "output.w2", "output.b2", "output.skip"] {
            if let Some(t) = self.params.by_name_mut(name) {
                t.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_values()
    }

    /// Normalized `h x 9` output in double precision.
    pub fn forward_normalized(&self, sample: &TimeSeriesSample) -> Result<Vec<Vec<f64>>> {
        let params = self.params.cast::<f64>();
        let input = prepare_input(sample, &self.config)?;
        forward_values(&params, &self.config, &input)
    }

    /// Quantile forecast in the target's original scale. With
    /// `use_covariates = false` every covariate is dropped before the input
    /// is built. Runs in double precision.
    pub fn predict(
        &self,
        sample: &TimeSeriesSample,
        use_covariates: bool,
        sort_quantiles: bool,
    ) -> Result<QuantileForecast> {
        let params = self.params.cast::<f64>();
        predict_with(&params, &self.config, sample, use_covariates, sort_quantiles)
    }
}

fn forward_values<S: Scalar>(
    params: &ParamStore<S>,
    cfg: &ModelConfig,
    input: &PreparedInput,
) -> Result<Vec<Vec<f64>>> {
    let mut g = Graph::new(params);
    let out = forward(&mut g, cfg, input)?;
    let m = g.value(out);
    Ok((0..m.rows)
        .map(|r| m.row(r).iter().map(|v| v.f64()).collect())
        .collect())
}

/// [`Forecaster::predict`] on an explicit parameter store.
pub fn predict_with<S: Scalar>(
    params: &ParamStore<S>,
    cfg: &ModelConfig,
    sample: &TimeSeriesSample,
    use_covariates: bool,
    sort_quantiles: bool,
) -> Result<QuantileForecast> {
    let stripped;
    let sample = if use_covariates || sample.covariates.is_empty() {
        sample
    } else {
        stripped = sample.without_covariates();
        &stripped
    };
    let input = prepare_input(sample, cfg)?;
    let z = forward_values(params, cfg, &input)?;
    let scaler = input.target_scaler;
    Ok(z.into_iter()
        .map(|row| {
            let mut q = [0.0; 9];
            for (o, v) in q.iter_mut().zip(row) {
                *o = scaler.denormalize_value(v);
            }
            if sort_quantiles {
                q.sort_by(f64::total_cmp);
            }
            q
        })
        .collect())
}

/// Draws a uniformly random parameter entry `(tensor id, offset)`.
pub(crate) fn random_entry<S: Scalar>(params: &ParamStore<S>, rng: &mut Rng) -> (usize, usize) {
    let total = params.num_values();
    let mut k = rng.random_range(0..total);
    for id in 0..params.len() {
        let n = params.get(id).data.len();
        if k < n {
            return (id, k);
        }
        k -= n;
    }
    unreachable!("offset within total")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Covariate;

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_model: 16,
            n_layers_enc: 1,
            n_layers_dec: 1,
            n_heads: 2,
            d_ff: 16,
            m_in: 32,
            m_out: 64,
            max_context: 512,
            max_horizon: 128,
            max_covariates: 4,
        }
    }

    fn sine(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.3 + phase).sin() * 2.0 + 5.0).collect()
    }

    fn sample_with(t: usize, h: usize, covs: usize) -> TimeSeriesSample {
        let mut s = TimeSeriesSample::univariate("s", sine(t + h, 0.0), t, h, 12);
        for c in 0..covs {
            s.covariates.push(Covariate::new(
                format!("c{c}"),
                CovariateKind::PastAndFuture,
                sine(t + h, c as f64 + 1.0),
            ));
        }
        s
    }

    #[test]
    fn token_counts() {
        let c = cfg();
        let p = prepare_input(&sample_with(128, 64, 2), &c).unwrap();
        assert_eq!(p.n_tokens(), 19);
        assert_eq!(p.meta.iter().filter(|m| m.is_separator).count(), 3);
        let p = prepare_input(&sample_with(512, 64, 0), &c).unwrap();
        assert_eq!(p.n_tokens(), 17);
        assert_eq!(p.meta[0].variate, Variate::Target);
        assert!(p.meta[0].is_separator);
    }

    #[test]
    fn layout_and_shared_time_positions() {
        let c = cfg();
        let mut s = sample_with(64, 32, 2);
        s.covariates[1].kind = CovariateKind::PastOnly;
        let p = prepare_input(&s, &c).unwrap();
        let kinds: Vec<(Variate, bool)> = p.meta.iter().map(|m| (m.variate, m.is_separator)).collect();
        // sep_c, 3 patches over T+h = 96; sep_c, 2 patches over T; sep_t, 2 patches.
        assert_eq!(kinds.len(), 4 + 3 + 3);
        assert_eq!(kinds[0], (Variate::Covariate(0), true));
        assert_eq!(kinds[4], (Variate::Covariate(1), true));
        assert_eq!(kinds[7], (Variate::Target, true));
        let times = |v: Variate| -> Vec<usize> {
            p.meta
                .iter()
                .filter(|m| m.variate == v)
                .filter_map(|m| m.time_position)
                .collect()
        };
        let slots = c.context_slots();
        assert_eq!(times(Variate::Target), vec![slots - 2, slots - 1]);
        assert_eq!(times(Variate::Covariate(1)), vec![slots - 2, slots - 1]);
        assert_eq!(times(Variate::Covariate(0)), vec![slots - 2, slots - 1, slots]);
        assert_eq!(p.decoder_times, vec![slots]);
    }

    #[test]
    fn limits_are_enforced() {
        let c = cfg();
        assert!(prepare_input(&sample_with(600, 8, 0), &c).is_err());
        assert!(prepare_input(&sample_with(64, 200, 0), &c).is_err());
        assert!(prepare_input(&sample_with(64, 8, 5), &c).is_err());
    }

    #[test]
    fn build_input_is_deterministic() {
        let c = cfg();
        let params = init_params::<f64>(&c, &mut stream(1, "t"));
        let s = sample_with(128, 64, 2);
        let a = build_input(&params, &s, &c).unwrap();
        let b = build_input(&params, &s, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.embeddings.rows, a.embeddings.cols), (19, 16));
    }

    #[test]
    fn output_shapes() {
        let c = cfg();
        let m = Forecaster::new(c.clone(), 3).unwrap();
        let f = m.predict(&sample_with(128, 64, 1), true, true).unwrap();
        assert_eq!(f.len(), 64);
        let s = sample_with(128, 100, 1);
        assert_eq!(prepare_input(&s, &c).unwrap().n_decoder_tokens(), 2);
        assert_eq!(m.predict(&s, true, false).unwrap().len(), 100);
    }

    #[test]
    fn zero_head_outputs_zero() {
        let mut m = Forecaster::new(cfg(), 5).unwrap();
        m.zero_output_head();
        for s in [sample_with(64, 16, 0), sample_with(200, 70, 3)] {
            let z = m.forward_normalized(&s).unwrap();
            assert!(z.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sorted_quantiles_are_monotone() {
        let m = Forecaster::new(cfg(), 8).unwrap();
        let f = m.predict(&sample_with(96, 40, 2), true, true).unwrap();
        for row in &f {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn covariate_free_sample_ignores_the_flag() {
        let m = Forecaster::new(cfg(), 2).unwrap();
        let s = sample_with(96, 24, 0);
        assert_eq!(
            m.predict(&s, true, true).unwrap(),
            m.predict(&s, false, true).unwrap()
        );
    }

    #[test]
    fn covariates_change_the_forecast() {
        let m = Forecaster::new(cfg(), 2).unwrap();
        let s = sample_with(96, 24, 2);
        assert_ne!(
            m.predict(&s, true, true).unwrap(),
            m.predict(&s, false, true).unwrap()
        );
    }

    #[test]
    fn quantile_loss_properties() {
        let levels = QUANTILE_LEVELS;
        let truth = [0.3, -1.0];
        let exact: Vec<Vec<f64>> = truth.iter().map(|&y| vec![y; 9]).collect();
        assert_eq!(quantile_loss(&exact, &truth, &[true, true], &levels), 0.0);
        assert!((quantile_loss(&[vec![0.0; 9]], &[1.0], &[true], &levels) - 0.5).abs() < 1e-12);
        assert!((quantile_loss(&[vec![20.0]], &[10.0], &[true], &[0.9]) - 1.0).abs() < 1e-12);

        // Two-point distribution {0 w.p. 0.7, 10 w.p. 0.3}: expected pinball
        // loss at level q is minimized at the q-quantile.
        let expected = |q: f64, p: f64| 0.7 * autodiff::pinball(q, p, 0.0) + 0.3 * autodiff::pinball(q, p, 10.0);
        for (q, want) in [(0.5, 0.0), (0.8, 10.0)] {
            let best = (0..=100)
                .map(|i| i as f64 * 0.1)
                .min_by(|a, b| expected(q, *a).total_cmp(&expected(q, *b)))
                .unwrap();
            assert!((best - want).abs() < 1e-9, "q={q}: best {best}");
        }
    }

    #[test]
    fn param_count_of_default_config() {
        let m = Forecaster::new(ModelConfig::default(), 0).unwrap();
        let n = m.num_parameters();
        assert!(n > 50_000 && n < 400_000, "{n}");
    }
}
