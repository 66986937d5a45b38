//! Instance normalization and patching.

use crate::error::{Error, Result};

/// Floor applied to the standard deviation; anything at or below it is
/// treated as a constant series and scaled by 1.
pub const STD_FLOOR: f64 = 1e-10;

/// Per-series z-score parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalerState {
    pub mean: f64,
    /// Population standard deviation, never below [`STD_FLOOR`].
    pub std: f64,
}

impl ScalerState {
    pub const IDENTITY: ScalerState = ScalerState {
        mean: 0.0,
        std: 1.0,
    };

    pub fn normalize_value(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn denormalize_value(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Mean and population std over the observed entries of `values`.
///
/// A missing `mask` means every value is observed.
pub fn fit_scaler(values: &[f64], mask: Option<&[bool]>) -> Result<ScalerState> {
    let observed = |i: usize| mask.is_none_or(|m| m.get(i).copied().unwrap_or(false));
    let (mut n, mut sum) = (0usize, 0.0);
    for (i, &v) in values.iter().enumerate() {
        if observed(i) {
            n += 1;
            sum += v;
        }
    }
    if n == 0 {
        return Err(Error::Domain("no observed values to fit a scaler".into()));
    }
    let mean = sum / n as f64;
    let var = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| observed(i))
        .map(|(_, &v)| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    let std = if std > STD_FLOOR { std } else { 1.0 };
    Ok(ScalerState { mean, std })
}

pub fn normalize(values: &[f64], scaler: &ScalerState) -> Vec<f64> {
    values.iter().map(|&v| scaler.normalize_value(v)).collect()
}

pub fn denormalize(values: &[f64], scaler: &ScalerState) -> Vec<f64> {
    values.iter().map(|&v| scaler.denormalize_value(v)).collect()
}

/// A series cut into non-overlapping windows, left-padded with masked zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    pub patch_length: usize,
    /// `n_patches` rows of `patch_length` values.
    pub patches: Vec<Vec<f64>>,
    /// `true` = observed. Padding and missing entries are `false`.
    pub mask: Vec<Vec<bool>>,
    /// Left-to-right patch index.
    pub time_index: Vec<usize>,
    /// Number of padded positions at the front of the first patch.
    pub padding: usize,
}

impl PatchGrid {
    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Concatenates the patches and drops the padding.
    pub fn unpatchify(&self) -> (Vec<f64>, Vec<bool>) {
        let values: Vec<f64> = self.patches.iter().flatten().copied().collect();
        let mask: Vec<bool> = self.mask.iter().flatten().copied().collect();
        (values[self.padding..].to_vec(), mask[self.padding..].to_vec())
    }

    /// Patch `i` as the `[values || mask]` vector fed to the input block.
    pub fn token_input(&self, i: usize) -> Vec<f64> {
        let mut v = self.patches[i].clone();
        v.extend(self.mask[i].iter().map(|&m| if m { 1.0 } else { 0.0 }));
        v
    }
}

/// Splits `values` into windows of `m_in`, left-padding to a multiple of it.
/// Masked positions carry the value 0.
pub fn patchify(values: &[f64], mask: Option<&[bool]>, m_in: usize) -> PatchGrid {
    assert!(m_in >= 1, "patch length must be >= 1");
    let n_patches = values.len().div_ceil(m_in);
    let padding = n_patches * m_in - values.len();
    let mut flat_v = vec![0.0; padding];
    let mut flat_m = vec![false; padding];
    for (i, &v) in values.iter().enumerate() {
        let observed = mask.is_none_or(|m| m[i]);
        flat_v.push(if observed { v } else { 0.0 });
        flat_m.push(observed);
    }
    PatchGrid {
        patch_length: m_in,
        patches: flat_v.chunks(m_in).map(<[f64]>::to_vec).collect(),
        mask: flat_m.chunks(m_in).map(<[bool]>::to_vec).collect(),
        time_index: (0..n_patches).collect(),
        padding,
    }
}
