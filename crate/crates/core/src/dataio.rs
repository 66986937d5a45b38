//! Corpus and forecast files.
//!
//! Both are JSON lines. A corpus line holds one [`TimeSeriesSample`]:
//!
//! ```text
//! {"id": "grp/a", "period": 24, "context_length": 96, "horizon": 24,
//!  "target": [..], "missing_mask": [..],
//!  "covariates": {"temp": {"kind": "past_and_future", "values": [..]}}}
//! ```
//!
//! A forecast line holds one [`ForecastRecord`]:
//!
//! ```text
//! {"sample_id": "grp/a", "origin": 96, "levels": [0.1, .., 0.9], "values": [[..9..], ..]}
//! ```
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so files round-trip bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::QUANTILE_LEVELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    /// Known over the context and the forecast horizon.
    PastAndFuture,
    /// Observed only up to the forecast origin.
    PastOnly,
}

/// A named auxiliary series attached to a target.
///
/// `values[lead + i]` lines up with `target[i]`, where `lead` is the number
/// of values exceeding the target length. Those extra leading values are
/// history before the first target step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Covariate {
    #[serde(skip)]
    pub name: String,
    pub kind: CovariateKind,
    pub values: Vec<f64>,
}

impl Covariate {
    pub fn new(name: impl Into<String>, kind: CovariateKind, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind,
            values,
        }
    }

    /// Number of leading history values before target index 0.
    pub fn lead(&self, target_len: usize) -> usize {
        self.values.len().saturating_sub(target_len)
    }

    /// Value aligned with target index `t`; negative `t` reaches into the
    /// leading history. `None` outside the stored span.
    pub fn value_at(&self, t: isize, target_len: usize) -> Option<f64> {
        let idx = t + self.lead(target_len) as isize;
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }

    /// Values aligned with target indices `start..end` (no history, no gaps).
    pub fn aligned(&self, start: usize, end: usize, target_len: usize) -> &[f64] {
        let lead = self.lead(target_len);
        let hi = (end + lead).min(self.values.len());
        let lo = (start + lead).min(hi);
        &self.values[lo..hi]
    }
}

/// One target series with its covariates and forecast split.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesSample {
    pub id: String,
    /// History followed by the horizon truth (possibly masked).
    pub target: Vec<f64>,
    pub context_length: usize,
    pub horizon: usize,
    /// In corpus order.
    pub covariates: Vec<Covariate>,
    pub period: usize,
    /// `true` where the target is observed.
    pub missing_mask: Vec<bool>,
}

impl TimeSeriesSample {
    /// Sample without covariates and with every target value observed.
    pub fn univariate(
        id: impl Into<String>,
        target: Vec<f64>,
        context_length: usize,
        horizon: usize,
        period: usize,
    ) -> Self {
        let n = target.len();
        Self {
            id: id.into(),
            target,
            context_length,
            horizon,
            covariates: Vec::new(),
            period,
            missing_mask: vec![true; n],
        }
    }

    pub fn context(&self) -> &[f64] {
        &self.target[..self.context_length]
    }

    pub fn context_mask(&self) -> &[bool] {
        &self.missing_mask[..self.context_length]
    }

    pub fn future(&self) -> &[f64] {
        &self.target[self.context_length..self.context_length + self.horizon]
    }

    pub fn future_mask(&self) -> &[bool] {
        &self.missing_mask[self.context_length..self.context_length + self.horizon]
    }

    /// Same sample with every covariate removed.
    pub fn without_covariates(&self) -> Self {
        Self {
            covariates: Vec::new(),
            ..self.clone()
        }
    }

    /// Keeps only the last `max_context` context steps. Covariates that
    /// cover the target keep their values, the dropped span becoming history.
    pub fn crop_context(&self, max_context: usize) -> Self {
        let mut s = self.clone();
        let d = s.context_length.saturating_sub(max_context.max(1));
        if d > 0 {
            let n = s.target.len();
            for c in &mut s.covariates {
                // Shorter than the target means no history: shift by hand.
                if c.values.len() < n {
                    c.values.drain(..d.min(c.values.len()));
                }
            }
            s.target.drain(..d);
            s.missing_mask.drain(..d);
            s.context_length -= d;
        }
        s
    }

    /// Checks every stated invariant. Never repairs.
    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        if self.context_length < 1 {
            return Err(Error::validation(id, "context_length", "must be >= 1"));
        }
        if self.horizon < 1 {
            return Err(Error::validation(id, "horizon", "must be >= 1"));
        }
        if self.period < 1 {
            return Err(Error::validation(id, "period", "must be >= 1"));
        }
        let needed = self.context_length + self.horizon;
        if self.target.len() < needed {
            return Err(Error::validation(
                id,
                "target",
                format!(
                    "length {} < context_length + horizon = {needed}",
                    self.target.len()
                ),
            ));
        }
        if let Some(i) = self.target.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                id,
                "target",
                format!("non-finite value at index {i}"),
            ));
        }
        if self.missing_mask.len() != self.target.len() {
            return Err(Error::validation(
                id,
                "missing_mask",
                format!(
                    "length {} != target length {}",
                    self.missing_mask.len(),
                    self.target.len()
                ),
            ));
        }
        let n = self.target.len();
        for (i, cov) in self.covariates.iter().enumerate() {
            let field = format!("covariates.{}", cov.name);
            if cov.name.is_empty() {
                return Err(Error::validation(id, "covariates", format!("covariate {i} has no name")));
            }
            if self.covariates[..i].iter().any(|c| c.name == cov.name) {
                return Err(Error::validation(id, &field, "duplicate name"));
            }
            let required = match cov.kind {
                CovariateKind::PastAndFuture => needed,
                CovariateKind::PastOnly => self.context_length,
            };
            let covered = cov.values.len() - cov.lead(n);
            if covered < required {
                return Err(Error::validation(
                    id,
                    &field,
                    format!(
                        "{:?} covariate covers {covered} steps, needs {required}",
                        cov.kind
                    ),
                ));
            }
            if let Some(j) = cov.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(
                    id,
                    &field,
                    format!("non-finite value at index {j}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    id: String,
    period: usize,
    context_length: usize,
    horizon: usize,
    target: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    missing_mask: Option<Vec<bool>>,
    #[serde(default)]
    covariates: Map<String, Value>,
}

impl SampleLine {
    fn into_sample(self) -> std::result::Result<TimeSeriesSample, serde_json::Error> {
        let mut covariates = Vec::with_capacity(self.covariates.len());
        for (name, value) in self.covariates {
            let mut cov: Covariate = serde_json::from_value(value)?;
            cov.name = name;
            covariates.push(cov);
        }
        let n = self.target.len();
        Ok(TimeSeriesSample {
            id: self.id,
            target: self.target,
            context_length: self.context_length,
            horizon: self.horizon,
            covariates,
            period: self.period,
            missing_mask: self.missing_mask.unwrap_or_else(|| vec![true; n]),
        })
    }

    fn from_sample(s: &TimeSeriesSample) -> Self {
        let mut covariates = Map::new();
        for cov in &s.covariates {
            covariates.insert(
                cov.name.clone(),
                serde_json::to_value(cov).expect("covariate serializes"),
            );
        }
        let all_observed = s.missing_mask.iter().all(|&m| m);
        SampleLine {
            id: s.id.clone(),
            period: s.period,
            context_length: s.context_length,
            horizon: s.horizon,
            target: s.target.clone(),
            missing_mask: (!all_observed).then(|| s.missing_mask.clone()),
            covariates,
        }
    }
}

/// Serializes one sample as a single JSON line (without the newline).
pub fn sample_to_json(sample: &TimeSeriesSample) -> String {
    serde_json::to_string(&SampleLine::from_sample(sample)).expect("sample serializes")
}

fn read_lines<T>(
    path: &Path,
    mut parse: impl FnMut(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line, i + 1)?);
    }
    Ok(out)
}

/// Reads a JSON-lines corpus, validating every sample.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<TimeSeriesSample>> {
    let path = path.as_ref();
    read_lines(path, |line, n| {
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: path.to_path_buf(),
            line: n,
            message: e.to_string(),
        };
        let raw: SampleLine = serde_json::from_str(line).map_err(parse_err)?;
        let sample = raw.into_sample().map_err(parse_err)?;
        sample.validate()?;
        Ok(sample)
    })
}

pub fn save_corpus(samples: &[TimeSeriesSample], path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), samples.iter().map(sample_to_json))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Quantile forecast for one sample at one origin, in original target scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastRecord {
    pub sample_id: String,
    /// Index of the first forecast step within the sample's target.
    pub origin: usize,
    pub levels: Vec<f64>,
    /// `horizon x levels.len()`.
    pub values: Vec<Vec<f64>>,
}

impl ForecastRecord {
    pub fn new(sample_id: impl Into<String>, origin: usize, values: Vec<[f64; 9]>) -> Self {
        Self {
            sample_id: sample_id.into(),
            origin,
            levels: QUANTILE_LEVELS.to_vec(),
            values: values.into_iter().map(|row| row.to_vec()).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Column of the 0.5 level.
    pub fn median(&self) -> Vec<f64> {
        let idx = self
            .levels
            .iter()
            .position(|&q| (q - 0.5).abs() < 1e-12)
            .unwrap_or(crate::MEDIAN_INDEX);
        self.values.iter().map(|row| row[idx]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.sample_id.as_str();
        if self.levels.len() != QUANTILE_LEVELS.len() {
            return Err(Error::validation(id, "levels", "expected 9 quantile levels"));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(id, "levels", "not strictly increasing"));
        }
        for (t, row) in self.values.iter().enumerate() {
            if row.len() != self.levels.len() {
                return Err(Error::validation(
                    id,
                    "values",
                    format!("row {t} has {} entries", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(id, "values", format!("non-finite in row {t}")));
            }
        }
        Ok(())
    }
}

pub fn save_forecasts(records: &[ForecastRecord], path: impl AsRef<Path>) -> Result<()> {
    for r in records {
        r.validate()?;
    }
    write_lines(
        path.as_ref(),
        records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes")),
    )
}

pub fn load_forecasts(path: impl AsRef<Path>) -> Result<Vec<ForecastRecord>> {
    let path = path.as_ref();
    read_lines(path, |line, n| {
        let rec: ForecastRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n,
            message: e.to_string(),
        })?;
        rec.validate()?;
        Ok(rec)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn crop_keeps_covariates_aligned() {
        let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut s = TimeSeriesSample::univariate("c", y, 24, 6, 1);
        s.covariates.push(Covariate::new("f", CovariateKind::PastAndFuture, (100..130).map(f64::from).collect()));
        s.covariates.push(Covariate::new("p", CovariateKind::PastOnly, (200..224).map(f64::from).collect()));
        let c = s.crop_context(10);
        c.validate().unwrap();
        assert_eq!((c.context_length, c.target.len()), (10, 16));
        for i in 14..30 {
            assert_eq!(c.target[i - 14], s.target[i]);
            for k in 0..2 {
                let a = c.covariates[k].value_at(i as isize - 14, c.target.len());
                let b = s.covariates[k].value_at(i as isize, s.target.len());
                assert_eq!(a, b);
            }
        }
        assert_eq!(s.crop_context(50), s);
    }

    fn series(n: usize) -> String {
        let v: Vec<String> = (0..n).map(|i| format!("{}", i as f64 * 0.5)).collect();
        format!("[{}]", v.join(","))
    }

    #[test]
    fn minimal_record_loads() {
        let line = format!(
            r#"{{"id":"a","period":24,"context_length":24,"horizon":24,"target":{}}}"#,
            series(48)
        );
        let f = write_tmp(&line);
        let samples = load_corpus(f.path()).unwrap();
        assert_eq!(samples.len(), 1);
        assert!(samples[0].covariates.is_empty());
        assert!(samples[0].missing_mask.iter().all(|&m| m));
    }

    #[test]
    fn past_only_covariate_of_context_length_is_accepted() {
        let line = format!(
            r#"{{"id":"a","period":4,"context_length":24,"horizon":8,"target":{},"covariates":{{"x":{{"kind":"past_only","values":{}}}}}}}"#,
            series(32),
            series(24)
        );
        let f = write_tmp(&line);
        let s = load_corpus(f.path()).unwrap();
        assert_eq!(s[0].covariates[0].kind, CovariateKind::PastOnly);
    }

    #[test]
    fn short_past_and_future_covariate_is_rejected() {
        let line = format!(
            r#"{{"id":"b","period":4,"context_length":24,"horizon":8,"target":{},"covariates":{{"x":{{"kind":"past_and_future","values":{}}}}}}}"#,
            series(32),
            series(31)
        );
        let f = write_tmp(&line);
        match load_corpus(f.path()) {
            Err(Error::Validation { id, field, .. }) => {
                assert_eq!(id, "b");
                assert_eq!(field, "covariates.x");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = format!(
            r#"{{"id":"a","period":1,"context_length":2,"horizon":1,"target":{}}}"#,
            series(3)
        );
        let f = write_tmp(&format!("{good}\n{{not json\n"));
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn covariate_order_is_preserved() {
        let line = format!(
            r#"{{"id":"a","period":1,"context_length":2,"horizon":1,"target":{t},"covariates":{{"zeta":{{"kind":"past_only","values":{t}}},"alpha":{{"kind":"past_only","values":{t}}}}}}}"#,
            t = series(3)
        );
        let f = write_tmp(&line);
        let s = &load_corpus(f.path()).unwrap()[0];
        let names: Vec<_> = s.covariates.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["zeta", "alpha"]);
        let out = tempfile::NamedTempFile::new().unwrap();
        save_corpus(std::slice::from_ref(s), out.path()).unwrap();
        assert_eq!(&load_corpus(out.path()).unwrap()[0], s);
    }

    #[test]
    fn non_finite_and_mask_length_are_rejected() {
        let mut s = TimeSeriesSample::univariate("c", vec![1.0; 10], 5, 5, 1);
        s.target[3] = f64::NAN;
        assert!(s.validate().is_err());
        let mut s = TimeSeriesSample::univariate("c", vec![1.0; 10], 5, 5, 1);
        s.missing_mask.pop();
        assert!(s.validate().is_err());
        let s = TimeSeriesSample::univariate("c", vec![1.0; 9], 5, 5, 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn leading_history_alignment() {
        let cov = Covariate::new("x", CovariateKind::PastAndFuture, vec![9.0, 8.0, 0.0, 1.0, 2.0]);
        assert_eq!(cov.lead(3), 2);
        assert_eq!(cov.value_at(0, 3), Some(0.0));
        assert_eq!(cov.value_at(-2, 3), Some(9.0));
        assert_eq!(cov.value_at(-3, 3), None);
        assert_eq!(cov.aligned(1, 3, 3), &[1.0, 2.0]);
    }

    #[test]
    fn empty_forecast_file() {
        let out = tempfile::NamedTempFile::new().unwrap();
        save_forecasts(&[], out.path()).unwrap();
        assert_eq!(std::fs::read_to_string(out.path()).unwrap(), "");
        assert!(load_forecasts(out.path()).unwrap().is_empty());
    }

    #[test]
    fn one_record_is_one_line_with_h_rows() {
        let rec = ForecastRecord::new("s", 10, vec![[1.0; 9], [2.0; 9]]);
        let out = tempfile::NamedTempFile::new().unwrap();
        save_forecasts(std::slice::from_ref(&rec), out.path()).unwrap();
        let text = std::fs::read_to_string(out.path()).unwrap();
        assert_eq!(text.lines().count(), 1);
        let back = load_forecasts(out.path()).unwrap();
        assert_eq!(back[0].values.len(), 2);
        assert!(back[0].values.iter().all(|r| r.len() == 9));
    }

    #[test]
    fn forecast_validation() {
        let mut rec = ForecastRecord::new("s", 0, vec![[0.0; 9]]);
        rec.levels.swap(0, 1);
        assert!(rec.validate().is_err());
        let mut rec = ForecastRecord::new("s", 0, vec![[0.0; 9]]);
        rec.values[0][3] = f64::INFINITY;
        assert!(rec.validate().is_err());
    }
}
