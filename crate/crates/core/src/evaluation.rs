//! Forecast metrics, rolling-origin evaluation tasks and relative-score
//! aggregation across dataset groups.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::baselines::seasonal_naive;
use crate::dataio::{CovariateKind, ForecastRecord, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::{MEDIAN_INDEX, QUANTILE_LEVELS};

/// Floor of the MASE denominator.
pub const MASE_FLOOR: f64 = 1e-10;
/// Truth values smaller than this in magnitude are left out of WQL.
pub const WQL_ZERO: f64 = 1e-10;

/// Name of the reference model every score is divided by.
pub const BASELINE: &str = "seasonal-naive";

/// Mean absolute error over the horizon divided by the mean absolute
/// seasonal difference of the context.
pub fn mase(median: &[f64], truth: &[f64], context: &[f64], period: usize) -> Result<f64> {
    if median.len() != truth.len() || truth.is_empty() {
        return Err(Error::Domain(format!(
            "forecast has {} steps, truth {}",
            median.len(),
            truth.len()
        )));
    }
    if context.len() <= period || period == 0 {
        return Err(Error::Domain(format!(
            "context of {} steps is too short for period {period}",
            context.len()
        )));
    }
    let num = median
        .iter()
        .zip(truth)
        .map(|(f, y)| (y - f).abs())
        .sum::<f64>()
        / truth.len() as f64;
    let pairs = context.len() - period;
    let den = (0..pairs)
        .map(|t| (context[t] - context[t + period]).abs())
        .sum::<f64>()
        / pairs as f64;
    Ok(num / den.max(MASE_FLOOR))
}

fn pinball(q: f64, pred: f64, truth: f64) -> f64 {
    if pred <= truth {
        q * (truth - pred)
    } else {
        (1.0 - q) * (pred - truth)
    }
}

/// Quantile loss at the nine levels, each step scaled by `1 / |y_t|`,
/// averaged over levels and over steps with non-zero truth.
pub fn wql(forecast: &[[f64; 9]], truth: &[f64]) -> Result<f64> {
    if forecast.len() != truth.len() {
        return Err(Error::Domain(format!(
            "forecast has {} steps, truth {}",
            forecast.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (row, &y) in forecast.iter().zip(truth) {
        if y.abs() < WQL_ZERO {
            continue;
        }
        n += 1;
        let ql: f64 = QUANTILE_LEVELS
            .iter()
            .zip(row)
            .map(|(&q, &p)| pinball(q, p, y))
            .sum();
        total += ql / y.abs();
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "every truth value is zero; WQL is undefined".into(),
        ));
    }
    Ok(total / (9 * n) as f64)
}

/// One forecast origin of one sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvalTask {
    pub sample_id: String,
    pub origin: usize,
    pub horizon: usize,
    pub period: usize,
}

/// A sample left out of the schedule, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedSample {
    pub sample_id: String,
    pub horizon: usize,
    pub reason: String,
}

/// Rolling origins over the last `fraction` of each series. For each horizon
/// `h = periods * S` there are `max(1, floor(fraction * N / h))` rolls with
/// stride `h`, the last ending at `N`.
pub fn rolling_tasks(
    sample: &TimeSeriesSample,
    horizon_periods: &[usize],
    fraction: f64,
) -> (Vec<EvalTask>, Vec<SkippedSample>) {
    let n = sample.target.len();
    let s = sample.period;
    let mut tasks = Vec::new();
    let mut skipped = Vec::new();
    for &periods in horizon_periods {
        let h = periods * s;
        if h == 0 || n < h + s + 1 {
            skipped.push(SkippedSample {
                sample_id: sample.id.clone(),
                horizon: h,
                reason: format!("series of {n} steps is shorter than h + S + 1 = {}", h + s + 1),
            });
            continue;
        }
        let by_fraction = (fraction * n as f64 / h as f64).floor() as usize;
        // Every origin keeps more than S context steps.
        let max_rolls = (n - s - 1) / h;
        let rolls = by_fraction.max(1).min(max_rolls.max(1));
        for r in (0..rolls).rev() {
            tasks.push(EvalTask {
                sample_id: sample.id.clone(),
                origin: n - h * (r + 1),
                horizon: h,
                period: s,
            });
        }
    }
    (tasks, skipped)
}

/// The sample cut at a task's origin: context `target[..origin]`, horizon
/// `target[origin..origin + h]`, covariates trimmed to match.
pub fn task_sample(sample: &TimeSeriesSample, task: &EvalTask) -> TimeSeriesSample {
    let n = sample.target.len();
    let end = task.origin + task.horizon;
    let covariates = sample
        .covariates
        .iter()
        .map(|c| {
            let lead = c.lead(n);
            let keep = match c.kind {
                CovariateKind::PastAndFuture => end,
                CovariateKind::PastOnly => task.origin,
            };
            let mut c = c.clone();
            c.values.truncate((lead + keep).min(c.values.len()));
            c
        })
        .collect();
    TimeSeriesSample {
        id: sample.id.clone(),
        target: sample.target[..end].to_vec(),
        context_length: task.origin,
        horizon: task.horizon,
        covariates,
        period: sample.period,
        missing_mask: sample.missing_mask[..end].to_vec(),
    }
}

/// Dataset group of a sample id: the part before the first `/`.
pub fn group_of(sample_id: &str) -> &str {
    sample_id.split('/').next().unwrap_or(sample_id)
}

/// Relative scores of one metric.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Aggregate {
    /// group -> model -> score / baseline score.
    pub relative: BTreeMap<String, BTreeMap<String, f64>>,
    /// Geometric mean of each model's positive relative scores; `None` when
    /// no group has a positive score.
    pub geometric_mean: BTreeMap<String, Option<f64>>,
    /// Mean over groups of the per-group rank (1 = best, ties averaged).
    pub average_rank: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Normalizes `scores` (group -> model -> score, lower is better) by the
/// baseline model of each group and aggregates across groups.
pub fn aggregate(
    scores: &BTreeMap<String, BTreeMap<String, f64>>,
    baseline: &str,
) -> Result<Aggregate> {
    let mut out = Aggregate::default();
    let mut logs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut ranks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (group, models) in scores {
        let base = *models.get(baseline).ok_or_else(|| {
            Error::Domain(format!("group '{group}' has no score for baseline '{baseline}'"))
        })?;
        let mut rel = BTreeMap::new();
        for (model, &score) in models {
            let r = score / base;
            rel.insert(model.clone(), r);
            let entry = logs.entry(model.clone()).or_default();
            if r > 0.0 && r.is_finite() {
                entry.push(r.ln());
            } else {
                out.warnings.push(format!(
                    "group '{group}', model '{model}': relative score {r} left out of the geometric mean"
                ));
            }
        }
        for (model, rank) in tie_ranks(models) {
            ranks.entry(model).or_default().push(rank);
        }
        out.relative.insert(group.clone(), rel);
    }
    for (model, l) in logs {
        let gm = if l.is_empty() {
            None
        } else {
            Some((l.iter().sum::<f64>() / l.len() as f64).exp())
        };
        out.geometric_mean.insert(model, gm);
    }
    for (model, r) in ranks {
        out.average_rank.insert(model, r.iter().sum::<f64>() / r.len() as f64);
    }
    Ok(out)
}

/// 1-based ranks of the scores, ascending, ties receiving their mean rank.
fn tie_ranks(models: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut sorted: Vec<(&String, f64)> = models.iter().map(|(m, &s)| (m, s)).collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].1 == sorted[i].1 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for item in &sorted[i..=j] {
            out.push((item.0.clone(), rank));
        }
        i = j + 1;
    }
    out
}

/// Raw metrics of one model on one task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskScore {
    pub model: String,
    pub sample_id: String,
    pub origin: usize,
    pub horizon: usize,
    pub mase: f64,
    pub wql: Option<f64>,
}

/// Everything written to `scores.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScoreTable {
    /// metric -> group -> model -> mean score.
    pub group_scores: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    /// metric -> aggregate.
    pub aggregates: BTreeMap<String, Aggregate>,
    pub tasks: Vec<TaskScore>,
    pub warnings: Vec<String>,
}

fn score_task(
    model: &str,
    sample: &TimeSeriesSample,
    origin: usize,
    values: &[[f64; 9]],
) -> Result<TaskScore> {
    let h = values.len();
    if origin + h > sample.target.len() {
        return Err(Error::Domain(format!(
            "forecast for '{}' at origin {origin} runs past the series end",
            sample.id
        )));
    }
    let mask = &sample.missing_mask[origin..origin + h];
    let truth: Vec<f64> = (0..h)
        .filter(|&i| mask[i])
        .map(|i| sample.target[origin + i])
        .collect();
    let rows: Vec<[f64; 9]> = (0..h).filter(|&i| mask[i]).map(|i| values[i]).collect();
    let median: Vec<f64> = rows.iter().map(|r| r[MEDIAN_INDEX]).collect();
    let m = mase(&median, &truth, &sample.target[..origin], sample.period)?;
    let w = match wql(&rows, &truth) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TaskScore {
        model: model.to_string(),
        sample_id: sample.id.clone(),
        origin,
        horizon: h,
        mase: m,
        wql: w,
    })
}

/// Scores forecast files against a corpus. Seasonal naive is computed for
/// every forecast task and serves as the baseline.
pub fn evaluate_forecasts(
    corpus: &[TimeSeriesSample],
    models: &[(String, Vec<ForecastRecord>)],
) -> Result<ScoreTable> {
    let by_id: BTreeMap<&str, &TimeSeriesSample> =
        corpus.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut table = ScoreTable::default();
    let mut baseline_done = std::collections::BTreeSet::new();
    for (name, records) in models {
        if name == BASELINE {
            return Err(Error::Domain(format!("model name '{BASELINE}' is reserved")));
        }
        for rec in records {
            let sample = by_id.get(rec.sample_id.as_str()).ok_or_else(|| {
                Error::Domain(format!("forecast for unknown sample '{}'", rec.sample_id))
            })?;
            let values: Vec<[f64; 9]> = rec
                .values
                .iter()
                .map(|r| std::array::from_fn(|q| r[q]))
                .collect();
            table.tasks.push(score_task(name, sample, rec.origin, &values)?);
            if baseline_done.insert((rec.sample_id.clone(), rec.origin, values.len())) {
                let naive = seasonal_naive(&sample.target[..rec.origin], sample.period, values.len())?;
                table.tasks.push(score_task(BASELINE, sample, rec.origin, &naive)?);
            }
        }
    }

    // Mean per (metric, group, model).
    let mut sums: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
    for t in &table.tasks {
        let group = group_of(&t.sample_id).to_string();
        let mut add = |metric: &str, v: f64| {
            let e = sums
                .entry((metric.to_string(), group.clone(), t.model.clone()))
                .or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        };
        add("mase", t.mase);
        if let Some(w) = t.wql {
            add("wql", w);
        }
    }
    for ((metric, group, model), (sum, n)) in sums {
        table
            .group_scores
            .entry(metric)
            .or_default()
            .entry(group)
            .or_default()
            .insert(model, sum / n as f64);
    }
    for (metric, groups) in &table.group_scores {
        let agg = aggregate(groups, BASELINE)?;
        table.warnings.extend(agg.warnings.iter().cloned());
        table.aggregates.insert(metric.clone(), agg);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng as _;

    fn naive_mase(f: &[f64], y: &[f64], c: &[f64], s: usize) -> f64 {
        let mut num = 0.0;
        for i in 0..y.len() {
            num += (y[i] - f[i]).abs();
        }
        num /= y.len() as f64;
        let mut den = 0.0;
        let mut cnt = 0.0;
        for t in s..c.len() {
            den += (c[t] - c[t - s]).abs();
            cnt += 1.0;
        }
        num / (den / cnt).max(1e-10)
    }

    #[test]
    fn mase_examples() {
        let c = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mase(&[5.0, 6.0], &[5.0, 6.0], &c, 1).unwrap(), 0.0);
        assert!((mase(&[4.0, 5.0], &[5.0, 6.0], &c, 1).unwrap() - 1.0).abs() < 1e-12);
        let flat = mase(&[4.0], &[5.0], &[2.0; 5], 1).unwrap();
        assert!(flat.is_finite() && flat > 1e9);
        assert!(mase(&[1.0], &[1.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn wql_examples() {
        let exact = [[10.0; 9]];
        assert_eq!(wql(&exact, &[10.0]).unwrap(), 0.0);
        let mut one_off = [10.0; 9];
        one_off[8] = 20.0;
        assert!((wql(&[one_off], &[10.0]).unwrap() - 1.0 / 90.0).abs() < 1e-12);
        assert!(matches!(wql(&[[1.0; 9]], &[0.0]), Err(Error::UndefinedMetric(_))));
        // Zero-truth steps leave the normalizer.
        let w = wql(&[one_off, [3.0; 9]], &[10.0, 0.0]).unwrap();
        assert!((w - 1.0 / 90.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_scale_free() {
        let mut rng = stream(1, "scale");
        for _ in 0..50 {
            let c: Vec<f64> = (0..20).map(|_| rng.random_range(1.0..5.0)).collect();
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(1.0..5.0)).collect();
            let f: Vec<[f64; 9]> = (0..6)
                .map(|_| std::array::from_fn(|_| rng.random_range(1.0..5.0)))
                .collect();
            let med: Vec<f64> = f.iter().map(|r| r[4]).collect();
            let k = 7.0;
            let sc = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
            let fk: Vec<[f64; 9]> = f.iter().map(|r| r.map(|x| x * k)).collect();
            let a = mase(&med, &y, &c, 3).unwrap();
            let b = mase(&sc(&med), &sc(&y), &sc(&c), 3).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            let a = wql(&f, &y).unwrap();
            let b = wql(&fk, &sc(&y)).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mase_matches_double_loop() {
        let mut rng = stream(2, "mase");
        for _ in 0..200 {
            let s = rng.random_range(1..6);
            let t = rng.random_range(s + 1..40);
            let h = rng.random_range(1..10);
            let c: Vec<f64> = (0..t).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..h).map(|_| rng.random_range(-10.0..10.0)).collect();
            let f: Vec<f64> = (0..h).map(|_| rng.random_range(-10.0..10.0)).collect();
            let got = mase(&f, &y, &c, s).unwrap();
            let want = naive_mase(&f, &y, &c, s);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    fn series(n: usize, period: usize) -> TimeSeriesSample {
        TimeSeriesSample::univariate("g/s", vec![1.0; n], n - 1, 1, period)
    }

    #[test]
    fn rolling_examples() {
        let (t, _) = rolling_tasks(&series(1000, 24), &[1], 0.1);
        assert_eq!(t.iter().map(|t| t.origin).collect::<Vec<_>>(), vec![904, 928, 952, 976]);
        assert!(t.iter().all(|t| t.horizon == 24));
        let (t, _) = rolling_tasks(&series(1000, 24), &[2], 0.1);
        assert_eq!(t.len(), 2);
        assert_eq!(t.last().unwrap().origin + 48, 1000);
        let (t, skipped) = rolling_tasks(&series(60, 24), &[1, 2], 0.1);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].origin, 36);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].horizon, 48);
    }

    fn scores(rows: &[(&str, &str, f64)]) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut m: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (g, model, v) in rows {
            m.entry(g.to_string()).or_default().insert(model.to_string(), *v);
        }
        m
    }

    #[test]
    fn aggregate_examples() {
        let s = scores(&[
            ("a", "base", 2.0),
            ("a", "m", 1.0),
            ("b", "base", 1.0),
            ("b", "m", 2.0),
        ]);
        let agg = aggregate(&s, "base").unwrap();
        assert!((agg.geometric_mean["m"].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(agg.geometric_mean["base"], Some(1.0));
        assert_eq!(agg.average_rank["m"], 1.5);
        assert!(aggregate(&scores(&[("a", "m", 1.0)]), "base").is_err());
    }

    #[test]
    fn aggregate_matches_brute_force() {
        let s = scores(&[
            ("g1", "base", 4.0),
            ("g1", "x", 2.0),
            ("g1", "y", 2.0),
            ("g2", "base", 1.0),
            ("g2", "x", 3.0),
            ("g2", "y", 0.5),
            ("g3", "base", 2.0),
            ("g3", "x", 1.0),
            ("g3", "y", 0.0),
        ]);
        let agg = aggregate(&s, "base").unwrap();
        // x: relative 0.5, 3, 0.5 ; y: 0.5, 0.5, 0 (excluded).
        let gx = (0.5f64 * 3.0 * 0.5).powf(1.0 / 3.0);
        let gy = (0.5f64 * 0.5).sqrt();
        assert!((agg.geometric_mean["x"].unwrap() - gx).abs() < 1e-12);
        assert!((agg.geometric_mean["y"].unwrap() - gy).abs() < 1e-12);
        assert_eq!(agg.warnings.len(), 1);
        // Ranks: g1 x,y tie at 1.5, base 3; g2 y 1, base 2, x 3; g3 y 1, x 2, base 3.
        assert_eq!(agg.average_rank["x"], (1.5 + 3.0 + 2.0) / 3.0);
        assert_eq!(agg.average_rank["y"], (1.5 + 1.0 + 1.0) / 3.0);
        assert_eq!(agg.average_rank["base"], (3.0 + 2.0 + 3.0) / 3.0);
    }

    #[test]
    fn aggregate_ignores_group_order() {
        let rows = [
            ("g1", "base", 4.0),
            ("g1", "x", 2.0),
            ("g2", "base", 1.0),
            ("g2", "x", 3.0),
        ];
        let a = aggregate(&scores(&rows), "base").unwrap();
        let mut rev = rows;
        rev.reverse();
        let b = aggregate(&scores(&rev), "base").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_scores_baseline_as_one() {
        let y: Vec<f64> = (0..120)
            .map(|t| 5.0 + ((t % 12) as f64) + (t as f64 * 0.7).sin())
            .collect();
        let s = TimeSeriesSample::univariate("grp/a", y.clone(), 100, 20, 12);
        let (tasks, _) = rolling_tasks(&s, &[1], 0.1);
        let recs: Vec<ForecastRecord> = tasks
            .iter()
            .map(|t| {
                let f = seasonal_naive(&y[..t.origin], 12, t.horizon).unwrap();
                ForecastRecord::new(&t.sample_id, t.origin, f)
            })
            .collect();
        let table = evaluate_forecasts(&[s], &[("copy".into(), recs)]).unwrap();
        let agg = &table.aggregates["mase"];
        assert_eq!(agg.relative["grp"]["copy"], 1.0);
        assert_eq!(agg.geometric_mean[BASELINE], Some(1.0));
    }
}
