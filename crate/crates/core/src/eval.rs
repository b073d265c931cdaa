//! Evaluation metrics and the quintile report.
//!
//! Predictions are decoded by plain rounding; objective values use the true
//! item values of the predicted selection with no feasibility repair.

use std::fmt;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::instance::{alpha, feature_matrix, KnapsackInstance, LabeledInstance};
use crate::ldf::{Batch, EpochLog};
use crate::nn::{bce_loss, ModelParams, Mode};
use crate::{Error, Result};

/// Standard deviations above the mean beyond which a violation percentage is
/// treated as an outlier when averaging.
pub const OUTLIER_SIGMAS: f64 = 6.0;

/// AR value assigned when exactly one of the two objectives is zero.
pub const ONE_SIDED_ZERO_AR: f64 = 2.0;

const PREDICT_CHUNK: usize = 512;

pub const QUINTILE_LABELS: [&str; 5] = ["0-0.2", "0.2-0.4", "0.4-0.6", "0.6-0.8", "0.8-1"];

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Sum {
    sum: f64,
    compensation: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut sum = Sum::default();
    let mut n = 0usize;
    for v in values {
        sum.add(v);
        n += 1;
    }
    (n > 0).then(|| sum.total() / n as f64)
}

/// `max(f*/f, f/f*)`, with 1 when both are zero and 2 when only one is.
pub fn approximation_ratio(predicted_obj: f64, optimal_obj: f64) -> Result<f64> {
    if !(predicted_obj.is_finite() && optimal_obj.is_finite()) || predicted_obj < 0.0 || optimal_obj < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "objectives must be finite and non-negative (got {predicted_obj}, {optimal_obj})"
        )));
    }
    Ok(match (predicted_obj == 0.0, optimal_obj == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => ONE_SIDED_ZERO_AR,
        (false, false) => (predicted_obj / optimal_obj).max(optimal_obj / predicted_obj),
    })
}

/// Index of the α quintile: `[0,0.2)`, `[0.2,0.4)`, `[0.4,0.6)`, `[0.6,0.8)`,
/// `[0.8,1]`.
pub fn alpha_quintile(alpha: f64) -> usize {
    [0.2, 0.4, 0.6, 0.8]
        .iter()
        .position(|&edge| alpha < edge)
        .unwrap_or(4)
}

/// `μ`-loss of a decoded batch: mean BCE plus `μ` times the mean raw
/// constraint violation.
pub fn mu_loss(logits: &Array2<f64>, decoded: &Array2<f64>, batch: &Batch, mu: f64) -> Result<f64> {
    let (bce, _) = bce_loss(logits, &batch.labels)?;
    let violations = batch.violations(decoded)?;
    Ok(bce + mu * mean(violations).unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub pct_violated: f64,
    pub mean_violation_pct: Option<f64>,
}

/// Percentage of violated instances and the outlier-filtered mean violation
/// (relative to capacity) over the violated ones.
pub fn violation_stats(predictions: &[Vec<bool>], instances: &[&KnapsackInstance]) -> Result<ViolationStats> {
    aligned(predictions.len(), instances.len())?;
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances".into()));
    }
    let mut violated = 0usize;
    let mut pcts = Vec::new();
    for (x, inst) in predictions.iter().zip(instances) {
        if inst.capacity == 0.0 {
            let any = x.iter().any(|&b| b);
            violated += any as usize;
            log::warn!("instance {}: zero capacity excluded from violation percentages", inst.id);
            continue;
        }
        let excess = inst.selection_weight(x) - inst.capacity;
        if excess > 0.0 {
            violated += 1;
            pcts.push(100.0 * excess / inst.capacity);
        }
    }
    Ok(ViolationStats {
        pct_violated: 100.0 * violated as f64 / instances.len() as f64,
        mean_violation_pct: filtered_mean(&pcts),
    })
}

/// Mean after dropping values above `mean + 6σ` (population σ, one pass).
fn filtered_mean(values: &[f64]) -> Option<f64> {
    let m = mean(values.iter().copied())?;
    let sigma = mean(values.iter().map(|v| (v - m) * (v - m)))?.sqrt();
    let cutoff = m + OUTLIER_SIGMAS * sigma;
    mean(values.iter().copied().filter(|v| *v <= cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveStats {
    pub pct_under: f64,
    pub pct_over: f64,
    pub avg_undershoot_pct: Option<f64>,
    pub avg_overshoot_pct: Option<f64>,
}

/// Under/over-shoot statistics of predicted objectives against the optimum.
/// Exact hits count as neither.
pub fn objective_stats(
    predictions: &[Vec<bool>],
    optimal_values: &[f64],
    instances: &[&KnapsackInstance],
) -> Result<ObjectiveStats> {
    aligned(predictions.len(), instances.len())?;
    aligned(optimal_values.len(), instances.len())?;
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances".into()));
    }
    let (mut under, mut over) = (0usize, 0usize);
    let (mut under_pcts, mut over_pcts) = (Vec::new(), Vec::new());
    for ((x, &opt), inst) in predictions.iter().zip(optimal_values).zip(instances) {
        let pred = inst.selection_value(x);
        if pred == opt {
            continue;
        }
        if opt == 0.0 {
            log::warn!("instance {}: zero optimum excluded from shoot percentages", inst.id);
        }
        if pred < opt {
            under += 1;
            if opt > 0.0 {
                under_pcts.push(100.0 * (opt - pred) / opt);
            }
        } else {
            over += 1;
            if opt > 0.0 {
                over_pcts.push(100.0 * (pred - opt) / opt);
            }
        }
    }
    let n = instances.len() as f64;
    Ok(ObjectiveStats {
        pct_under: 100.0 * under as f64 / n,
        pct_over: 100.0 * over as f64 / n,
        avg_undershoot_pct: mean(under_pcts),
        avg_overshoot_pct: mean(over_pcts),
    })
}

fn aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} predictions for {b} instances")));
    }
    Ok(())
}

/// One row of the report; metrics are `None` for an empty row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub alpha: String,
    pub count: usize,
    pub pct_violated: Option<f64>,
    pub mean_violation_pct: Option<f64>,
    pub pct_under: Option<f64>,
    pub pct_over: Option<f64>,
    pub avg_overshoot_pct: Option<f64>,
    pub avg_undershoot_pct: Option<f64>,
    pub ar: Option<f64>,
}

impl ReportRow {
    fn build(label: &str, rows: &[(&Vec<bool>, f64, &KnapsackInstance)]) -> Result<Self> {
        let mut row = ReportRow {
            alpha: label.to_string(),
            count: rows.len(),
            pct_violated: None,
            mean_violation_pct: None,
            pct_under: None,
            pct_over: None,
            avg_overshoot_pct: None,
            avg_undershoot_pct: None,
            ar: None,
        };
        if rows.is_empty() {
            return Ok(row);
        }
        let preds: Vec<Vec<bool>> = rows.iter().map(|r| r.0.clone()).collect();
        let opts: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let insts: Vec<&KnapsackInstance> = rows.iter().map(|r| r.2).collect();
        let v = violation_stats(&preds, &insts)?;
        let o = objective_stats(&preds, &opts, &insts)?;
        let ars = rows
            .iter()
            .map(|(x, opt, inst)| approximation_ratio(inst.selection_value(x), *opt))
            .collect::<Result<Vec<_>>>()?;
        row.pct_violated = Some(v.pct_violated);
        row.mean_violation_pct = v.mean_violation_pct;
        row.pct_under = Some(o.pct_under);
        row.pct_over = Some(o.pct_over);
        row.avg_overshoot_pct = o.avg_overshoot_pct;
        row.avg_undershoot_pct = o.avg_undershoot_pct;
        row.ar = mean(ars);
        Ok(row)
    }
}

/// Metrics per α quintile plus an overall row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub quintiles: Vec<ReportRow>,
    pub all: ReportRow,
}

impl EvalReport {
    /// Builds the report from decoded selections aligned with `items`.
    pub fn from_predictions(predictions: &[Vec<bool>], items: &[&LabeledInstance]) -> Result<Self> {
        aligned(predictions.len(), items.len())?;
        let mut buckets: Vec<Vec<(&Vec<bool>, f64, &KnapsackInstance)>> = vec![Vec::new(); 5];
        let mut everything = Vec::with_capacity(items.len());
        for (x, item) in predictions.iter().zip(items) {
            let label = item.label.as_ref().ok_or_else(|| Error::InvalidInstance {
                id: item.id(),
                message: "evaluation needs a labeled instance".into(),
            })?;
            if x.len() != item.instance.n_items() {
                return Err(Error::Shape(format!(
                    "instance {}: prediction length {}",
                    item.id(),
                    x.len()
                )));
            }
            let entry = (x, label.optimal_value, &item.instance);
            buckets[alpha_quintile(alpha(&item.instance)?)].push(entry);
            everything.push(entry);
        }
        let quintiles = buckets
            .iter()
            .zip(QUINTILE_LABELS)
            .map(|(rows, label)| ReportRow::build(label, rows))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport {
            quintiles,
            all: ReportRow::build("All", &everything)?,
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.quintiles.iter().chain(std::iter::once(&self.all))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>, digits: usize| match v {
            Some(v) => format!("{v:.digits$}"),
            None => "N/A".to_string(),
        };
        writeln!(
            f,
            "{:<8} {:>6} {:>10} {:>14} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "alpha", "count", "%Violated", "MeanViolation", "%Under", "%Over", "Avg-O", "Avg-U", "AR"
        )?;
        for row in self.rows() {
            writeln!(
                f,
                "{:<8} {:>6} {:>10} {:>14} {:>8} {:>8} {:>8} {:>8} {:>8}",
                row.alpha,
                row.count,
                cell(row.pct_violated, 2),
                cell(row.mean_violation_pct, 2),
                cell(row.pct_under, 2),
                cell(row.pct_over, 2),
                cell(row.avg_overshoot_pct, 2),
                cell(row.avg_undershoot_pct, 2),
                cell(row.ar, 4),
            )?;
        }
        Ok(())
    }
}

/// Rounded network output for a set of instances (eval mode).
#[derive(Debug, Clone)]
pub struct Predictions {
    pub logits: Array2<f64>,
    pub rounded: Array2<f64>,
}

impl Predictions {
    pub fn selections(&self) -> Vec<Vec<bool>> {
        self.rounded
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&x| x == 1.0).collect())
            .collect()
    }
}

pub fn predict(params: &ModelParams, instances: &[&KnapsackInstance]) -> Result<Predictions> {
    let n = params.n_items;
    let mut logits = Array2::zeros((instances.len(), n));
    let mut rounded = Array2::zeros((instances.len(), n));
    for (c, chunk) in instances.chunks(PREDICT_CHUNK).enumerate() {
        let inputs = feature_matrix(chunk)?;
        let trace = params.forward(inputs.view(), Mode::Eval)?;
        let rows = s![c * PREDICT_CHUNK..c * PREDICT_CHUNK + chunk.len(), ..];
        logits.slice_mut(rows).assign(&trace.logits);
        rounded.slice_mut(rows).assign(&trace.rounded);
    }
    Ok(Predictions { logits, rounded })
}

/// Runs the network in eval mode over `items` and builds the report.
pub fn evaluate(params: &ModelParams, items: &[&LabeledInstance]) -> Result<EvalReport> {
    let instances: Vec<&KnapsackInstance> = items.iter().map(|i| &i.instance).collect();
    let predictions = predict(params, &instances)?;
    EvalReport::from_predictions(&predictions.selections(), items)
}

/// Validation quantities tracked once per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMetrics {
    pub bce: f64,
    pub mean_violation: f64,
    pub ar: f64,
    pub violation_rate: f64,
}

impl SplitMetrics {
    pub fn mu_loss(&self, mu: f64) -> f64 {
        self.bce + mu * self.mean_violation
    }
}

pub fn split_metrics(params: &ModelParams, items: &[&LabeledInstance]) -> Result<SplitMetrics> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let batch = Batch::from_items(items)?;
    let instances: Vec<&KnapsackInstance> = items.iter().map(|i| &i.instance).collect();
    let predictions = predict(params, &instances)?;
    let (bce, _) = bce_loss(&predictions.logits, &batch.labels)?;
    let violations = batch.violations(&predictions.rounded)?;
    let selections = predictions.selections();
    let ars = selections
        .iter()
        .zip(items)
        .map(|(x, item)| {
            let opt = item.label.as_ref().map(|l| l.optimal_value).unwrap_or(0.0);
            approximation_ratio(item.instance.selection_value(x), opt)
        })
        .collect::<Result<Vec<_>>>()?;
    let violated = violations.iter().filter(|v| **v > 0.0).count();
    Ok(SplitMetrics {
        bce,
        mean_violation: mean(violations.iter().copied()).unwrap_or(0.0),
        ar: mean(ars).unwrap_or(1.0),
        violation_rate: 100.0 * violated as f64 / items.len() as f64,
    })
}

/// Validation metric used to pick the best epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Ar,
    MuLoss(f64),
}

impl SelectionCriterion {
    pub fn value(&self, log: &EpochLog) -> Result<f64> {
        let (name, v) = match *self {
            SelectionCriterion::Ar => ("val_ar", log.val_ar),
            SelectionCriterion::MuLoss(mu) => ("val_mu_loss", log.val_bce + mu * log.val_mean_violation),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MissingMetric(name.into()))
        }
    }
}

/// Epoch number of the earliest log entry that minimizes the criterion.
pub fn select_model(logs: &[EpochLog], criterion: SelectionCriterion) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for log in logs {
        let v = criterion.value(log)?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((log.epoch, v));
        }
    }
    best.map(|(e, _)| e)
        .ok_or_else(|| Error::InvalidArgument("no epoch logs".into()))
}
