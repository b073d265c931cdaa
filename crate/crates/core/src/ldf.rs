//! Lagrangian dual training.
//!
//! The capacity constraint enters the loss as `λ · mean_b max(0, Σ x̂_i w_i − W)`
//! where `x̂` is the rounded network output. Rounding has no useful
//! derivative, so its backward pass uses the surrogate rule of
//! [`surrogate_grad`]. After every epoch the multiplier takes a subgradient
//! step `λ ← max(0, λ + s Σ ν)` with the violations accumulated over that
//! epoch's training batches.

use std::time::Instant;

use ndarray::{Array1, Array2, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::{split_metrics, SelectionCriterion, SplitMetrics};
use crate::instance::{feature_matrix, Dataset, KnapsackInstance, LabeledInstance, SplitKind};
use crate::nn::{bce_loss, clip_global_norm, surrogate_grad, surrogate_smooth, AdamState, ModelParams, Mode};
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Plain supervised baseline, no constraint term.
    Fc,
    /// Lagrangian training from scratch.
    Ldf,
    /// Supervised pre-training with λ frozen at zero, then Lagrangian training.
    LdfPretrained,
}

impl Regime {
    pub fn selection_criterion(self, mu: f64) -> SelectionCriterion {
        match self {
            Regime::Fc => SelectionCriterion::Ar,
            Regime::Ldf | Regime::LdfPretrained => SelectionCriterion::MuLoss(mu),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub regime: Regime,
    pub learning_rate: f64,
    /// Subgradient step `s` of the multiplier update.
    pub lagrangian_step: f64,
    pub max_grad_norm: f64,
    pub lambda_init: f64,
    /// Sharpness of the surrogate rounding gradient.
    pub k: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    /// Upper bound on the frozen-λ phase of `ldf_pretrained`.
    pub pretrain_epochs: usize,
    pub seed: u64,
    /// Epochs without improvement of the selection metric after which a
    /// phase counts as converged.
    pub early_stop_patience: usize,
    /// Stop training once the final phase has converged.
    pub stop_at_convergence: bool,
    pub hidden: Vec<usize>,
    /// `μ` of the validation μ-loss used for model selection.
    pub selection_mu: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Ldf,
            learning_rate: 1e-4,
            lagrangian_step: 1e-7,
            max_grad_norm: 0.5,
            lambda_init: 1.0,
            k: 25.0,
            batch_size: 256,
            n_epochs: 500,
            pretrain_epochs: 0,
            seed: 0,
            early_stop_patience: 25,
            stop_at_convergence: true,
            hidden: crate::nn::DEFAULT_HIDDEN.to_vec(),
            selection_mu: 1.0,
        }
    }
}

impl TrainConfig {
    /// Copy with regime-implied values applied: the baseline never uses a
    /// multiplier.
    pub fn effective(&self) -> TrainConfig {
        let mut c = self.clone();
        if c.regime == Regime::Fc {
            c.lagrangian_step = 0.0;
            c.lambda_init = 0.0;
        }
        c
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.lagrangian_step >= 0.0) {
            return bad("lagrangian_step must be non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if !(self.lambda_init >= 0.0) {
            return bad("lambda_init must be non-negative");
        }
        if !(self.k > 0.0) {
            return bad("k must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.n_epochs == 0 {
            return bad("n_epochs must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and positive");
        }
        if !(self.selection_mu >= 0.0) {
            return bad("selection_mu must be non-negative");
        }
        Ok(())
    }

    /// Short digest identifying the configuration in checkpoint sidecars.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialization is infallible");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Maximum capacity excess of a selection, in raw weight units.
pub fn constraint_violation(selection: &[bool], instance: &KnapsackInstance) -> Result<f64> {
    if selection.len() != instance.n_items() {
        return Err(Error::Shape(format!(
            "selection of length {} for {} items",
            selection.len(),
            instance.n_items()
        )));
    }
    Ok((instance.selection_weight(selection) - instance.capacity).max(0.0))
}

/// Dense tensors for a set of labeled instances.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
    pub weights: Array2<f64>,
    pub capacities: Array1<f64>,
}

impl Batch {
    pub fn from_items(items: &[&LabeledInstance]) -> Result<Self> {
        let instances: Vec<&KnapsackInstance> = items.iter().map(|i| &i.instance).collect();
        let inputs = feature_matrix(&instances)?;
        let n = instances.first().map_or(0, |i| i.n_items());
        let mut labels = Array2::zeros((items.len(), n));
        let mut weights = Array2::zeros((items.len(), n));
        for (b, item) in items.iter().enumerate() {
            let label = item.label.as_ref().ok_or_else(|| Error::InvalidInstance {
                id: item.id(),
                message: "training needs a labeled instance".into(),
            })?;
            for i in 0..n {
                labels[[b, i]] = if label.selection[i] { 1.0 } else { 0.0 };
                weights[[b, i]] = item.instance.weights[i];
            }
        }
        Ok(Batch {
            inputs,
            labels,
            weights,
            capacities: instances.iter().map(|i| i.capacity).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-instance `max(0, Σ x_i w_i − W)` for decoded outputs `x`, summing
    /// items in order.
    pub fn violations(&self, decoded: &Array2<f64>) -> Result<Vec<f64>> {
        if decoded.dim() != self.weights.dim() {
            return Err(Error::Shape(format!(
                "decoded {:?} vs batch {:?}",
                decoded.dim(),
                self.weights.dim()
            )));
        }
        Ok(decoded
            .rows()
            .into_iter()
            .zip(self.weights.rows())
            .zip(&self.capacities)
            .map(|((x, w), &cap)| {
                let load: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
                (load - cap).max(0.0)
            })
            .collect())
    }
}

/// How probabilities become the 0/1 decisions fed to the constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoding {
    /// Hard rounding (training and inference).
    Round,
    /// `σ(k(p − 0.5))`, whose exact derivative is the surrogate; used to
    /// check gradients against finite differences.
    Smooth,
}

pub fn decode(probs: &Array2<f64>, decoding: Decoding, k: f64) -> Array2<f64> {
    match decoding {
        Decoding::Round => probs.mapv(crate::nn::round_half_up),
        Decoding::Smooth => probs.mapv(|p| surrogate_smooth(p, k)),
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub bce: f64,
    /// Per-instance violation of the decoded batch.
    pub violations: Vec<f64>,
    pub grad_logits: Array2<f64>,
}

impl LossOutput {
    pub fn total_violation(&self) -> f64 {
        self.violations.iter().sum()
    }
}

/// BCE plus `λ` times the batch-mean constraint violation of `decoded`.
///
/// The violation gradient is `w_i` for violated instances, chained through
/// the surrogate rounding derivative at `p` and the sigmoid derivative.
pub fn lagrangian_loss(
    logits: &Array2<f64>,
    probs: &Array2<f64>,
    decoded: &Array2<f64>,
    batch: &Batch,
    lambda: f64,
    k: f64,
) -> Result<LossOutput> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("negative multiplier {lambda}")));
    }
    if probs.dim() != logits.dim() {
        return Err(Error::Shape("probs and logits differ".into()));
    }
    let (bce, mut grad) = bce_loss(logits, &batch.labels)?;
    let violations = batch.violations(decoded)?;
    let b = batch.len() as f64;
    let mean_violation = violations.iter().sum::<f64>() / b;
    if lambda > 0.0 {
        let scale = lambda / b;
        for (r, &v) in violations.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            Zip::from(grad.row_mut(r))
                .and(probs.row(r))
                .and(batch.weights.row(r))
                .for_each(|g, &p, &w| *g += scale * w * surrogate_grad(p, k) * p * (1.0 - p));
        }
    }
    Ok(LossOutput {
        loss: bce + lambda * mean_violation,
        bce,
        violations,
        grad_logits: grad,
    })
}

/// The scalar multiplier shared by all instances.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiplierState {
    pub lambda: f64,
    /// `(λ in effect, total violation)` for every completed epoch.
    pub history: Vec<(f64, f64)>,
}

impl MultiplierState {
    pub fn new(lambda: f64) -> Self {
        MultiplierState {
            lambda,
            history: Vec::new(),
        }
    }

    /// `λ ← max(0, λ + s · total_violation)`.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn update(&mut self, total_violation: f64, step: f64) -> Result<()> {
        if !(total_violation >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "total violation must be non-negative, got {total_violation}"
            )));
        }
        self.history.push((self.lambda, total_violation));
        self.lambda = (self.lambda + step * total_violation).max(0.0);
        Ok(())
    }
}

/// One line of the per-epoch JSON-lines log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Multiplier in effect during the epoch.
    pub lambda: f64,
    pub total_violation: f64,
    pub train_loss: f64,
    pub val_ar: f64,
    pub val_mu_loss: f64,
    pub val_violation_rate: f64,
    pub wall_clock_s: f64,
    pub val_bce: f64,
    pub val_mean_violation: f64,
}

impl EpochLog {
    /// Serialized line without the timing field, for reproducibility checks.
    pub fn timeless_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_clock_s = 0.0;
        serde_json::to_string(&copy).expect("log serialization is infallible")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log serialization is infallible")
    }
}

/// Passed to the observer after every epoch.
pub struct EpochEvent<'a> {
    pub log: &'a EpochLog,
    pub params: &'a ModelParams,
    pub is_best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_lambda: f64,
    pub final_params: ModelParams,
    pub multipliers: MultiplierState,
    pub logs: Vec<EpochLog>,
    /// First epoch of the Lagrangian phase (0 unless pre-trained).
    pub unfreeze_epoch: usize,
    /// Epochs from the start of the final phase to its last improvement,
    /// when that phase converged before the epoch cap.
    pub epochs_to_convergence: Option<usize>,
    pub wall_clock_s: f64,
}

impl TrainOutcome {
    /// Epochs the final phase needed, counting the whole phase when it never
    /// converged.
    pub fn phase_epochs_or_cap(&self) -> usize {
        self.epochs_to_convergence
            .unwrap_or(self.logs.len() - self.unfreeze_epoch)
    }
}

/// Splits shuffled indices into batches; a trailing batch of one row is
/// merged into its predecessor since batch statistics need two rows.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

/// Runs the training loop; see [`train_with`].
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(dataset, config, |_| Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Pretrain,
    Lagrangian,
}

/// Tracks improvement of a metric within one phase.
struct Plateau {
    start: usize,
    best: f64,
    last_improvement: Option<usize>,
}

impl Plateau {
    fn new(start: usize) -> Self {
        Plateau {
            start,
            best: f64::INFINITY,
            last_improvement: None,
        }
    }

    fn observe(&mut self, epoch: usize, value: f64) {
        if value < self.best {
            self.best = value;
            self.last_improvement = Some(epoch);
        }
    }

    fn converged(&self, epoch: usize, patience: usize) -> bool {
        self.last_improvement
            .is_some_and(|last| epoch - last >= patience)
    }

    fn epochs_to_best(&self) -> Option<usize> {
        self.last_improvement.map(|last| last + 1 - self.start)
    }
}

/// Trains on the dataset's train split, validating on its val split after
/// every epoch. `observer` sees each epoch's log and parameters.
pub fn train_with(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochEvent<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let config = config.effective();
    let train_items = dataset.split_items(SplitKind::Train);
    let val_items = dataset.split_items(SplitKind::Val);
    if train_items.len() < 2 || val_items.is_empty() {
        return Err(Error::InvalidArgument(
            "training needs at least two train and one validation instance".into(),
        ));
    }
    let started = Instant::now();
    let mut params = ModelParams::init_with_hidden(dataset.n_items, &config.hidden, config.seed)?;
    let mut adam = AdamState::new(&params, config.learning_rate);
    let mut shuffle_rng = rng::stream(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train_items.len()).collect();

    let pretraining = config.regime == Regime::LdfPretrained && config.pretrain_epochs > 0;
    let mut phase = if pretraining { Phase::Pretrain } else { Phase::Lagrangian };
    let mut multipliers = MultiplierState::new(if pretraining { 0.0 } else { config.lambda_init });
    let criterion = config.regime.selection_criterion(config.selection_mu);
    let mut plateau = Plateau::new(0);
    let mut unfreeze_epoch = 0;

    let mut logs = Vec::new();
    let mut best: Option<(ModelParams, usize, f64, f64)> = None;
    let mut epochs_to_convergence = None;

    for epoch in 0..config.n_epochs {
        order.shuffle(&mut shuffle_rng);
        let lambda = multipliers.lambda;
        let mut total_violation = 0.0;
        let mut loss_sum = 0.0;
        for (b, idx) in batches(&order, config.batch_size).into_iter().enumerate() {
            let items: Vec<&LabeledInstance> = idx.iter().map(|&i| train_items[i]).collect();
            let batch = Batch::from_items(&items)?;
            let trace = params.forward(batch.inputs.view(), Mode::Train)?;
            params.commit_batch_statistics(&trace);
            let out = lagrangian_loss(&trace.logits, &trace.probs, &trace.rounded, &batch, lambda, config.k)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let mut grads = params.backward(&trace, &out.grad_logits)?;
            clip_global_norm(&mut grads, config.max_grad_norm);
            adam.step(&mut params, &grads)?;
            total_violation += out.total_violation();
            loss_sum += out.loss * batch.len() as f64;
        }
        let step = match phase {
            Phase::Pretrain => 0.0,
            Phase::Lagrangian => config.lagrangian_step,
        };
        multipliers.update(total_violation, step)?;

        let val: SplitMetrics = split_metrics(&params, &val_items)?;
        let log = EpochLog {
            epoch,
            lambda,
            total_violation,
            train_loss: loss_sum / train_items.len() as f64,
            val_ar: val.ar,
            val_mu_loss: val.mu_loss(config.selection_mu),
            val_violation_rate: val.violation_rate,
            wall_clock_s: started.elapsed().as_secs_f64(),
            val_bce: val.bce,
            val_mean_violation: val.mean_violation,
        };

        let score = criterion.value(&log)?;
        let is_best = best.as_ref().is_none_or(|(_, _, _, b)| score < *b);
        if is_best {
            best = Some((params.clone(), epoch, lambda, score));
        }
        observer(&EpochEvent {
            log: &log,
            params: &params,
            is_best,
        })?;
        logs.push(log);

        let phase_metric = match phase {
            Phase::Pretrain => val.ar,
            Phase::Lagrangian => score,
        };
        plateau.observe(epoch, phase_metric);
        let converged = plateau.converged(epoch, config.early_stop_patience);
        match phase {
            Phase::Pretrain => {
                if converged || epoch + 1 >= config.pretrain_epochs {
                    phase = Phase::Lagrangian;
                    multipliers.lambda = config.lambda_init;
                    unfreeze_epoch = epoch + 1;
                    plateau = Plateau::new(unfreeze_epoch);
                }
            }
            Phase::Lagrangian => {
                if converged {
                    epochs_to_convergence = plateau.epochs_to_best();
                    if config.stop_at_convergence {
                        break;
                    }
                }
            }
        }
    }

    let (best, best_epoch, best_lambda, _) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_lambda,
        final_params: params,
        multipliers,
        logs,
        unfreeze_epoch,
        epochs_to_convergence,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_dataset, Label};
    use crate::solver::label_dataset;
    use ndarray::array;

    fn inst(weights: Vec<f64>, capacity: f64) -> KnapsackInstance {
        let n = weights.len();
        KnapsackInstance {
            id: 0,
            weights,
            values: vec![1.0; n],
            capacity,
        }
    }

    #[test]
    fn violation_examples() {
        let i = inst(vec![0.4, 0.5, 0.6], 1.0);
        assert_eq!(constraint_violation(&[true, true, false], &i).unwrap(), 0.0);
        let i = inst(vec![0.9, 0.6], 1.0);
        assert!((constraint_violation(&[true, true], &i).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(constraint_violation(&[false, false], &i).unwrap(), 0.0);
        assert!(constraint_violation(&[false], &i).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let mut m = MultiplierState::new(1.0);
        m.update(100.0, 1e-4).unwrap();
        assert!((m.lambda - 1.01).abs() < 1e-15);
        let before = m.lambda;
        m.update(100.0, 0.0).unwrap();
        assert_eq!(m.lambda, before);
        m.update(0.0, 1e-4).unwrap();
        assert_eq!(m.lambda, before);
        assert_eq!(m.history.len(), 3);
        assert!(m.update(-1.0, 1e-4).is_err());
        let mut neg = MultiplierState::new(0.1);
        neg.update(1.0, -1.0).unwrap();
        assert_eq!(neg.lambda, 0.0);
    }

    fn labeled(weights: Vec<f64>, capacity: f64, selection: Vec<bool>) -> LabeledInstance {
        let instance = inst(weights, capacity);
        let optimal_value = instance.selection_value(&selection);
        LabeledInstance {
            instance,
            label: Some(Label {
                selection,
                optimal_value,
            }),
        }
    }

    #[test]
    fn loss_reduces_to_bce_without_active_constraint() {
        let a = labeled(vec![0.5, 0.6], 0.7, vec![false, true]);
        let b = labeled(vec![0.2, 0.3], 0.45, vec![true, false]);
        let batch = Batch::from_items(&[&a, &b]).unwrap();
        let logits = array![[0.3, 0.2], [1.0, 0.5]];
        let probs = logits.mapv(crate::nn::sigmoid);
        let rounded = decode(&probs, Decoding::Round, 25.0);
        let (bce, bce_grad) = bce_loss(&logits, &batch.labels).unwrap();

        let out = lagrangian_loss(&logits, &probs, &rounded, &batch, 0.0, 25.0).unwrap();
        assert_eq!(out.loss, bce);
        assert_eq!(out.grad_logits, bce_grad);

        // λ > 0: instance 0 picks 1.1 > 0.7, instance 1 picks 0.5 > 0.45
        let out = lagrangian_loss(&logits, &probs, &rounded, &batch, 2.0, 25.0).unwrap();
        let v0 = 0.5 + 0.6 - 0.7;
        let v1 = 0.2 + 0.3 - 0.45;
        assert!((out.violations[0] - v0).abs() < 1e-15, "{:?}", out.violations);
        assert!((out.violations[1] - v1).abs() < 1e-15, "{:?}", out.violations);
        assert!((out.loss - (bce + 2.0 * (v0 + v1) / 2.0)).abs() < 1e-12);

        let zeros = Array2::zeros((2, 2));
        let out = lagrangian_loss(&logits, &probs, &zeros, &batch, 2.0, 25.0).unwrap();
        assert_eq!(out.loss, bce);
        assert_eq!(out.grad_logits, bce_grad);
    }

    #[test]
    fn loss_gradient_matches_finite_differences_of_smoothed_loss() {
        // n = 3, batch 2; capacities low enough that both constraints bind
        let a = labeled(vec![0.5, 0.6, 0.3], 0.2, vec![true, false, false]);
        let b = labeled(vec![0.2, 0.9, 0.4], 0.3, vec![false, false, true]);
        let batch = Batch::from_items(&[&a, &b]).unwrap();
        let logits = array![[0.02, -0.03, 0.05], [0.01, 0.04, -0.02]];
        let (lambda, k) = (1.5, 25.0);
        let loss_at = |z: &Array2<f64>| {
            let p = z.mapv(crate::nn::sigmoid);
            let x = decode(&p, Decoding::Smooth, k);
            lagrangian_loss(z, &p, &x, &batch, lambda, k).unwrap()
        };
        let analytic = loss_at(&logits).grad_logits;
        let h = 1e-5;
        for ((r, c), g) in analytic.indexed_iter() {
            let mut up = logits.clone();
            up[[r, c]] += h;
            let mut down = logits.clone();
            down[[r, c]] -= h;
            let fd = (loss_at(&up).loss - loss_at(&down).loss) / (2.0 * h);
            assert!((fd - g).abs() / g.abs().max(1e-8) < 1e-4, "({r},{c}) {fd} vs {g}");
        }
    }

    #[test]
    fn trailing_singleton_batch_is_merged() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
    }

    fn small_config(regime: Regime) -> TrainConfig {
        TrainConfig {
            regime,
            learning_rate: 1e-3,
            lagrangian_step: 1e-2,
            max_grad_norm: 10.0,
            batch_size: 16,
            n_epochs: 3,
            hidden: vec![16, 8],
            stop_at_convergence: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn short_runs_respect_regime_contracts() {
        let d = label_dataset(generate_dataset(6, 80, 2).unwrap()).unwrap();
        let fc = train(&d, &small_config(Regime::Fc)).unwrap();
        assert_eq!(fc.logs.len(), 3);
        assert!(fc.logs.iter().all(|l| l.lambda == 0.0));

        let mut c = small_config(Regime::LdfPretrained);
        c.pretrain_epochs = 2;
        c.n_epochs = 5;
        let pre = train(&d, &c).unwrap();
        let lambdas: Vec<f64> = pre.logs.iter().map(|l| l.lambda).collect();
        assert_eq!(&lambdas[..2], &[0.0, 0.0]);
        assert_eq!(lambdas[2], 1.0);
        assert_eq!(pre.unfreeze_epoch, 2);

        let again = train(&d, &small_config(Regime::Fc)).unwrap();
        let a: Vec<String> = fc.logs.iter().map(EpochLog::timeless_json).collect();
        let b: Vec<String> = again.logs.iter().map(EpochLog::timeless_json).collect();
        assert_eq!(a, b);
        assert_eq!(fc.final_params, again.final_params);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(TrainConfig { batch_size: 1, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
        let fc = TrainConfig { regime: Regime::Fc, ..TrainConfig::default() }.effective();
        assert_eq!((fc.lagrangian_step, fc.lambda_init), (0.0, 0.0));
        assert_eq!(TrainConfig::default().hash().len(), 16);
    }
}
