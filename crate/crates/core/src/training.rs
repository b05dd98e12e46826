//! Preference-model training.
//!
//! Losses are batch means over winner-first examples with `z = s / beta`:
//!
//! - CE:  `-(p ln sigma(z) + (1 - p) ln sigma(-z))`, `dL/ds = (sigma(z) - p) / beta`
//! - MSE: `(z - logit p)^2`,                       `dL/ds = 2 (z - logit p) / beta`
//!
//! Parameter gradients are `dL/ds` pushed through
//! [`PreferenceModel::accumulate_score_grad`], reduced in dataset order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{PreferenceDataset, PreferenceExample};
use crate::error::{PrefError, Result};
use crate::models::{AnyModel, BtModel, GpmModel, PreferenceModel};
use crate::prefcore::{log_sigmoid, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// Temperature applied to the model before training.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Standard deviation of the initial parameters.
    pub init_scale: f64,
}

impl TrainConfig {
    pub fn gpm_default() -> Self {
        Self {
            loss: LossKind::Ce,
            beta: 0.1,
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::ADAM,
            init_scale: 0.1,
        }
    }

    pub fn bt_default() -> Self {
        Self {
            beta: 1.0,
            ..Self::gpm_default()
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(PrefError::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.beta, "beta")?;
        positive(self.learning_rate, "learning rate")?;
        positive(self.init_scale, "init scale")?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(PrefError::InvalidArgument(
                "epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch traces, all of length `epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-dataset loss after each epoch.
    pub loss: Vec<f64>,
    /// Full-dataset gradient norm after each epoch.
    pub grad_norm: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub final_accuracy: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainReport {
    /// `epoch,loss,grad_norm` with 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,grad_norm\n");
        for (i, (l, g)) in self.loss.iter().zip(&self.grad_norm).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, l, g));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "final_accuracy": self.final_accuracy,
            "epochs": self.epochs,
            "seed": self.seed,
        })
    }
}

/// Flat gradient aligned with [`PreferenceModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_batch(batch: &[PreferenceExample], kind: LossKind) -> Result<()> {
    if batch.is_empty() {
        return Err(PrefError::Empty("batch"));
    }
    if kind == LossKind::Mse {
        if let Some((index, ex)) = batch
            .iter()
            .enumerate()
            .find(|(_, e)| !(e.prob > 0.0 && e.prob < 1.0))
        {
            return Err(PrefError::HardLabelUnderMse {
                index,
                prob: ex.prob,
            });
        }
    }
    Ok(())
}

/// Returns `(loss, dL/ds)` for one example.
fn example_loss(s: f64, prob: f64, beta: f64, kind: LossKind) -> (f64, f64) {
    let z = s / beta;
    match kind {
        LossKind::Ce => {
            let loss = -(prob * log_sigmoid(z) + (1.0 - prob) * log_sigmoid(-z));
            (loss, (sigmoid(z) - prob) / beta)
        }
        LossKind::Mse => {
            let r = z - logit(prob);
            (r * r, 2.0 * r / beta)
        }
    }
}

pub fn loss<M: PreferenceModel + ?Sized>(
    model: &M,
    batch: &[PreferenceExample],
    kind: LossKind,
) -> Result<f64> {
    check_batch(batch, kind)?;
    let beta = model.beta();
    let mut total = 0.0;
    for ex in batch {
        let s = model.score_items(&ex.context, &ex.winner, &ex.loser)?;
        total += example_loss(s, ex.prob, beta, kind).0;
    }
    Ok(total / batch.len() as f64)
}

/// Mean cross-entropy over `batch`.
pub fn ce_loss<M: PreferenceModel + ?Sized>(model: &M, batch: &[PreferenceExample]) -> Result<f64> {
    loss(model, batch, LossKind::Ce)
}

/// Mean squared error against `logit(prob)`; rejects hard labels.
pub fn mse_loss<M: PreferenceModel + ?Sized>(model: &M, batch: &[PreferenceExample]) -> Result<f64> {
    loss(model, batch, LossKind::Mse)
}

pub fn loss_and_grad<M: PreferenceModel + ?Sized>(
    model: &M,
    batch: &[PreferenceExample],
    kind: LossKind,
) -> Result<(f64, Gradient)> {
    check_batch(batch, kind)?;
    let beta = model.beta();
    let n = batch.len() as f64;
    let mut grad = vec![0.0; model.params().len()];
    let mut total = 0.0;
    for ex in batch {
        let s = model.score_items(&ex.context, &ex.winner, &ex.loser)?;
        let (l, dl_ds) = example_loss(s, ex.prob, beta, kind);
        total += l;
        model.accumulate_score_grad(&ex.context, &ex.winner, &ex.loser, dl_ds / n, &mut grad)?;
    }
    Ok((total / n, Gradient(grad)))
}

/// Gradient of the batch-mean loss; parameters no example touches get exactly 0.
pub fn loss_grad<M: PreferenceModel + ?Sized>(
    model: &M,
    batch: &[PreferenceExample],
    kind: LossKind,
) -> Result<Gradient> {
    Ok(loss_and_grad(model, batch, kind)?.1)
}

/// Fraction of examples with `s(winner > loser) > 0`; exact ties earn half credit.
pub fn eval_accuracy<M: PreferenceModel + ?Sized>(model: &M, examples: &[PreferenceExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(PrefError::Empty("dataset"));
    }
    let mut credit = 0.0;
    for ex in examples {
        let s = model.score_items(&ex.context, &ex.winner, &ex.loser)?;
        if s > 0.0 {
            credit += 1.0;
        } else if s == 0.0 {
            credit += 0.5;
        }
    }
    Ok(credit / examples.len() as f64)
}

/// Temperature setter shared by the trainable models.
pub trait Trainable: PreferenceModel {
    fn set_beta(&mut self, beta: f64) -> Result<()>;
}

impl Trainable for GpmModel {
    fn set_beta(&mut self, beta: f64) -> Result<()> {
        GpmModel::set_beta(self, beta)
    }
}

impl Trainable for BtModel {
    fn set_beta(&mut self, beta: f64) -> Result<()> {
        BtModel::set_beta(self, beta)
    }
}

impl Trainable for AnyModel {
    fn set_beta(&mut self, beta: f64) -> Result<()> {
        match self {
            AnyModel::Gpm(m) => m.set_beta(beta),
            AnyModel::Bt(m) => m.set_beta(beta),
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Minibatch training with a seeded shuffle; bitwise reproducible for a fixed config.
pub fn train<M: Trainable>(
    mut model: M,
    dataset: &PreferenceDataset,
    cfg: &TrainConfig,
) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(PrefError::Empty("dataset"));
    }
    model.set_beta(cfg.beta)?;
    let examples = dataset.examples();
    check_batch(examples, cfg.loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let np = model.params().len();
    let mut adam = AdamState {
        m: vec![0.0; np],
        v: vec![0.0; np],
        t: 0,
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport {
        loss: Vec::with_capacity(cfg.epochs),
        grad_norm: Vec::with_capacity(cfg.epochs),
        accuracy: Vec::with_capacity(cfg.epochs),
        final_accuracy: 0.0,
        epochs: cfg.epochs,
        seed: cfg.seed,
    };
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (l, g) = loss_and_grad(&model, &batch, cfg.loss)?;
            if !l.is_finite() {
                return Err(PrefError::Diverged { epoch, loss: l });
            }
            step(&mut model, &g.0, cfg, &mut adam);
        }
        let (l, g) = loss_and_grad(&model, examples, cfg.loss)?;
        if !l.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(PrefError::Diverged { epoch, loss: l });
        }
        report.loss.push(l);
        report.grad_norm.push(g.norm());
        report.accuracy.push(eval_accuracy(&model, examples)?);
    }
    report.final_accuracy = *report.accuracy.last().unwrap_or(&0.0);
    Ok((model, report))
}

fn step<M: PreferenceModel>(model: &mut M, grad: &[f64], cfg: &TrainConfig, adam: &mut AdamState) {
    let lr = cfg.learning_rate;
    let params = model.params_mut();
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for i in 0..params.len() {
                let g = grad[i];
                adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * g;
                adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * g * g;
                let mhat = adam.m[i] / c1;
                let vhat = adam.v[i] / c2;
                params[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
