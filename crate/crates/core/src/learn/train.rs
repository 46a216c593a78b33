use std::path::Path;

use base64::Engine;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::models::{Model, ModelConfig, ModelKind};
use super::tape::{Tape, Tensor};
use super::window::{build_samples, Direction, Samples};
use super::LearnError;
use crate::dataset::Pair;
use crate::kinematics::JointConfig;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// stop after this many epochs without a new best validation RMSE
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch: 32, epochs: 500, patience: 100, seed: 42 }
    }
}

impl TrainConfig {
    /// Full-length schedule with no early stop.
    pub fn full_scale() -> Self {
        Self { epochs: 8000, patience: usize::MAX, ..Self::default() }
    }
}

/// Adam with the conventional moment constants.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            for (i, (w, gi)) in p.data.iter_mut().zip(&g.data).enumerate() {
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub best_val_rmse_deg: f64,
    /// mean training MSE (normalized units) per epoch
    pub train_loss: Vec<f64>,
    /// validation RMSE (deg) per epoch
    pub val_rmse_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub arch: ModelKind,
    pub direction: Direction,
    pub config: ModelConfig,
    pub n_weights: usize,
    /// little-endian f64 bytes, base64
    pub weights: String,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    pub fn from_model(model: &Model, direction: Direction, meta: TrainingMeta) -> Self {
        let bytes: Vec<u8> = model.to_flat().iter().flat_map(|w| w.to_le_bytes()).collect();
        Self {
            arch: model.config.kind,
            direction,
            config: model.config.clone(),
            n_weights: model.num_params(),
            weights: base64::engine::general_purpose::STANDARD.encode(bytes),
            meta,
        }
    }

    pub fn model(&self) -> Result<Model, LearnError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.weights)
            .map_err(|e| LearnError::Checkpoint(format!("weights: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(LearnError::Checkpoint("weight bytes not a multiple of 8".into()));
        }
        let flat: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if flat.len() != self.n_weights || self.config.num_params() != self.n_weights {
            return Err(LearnError::Checkpoint(format!(
                "weight count {} does not match architecture ({})",
                flat.len(),
                self.config.num_params()
            )));
        }
        if self.arch != self.config.kind {
            return Err(LearnError::Checkpoint("architecture tag disagrees with config".into()));
        }
        Model::from_flat(self.config.clone(), &flat).map_err(LearnError::Checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text = std::fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        ck.model()?;
        Ok(ck)
    }
}

fn batch_tensors(samples: &Samples, idx: &[usize]) -> (Tensor, Tensor) {
    let w = samples.len * 5;
    let mut x = Vec::with_capacity(idx.len() * w);
    let mut y = Vec::with_capacity(idx.len() * 5);
    for &i in idx {
        x.extend_from_slice(samples.input(i));
        y.extend_from_slice(samples.target(i));
    }
    (Tensor::from_vec([idx.len(), samples.len, 5], x), Tensor::from_vec([idx.len(), 1, 5], y))
}

/// Mean loss and parameter gradients over one batch.
pub fn loss_and_grad(model: &Model, x: Tensor, y: Tensor) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new(&model.params);
    let xi = tape.input(x);
    let out = model.forward(&mut tape, xi);
    let loss = tape.mse(out, y);
    let value = tape.value(loss).data[0];
    (value, tape.backward(loss))
}

/// RMSE in degrees over every joint of every sample.
pub fn rmse_deg(model: &Model, samples: &Samples) -> f64 {
    let n = samples.count();
    if n == 0 {
        return f64::NAN;
    }
    let half = model.config.scale.half;
    let mut sq = 0.0;
    let chunk = 256;
    let all: Vec<usize> = (0..n).collect();
    for idx in all.chunks(chunk) {
        let (x, y) = batch_tensors(samples, idx);
        let pred = model.predict_normalized(x);
        for (k, (p, t)) in pred.iter().zip(&y.data).enumerate() {
            let e = (p - t) * half[k % 5];
            sq += e * e;
        }
    }
    (sq / (n * 5) as f64).sqrt()
}

/// RMSE (deg) of predicting every valid validation target with the mean
/// valid training target.
pub fn constant_mean_rmse(train: &[Pair], val: &[Pair], direction: Direction) -> f64 {
    let pick = |p: &Pair| match direction {
        Direction::Forward => p.phy,
        Direction::Inverse => p.cmd,
    };
    let train: Vec<JointConfig> = train.iter().filter(|p| p.valid).map(pick).collect();
    let val: Vec<JointConfig> = val.iter().filter(|p| p.valid).map(pick).collect();
    let mut mean = [0.0; 5];
    for q in &train {
        for j in 0..5 {
            mean[j] += q[j] / train.len() as f64;
        }
    }
    let sq: f64 = val.iter().map(|q| (0..5).map(|j| (q[j] - mean[j]).powi(2)).sum::<f64>()).sum();
    (sq / (val.len() * 5) as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub checkpoint: ModelCheckpoint,
}

/// Trains one model with Adam on MSE and keeps the weights of the epoch with
/// the lowest validation RMSE.
pub fn train(
    config: &ModelConfig,
    direction: Direction,
    train_pairs: &[Pair],
    val_pairs: &[Pair],
    hyper: &TrainConfig,
) -> Result<TrainOutcome, LearnError> {
    config.validate().map_err(LearnError::Config)?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(LearnError::Config("training and validation sets must be nonempty".into()));
    }
    if hyper.batch == 0 || !(hyper.lr > 0.0) {
        return Err(LearnError::Config("batch must be ≥ 1 and lr > 0".into()));
    }
    let tr = build_samples(train_pairs, direction, config.window, &config.scale);
    let va = build_samples(val_pairs, direction, config.window, &config.scale);
    if tr.count() == 0 || va.count() == 0 {
        return Err(LearnError::Config("training and validation sets hold no valid frames".into()));
    }
    let tag = format!("{}/{}/{}", config.kind.as_str(), direction.as_str(), config.window);
    let mut init_rng = rng::stream(hyper.seed, &format!("init/{tag}"));
    let mut shuffle_rng = rng::stream(hyper.seed, &format!("shuffle/{tag}"));

    let mut model = Model::new(config.clone(), &mut init_rng);
    let mut adam = Adam::new(hyper.lr, &model.params);
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut train_loss = Vec::new();
    let mut val_curve = Vec::new();
    let mut order: Vec<usize> = (0..tr.count()).collect();
    let mut epochs_run = 0;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for idx in order.chunks(hyper.batch) {
            let (x, y) = batch_tensors(&tr, idx);
            let (loss, grads) = loss_and_grad(&model, x, y);
            if !loss.is_finite() {
                return Err(LearnError::Diverged { epoch });
            }
            total += loss * idx.len() as f64;
            adam.update(&mut model.params, &grads);
        }
        let val = rmse_deg(&model, &va);
        if !val.is_finite() {
            return Err(LearnError::Diverged { epoch });
        }
        train_loss.push(total / tr.count() as f64);
        val_curve.push(val);
        epochs_run = epoch;
        if val < best.0 {
            best = (val, epoch, model.params.clone());
        }
        log::debug!("{tag} epoch {epoch}: train {:.3e} val {val:.3}°", total / tr.count() as f64);
        if epoch - best.1 >= hyper.patience {
            break;
        }
    }
    model.params = best.2;
    let meta = TrainingMeta {
        epochs_run,
        best_epoch: best.1,
        lr: hyper.lr,
        batch: hyper.batch,
        seed: hyper.seed,
        best_val_rmse_deg: best.0,
        train_loss,
        val_rmse_deg: val_curve,
    };
    let checkpoint = ModelCheckpoint::from_model(&model, direction, meta);
    Ok(TrainOutcome { model, checkpoint })
}
