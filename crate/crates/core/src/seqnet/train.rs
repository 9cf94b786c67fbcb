//! Mini-batch training with moment-based (Adam) updates and a per-epoch
//! accuracy trace.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::fmath::sqrt;
use crate::rng::stream_rng;
use crate::seqnet::model::{
    dropout_rng, loss_and_gradients, predict, Dropout, ModelParams, Sample,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_learn_rate: f64,
    pub max_epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_learn_rate: 0.005,
            max_epochs: 160,
            batch_size: 16,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !self.initial_learn_rate.is_finite() || self.initial_learn_rate < 0.0 {
            return Err(Error::InvalidParameter("learning rate must be non-negative"));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("epoch count must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidParameter("moment decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: u32,
    pub loss: f64,
    pub train_acc_pct: f64,
    pub val_acc_pct: f64,
}

pub type TrainingTrace = Vec<EpochStats>;

/// First/second moment state, one flat vector per parameter tensor.
struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    fn new(model: &ModelParams) -> Adam {
        let shapes: Vec<usize> = model
            .named_tensors()
            .iter()
            .map(|(_, _, t)| t.len())
            .collect();
        Adam {
            m: shapes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, model: &mut ModelParams, grads: &ModelParams) {
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - powi(cfg.beta1, t);
        let bc2 = 1.0 - powi(cfg.beta2, t);
        let grad_tensors: Vec<&Vec<f64>> =
            grads.named_tensors().into_iter().map(|(_, _, g)| g).collect();
        for ((param, grad), (m, v)) in model
            .tensors_mut()
            .into_iter()
            .zip(grad_tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..param.len() {
                let g = grad[k];
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                param[k] -= cfg.initial_learn_rate * m_hat / (sqrt(v_hat) + cfg.epsilon);
            }
        }
    }
}

fn powi(base: f64, mut n: i32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while n > 0 {
        if n & 1 == 1 {
            acc *= b;
        }
        b *= b;
        n >>= 1;
    }
    acc
}

/// Share of samples whose prediction matches the label, in percent.
/// An empty set reports 0.
pub fn accuracy_pct(model: &ModelParams, set: &[Sample]) -> Result<f64, Error> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for s in set {
        if predict(model, &s.x)? == s.label {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / set.len() as f64)
}

/// Trains for `cfg.max_epochs` epochs of shuffled mini-batches and records
/// loss and accuracies per epoch. Fully deterministic given `cfg.seed`.
pub fn train(
    model: ModelParams,
    cfg: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<(ModelParams, TrainingTrace), Error> {
    cfg.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidParameter("training set must not be empty"));
    }
    let mut model = model;
    let mut adam = Adam::new(&model);
    let mut trace = Vec::with_capacity(cfg.max_epochs as usize);
    let n = train_set.len();

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle = stream_rng(cfg.seed, "epoch-shuffle", u64::from(epoch));
        for i in (1..n).rev() {
            let j = shuffle.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut drop_rng = dropout_rng(cfg.seed, epoch);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grads) =
                loss_and_gradients(&model, &batch, Dropout::Seeded(&mut drop_rng))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(cfg, &mut model, &grads);
        }
        trace.push(EpochStats {
            epoch,
            loss: epoch_loss / n as f64,
            train_acc_pct: accuracy_pct(&model, train_set)?,
            val_acc_pct: accuracy_pct(&model, val_set)?,
        });
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(width: usize, at: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; width];
        v[at] = 1.0;
        v
    }

    fn toy_set() -> Vec<Sample> {
        // Label tracks the destination step, a learnable rule.
        let mut set = Vec::new();
        for s in 0..4 {
            for d in 0..4 {
                set.push(Sample {
                    x: alloc::vec![one_hot(4, s), one_hot(4, d)],
                    label: d as u32 + 1,
                });
            }
        }
        set
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        // Dropout off so identical weights imply identical epoch losses.
        let model = ModelParams::init(4, 6, 4, 0.0, 3).unwrap();
        let cfg = TrainConfig {
            initial_learn_rate: 0.0,
            max_epochs: 3,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let set = toy_set();
        let (trained, trace) = train(model.clone(), &cfg, &set, &set).unwrap();
        assert_eq!(trained, model);
        // The per-sample losses are identical; only their summation order
        // follows the epoch shuffle.
        assert!(trace.windows(2).all(|w| (w[0].loss - w[1].loss).abs() < 1e-12
            && w[0].train_acc_pct == w[1].train_acc_pct));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let set = toy_set();
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = || {
            let model = ModelParams::init(4, 8, 4, 0.05, 2).unwrap();
            train(model, &cfg, &set, &set).unwrap()
        };
        let (ma, ta) = run();
        let (mb, tb) = run();
        assert_eq!(ma, mb);
        assert_eq!(ta, tb);
    }

    #[test]
    fn single_example_overfits() {
        let sample = Sample {
            x: alloc::vec![one_hot(4, 1), one_hot(4, 2)],
            label: 3,
        };
        let model = ModelParams::init(4, 8, 4, 0.0, 7).unwrap();
        let cfg = TrainConfig {
            initial_learn_rate: 0.01,
            max_epochs: 500,
            batch_size: 1,
            seed: 1,
            ..TrainConfig::default()
        };
        let set = alloc::vec![sample.clone()];
        let (trained, trace) = train(model, &cfg, &set, &set).unwrap();
        assert_eq!(predict(&trained, &sample.x).unwrap(), 3);
        assert!(trace.last().unwrap().loss < trace.first().unwrap().loss);
    }

    #[test]
    fn toy_rule_is_learned() {
        let set = toy_set();
        let model = ModelParams::init(4, 12, 4, 0.02, 4).unwrap();
        let cfg = TrainConfig {
            max_epochs: 120,
            batch_size: 4,
            seed: 6,
            ..TrainConfig::default()
        };
        let (_, trace) = train(model, &cfg, &set, &set).unwrap();
        let last = trace.last().unwrap();
        assert!(
            last.train_acc_pct >= 95.0,
            "memorization stalled at {}%",
            last.train_acc_pct
        );
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let model = ModelParams::init(4, 6, 4, 0.0, 3).unwrap();
        let cfg = TrainConfig::default();
        assert!(train(model, &cfg, &[], &[]).is_err());
    }
}
