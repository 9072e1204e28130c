use serde::{Deserialize, Serialize};

use super::net::{backward, forward, LstmParams};
use super::{LstmError, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Most recent share of the samples held out for early stopping.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            layers: 1,
            epochs: 500,
            learning_rate: 0.01,
            optimizer: Optimizer::adam(),
            seed: 0,
            validation_fraction: 0.1,
            patience: 50,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::InvalidConfig(m.into()));
        if self.hidden_size == 0 || self.layers == 0 {
            return bad("hidden size and layer count must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: LstmParams,
    pub history: Vec<EpochLoss>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

fn mean_loss(params: &LstmParams, samples: &[Sample]) -> Result<f64, LstmError> {
    let mut total = 0.0;
    for s in samples {
        total += (forward(params, &s.inputs)?.0 - s.target).powi(2);
    }
    Ok(total / samples.len() as f64)
}

/// Mean loss and mean gradient over `samples`.
fn batch_gradient(params: &LstmParams, samples: &[Sample]) -> Result<(f64, Vec<f64>), LstmError> {
    let mut grad = vec![0.0; params.parameter_count()];
    let mut loss = 0.0;
    for s in samples {
        let (y, cache) = forward(params, &s.inputs)?;
        loss += (y - s.target).powi(2);
        for (g, d) in grad.iter_mut().zip(backward(params, &cache, s.target).flatten()) {
            *g += d;
        }
    }
    let n = samples.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Full-batch training under mean squared error.
///
/// The last `floor(n * validation_fraction)` samples (at most `n - 1`) form
/// the validation set. With a validation set, training stops after
/// `patience` epochs without improvement and the best parameters are kept;
/// without one, all epochs run and the final parameters are returned.
pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<Trained, LstmError> {
    cfg.validate()?;
    let first = samples.first().ok_or(LstmError::EmptyDataset)?;
    let inputs = first.inputs.first().map_or(0, Vec::len);
    let n_val = ((samples.len() as f64 * cfg.validation_fraction).floor() as usize).min(samples.len() - 1);
    let (train_set, val_set) = samples.split_at(samples.len() - n_val);

    let mut params = LstmParams::glorot(inputs, cfg.hidden_size, cfg.layers, cfg.seed);
    let mut flat = params.flatten();
    let mut m = vec![0.0; flat.len()];
    let mut v = vec![0.0; flat.len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let (loss, mut grad) = batch_gradient(&params, train_set)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        if let Some(clip) = cfg.clip_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > clip {
                grad.iter_mut().for_each(|g| *g *= clip / norm);
            }
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in flat.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(epoch as i32);
                let c2 = 1.0 - beta2.powi(epoch as i32);
                for k in 0..flat.len() {
                    m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                    v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    flat[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + epsilon);
                }
            }
        }
        params.assign(&flat);

        let validation = if val_set.is_empty() {
            None
        } else {
            let l = mean_loss(&params, val_set)?;
            if !l.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch });
            }
            Some(l)
        };
        history.push(EpochLoss {
            epoch,
            train: loss,
            validation,
        });
        if let Some(l) = validation {
            if l < best.0 {
                best = (l, params.clone(), epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    if !params.is_finite() {
        return Err(LstmError::NonFiniteLoss { epoch: history.len() });
    }
    let (params, best_epoch) = if val_set.is_empty() || best.2 == 0 {
        (params, history.len())
    } else {
        (best.1, best.2)
    };
    Ok(Trained {
        params,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn constant_dataset(n: usize, value: f64) -> Vec<Sample> {
        let mut rng = SplitMix64::new(2);
        (0..n)
            .map(|_| Sample {
                inputs: (0..3).map(|_| vec![rng.next_f64()]).collect(),
                target: value,
            })
            .collect()
    }

    #[test]
    fn empty_dataset_rejected() {
        assert_eq!(train(&[], &TrainConfig::default()).unwrap_err(), LstmError::EmptyDataset);
    }

    #[test]
    fn learns_constant_target() {
        let data = constant_dataset(20, 0.7);
        let cfg = TrainConfig {
            epochs: 200,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        let t = train(&data, &cfg).unwrap();
        let mse = mean_loss(&t.params, &data).unwrap();
        assert!(mse < 1e-3, "{mse}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = constant_dataset(12, 0.3);
        let cfg = TrainConfig {
            epochs: 20,
            hidden_size: 5,
            ..TrainConfig::default()
        };
        assert_eq!(train(&data, &cfg).unwrap(), train(&data, &cfg).unwrap());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let mut rng = SplitMix64::new(4);
        let data: Vec<Sample> = (0..15)
            .map(|k| Sample {
                inputs: (0..3).map(|_| vec![rng.next_f64()]).collect(),
                target: (k as f64 * 0.4).sin(),
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 1e3,
            optimizer: Optimizer::Sgd,
            clip_norm: None,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&data, &cfg), Err(LstmError::NonFiniteLoss { .. })));
    }

    #[test]
    fn sgd_loss_non_increasing_on_linear_data() {
        let mut rng = SplitMix64::new(6);
        let data: Vec<Sample> = (0..30)
            .map(|_| {
                let inputs: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.next_f64()]).collect();
                let target = 0.2 + 0.5 * inputs[2][0] + 0.1 * inputs[1][0];
                Sample { inputs, target }
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            optimizer: Optimizer::Sgd,
            validation_fraction: 0.0,
            hidden_size: 4,
            ..TrainConfig::default()
        };
        let t = train(&data, &cfg).unwrap();
        for w in t.history.windows(2) {
            assert!(w[1].train <= w[0].train, "{:?}", w);
        }
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let mut rng = SplitMix64::new(8);
        let data: Vec<Sample> = (0..30)
            .map(|_| Sample {
                inputs: (0..2).map(|_| vec![rng.next_f64()]).collect(),
                target: rng.next_f64(),
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 300,
            patience: 5,
            validation_fraction: 0.3,
            hidden_size: 8,
            ..TrainConfig::default()
        };
        let t = train(&data, &cfg).unwrap();
        let best = t.history[t.best_epoch - 1].validation.unwrap();
        assert!(t.history.iter().all(|h| h.validation.unwrap() >= best));
        assert!(t.history.len() <= t.best_epoch + 5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let data = constant_dataset(3, 0.0);
        for cfg in [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
            TrainConfig { hidden_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&data, &cfg), Err(LstmError::InvalidConfig(_))));
        }
    }
}
