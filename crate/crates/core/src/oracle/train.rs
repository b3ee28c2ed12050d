use std::fmt::Write as _;

use serde::Serialize;

use super::FiniteWidthNet;
use crate::{DiffusionOperator, Error, Matrix, NodeDataset, Result, Vector};

const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Squared loss over labeled nodes before each update.
    pub loss: Vec<f64>,
    /// Test accuracy before each update; `NaN` when the test set is empty.
    pub test_accuracy: Vec<f64>,
}

impl TrainReport {
    /// `epoch,loss,test_accuracy` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,test_accuracy\n");
        for (epoch, (loss, acc)) in self.loss.iter().zip(&self.test_accuracy).enumerate() {
            let _ = writeln!(out, "{epoch},{loss:e},{acc}");
        }
        out
    }
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Full-batch gradient descent on `Σ_{i ∈ train} (F_i − y_i)²`.
///
/// Only the weights `W_i` are updated; the skip transform stays fixed.
pub fn train(
    mut net: FiniteWidthNet,
    s: &DiffusionOperator,
    data: &NodeDataset,
    config: TrainConfig,
) -> Result<(FiniteWidthNet, TrainReport)> {
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be non-negative, got {}",
            config.learning_rate
        )));
    }
    if data.train_ids().is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let x: &Matrix = data.features();
    let n = s.n();
    let y_obs = data.y_obs();
    let y_test = data.y_test();
    let mut report = TrainReport {
        loss: Vec::with_capacity(config.epochs),
        test_accuracy: Vec::with_capacity(config.epochs),
    };
    for epoch in 0..config.epochs {
        let trace = net.forward(s, x)?;
        let mut seed = Vector::zeros(n);
        let mut loss = 0.0;
        for (&id, &y) in data.train_ids().iter().zip(&y_obs) {
            let r = trace.output[id] - y;
            loss += r * r;
            seed[id] = 2.0 * r;
        }
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence { epoch, loss });
        }
        let correct = data
            .test_ids()
            .iter()
            .zip(&y_test)
            .filter(|(&id, &y)| sign(trace.output[id]) == y)
            .count();
        let accuracy = if y_test.is_empty() {
            f64::NAN
        } else {
            correct as f64 / y_test.len() as f64
        };
        report.loss.push(loss);
        report.test_accuracy.push(accuracy);
        log::debug!("epoch {epoch}: loss {loss:e}, test accuracy {accuracy}");

        if config.learning_rate == 0.0 {
            continue;
        }
        let signals = net.backward(s, &trace, std::slice::from_ref(&seed))?;
        let lr = config.learning_rate;
        for ((w, g), b) in net.weights_mut().iter_mut().zip(&trace.g).zip(&signals) {
            *w -= (g.transpose() * &b[0]) * lr;
        }
    }
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::{Activation, ArchitectureSpec, OutputHead};

    fn toy() -> (DiffusionOperator, NodeDataset) {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let split = Split {
            train: vec![0],
            test: vec![1],
        };
        let data = NodeDataset::new(x, vec![Some(1.0), Some(-1.0)], split).unwrap();
        (DiffusionOperator::identity(2), data)
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let (s, data) = toy();
        let arch = ArchitectureSpec::vanilla(Activation::Relu, 2);
        let net = FiniteWidthNet::sample(arch, 2, 8, 4).unwrap();
        let before = net.weights().to_vec();
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
        };
        let (after, report) = train(net, &s, &data, config).unwrap();
        assert_eq!(after.weights(), &before[..]);
        assert!(report.loss.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_labeled_node_loss_decreases() {
        let (s, data) = toy();
        let arch =
            ArchitectureSpec::vanilla(Activation::Linear, 1).with_output_head(OutputHead::Identity);
        let net = FiniteWidthNet::sample(arch, 2, 8, 4).unwrap();
        let config = TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
        };
        let (_, report) = train(net, &s, &data, config).unwrap();
        assert!(report.loss.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn identical_seeds_identical_curves() {
        let (s, data) = toy();
        let arch = ArchitectureSpec::skip_alpha(Activation::Relu, Activation::Relu, 0.3, 2);
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 20,
        };
        let run = |seed| {
            let net = FiniteWidthNet::sample(arch, 2, 8, seed).unwrap();
            train(net, &s, &data, config).unwrap().1
        };
        assert_eq!(run(9), run(9));
        assert!(run(9).to_csv().starts_with("epoch,loss,test_accuracy\n0,"));
    }

    #[test]
    fn divergence_is_reported() {
        let (s, data) = toy();
        let arch =
            ArchitectureSpec::vanilla(Activation::Linear, 2).with_output_head(OutputHead::Identity);
        let net = FiniteWidthNet::sample(arch, 2, 8, 4).unwrap();
        let config = TrainConfig {
            learning_rate: 50.0,
            epochs: 200,
        };
        assert!(matches!(
            train(net, &s, &data, config),
            Err(Error::Divergence { .. })
        ));
    }
}
