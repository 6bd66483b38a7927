//! Stacked LSTM next-frame predictor trained with truncated BPTT and RMSProp.
//!
//! Two flavours share the same machinery: a categorical model (one-hot
//! input, softmax output, cross-entropy) and a continuous model (raw
//! feature input, linear output, mean squared error).

mod backprop;
mod config;
mod network;
mod optim;
mod train;

pub use backprop::{BpttOutput, Targets};
pub use config::{NetworkConfig, PredictorKind};
pub use network::{init_network, DropoutMasks, Layout, LstmNetwork, LstmState, Normalizer};
pub use optim::RmsProp;
pub use train::{
    make_skip_mask, nn_error_signal, skip_mask_with, train_predictor, EpochStats, SequenceRef,
    TrainingData, TrainingReport,
};

/// Floor applied to a predicted probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(predicted[target])`, with the probability floored at [`PROB_FLOOR`].
pub fn loss_categorical(predicted: &[f64], target: usize) -> f64 {
    -crate::math::ln(predicted[target].max(PROB_FLOOR))
}

/// `(1/d) * sum (x_i - y_i)^2`.
pub fn loss_mse(predicted: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), target.len());
    let d = predicted.len() as f64;
    predicted.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_loss_values() {
        assert!((loss_categorical(&[0.125; 8], 5) - 8f64.ln()).abs() < 1e-15);
        let mut one = [0.0; 8];
        one[2] = 1.0;
        assert_eq!(loss_categorical(&one, 2), 0.0);
        let p = [0.7, 0.1, 0.05, 0.05, 0.05, 0.05, 0.0, 0.0];
        assert!((loss_categorical(&p, 0) - 0.356_674_943_938_732_4).abs() < 1e-15);
        assert!((loss_categorical(&p, 7) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn mse_values() {
        let x = [0.5; 13];
        assert_eq!(loss_mse(&x, &x), 0.0);
        let mut y = x;
        y[4] += 1.0;
        assert!((loss_mse(&x, &y) - 1.0 / 13.0).abs() < 1e-15);
    }
}
