use super::network::LstmNetwork;
use crate::error::{Error, Result};
use crate::math;

/// RMSProp: `cache = rho*cache + (1-rho)*g^2`, `p -= lr*g/(sqrt(cache)+eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
}

impl RmsProp {
    pub fn step(&self, params: &mut [f64], cache: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() || cache.len() != grads.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), got: grads.len() });
        }
        for ((p, c), g) in params.iter_mut().zip(cache.iter_mut()).zip(grads) {
            *c = self.rho * *c + (1.0 - self.rho) * g * g;
            *p -= self.lr * g / (math::sqrt(*c) + self.eps);
            if !p.is_finite() {
                return Err(Error::Divergence("non-finite parameter after update".into()));
            }
        }
        Ok(())
    }
}

impl LstmNetwork {
    pub fn rmsprop_step(&mut self, grads: &[f64], lr: f64, rho: f64, eps: f64) -> Result<()> {
        let (params, cache) = self.params_and_cache_mut();
        RmsProp { lr, rho, eps }.step(params, cache, grads)
    }
}
