//! Spiking liquid feeding an echo state network whose linear readout
//! predicts the value of each action.

mod esn;
mod liquid;

pub use esn::*;
pub use liquid::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReservoirError {
    #[error("invalid reservoir configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("action {action} out of range for {outputs} outputs")]
    ActionOutOfRange { action: usize, outputs: usize },
}

pub type Result<T> = std::result::Result<T, ReservoirError>;

/// Liquid plus ESN. Without a liquid the ESN reads the encoded input directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elsm<T> {
    liquid: Option<LiquidState<T>>,
    esn: EsnState<T>,
    /// Trajectory of the current period and its cached `W_in * phi`.
    phi: Vec<T>,
    drive: Vec<T>,
}

impl<T: Scalar> Elsm<T> {
    /// `input_dim` is the number of encoded policy indices fed per period.
    pub fn new(
        liquid: Option<&LiquidConfig<T>>,
        esn: &EsnConfig<T>,
        input_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let liquid = match liquid {
            Some(cfg) => Some(build_liquid(cfg, input_dim, seed)?),
            None => None,
        };
        let feature_dim = liquid.as_ref().map_or(input_dim, |l| l.config().output_len());
        let mut esn_cfg = esn.clone();
        esn_cfg.input_dim = feature_dim;
        let esn = build_esn(&esn_cfg, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        Ok(Self { liquid, esn, phi: vec![T::zero(); feature_dim], drive: vec![T::zero(); esn_cfg.reservoir_size] })
    }

    pub fn esn(&self) -> &EsnState<T> {
        &self.esn
    }

    pub fn liquid(&self) -> Option<&LiquidState<T>> {
        self.liquid.as_ref()
    }

    pub fn outputs(&self) -> usize {
        self.esn.config().output_dim
    }

    pub fn features(&self) -> &[T] {
        &self.phi
    }

    /// Runs the liquid for one period on `input` and caches the ESN drive.
    pub fn begin_period(&mut self, input: &[T]) -> Result<()> {
        self.phi = match &mut self.liquid {
            Some(l) => l.step_period(input)?,
            None => {
                if input.len() != self.phi.len() {
                    return Err(ReservoirError::Dimension { what: "ELSM input", expected: self.phi.len(), got: input.len() });
                }
                input.to_vec()
            }
        };
        self.drive = self.esn.drive(&self.phi)?;
        Ok(())
    }

    pub fn predict(&self) -> Result<Vec<T>> {
        self.esn.predict(&self.phi)
    }

    pub fn predict_one(&self, action: usize) -> Result<T> {
        self.esn.predict_one(action, &self.phi)
    }

    pub fn update_reservoir(&mut self) -> Result<()> {
        self.esn.update_with_drive(&self.drive)
    }

    pub fn train(&mut self, action: usize, observed: T, predicted: T) -> Result<()> {
        self.esn.train_step(action, observed, predicted, &self.phi)
    }
}

/// Drives two copies of `esn` from different states with the same inputs and
/// returns the distance between them after each step.
pub fn twin_distances<T: Scalar>(esn: &EsnState<T>, start_a: Vec<T>, start_b: Vec<T>, inputs: &[Vec<T>]) -> Result<Vec<T>> {
    let mut a = esn.clone();
    let mut b = esn.clone();
    a.set_state(start_a)?;
    b.set_state(start_b)?;
    let mut out = Vec::with_capacity(inputs.len());
    for u in inputs {
        a.update(u)?;
        b.update(u)?;
        let d = a.state().iter().zip(b.state()).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y));
        out.push(d.sqrt());
    }
    Ok(out)
}
