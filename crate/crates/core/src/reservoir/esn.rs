//! Echo state network with a trainable linear readout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ReservoirError, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// Squarings used when measuring the spectral radius (`A^(2^40)`).
pub const SPECTRAL_SQUARINGS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReadoutRule {
    /// `w += lr * err * x`.
    Plain,
    /// `w += lr * err * x / |x|^2`.
    #[default]
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnConfig<T> {
    pub reservoir_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub spectral_radius: T,
    pub input_scaling: T,
    pub learning_rate: T,
    /// Scale the learning rate by `1/sqrt(n)` on the n-th update of a row.
    pub decay: bool,
    pub rule: ReadoutRule,
}

impl<T: Scalar> EsnConfig<T> {
    pub fn new(reservoir_size: usize, input_dim: usize, output_dim: usize) -> Self {
        Self {
            reservoir_size,
            input_dim,
            output_dim,
            spectral_radius: T::lit(0.9),
            input_scaling: T::one(),
            learning_rate: T::lit(0.01),
            decay: false,
            rule: ReadoutRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reservoir_size == 0 || self.output_dim == 0 {
            return Err(ReservoirError::InvalidConfig("reservoir and output sizes must be >= 1"));
        }
        if !(self.spectral_radius >= T::zero()) {
            return Err(ReservoirError::InvalidConfig("spectral radius must be >= 0"));
        }
        if !(self.learning_rate >= T::zero()) {
            return Err(ReservoirError::InvalidConfig("learning rate must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnState<T> {
    config: EsnConfig<T>,
    w_in: Matrix<T>,
    w: Matrix<T>,
    w_out: Matrix<T>,
    state: Vec<T>,
    row_updates: Vec<u64>,
}

/// Random dense `W_in` and `W`, with `W` rescaled to the configured spectral
/// radius; zero readout. Deterministic in `seed`.
///
/// A radius of 1 or more is accepted so the loss of the echo state property
/// can be demonstrated; callers wanting the property keep it below 1.
pub fn build_esn<T: Scalar>(config: &EsnConfig<T>, seed: u64) -> Result<EsnState<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.reservoir_size;
    let in_scale = config.input_scaling / T::from_count(config.input_dim.max(1) as u64).sqrt();
    let w_in = Matrix::from_fn(n, config.input_dim, |_, _| T::lit(rng.random_range(-1.0..1.0)) * in_scale);
    let mut w = Matrix::from_fn(n, n, |_, _| T::lit(rng.random_range(-1.0..1.0)));
    let rho = w.spectral_radius(SPECTRAL_SQUARINGS);
    if rho > T::zero() {
        w.scale(config.spectral_radius / rho);
    }
    Ok(EsnState {
        config: config.clone(),
        w_in,
        w,
        w_out: Matrix::zeros(config.output_dim, n + config.input_dim),
        state: vec![T::zero(); n],
        row_updates: vec![0; config.output_dim],
    })
}

impl<T: Scalar> EsnState<T> {
    pub fn config(&self) -> &EsnConfig<T> {
        &self.config
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn set_state(&mut self, state: Vec<T>) -> Result<()> {
        self.check("reservoir state", self.config.reservoir_size, state.len())?;
        self.state = state;
        Ok(())
    }

    pub fn recurrent(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn input_weights(&self) -> &Matrix<T> {
        &self.w_in
    }

    pub fn readout(&self) -> &Matrix<T> {
        &self.w_out
    }

    pub fn readout_mut(&mut self) -> &mut Matrix<T> {
        &mut self.w_out
    }

    fn check(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(ReservoirError::Dimension { what, expected, got });
        }
        Ok(())
    }

    /// `W_in * phi`; constant over a period, so callers may cache it.
    pub fn drive(&self, phi: &[T]) -> Result<Vec<T>> {
        self.check("reservoir input", self.config.input_dim, phi.len())?;
        Ok(self.w_in.mul_vec(phi))
    }

    /// `mu <- tanh(W mu + drive)`.
    pub fn update_with_drive(&mut self, drive: &[T]) -> Result<()> {
        self.check("reservoir drive", self.config.reservoir_size, drive.len())?;
        let mut next = self.w.mul_vec(&self.state);
        for (x, d) in next.iter_mut().zip(drive) {
            *x = (*x + *d).tanh();
        }
        self.state = next;
        Ok(())
    }

    pub fn update(&mut self, phi: &[T]) -> Result<()> {
        let d = self.drive(phi)?;
        self.update_with_drive(&d)
    }

    fn features(&self, phi: &[T]) -> Result<Vec<T>> {
        self.check("readout input", self.config.input_dim, phi.len())?;
        let mut x = Vec::with_capacity(self.state.len() + phi.len());
        x.extend_from_slice(&self.state);
        x.extend_from_slice(phi);
        Ok(x)
    }

    /// `y = W_out [mu; phi]`.
    pub fn predict(&self, phi: &[T]) -> Result<Vec<T>> {
        let x = self.features(phi)?;
        Ok(self.w_out.mul_vec(&x))
    }

    pub fn predict_one(&self, action: usize, phi: &[T]) -> Result<T> {
        self.check_action(action)?;
        let x = self.features(phi)?;
        Ok(dot(self.w_out.row(action), &x))
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.config.output_dim {
            return Err(ReservoirError::ActionOutOfRange { action, outputs: self.config.output_dim });
        }
        Ok(())
    }

    /// Moves row `action` of the readout toward `observed`; no other row changes.
    pub fn train_step(&mut self, action: usize, observed: T, predicted: T, phi: &[T]) -> Result<()> {
        self.check_action(action)?;
        let x = self.features(phi)?;
        self.row_updates[action] += 1;
        let mut lr = self.config.learning_rate;
        if self.config.decay {
            lr = lr / T::from_count(self.row_updates[action]).sqrt();
        }
        let err = observed - predicted;
        let step = match self.config.rule {
            ReadoutRule::Plain => lr * err,
            ReadoutRule::Normalized => {
                let n2 = dot(&x, &x);
                if n2 > T::zero() {
                    lr * err / n2
                } else {
                    T::zero()
                }
            }
        };
        if step == T::zero() {
            return Ok(());
        }
        for (w, xi) in self.w_out.row_mut(action).iter_mut().zip(&x) {
            *w += step * *xi;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, input: usize, out: usize) -> EsnConfig<f64> {
        EsnConfig::new(n, input, out)
    }

    #[test]
    fn spectral_radius_matches_eigen_solver() {
        for seed in 0..5 {
            let esn = build_esn(&cfg(60, 4, 2), seed).unwrap();
            let w = esn.recurrent();
            let m = nalgebra::DMatrix::from_fn(60, 60, |i, j| w.get(i, j));
            let rho = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((rho - 0.9).abs() < 1e-6, "seed {seed}: {rho}");
        }
    }

    #[test]
    fn zero_readout_predicts_zero() {
        let mut esn = build_esn(&cfg(20, 3, 4), 1).unwrap();
        esn.update(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(esn.predict(&[0.1, 0.2, 0.3]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn same_seed_same_matrices() {
        assert_eq!(build_esn(&cfg(30, 5, 3), 7).unwrap(), build_esn(&cfg(30, 5, 3), 7).unwrap());
        assert_ne!(build_esn(&cfg(30, 5, 3), 7).unwrap(), build_esn(&cfg(30, 5, 3), 8).unwrap());
    }

    #[test]
    fn zero_input_keeps_zero_state() {
        let mut esn = build_esn(&cfg(20, 3, 1), 1).unwrap();
        esn.update(&[0.0; 3]).unwrap();
        assert!(esn.state().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_from_zero_is_tanh_of_drive() {
        let mut esn = build_esn(&cfg(10, 3, 1), 2).unwrap();
        let phi = [0.5, -1.0, 2.0];
        let expected: Vec<f64> = (0..10)
            .map(|i| (0..3).map(|j| esn.input_weights().get(i, j) * phi[j]).sum::<f64>().tanh())
            .collect();
        esn.update(&phi).unwrap();
        for (a, b) in esn.state().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_readout_selects_state() {
        let mut esn = build_esn(&cfg(10, 2, 1), 3).unwrap();
        esn.update(&[1.0, 0.5]).unwrap();
        esn.readout_mut().set(0, 0, 1.0);
        assert_eq!(esn.predict(&[1.0, 0.5]).unwrap()[0], esn.state()[0]);
    }

    #[test]
    fn zero_error_leaves_readout() {
        let mut esn = build_esn(&cfg(10, 2, 3), 3).unwrap();
        esn.update(&[1.0, 0.5]).unwrap();
        let before = esn.readout().clone();
        esn.train_step(1, 0.0, 0.0, &[1.0, 0.5]).unwrap();
        assert_eq!(esn.readout(), &before);
    }

    #[test]
    fn unit_feature_update_adds_exact_error() {
        for rule in [ReadoutRule::Plain, ReadoutRule::Normalized] {
            let mut c = cfg(4, 1, 2);
            c.learning_rate = 1.0;
            c.rule = rule;
            let mut esn = build_esn(&c, 0).unwrap();
            esn.set_state(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
            esn.train_step(1, 0.75, 0.25, &[0.0]).unwrap();
            assert_eq!(esn.readout().get(1, 2), 0.5);
            assert_eq!(esn.readout().row(0), &[0.0; 5]);
            assert_eq!(esn.readout().row(1).iter().filter(|v| **v != 0.0).count(), 1);
        }
    }

    #[test]
    fn lms_converges_on_stationary_target() {
        let mut c = cfg(20, 3, 2);
        c.rule = ReadoutRule::Plain;
        let mut esn = build_esn(&c, 5).unwrap();
        let phi = [0.3, -0.2, 0.9];
        esn.update(&phi).unwrap();
        let x2: f64 = esn.state().iter().chain(&phi).map(|v| v * v).sum();
        esn.config.learning_rate = 1.0 / x2;
        let target = 3.0;
        let mut errs = Vec::new();
        for _ in 0..60 {
            let y = esn.predict_one(0, &phi).unwrap();
            errs.push((target - y).abs());
            esn.train_step(0, target, y, &phi).unwrap();
        }
        assert!(errs.last().unwrap() < &1e-9);
        // Geometric: the ratio of successive errors is the scalar LMS factor |1 - lr |x|^2| = 0.
        let mut c = cfg(20, 3, 1);
        c.rule = ReadoutRule::Plain;
        let mut esn = build_esn(&c, 5).unwrap();
        esn.update(&phi).unwrap();
        esn.config.learning_rate = 0.5 / x2;
        let mut prev = target;
        for _ in 0..20 {
            let y = esn.predict_one(0, &phi).unwrap();
            let e = target - y;
            assert!((e.abs() - 0.5 * prev.abs()).abs() < 1e-9 * target || prev == target);
            prev = e;
            esn.train_step(0, target, y, &phi).unwrap();
        }
    }

    #[test]
    fn dimension_errors() {
        let mut esn = build_esn(&cfg(10, 3, 2), 0).unwrap();
        assert!(matches!(esn.update(&[0.0; 2]), Err(ReservoirError::Dimension { .. })));
        assert!(matches!(esn.predict(&[0.0; 4]), Err(ReservoirError::Dimension { .. })));
        assert!(matches!(esn.train_step(2, 1.0, 0.0, &[0.0; 3]), Err(ReservoirError::ActionOutOfRange { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut esn = build_esn(&cfg(10, 3, 2), 0).unwrap();
        esn.update(&[0.2, 0.1, 0.0]).unwrap();
        esn.train_step(0, 1.0, 0.0, &[0.2, 0.1, 0.0]).unwrap();
        let json = serde_json::to_string(&esn).unwrap();
        let back: EsnState<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, esn);
    }
}
