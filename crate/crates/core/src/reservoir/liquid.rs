//! Spiking liquid: leaky integrate-and-fire neurons on a 3D grid with
//! distance-dependent random synapses.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ReservoirError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuronKind {
    Excitatory,
    Inhibitory,
}

/// Base connection probability per (presynaptic, postsynaptic) type pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionBase {
    pub ee: f64,
    pub ei: f64,
    pub ie: f64,
    pub ii: f64,
}

impl ConnectionBase {
    pub fn get(&self, pre: NeuronKind, post: NeuronKind) -> f64 {
        use NeuronKind::*;
        match (pre, post) {
            (Excitatory, Excitatory) => self.ee,
            (Excitatory, Inhibitory) => self.ei,
            (Inhibitory, Excitatory) => self.ie,
            (Inhibitory, Inhibitory) => self.ii,
        }
    }
}

impl Default for ConnectionBase {
    fn default() -> Self {
        Self { ee: 0.3, ei: 0.2, ie: 0.4, ii: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams<T> {
    /// Membrane time constant in slots.
    pub tau_slots: T,
    pub threshold: T,
    pub reset: T,
    pub refractory_slots: u32,
}

impl<T: Scalar> Default for LifParams<T> {
    fn default() -> Self {
        Self { tau_slots: T::lit(30.0), threshold: T::one(), reset: T::zero(), refractory_slots: 2 }
    }
}

/// What the liquid reports for each neuron and slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LiquidReadout {
    #[default]
    Membrane,
    /// 1 in a slot where the neuron fired, else 0.
    Spikes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidConfig<T> {
    pub dims: [usize; 3],
    pub excitatory_fraction: f64,
    pub connection_base: ConnectionBase,
    pub length_scale: f64,
    pub input_connect_prob: f64,
    pub lif: LifParams<T>,
    pub slots_per_period: usize,
    /// Current injected per unit of encoded input on a tapped neuron.
    pub input_gain: T,
    /// Postsynaptic current from one excitatory spike (inhibitory ones use `-inhibitory_weight`).
    pub excitatory_weight: T,
    pub inhibitory_weight: T,
    pub readout: LiquidReadout,
}

impl<T: Scalar> Default for LiquidConfig<T> {
    fn default() -> Self {
        Self {
            dims: [5, 5, 5],
            excitatory_fraction: 0.8,
            connection_base: ConnectionBase::default(),
            length_scale: 2.0,
            input_connect_prob: 0.3,
            lif: LifParams::default(),
            slots_per_period: 10,
            input_gain: T::lit(2.0),
            excitatory_weight: T::lit(0.3),
            inhibitory_weight: T::lit(0.6),
            readout: LiquidReadout::Membrane,
        }
    }
}

impl<T: Scalar> LiquidConfig<T> {
    pub fn neurons(&self) -> usize {
        self.dims.iter().product()
    }

    /// Length of one period's trajectory, `N_tau * N_L`.
    pub fn output_len(&self) -> usize {
        self.neurons() * self.slots_per_period
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let c = &self.connection_base;
        if self.neurons() == 0 || self.slots_per_period == 0 {
            return Err(ReservoirError::InvalidConfig("liquid needs at least one neuron and one slot"));
        }
        if ![self.excitatory_fraction, self.input_connect_prob, c.ee, c.ei, c.ie, c.ii].into_iter().all(prob) {
            return Err(ReservoirError::InvalidConfig("probabilities must lie in [0, 1]"));
        }
        if !(self.length_scale > 0.0) {
            return Err(ReservoirError::InvalidConfig("length scale must be > 0"));
        }
        if !(self.lif.tau_slots >= T::one()) {
            return Err(ReservoirError::InvalidConfig("membrane time constant must be >= 1 slot"));
        }
        if !(self.lif.threshold > self.lif.reset) {
            return Err(ReservoirError::InvalidConfig("threshold must exceed the reset potential"));
        }
        Ok(())
    }
}

/// Connection probability between neurons `distance` apart.
pub fn connection_probability(base: f64, distance: f64, length_scale: f64) -> f64 {
    base * (-(distance / length_scale).powi(2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synapse<T> {
    pub pre: usize,
    pub post: usize,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidState<T> {
    config: LiquidConfig<T>,
    input_dim: usize,
    positions: Vec<[usize; 3]>,
    kinds: Vec<NeuronKind>,
    synapses: Vec<Synapse<T>>,
    /// Incoming synapses per postsynaptic neuron, as indices into `synapses`.
    incoming: Vec<Vec<usize>>,
    /// Neurons driven by each input channel.
    taps: Vec<Vec<usize>>,
    membrane: Vec<T>,
    spiked: Vec<bool>,
    refractory: Vec<u32>,
}

/// Places neurons on the grid, assigns types and samples synapses and input
/// taps. Deterministic in `seed`.
pub fn build_liquid<T: Scalar>(config: &LiquidConfig<T>, input_dim: usize, seed: u64) -> Result<LiquidState<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.neurons();
    let [l1, l2, l3] = config.dims;
    let positions: Vec<[usize; 3]> = (0..n).map(|k| [k % l1, (k / l1) % l2, k / (l1 * l2)]).collect();
    debug_assert!(positions.iter().all(|p| p[2] < l3));

    let n_exc = (config.excitatory_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut kinds = vec![NeuronKind::Inhibitory; n];
    for &k in &order[..n_exc] {
        kinds[k] = NeuronKind::Excitatory;
    }

    let mut synapses = Vec::new();
    let mut incoming = vec![Vec::new(); n];
    for pre in 0..n {
        for post in 0..n {
            if pre == post {
                continue;
            }
            let d = grid_distance(positions[pre], positions[post]);
            let p = connection_probability(config.connection_base.get(kinds[pre], kinds[post]), d, config.length_scale);
            if rng.random::<f64>() < p {
                let weight = match kinds[pre] {
                    NeuronKind::Excitatory => config.excitatory_weight,
                    NeuronKind::Inhibitory => -config.inhibitory_weight,
                };
                incoming[post].push(synapses.len());
                synapses.push(Synapse { pre, post, weight });
            }
        }
    }
    let taps = (0..input_dim)
        .map(|_| (0..n).filter(|_| rng.random::<f64>() < config.input_connect_prob).collect())
        .collect();

    Ok(LiquidState {
        config: config.clone(),
        input_dim,
        positions,
        kinds,
        synapses,
        incoming,
        taps,
        membrane: vec![config.lif.reset; n],
        spiked: vec![false; n],
        refractory: vec![0; n],
    })
}

pub fn grid_distance(a: [usize; 3], b: [usize; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
}

impl<T: Scalar> LiquidState<T> {
    pub fn config(&self) -> &LiquidConfig<T> {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn neurons(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[NeuronKind] {
        &self.kinds
    }

    pub fn positions(&self) -> &[[usize; 3]] {
        &self.positions
    }

    pub fn synapses(&self) -> &[Synapse<T>] {
        &self.synapses
    }

    pub fn taps(&self) -> &[Vec<usize>] {
        &self.taps
    }

    pub fn membrane(&self) -> &[T] {
        &self.membrane
    }

    pub fn reset_state(&mut self) {
        self.membrane.fill(self.config.lif.reset);
        self.spiked.fill(false);
        self.refractory.fill(0);
    }

    /// Advances one slot with a constant external current per neuron.
    /// Spikes of the previous slot arrive through the synapses.
    pub fn step_slot(&mut self, external: &[T]) {
        let lif = self.config.lif;
        let leak = T::one() / lif.tau_slots;
        let mut next_spiked = vec![false; self.neurons()];
        for k in 0..self.neurons() {
            if self.refractory[k] > 0 {
                self.refractory[k] -= 1;
                self.membrane[k] = lif.reset;
                continue;
            }
            let mut current = external[k];
            for &s in &self.incoming[k] {
                let syn = &self.synapses[s];
                if self.spiked[syn.pre] {
                    current += syn.weight;
                }
            }
            let v = self.membrane[k];
            let v = v + leak * (current - v);
            if v >= lif.threshold {
                next_spiked[k] = true;
                self.membrane[k] = lif.reset;
                self.refractory[k] = lif.refractory_slots;
            } else {
                self.membrane[k] = v;
            }
        }
        self.spiked = next_spiked;
    }

    /// External current per neuron produced by an encoded input vector.
    pub fn input_current(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.input_dim {
            return Err(ReservoirError::Dimension { what: "liquid input", expected: self.input_dim, got: input.len() });
        }
        let mut current = vec![T::zero(); self.neurons()];
        for (x, taps) in input.iter().zip(&self.taps) {
            for &k in taps {
                current[k] += self.config.input_gain * *x;
            }
        }
        Ok(current)
    }

    /// Runs one period with a constant input and returns the concatenated
    /// per-slot readout, `N_tau * N_L` values.
    pub fn step_period(&mut self, input: &[T]) -> Result<Vec<T>> {
        let current = self.input_current(input)?;
        let slots = self.config.slots_per_period;
        let mut out = Vec::with_capacity(slots * self.neurons());
        for _ in 0..slots {
            self.step_slot(&current);
            match self.config.readout {
                LiquidReadout::Membrane => out.extend_from_slice(&self.membrane),
                LiquidReadout::Spikes => out.extend(self.spiked.iter().map(|s| if *s { T::one() } else { T::zero() })),
            }
        }
        Ok(out)
    }
}

/// Encodes a policy index out of `n_policies` as `(index + 1) / n_policies`.
pub fn encode_policy_index<T: Scalar>(index: usize, n_policies: usize) -> T {
    T::from_count(index as u64 + 1) / T::from_count(n_policies.max(1) as u64)
}

/// Slots from reset to the first spike under a constant supra-threshold
/// current, by solving the discrete leaky recursion in closed form.
pub fn first_spike_slot(lif: &LifParams<f64>, current: f64) -> Option<u64> {
    let gap = (lif.threshold - lif.reset) / (current - lif.reset);
    if !(current > lif.threshold) {
        return None;
    }
    let n = (1.0 - gap).ln() / (1.0 - 1.0 / lif.tau_slots).ln();
    Some(n.ceil().max(1.0) as u64)
}
