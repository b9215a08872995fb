use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{epsilon_greedy, uniform_policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Multiplier applied to epsilon after every period.
    pub epsilon_decay: f64,
}

impl Default for QParams {
    fn default() -> Self {
        Self { alpha: 0.1, gamma: 0.0, epsilon_start: 1.0, epsilon_min: 0.05, epsilon_decay: 0.995 }
    }
}

/// Tabular Q-learner whose state is the vector of peer policy indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAgent {
    params: QParams,
    actions: usize,
    epsilon: f64,
    state: Vec<usize>,
    #[serde(with = "entries")]
    table: BTreeMap<Vec<usize>, Vec<f64>>,
}

/// JSON object keys must be strings, so the table is stored as a list of pairs.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<Vec<usize>, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Vec<usize>, Vec<f64>>, D::Error> {
        Ok(Vec::<(Vec<usize>, Vec<f64>)>::deserialize(d)?.into_iter().collect())
    }
}

impl QAgent {
    pub fn new(actions: usize, params: QParams) -> Self {
        Self { params, actions, epsilon: params.epsilon_start, state: Vec::new(), table: BTreeMap::new() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn table(&self) -> &BTreeMap<Vec<usize>, Vec<f64>> {
        &self.table
    }

    pub fn values(&self, state: &[usize]) -> Vec<f64> {
        self.table.get(state).cloned().unwrap_or_else(|| vec![0.0; self.actions])
    }

    /// Enters a new period in `state`, decaying epsilon for every period after the first.
    pub fn begin_period(&mut self, state: Vec<usize>, first: bool) {
        if !first {
            self.epsilon = (self.epsilon * self.params.epsilon_decay).max(self.params.epsilon_min);
        }
        self.state = state;
    }

    /// Selection distribution in the current state; an unvisited state is uniform.
    pub fn policy(&self) -> Vec<f64> {
        match self.table.get(&self.state) {
            Some(q) => epsilon_greedy(q, self.epsilon),
            None => uniform_policy(self.actions),
        }
    }

    /// Epsilon-greedy with uniform tie-breaking among the best actions.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            return rng.random_range(0..self.actions);
        }
        let q = self.values(&self.state);
        let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best: Vec<usize> = (0..self.actions).filter(|&i| q[i] == top).collect();
        best[rng.random_range(0..best.len())]
    }

    /// `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`; the state does
    /// not change within a period, so `s' = s`.
    pub fn update(&mut self, action: usize, reward: f64) {
        let n = self.actions;
        let (alpha, gamma) = (self.params.alpha, self.params.gamma);
        let q = self.table.entry(self.state.clone()).or_insert_with(|| vec![0.0; n]);
        let next = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        q[action] += alpha * (reward + gamma * next - q[action]);
    }
}
