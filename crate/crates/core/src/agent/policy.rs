use rand::Rng;

/// Lowest index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn uniform_policy(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Softmax of `values / kappa`. `kappa == 0` gives a point mass on the
/// lowest-index maximum; an infinite `kappa` gives the uniform policy.
pub fn boltzmann(values: &[f64], kappa: f64) -> Vec<f64> {
    assert!(!values.is_empty() && kappa >= 0.0);
    if kappa == 0.0 {
        let mut p = vec![0.0; values.len()];
        p[argmax(values)] = 1.0;
        return p;
    }
    if kappa.is_infinite() {
        return uniform_policy(values.len());
    }
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = values.iter().map(|v| ((v - top) / kappa).exp()).collect();
    let z: f64 = p.iter().sum();
    for x in &mut p {
        *x /= z;
    }
    p
}

/// `1 - eps + eps/N` on the lowest-index maximum, `eps/N` elsewhere.
pub fn epsilon_greedy(values: &[f64], epsilon: f64) -> Vec<f64> {
    assert!(!values.is_empty() && (0.0..=1.0).contains(&epsilon));
    let n = values.len() as f64;
    let mut p = vec![epsilon / n; values.len()];
    p[argmax(values)] += 1.0 - epsilon;
    p
}

/// Draws an index with the given probabilities.
pub fn sample_index<R: Rng + ?Sized>(policy: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in policy.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the total just under 1: take the last index with mass.
    policy.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}
