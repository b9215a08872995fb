//! Checks comparing Boltzmann and epsilon-greedy exploration: in the two
//! limits they select identically, and when the peers' Boltzmann policies put
//! more mass on their best actions, the expected reliability of an agent's
//! best action is larger.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::policy::{boltzmann, epsilon_greedy, sample_index};

pub fn selection_counts(policy: &[f64], draws: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; policy.len()];
    for _ in 0..draws {
        counts[sample_index(policy, &mut rng)] += 1;
    }
    counts
}

/// p-value of the chi-square test that two count vectors come from the same
/// categorical distribution. Categories empty in both are dropped; one shared
/// category left means the samples are identical and gives 1.
pub fn homogeneity_p_value(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let n = na + nb;
    let mut stat = 0.0;
    let mut cells = 0;
    for (x, y) in a.iter().zip(b) {
        let col = (*x + *y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        for (obs, row) in [(*x as f64, na), (*y as f64, nb)] {
            let e = row * col / n;
            stat += (obs - e).powi(2) / e;
        }
    }
    if cells <= 1 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).expect("df >= 1").cdf(stat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitVerdict {
    pub boltzmann: Vec<f64>,
    pub epsilon_greedy: Vec<f64>,
    pub boltzmann_counts: Vec<u64>,
    pub epsilon_counts: Vec<u64>,
    pub p_value: f64,
}

impl LimitVerdict {
    pub fn indistinguishable(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Samples both selection rules on the same value vector and tests whether the
/// empirical distributions differ.
pub fn limit_case(values: &[f64], kappa: f64, epsilon: f64, draws: usize, seed: u64) -> LimitVerdict {
    let b = boltzmann(values, kappa);
    let e = epsilon_greedy(values, epsilon);
    let bc = selection_counts(&b, draws, seed);
    let ec = selection_counts(&e, draws, seed.wrapping_add(1));
    let p_value = homogeneity_p_value(&bc, &ec);
    LimitVerdict { boltzmann: b, epsilon_greedy: e, boltzmann_counts: bc, epsilon_counts: ec, p_value }
}

/// Expected reward of a fixed own action when each peer acts independently by
/// its policy, by enumerating every peer profile.
pub fn expected_reward(peer_policies: &[Vec<f64>], reward: &dyn Fn(&[usize]) -> f64) -> f64 {
    let mut profile = vec![0usize; peer_policies.len()];
    let mut total = 0.0;
    loop {
        let p: f64 = profile.iter().zip(peer_policies).map(|(a, pol)| pol[*a]).product();
        if p > 0.0 {
            total += p * reward(&profile);
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == profile.len() {
                return total;
            }
            profile[k] += 1;
            if profile[k] < peer_policies[k].len() {
                break;
            }
            profile[k] = 0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingVerdict {
    pub exact_boltzmann: f64,
    pub exact_epsilon: f64,
    pub mc_difference: f64,
    /// Lower end of the one-sided 95% interval for the Monte-Carlo difference.
    pub mc_lower: f64,
}

impl OrderingVerdict {
    pub fn holds(&self) -> bool {
        self.exact_boltzmann > self.exact_epsilon && self.mc_lower > 0.0
    }
}

/// Compares the expected reward of the own best action when the peers explore
/// with Boltzmann versus epsilon-greedy policies over `peer_values`.
pub fn ordering_case(
    peer_values: &[Vec<f64>],
    kappa: f64,
    epsilon: f64,
    reward: &dyn Fn(&[usize]) -> f64,
    samples: usize,
    seed: u64,
) -> OrderingVerdict {
    let bp: Vec<Vec<f64>> = peer_values.iter().map(|v| boltzmann(v, kappa)).collect();
    let ep: Vec<Vec<f64>> = peer_values.iter().map(|v| epsilon_greedy(v, epsilon)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |policies: &[Vec<f64>], rng: &mut ChaCha8Rng| {
        let profile: Vec<usize> = policies.iter().map(|p| sample_index(p, rng)).collect();
        reward(&profile)
    };
    let (mut sb, mut sb2, mut se, mut se2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let x = draw(&bp, &mut rng);
        let y = draw(&ep, &mut rng);
        sb += x;
        sb2 += x * x;
        se += y;
        se2 += y * y;
    }
    let n = samples as f64;
    let (mb, me) = (sb / n, se / n);
    let var = (sb2 / n - mb * mb) / n + (se2 / n - me * me) / n;
    let z = Normal::standard().inverse_cdf(0.95);
    OrderingVerdict {
        exact_boltzmann: expected_reward(&bp, reward),
        exact_epsilon: expected_reward(&ep, reward),
        mc_difference: mb - me,
        mc_lower: mb - me - z * var.max(0.0).sqrt(),
    }
}

/// Two peers with four actions each whose Boltzmann policy at `kappa = 1`
/// puts 0.8 on action 0 while epsilon-greedy with the returned epsilon puts
/// 0.6 there; the own best action succeeds for each peer playing its best.
pub fn engineered_fixture() -> (Vec<Vec<f64>>, f64, f64, fn(&[usize]) -> f64) {
    let v = vec![12f64.ln(), 0.0, 0.0, 0.0];
    fn reward(profile: &[usize]) -> f64 {
        profile.iter().filter(|a| **a == 0).count() as f64
    }
    (vec![v.clone(), v], 1.0, 8.0 / 15.0, reward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hot_and_greedy_limits_agree() {
        let y = [0.3, 2.0, 1.1, 0.4];
        let v = limit_case(&y, 1e6, 1.0, 100_000, 1);
        assert!(v.indistinguishable(0.01), "{v:?}");
        let v = limit_case(&y, 1e-6, 0.0, 100_000, 2);
        assert_eq!(v.boltzmann, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(v.boltzmann, v.epsilon_greedy);
        assert!(v.indistinguishable(0.01));
    }

    #[test]
    fn mismatched_policies_are_detected() {
        let v = limit_case(&[0.3, 2.0, 1.1, 0.4], 1.0, 1.0, 100_000, 3);
        assert!(!v.indistinguishable(0.01));
    }

    #[test]
    fn enumeration_matches_closed_form() {
        let (peers, kappa, eps, reward) = engineered_fixture();
        let b: Vec<f64> = boltzmann(&peers[0], kappa);
        assert!((b[0] - 0.8).abs() < 1e-12);
        assert!((epsilon_greedy(&peers[0], eps)[0] - 0.6).abs() < 1e-12);
        let bp = vec![b.clone(), b];
        assert!((expected_reward(&bp, &reward) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn engineered_ordering_holds() {
        let (peers, kappa, eps, reward) = engineered_fixture();
        let v = ordering_case(&peers, kappa, eps, &reward, 20_000, 4);
        assert!((v.exact_boltzmann - 1.6).abs() < 1e-12);
        assert!((v.exact_epsilon - 1.2).abs() < 1e-12);
        assert!(v.holds(), "{v:?}");
    }
}
