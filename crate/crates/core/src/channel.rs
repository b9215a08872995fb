//! Propagation, SNR and per-user link capacity for the UAV backhaul
//! (mmWave down, sub-6 GHz up) and the SBS access links.
//!
//! All functions are pure. Powers are configured in dBm and converted once
//! through [`crate::scalar::units`]; capacities come out in bit/s.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{units, Scalar, SPEED_OF_LIGHT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid radio parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: &'static str },
    #[error("distance {distance_m} m is below the reference distance {ref_distance_m} m")]
    BelowReferenceDistance { distance_m: f64, ref_distance_m: f64 },
    #[error("nodes {a} and {b} are coincident")]
    CoincidentNodes { a: usize, b: usize },
    #[error("UAV {uav} is not above ground node {ground}")]
    NotAbove { uav: usize, ground: usize },
    #[error("link capacity requested for an SBS with no associated users")]
    NoUsers,
    #[error("no channel gain between SBS {sbs} and user {user}")]
    MissingGain { sbs: usize, user: usize },
    #[error("node heights violate UAV > SBS > user >= 0")]
    HeightOrdering,
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// Radio constants shared by every link in the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams<T> {
    pub carrier_freq_hz: T,
    pub ref_distance_m: T,
    pub pl_exp_los: T,
    pub pl_exp_nlos: T,
    pub shadow_sigma_los_db: T,
    pub shadow_sigma_nlos_db: T,
    /// Path-loss exponent of the sub-6 GHz SBS-to-UAV uplink.
    pub sub6_pl_exp: T,
    /// Extra linear attenuation of an NLoS sub-6 GHz link (>= 1).
    pub sub6_nlos_atten: T,
    pub env_x: T,
    pub env_y: T,
    pub noise_power_dbm: T,
    pub tx_power_uav_dbm: T,
    pub tx_power_sbs_dbm: T,
    pub tx_power_user_dbm: T,
}

impl<T: Scalar> RadioParams<T> {
    /// Values of the reference system-parameter table.
    pub fn table_ii() -> Self {
        Self {
            carrier_freq_hz: T::lit(38e9),
            ref_distance_m: T::lit(5.0),
            pl_exp_los: T::lit(2.0),
            pl_exp_nlos: T::lit(2.4),
            shadow_sigma_los_db: T::lit(5.3),
            shadow_sigma_nlos_db: T::lit(5.27),
            sub6_pl_exp: T::lit(2.0),
            sub6_nlos_atten: T::lit(100.0),
            env_x: T::lit(11.9),
            env_y: T::lit(0.13),
            noise_power_dbm: T::lit(-105.0),
            tx_power_uav_dbm: T::lit(20.0),
            tx_power_sbs_dbm: T::lit(30.0),
            tx_power_user_dbm: T::lit(20.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.noise_power_dbm,
            self.tx_power_uav_dbm,
            self.tx_power_sbs_dbm,
            self.tx_power_user_dbm,
            self.shadow_sigma_los_db,
            self.shadow_sigma_nlos_db,
        ];
        if finite.iter().any(|p| !p.is_finite()) {
            return Err(ChannelError::InvalidParam { name: "power", reason: "must be finite" });
        }
        let positive = |v: T, name| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::InvalidParam { name, reason: "must be > 0" })
            }
        };
        positive(self.carrier_freq_hz, "carrier_freq_hz")?;
        positive(self.ref_distance_m, "ref_distance_m")?;
        positive(self.env_x, "env_x")?;
        positive(self.env_y, "env_y")?;
        if self.pl_exp_los > self.pl_exp_nlos {
            return Err(ChannelError::InvalidParam {
                name: "pl_exp_los",
                reason: "LoS exponent must not exceed the NLoS exponent",
            });
        }
        if !(self.sub6_nlos_atten >= T::one()) {
            return Err(ChannelError::InvalidParam { name: "sub6_nlos_atten", reason: "must be >= 1" });
        }
        if self.shadow_sigma_los_db < T::zero() || self.shadow_sigma_nlos_db < T::zero() {
            return Err(ChannelError::InvalidParam { name: "shadow_sigma", reason: "must be >= 0" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths<T> {
    pub backhaul_down_hz: T,
    pub backhaul_up_hz: T,
    pub access_down_hz: T,
    pub access_up_hz: T,
}

impl<T: Scalar> Bandwidths<T> {
    pub fn table_ii() -> Self {
        Self {
            backhaul_down_hz: T::lit(2e9),
            backhaul_up_hz: T::lit(500e6),
            access_down_hz: T::lit(16e6),
            access_up_hz: T::lit(4e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.backhaul_down_hz, "backhaul_down_hz"),
            (self.backhaul_up_hz, "backhaul_up_hz"),
            (self.access_down_hz, "access_down_hz"),
            (self.access_up_hz, "access_up_hz"),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(ChannelError::InvalidParam { name, reason: "must be > 0" });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Uav,
    Sbs,
    User,
}

/// A transmitter or receiver; `id` indexes into the list of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub id: usize,
    pub kind: NodeKind,
    /// x, y, height in metres.
    pub position: [T; 3],
}

impl<T: Scalar> Node<T> {
    pub fn new(id: usize, kind: NodeKind, x: T, y: T, height: T) -> Self {
        Self { id, kind, position: [x, y, height] }
    }

    pub fn height(&self) -> T {
        self.position[2]
    }

    pub fn distance_to(&self, other: &Node<T>) -> T {
        let dx = self.position[0] - other.position[0];
        let dy = self.position[1] - other.position[1];
        let dz = self.position[2] - other.position[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance_to(&self, other: &Node<T>) -> T {
        let dx = self.position[0] - other.position[0];
        let dy = self.position[1] - other.position[1];
        (dx * dx + dy * dy).sqrt()
    }
}

/// Checks UAV altitude > SBS height > user height >= 0 across the whole network.
pub fn validate_heights<T: Scalar>(uavs: &[Node<T>], sbss: &[Node<T>], users: &[Node<T>]) -> Result<()> {
    let min = |ns: &[Node<T>]| ns.iter().map(Node::height).fold(T::infinity(), T::min);
    let max = |ns: &[Node<T>]| ns.iter().map(Node::height).fold(T::neg_infinity(), T::max);
    if users.iter().any(|u| u.height() < T::zero()) {
        return Err(ChannelError::HeightOrdering);
    }
    if !sbss.is_empty() && !users.is_empty() && !(min(sbss) > max(users)) {
        return Err(ChannelError::HeightOrdering);
    }
    if !uavs.is_empty() && !sbss.is_empty() && !(min(uavs) > max(sbss)) {
        return Err(ChannelError::HeightOrdering);
    }
    Ok(())
}

/// Averaged link quantities of one backhaul direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget<T> {
    pub avg_path_loss_db: T,
    pub avg_snr_linear: T,
    pub capacity_bps_per_user: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackhaulBudget<T> {
    /// UAV to SBS, mmWave.
    pub down: LinkBudget<T>,
    /// SBS to UAV, sub-6 GHz.
    pub up: LinkBudget<T>,
}

/// Free-space loss at the reference distance, dB.
pub fn free_space_loss<T: Scalar>(params: &RadioParams<T>) -> T {
    let four_pi = T::lit(4.0 * std::f64::consts::PI);
    T::lit(20.0) * (params.ref_distance_m * params.carrier_freq_hz * four_pi / T::lit(SPEED_OF_LIGHT)).log10()
}

/// mmWave log-distance loss with log-normal shadowing, dB. The distance enters
/// in metres (not normalised by the reference distance).
pub fn mmwave_path_loss<T: Scalar>(params: &RadioParams<T>, distance_m: T, los: bool, shadow_db: T) -> Result<T> {
    if !(distance_m >= params.ref_distance_m) {
        return Err(ChannelError::BelowReferenceDistance {
            distance_m: distance_m.as_f64(),
            ref_distance_m: params.ref_distance_m.as_f64(),
        });
    }
    let exponent = if los { params.pl_exp_los } else { params.pl_exp_nlos };
    Ok(free_space_loss(params) + T::lit(10.0) * exponent * distance_m.log10() + shadow_db)
}

/// Draws a zero-mean shadowing term for the given link state.
pub fn sample_shadow_db<T: Scalar, R: Rng + ?Sized>(params: &RadioParams<T>, los: bool, rng: &mut R) -> T {
    let sigma = if los { params.shadow_sigma_los_db } else { params.shadow_sigma_nlos_db };
    let z: f64 = StandardNormal.sample(rng);
    sigma * T::lit(z)
}

/// Sub-6 GHz loss in dB: `d^beta` for LoS, `eta * d^beta` for NLoS.
pub fn sub6_path_loss<T: Scalar>(params: &RadioParams<T>, distance_m: T, los: bool) -> T {
    let base = T::lit(10.0) * params.sub6_pl_exp * distance_m.log10();
    if los {
        base
    } else {
        base + units::linear_to_db(params.sub6_nlos_atten)
    }
}

/// Air-to-ground LoS probability from an elevation angle in degrees.
pub fn los_probability_from_elevation<T: Scalar>(params: &RadioParams<T>, elevation_deg: T) -> T {
    let x = params.env_x;
    T::one() / (T::one() + x * (-params.env_y * (elevation_deg - x)).exp())
}

/// Elevation angle (degrees) of `uav` seen from `ground`, using the 3D slant
/// distance and the height difference.
pub fn elevation_deg<T: Scalar>(uav: &Node<T>, ground: &Node<T>) -> Result<T> {
    let d = uav.distance_to(ground);
    if !(d > T::zero()) {
        return Err(ChannelError::CoincidentNodes { a: uav.id, b: ground.id });
    }
    let dh = uav.height() - ground.height();
    if !(dh > T::zero()) {
        return Err(ChannelError::NotAbove { uav: uav.id, ground: ground.id });
    }
    Ok((dh / d).min(T::one()).asin().to_degrees())
}

pub fn los_probability<T: Scalar>(params: &RadioParams<T>, uav: &Node<T>, ground: &Node<T>) -> Result<T> {
    Ok(los_probability_from_elevation(params, elevation_deg(uav, ground)?))
}

/// `p * los + (1 - p) * nlos`.
pub fn mix_path_loss<T: Scalar>(p_los: T, los_db: T, nlos_db: T) -> T {
    p_los * los_db + (T::one() - p_los) * nlos_db
}

/// Expected mmWave loss between a UAV and a ground node (zero-mean shadowing).
pub fn average_path_loss<T: Scalar>(params: &RadioParams<T>, uav: &Node<T>, ground: &Node<T>) -> Result<T> {
    let p = los_probability(params, uav, ground)?;
    let d = uav.distance_to(ground);
    let los = mmwave_path_loss(params, d, true, T::zero())?;
    let nlos = mmwave_path_loss(params, d, false, T::zero())?;
    Ok(mix_path_loss(p, los, nlos))
}

/// Expected sub-6 GHz loss between a ground node and a UAV.
pub fn average_sub6_path_loss<T: Scalar>(params: &RadioParams<T>, uav: &Node<T>, ground: &Node<T>) -> Result<T> {
    let p = los_probability(params, uav, ground)?;
    let d = uav.distance_to(ground);
    Ok(mix_path_loss(p, sub6_path_loss(params, d, true), sub6_path_loss(params, d, false)))
}

/// `tx / (10^(loss/10) * noise)`.
pub fn snr_from_loss<T: Scalar>(tx_power_dbm: T, loss_db: T, noise_power_dbm: T) -> T {
    units::dbm_to_watts(tx_power_dbm) / (units::db_to_linear(loss_db) * units::dbm_to_watts(noise_power_dbm))
}

/// Shannon rate of an equal bandwidth share.
pub fn shared_capacity<T: Scalar>(bandwidth_hz: T, users: u32, sinr: T) -> T {
    bandwidth_hz / T::from_count(users as u64) * (T::one() + sinr).log2()
}

/// Per-user backhaul capacity between a UAV and an SBS serving `users_at_sbs`
/// users: mmWave downlink, sub-6 GHz uplink, both LoS-averaged.
pub fn backhaul_capacity_per_user<T: Scalar>(
    params: &RadioParams<T>,
    bandwidths: &Bandwidths<T>,
    uav: &Node<T>,
    sbs: &Node<T>,
    users_at_sbs: u32,
) -> Result<BackhaulBudget<T>> {
    if users_at_sbs == 0 {
        return Err(ChannelError::NoUsers);
    }
    let down_loss = average_path_loss(params, uav, sbs)?;
    let down_snr = snr_from_loss(params.tx_power_uav_dbm, down_loss, params.noise_power_dbm);
    let up_loss = average_sub6_path_loss(params, uav, sbs)?;
    let up_snr = snr_from_loss(params.tx_power_sbs_dbm, up_loss, params.noise_power_dbm);
    Ok(BackhaulBudget {
        down: LinkBudget {
            avg_path_loss_db: down_loss,
            avg_snr_linear: down_snr,
            capacity_bps_per_user: shared_capacity(bandwidths.backhaul_down_hz, users_at_sbs, down_snr),
        },
        up: LinkBudget {
            avg_path_loss_db: up_loss,
            avg_snr_linear: up_snr,
            capacity_bps_per_user: shared_capacity(bandwidths.backhaul_up_hz, users_at_sbs, up_snr),
        },
    })
}

/// Linear channel gain `h` between SBS `sbs` and user `user`.
pub trait ChannelGains<T> {
    fn gain(&self, sbs: usize, user: usize) -> Option<T>;
}

/// Dense SBS x user gain matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable<T> {
    sbs_count: usize,
    user_count: usize,
    gains: Vec<T>,
}

impl<T: Scalar> GainTable<T> {
    pub fn constant(sbs_count: usize, user_count: usize, gain: T) -> Self {
        Self { sbs_count, user_count, gains: vec![gain; sbs_count * user_count] }
    }

    pub fn from_fn(sbs_count: usize, user_count: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut gains = Vec::with_capacity(sbs_count * user_count);
        for j in 0..sbs_count {
            for i in 0..user_count {
                gains.push(f(j, i));
            }
        }
        Self { sbs_count, user_count, gains }
    }

    pub fn set(&mut self, sbs: usize, user: usize, gain: T) {
        self.gains[sbs * self.user_count + user] = gain;
    }
}

impl<T: Scalar> ChannelGains<T> for GainTable<T> {
    fn gain(&self, sbs: usize, user: usize) -> Option<T> {
        (sbs < self.sbs_count && user < self.user_count).then(|| self.gains[sbs * self.user_count + user])
    }
}

/// Small-scale fading applied on top of distance-based loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fading {
    None,
    /// Unit-mean exponential power gain.
    Rayleigh,
}

/// Draws `h_ij = max(d, d0)^-beta * g` for every SBS/user pair.
pub fn sample_gain_table<T: Scalar, R: Rng + ?Sized>(
    params: &RadioParams<T>,
    sbss: &[Node<T>],
    users: &[Node<T>],
    fading: Fading,
    rng: &mut R,
) -> GainTable<T> {
    GainTable::from_fn(sbss.len(), users.len(), |j, i| {
        let d = sbss[j].distance_to(&users[i]).max(params.ref_distance_m);
        let path = d.powf(-params.sub6_pl_exp);
        match fading {
            Fading::None => path,
            Fading::Rayleigh => {
                let g: f64 = Exp1.sample(rng);
                path * T::lit(g)
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessCapacity<T> {
    pub sinr_down: T,
    pub sinr_up: T,
    pub down_bps: T,
    pub up_bps: T,
}

/// SBS-user capacities: downlink interfered by every other SBS, uplink by every
/// other user, each direction's bandwidth split over the SBS's users.
#[allow(clippy::too_many_arguments)]
pub fn access_capacity<T: Scalar, G: ChannelGains<T> + ?Sized>(
    params: &RadioParams<T>,
    bandwidths: &Bandwidths<T>,
    sbs: &Node<T>,
    user: &Node<T>,
    all_sbs: &[Node<T>],
    all_users: &[Node<T>],
    gains: &G,
    users_at_sbs: u32,
) -> Result<AccessCapacity<T>> {
    if users_at_sbs == 0 {
        return Err(ChannelError::NoUsers);
    }
    let lookup = |j: usize, i: usize| gains.gain(j, i).ok_or(ChannelError::MissingGain { sbs: j, user: i });
    let noise = units::dbm_to_watts(params.noise_power_dbm);
    let p_b = units::dbm_to_watts(params.tx_power_sbs_dbm);
    let p_u = units::dbm_to_watts(params.tx_power_user_dbm);
    let h = lookup(sbs.id, user.id)?;

    let mut dl_interference = T::zero();
    for other in all_sbs.iter().filter(|n| n.id != sbs.id) {
        dl_interference += p_b * lookup(other.id, user.id)?;
    }
    let mut ul_interference = T::zero();
    for other in all_users.iter().filter(|n| n.id != user.id) {
        ul_interference += p_u * lookup(sbs.id, other.id)?;
    }
    let sinr_down = p_b * h / (dl_interference + noise);
    let sinr_up = p_u * h / (ul_interference + noise);
    Ok(AccessCapacity {
        sinr_down,
        sinr_up,
        down_bps: shared_capacity(bandwidths.access_down_hz, users_at_sbs, sinr_down),
        up_bps: shared_capacity(bandwidths.access_up_hz, users_at_sbs, sinr_up),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> RadioParams<f64> {
        RadioParams::table_ii()
    }

    // Independent scalar evaluation, written out term by term.
    fn fs_oracle(d0: f64, fc: f64) -> f64 {
        let c = 299_792_458.0;
        20.0 * (d0 * fc * 4.0 * std::f64::consts::PI / c).log10()
    }

    #[test]
    fn free_space_loss_reference_values() {
        let l = free_space_loss(&p());
        assert!((l - fs_oracle(5.0, 38e9)).abs() < 1e-9);
        assert!((l - 78.0).abs() < 0.05, "{l}");

        let mut unity = p();
        unity.ref_distance_m = SPEED_OF_LIGHT / (unity.carrier_freq_hz * 4.0 * std::f64::consts::PI);
        assert!(free_space_loss(&unity).abs() < 1e-9);

        let mut doubled = p();
        doubled.ref_distance_m *= 2.0;
        let delta = free_space_loss(&doubled) - free_space_loss(&p());
        assert!((delta - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn mmwave_loss_cases() {
        let params = p();
        let l = mmwave_path_loss(&params, 5.0, true, 0.0).unwrap();
        assert!((l - (fs_oracle(5.0, 38e9) + 20.0 * 5f64.log10())).abs() < 1e-9);

        let mut unit = p();
        unit.ref_distance_m = 1.0;
        let l1 = mmwave_path_loss(&unit, 1.0, true, 0.0).unwrap();
        assert!((l1 - free_space_loss(&unit)).abs() < 1e-12);

        let los = mmwave_path_loss(&params, 120.0, true, 0.0).unwrap();
        let nlos = mmwave_path_loss(&params, 120.0, false, 0.0).unwrap();
        assert!(nlos > los);

        assert!(matches!(
            mmwave_path_loss(&params, 4.0, true, 0.0),
            Err(ChannelError::BelowReferenceDistance { .. })
        ));
    }

    #[test]
    fn los_probability_at_45_degrees() {
        let pr = los_probability_from_elevation(&p(), 45.0);
        let oracle = 1.0 / (1.0 + 11.9 * (-0.13 * (45.0 - 11.9f64)).exp());
        assert!((pr - oracle).abs() < 1e-15);
        assert!((pr - 0.862).abs() < 1e-3, "{pr}");
        let uav = Node::new(0, NodeKind::Uav, 0.0, 0.0, 110.0);
        let sbs = Node::new(0, NodeKind::Sbs, 100.0, 0.0, 10.0);
        let geo = los_probability(&p(), &uav, &sbs).unwrap();
        assert!((geo - pr).abs() < 1e-12);
    }

    #[test]
    fn los_probability_increases_with_elevation() {
        let params = p();
        let mut prev = 0.0;
        for deg in 1..=90 {
            let pr = los_probability_from_elevation(&params, deg as f64);
            assert!(pr > prev && pr > 0.0 && pr < 1.0);
            prev = pr;
        }
    }

    #[test]
    fn coincident_nodes_rejected() {
        let a = Node::new(0, NodeKind::Uav, 1.0, 1.0, 10.0);
        assert!(matches!(los_probability(&p(), &a, &a), Err(ChannelError::CoincidentNodes { .. })));
    }

    #[test]
    fn average_loss_mixture() {
        assert_eq!(mix_path_loss(1.0, 100.0, 120.0), 100.0);
        assert_eq!(mix_path_loss(0.5, 100.0, 120.0), 110.0);
    }

    #[test]
    fn average_loss_matches_chained_evaluation() {
        let params = p();
        let uav = Node::new(0, NodeKind::Uav, 0.0, 0.0, 100.0);
        let sbs = Node::new(0, NodeKind::Sbs, 200.0, 0.0, 0.0);
        let d = (200.0f64 * 200.0 + 100.0 * 100.0).sqrt();
        let elev = (100.0 / d).asin().to_degrees();
        let pr = 1.0 / (1.0 + 11.9 * (-0.13 * (elev - 11.9)).exp());
        let fs = fs_oracle(5.0, 38e9);
        let oracle = pr * (fs + 20.0 * d.log10()) + (1.0 - pr) * (fs + 24.0 * d.log10());
        let got = average_path_loss(&params, &uav, &sbs).unwrap();
        assert!((got - oracle).abs() < 1e-9);
    }

    #[test]
    fn backhaul_fixture_and_scaling() {
        let params = p();
        let bw = Bandwidths::table_ii();
        let uav = Node::new(0, NodeKind::Uav, 0.0, 0.0, 100.0);
        let sbs = Node::new(0, NodeKind::Sbs, 200.0, 0.0, 0.0);
        let one = backhaul_capacity_per_user(&params, &bw, &uav, &sbs, 1).unwrap();
        let two = backhaul_capacity_per_user(&params, &bw, &uav, &sbs, 2).unwrap();
        assert!((one.down.capacity_bps_per_user - 2.0 * two.down.capacity_bps_per_user).abs() < 1e-3);
        assert!((one.up.capacity_bps_per_user - 2.0 * two.up.capacity_bps_per_user).abs() < 1e-3);

        // Chained scalar oracle: loss -> SNR -> capacity.
        let d = (200.0f64 * 200.0 + 100.0 * 100.0).sqrt();
        let elev = (100.0 / d).asin().to_degrees();
        let pr = 1.0 / (1.0 + 11.9 * (-0.13 * (elev - 11.9)).exp());
        let fs = fs_oracle(5.0, 38e9);
        let down_loss = pr * (fs + 20.0 * d.log10()) + (1.0 - pr) * (fs + 24.0 * d.log10());
        let snr = 10f64.powf((20.0 - down_loss + 105.0) / 10.0);
        let c_down = 2e9 / 4.0 * (1.0 + snr).log2();
        let up_loss = pr * 20.0 * d.log10() + (1.0 - pr) * (20.0 * d.log10() + 20.0);
        let snr_up = 10f64.powf((30.0 - up_loss + 105.0) / 10.0);
        let c_up = 500e6 / 4.0 * (1.0 + snr_up).log2();
        let four = backhaul_capacity_per_user(&params, &bw, &uav, &sbs, 4).unwrap();
        assert!((four.down.capacity_bps_per_user - c_down).abs() / c_down < 1e-9);
        assert!((four.up.capacity_bps_per_user - c_up).abs() / c_up < 1e-9);
        // Frozen values of the oracle above for this geometry.
        assert!((four.down.avg_path_loss_db - 131.016).abs() < 0.01, "{}", four.down.avg_path_loss_db);

        assert_eq!(backhaul_capacity_per_user(&params, &bw, &uav, &sbs, 0), Err(ChannelError::NoUsers));
    }

    #[test]
    fn unit_snr_capacity() {
        assert!((shared_capacity(2e9_f64, 4, 1.0) - 0.5e9).abs() < 1e-6);
    }

    fn ground(n: usize, kind: NodeKind, xs: &[f64]) -> Vec<Node<f64>> {
        (0..n).map(|i| Node::new(i, kind, xs[i], 0.0, if kind == NodeKind::Sbs { 10.0 } else { 1.5 })).collect()
    }

    #[test]
    fn access_without_interference_is_snr_form() {
        let params = p();
        let bw = Bandwidths::table_ii();
        let sbss = ground(1, NodeKind::Sbs, &[0.0]);
        let users = ground(1, NodeKind::User, &[50.0]);
        let gains = GainTable::constant(1, 1, 1e-6);
        let c = access_capacity(&params, &bw, &sbss[0], &users[0], &sbss, &users, &gains, 1).unwrap();
        let snr = snr_from_loss(30.0, units::linear_to_db(1.0 / 1e-6), -105.0);
        assert!((c.sinr_down - snr).abs() / snr < 1e-12);
        assert!((c.down_bps - 16e6 * (1.0 + snr).log2()).abs() < 1e-3);
    }

    #[test]
    fn symmetric_interferer_caps_sinr_below_one() {
        let params = p();
        let bw = Bandwidths::table_ii();
        let sbss = ground(2, NodeKind::Sbs, &[0.0, 100.0]);
        let users = ground(1, NodeKind::User, &[50.0]);
        let gains = GainTable::constant(2, 1, 1e-6);
        let c = access_capacity(&params, &bw, &sbss[0], &users[0], &sbss, &users, &gains, 1).unwrap();
        let ph = units::dbm_to_watts(30.0) * 1e-6;
        let expected = ph / (ph + units::dbm_to_watts(-105.0));
        assert!((c.sinr_down - expected).abs() < 1e-15);
        assert!(c.sinr_down < 1.0);
    }

    #[test]
    fn missing_gain_is_configuration_error() {
        let params = p();
        let bw = Bandwidths::table_ii();
        let sbss = ground(2, NodeKind::Sbs, &[0.0, 100.0]);
        let users = ground(1, NodeKind::User, &[50.0]);
        let gains = GainTable::constant(1, 1, 1e-6);
        let err = access_capacity(&params, &bw, &sbss[0], &users[0], &sbss, &users, &gains, 1).unwrap_err();
        assert_eq!(err, ChannelError::MissingGain { sbs: 1, user: 0 });
    }

    #[test]
    fn rayleigh_fixture_matches_direct_evaluation() {
        let params = p();
        let bw = Bandwidths::table_ii();
        let sbss = ground(3, NodeKind::Sbs, &[0.0, 150.0, -220.0]);
        let users = ground(4, NodeKind::User, &[30.0, 80.0, -60.0, 140.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gains = sample_gain_table(&params, &sbss, &users, Fading::Rayleigh, &mut rng);
        let c = access_capacity(&params, &bw, &sbss[0], &users[1], &sbss, &users, &gains, 2).unwrap();
        // Direct evaluation on the logged gains.
        let g = |j, i| gains.gain(j, i).unwrap();
        let pb = 1.0;
        let pu = 0.1;
        let n = 10f64.powf(-13.5);
        let sinr_d = pb * g(0, 1) / (pb * g(1, 1) + pb * g(2, 1) + n);
        let sinr_u = pu * g(0, 1) / (pu * (g(0, 0) + g(0, 2) + g(0, 3)) + n);
        assert!((c.down_bps - 8e6 * (1.0 + sinr_d).log2()).abs() < 1e-3);
        assert!((c.up_bps - 2e6 * (1.0 + sinr_u).log2()).abs() < 1e-3);
    }

    #[test]
    fn shadowing_averages_to_zero_shadow_value() {
        let params = p();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let d = 180.0;
        let base = mmwave_path_loss(&params, d, false, 0.0).unwrap();
        let mut sum = 0.0;
        for _ in 0..n {
            let s = sample_shadow_db(&params, false, &mut rng);
            sum += mmwave_path_loss(&params, d, false, s).unwrap();
        }
        let mean = sum / n as f64;
        let se = params.shadow_sigma_nlos_db / (n as f64).sqrt();
        assert!((mean - base).abs() < 3.0 * se, "mean {mean} base {base} se {se}");
    }

    #[test]
    fn average_loss_monotone_in_distance_at_fixed_elevation() {
        let params = p();
        let sbs = Node::new(0, NodeKind::Sbs, 0.0, 0.0, 0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..50 {
            let s = k as f64 * 20.0;
            let uav = Node::new(0, NodeKind::Uav, s, 0.0, 0.5 * s);
            let l = average_path_loss(&params, &uav, &sbs).unwrap();
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut params = p();
        params.pl_exp_los = 3.0;
        assert!(params.validate().is_err());
        let mut params = p();
        params.sub6_nlos_atten = 0.5;
        assert!(params.validate().is_err());
        assert!(p().validate().is_ok());
        assert!(Bandwidths::<f64>::table_ii().validate().is_ok());
    }

    #[test]
    fn works_in_f32() {
        let params = RadioParams::<f32>::table_ii();
        let l = free_space_loss(&params);
        assert!((l - 78.0).abs() < 0.1);
        assert!(los_probability_from_elevation(&params, 45.0) > 0.86);
    }
}
