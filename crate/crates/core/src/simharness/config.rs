use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agent::{Algorithm, Mode, ModeChoice};

/// Parses/prints one config value.
trait Value: Sized {
    fn parse(s: &str) -> std::result::Result<Self, String>;
    fn show(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                s.parse::<$t>().map_err(|e| e.to_string())
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_value!(f64, usize, u64, bool, Algorithm);

macro_rules! word_enum {
    ($name:ident { $($variant:ident => $word:literal),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name { $($variant),* }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $word),* })
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($word => Ok($name::$variant),)*
                    _ => Err(format!("expected one of: {}", [$($word),*].join(", "))),
                }
            }
        }

        plain_value!($name);
    };
}

word_enum!(FadingKind { Rayleigh => "rayleigh", None => "none" });
word_enum!(UavShareKind { Shared => "shared", PerSbs => "per_sbs" });
word_enum!(ModeKind { Auto => "auto", Cache => "cache", Format => "format" });
word_enum!(ReadoutKind { Normalized => "normalized", Plain => "plain" });

impl ModeKind {
    pub fn choice(self) -> ModeChoice {
        match self {
            ModeKind::Auto => ModeChoice::Auto,
            ModeKind::Cache => ModeChoice::Fixed(Mode::Cache),
            ModeKind::Format => ModeChoice::Fixed(Mode::Format),
        }
    }
}

macro_rules! scenario_config {
    ($($(#[doc = $doc:literal])* $key:ident : $t:ty = $default:expr),* $(,)?) => {
        /// Every simulation setting, addressable by its config-file key.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct ScenarioConfig {
            $($(#[doc = $doc])* pub $key: $t,)*
        }

        impl Default for ScenarioConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl ScenarioConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => {
                        self.$key = <$t as Value>::parse(value.trim())
                            .map_err(|reason| HarnessError::BadValue { key: key.to_string(), value: value.to_string(), reason })?;
                    })*
                    _ => return Err(HarnessError::UnknownKey(key.to_string())),
                }
                Ok(())
            }

            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $(stringify!($key) => Some(Value::show(&self.$key)),)*
                    _ => None,
                }
            }
        }
    };
}

scenario_config! {
    /// Radius of the disc holding every node, m.
    radius_m: f64 = 500.0,
    u: usize = 20,
    v: usize = 5,
    b: usize = 5,
    uav_height_m: f64 = 100.0,
    sbs_height_m: f64 = 10.0,
    user_height_m: f64 = 1.5,
    /// SBSs a user may attach to: the nearest plus the next `candidates_k - 1`.
    candidates_k: usize = 2,

    f_c_ghz: f64 = 38.0,
    d0_m: f64 = 5.0,
    mu_los: f64 = 2.0,
    mu_nlos: f64 = 2.4,
    sigma_los_db: f64 = 5.3,
    sigma_nlos_db: f64 = 5.27,
    beta: f64 = 2.0,
    eta: f64 = 100.0,
    x: f64 = 11.9,
    y: f64 = 0.13,
    sigma2_dbm: f64 = -105.0,
    p_v_dbm: f64 = 20.0,
    p_b_dbm: f64 = 30.0,
    p_u_dbm: f64 = 20.0,
    fading: FadingKind = FadingKind::Rayleigh,

    b_vd_ghz: f64 = 2.0,
    b_vu_mhz: f64 = 500.0,
    b_sd_mhz: f64 = 16.0,
    b_su_mhz: f64 = 4.0,

    r_u_gbps: f64 = 1.0,
    r_s_gbps: f64 = 2.0,
    uav_share: UavShareKind = UavShareKind::Shared,

    c_k: usize = 3,
    g_120_mbits: f64 = 12.5,
    g_360_mbits: f64 = 50.0,
    /// Data processed to extract one visible view.
    h_mbits: f64 = 50.0,
    a_kbits: f64 = 50.0,
    s_mbits: f64 = 300.0,
    zipf_s: f64 = 1.0,
    /// Multiplies every data size (G_120, G_360, H, A and S).
    payload_scale: f64 = 1.0,

    d_ms: f64 = 20.0,
    n_tau: usize = 10,
    /// Liquid membrane time constant; one slot counts as 1 ms.
    rho_ms: f64 = 30.0,
    n_l: usize = 125,
    n_w: usize = 100,
    spectral_radius: f64 = 0.9,
    kappa: f64 = 1.25,
    lambda_alpha: f64 = 0.01,
    lr_decay: bool = false,
    readout: ReadoutKind = ReadoutKind::Normalized,

    q_alpha: f64 = 0.1,
    q_gamma: f64 = 0.0,
    q_epsilon_decay: f64 = 0.995,
    q_epsilon_min: f64 = 0.05,

    action_cap: usize = 256,
    action_contents: usize = 3,
    mode: ModeKind = ModeKind::Auto,

    algorithm: Algorithm = Algorithm::Elsm,
    /// Learning periods per run.
    iterations: usize = 3000,
    seed: u64 = 1,
    /// Seeds per point in a sweep.
    seeds: usize = 10,
    /// Final fraction of the run averaged into sweep values and the CDF.
    tail_fraction: f64 = 0.25,
    record_wall_time: bool = false,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(HarnessError::Syntax { line: n + 1 })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::DuplicateKey(key.to_string()));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key in declaration order, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(key);
            out.push('=');
            out.push_str(&self.get(key).expect("declared key"));
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str| Err(HarnessError::Invalid(what));
        if self.u == 0 || self.v == 0 || self.b == 0 || self.c_k == 0 {
            return bad("node and content counts must be >= 1");
        }
        if self.candidates_k == 0 {
            return bad("candidates_k must be >= 1");
        }
        if self.n_tau == 0 || self.n_w == 0 || self.n_l == 0 {
            return bad("n_tau, n_w and n_l must be >= 1");
        }
        if liquid_dims(self.n_l).is_none() {
            return bad("n_l must be a perfect cube");
        }
        if !(self.g_120_mbits > 0.0 && self.g_360_mbits > self.g_120_mbits) {
            return bad("need 0 < g_120_mbits < g_360_mbits");
        }
        if !(self.payload_scale > 0.0 && self.h_mbits > 0.0 && self.a_kbits > 0.0 && self.s_mbits >= 0.0) {
            return bad("data sizes must be positive");
        }
        if !(self.r_u_gbps > 0.0 && self.r_u_gbps <= self.r_s_gbps) {
            return bad("need 0 < r_u_gbps <= r_s_gbps");
        }
        if !(self.radius_m > 0.0 && self.d_ms > 0.0 && self.kappa >= 0.0 && self.zipf_s >= 0.0) {
            return bad("radius, deadline must be > 0; kappa, zipf_s >= 0");
        }
        if !(self.uav_height_m > self.sbs_height_m && self.sbs_height_m >= 0.0 && self.user_height_m >= 0.0) {
            return bad("UAVs must fly above the SBSs");
        }
        if !(0.0 < self.tail_fraction && self.tail_fraction <= 1.0) {
            return bad("tail_fraction must lie in (0, 1]");
        }
        if self.seeds == 0 {
            return bad("seeds must be >= 1");
        }
        Ok(())
    }

    fn scaled_bits(&self, mbits: f64) -> u64 {
        (mbits * 1e6 * self.payload_scale).round() as u64
    }

    pub fn size_visible_bits(&self) -> u64 {
        self.scaled_bits(self.g_120_mbits)
    }

    pub fn size_360_bits(&self) -> u64 {
        self.scaled_bits(self.g_360_mbits)
    }

    pub fn extract_workload_bits(&self) -> u64 {
        self.scaled_bits(self.h_mbits)
    }

    pub fn tracking_bits(&self) -> u64 {
        ((self.a_kbits * 1e3 * self.payload_scale).round() as u64).max(1)
    }

    pub fn cache_capacity_bits(&self) -> u64 {
        self.scaled_bits(self.s_mbits)
    }
}

/// Side length triple of a cubic liquid with `n` neurons.
pub fn liquid_dims(n: usize) -> Option<[usize; 3]> {
    let side = (n as f64).cbrt().round() as usize;
    (side * side * side == n).then_some([side; 3])
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_carry_reference_values() {
        let c = ScenarioConfig::default();
        assert_eq!((c.u, c.v, c.b, c.radius_m), (20, 5, 5, 500.0));
        assert_eq!((c.g_360_mbits, c.d_ms, c.s_mbits, c.n_l, c.n_w, c.n_tau), (50.0, 20.0, 300.0, 125, 100, 10));
        assert_eq!(c.size_visible_bits(), 12_500_000);
        assert_eq!(c.tracking_bits(), 50_000);
        assert_eq!(liquid_dims(125), Some([5, 5, 5]));
        assert_eq!(liquid_dims(100), None);
    }

    #[test]
    fn parse_accepts_comments_and_rejects_unknown() {
        let c = ScenarioConfig::parse("# reference\ng_360_mbits = 40 # smaller\n\nkappa=5\nalgorithm=qlearning\n").unwrap();
        assert_eq!(c.g_360_mbits, 40.0);
        assert_eq!(c.kappa, 5.0);
        assert_eq!(c.algorithm, Algorithm::QLearning);
        assert!(matches!(ScenarioConfig::parse("bogus=1"), Err(HarnessError::UnknownKey(k)) if k == "bogus"));
        assert!(matches!(ScenarioConfig::parse("kappa=1\nkappa=2"), Err(HarnessError::DuplicateKey(_))));
        assert!(matches!(ScenarioConfig::parse("kappa"), Err(HarnessError::Syntax { line: 1 })));
        assert!(matches!(ScenarioConfig::parse("u=two"), Err(HarnessError::BadValue { .. })));
        assert!(matches!(ScenarioConfig::parse("u=0"), Err(HarnessError::Invalid(_))));
    }

    #[test]
    fn default_round_trip() {
        let c = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::parse(&c.to_text()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip(
            kappa in 0.0f64..100.0,
            scale in 1e-4f64..10.0,
            u in 1usize..60,
            seed in any::<u64>(),
            alg in 0usize..5,
            fading in any::<bool>(),
        ) {
            let mut c = ScenarioConfig { kappa, payload_scale: scale, u, seed, ..ScenarioConfig::default() };
            c.algorithm = Algorithm::ALL[alg];
            c.fading = if fading { FadingKind::Rayleigh } else { FadingKind::None };
            prop_assert_eq!(ScenarioConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
