use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{liquid_dims, FadingKind, ReadoutKind, ScenarioConfig, UavShareKind};
use super::Result;
use crate::agent::{derive_seed, AgentConfig, AgentError, Environment, QParams};
use crate::channel::{
    access_capacity, average_path_loss, average_sub6_path_loss, sample_gain_table, shared_capacity, snr_from_loss,
    Bandwidths, Fading, Node, NodeKind, RadioParams,
};
use crate::content::{generate_requests, ContentCatalog, ContentId, RequestTrace, SbsId, UserId, ZipfParams};
use crate::latency::{ComputeBudget, LinkRates, UavShare};
use crate::oracle::{SlotSnapshot, UserDemand};
use crate::reservoir::{EsnConfig, LiquidConfig, ReadoutRule};

// Seed streams.
const TOPOLOGY: u64 = 10;
const REQUESTS: u64 = 11;
const FADING: u64 = 12;
const AGENTS: u64 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub uavs: Vec<Node<f64>>,
    pub sbss: Vec<Node<f64>>,
    pub users: Vec<Node<f64>>,
}

/// Uniform point in the disc of radius `r` centred at the origin.
pub fn disc_point<R: Rng + ?Sized>(rng: &mut R, r: f64) -> (f64, f64) {
    let rad = r * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    (rad * theta.cos(), rad * theta.sin())
}

pub fn generate_topology(cfg: &ScenarioConfig, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TOPOLOGY, 0));
    let mut place = |n: usize, kind: NodeKind, h: f64| -> Vec<Node<f64>> {
        (0..n)
            .map(|id| {
                let (x, y) = disc_point(&mut rng, cfg.radius_m);
                Node::new(id, kind, x, y, h)
            })
            .collect()
    };
    let uavs = place(cfg.v, NodeKind::Uav, cfg.uav_height_m);
    let sbss = place(cfg.b, NodeKind::Sbs, cfg.sbs_height_m);
    let users = place(cfg.u, NodeKind::User, cfg.user_height_m);
    Topology { uavs, sbss, users }
}

pub fn radio_params(cfg: &ScenarioConfig) -> RadioParams<f64> {
    RadioParams {
        carrier_freq_hz: cfg.f_c_ghz * 1e9,
        ref_distance_m: cfg.d0_m,
        pl_exp_los: cfg.mu_los,
        pl_exp_nlos: cfg.mu_nlos,
        shadow_sigma_los_db: cfg.sigma_los_db,
        shadow_sigma_nlos_db: cfg.sigma_nlos_db,
        sub6_pl_exp: cfg.beta,
        sub6_nlos_atten: cfg.eta,
        env_x: cfg.x,
        env_y: cfg.y,
        noise_power_dbm: cfg.sigma2_dbm,
        tx_power_uav_dbm: cfg.p_v_dbm,
        tx_power_sbs_dbm: cfg.p_b_dbm,
        tx_power_user_dbm: cfg.p_u_dbm,
    }
}

pub fn bandwidths(cfg: &ScenarioConfig) -> Bandwidths<f64> {
    Bandwidths {
        backhaul_down_hz: cfg.b_vd_ghz * 1e9,
        backhaul_up_hz: cfg.b_vu_mhz * 1e6,
        access_down_hz: cfg.b_sd_mhz * 1e6,
        access_up_hz: cfg.b_su_mhz * 1e6,
    }
}

pub fn compute_budget(cfg: &ScenarioConfig) -> Result<ComputeBudget<f64>> {
    let share = match cfg.uav_share {
        UavShareKind::Shared => UavShare::SharedAcross { sbs_count: cfg.b as u32 },
        UavShareKind::PerSbs => UavShare::PerSbs,
    };
    Ok(ComputeBudget::new(cfg.r_u_gbps * 1e9, cfg.r_s_gbps * 1e9, share)?)
}

pub fn catalog(cfg: &ScenarioConfig) -> Result<ContentCatalog> {
    Ok(ContentCatalog::uniform(
        cfg.v,
        cfg.c_k,
        cfg.size_360_bits(),
        cfg.size_visible_bits(),
        cfg.extract_workload_bits(),
        cfg.tracking_bits(),
    )?)
}

pub fn agent_config(cfg: &ScenarioConfig) -> AgentConfig {
    let mut liquid = LiquidConfig::<f64>::default();
    liquid.dims = liquid_dims(cfg.n_l).expect("validated n_l");
    liquid.slots_per_period = cfg.n_tau;
    liquid.lif.tau_slots = cfg.rho_ms;
    let mut esn = EsnConfig::<f64>::new(cfg.n_w, 0, 1);
    esn.spectral_radius = cfg.spectral_radius;
    esn.learning_rate = cfg.lambda_alpha;
    esn.decay = cfg.lr_decay;
    esn.rule = match cfg.readout {
        ReadoutKind::Normalized => ReadoutRule::Normalized,
        ReadoutKind::Plain => ReadoutRule::Plain,
    };
    AgentConfig {
        algorithm: cfg.algorithm,
        kappa: cfg.kappa,
        mode: cfg.mode.choice(),
        action_cap: cfg.action_cap,
        action_contents: cfg.action_contents,
        slots_per_period: cfg.n_tau,
        liquid,
        esn,
        q: QParams {
            alpha: cfg.q_alpha,
            gamma: cfg.q_gamma,
            epsilon_start: 1.0,
            epsilon_min: cfg.q_epsilon_min,
            epsilon_decay: cfg.q_epsilon_decay,
        },
    }
}

/// Candidate SBSs of each user: the `k` nearest, nearest first (ties by id).
pub fn nearest_candidates(topology: &Topology, k: usize) -> Vec<Vec<SbsId>> {
    topology
        .users
        .iter()
        .map(|user| {
            let mut order: Vec<(f64, usize)> =
                topology.sbss.iter().map(|s| (s.horizontal_distance_to(user), s.id)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.into_iter().take(k.max(1)).map(|(_, j)| SbsId(j)).collect()
        })
        .collect()
}

/// A generated network: topology, catalog, request trace and the link
/// models, serving per-slot snapshots to the agents.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub topology: Topology,
    pub catalog: ContentCatalog,
    pub requests: RequestTrace,
    candidates: Vec<Vec<SbsId>>,
    radio: RadioParams<f64>,
    bandwidths: Bandwidths<f64>,
    compute: ComputeBudget<f64>,
    /// `[uav][sbs]` average backhaul SNRs (mmWave down, sub-6 GHz up).
    backhaul_snr: Vec<Vec<(f64, f64)>>,
}

pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let topology = generate_topology(cfg, seed);
    let radio = radio_params(cfg);
    radio.validate()?;
    let bandwidths = bandwidths(cfg);
    bandwidths.validate()?;
    let catalog = catalog(cfg)?;
    let horizon = (cfg.iterations * cfg.n_tau).max(1);
    let requests = generate_requests(
        ZipfParams { exponent: cfg.zipf_s },
        cfg.u,
        &catalog,
        horizon,
        derive_seed(seed, REQUESTS, 0),
    )?;
    let mut backhaul_snr = Vec::with_capacity(cfg.v);
    for uav in &topology.uavs {
        let mut row = Vec::with_capacity(cfg.b);
        for sbs in &topology.sbss {
            let down = snr_from_loss(radio.tx_power_uav_dbm, average_path_loss(&radio, uav, sbs)?, radio.noise_power_dbm);
            let up = snr_from_loss(radio.tx_power_sbs_dbm, average_sub6_path_loss(&radio, uav, sbs)?, radio.noise_power_dbm);
            row.push((down, up));
        }
        backhaul_snr.push(row);
    }
    Ok(Scenario {
        config: cfg.clone(),
        seed,
        candidates: nearest_candidates(&topology, cfg.candidates_k),
        topology,
        catalog,
        requests,
        radio,
        bandwidths,
        compute: compute_budget(cfg)?,
        backhaul_snr,
    })
}

impl Scenario {
    pub fn agent_seed(&self) -> u64 {
        derive_seed(self.seed, AGENTS, 0)
    }

    fn fading(&self) -> Fading {
        match self.config.fading {
            FadingKind::Rayleigh => Fading::Rayleigh,
            FadingKind::None => Fading::None,
        }
    }
}

impl Environment for Scenario {
    fn sbs_count(&self) -> usize {
        self.config.b
    }

    fn candidates(&self) -> &[Vec<SbsId>] {
        &self.candidates
    }

    fn catalog(&self) -> &ContentCatalog {
        &self.catalog
    }

    fn cache_capacity_bits(&self) -> u64 {
        self.config.cache_capacity_bits()
    }

    /// Request ranks are content ids, so id order is popularity order.
    fn popularity(&self) -> Vec<ContentId> {
        (0..self.catalog.len()).map(ContentId).collect()
    }

    fn snapshots(&mut self, t: u64, association: &[SbsId]) -> std::result::Result<Vec<SlotSnapshot>, AgentError> {
        let b = self.config.b;
        let mut counts = vec![0u32; b];
        for s in association {
            counts[s.0] += 1;
        }
        // Fading drawn per slot from its own stream so every algorithm sees the same channel.
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, FADING, t));
        let gains = sample_gain_table(&self.radio, &self.topology.sbss, &self.topology.users, self.fading(), &mut rng);
        let slot = self.requests.slot(t as usize % self.requests.horizon());
        let mut snaps: Vec<SlotSnapshot> = (0..b)
            .map(|j| SlotSnapshot {
                sbs: SbsId(j),
                demands: Vec::with_capacity(counts[j] as usize),
                catalog: self.catalog.clone(),
                compute: self.compute,
                deadline_s: self.config.d_ms * 1e-3,
                cache_capacity_bits: self.config.cache_capacity_bits(),
            })
            .collect();
        for (i, s) in association.iter().enumerate() {
            let j = s.0;
            let content = slot[i];
            let uav = self.catalog.get(content).map_err(AgentError::from)?.uav;
            let (down_snr, up_snr) = self.backhaul_snr[uav.0][j];
            let access = access_capacity(
                &self.radio,
                &self.bandwidths,
                &self.topology.sbss[j],
                &self.topology.users[i],
                &self.topology.sbss,
                &self.topology.users,
                &gains,
                counts[j],
            )
            ?;
            snaps[j].demands.push(UserDemand {
                user: UserId(i),
                content,
                uav,
                rates: LinkRates {
                    backhaul_down: shared_capacity(self.bandwidths.backhaul_down_hz, counts[j], down_snr),
                    backhaul_up: shared_capacity(self.bandwidths.backhaul_up_hz, counts[j], up_snr),
                    access_down: access.down_bps,
                    access_up: access.up_bps,
                },
            });
        }
        Ok(snaps)
    }
}
