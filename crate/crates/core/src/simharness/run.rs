use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::scenario::{agent_config, generate_scenario, Scenario};
use super::stats::{mean, stderr, tail_mean};
use super::{HarnessError, Result};
use crate::agent::{build_agents, learning_round, Algorithm, RoundMetrics};
use crate::content::{ContentCatalog, Format};
use crate::oracle::CachePlan;

/// One learning period of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    /// Period index, from 1.
    pub iter: u64,
    pub round: RoundMetrics,
    /// Wall time of the period, 0 unless requested.
    pub wall_ms: f64,
}

impl MetricsFrame {
    pub fn total_reliability(&self) -> f64 {
        self.round.total_reliability()
    }

    pub fn n_visible(&self) -> usize {
        self.round.sbs.iter().map(|s| s.n_visible).sum()
    }

    pub fn n_360(&self) -> usize {
        self.round.sbs.iter().map(|s| s.n_360).sum()
    }

    pub fn violations(&self) -> u32 {
        self.round.sbs.iter().map(|s| s.violations).sum()
    }
}

/// Storage a cache plan needs with `users` attached, recomputed from the catalog.
pub fn plan_storage_bits(plan: &CachePlan, catalog: &ContentCatalog, users: u32) -> u64 {
    plan.entries
        .iter()
        .map(|(id, f)| {
            let item = &catalog.items()[id.0];
            match f {
                Format::Visible => item.size_visible_bits * users as u64,
                Format::Full360 => item.size_360_bits,
            }
        })
        .sum()
}

/// Last-slot caches of a frame that exceed `capacity_bits`.
pub fn capacity_violations(frame: &MetricsFrame, catalog: &ContentCatalog, capacity_bits: u64) -> usize {
    frame.round.sbs.iter().filter(|s| plan_storage_bits(&s.cache, catalog, s.users) > capacity_bits).count()
}

/// Runs `cfg.iterations` periods on the scenario of `cfg.seed`, passing each
/// frame to `sink` as soon as it is complete.
pub fn run_streaming(
    cfg: &ScenarioConfig,
    mut sink: impl FnMut(&MetricsFrame) -> std::io::Result<()>,
) -> Result<(Scenario, Vec<MetricsFrame>)> {
    let mut env = generate_scenario(cfg, cfg.seed)?;
    let acfg = agent_config(cfg);
    let mut agents = build_agents(&env, &acfg, env.agent_seed())?;
    let mut frames = Vec::with_capacity(cfg.iterations);
    for period in 1..=cfg.iterations as u64 {
        let start = Instant::now();
        let round = learning_round(&mut agents, &mut env, period, cfg.kappa, cfg.n_tau)?;
        let wall_ms = if cfg.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let frame = MetricsFrame { iter: period, round, wall_ms };
        sink(&frame).map_err(|source| HarnessError::Io { frames: frames.len(), source })?;
        log::debug!("period {period}: total reliability {:.3}", frame.total_reliability());
        frames.push(frame);
    }
    Ok((env, frames))
}

pub fn run_experiment(cfg: &ScenarioConfig) -> Result<Vec<MetricsFrame>> {
    Ok(run_streaming(cfg, |_| Ok(()))?.1)
}

/// Per-user reliability over `frames` as `(reliability, fraction of users at
/// or below it)`, one row per distinct value.
pub fn emit_cdf(frames: &[MetricsFrame]) -> Vec<(f64, f64)> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let users = first.round.user_successes.len();
    let mut ok = vec![0u64; users];
    let mut slots = 0u64;
    for f in frames {
        for (o, s) in ok.iter_mut().zip(&f.round.user_successes) {
            *o += *s as u64;
        }
        slots += f.round.slots as u64;
    }
    let mut rel: Vec<f64> = ok.iter().map(|o| *o as f64 / slots as f64).collect();
    rel.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, r) in rel.iter().enumerate() {
        let frac = (k + 1) as f64 / users as f64;
        match out.last_mut() {
            Some(last) if last.0 == *r => last.1 = frac,
            _ => out.push((*r, frac)),
        }
    }
    out
}

/// The tail frames the summaries are taken over.
pub fn tail(frames: &[MetricsFrame], fraction: f64) -> &[MetricsFrame] {
    let k = ((frames.len() as f64 * fraction).ceil() as usize).clamp(1, frames.len().max(1));
    &frames[frames.len().saturating_sub(k)..]
}

/// Per-run summary over the tail frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub total_reliability: f64,
    pub n_visible: f64,
    pub n_360: f64,
    pub violations: u32,
}

pub fn summarize(cfg: &ScenarioConfig, frames: &[MetricsFrame]) -> RunSummary {
    let t = tail(frames, cfg.tail_fraction);
    let series = |f: &dyn Fn(&MetricsFrame) -> f64| t.iter().map(f).collect::<Vec<_>>();
    RunSummary {
        seed: cfg.seed,
        total_reliability: tail_mean(&frames.iter().map(|f| f.total_reliability()).collect::<Vec<_>>(), cfg.tail_fraction),
        n_visible: mean(&series(&|f| f.n_visible() as f64)),
        n_360: mean(&series(&|f| f.n_360() as f64)),
        violations: frames.iter().map(|f| f.violations()).sum(),
    }
}

/// `cfg.seeds` runs with seeds `cfg.seed, cfg.seed + 1, ...`.
pub fn run_seeds(cfg: &ScenarioConfig) -> Result<Vec<RunSummary>> {
    (0..cfg.seeds as u64)
        .map(|k| {
            let c = ScenarioConfig { seed: cfg.seed.wrapping_add(k), ..cfg.clone() };
            let frames = run_experiment(&c)?;
            Ok(summarize(&c, &frames))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SbsCount,
    BackhaulBandwidth,
    CacheSize,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::SbsCount => "b",
            SweepAxis::BackhaulBandwidth => "b_vd_ghz",
            SweepAxis::CacheSize => "s_mbits",
        }
    }
}

/// Resolves a sweep axis name to a config key: `sbs_count`, `backhaul_bw` and
/// `cache_size`, or any config key directly.
pub fn axis_key(name: &str) -> Result<&'static str> {
    let alias = match name {
        "sbs_count" => Some(SweepAxis::SbsCount),
        "backhaul_bw" => Some(SweepAxis::BackhaulBandwidth),
        "cache_size" => Some(SweepAxis::CacheSize),
        _ => None,
    };
    match alias {
        Some(a) => Ok(a.key()),
        None => ScenarioConfig::KEYS.iter().copied().find(|k| *k == name).ok_or_else(|| HarnessError::UnknownAxis(name.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub algorithm: Algorithm,
    pub mean_total_reliability: f64,
    pub stderr: f64,
    pub runs: Vec<RunSummary>,
}

impl SweepRow {
    pub fn mean_n_visible(&self) -> f64 {
        mean(&self.runs.iter().map(|r| r.n_visible).collect::<Vec<_>>())
    }

    pub fn mean_n_360(&self) -> f64 {
        mean(&self.runs.iter().map(|r| r.n_360).collect::<Vec<_>>())
    }

    pub fn per_seed(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.total_reliability).collect()
    }
}

/// Every algorithm at every value of `axis`, over `cfg.seeds` seeds each.
pub fn sweep(cfg: &ScenarioConfig, axis: &str, values: &[String], algorithms: &[Algorithm]) -> Result<Vec<SweepRow>> {
    let key = axis_key(axis)?;
    let mut rows = Vec::new();
    for value in values {
        let mut base = cfg.clone();
        base.set(key, value)?;
        base.validate()?;
        for &algorithm in algorithms {
            let c = ScenarioConfig { algorithm, ..base.clone() };
            let runs = run_seeds(&c)?;
            let per: Vec<f64> = runs.iter().map(|r| r.total_reliability).collect();
            log::info!("{key}={value} {algorithm}: {:.3}", mean(&per));
            rows.push(SweepRow {
                axis_value: value.trim().to_string(),
                algorithm,
                mean_total_reliability: mean(&per),
                stderr: stderr(&per),
                runs,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(alg: Algorithm) -> ScenarioConfig {
        ScenarioConfig {
            algorithm: alg,
            iterations: 4,
            n_tau: 3,
            n_l: 27,
            n_w: 20,
            payload_scale: 0.01,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn every_algorithm_runs_without_violations() {
        for alg in Algorithm::ALL {
            let cfg = tiny(alg);
            let (env, frames) = run_streaming(&cfg, |_| Ok(())).unwrap();
            assert_eq!(frames.len(), 4);
            for f in &frames {
                assert_eq!(f.violations(), 0);
                assert_eq!(capacity_violations(f, &env.catalog, cfg.cache_capacity_bits()), 0);
                assert!(f.total_reliability() <= cfg.u as f64);
                assert_eq!(f.wall_ms, 0.0);
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = tiny(Algorithm::Elsm);
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    }

    #[test]
    fn sink_errors_report_progress() {
        let cfg = tiny(Algorithm::Esn);
        let mut n = 0;
        let err = run_streaming(&cfg, |_| {
            n += 1;
            if n == 3 { Err(std::io::Error::other("disk full")) } else { Ok(()) }
        })
        .unwrap_err();
        assert!(matches!(err, HarnessError::Io { frames: 2, .. }), "{err}");
    }

    #[test]
    fn cdf_of_perfect_users_is_a_single_step() {
        let cfg = tiny(Algorithm::Esn);
        let mut frames = run_experiment(&cfg).unwrap();
        for f in &mut frames {
            let slots = f.round.slots;
            f.round.user_successes.iter_mut().for_each(|s| *s = slots);
        }
        assert_eq!(emit_cdf(&frames), vec![(1.0, 1.0)]);
    }

    #[test]
    fn cdf_is_monotone() {
        let frames = run_experiment(&tiny(Algorithm::Elsm)).unwrap();
        let cdf = emit_cdf(&frames);
        assert_eq!(cdf.last().unwrap().1, 1.0);
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert!(cdf.iter().all(|(r, _)| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn axis_names_resolve() {
        assert_eq!(axis_key("sbs_count").unwrap(), "b");
        assert_eq!(axis_key("kappa").unwrap(), "kappa");
        assert!(matches!(axis_key("nope"), Err(HarnessError::UnknownAxis(_))));
    }

    #[test]
    fn sweep_produces_row_per_value_and_algorithm() {
        let cfg = ScenarioConfig { seeds: 2, ..tiny(Algorithm::Elsm) };
        let rows = sweep(&cfg, "cache_size", &["100".into(), "300".into()], &[Algorithm::Elsm, Algorithm::QLearning]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].axis_value, "300");
        assert_eq!(rows[3].runs.len(), 2);
        assert_eq!(rows[3].runs[1].seed, cfg.seed + 1);
    }
}
