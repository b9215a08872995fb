use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use elsm_core::agent::Algorithm;
use elsm_core::simharness::{
    cdf_gnuplot, create, emit_cdf, metrics_gnuplot, run_streaming, summarize, sweep, sweep_gnuplot, write_cdf_csv,
    write_sweep_csv, write_text, MetricsWriter, ScenarioConfig,
};

/// Runs a caching and association learning experiment or a parameter sweep.
#[derive(Debug, Parser)]
#[command(name = "elsm-sim", version)]
struct Cli {
    /// key=value config file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    iterations: Option<usize>,
    /// AXIS=v1,v2,... with AXIS one of sbs_count, backhaul_bw, cache_size or a config key.
    #[arg(long)]
    sweep: Option<String>,
    /// Algorithms compared in a sweep, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    /// Extra KEY=VALUE overrides, applied after the config file.
    #[arg(long = "set")]
    overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScenarioConfig::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    for o in &cli.overrides {
        let Some((k, v)) = o.split_once('=') else { bail!("--set expects KEY=VALUE, got `{o}`") };
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(a) = cli.algorithm {
        cfg.algorithm = a;
    }
    if let Some(n) = cli.iterations {
        cfg.iterations = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_single(cfg: &ScenarioConfig, out: &std::path::Path) -> Result<()> {
    let mut writer = MetricsWriter::new(create(&out.join("metrics.csv"))?)?;
    let (_, frames) = run_streaming(cfg, |f| writer.write_frame(f))?;
    writer.finish()?;
    let tail = elsm_core::simharness::tail(&frames, cfg.tail_fraction);
    write_cdf_csv(&out.join("cdf.csv"), &emit_cdf(tail))?;
    write_text(&out.join("metrics.gp"), &metrics_gnuplot("metrics.csv"))?;
    write_text(&out.join("cdf.gp"), &cdf_gnuplot("cdf.csv"))?;
    let s = summarize(cfg, &frames);
    println!(
        "{} seed {}: tail total reliability {:.4}, visible {:.2}, 360 {:.2}, violations {}",
        cfg.algorithm, cfg.seed, s.total_reliability, s.n_visible, s.n_360, s.violations
    );
    Ok(())
}

fn run_sweep(cfg: &ScenarioConfig, spec: &str, algorithms: &[Algorithm], out: &std::path::Path) -> Result<()> {
    let Some((axis, list)) = spec.split_once('=') else { bail!("--sweep expects AXIS=v1,v2,...") };
    let values: Vec<String> = list.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("--sweep needs at least one value");
    }
    let rows = sweep(cfg, axis.trim(), &values, algorithms)?;
    write_sweep_csv(&out.join("sweep.csv"), &rows)?;
    let names: Vec<String> = algorithms.iter().map(|a| a.to_string()).collect();
    write_text(&out.join("sweep.gp"), &sweep_gnuplot("sweep.csv", axis.trim(), &names))?;
    for r in &rows {
        println!("{}={} {}: {:.4} +- {:.4}", axis, r.axis_value, r.algorithm, r.mean_total_reliability, r.stderr);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELSM_LOG", "warn")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    std::fs::create_dir_all(&cli.output).with_context(|| format!("creating {}", cli.output.display()))?;
    write_text(&cli.output.join("config.txt"), &cfg.to_text())?;
    log::info!("writing to {}", cli.output.display());
    match &cli.sweep {
        Some(spec) => {
            let algorithms = if cli.algorithms.is_empty() { Algorithm::ALL.to_vec() } else { cli.algorithms.clone() };
            run_sweep(&cfg, spec, &algorithms, &cli.output)
        }
        None => run_single(&cfg, &cli.output),
    }
}
