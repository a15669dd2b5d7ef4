//! Command-line driver: single scenario runs and one-axis parameter
//! sweeps, emitting per-seed CSV reports plus plot-ready aggregate files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use ripple_core::{
    bursts_csv, metrics_csv, packets_csv, parse_scenario, run, transitions_csv, RunOutput,
    Scenario,
};

/// Bursts shorter than this are omitted from the plot-ready aggregates;
/// they are artifacts of single stray packets rather than interruptions.
const BURST_REPORT_FLOOR: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "ripple",
    about = "Deterministic simulator for lifecycle-aware service chain placement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario, one output directory per seed.
    Run {
        /// Scenario config file (flat `key = value` text).
        config: PathBuf,
        /// Directory the CSV reports are written into.
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated seeds overriding the config's `seeds` key.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Re-run one scenario across values of a single parameter axis.
    Sweep {
        /// Scenario config file the sweep starts from.
        config: PathBuf,
        /// Which scenario field the values override.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values, one subdirectory each.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Directory the per-value subdirectories are created under.
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated seeds overriding the config's `seeds` key.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Forecast horizon `forecast.h_seconds`.
    Horizon,
    /// Mobility correlation `mobility.alpha`.
    Alpha,
}

impl Axis {
    fn label(self) -> &'static str {
        match self {
            Axis::Horizon => "horizon",
            Axis::Alpha => "alpha",
        }
    }

    /// Override the swept field, rejecting out-of-range values up front
    /// with the axis name rather than a late engine error.
    fn apply(self, sc: &mut Scenario, value: f64) -> Result<()> {
        match self {
            Axis::Horizon => {
                if value < 0.0 {
                    bail!("horizon value {value} must be >= 0");
                }
                sc.horizon_h = value;
            }
            Axis::Alpha => {
                if !(0.0..=1.0).contains(&value) {
                    bail!("alpha value {value} must be in [0, 1]");
                }
                sc.mobility.alpha = value;
            }
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIPPLE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Run {
            config,
            output,
            seeds,
        } => {
            let sc = load_scenario(&config, seeds)?;
            run_all_seeds(&sc, &output)?;
        }
        Command::Sweep {
            config,
            axis,
            values,
            output,
            seeds,
        } => {
            let sc = load_scenario(&config, seeds)?;
            sweep(&sc, axis, &values, &output)?;
        }
    }
    Ok(())
}

fn load_scenario(path: &Path, seeds: Option<Vec<u64>>) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config `{}`", path.display()))?;
    let mut sc =
        parse_scenario(&text).with_context(|| format!("parsing `{}`", path.display()))?;
    if let Some(seeds) = seeds {
        sc.seeds = seeds;
    }
    if sc.seeds.is_empty() {
        bail!("no seeds: pass --seeds or set `seeds = ...` in the config");
    }
    Ok(sc)
}

// ── single runs ──────────────────────────────────────────────────────────

/// Simulate every seed of the scenario and write one `seed-<n>/` report
/// set under `dir`, plus the cross-seed `summary.csv` and the plot-ready
/// pooled distributions.
fn run_all_seeds(sc: &Scenario, dir: &Path) -> Result<Vec<RunOutput>> {
    fs::create_dir_all(dir).with_context(|| format!("creating `{}`", dir.display()))?;
    let mut outputs = Vec::new();
    for &seed in &sc.seeds {
        let out = run(sc, seed)?;
        info!(
            "seed {seed}: {} packets, unsuccessful ratio {:.4}",
            out.report.total_packets(),
            out.report.overall_ratio()
        );
        let seed_dir = dir.join(format!("seed-{seed}"));
        fs::create_dir_all(&seed_dir)
            .with_context(|| format!("creating `{}`", seed_dir.display()))?;
        write(&seed_dir.join("packets.csv"), &packets_csv(&out.packets))?;
        write(&seed_dir.join("bursts.csv"), &bursts_csv(&out.report))?;
        write(&seed_dir.join("metrics.csv"), &metrics_csv(&out.report))?;
        write(
            &seed_dir.join("vnf_transitions.csv"),
            &transitions_csv(&out.report),
        )?;
        outputs.push(out);
    }
    write(&dir.join("summary.csv"), &summary_csv(sc, &outputs))?;
    write(&dir.join("ccdf_bursts.csv"), &ccdf_bursts_csv(&outputs))?;
    write(&dir.join("cdf_users.csv"), &cdf_users_csv(&outputs))?;
    Ok(outputs)
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing `{}`", path.display()))
}

/// One row per seed plus a `mean` row over the numeric columns.
fn summary_csv(sc: &Scenario, outputs: &[RunOutput]) -> String {
    let mut out = String::from("seed,packets,unsuccessful,unsuccessful_ratio,objective\n");
    let mut ratio_sum = 0.0;
    let mut objective_sum = 0.0;
    for (seed, o) in sc.seeds.iter().zip(outputs) {
        ratio_sum += o.report.overall_ratio();
        objective_sum += o.report.objective;
        out.push_str(&format!(
            "{seed},{},{},{},{}\n",
            o.report.total_packets(),
            o.report.unsuccessful_packets(),
            o.report.overall_ratio(),
            o.report.objective
        ));
    }
    let n = outputs.len() as f64;
    out.push_str(&format!(
        "mean,,,{},{}\n",
        ratio_sum / n,
        objective_sum / n
    ));
    out
}

/// Burst lengths of at least [`BURST_REPORT_FLOOR`], pooled over all seeds
/// and users, sorted ascending.
fn pooled_bursts(outputs: &[RunOutput]) -> Vec<f64> {
    let mut pool: Vec<f64> = outputs
        .iter()
        .flat_map(|o| o.report.per_user.values())
        .flat_map(|m| m.bursts.iter().copied())
        .filter(|&b| b >= BURST_REPORT_FLOOR)
        .collect();
    pool.sort_by(f64::total_cmp);
    pool
}

/// Complementary CDF of pooled burst lengths: for each observed burst, the
/// fraction of bursts strictly longer than it.
fn ccdf_bursts_csv(outputs: &[RunOutput]) -> String {
    let pool = pooled_bursts(outputs);
    let n = pool.len() as f64;
    let mut out = String::from("burst_seconds,ccdf\n");
    for (i, b) in pool.iter().enumerate() {
        out.push_str(&format!("{b},{}\n", (pool.len() - i - 1) as f64 / n));
    }
    out
}

/// CDF over (seed, user) datapoints of the per-user unsuccessful ratio.
fn cdf_users_csv(outputs: &[RunOutput]) -> String {
    let mut ratios: Vec<f64> = outputs
        .iter()
        .flat_map(|o| o.report.per_user.values())
        .map(|m| m.unsuccessful_ratio)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len() as f64;
    let mut out = String::from("unsuccessful_ratio,cdf\n");
    for (i, r) in ratios.iter().enumerate() {
        out.push_str(&format!("{r},{}\n", (i + 1) as f64 / n));
    }
    out
}

// ── sweeps ───────────────────────────────────────────────────────────────

/// Quantiles reported per sweep value, as `(column suffix, q)`.
const SWEEP_QUANTILES: [(&str, f64); 3] = [("p50", 0.5), ("p90", 0.9), ("p99", 0.99)];

/// Run the scenario once per axis value, each into its own subdirectory
/// with the same seed list, then write `sweep_summary.csv` with the mean
/// unsuccessful ratio and pooled burst quantiles per value.
fn sweep(base: &Scenario, axis: Axis, values: &[f64], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating `{}`", dir.display()))?;
    let mut out = String::from("axis,value,mean_unsuccessful_ratio");
    for (name, _) in SWEEP_QUANTILES {
        out.push_str(&format!(",burst_{name}"));
    }
    out.push('\n');
    for &value in values {
        let mut sc = base.clone();
        axis.apply(&mut sc, value)?;
        info!("sweep {} = {value}", axis.label());
        let outputs = run_all_seeds(&sc, &dir.join(format!("{}-{value}", axis.label())))?;
        let mean_ratio = outputs
            .iter()
            .map(|o| o.report.overall_ratio())
            .sum::<f64>()
            / outputs.len() as f64;
        out.push_str(&format!("{},{value},{mean_ratio}", axis.label()));
        let pool = pooled_bursts(&outputs);
        for (_, q) in SWEEP_QUANTILES {
            // Nearest-rank quantile; 0 when the value produced no
            // reportable bursts at all.
            let sample = if pool.is_empty() {
                0.0
            } else {
                let rank = ((q * pool.len() as f64).ceil() as usize).clamp(1, pool.len());
                pool[rank - 1]
            };
            out.push_str(&format!(",{sample}"));
        }
        out.push('\n');
    }
    write(&dir.join("sweep_summary.csv"), &out)
}
