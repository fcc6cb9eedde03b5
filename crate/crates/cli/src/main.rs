//! `fpsched` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fpsched::config::{dbm_to_watts, watts_to_dbm, NetworkConfig, PowerMode};
use fpsched::fp::{run_proposed, FpOptions, InitPolicy};
use fpsched::network::{build_topology, generate_channels, noise_power, Dims};
use fpsched::output;
use fpsched::simulator::{
    drop_seed, joint_vs_perband, power_sweep, run_experiment, run_scheme, slot_seed,
    ExperimentConfig, Scheme,
};
use fpsched::Weights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "fpsched",
    version,
    about = "Multicell beamforming and scheduling experiments"
)]
#[command(arg_required_else_help = true, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Re-run exactly what a previous run's manifest.json describes.
    #[arg(long, value_name = "MANIFEST")]
    replay: Option<PathBuf>,

    /// Output directory for --replay.
    #[arg(long, requires = "replay")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CommandKind {
    Convergence,
    Utility,
    PowerSweep,
    JointVsPerband,
    Bench,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-iteration objective traces on one channel realization.
    Convergence(RunArgs),
    /// Proportional-fair multi-slot runs: sum-log utility, edge rate, rate CDF.
    Utility(RunArgs),
    /// Mean sum rate with unit weights against BS transmit power.
    PowerSweep(RunArgs),
    /// The proposed scheme under joint and per-band power budgets.
    JointVsPerband(RunArgs),
    /// Wall-clock time per slot and per iteration.
    Bench(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum ModeArg {
    Joint,
    Perband,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// JSON network profile (keys as in configs/table1.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Root seed; every drop, slot and random start derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: mf, zf, greedy-wmmse, multicell-wmmse, proposed.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Antennas per BS.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Users per cell.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Frequency bands.
    #[arg(long = "F")]
    f: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long = "power-mode", value_enum)]
    power_mode: Option<ModeArg>,
    /// BS power in dBm; repeat for a sweep.
    #[arg(long = "pt-dbm", allow_negative_numbers = true)]
    pt_dbm: Vec<f64>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSpec {
    command: CommandKind,
    experiment: ExperimentConfig,
    schemes: Vec<Scheme>,
    pt_dbm: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    spec: RunSpec,
    root_seed: u64,
    fpsched_version: String,
    cli_version: String,
    files: Vec<String>,
    wall_time_s: f64,
}

fn resolve(kind: CommandKind, a: &RunArgs) -> Result<RunSpec> {
    let mut net = match &a.config {
        Some(p) => NetworkConfig::from_json_file(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => NetworkConfig::default(),
    };
    if let Some(s) = a.seed {
        net.rng_seed = s;
    }
    if let Some(m) = a.m {
        net.antennas = m;
    }
    if let Some(k) = a.k {
        net.users_per_cell = k;
    }
    if let Some(f) = a.f {
        net.bands = f;
    }
    if let Some(c) = a.cells {
        net.num_cells = c;
    }
    if kind != CommandKind::PowerSweep {
        if let Some(&p) = a.pt_dbm.first() {
            net.power_watts = dbm_to_watts(p);
        }
    }
    let (slots, drops) = match kind {
        CommandKind::Convergence => (1, 1),
        CommandKind::Bench => (5, 1),
        CommandKind::PowerSweep => (10, 10),
        _ => (100, 10),
    };
    let mut experiment = ExperimentConfig {
        network: net,
        slots: a.slots.unwrap_or(slots),
        drops: a.drops.unwrap_or(drops),
        iterations: a.iters.unwrap_or(15),
        power_mode: match a.power_mode {
            Some(ModeArg::Perband) => PowerMode::PerBand,
            _ => PowerMode::Joint,
        },
    };
    if kind == CommandKind::JointVsPerband && a.f.is_none() && a.config.is_none() {
        experiment.network.bands = 3;
    }
    experiment.validate()?;
    let schemes = match &a.schemes {
        Some(list) => list
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<fpsched::Result<Vec<_>>>()?,
        None => match kind {
            CommandKind::Convergence => vec![
                Scheme::GreedyWmmse,
                Scheme::MulticellWmmse,
                Scheme::Proposed,
            ],
            CommandKind::Bench => vec![Scheme::MulticellWmmse, Scheme::Proposed],
            CommandKind::JointVsPerband => vec![Scheme::Proposed],
            _ => Scheme::ALL.to_vec(),
        },
    };
    let pt_dbm = if kind == CommandKind::PowerSweep {
        if a.pt_dbm.is_empty() {
            vec![20.0, 30.0, 40.0, 50.0, 60.0, 70.0]
        } else {
            let mut v = a.pt_dbm.clone();
            v.sort_by(f64::total_cmp);
            v
        }
    } else {
        vec![watts_to_dbm(experiment.network.power_watts)]
    };
    Ok(RunSpec {
        command: kind,
        experiment,
        schemes,
        pt_dbm,
    })
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        output::write(self.dir, name, contents)
            .with_context(|| format!("writing {}", self.dir.join(name).display()))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn convergence(spec: &RunSpec, w: &mut Writer) -> Result<()> {
    let cfg = &spec.experiment;
    let root = cfg.network.rng_seed;
    let mut net = cfg.network.clone();
    net.rng_seed = drop_seed(root, 0);
    let topo = build_topology(&net)?;
    let h = generate_channels(&topo, &net, slot_seed(root, 0, 0));
    let noise = noise_power(&net);
    let weights = Weights::uniform(Dims::from_config(&net), 1.0);
    println!(
        "{:<16} {:>12} {:>12} {:>10}",
        "scheme", "f0 start", "f0 final", "monotone"
    );
    for &s in &spec.schemes {
        let out = if s == Scheme::Proposed {
            let opts = FpOptions {
                iterations: cfg.iterations,
                rel_tolerance: None,
                mode: cfg.power_mode,
            };
            run_proposed(
                &h,
                &noise,
                &weights,
                net.power_watts,
                InitPolicy::Best,
                &opts,
            )
        } else {
            run_scheme(
                s,
                &h,
                &noise,
                &weights,
                net.power_watts,
                cfg.iterations,
                cfg.power_mode,
                0,
                root,
            )
        };
        let f = out.trace.objectives();
        println!(
            "{:<16} {:>12.4} {:>12.4} {:>10}",
            s.tag(),
            f[0],
            f[f.len() - 1],
            out.trace.is_monotone(1e-9)
        );
        w.put(&format!("trace_{}.csv", s.tag()), &out.trace.to_csv())?;
    }
    Ok(())
}

fn utility(spec: &RunSpec, w: &mut Writer) -> Result<()> {
    let mut results = Vec::new();
    println!(
        "{:<16} {:>10} {:>14} {:>14} {:>10}",
        "scheme", "sumlog", "edge [Mbps]", "mean [Mbps]", "ms/slot"
    );
    for &s in &spec.schemes {
        let r = run_experiment(&spec.experiment, s)?;
        let m = &r.metrics;
        println!(
            "{:<16} {:>10.3} {:>14.4} {:>14.4} {:>10.3}",
            s.tag(),
            m.sumlog,
            m.edge_rate_mbps,
            m.mean_rate_mbps,
            r.timing.mean_slot_ms
        );
        w.put(
            &format!("traces_{}.csv", s.tag()),
            &output::slot_traces_csv(&r),
        )?;
        results.push(r);
    }
    w.put("metrics.json", &output::metrics_json(&results))?;
    w.put("rate_cdf.csv", &output::cdf_csv(&results))?;
    w.put("timing.csv", &output::timing_csv(&results))?;
    Ok(())
}

fn sweep(spec: &RunSpec, w: &mut Writer) -> Result<()> {
    let rows = power_sweep(&spec.experiment, &spec.schemes, &spec.pt_dbm)?;
    println!("{:<16} {:>8} {:>14}", "scheme", "PT dBm", "sum [Mbps]");
    for r in &rows {
        println!(
            "{:<16} {:>8} {:>14.3}",
            r.scheme.tag(),
            r.pt_dbm,
            r.sumrate_mbps
        );
    }
    w.put("power_sweep.csv", &output::sweep_csv(&rows))
}

fn modes(spec: &RunSpec, w: &mut Writer) -> Result<()> {
    if spec.experiment.network.bands < 2 {
        log::warn!("single band: joint and per-band budgets coincide");
    }
    let c = joint_vs_perband(&spec.experiment)?;
    println!("{:<10} {:>10} {:>14}", "mode", "sumlog", "edge [Mbps]");
    println!(
        "{:<10} {:>10.3} {:>14.4}",
        "joint", c.joint.sumlog, c.joint.edge_rate_mbps
    );
    println!(
        "{:<10} {:>10.3} {:>14.4}",
        "per-band", c.per_band.sumlog, c.per_band.edge_rate_mbps
    );
    println!("relative sum-log delta {:.4}", c.relative_sumlog_delta());
    let mut json = serde_json::to_string_pretty(&c)?;
    json.push('\n');
    w.put("joint_vs_perband.json", &json)
}

fn bench(spec: &RunSpec, w: &mut Writer) -> Result<()> {
    let mut results = Vec::new();
    println!("{:<16} {:>10} {:>12}", "scheme", "ms/slot", "ms/iter");
    for &s in &spec.schemes {
        let r = run_experiment(&spec.experiment, s)?;
        println!(
            "{:<16} {:>10.3} {:>12.4}",
            s.tag(),
            r.timing.mean_slot_ms,
            r.timing.mean_iteration_ms
        );
        results.push(r);
    }
    w.put("timing.csv", &output::timing_csv(&results))
}

fn execute(spec: &RunSpec, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let start = Instant::now();
    let mut w = Writer {
        dir: out,
        files: Vec::new(),
    };
    match spec.command {
        CommandKind::Convergence => convergence(spec, &mut w)?,
        CommandKind::Utility => utility(spec, &mut w)?,
        CommandKind::PowerSweep => sweep(spec, &mut w)?,
        CommandKind::JointVsPerband => modes(spec, &mut w)?,
        CommandKind::Bench => bench(spec, &mut w)?,
    }
    let manifest = Manifest {
        spec: spec.clone(),
        root_seed: spec.experiment.network.rng_seed,
        fpsched_version: fpsched_version().to_string(),
        cli_version: env!("CARGO_PKG_VERSION").to_string(),
        files: w.files.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    w.put("manifest.json", &json)?;
    Ok(())
}

fn fpsched_version() -> &'static str {
    // The library is versioned in lockstep with the CLI.
    env!("CARGO_PKG_VERSION")
}

fn run(cli: Cli) -> Result<()> {
    if let Some(path) = cli.replay {
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
        m.spec.experiment.validate()?;
        let out = cli.out.unwrap_or_else(|| PathBuf::from("replay"));
        return execute(&m.spec, &out);
    }
    let (kind, args) = match cli.command {
        Some(Command::Convergence(a)) => (CommandKind::Convergence, a),
        Some(Command::Utility(a)) => (CommandKind::Utility, a),
        Some(Command::PowerSweep(a)) => (CommandKind::PowerSweep, a),
        Some(Command::JointVsPerband(a)) => (CommandKind::JointVsPerband, a),
        Some(Command::Bench(a)) => (CommandKind::Bench, a),
        None => bail!("no command given"),
    };
    let spec = resolve(kind, &args)?;
    execute(&spec, &args.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
