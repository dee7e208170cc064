//! `burstsim`: command-line driver for the simulators and experiments.
//!
//! Every subcommand reads a JSON config and writes CSV whose first line is
//! `# burstsim <version> <seed> <sha256 of the config file>`. Exit codes:
//! 0 on success, 2 for configuration problems, 3 for numerical guards.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use burstsim::experiments::{
    auto_stationary_pmf, parse_config, round_down, run_ergodicity, run_stationary_convergence,
    run_trajectory_convergence, ConditionsConfig, DynkinConfig, ErgodicityConfig, SimulateConfig,
    StationaryConfig, StationaryConvergenceConfig, TrajectoryConvergenceConfig, TOOL_VERSION,
};
use burstsim::gddmc::{simulate_gddmc, SimConfig, DEFAULT_MAX_EVENTS};
use burstsim::model::ModelKind;
use burstsim::pdmp::{simulate_pdmp, PdmpConfig};
use burstsim::rng::replica_rng;
use burstsim::stationary::{gene_gddmc_stationary_pmf, gene_pdmp_stationary_density, truncated_stationary_solve};
use burstsim::trajectory::{Status, Trajectory};
use burstsim::{DiscreteDistribution, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "burstsim", version, about = "Bursty gene-expression chains and their piecewise-deterministic limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replica count, overriding the config.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact chain trajectories.
    SimulateGddmc(Common),
    /// Limit-process trajectories.
    SimulatePdmp {
        #[command(flatten)]
        common: Common,
        /// Emit the flow-interpolated path on a uniform grid of this spacing.
        #[arg(long)]
        dense: Option<f64>,
    },
    /// Stationary pmf of the chain, or the limit density with `--grid`.
    Stationary {
        #[command(flatten)]
        common: Common,
        /// Number of density grid points.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// W1 between chain and limit marginals across scales.
    ConvergeTrajectory(Common),
    /// W1 between the stationary pmf and the limit density across scales.
    ConvergeStationary(Common),
    /// Coupled-path contraction rate.
    Ergodicity(Common),
    /// Burst-law limit conditions.
    CheckConditions(Common),
    /// Dynkin residuals on both simulators.
    Dynkin(Common),
}

struct Output {
    buf: Vec<u8>,
    /// Whether a numerical guard tripped while producing `buf`.
    guard: bool,
}

impl Output {
    fn new(common: &Common, config: &[u8]) -> Self {
        let hash = hex::encode(Sha256::digest(config));
        let mut buf = Vec::new();
        writeln!(buf, "# burstsim {TOOL_VERSION} {} {hash}", common.seed).expect("write to memory");
        Self { buf, guard: false }
    }
}

fn read_config(common: &Common) -> Result<Vec<u8>> {
    fs::read(&common.config).map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))
}

fn text(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))
}

fn write_status(out: &mut Output, status: Status) -> Result<()> {
    if status == Status::GuardTripped {
        out.guard = true;
        writeln!(out.buf, "# status {status}")?;
    }
    Ok(())
}

fn simulate_gddmc_cmd(common: &Common, out: &mut Output, cfg: &SimulateConfig) -> Result<()> {
    let (chain, _) = cfg.model.build(None)?;
    let n0 = round_down(&cfg.x0, chain.scale());
    let sim = SimConfig::with_max_events(cfg.max_events.unwrap_or(DEFAULT_MAX_EVENTS));
    let reps = common.reps.unwrap_or(1);
    for k in 0..reps {
        let traj = simulate_gddmc(&chain, &n0, cfg.horizon, sim, &mut replica_rng(common.seed, k as u64))?;
        if reps > 1 {
            writeln!(out.buf, "# replica {k}")?;
        }
        traj.write_csv(&mut out.buf, false)?;
        write_status(out, traj.status)?;
    }
    Ok(())
}

fn write_dense(out: &mut Output, traj: &Trajectory<f64>, eval: &burstsim::pdmp::FlowEvaluator<'_>, dt: f64) -> Result<()> {
    let d = traj.initial.len();
    write!(out.buf, "t,segment")?;
    for i in 0..d {
        write!(out.buf, ",state_{i}")?;
    }
    writeln!(out.buf)?;
    let steps = (traj.horizon / dt).floor() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let (origin_time, origin) = traj.last_event_before(t);
        let x = eval.flow(origin, t - origin_time)?;
        write!(out.buf, "{t},{}", traj.count_until(t))?;
        for v in x {
            write!(out.buf, ",{v}")?;
        }
        writeln!(out.buf)?;
    }
    Ok(())
}

fn simulate_pdmp_cmd(common: &Common, out: &mut Output, cfg: &SimulateConfig, dense: Option<f64>) -> Result<()> {
    let (_, limit) = cfg.model.build(Some(cfg.model.scale().unwrap_or(1.0)))?;
    if let Some(dt) = dense {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("--dense needs a positive spacing, got {dt}")));
        }
    }
    let sim = PdmpConfig {
        max_jumps: cfg.max_events.unwrap_or(DEFAULT_MAX_EVENTS),
        ..Default::default()
    };
    let eval = sim.evaluator(&limit)?;
    let reps = common.reps.unwrap_or(1);
    for k in 0..reps {
        let traj = simulate_pdmp(&limit, &cfg.x0, cfg.horizon, sim, &mut replica_rng(common.seed, k as u64))?;
        if reps > 1 {
            writeln!(out.buf, "# replica {k}")?;
        }
        match dense {
            Some(dt) => write_dense(out, &traj, &eval, dt)?,
            None => traj.write_csv(&mut out.buf, true)?,
        }
        write_status(out, traj.status)?;
    }
    Ok(())
}

fn write_pmf(out: &mut Output, dist: &DiscreteDistribution) -> Result<()> {
    writeln!(out.buf, "x,probability")?;
    for (x, p) in dist.iter() {
        writeln!(out.buf, "{x},{p}")?;
    }
    Ok(())
}

fn stationary_cmd(out: &mut Output, cfg: &StationaryConfig, grid: Option<usize>) -> Result<()> {
    if let Some(n) = grid {
        if n == 0 {
            return Err(Error::Config("--grid needs at least one point".into()));
        }
        let density = gene_pdmp_stationary_density(&cfg.model.gene_params(Some(cfg.model.scale().unwrap_or(1.0)))?)?;
        writeln!(out.buf, "x,density")?;
        for (x, p) in density.grid(n) {
            writeln!(out.buf, "{x},{p}")?;
        }
        return Ok(());
    }
    let dist = match (cfg.model.kind, cfg.n_max) {
        (ModelKind::Gene, Some(n_max)) => gene_gddmc_stationary_pmf(&cfg.model.gene_params(None)?, n_max)?,
        (ModelKind::Gene, None) => auto_stationary_pmf(&cfg.model.gene_params(None)?)?.distribution,
        (_, Some(n_max)) => truncated_stationary_solve(&cfg.model.build(None)?.0, n_max)?,
        (_, None) => return Err(Error::Config("non-gene models need n_max".into())),
    };
    write_pmf(out, &dist)
}

fn run(command: &Command) -> Result<Output> {
    let common = match command {
        Command::SimulateGddmc(c)
        | Command::ConvergeTrajectory(c)
        | Command::ConvergeStationary(c)
        | Command::Ergodicity(c)
        | Command::CheckConditions(c)
        | Command::Dynkin(c) => c,
        Command::SimulatePdmp { common, .. } | Command::Stationary { common, .. } => common,
    };
    let raw = read_config(common)?;
    let json = text(&raw)?;
    let mut out = Output::new(common, &raw);
    let seed = common.seed;
    match command {
        Command::SimulateGddmc(_) => simulate_gddmc_cmd(common, &mut out, &parse_config(json)?)?,
        Command::SimulatePdmp { dense, .. } => simulate_pdmp_cmd(common, &mut out, &parse_config(json)?, *dense)?,
        Command::Stationary { grid, .. } => stationary_cmd(&mut out, &parse_config(json)?, *grid)?,
        Command::ConvergeTrajectory(_) => {
            let mut cfg: TrajectoryConvergenceConfig = parse_config(json)?;
            if let Some(n) = common.reps {
                cfg.replicas = n;
            }
            run_trajectory_convergence(&cfg, seed)?.report(seed).write_csv(&mut out.buf)?;
        }
        Command::ConvergeStationary(_) => {
            let cfg: StationaryConvergenceConfig = parse_config(json)?;
            run_stationary_convergence(&cfg)?.report(seed).write_csv(&mut out.buf)?;
        }
        Command::Ergodicity(_) => {
            let mut cfg: ErgodicityConfig = parse_config(json)?;
            if let Some(n) = common.reps {
                cfg.replicas = n;
            }
            run_ergodicity(&cfg, seed)?.report(seed).write_csv(&mut out.buf)?;
        }
        Command::CheckConditions(_) => {
            let cfg: ConditionsConfig = parse_config(json)?;
            cfg.run()?.report(seed).write_csv(&mut out.buf)?;
        }
        Command::Dynkin(_) => {
            let mut cfg: DynkinConfig = parse_config(json)?;
            if let Some(n) = common.reps {
                cfg.replicas = n;
            }
            cfg.run(seed)?.report(seed).write_csv(&mut out.buf)?;
        }
    }
    Ok(out)
}

fn destination(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::SimulateGddmc(c)
        | Command::ConvergeTrajectory(c)
        | Command::ConvergeStationary(c)
        | Command::Ergodicity(c)
        | Command::CheckConditions(c)
        | Command::Dynkin(c) => c.out.as_ref(),
        Command::SimulatePdmp { common, .. } | Command::Stationary { common, .. } => common.out.as_ref(),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let out = match run(&cli.command) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("burstsim: {e}");
            return ExitCode::from(if e.is_config() { 2 } else { 3 });
        }
    };
    let written = match destination(&cli.command) {
        Some(path) => fs::write(path, &out.buf),
        None => std::io::stdout().write_all(&out.buf),
    };
    if let Err(e) = written {
        eprintln!("burstsim: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if out.guard {
        eprintln!("burstsim: a simulation hit its event cap");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
