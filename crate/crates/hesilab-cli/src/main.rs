//! `hesilab`: stabilizability analysis from the command line.
//!
//! Exit codes: 0 = run completed (verdict affirmative where one applies),
//! 2 = run completed with verdict "not stabilizable at requested
//! parameters", 1 = the computation itself failed.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hesilab_core::hautus::Variant;
use hesilab_core::models::{
    delay_heat_system, pointwise_heat_system, DelayParams, PeriodicGrid, ThickSetSpec,
};

use commands::{Ctx, Input, ModelRun, Verdict};
use io::{ModelBuild, TolOverrides};

#[derive(Parser)]
#[command(
    name = "hesilab",
    version,
    about = "Quantitative stabilizability analysis for control pairs (A, B)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search the half-plane resolvent-margin constant
    Hesi(HesiArgs),
    /// Weak observability constant at a horizon
    Obs(ObsArgs),
    /// Riccati feedback synthesis with decay certificates
    Synth(SynthArgs),
    /// Profile of the weak observability constant over time
    Decay(DecayArgs),
    /// Build a benchmark model, report its structure, export the system
    Model(ModelArgs),
    /// Cross-module property suites on seeded random ensembles
    Verify(VerifyArgs),
    /// Execute a run-config file (lists expand to a Cartesian sweep)
    Run(RunArgs),
}

#[derive(Args)]
struct InputArgs {
    /// System file: {n, m, A, B, label} with [re, im] complex entries
    #[arg(long)]
    system: Option<PathBuf>,
    /// Model config file: {model, parameters, grid, omega}
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for report files
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized checks, recorded in every report
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads for sweeps (env HESILAB_JOBS overrides)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Coarse search grid override (points per axis)
    #[arg(long = "tol-coarse", global = true)]
    tol_coarse: Option<usize>,
    /// Refinement round override for the constant search
    #[arg(long = "tol-rounds", global = true)]
    tol_rounds: Option<usize>,
    /// Offset of the search rectangle from the half-plane boundary
    #[arg(long = "tol-boundary-offset", global = true)]
    tol_boundary_offset: Option<f64>,
}

impl CommonArgs {
    fn ctx(&self) -> Result<Ctx> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        Ok(Ctx {
            out: self.out.clone(),
            seed: self.seed,
            tol: TolOverrides {
                boundary_offset: self.tol_boundary_offset,
                coarse: self.tol_coarse,
                rounds: self.tol_rounds,
            },
        })
    }
}

#[derive(Args)]
struct HesiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Decay rates to test, comma separated for a sweep
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    beta: Vec<f64>,
    /// Objective weight: weighted | flat | both
    #[arg(long, default_value = "weighted")]
    variant: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ObsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Observation horizons, comma separated for a sweep
    #[arg(long = "T", value_delimiter = ',', default_value = "5.0")]
    horizon: Vec<f64>,
    /// Defect levels in (0, 1), comma separated for a sweep
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    delta: Vec<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Prescribed decay rates; omit for the plain LQ stabilizer
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target decay rates, comma separated for a sweep
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Largest profile time; the grid is 33 uniform points on [0, T]
    #[arg(long = "T", default_value_t = 5.0)]
    horizon: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ModelArgs {
    #[command(subcommand)]
    kind: Option<ModelKind>,
    /// Model config file instead of inline parameters
    #[arg(long)]
    model: Option<PathBuf>,
    /// Run the stabilizability detectors and exit by their verdict
    #[arg(long, global = true)]
    verdict: bool,
    /// Delay models: scan the instability sequence up to this j
    #[arg(long, global = true)]
    scan: Option<usize>,
    /// Decay target for delay-model verdicts (default 0.1)
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct GridFlags {
    /// Spatial dimension of the torus (1 or 2)
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Period of the torus
    #[arg(long)]
    length: f64,
    /// Grid points per axis (a power of two)
    #[arg(long)]
    points: usize,
    /// Control set: interval runs "a:b,c:d" per axis, axes joined by ';'
    #[arg(long)]
    omega: String,
    /// Thickness fraction the control set claims
    #[arg(long)]
    epsilon: f64,
    /// Cube side for the thickness certificate
    #[arg(long = "l-cube")]
    l_cube: f64,
}

impl GridFlags {
    fn build(&self) -> Result<(PeriodicGrid, ThickSetSpec)> {
        let grid = PeriodicGrid::new(self.dim, self.length, self.points)?;
        let intervals: Vec<Vec<(f64, f64)>> = io::parse_omega_pattern(&self.omega)?
            .into_iter()
            .map(|axis| axis.into_iter().map(|[a, b]| (a, b)).collect())
            .collect();
        let spec = ThickSetSpec::from_intervals(&grid, &intervals, self.epsilon, self.l_cube)?;
        Ok((grid, spec))
    }
}

#[derive(Subcommand)]
enum ModelKind {
    /// Heat on (0,1) with potential c and a point actuator at x0
    Pointwise {
        #[arg(long)]
        c: f64,
        /// Actuator position, exact "p/q" or decimal (decimal refuses the criterion)
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 12)]
        modes: usize,
    },
    /// Ginzburg-Landau (a+ib)Laplacian on the torus with a thick control set
    Gl {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Fractional heat -(-Laplacian)^{s/2} on the torus
    Frac {
        #[arg(long)]
        s: f64,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Heat with delayed self-coupling, transport history per mode
    Delay {
        #[arg(long)]
        tau: f64,
        #[arg(long = "m-rho")]
        m_rho: usize,
        /// Retain Fourier modes with max_i |k_i| <= band
        #[arg(long)]
        band: i64,
        #[command(flatten)]
        grid: GridFlags,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Run every suite
    #[arg(long)]
    all: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Run config: {command, system/model, beta/alpha/T/delta, out, seed, tolerances}
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_variants(text: &str) -> Result<Vec<Variant>> {
    match text {
        "weighted" => Ok(vec![Variant::Weighted]),
        "flat" => Ok(vec![Variant::Flat]),
        "both" => Ok(vec![Variant::Weighted, Variant::Flat]),
        other => bail!("unknown variant {other:?}, expected weighted | flat | both"),
    }
}

fn build_inline_model(kind: &ModelKind) -> Result<ModelBuild> {
    match kind {
        ModelKind::Pointwise { c, x0, modes } => {
            let point = io::parse_x0(x0)?;
            let sys = pointwise_heat_system(*c, &point, *modes)?;
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: None,
                pointwise: Some((*c, point)),
                kind: "pointwise",
                detail: format!("c={c} x0={x0} modes={modes}"),
            })
        }
        ModelKind::Gl { a, b, grid } => {
            let (pg, spec) = grid.build()?;
            let thickness = hesilab_core::models::verify_thickness(&pg, &spec)?;
            let sys = hesilab_core::models::ginzburg_landau_system(*a, *b, &pg, &spec)?.into_base();
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: Some(thickness),
                pointwise: None,
                kind: "gl",
                detail: format!("a={a} b={b} modes={}", pg.total_modes()),
            })
        }
        ModelKind::Frac { s, grid } => {
            let (pg, spec) = grid.build()?;
            let thickness = hesilab_core::models::verify_thickness(&pg, &spec)?;
            let sys = hesilab_core::models::fractional_heat_system(*s, &pg, &spec)?.into_base();
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: Some(thickness),
                pointwise: None,
                kind: "frac",
                detail: format!("s={s} modes={}", pg.total_modes()),
            })
        }
        ModelKind::Delay {
            tau,
            m_rho,
            band,
            grid,
        } => {
            if *band < 0 {
                bail!("mode band must be nonnegative, got {band}");
            }
            let (pg, spec) = grid.build()?;
            let thickness = hesilab_core::models::verify_thickness(&pg, &spec)?;
            let modes = pg.modes_with_max_abs_k(*band);
            let params = DelayParams::new(*tau, modes, *m_rho, spec, pg)?;
            let sys = delay_heat_system(&params)?;
            Ok(ModelBuild {
                system: sys,
                delay: Some(params),
                thickness: Some(thickness),
                pointwise: None,
                kind: "delay",
                detail: format!("tau={tau} m_rho={m_rho} band={band}"),
            })
        }
    }
}

fn init_jobs(flag: Option<usize>) -> Result<()> {
    let env = std::env::var("HESILAB_JOBS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .context("HESILAB_JOBS is not an integer")
        })
        .transpose()?;
    if let Some(n) = env.or(flag) {
        if n == 0 {
            bail!("worker count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Verdict> {
    match cli.cmd {
        Cmd::Hesi(args) => {
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            let input = Input::load(args.input.system.as_deref(), args.input.model.as_deref())?;
            let variants = parse_variants(&args.variant)?;
            commands::hesi(&input, &args.beta, &variants, &ctx)
        }
        Cmd::Obs(args) => {
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            let input = Input::load(args.input.system.as_deref(), args.input.model.as_deref())?;
            commands::obs(&input, &args.horizon, &args.delta, &ctx)
        }
        Cmd::Synth(args) => {
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            let input = Input::load(args.input.system.as_deref(), args.input.model.as_deref())?;
            commands::synth(&input, args.alpha.as_deref(), &ctx)
        }
        Cmd::Decay(args) => {
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            let input = Input::load(args.input.system.as_deref(), args.input.model.as_deref())?;
            commands::decay(&input, &args.alpha, args.horizon, &ctx)
        }
        Cmd::Model(args) => {
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            let build = match (&args.kind, &args.model) {
                (Some(kind), None) => build_inline_model(kind)?,
                (None, Some(path)) => io::load_model(path)?,
                _ => bail!("pass a model kind or --model, not both"),
            };
            let run = ModelRun {
                verdict: args.verdict,
                scan: args.scan,
                alpha: args.alpha,
            };
            commands::model(&build, &run, &ctx)
        }
        Cmd::Verify(args) => {
            if !args.all {
                bail!("nothing selected: pass --all");
            }
            init_jobs(args.common.jobs)?;
            let ctx = args.common.ctx()?;
            commands::verify(args.common.seed, &ctx)
        }
        Cmd::Run(args) => {
            init_jobs(args.common.jobs)?;
            commands::run_config(&args.config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(Verdict::Affirmative) => ExitCode::from(0),
        Ok(Verdict::Negative) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
