//! Command implementations shared by the flag and config-file entry points.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hesilab_core::hautus::{
    hesi_constant, hesi_constant_for, hsf_test, HesiReport, SearchConfig, Variant,
};
use hesilab_core::models::{
    delay_dissipativity_sample, delay_instability_scan, delay_margin_oracle, delay_stabilize,
    pointwise_criterion, DelayParams,
};
use hesilab_core::observability::{weak_obs_decay_profile, weak_obs_min_c};
use hesilab_core::synthesis::{rapid_feedback, stabilizing_feedback, FeedbackReport};
use hesilab_core::verify::verify_all;
use hesilab_core::{tol, ControlSystem, Error};
use rayon::prelude::*;

use crate::io::{self, fmt_g17, CsvWriter, ModelBuild, TolOverrides};

/// Outcome of a completed run, mapped to the process exit code: a negative
/// verdict exits 2 so batch studies can tally without parsing reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Affirmative,
    Negative,
}

const SWEEP_CAP: usize = 10_000;

fn check_cap(points: usize) -> Result<()> {
    if points > SWEEP_CAP {
        bail!("sweep expands to {points} runs, over the cap of {SWEEP_CAP}");
    }
    Ok(())
}

pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
    pub tol: TolOverrides,
}

impl Ctx {
    fn search_config(&self, large_model: bool) -> SearchConfig {
        let mut cfg = if large_model {
            SearchConfig::coarse_for_models()
        } else {
            SearchConfig::default()
        };
        if let Some(b) = self.tol.boundary_offset {
            cfg.boundary_offset = Some(b);
        }
        if let Some(c) = self.tol.coarse {
            cfg.coarse_re = c;
            cfg.coarse_im = c;
        }
        if let Some(r) = self.tol.rounds {
            cfg.refine_rounds = r;
        }
        cfg
    }

    fn search_tol_line(&self, cfg: &SearchConfig) -> String {
        format!(
            "tolerances: coarse_grid={}x{} refine_rounds={} boundary_offset={} margin_sentinel_rel={:e}\n",
            cfg.coarse_re,
            cfg.coarse_im,
            cfg.refine_rounds,
            cfg.boundary_offset
                .map_or_else(|| "auto".to_string(), |b| format!("{b:e}")),
            tol::MARGIN_SENTINEL_REL,
        )
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// What an analysis command operates on. Delay models keep their block
/// structure so the margin search can use the per-block oracle instead of
/// dense sweeps over the composite.
pub enum Input {
    Plain(ControlSystem),
    Delay {
        params: Box<DelayParams>,
        system: ControlSystem,
    },
}

impl Input {
    pub fn system(&self) -> &ControlSystem {
        match self {
            Self::Plain(sys) => sys,
            Self::Delay { system, .. } => system,
        }
    }

    pub fn load(system: Option<&Path>, model: Option<&Path>) -> Result<Self> {
        match (system, model) {
            (Some(path), None) => Ok(Self::Plain(io::load_system(path)?)),
            (None, Some(path)) => Ok(Self::from_build(io::load_model(path)?)),
            _ => bail!("pass exactly one of --system or --model"),
        }
    }

    pub fn from_build(build: ModelBuild) -> Self {
        match build.delay {
            Some(params) => Self::Delay {
                params: Box::new(params),
                system: build.system,
            },
            None => Self::Plain(build.system),
        }
    }
}

fn header(cmd: &str, sys: &ControlSystem, ctx: &Ctx) -> String {
    format!(
        "hesilab {cmd} report\nsystem: {} (n={}, m={})\nseed: {}\n",
        sys.label(),
        sys.n(),
        sys.m(),
        ctx.seed
    )
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Weighted => "weighted",
        Variant::Flat => "flat",
    }
}

pub fn hesi(input: &Input, betas: &[f64], variants: &[Variant], ctx: &Ctx) -> Result<Verdict> {
    if betas.is_empty() || variants.is_empty() {
        bail!("no beta values given");
    }
    let points: Vec<(f64, Variant)> = betas
        .iter()
        .flat_map(|&b| variants.iter().map(move |&v| (b, v)))
        .collect();
    check_cap(points.len())?;
    let cfg = ctx.search_config(matches!(input, Input::Delay { .. }));
    let reports: Vec<HesiReport> = match input {
        Input::Plain(sys) => points
            .par_iter()
            .map(|&(b, v)| hesi_constant(sys, b, v, &cfg))
            .collect::<hesilab_core::Result<_>>()?,
        Input::Delay { params, .. } => {
            let oracle = delay_margin_oracle(params)?;
            points
                .par_iter()
                .map(|&(b, v)| hesi_constant_for(&oracle, b, v, &cfg))
                .collect::<hesilab_core::Result<_>>()?
        }
    };

    let mut csv = CsvWriter::new(&[
        "beta",
        "variant",
        "constant",
        "witness_re",
        "witness_im",
        "converged",
    ]);
    for r in &reports {
        csv.row([
            fmt_g17(r.beta),
            variant_name(r.variant).to_string(),
            fmt_g17(r.constant),
            fmt_g17(r.witness_re),
            fmt_g17(r.witness_im),
            r.converged.to_string(),
        ]);
    }
    io::write_file(&ctx.path("hesi_report.csv"), &csv.finish())?;

    let mut txt = header("hesi", input.system(), ctx);
    txt += &ctx.search_tol_line(&cfg);
    for r in &reports {
        txt += &format!(
            "beta={} variant={} constant={} witness=({}, {}) converged={} grid_gap={} tail_bound={} dim={}\n",
            fmt_g17(r.beta),
            variant_name(r.variant),
            fmt_g17(r.constant),
            fmt_g17(r.witness_re),
            fmt_g17(r.witness_im),
            r.converged,
            fmt_g17(r.grid_gap),
            fmt_g17(r.tail_bound),
            r.truncation_dim,
        );
    }
    let negative = reports.iter().any(|r| !r.constant.is_finite());
    txt += if negative {
        "verdict: not stabilizable at the requested parameters\n"
    } else {
        "verdict: half-plane constant finite at every requested point\n"
    };
    io::write_file(&ctx.path("hesi_report.txt"), &txt)?;
    println!(
        "hesi: {} point(s), reports in {}",
        reports.len(),
        ctx.out.display()
    );
    Ok(if negative {
        Verdict::Negative
    } else {
        Verdict::Affirmative
    })
}

pub fn obs(input: &Input, horizons: &[f64], deltas: &[f64], ctx: &Ctx) -> Result<Verdict> {
    if horizons.is_empty() || deltas.is_empty() {
        bail!("no (T, delta) values given");
    }
    let points: Vec<(f64, f64)> = horizons
        .iter()
        .flat_map(|&t| deltas.iter().map(move |&d| (t, d)))
        .collect();
    check_cap(points.len())?;
    let sys = input.system();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(t, d)| weak_obs_min_c(sys, t, d))
        .collect::<hesilab_core::Result<_>>()?;

    let mut csv = CsvWriter::new(&["T", "delta", "constant"]);
    for (&(t, d), &c) in points.iter().zip(&values) {
        csv.row([fmt_g17(t), fmt_g17(d), fmt_g17(c)]);
    }
    io::write_file(&ctx.path("obs_report.csv"), &csv.finish())?;

    let mut txt = header("obs", sys, ctx);
    txt += &format!("tolerances: pencil_rel={:e}\n", tol::PENCIL_REL_TOL);
    for (&(t, d), &c) in points.iter().zip(&values) {
        txt += &format!("T={} delta={} constant={}\n", fmt_g17(t), fmt_g17(d), fmt_g17(c));
    }
    let negative = values.iter().any(|c| !c.is_finite());
    txt += if negative {
        "verdict: weak observability fails at the requested parameters\n"
    } else {
        "verdict: weak observability constant finite at every requested point\n"
    };
    io::write_file(&ctx.path("obs_report.txt"), &txt)?;
    println!(
        "obs: {} point(s), reports in {}",
        values.len(),
        ctx.out.display()
    );
    Ok(if negative {
        Verdict::Negative
    } else {
        Verdict::Affirmative
    })
}

/// `NotStabilizable` from a synthesis routine is the verdict the exit code
/// reports, not a failure of the run itself.
fn split_verdict<T>(res: hesilab_core::Result<T>) -> Result<std::result::Result<T, String>> {
    match res {
        Ok(v) => Ok(Ok(v)),
        Err(Error::NotStabilizable(msg)) => Ok(Err(msg)),
        Err(e) => Err(e.into()),
    }
}

pub fn synth(input: &Input, alphas: Option<&[f64]>, ctx: &Ctx) -> Result<Verdict> {
    match input {
        Input::Plain(sys) => synth_plain(sys, alphas, ctx),
        Input::Delay { params, .. } => {
            let alphas =
                alphas.ok_or_else(|| anyhow::anyhow!("synth on a delay model needs --alpha"))?;
            synth_delay(params, alphas, ctx)
        }
    }
}

fn synth_plain(sys: &ControlSystem, alphas: Option<&[f64]>, ctx: &Ctx) -> Result<Verdict> {
    let targets: Vec<Option<f64>> = match alphas {
        None => vec![None],
        Some(list) => list.iter().map(|&a| Some(a)).collect(),
    };
    check_cap(targets.len())?;
    let rows: Vec<(Option<f64>, std::result::Result<FeedbackReport, String>)> = targets
        .par_iter()
        .map(|&a| {
            let res = match a {
                None => stabilizing_feedback(sys),
                Some(rate) => rapid_feedback(sys, rate),
            };
            split_verdict(res).map(|r| (a, r))
        })
        .collect::<Result<_>>()?;

    let mut csv = CsvWriter::new(&["alpha_target", "alpha", "c1", "c2", "certified"]);
    for (target, row) in &rows {
        let t = target.map_or_else(|| "auto".to_string(), fmt_g17);
        match row {
            Ok(rep) => csv.row([
                t,
                fmt_g17(rep.alpha),
                fmt_g17(rep.c1),
                fmt_g17(rep.c2),
                rep.certified.to_string(),
            ]),
            Err(_) => csv.row([t, String::new(), String::new(), String::new(), "false".into()]),
        }
    }
    io::write_file(&ctx.path("synth_report.csv"), &csv.finish())?;

    let mut txt = header("synth", sys, ctx);
    txt += &format!(
        "tolerances: riccati_axis={:e} riccati_residual_rel={:e}\n",
        tol::RICCATI_AXIS_TOL,
        tol::RICCATI_RESIDUAL_REL
    );
    let single = rows.len() == 1;
    let mut negative = false;
    for (idx, (target, row)) in rows.iter().enumerate() {
        let t = target.map_or_else(|| "auto".to_string(), fmt_g17);
        match row {
            Ok(rep) => {
                txt += &format!(
                    "target={} alpha={} c1={} c2={} certified={}\n",
                    t,
                    fmt_g17(rep.alpha),
                    fmt_g17(rep.c1),
                    fmt_g17(rep.c2),
                    rep.certified
                );
                negative |= !rep.certified;
                let (gain_name, cl_name) = if single {
                    ("gain.json".to_string(), "closed_loop.json".to_string())
                } else {
                    (format!("gain_{idx:03}.json"), format!("closed_loop_{idx:03}.json"))
                };
                io::save_matrix(&ctx.path(&gain_name), &rep.k, "feedback gain")?;
                let a_cl = sys.a() + sys.b() * &rep.k;
                let closed = ControlSystem::new(
                    a_cl,
                    sys.b().clone(),
                    format!("{} closed loop", sys.label()),
                )?;
                io::save_system(&ctx.path(&cl_name), &closed)?;
                txt += &format!("export: {gain_name} {cl_name}\n");
            }
            Err(msg) => {
                txt += &format!("target={t} not stabilizable: {msg}\n");
                negative = true;
            }
        }
    }
    txt += if negative {
        "verdict: not stabilizable at the requested parameters\n"
    } else {
        "verdict: feedback certified at every requested point\n"
    };
    io::write_file(&ctx.path("synth_report.txt"), &txt)?;
    println!(
        "synth: {} target(s), reports in {}",
        rows.len(),
        ctx.out.display()
    );
    Ok(if negative {
        Verdict::Negative
    } else {
        Verdict::Affirmative
    })
}

fn synth_delay(params: &DelayParams, alphas: &[f64], ctx: &Ctx) -> Result<Verdict> {
    check_cap(alphas.len())?;
    let rows: Vec<(f64, std::result::Result<_, String>)> = alphas
        .iter()
        .map(|&a| split_verdict(delay_stabilize(params, a)).map(|r| (a, r)))
        .collect::<Result<_>>()?;

    let mut csv = CsvWriter::new(&["alpha_target", "alpha", "fed_count", "certified"]);
    for (target, row) in &rows {
        match row {
            Ok(rep) => csv.row([
                fmt_g17(*target),
                fmt_g17(rep.alpha),
                rep.fed_modes.len().to_string(),
                rep.certified.to_string(),
            ]),
            Err(_) => csv.row([fmt_g17(*target), String::new(), String::new(), "false".into()]),
        }
    }
    io::write_file(&ctx.path("synth_report.csv"), &csv.finish())?;

    let mut txt = format!(
        "hesilab synth report\nmodel: delayed heat tau={} m_rho={} retained_modes={}\nseed: {}\n",
        params.tau,
        params.m_rho,
        params.modes.len(),
        ctx.seed
    );
    txt += &format!(
        "tolerances: riccati_axis={:e} riccati_residual_rel={:e}\n",
        tol::RICCATI_AXIS_TOL,
        tol::RICCATI_RESIDUAL_REL
    );
    let single = rows.len() == 1;
    let mut negative = false;
    for (idx, (target, row)) in rows.iter().enumerate() {
        match row {
            Ok(rep) => {
                txt += &format!(
                    "target={} alpha={} fed_modes={:?} certified={}\n",
                    fmt_g17(*target),
                    fmt_g17(rep.alpha),
                    rep.fed_modes,
                    rep.certified
                );
                negative |= !rep.certified;
                let gain_name = if single {
                    "gain.json".to_string()
                } else {
                    format!("gain_{idx:03}.json")
                };
                io::save_matrix(&ctx.path(&gain_name), &rep.gain, "delay feedback gain")?;
                txt += &format!("export: {gain_name}\n");
            }
            Err(msg) => {
                txt += &format!("target={} not stabilizable: {msg}\n", fmt_g17(*target));
                negative = true;
            }
        }
    }
    txt += if negative {
        "verdict: not stabilizable at the requested parameters\n"
    } else {
        "verdict: feedback certified at every requested point\n"
    };
    io::write_file(&ctx.path("synth_report.txt"), &txt)?;
    println!(
        "synth: {} target(s), reports in {}",
        rows.len(),
        ctx.out.display()
    );
    Ok(if negative {
        Verdict::Negative
    } else {
        Verdict::Affirmative
    })
}

pub fn decay(input: &Input, alphas: &[f64], t_max: f64, ctx: &Ctx) -> Result<Verdict> {
    if alphas.is_empty() {
        bail!("no alpha values given");
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        bail!("profile horizon must be positive, got {t_max}");
    }
    let grid: Vec<f64> = (0..=32).map(|k| t_max * k as f64 / 32.0).collect();
    check_cap(alphas.len() * grid.len())?;
    let sys = input.system();
    let profiles: Vec<Vec<(f64, f64)>> = alphas
        .par_iter()
        .map(|&a| weak_obs_decay_profile(sys, a, &grid))
        .collect::<hesilab_core::Result<_>>()?;

    let single = alphas.len() == 1;
    let mut csv = if single {
        CsvWriter::new(&["t", "c_min"])
    } else {
        CsvWriter::new(&["alpha", "t", "c_min"])
    };
    for (&a, profile) in alphas.iter().zip(&profiles) {
        for &(t, c) in profile {
            if single {
                csv.row([fmt_g17(t), fmt_g17(c)]);
            } else {
                csv.row([fmt_g17(a), fmt_g17(t), fmt_g17(c)]);
            }
        }
    }
    io::write_file(&ctx.path("decay_profile.csv"), &csv.finish())?;

    let mut txt = header("decay", sys, ctx);
    txt += &format!("tolerances: pencil_rel={:e}\n", tol::PENCIL_REL_TOL);
    let mut negative = false;
    for (&a, profile) in alphas.iter().zip(&profiles) {
        let worst = profile.iter().map(|&(_, c)| c).fold(0.0f64, f64::max);
        negative |= !worst.is_finite();
        txt += &format!(
            "alpha={} grid={} points max_c={}\n",
            fmt_g17(a),
            profile.len(),
            fmt_g17(worst)
        );
    }
    txt += if negative {
        "verdict: decay profile unbounded at the requested parameters\n"
    } else {
        "verdict: decay profile finite on the sampled grid\n"
    };
    io::write_file(&ctx.path("decay_report.txt"), &txt)?;
    println!(
        "decay: {} profile(s), reports in {}",
        profiles.len(),
        ctx.out.display()
    );
    Ok(if negative {
        Verdict::Negative
    } else {
        Verdict::Affirmative
    })
}

pub struct ModelRun {
    pub verdict: bool,
    pub scan: Option<usize>,
    pub alpha: Option<f64>,
}

pub fn model(build: &ModelBuild, run: &ModelRun, ctx: &Ctx) -> Result<Verdict> {
    let sys = &build.system;
    let mut txt = format!(
        "hesilab model report\nkind: {}\nlabel: {}\ndetail: {}\ndims: n={} m={}\nseed: {}\n",
        build.kind,
        sys.label(),
        build.detail,
        sys.n(),
        sys.m(),
        ctx.seed
    );
    if let Some(th) = &build.thickness {
        txt += &format!(
            "thickness: ok={} worst_measure={} required={} worst_anchor={:?}\n",
            th.ok,
            fmt_g17(th.worst_measure),
            fmt_g17(th.required),
            th.worst_anchor
        );
    }

    if let Some(params) = &build.delay {
        let worst = delay_dissipativity_sample(params, 32, ctx.seed)?;
        txt += &format!(
            "dissipativity sample: worst Re<Az,z>/||z||^2 = {}\n",
            fmt_g17(worst)
        );
        if let Some(j_max) = run.scan {
            let scan = delay_instability_scan(params, j_max)?;
            let mut csv = CsvWriter::new(&["j", "lambda_j", "bound", "matrix_norm"]);
            for p in &scan {
                csv.row([
                    p.j.to_string(),
                    fmt_g17(p.lambda),
                    fmt_g17(p.lower_bound),
                    fmt_g17(p.phi1_norm_sq),
                ]);
            }
            io::write_file(&ctx.path("delay_scan.csv"), &csv.finish())?;
            let last = scan.last().expect("scan is nonempty");
            txt += &format!(
                "instability scan: j_max={} last_bound={} last_norm={} (squared-norm scale); delay_scan.csv\n",
                j_max,
                fmt_g17(last.lower_bound),
                fmt_g17(last.phi1_norm_sq)
            );
        }
    } else {
        let absc = hesilab_core::linalg::spectral_abscissa(sys.a())?;
        txt += &format!("spectral abscissa: {}\n", fmt_g17(absc));
        let b_norm = hesilab_core::linalg::spectral_norm(sys.b());
        txt += &format!("control norm: ||B|| = {}\n", fmt_g17(b_norm));
    }
    if run.scan.is_some() && build.delay.is_none() {
        bail!("--scan applies only to delay models");
    }

    if sys.n() <= 512 {
        io::save_system(&ctx.path("system.json"), sys)?;
        txt += "export: system.json\n";
    } else {
        txt += "export: skipped, composite dimension over 512\n";
    }

    let mut verdict = Verdict::Affirmative;
    if run.verdict {
        match (&build.pointwise, &build.delay) {
            (Some((c, x0)), _) => {
                let predicted = pointwise_criterion(*c, x0)?;
                let hsf = hsf_test(sys)?;
                txt += &format!(
                    "criterion: stabilizable={predicted}\nhautus scan: stabilizable={} offenders={}\n",
                    hsf.stabilizable,
                    hsf.offenders.len()
                );
                if predicted != hsf.stabilizable {
                    txt += "warning: criterion and Hautus scan disagree on this truncation\n";
                }
                if !predicted {
                    verdict = Verdict::Negative;
                }
            }
            (_, Some(params)) => {
                let rate = run.alpha.unwrap_or(0.1);
                match split_verdict(delay_stabilize(params, rate))? {
                    Ok(rep) => {
                        txt += &format!(
                            "stabilization at rate {}: alpha={} fed_modes={} certified={}\n",
                            fmt_g17(rate),
                            fmt_g17(rep.alpha),
                            rep.fed_modes.len(),
                            rep.certified
                        );
                        if !rep.certified {
                            verdict = Verdict::Negative;
                        }
                    }
                    Err(msg) => {
                        txt += &format!("stabilization at rate {}: {msg}\n", fmt_g17(rate));
                        verdict = Verdict::Negative;
                    }
                }
            }
            _ => {
                let hsf = hsf_test(sys)?;
                txt += &format!(
                    "hautus scan: stabilizable={} offenders={} examined={}\n",
                    hsf.stabilizable,
                    hsf.offenders.len(),
                    hsf.examined.len()
                );
                if !hsf.stabilizable {
                    verdict = Verdict::Negative;
                }
            }
        }
        txt += match verdict {
            Verdict::Affirmative => "verdict: stabilizable\n",
            Verdict::Negative => "verdict: not stabilizable\n",
        };
    }

    io::write_file(&ctx.path("model_report.txt"), &txt)?;
    print!("{txt}");
    Ok(verdict)
}

pub fn verify(seed: u64, ctx: &Ctx) -> Result<Verdict> {
    let suites = verify_all(seed).context("verification suite aborted")?;
    let mut txt = format!("hesilab verify report\nseed: {seed}\n");
    let mut all = true;
    for suite in &suites {
        txt += &suite.render();
        all &= suite.passed();
    }
    txt += if all {
        "overall: all suites passed\n"
    } else {
        "overall: failures present\n"
    };
    io::write_file(&ctx.path("verify_report.txt"), &txt)?;
    print!("{txt}");
    Ok(if all {
        Verdict::Affirmative
    } else {
        Verdict::Negative
    })
}

/// Config-file front end: expand sweeps and reuse the flag-path commands.
pub fn run_config(path: &Path) -> Result<Verdict> {
    let cfg = io::load_run_config(path)?;
    let ctx = Ctx {
        out: PathBuf::from(cfg.out.as_deref().unwrap_or(".")),
        seed: cfg.seed.unwrap_or(7),
        tol: cfg.tolerances.clone().unwrap_or_default(),
    };
    std::fs::create_dir_all(&ctx.out)
        .with_context(|| format!("cannot create output directory {}", ctx.out.display()))?;

    let load_input = || {
        Input::load(
            cfg.system.as_deref().map(Path::new),
            cfg.model.as_deref().map(Path::new),
        )
    };
    match cfg.command.as_str() {
        "hesi" => {
            let betas = cfg
                .beta
                .as_ref()
                .map_or_else(|| vec![1.0], |b| b.values());
            hesi(&load_input()?, &betas, &[Variant::Weighted], &ctx)
        }
        "obs" => {
            let ts = cfg.t.as_ref().map_or_else(|| vec![5.0], |t| t.values());
            let deltas = cfg
                .delta
                .as_ref()
                .map_or_else(|| vec![0.5], |d| d.values());
            obs(&load_input()?, &ts, &deltas, &ctx)
        }
        "synth" => {
            let alphas = cfg.alpha.as_ref().map(|a| a.values());
            synth(&load_input()?, alphas.as_deref(), &ctx)
        }
        "decay" => {
            let alphas = cfg
                .alpha
                .as_ref()
                .map(|a| a.values())
                .context("decay needs an alpha parameter")?;
            let t_max = cfg
                .t
                .as_ref()
                .map_or(5.0, |t| t.values().first().copied().unwrap_or(5.0));
            decay(&load_input()?, &alphas, t_max, &ctx)
        }
        "model" => {
            let model_path = cfg
                .model
                .as_deref()
                .context("model command needs a model path")?;
            let build = io::load_model(Path::new(model_path))?;
            let run = ModelRun {
                verdict: false,
                scan: None,
                alpha: None,
            };
            model(&build, &run, &ctx)
        }
        "verify" => verify(ctx.seed, &ctx),
        other => bail!("unknown command {other:?} in run config"),
    }
}
