//! File formats: system files, model configs, run configs, CSV emission.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hesilab_core::models::{
    delay_heat_system, fractional_heat_system, ginzburg_landau_system, pointwise_heat_system,
    verify_thickness, DelayParams, ObservationPoint, PeriodicGrid, ThickSetSpec, ThicknessReport,
};
use hesilab_core::{CMat, ControlSystem, C64};
use serde::{Deserialize, Serialize};

/// On-disk system description. Complex entries are `[re, im]` pairs in
/// row-major order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<[f64; 2]>,
    #[serde(rename = "B")]
    pub b: Vec<[f64; 2]>,
    pub label: String,
}

impl SystemFile {
    pub fn from_system(sys: &ControlSystem) -> Self {
        let pack = |m: &CMat| {
            let mut out = Vec::with_capacity(m.nrows() * m.ncols());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push([m[(i, j)].re, m[(i, j)].im]);
                }
            }
            out
        };
        Self {
            n: sys.n(),
            m: sys.m(),
            a: pack(sys.a()),
            b: pack(sys.b()),
            label: sys.label().to_string(),
        }
    }

    pub fn into_system(self) -> Result<ControlSystem> {
        if self.a.len() != self.n * self.n {
            bail!(
                "field A has {} entries, expected n*n = {}",
                self.a.len(),
                self.n * self.n
            );
        }
        if self.b.len() != self.n * self.m {
            bail!(
                "field B has {} entries, expected n*m = {}",
                self.b.len(),
                self.n * self.m
            );
        }
        let unpack = |rows: usize, cols: usize, data: &[[f64; 2]]| {
            CMat::from_fn(rows, cols, |i, j| {
                let [re, im] = data[i * cols + j];
                C64::new(re, im)
            })
        };
        let a = unpack(self.n, self.n, &self.a);
        let b = unpack(self.n, self.m, &self.b);
        Ok(ControlSystem::new(a, b, self.label)?)
    }
}

pub fn load_system(path: &Path) -> Result<ControlSystem> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read system file {}", path.display()))?;
    let file: SystemFile = serde_json::from_str(&text)
        .with_context(|| format!("malformed system file {}", path.display()))?;
    file.into_system()
        .with_context(|| format!("inconsistent system file {}", path.display()))
}

pub fn save_system(path: &Path, sys: &ControlSystem) -> Result<()> {
    let file = SystemFile::from_system(sys);
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Bare matrix export (feedback gains), same `[re, im]` conventions.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
    pub label: String,
}

pub fn save_matrix(path: &Path, m: &CMat, label: &str) -> Result<()> {
    let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            entries.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    let file = MatrixFile {
        rows: m.nrows(),
        cols: m.ncols(),
        entries,
        label: label.to_string(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub length: f64,
    pub points: usize,
}

fn one() -> usize {
    1
}

/// Control region as half-open interval runs per axis, plus the thickness
/// certificate `(epsilon, l_cube)` the set claims to satisfy.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub intervals: Vec<Vec<[f64; 2]>>,
    pub epsilon: f64,
    pub l_cube: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlConfig {
    a: f64,
    b: f64,
    grid: GridConfig,
    omega: OmegaConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FracConfig {
    s: f64,
    grid: GridConfig,
    omega: OmegaConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointwiseConfig {
    c: f64,
    x0: String,
    #[serde(default = "default_modes")]
    modes: usize,
}

fn default_modes() -> usize {
    12
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DelayConfig {
    tau: f64,
    m_rho: usize,
    /// Retain the Fourier modes with `max_i |k_i| <= band`.
    band: i64,
    grid: GridConfig,
    omega: OmegaConfig,
}

#[derive(Debug, Deserialize)]
struct TaggedModel {
    model: String,
    #[serde(flatten)]
    rest: serde_json::Map<String, serde_json::Value>,
}

/// A model instantiated from a config file, with everything the report
/// needs alongside the assembled system.
pub struct ModelBuild {
    pub system: ControlSystem,
    pub delay: Option<DelayParams>,
    pub thickness: Option<ThicknessReport>,
    pub pointwise: Option<(f64, ObservationPoint)>,
    pub kind: &'static str,
    pub detail: String,
}

pub fn parse_x0(text: &str) -> Result<ObservationPoint> {
    if let Some((p, q)) = text.split_once('/') {
        let p: u64 = p.trim().parse().context("x0 numerator is not an integer")?;
        let q: u64 = q
            .trim()
            .parse()
            .context("x0 denominator is not an integer")?;
        return Ok(ObservationPoint::rational(p, q)?);
    }
    let v: f64 = text
        .trim()
        .parse()
        .context("x0 is neither p/q nor a decimal")?;
    Ok(ObservationPoint::Irrational(v))
}

fn build_grid_and_omega(
    grid_cfg: &GridConfig,
    omega: &OmegaConfig,
) -> Result<(PeriodicGrid, ThickSetSpec, ThicknessReport)> {
    let grid = PeriodicGrid::new(grid_cfg.dim, grid_cfg.length, grid_cfg.points)?;
    let intervals: Vec<Vec<(f64, f64)>> = omega
        .intervals
        .iter()
        .map(|axis| axis.iter().map(|&[a, b]| (a, b)).collect())
        .collect();
    let spec = ThickSetSpec::from_intervals(&grid, &intervals, omega.epsilon, omega.l_cube)?;
    let thickness = verify_thickness(&grid, &spec)?;
    Ok((grid, spec, thickness))
}

pub fn build_model_config(cfg_text: &str) -> Result<ModelBuild> {
    let tagged: TaggedModel = serde_json::from_str(cfg_text).context("malformed model config")?;
    let rest = serde_json::Value::Object(tagged.rest);
    match tagged.model.as_str() {
        "gl" => {
            let c: GlConfig = serde_json::from_value(rest).context("bad gl parameters")?;
            let (grid, spec, thickness) = build_grid_and_omega(&c.grid, &c.omega)?;
            let sys = ginzburg_landau_system(c.a, c.b, &grid, &spec)?.into_base();
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: Some(thickness),
                pointwise: None,
                kind: "gl",
                detail: format!("a={} b={} modes={}", c.a, c.b, grid.total_modes()),
            })
        }
        "frac" => {
            let c: FracConfig = serde_json::from_value(rest).context("bad frac parameters")?;
            let (grid, spec, thickness) = build_grid_and_omega(&c.grid, &c.omega)?;
            let sys = fractional_heat_system(c.s, &grid, &spec)?.into_base();
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: Some(thickness),
                pointwise: None,
                kind: "frac",
                detail: format!("s={} modes={}", c.s, grid.total_modes()),
            })
        }
        "pointwise" => {
            let c: PointwiseConfig =
                serde_json::from_value(rest).context("bad pointwise parameters")?;
            let x0 = parse_x0(&c.x0)?;
            let sys = pointwise_heat_system(c.c, &x0, c.modes)?;
            Ok(ModelBuild {
                system: sys,
                delay: None,
                thickness: None,
                pointwise: Some((c.c, x0)),
                kind: "pointwise",
                detail: format!("c={} x0={} modes={}", c.c, c.x0, c.modes),
            })
        }
        "delay" => {
            let c: DelayConfig = serde_json::from_value(rest).context("bad delay parameters")?;
            let (grid, spec, thickness) = build_grid_and_omega(&c.grid, &c.omega)?;
            if c.band < 0 {
                bail!("mode band must be nonnegative, got {}", c.band);
            }
            let modes = grid.modes_with_max_abs_k(c.band);
            let params = DelayParams::new(c.tau, modes, c.m_rho, spec, grid)?;
            let sys = delay_heat_system(&params)?;
            Ok(ModelBuild {
                system: sys,
                delay: Some(params),
                thickness: Some(thickness),
                pointwise: None,
                kind: "delay",
                detail: format!("tau={} m_rho={} band={}", c.tau, c.m_rho, c.band),
            })
        }
        other => bail!("unknown model kind {other:?}, expected gl | frac | pointwise | delay"),
    }
}

pub fn load_model(path: &Path) -> Result<ModelBuild> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read model config {}", path.display()))?;
    build_model_config(&text).with_context(|| format!("in model config {}", path.display()))
}

/// Parse the inline control-set pattern: interval runs `start:end` joined
/// by commas, axes joined by semicolons.
pub fn parse_omega_pattern(text: &str) -> Result<Vec<Vec<[f64; 2]>>> {
    text.split(';')
        .map(|axis| {
            axis.split(',')
                .map(|iv| {
                    let (a, b) = iv
                        .split_once(':')
                        .with_context(|| format!("interval {iv:?} is not start:end"))?;
                    let a: f64 = a.trim().parse().context("interval start is not a number")?;
                    let b: f64 = b.trim().parse().context("interval end is not a number")?;
                    Ok([a, b])
                })
                .collect()
        })
        .collect()
}

/// A scalar where a sweep list is also accepted.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    One(f64),
    Many(Vec<f64>),
}

impl ScalarOrList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(v) => vec![*v],
            Self::Many(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolOverrides {
    pub boundary_offset: Option<f64>,
    pub coarse: Option<usize>,
    pub rounds: Option<usize>,
}

/// One analysis run described as a file; list-valued parameters expand to
/// a Cartesian sweep.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub beta: Option<ScalarOrList>,
    #[serde(default)]
    pub alpha: Option<ScalarOrList>,
    #[serde(default, rename = "T")]
    pub t: Option<ScalarOrList>,
    #[serde(default)]
    pub delta: Option<ScalarOrList>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Option<TolOverrides>,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read run config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed run config {}", path.display()))
}

/// 17 significant digits, enough to reproduce the f64 bit pattern.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// RFC-4180 style accumulation: comma separated, CRLF line endings.
pub struct CsvWriter {
    buf: String,
}

impl CsvWriter {
    pub fn new(columns: &[&str]) -> Self {
        let mut w = Self { buf: String::new() };
        w.row(columns.iter().map(|c| c.to_string()));
        w
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let line: Vec<String> = fields.into_iter().map(|f| csv_field(&f)).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push_str("\r\n");
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_file_round_trips() {
        let a = CMat::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
        let b = CMat::from_fn(2, 1, |i, _| C64::new(1.0 + i as f64, -0.5));
        let sys = ControlSystem::new(a.clone(), b.clone(), "probe").unwrap();
        let back = SystemFile::from_system(&sys).into_system().unwrap();
        assert_eq!(back.a(), &a);
        assert_eq!(back.b(), &b);
        assert_eq!(back.label(), "probe");
    }

    #[test]
    fn system_file_rejects_unknown_keys() {
        let text = r#"{"n":1,"m":1,"A":[[0,0]],"B":[[1,0]],"label":"x","extra":1}"#;
        assert!(serde_json::from_str::<SystemFile>(text).is_err());
    }

    #[test]
    fn system_file_rejects_wrong_entry_count() {
        let text = r#"{"n":2,"m":1,"A":[[0,0]],"B":[[1,0],[0,0]],"label":"x"}"#;
        let file: SystemFile = serde_json::from_str(text).unwrap();
        assert!(file.into_system().is_err());
    }

    #[test]
    fn omega_pattern_parses_axes_and_runs() {
        let iv = parse_omega_pattern("0:1.5,3:4.5;2:6").unwrap();
        assert_eq!(iv, vec![vec![[0.0, 1.5], [3.0, 4.5]], vec![[2.0, 6.0]]]);
        assert!(parse_omega_pattern("0-1").is_err());
    }

    #[test]
    fn model_config_rejects_unknown_keys() {
        let text = r#"{"model":"pointwise","c":45.0,"x0":"1/2","typo":3}"#;
        assert!(build_model_config(text).is_err());
    }

    #[test]
    fn pointwise_config_builds() {
        let text = r#"{"model":"pointwise","c":45.0,"x0":"1/3","modes":8}"#;
        let build = build_model_config(text).unwrap();
        assert_eq!(build.system.n(), 8);
        assert_eq!(build.kind, "pointwise");
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let text = r#"{"command":"hesi","system":"s.json","betas":[1.0]}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn scalar_or_list_accepts_both_shapes() {
        let one: ScalarOrList = serde_json::from_str("2.5").unwrap();
        let many: ScalarOrList = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(one.values(), vec![2.5]);
        assert_eq!(many.values(), vec![1.0, 2.0]);
    }

    #[test]
    fn g17_is_round_trip_exact() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 9.5042559559181437e6] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_g17(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut w = CsvWriter::new(&["a", "b"]);
        w.row(["plain".to_string(), "with,comma".to_string()]);
        let text = w.finish();
        assert_eq!(text, "a,b\r\nplain,\"with,comma\"\r\n");
    }
}
