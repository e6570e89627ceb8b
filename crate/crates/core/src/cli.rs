//! Command-line front end: JSON run configuration, the five studies and
//! their CSV / JSON / SVG outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::branches::{
    delta_estimate, eta0, eta1, identity_residual, solve_predator, solve_prey, uniqueness_probe, xi0, xi1_scan, Model,
    ModelParams, ETA_MAX,
};
use crate::continuation::{classify_endpoint, trace_branch, Branch, ContinuationConfig, Launch, Scenario};
use crate::dynamics::{mode_initial, simulate, steady_state_distance, PopulationState, SimulationConfig};
use crate::error::{Error, Result};
use crate::grid::{discrete_lambda1, AgeField, BirthProfile, BirthShape, Discretization};
use crate::spectral::{assemble_h0, normalize_birth, spectral_radius};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_a: usize,
    #[serde(default = "one")]
    pub a_max: f64,
}

fn one() -> f64 {
    1.0
}

/// Fertility shape; `file` reads one sample per line (`#` starts a comment),
/// relative to the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthSpec {
    Constant,
    Ramp,
    Samples { values: Vec<f64> },
    File { path: PathBuf },
}

impl Default for BirthSpec {
    fn default() -> Self {
        BirthSpec::Constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Prey,
    Predator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemitrivialConfig {
    pub species: Species,
    pub params: Vec<f64>,
    /// Random Newton restarts per row for the uniqueness probe (seeded by
    /// the top-level `seed`); 0 disables the probe column.
    #[serde(default)]
    pub probe_starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifPoint {
    Eta0,
    Eta1,
    Xi0,
    Xi1Scan,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifpointsConfig {
    pub which: BifPoint,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// ξ values for the connection-relation scan (all > 1, increasing).
    #[serde(default)]
    pub xi_grid: Vec<f64>,
    #[serde(default = "eta_max")]
    pub eta_max: f64,
}

fn eta_max() -> f64 {
    ETA_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub scenario: Scenario,
    /// Fixed ξ for T1 / T22, fixed η for T222.
    pub fixed: f64,
    #[serde(default = "eta_max")]
    pub eta_max: f64,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    /// Semi-trivial overlay samples in the diagram.
    #[serde(default = "overlay_points")]
    pub overlay_points: usize,
}

fn overlay_points() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Age-constant principal-mode profiles.
    Mode { u_amplitude: f64, v_amplitude: f64 },
    /// A point of the branch described by the `branch` section, scaled by
    /// `scale`; defaults to the middle record.
    Coexistence {
        #[serde(default)]
        record: Option<usize>,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub init: InitSpec,
    /// Required for `mode` initial data; taken from the branch point otherwise.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub xi: Option<f64>,
    pub t_end: f64,
    #[serde(default = "sample_every")]
    pub sample_every: usize,
}

fn sample_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub birth: BirthSpec,
    #[serde(default)]
    pub semitrivial: Option<SemitrivialConfig>,
    #[serde(default)]
    pub bifpoints: Option<BifpointsConfig>,
    #[serde(default)]
    pub branch: Option<BranchConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite, got {v}")))
    }
}

fn require(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| config_err(format!("{name} is required for this study")))
}

impl RunConfig {
    /// Parses and validates a configuration document. `base` resolves
    /// relative sample-file paths.
    pub fn from_json(text: &str, base: &Path) -> Result<(Self, BirthShape)> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let shape = cfg.validate(base)?;
        Ok((cfg, shape))
    }

    pub fn load(path: &Path) -> Result<(Self, BirthShape)> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self, base: &Path) -> Result<BirthShape> {
        let g = &self.grid;
        if g.n_x < 3 {
            return Err(config_err(format!("grid.n_x must be at least 3, got {}", g.n_x)));
        }
        if g.n_a < 2 {
            return Err(config_err(format!("grid.n_a must be at least 2, got {}", g.n_a)));
        }
        positive("grid.a_max", g.a_max)?;
        self.params
            .validate()
            .map_err(|e| config_err(format!("params: {e}")))?;

        if let Some(s) = &self.semitrivial {
            if s.params.is_empty() {
                return Err(config_err("semitrivial.params must not be empty"));
            }
            for &p in &s.params {
                positive("semitrivial.params entries", p)?;
            }
        }
        if let Some(b) = &self.bifpoints {
            if !(b.eta_max > 1.0) {
                return Err(config_err(format!("bifpoints.eta_max must exceed 1, got {}", b.eta_max)));
            }
            match b.which {
                BifPoint::Eta0 => {
                    let xi = require("bifpoints.xi", b.xi)?;
                    if !(xi > 1.0) {
                        return Err(config_err(format!("eta0 needs bifpoints.xi > 1, got {xi}")));
                    }
                }
                BifPoint::Eta1 => {
                    let xi = require("bifpoints.xi", b.xi)?;
                    if !(xi > 0.0 && xi < 1.0) {
                        return Err(config_err(format!("eta1 needs bifpoints.xi in (0, 1), got {xi}")));
                    }
                }
                BifPoint::Xi0 | BifPoint::Xi1Scan => {
                    let eta = require("bifpoints.eta", b.eta)?;
                    if b.which == BifPoint::Xi0 && !(eta > 1.0) {
                        return Err(config_err(format!("xi0 needs bifpoints.eta > 1, got {eta}")));
                    }
                    positive("bifpoints.eta", eta)?;
                    if b.which == BifPoint::Xi1Scan {
                        if b.xi_grid.len() < 2 {
                            return Err(config_err("xi1_scan needs at least two xi_grid values"));
                        }
                        if b.xi_grid.iter().any(|&x| !(x > 1.0)) {
                            return Err(config_err("xi1_scan grid values must exceed 1"));
                        }
                        if b.xi_grid.windows(2).any(|w| !(w[1] > w[0])) {
                            return Err(config_err("xi1_scan grid must be strictly increasing"));
                        }
                    }
                }
                BifPoint::Delta => {}
            }
        }
        if let Some(b) = &self.branch {
            match b.scenario {
                Scenario::T1 if !(b.fixed > 1.0) => {
                    return Err(config_err(format!("T1 needs branch.fixed (xi) > 1, got {}", b.fixed)))
                }
                Scenario::T22 if !(b.fixed > 0.0 && b.fixed < 1.0) => {
                    return Err(config_err(format!(
                        "T22 needs branch.fixed (xi) in (0, 1), got {}",
                        b.fixed
                    )))
                }
                Scenario::T222 if !(b.fixed > 1.0) => {
                    return Err(config_err(format!("T222 needs branch.fixed (eta) > 1, got {}", b.fixed)))
                }
                _ => {}
            }
            if !(b.eta_max > 1.0) {
                return Err(config_err(format!("branch.eta_max must exceed 1, got {}", b.eta_max)));
            }
            b.continuation
                .validate()
                .map_err(|e| config_err(format!("branch.continuation: {e}")))?;
        }
        if let Some(s) = &self.simulate {
            if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
                return Err(config_err(format!("simulate.t_end must be nonnegative, got {}", s.t_end)));
            }
            if s.sample_every == 0 {
                return Err(config_err("simulate.sample_every must be positive"));
            }
            match &s.init {
                InitSpec::Mode {
                    u_amplitude,
                    v_amplitude,
                } => {
                    if !(*u_amplitude >= 0.0 && *v_amplitude >= 0.0) {
                        return Err(config_err("simulate.init amplitudes must be nonnegative"));
                    }
                    positive("simulate.eta", require("simulate.eta", s.eta)?)?;
                    positive("simulate.xi", require("simulate.xi", s.xi)?)?;
                }
                InitSpec::Coexistence { scale, .. } => {
                    positive("simulate.init.scale", *scale)?;
                    if self.branch.is_none() {
                        return Err(config_err("coexistence initial data needs a branch section"));
                    }
                }
            }
        }

        Ok(match &self.birth {
            BirthSpec::Constant => BirthShape::Constant,
            BirthSpec::Ramp => BirthShape::Ramp,
            BirthSpec::Samples { values } => BirthShape::Samples {
                values: values.clone(),
            },
            BirthSpec::File { path } => {
                let full = base.join(path);
                let text = fs::read_to_string(&full)
                    .map_err(|e| config_err(format!("cannot read birth samples {}: {e}", full.display())))?;
                let values = text
                    .lines()
                    .map(|l| l.split('#').next().unwrap_or("").trim())
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        l.parse::<f64>()
                            .map_err(|_| config_err(format!("bad birth sample '{l}' in {}", full.display())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                BirthShape::Samples { values }
            }
        })
    }

    fn model(&self, shape: &BirthShape) -> Result<Model> {
        let disc = Discretization::new(self.grid.n_x, self.grid.n_a, self.grid.a_max)
            .map_err(|e| config_err(e.to_string()))?;
        let raw = BirthProfile::from_shape(shape, &disc.ages).map_err(|e| config_err(format!("birth: {e}")))?;
        Model::new(disc, &raw, self.params)
    }

    fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T> {
        opt.as_ref()
            .ok_or_else(|| config_err(format!("the {name} command needs a \"{name}\" section")))
    }
}

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("invalid output path {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV text with a header row and LF line endings.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn json_bytes(v: &serde_json::Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// One polyline or marker series of an SVG chart.
pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Static SVG 1.1 line chart.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (l, r, t, b) = (70.0, 20.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let sy = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{l}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{0}"/></g>"#,
        h - b,
        w - r
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            sx(fx),
            h - b + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            l - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        l + (w - l - r) / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        t + (h - t - b) / 2.0,
        t + (h - t - b) / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let coords: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if coords.len() == 1 {
            let (cx, cy) = coords[0].split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{}"/>"#, ser.color);
        } else if !coords.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                ser.color,
                coords.join(" ")
            );
        }
        let ly = t + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - r - 150.0,
            w - r - 125.0,
            ser.color,
            w - r - 120.0,
            ly + 4.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Files written by a command, relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, bytes)?;
        self.files.push(p);
        Ok(())
    }
}

pub fn cmd_normalize(cfg: &RunConfig, shape: &BirthShape, out: &Path) -> Result<Outputs> {
    let disc = Discretization::new(cfg.grid.n_x, cfg.grid.n_a, cfg.grid.a_max)?;
    let raw = BirthProfile::from_shape(shape, &disc.ages).map_err(|e| config_err(format!("birth: {e}")))?;
    let (b, c) = normalize_birth(&disc, &raw)?;
    let r = spectral_radius(&assemble_h0(&disc, &b)?)?;
    let lambda1 = discrete_lambda1(&disc.space);
    let pi2 = std::f64::consts::PI.powi(2);
    let am = cfg.grid.a_max;
    // ∫ b(a) e^{-π² a} da for the built-in shapes.
    let continuum = match shape {
        BirthShape::Constant => Some(pi2 / (1.0 - (-pi2 * am).exp())),
        BirthShape::Ramp => {
            let integral = (1.0 - (1.0 + pi2 * am) * (-pi2 * am).exp()) / (pi2 * pi2 * am);
            Some(1.0 / integral)
        }
        BirthShape::Samples { .. } => None,
    };
    let report = json!({
        "n_x": cfg.grid.n_x,
        "n_a": cfg.grid.n_a,
        "a_max": am,
        "lambda1_h": lambda1,
        "c": c,
        "r_h0": r.radius,
        "r_h0_deviation": (r.radius - 1.0).abs(),
        "power_iterations": r.iterations,
        "c_continuum": continuum,
        "c_relative_difference": continuum.map(|cc| (c - cc).abs() / cc),
    });
    println!("lambda1_h = {}", fmt_f64(lambda1));
    println!("c         = {}", fmt_f64(c));
    println!("r(H[0])   = {}", fmt_f64(r.radius));
    if let Some(cc) = continuum {
        println!("c (continuum) = {} (relative difference {:.3e})", fmt_f64(cc), (c - cc).abs() / cc);
    }
    let mut o = Outputs::default();
    o.write(out, "normalize.json", &json_bytes(&report)?)?;
    Ok(o)
}

pub fn cmd_semitrivial(cfg: &RunConfig, shape: &BirthShape, out: &Path) -> Result<Outputs> {
    let sc = RunConfig::section(&cfg.semitrivial, "semitrivial")?;
    let model = cfg.model(shape)?;
    let d = &model.disc;
    let mut rows = Vec::new();
    for &param in &sc.params {
        let res = match sc.species {
            Species::Prey => solve_prey(&model, param),
            Species::Predator => solve_predator(&model, param),
        };
        let row = match res {
            Ok(sol) => {
                let id = identity_residual(&model, &sol)?;
                let spread = if sc.probe_starts > 0 {
                    let traces = uniqueness_probe(&model, &sol, sc.probe_starts, cfg.seed)?;
                    let dev = traces
                        .iter()
                        .map(|t| (&t.0 - &sol.trace.0).amax())
                        .fold(0.0f64, f64::max);
                    fmt_f64(dev)
                } else {
                    String::new()
                };
                vec![
                    fmt_f64(param),
                    fmt_f64(sol.field.l2_norm(&d.ages, &d.space)),
                    fmt_f64(sol.trace.min()),
                    fmt_f64(sol.trace.inf_norm()),
                    fmt_f64(id),
                    sol.newton_iters.to_string(),
                    spread,
                    "ok".into(),
                ]
            }
            Err(Error::NoPositiveSolution { .. }) => vec![
                fmt_f64(param),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "no_positive_solution".into(),
            ],
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let bytes = csv_bytes(
        &["param", "norm", "min_trace", "max_trace", "identity_residual", "newton_iters", "probe_spread", "status"],
        &rows,
    )?;
    let mut o = Outputs::default();
    o.write(out, "semitrivial.csv", &bytes)?;
    Ok(o)
}

pub fn cmd_bifpoints(cfg: &RunConfig, shape: &BirthShape, out: &Path) -> Result<Outputs> {
    let bc = RunConfig::section(&cfg.bifpoints, "bifpoints")?;
    let model = cfg.model(shape)?;
    let report = match bc.which {
        BifPoint::Eta0 => {
            let xi = require("bifpoints.xi", bc.xi)?;
            let e = eta0(&model, xi)?;
            json!({
                "which": "eta0",
                "xi": xi,
                "eta0": e.eta0,
                "power_iterations": e.spectral.iterations,
                "power_residual": e.spectral.residual,
                "resolvent_radius": e.tangent.resolvent_radius,
                "transversality_defect": (&e.tangent.trace_u.0
                    - model.age_integral(&e.tangent.phi)?.0 * e.eta0).amax(),
            })
        }
        BifPoint::Eta1 => {
            let xi = require("bifpoints.xi", bc.xi)?;
            let e = eta1(&model, xi, bc.eta_max)?;
            json!({
                "which": "eta1",
                "xi": xi,
                "eta1": e.eta1,
                "defect": e.defect,
                "evaluations": e.evaluations,
                "resolvent_radius": e.tangent.resolvent_radius,
                "xi0_at_eta1": xi0(&model, e.eta1)?.xi0,
            })
        }
        BifPoint::Xi0 => {
            let eta = require("bifpoints.eta", bc.eta)?;
            let x = xi0(&model, eta)?;
            json!({ "which": "xi0", "eta": eta, "xi0": x.xi0, "radius": x.radius })
        }
        BifPoint::Xi1Scan => {
            let eta = require("bifpoints.eta", bc.eta)?;
            let scan = xi1_scan(&model, eta, &bc.xi_grid)?;
            json!({
                "which": "xi1_scan",
                "eta": eta,
                "points": scan.points.iter().map(|&(x, r)| json!({"xi": x, "residual": r})).collect::<Vec<_>>(),
                "sign_changes": scan.sign_changes.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
            })
        }
        BifPoint::Delta => {
            let d = delta_estimate(&model, bc.eta_max)?;
            json!({
                "which": "delta",
                "delta_hat": d.delta_hat,
                "upper_estimate": true,
                "ladder": d.ladder.iter().map(|&(e, v)| json!({"eta": e, "value": v})).collect::<Vec<_>>(),
            })
        }
    };
    let mut o = Outputs::default();
    o.write(out, "bifpoints.json", &json_bytes(&report)?)?;
    Ok(o)
}

/// Launches and traces the branch described by the `branch` section.
pub fn run_branch(model: &Model, bc: &BranchConfig) -> Result<(Launch, Branch)> {
    let launch = match bc.scenario {
        Scenario::T1 => Launch::t1(model, bc.fixed)?,
        Scenario::T22 => Launch::t22(model, bc.fixed, bc.eta_max)?,
        Scenario::T222 => Launch::t222(model, bc.fixed)?,
    };
    let branch = trace_branch(model, &launch, &bc.continuation)?;
    Ok((launch, branch))
}

pub const BRANCH_HEADER: [&str; 9] = [
    "index",
    "s",
    "mu",
    "norm_u",
    "norm_v",
    "min_u0",
    "min_v0",
    "step",
    "newton_iters",
];

pub fn cmd_branch(cfg: &RunConfig, shape: &BirthShape, out: &Path) -> Result<Outputs> {
    let bc = RunConfig::section(&cfg.branch, "branch")?;
    let model = cfg.model(shape)?;
    let d = &model.disc;
    let (launch, branch) = run_branch(&model, bc)?;
    let report = classify_endpoint(&model, &branch, &bc.continuation)?;

    let rows: Vec<Vec<String>> = branch
        .records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                fmt_f64(r.s),
                fmt_f64(r.mu),
                fmt_f64(r.norm_u),
                fmt_f64(r.norm_v),
                fmt_f64(r.min_u0),
                fmt_f64(r.min_v0),
                fmt_f64(r.step),
                r.newton_iters.to_string(),
            ]
        })
        .collect();

    // Semi-trivial overlays over the parameter window the branch covered.
    let (lo, hi) = branch
        .records
        .iter()
        .fold((launch.mu0, launch.mu0), |(a, b), r| (a.min(r.mu), b.max(r.mu)));
    let m = bc.overlay_points.max(2);
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let mut moving = Vec::new();
    let fixed_norm;
    match bc.scenario {
        Scenario::T1 | Scenario::T22 => {
            for &eta in grid.iter().filter(|&&e| e > 1.0) {
                let u = solve_prey(&model, eta)?;
                moving.push((eta, u.field.l2_norm(&d.ages, &d.space)));
            }
            fixed_norm = if bc.fixed > 1.0 {
                solve_predator(&model, bc.fixed)?.field.l2_norm(&d.ages, &d.space)
            } else {
                0.0
            };
        }
        Scenario::T222 => {
            for &xi in grid.iter().filter(|&&x| x > 1.0) {
                let v = solve_predator(&model, xi)?;
                moving.push((xi, v.field.l2_norm(&d.ages, &d.space)));
            }
            fixed_norm = solve_prey(&model, bc.fixed)?.field.l2_norm(&d.ages, &d.space);
        }
    }
    let (mu_name, moving_name, fixed_name) = match bc.scenario {
        Scenario::T222 => ("xi", "|v_xi| (u = 0)", "|u_eta| (v = 0)"),
        _ => ("eta", "|u_eta| (v = 0)", "|v_xi| (u = 0)"),
    };
    let series = [
        Series {
            name: "|u| coexistence",
            color: "#1f77b4",
            points: branch.records.iter().map(|r| (r.mu, r.norm_u)).collect(),
            dashed: false,
        },
        Series {
            name: "|v| coexistence",
            color: "#d62728",
            points: branch.records.iter().map(|r| (r.mu, r.norm_v)).collect(),
            dashed: false,
        },
        Series {
            name: moving_name,
            color: "#2ca02c",
            points: moving,
            dashed: true,
        },
        Series {
            name: fixed_name,
            color: "#7f7f7f",
            points: vec![(lo, fixed_norm), (hi, fixed_norm)],
            dashed: true,
        },
    ];
    let svg = svg_chart(
        &format!("{:?} branch, {} = {}", bc.scenario, if mu_name == "xi" { "eta" } else { "xi" }, bc.fixed),
        mu_name,
        "L2 norm over age x space",
        &series,
    );

    let summary = json!({
        "scenario": report.scenario,
        "fixed": bc.fixed,
        "active_parameter": mu_name,
        "bifurcation_value": launch.mu0,
        "records": branch.records.len(),
        "stop_reason": report.reason,
        "alternative": report.alternative,
        "label": report.label,
        "xi1": report.xi1,
        "diagnostics": report.diagnostics.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
        "continuation": bc.continuation,
    });
    println!("{}", report.label);
    let mut o = Outputs::default();
    o.write(out, "branch.csv", &csv_bytes(&BRANCH_HEADER, &rows)?)?;
    o.write(out, "branch_summary.json", &json_bytes(&summary)?)?;
    o.write(out, "branch.svg", svg.as_bytes())?;
    Ok(o)
}

pub fn cmd_simulate(cfg: &RunConfig, shape: &BirthShape, out: &Path) -> Result<Outputs> {
    let sc = RunConfig::section(&cfg.simulate, "simulate")?;
    let model = cfg.model(shape)?;
    let d = &model.disc;
    let (init, eta, xi, target): (PopulationState, f64, f64, Option<(AgeField, AgeField)>) = match &sc.init {
        InitSpec::Mode {
            u_amplitude,
            v_amplitude,
        } => {
            let u = mode_initial(&model, *u_amplitude)?;
            let v = mode_initial(&model, *v_amplitude)?;
            (
                PopulationState::new(u, v)?,
                require("simulate.eta", sc.eta)?,
                require("simulate.xi", sc.xi)?,
                None,
            )
        }
        InitSpec::Coexistence { record, scale } => {
            let bc = RunConfig::section(&cfg.branch, "branch")?;
            let (_, branch) = run_branch(&model, bc)?;
            let k = record.unwrap_or(branch.states.len() / 2);
            let st = branch.states.get(k).ok_or_else(|| {
                config_err(format!(
                    "simulate.init.record = {k} but the branch has {} records",
                    branch.states.len()
                ))
            })?;
            let (u, v) = st.fields(&model)?;
            let init = PopulationState::new(u.scale(*scale), v.scale(*scale))?;
            (init, st.eta(), st.xi(), Some((u, v)))
        }
    };
    let traj = simulate(
        &model,
        &init,
        &SimulationConfig {
            eta,
            xi,
            t_end: sc.t_end,
            sample_every: sc.sample_every,
        },
    )?;
    let dist = match &target {
        Some((u, v)) => Some(steady_state_distance(&model, &traj, u, v)?),
        None => None,
    };
    let rows: Vec<Vec<String>> = traj
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.u.l2_norm(&d.ages, &d.space)),
                fmt_f64(s.v.l2_norm(&d.ages, &d.space)),
                dist.as_ref().map(|r| fmt_f64(r.distances[i].1)).unwrap_or_default(),
            ]
        })
        .collect();
    let mut series = vec![
        Series {
            name: "|u|",
            color: "#1f77b4",
            points: traj.iter().map(|s| (s.t, s.u.l2_norm(&d.ages, &d.space))).collect(),
            dashed: false,
        },
        Series {
            name: "|v|",
            color: "#d62728",
            points: traj.iter().map(|s| (s.t, s.v.l2_norm(&d.ages, &d.space))).collect(),
            dashed: false,
        },
    ];
    if let Some(r) = &dist {
        series.push(Series {
            name: "distance to target",
            color: "#2ca02c",
            points: r.distances.clone(),
            dashed: true,
        });
    }
    let svg = svg_chart(&format!("simulation, eta = {eta}, xi = {xi}"), "t", "L2 norm over age x space", &series);
    let mut o = Outputs::default();
    o.write(out, "simulate.csv", &csv_bytes(&["t", "norm_u", "norm_v", "distance"], &rows)?)?;
    o.write(out, "simulate.svg", svg.as_bytes())?;
    if let Some(r) = dist {
        let summary = json!({
            "eta": eta,
            "xi": xi,
            "final_distance": r.distances.last().map(|x| x.1),
            "max_distance": r.distances.iter().map(|x| x.1).fold(0.0f64, f64::max),
            "monotone_tail": r.monotone_tail,
        });
        o.write(out, "simulate_summary.json", &json_bytes(&summary)?)?;
    }
    Ok(o)
}

#[derive(Debug, Parser)]
#[command(name = "agebif", version, about = "Bifurcation toolkit for age-structured predator-prey systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out_dir` in the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize the fertility profile so that r(H[0]) = 1.
    Normalize(Common),
    /// Tabulate a semi-trivial branch.
    Semitrivial(Common),
    /// Compute one family of bifurcation points.
    Bifpoints(Common),
    /// Trace a coexistence branch and classify its endpoint.
    Branch(Common),
    /// Integrate the time-dependent system.
    Simulate(Common),
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (common, f): (&Common, fn(&RunConfig, &BirthShape, &Path) -> Result<Outputs>) = match &cli.command {
        Command::Normalize(c) => (c, cmd_normalize),
        Command::Semitrivial(c) => (c, cmd_semitrivial),
        Command::Bifpoints(c) => (c, cmd_bifpoints),
        Command::Branch(c) => (c, cmd_branch),
        Command::Simulate(c) => (c, cmd_simulate),
    };
    let (cfg, shape) = match RunConfig::load(&common.config) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("agebif: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match f(&cfg, &shape, &out) {
        Ok(o) => {
            for p in o.files {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("agebif: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("agebif: solver failure: {e}");
            EXIT_SOLVER
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"grid": {"n_x": 8, "n_a": 8}, "colour": 1}"#;
        assert!(matches!(RunConfig::from_json(text, Path::new(".")), Err(Error::Config(_))));
        let text = r#"{"grid": {"n_x": 8, "n_a": 8, "extra": 1}}"#;
        assert!(RunConfig::from_json(text, Path::new(".")).is_err());
    }

    #[test]
    fn violated_bounds_are_named() {
        let text = r#"{"grid": {"n_x": 8, "n_a": 8}, "branch": {"scenario": "T1", "fixed": 0.5}}"#;
        let err = RunConfig::from_json(text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("xi") && err.contains("> 1"), "{err}");
        let text = r#"{"grid": {"n_x": 2, "n_a": 8}}"#;
        let err = RunConfig::from_json(text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("n_x"), "{err}");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 9.870_330_135_1e10] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn svg_has_no_scripts() {
        let s = svg_chart(
            "t",
            "x",
            "y",
            &[Series {
                name: "a<b",
                color: "red",
                points: vec![(0.0, 1.0), (1.0, 2.0)],
                dashed: false,
            }],
        );
        assert!(s.starts_with("<?xml"));
        assert!(!s.contains("<script"));
        assert!(s.contains("a&lt;b"));
    }
}
