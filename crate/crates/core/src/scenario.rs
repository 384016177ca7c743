//! Scenario files and verification reports.
//!
//! A scenario is a small sectioned `key = value` file:
//!
//! ```text
//! [base]
//! dim = 2
//! Gamma[1,1,2] = x1          # also sets Gamma[1,2,1]
//!
//! [bundle]
//! flavor = cotangent
//!
//! [phi]
//! t = levi-civita
//!
//! [checks]
//! suites = metric, symmetric-space
//! expect_fail = metric.compatibility
//! seed = 7
//! ```
//!
//! Running it produces a [`Report`] with one entry per check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::base::{BaseConnection, Flavor};
use crate::error::{Error, Result};
use crate::expr::{parse_expr_in, Ast, Program};
use crate::lifted::{
    curvature_table, dr_table, metric_identity_residual, parse_t, random_points, FramedVector, LiftedSpace, PhiSpec,
    TotalPoint,
};
use crate::presets;
use crate::structures::{kind_triples, symplectic_sample, test_field, CanonicalSymplectic, NeutralMetric};
use crate::tensor::{BoxDomain, SmoothField, Tensor};
use crate::transport::{
    geodesic, holonomy_algebra, parallel_transport, symmetric_space_report, CurveInM, HolonomyFlags, HolonomySettings,
    TransportPath, TransportSettings,
};

pub const SCHEMA: &str = "lifted-connections/report-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Torsion,
    CurvatureTable,
    Metric,
    Symplectic,
    SymmetricSpace,
    Transport,
    Holonomy,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Torsion,
        Suite::CurvatureTable,
        Suite::Metric,
        Suite::Symplectic,
        Suite::SymmetricSpace,
        Suite::Transport,
        Suite::Holonomy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Torsion => "torsion",
            Suite::CurvatureTable => "curvature-table",
            Suite::Metric => "metric",
            Suite::Symplectic => "symplectic",
            Suite::SymmetricSpace => "symmetric-space",
            Suite::Transport => "transport",
            Suite::Holonomy => "holonomy",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseSpec {
    Preset(String),
    Expressions {
        dim: usize,
        domain: Option<(Vec<f64>, Vec<f64>)>,
        /// Zero-based `(k, i, j)` with `i ≤ j`.
        entries: BTreeMap<(usize, usize, usize), Ast>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSpec {
    pub start: TotalPoint,
    pub velocity: FramedVector,
    pub tspan: f64,
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSpec {
    pub from: TotalPoint,
    pub to: TotalPoint,
    pub state: FramedVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub base: BaseSpec,
    pub flavor: Flavor,
    pub t: f64,
    /// Zero-based `(l, i, j, k)` with `i ≤ j ≤ k`.
    pub cubic: BTreeMap<(usize, usize, usize, usize), Ast>,
    pub suites: Vec<Suite>,
    pub expect_fail: BTreeSet<String>,
    pub points: usize,
    pub xi_scale: f64,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub ode_step: f64,
    pub transport: Option<TransportSpec>,
    pub geodesic: Option<GeodesicSpec>,
    pub holonomy_basepoint: Option<TotalPoint>,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        ScenarioConfig::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        Parser::default().run(name, text)
    }

    pub fn dim(&self) -> Result<usize> {
        match &self.base {
            BaseSpec::Preset(p) => Ok(presets::preset(p)?.dim()),
            BaseSpec::Expressions { dim, .. } => Ok(*dim),
        }
    }

    pub fn build_base(&self) -> Result<BaseConnection> {
        match &self.base {
            BaseSpec::Preset(p) => presets::preset(p),
            BaseSpec::Expressions { dim, domain, entries } => {
                let n = *dim;
                let dom = match domain {
                    Some((lo, hi)) => BoxDomain::new(lo.clone(), hi.clone())?,
                    None => BoxDomain::cube(n, -5.0, 5.0),
                };
                let progs: Vec<((usize, usize, usize), Program)> =
                    entries.iter().map(|(k, a)| (*k, Program::compile(a))).collect();
                let field = SmoothField::new(dom, &[n, n, n], move |x| {
                    let mut t = Tensor::zeros(&[n, n, n]);
                    for ((k, i, j), p) in &progs {
                        let v = p.eval(x);
                        t[[*k, *i, *j]] = v;
                        t[[*k, *j, *i]] = v;
                    }
                    t
                });
                BaseConnection::new(format!("custom_{n}"), field)
            }
        }
    }

    pub fn build_space(&self) -> Result<LiftedSpace> {
        let base = self.build_base()?;
        let n = base.dim();
        let phi = if self.cubic.is_empty() {
            PhiSpec::new(self.t)
        } else {
            let progs: Vec<((usize, usize, usize, usize), Program)> =
                self.cubic.iter().map(|(k, a)| (*k, Program::compile(a))).collect();
            let s = SmoothField::new(BoxDomain::unbounded(n), &[n, n, n, n], move |x| {
                let mut t = Tensor::zeros(&[n, n, n, n]);
                for ((l, i, j, k), p) in &progs {
                    let v = p.eval(x);
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        t[[*l, *a, *b, *c]] = v;
                    }
                }
                t
            });
            PhiSpec::with_cubic(self.t, s)
        };
        LiftedSpace::from_base(base, self.flavor, phi)
    }
}

#[derive(Default)]
struct Parser {
    section: String,
    preset: Option<String>,
    dim: Option<usize>,
    domain: Option<(Vec<f64>, Vec<f64>)>,
    gamma: Vec<(usize, Vec<usize>, String)>,
    cubic: Vec<(usize, Vec<usize>, String)>,
    flavor: Option<Flavor>,
    t: Option<f64>,
    suites: Vec<Suite>,
    expect_fail: BTreeSet<String>,
    points: Option<usize>,
    xi_scale: Option<f64>,
    seed: Option<u64>,
    tolerances: BTreeMap<String, f64>,
    ode_step: Option<f64>,
    transport: BTreeMap<String, (usize, Vec<f64>)>,
    geodesic: BTreeMap<String, (usize, Vec<f64>)>,
    holonomy: BTreeMap<String, (usize, Vec<f64>)>,
}

fn cfg(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn numbers(line: usize, v: &str) -> Result<Vec<f64>> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| cfg(line, format!("expected a number, found '{s}'")))
        })
        .collect()
}

fn number(line: usize, v: &str) -> Result<f64> {
    match numbers(line, v)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(cfg(line, format!("expected one number, found '{v}'"))),
    }
}

/// `Gamma[1,2,2]` → `[1,2,2]` (one-based, as written).
fn indexed<'a>(key: &'a str, prefix: &str) -> Option<&'a str> {
    key.strip_prefix(prefix)?.strip_prefix('[')?.strip_suffix(']')
}

fn parse_indices(line: usize, s: &str, count: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| cfg(line, format!("bad index '{}'", p.trim())))
        })
        .collect::<Result<_>>()?;
    if idx.len() != count {
        return Err(cfg(line, format!("expected {count} indices, found {}", idx.len())));
    }
    Ok(idx.into_iter().map(|k| k - 1).collect())
}

impl Parser {
    fn run(mut self, name: &str, text: &str) -> Result<ScenarioConfig> {
        for (num, raw) in text.lines().enumerate() {
            let line = num + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(sec) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let sec = sec.trim();
                if ![
                    "base",
                    "bundle",
                    "phi",
                    "checks",
                    "tolerances",
                    "transport",
                    "geodesic",
                    "holonomy",
                ]
                .contains(&sec)
                {
                    return Err(cfg(line, format!("unknown section [{sec}]")));
                }
                self.section = sec.to_string();
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(cfg(line, format!("expected 'key = value', found '{content}'")));
            };
            self.entry(line, key.trim(), value.trim())?;
        }
        self.finish(name)
    }

    fn entry(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let unknown = || cfg(line, format!("unknown key '{key}' in [{}]", self.section));
        match self.section.as_str() {
            "" => Err(cfg(line, "entry before any section")),
            "base" => {
                if key == "preset" {
                    self.preset = Some(value.to_string());
                } else if key == "dim" {
                    let d = value.parse::<usize>().ok().filter(|&d| d >= 1);
                    self.dim = Some(d.ok_or_else(|| cfg(line, format!("bad dimension '{value}'")))?);
                } else if key == "domain" {
                    let v = numbers(line, value)?;
                    if v.len() % 2 != 0 || v.is_empty() {
                        return Err(cfg(line, "domain needs lo hi pairs"));
                    }
                    let lo = v.iter().step_by(2).copied().collect();
                    let hi = v.iter().skip(1).step_by(2).copied().collect();
                    self.domain = Some((lo, hi));
                } else if let Some(idx) = indexed(key, "Gamma") {
                    self.gamma.push((line, parse_indices(line, idx, 3)?, value.to_string()));
                } else {
                    return Err(unknown());
                }
                Ok(())
            }
            "bundle" => match key {
                "flavor" => {
                    self.flavor = Some(Flavor::parse(value).map_err(|e| cfg(line, e.to_string()))?);
                    Ok(())
                }
                _ => Err(unknown()),
            },
            "phi" => {
                if key == "t" {
                    self.t = Some(parse_t(value).map_err(|e| cfg(line, e.to_string()))?);
                } else if let Some(idx) = indexed(key, "S") {
                    self.cubic.push((line, parse_indices(line, idx, 4)?, value.to_string()));
                } else {
                    return Err(unknown());
                }
                Ok(())
            }
            "checks" => {
                match key {
                    "suites" => {
                        for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                            let suite = if s == "all" {
                                self.suites.extend(Suite::ALL);
                                continue;
                            } else {
                                Suite::parse(s).ok_or_else(|| cfg(line, format!("unknown suite '{s}'")))?
                            };
                            self.suites.push(suite);
                        }
                    }
                    "expect_fail" => {
                        for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                            let suite = s.split('.').next().unwrap_or(s);
                            if Suite::parse(suite).is_none() {
                                return Err(cfg(line, format!("expect_fail names unknown suite '{suite}'")));
                            }
                            self.expect_fail.insert(s.to_string());
                        }
                    }
                    "points" => {
                        let p = value.parse::<usize>().ok().filter(|&p| p >= 2);
                        self.points = Some(p.ok_or_else(|| cfg(line, "points must be an integer ≥ 2"))?);
                    }
                    "xi_scale" => self.xi_scale = Some(number(line, value)?),
                    "seed" => self.seed = Some(value.parse().map_err(|_| cfg(line, format!("bad seed '{value}'")))?),
                    "ode_step" => self.ode_step = Some(number(line, value)?),
                    _ => return Err(unknown()),
                }
                Ok(())
            }
            "tolerances" => {
                let suite = key.split('.').next().unwrap_or(key);
                if Suite::parse(suite).is_none() && suite != "geodesic" {
                    return Err(cfg(line, format!("tolerance for unknown suite '{suite}'")));
                }
                let v = number(line, value)?;
                if !(v >= 0.0) {
                    return Err(cfg(line, "tolerances must be non-negative"));
                }
                self.tolerances.insert(key.to_string(), v);
                Ok(())
            }
            "transport" | "geodesic" | "holonomy" => {
                let allowed: &[&str] = match self.section.as_str() {
                    "transport" => &["from", "to", "state"],
                    "geodesic" => &["start", "velocity", "tspan", "record_every"],
                    _ => &["basepoint"],
                };
                if !allowed.contains(&key) {
                    return Err(unknown());
                }
                let v = numbers(line, value)?;
                let map = match self.section.as_str() {
                    "transport" => &mut self.transport,
                    "geodesic" => &mut self.geodesic,
                    _ => &mut self.holonomy,
                };
                map.insert(key.to_string(), (line, v));
                Ok(())
            }
            _ => Err(unknown()),
        }
    }

    fn finish(self, name: &str) -> Result<ScenarioConfig> {
        let base = match (&self.preset, self.dim) {
            (Some(_), Some(_)) => return Err(cfg(0, "[base] takes either preset or dim, not both")),
            (Some(p), None) => {
                if !self.gamma.is_empty() {
                    return Err(cfg(self.gamma[0].0, "Gamma entries need dim instead of preset"));
                }
                presets::preset(p).map_err(|e| cfg(0, e.to_string()))?;
                BaseSpec::Preset(p.clone())
            }
            (None, Some(n)) => {
                let mut entries: BTreeMap<(usize, usize, usize), Ast> = BTreeMap::new();
                for (line, idx, src) in &self.gamma {
                    if idx.iter().any(|&k| k >= n) {
                        return Err(cfg(*line, format!("index out of range for dim {n}")));
                    }
                    let ast = parse_expr_in(src, n).map_err(|e| cfg(*line, e.to_string()))?;
                    let key = (idx[0], idx[1].min(idx[2]), idx[1].max(idx[2]));
                    if let Some(prev) = entries.get(&key) {
                        if *prev != ast {
                            return Err(cfg(*line, "conflicting entries for a symmetric Christoffel pair"));
                        }
                    }
                    entries.insert(key, ast);
                }
                if let Some((lo, _)) = &self.domain {
                    if lo.len() != n {
                        return Err(cfg(0, format!("domain has {} axes, dim is {n}", lo.len())));
                    }
                }
                BaseSpec::Expressions {
                    dim: n,
                    domain: self.domain.clone(),
                    entries,
                }
            }
            (None, None) => return Err(cfg(0, "[base] needs preset or dim")),
        };
        let n = match &base {
            BaseSpec::Preset(p) => presets::preset(p)?.dim(),
            BaseSpec::Expressions { dim, .. } => *dim,
        };
        let mut cubic = BTreeMap::new();
        for (line, idx, src) in &self.cubic {
            if idx.iter().any(|&k| k >= n) {
                return Err(cfg(*line, format!("index out of range for dim {n}")));
            }
            let ast = parse_expr_in(src, n).map_err(|e| cfg(*line, e.to_string()))?;
            let mut low = [idx[1], idx[2], idx[3]];
            low.sort_unstable();
            let key = (idx[0], low[0], low[1], low[2]);
            if let Some(prev) = cubic.get(&key) {
                if *prev != ast {
                    return Err(cfg(*line, "conflicting entries for a symmetric cubic component"));
                }
            }
            cubic.insert(key, ast);
        }
        let point = |map: &BTreeMap<String, (usize, Vec<f64>)>, key: &str, len: usize| -> Result<Option<Vec<f64>>> {
            match map.get(key) {
                None => Ok(None),
                Some((line, v)) if v.len() == len => {
                    let _ = line;
                    Ok(Some(v.clone()))
                }
                Some((line, v)) => Err(cfg(*line, format!("'{key}' needs {len} numbers, found {}", v.len()))),
            }
        };
        let split = |v: Vec<f64>| TotalPoint::from_chart(&v);
        let framed = |v: Vec<f64>| FramedVector::from_stacked(&v);
        let transport = match (
            point(&self.transport, "from", 2 * n)?,
            point(&self.transport, "to", 2 * n)?,
            point(&self.transport, "state", 2 * n)?,
        ) {
            (None, None, None) => None,
            (Some(a), Some(b), s) => Some(TransportSpec {
                from: split(a),
                to: split(b),
                state: framed(s.unwrap_or_else(|| default_state(n).stacked())),
            }),
            _ => return Err(cfg(0, "[transport] needs both from and to")),
        };
        let geodesic = match (
            point(&self.geodesic, "start", 2 * n)?,
            point(&self.geodesic, "velocity", 2 * n)?,
        ) {
            (None, None) if self.geodesic.is_empty() => None,
            (Some(a), Some(b)) => Some(GeodesicSpec {
                start: split(a),
                velocity: framed(b),
                tspan: point(&self.geodesic, "tspan", 1)?.map_or(1.0, |v| v[0]),
                record_every: point(&self.geodesic, "record_every", 1)?.map_or(10, |v| v[0].max(1.0) as usize),
            }),
            _ => return Err(cfg(0, "[geodesic] needs start and velocity")),
        };
        let holonomy_basepoint = point(&self.holonomy, "basepoint", 2 * n)?.map(split);
        let mut suites = self.suites;
        suites.sort();
        suites.dedup();
        Ok(ScenarioConfig {
            name: name.to_string(),
            base,
            flavor: self.flavor.unwrap_or(Flavor::Cotangent),
            t: self.t.unwrap_or(1.0),
            cubic,
            suites,
            expect_fail: self.expect_fail,
            points: self.points.unwrap_or(8),
            xi_scale: self.xi_scale.unwrap_or(1.0),
            seed: self.seed.unwrap_or(0),
            tolerances: self.tolerances,
            ode_step: self.ode_step.unwrap_or(crate::transport::DEFAULT_ODE_STEP),
            transport,
            geodesic,
            holonomy_basepoint,
        })
    }
}

fn default_state(n: usize) -> FramedVector {
    FramedVector {
        y: (0..n).map(|i| 0.5 - 0.3 * i as f64).collect(),
        v: (0..n).map(|i| 0.2 + 0.4 * i as f64).collect(),
    }
}

/// What a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The suites listed in the config.
    Verify,
    /// Only the holonomy suite.
    Holonomy,
    /// Only the geodesic integration.
    Geodesic,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub tol_scale: f64,
    pub ode_step: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Verify,
            seed: None,
            tol_scale: 1.0,
            ode_step: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub expected_fail: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    /// Counts against the exit status.
    pub fn is_failure(&self) -> bool {
        !self.pass && !self.expected_fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub basepoint: Vec<f64>,
    pub dimension: usize,
    pub generators: usize,
    pub flags: HolonomyFlags,
    /// Basis matrices as rows, `(vertical, horizontal)` ordering.
    pub basis: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicReport {
    pub start: Vec<f64>,
    pub tspan: f64,
    pub samples: usize,
    pub end: Vec<f64>,
    pub end_velocity: Vec<f64>,
    #[serde(skip)]
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub base: String,
    pub dim: usize,
    pub flavor: Flavor,
    pub t: f64,
    pub cubic: bool,
    pub seed: u64,
    pub points: usize,
    pub suites: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Totals {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub expected_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scenario: ScenarioSummary,
    pub checks: Vec<CheckResult>,
    pub holonomy: Option<HolonomyReport>,
    pub geodesic: Option<GeodesicReport>,
    pub totals: Totals,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| !c.is_failure())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let verdict = match (c.pass, c.expected_fail) {
                    (true, _) => "PASS",
                    (false, true) => "XFAIL",
                    (false, false) => "FAIL",
                };
                let residual = c.residual.map_or_else(|| "error".to_string(), |r| format!("{r:.3e}"));
                let mut line = format!("{verdict:5} {:40} {residual:>10} (tol {:.1e})", c.name, c.tolerance);
                if let Some(e) = &c.error {
                    line.push_str(&format!(" {e}"));
                }
                line
            })
            .collect()
    }
}

/// Tolerance used when the config does not override it.
fn default_tolerance(check: &str) -> f64 {
    match check {
        "torsion.base" => 1e-10,
        "torsion.christoffel_symmetry" => 1e-12,
        "torsion.frame_agreement" => 1e-7,
        "curvature-table.items" | "curvature-table.metric_identity" => 1e-6,
        "curvature-table.dr_items" => 1e-5,
        "metric.signature" => 0.0,
        "metric.compatibility" => 1e-6,
        "metric.koszul" => 1e-7,
        "symplectic.closed" => 1e-12,
        "symplectic.compatibility" => 1e-6,
        "symplectic.condition" => 1e-7,
        "symplectic.equivalence" => 1e-6,
        "symmetric-space.base" | "symmetric-space.total" => 1e-5,
        "transport.split_vs_chart" => 1e-6,
        "transport.linearity" => 1e-8,
        "transport.reversal" => 1e-6,
        "transport.error_estimate" => 1e-6,
        "holonomy.vertical_preserved" => 1e-6,
        "geodesic.split_vs_chart" => 1e-6,
        _ => 1e-6,
    }
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    opts: &'a RunOptions,
    space: LiftedSpace,
    points: Vec<TotalPoint>,
    rng: ChaCha8Rng,
    checks: Vec<CheckResult>,
}

impl Runner<'_> {
    fn tolerance(&self, name: &str) -> f64 {
        let suite = name.split('.').next().unwrap_or(name);
        let tol = self
            .cfg
            .tolerances
            .get(name)
            .or_else(|| self.cfg.tolerances.get(suite))
            .copied()
            .unwrap_or_else(|| default_tolerance(name));
        tol * self.opts.tol_scale
    }

    fn push(&mut self, name: &str, value: Result<f64>) {
        let suite = name.split('.').next().unwrap_or(name);
        let expected_fail = self.cfg.expect_fail.contains(name) || self.cfg.expect_fail.contains(suite);
        let tolerance = self.tolerance(name);
        let (residual, error) = match value {
            Ok(r) if r.is_finite() => (Some(r), None),
            Ok(r) => (None, Some(format!("non-finite residual {r}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        let pass = residual.is_some_and(|r| r <= tolerance);
        self.checks.push(CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            pass,
            expected_fail,
            error,
        });
    }

    fn settings(&self) -> TransportSettings {
        TransportSettings {
            h_ode: self.opts.ode_step.unwrap_or(self.cfg.ode_step),
            ..TransportSettings::default()
        }
    }

    fn few(&self, k: usize) -> &[TotalPoint] {
        &self.points[..k.min(self.points.len())]
    }

    fn torsion(&mut self) {
        let s = &self.space;
        let base = s.base().torsion_residual(5);
        let sym = (|| -> Result<f64> {
            let mut worst = 0.0_f64;
            for p in &self.points {
                let c = s.christoffels(p)?;
                worst = worst.max(c.max_diff(&c.permuted(&[0, 2, 1])));
            }
            Ok(worst)
        })();
        let agree = frame_agreement(s, self.few(4));
        self.push("torsion.base", base);
        self.push("torsion.christoffel_symmetry", sym);
        self.push("torsion.frame_agreement", agree);
    }

    fn curvature_table(&mut self) {
        let s = &self.space;
        let items = (|| -> Result<f64> {
            let mut worst = 0.0_f64;
            for p in self.few(6) {
                for it in curvature_table(s, p)? {
                    worst = worst.max(it.residual);
                }
            }
            Ok(worst)
        })();
        let dr = (|| -> Result<f64> {
            let mut worst = 0.0_f64;
            for p in self.few(2) {
                for it in dr_table(s, p)? {
                    if !it.item.starts_with("DR term") {
                        worst = worst.max(it.residual);
                    }
                }
            }
            Ok(worst)
        })();
        let identity = (s.flavor() == Flavor::Cotangent && s.phi_spec().t == 1.0 && s.phi_spec().extra_s.is_none())
            .then(|| -> Result<f64> {
                let mut worst = 0.0_f64;
                for p in self.few(6) {
                    worst = worst.max(metric_identity_residual(s, p)?);
                }
                Ok(worst)
            });
        self.push("curvature-table.items", items);
        self.push("curvature-table.dr_items", dr);
        if let Some(c) = identity {
            self.push("curvature-table.metric_identity", c);
        }
    }

    fn metric(&mut self) {
        let g = NeutralMetric::new(self.space.clone());
        let n = self.space.n();
        let (sig, compat, koszul) = match &g {
            Err(e) => (Err(e.clone()), Err(e.clone()), Err(e.clone())),
            Ok(g) => {
                let sig = (|| -> Result<f64> {
                    let mut bad = 0;
                    for p in &self.points {
                        if g.signature(p, 1e-9)? != (n, n, 0) {
                            bad += 1;
                        }
                    }
                    Ok(bad as f64)
                })();
                (sig, g.compatibility(&self.points), koszul_max(g, &self.points[0]))
            }
        };
        self.push("metric.signature", sig);
        self.push("metric.compatibility", compat);
        self.push("metric.koszul", koszul);
    }

    fn symplectic(&mut self) {
        let w = CanonicalSymplectic::new(self.space.clone());
        let n = self.space.n();
        let results = match &w {
            Err(e) => vec![Err(e.clone()); 4],
            Ok(w) => {
                let closed = (|| -> Result<f64> {
                    let mut worst = 0.0_f64;
                    for p in &self.points {
                        worst = worst.max(w.exterior_derivative(p)?);
                    }
                    Ok(worst)
                })();
                let mut cond = Ok(0.0_f64);
                let mut equiv = Ok(0.0_f64);
                'outer: for p in &self.points {
                    for (x, y, z) in coordinate_triples(n) {
                        match symplectic_sample(w, p, &x, &y, &z) {
                            Ok(smp) => {
                                cond = cond.map(|c| c.max(smp.closed_form.abs()));
                                equiv = equiv.map(|e| e.max((smp.closed_form - smp.direct).abs()));
                            }
                            Err(e) => {
                                cond = Err(e.clone());
                                equiv = Err(e);
                                break 'outer;
                            }
                        }
                    }
                }
                vec![closed, w.compatibility(&self.points), cond, equiv]
            }
        };
        for (name, r) in ["closed", "compatibility", "condition", "equivalence"]
            .iter()
            .zip(results)
        {
            self.push(&format!("symplectic.{name}"), r);
        }
    }

    fn symmetric_space(&mut self) {
        match symmetric_space_report(&self.space, self.few(3)) {
            Ok(r) => {
                self.push("symmetric-space.base", Ok(r.max_nabla_base_curvature));
                self.push("symmetric-space.total", Ok(r.max_nabla_curvature));
            }
            Err(e) => {
                self.push("symmetric-space.base", Err(e.clone()));
                self.push("symmetric-space.total", Err(e));
            }
        }
    }

    fn transport(&mut self) {
        let n = self.space.n();
        let spec = self.cfg.transport.clone().unwrap_or_else(|| TransportSpec {
            from: self.points[0].clone(),
            to: self.points[1].clone(),
            state: default_state(n),
        });
        let curve = CurveInM::line(&spec.from, &spec.to);
        let st = self.settings();
        let rand_state = |rng: &mut ChaCha8Rng| FramedVector {
            y: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            v: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let s1 = rand_state(&mut self.rng);
        let s2 = rand_state(&mut self.rng);
        let (alpha, beta): (f64, f64) = (self.rng.gen_range(-2.0..2.0), self.rng.gen_range(-2.0..2.0));
        let space = &self.space;
        let tr = |s: &FramedVector, st: &TransportSettings, c: &CurveInM| parallel_transport(space, c, s, st);
        let split_chart = (|| -> Result<f64> {
            let a = tr(&spec.state, &st, &curve)?.value;
            let b = tr(&spec.state, &st.with_path(TransportPath::Chart), &curve)?.value;
            Ok(a.max_diff(&b))
        })();
        let linear = (|| -> Result<f64> {
            let combo = FramedVector::from_stacked(
                &s1.stacked()
                    .iter()
                    .zip(s2.stacked())
                    .map(|(a, b)| alpha * a + beta * b)
                    .collect::<Vec<_>>(),
            );
            let lhs = tr(&combo, &st, &curve)?.value.stacked();
            let t1 = tr(&s1, &st, &curve)?.value.stacked();
            let t2 = tr(&s2, &st, &curve)?.value.stacked();
            let scale = lhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            Ok(lhs
                .iter()
                .zip(t1.iter().zip(&t2))
                .fold(0.0_f64, |m, (l, (a, b))| m.max((l - alpha * a - beta * b).abs()))
                / scale)
        })();
        let reversal = (|| -> Result<f64> {
            let there = tr(&spec.state, &st, &curve)?.value;
            let back = tr(&there, &st, &curve.reversed())?.value;
            Ok(back.max_diff(&spec.state))
        })();
        let estimate = (|| -> Result<f64> {
            let mut s = st;
            s.estimate_error = true;
            Ok(tr(&spec.state, &s, &curve)?.error_estimate.unwrap_or(f64::NAN))
        })();
        self.push("transport.split_vs_chart", split_chart);
        self.push("transport.linearity", linear);
        self.push("transport.reversal", reversal);
        self.push("transport.error_estimate", estimate);
    }

    fn holonomy(&mut self) -> Option<HolonomyReport> {
        let n = self.space.n();
        let basepoint = self.cfg.holonomy_basepoint.clone().unwrap_or_else(|| {
            let d = self.space.base().domain();
            let x = d.lerp(&vec![0.5; n], 1.0);
            TotalPoint::zero_section(x)
        });
        let mut settings = HolonomySettings::for_dim(n);
        if let Some(h) = self.opts.ode_step {
            settings.transport.h_ode = h;
        }
        match holonomy_algebra(&self.space, &basepoint, &settings) {
            Ok(est) => {
                self.push("holonomy.vertical_preserved", Ok(est.flags.max_lower_left));
                Some(HolonomyReport {
                    basepoint: basepoint.chart(),
                    dimension: est.dimension(),
                    generators: est.generator_count,
                    flags: est.flags.clone(),
                    basis: est.basis.iter().map(rows).collect(),
                })
            }
            Err(e) => {
                self.push("holonomy.vertical_preserved", Err(e));
                None
            }
        }
    }

    fn geodesic(&mut self) -> Option<GeodesicReport> {
        let n = self.space.n();
        let spec = self.cfg.geodesic.clone().unwrap_or_else(|| GeodesicSpec {
            start: self.points[0].clone(),
            velocity: default_state(n),
            tspan: 1.0,
            record_every: 10,
        });
        let st = self.settings();
        let split = geodesic(
            &self.space,
            &spec.start,
            &spec.velocity,
            spec.tspan,
            &st,
            spec.record_every,
        );
        let chart = geodesic(
            &self.space,
            &spec.start,
            &spec.velocity,
            spec.tspan,
            &st.with_path(TransportPath::Chart),
            spec.record_every,
        );
        let agree = match (&split, &chart) {
            (Ok(a), Ok(b)) => {
                let (pa, va) = a.last().expect("non-empty");
                let (pb, vb) = b.last().expect("non-empty");
                let dp = pa
                    .chart()
                    .iter()
                    .zip(pb.chart())
                    .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
                Ok(dp.max(va.max_diff(vb)))
            }
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        };
        self.push("geodesic.split_vs_chart", agree);
        let tr = split.ok()?;
        let (p, v) = tr.last()?;
        Some(GeodesicReport {
            start: spec.start.chart(),
            tspan: spec.tspan,
            samples: tr.times.len(),
            end: p.chart(),
            end_velocity: v.stacked(),
            csv: tr.to_csv(),
        })
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| {
                    let v = m[(r, c)];
                    if v.abs() < 1e-13 {
                        0.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

fn coordinate_triples(n: usize) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let e = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push((e(i), e(j), e(k)));
            }
        }
    }
    out
}

/// Largest disagreement between the chart and frame forms of `D_A B` over
/// all nine kind pairs of test fields.
pub fn frame_agreement(space: &LiftedSpace, points: &[TotalPoint]) -> Result<f64> {
    let n = space.n();
    let mut worst = 0.0_f64;
    for p in points {
        for [a, b, _] in kind_triples().into_iter().step_by(3) {
            let fa = test_field(a, n, 0);
            let fb = test_field(b, n, 1);
            let frame = space.d_frame(&fa, &fb, p)?;
            let chart = space.d_chart(&fa, &fb, p)?;
            worst = worst.max(frame.max_diff(&chart));
        }
    }
    Ok(worst)
}

/// Largest Koszul residual over the 27 kind triples at `p`.
pub fn koszul_max(g: &NeutralMetric, p: &TotalPoint) -> Result<f64> {
    let n = g.space().n();
    let mut worst = 0.0_f64;
    for [a, b, c] in kind_triples() {
        let k = g.koszul_residual(&test_field(a, n, 0), &test_field(b, n, 1), &test_field(c, n, 2), p)?;
        worst = worst.max(k.residual());
    }
    Ok(worst)
}

/// Executes a scenario.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Report> {
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(Error::Invalid("tolerance scale must be positive".into()));
    }
    let space = cfg.build_space()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 0.05 + 8.0 * space.fd_step();
    let points = random_points(&space, cfg.points, &mut rng, margin, cfg.xi_scale);
    let mut runner = Runner {
        cfg,
        opts,
        space,
        points,
        rng,
        checks: Vec::new(),
    };
    let suites: Vec<Suite> = match opts.mode {
        Mode::Verify => cfg.suites.clone(),
        Mode::Holonomy => vec![Suite::Holonomy],
        Mode::Geodesic => Vec::new(),
    };
    let mut holonomy = None;
    for suite in &suites {
        match suite {
            Suite::Torsion => runner.torsion(),
            Suite::CurvatureTable => runner.curvature_table(),
            Suite::Metric => runner.metric(),
            Suite::Symplectic => runner.symplectic(),
            Suite::SymmetricSpace => runner.symmetric_space(),
            Suite::Transport => runner.transport(),
            Suite::Holonomy => holonomy = runner.holonomy(),
        }
    }
    let geodesic = (opts.mode == Mode::Geodesic).then(|| runner.geodesic()).flatten();
    let mut checks = runner.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let totals = Totals {
        checks: checks.len(),
        passed: checks.iter().filter(|c| c.pass).count(),
        failed: checks.iter().filter(|c| c.is_failure()).count(),
        expected_failures: checks.iter().filter(|c| !c.pass && c.expected_fail).count(),
    };
    let base_name = match &cfg.base {
        BaseSpec::Preset(p) => p.clone(),
        BaseSpec::Expressions { dim, .. } => format!("expressions (n = {dim})"),
    };
    Ok(Report {
        schema: SCHEMA,
        scenario: ScenarioSummary {
            name: cfg.name.clone(),
            base: base_name,
            dim: runner.space.n(),
            flavor: cfg.flavor,
            t: cfg.t,
            cubic: !cfg.cubic.is_empty(),
            seed,
            points: cfg.points,
            suites: suites.iter().map(|s| s.name().to_string()).collect(),
        },
        checks,
        holonomy,
        geodesic,
        totals,
    })
}

/// Rows `name,description` of the preset catalog.
pub fn preset_listing() -> Vec<String> {
    presets::CATALOG.iter().map(|(n, d)| format!("{n:14} {d}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const POLY22_EXPR: &str = "
# poly22 written out
[base]
dim = 2
domain = -3 3 -3 3
Gamma[1,2,2] = x1

[bundle]
flavor = cotangent

[phi]
t = 0

[checks]
suites = metric
expect_fail = metric.compatibility, metric.koszul
points = 4
seed = 3
";

    #[test]
    fn parses_expression_base() {
        let c = ScenarioConfig::parse("p", POLY22_EXPR).unwrap();
        assert_eq!(c.dim().unwrap(), 2);
        assert_eq!(c.suites, vec![Suite::Metric]);
        let b = c.build_base().unwrap();
        let g = b.christoffels(&[1.5, 0.0]).unwrap();
        assert_eq!(g[[0, 1, 1]], 1.5);
    }

    #[test]
    fn rejects_unknown_suite_and_keys() {
        let bad = "[base]\npreset = poly22\n[checks]\nsuites = metric, curvature\n";
        match ScenarioConfig::parse("x", bad) {
            Err(Error::Config { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(ScenarioConfig::parse("x", "[base]\npreset = poly22\ncolour = red\n").is_err());
        assert!(ScenarioConfig::parse("x", "[nope]\n").is_err());
        assert!(ScenarioConfig::parse("x", "[base]\npreset = nowhere\n").is_err());
    }

    #[test]
    fn rejects_conflicting_mirrored_entries() {
        let bad = "[base]\ndim = 2\nGamma[1,1,2] = x1\nGamma[1,2,1] = x2\n";
        assert!(matches!(
            ScenarioConfig::parse("x", bad),
            Err(Error::Config { line: 4, .. })
        ));
        let ok = "[base]\ndim = 2\nGamma[1,1,2] = x1\nGamma[1,2,1] = x1\n";
        assert!(ScenarioConfig::parse("x", ok).is_ok());
    }

    #[test]
    fn expression_errors_carry_the_config_line() {
        let bad = "[base]\ndim = 2\nGamma[1,2,2] = x1 + \n";
        match ScenarioConfig::parse("x", bad) {
            Err(Error::Config { line: 3, message }) => assert!(message.contains("column 5"), "{message}"),
            other => panic!("{other:?}"),
        }
        let bad = "[base]\ndim = 2\nGamma[1,2,2] = x3\n";
        assert!(matches!(
            ScenarioConfig::parse("x", bad),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn negative_control_is_reported_as_expected_failure() {
        let c = ScenarioConfig::parse("p", POLY22_EXPR).unwrap();
        let r = run_scenario(&c, &RunOptions::default()).unwrap();
        let compat = r.checks.iter().find(|k| k.name == "metric.compatibility").unwrap();
        assert!(!compat.pass && compat.expected_fail);
        assert!(compat.residual.unwrap() > 1e-3);
        assert!(r.ok(), "{}", r.summary_lines().join("\n"));
    }

    #[test]
    fn reports_are_deterministic() {
        let c = ScenarioConfig::parse("p", POLY22_EXPR).unwrap();
        let a = run_scenario(&c, &RunOptions::default()).unwrap().to_json();
        let b = run_scenario(&c, &RunOptions::default()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains(SCHEMA));
    }

    #[test]
    fn suite_errors_are_captured() {
        let cfg = "[base]\npreset = poly22\n[bundle]\nflavor = tangent\n[checks]\nsuites = metric\npoints = 2\n";
        let r = run_scenario(&ScenarioConfig::parse("t", cfg).unwrap(), &RunOptions::default()).unwrap();
        assert_eq!(r.checks.len(), 3);
        assert!(r.checks.iter().all(|c| c.error.is_some() && !c.pass));
        assert!(!r.ok());
    }
}
