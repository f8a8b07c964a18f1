//! Scenario files (TOML).
//!
//! ```toml
//! stencil = "d3q19"
//! domain = [128, 64, 64]
//! mode = "progressive"
//! iterations = 500
//!
//! [[component]]
//! tau = 0.8
//!
//! [[seed]]
//! sphere = { center = [16.0, 16.0, 16.0], radius = 4.0 }
//! density = [1.05]
//! velocity = [[0.05, 0.0, 0.0]]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use progmesh_core::engine::{Region, Seed};
use progmesh_core::{ComponentParams, CouplingMatrix, Eos, Policy, RunMode, StencilKind};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilName {
    D2q9,
    D3q19,
}

impl From<StencilName> for StencilKind {
    fn from(s: StencilName) -> Self {
        match s {
            StencilName::D2q9 => StencilKind::D2Q9,
            StencilName::D3q19 => StencilKind::D3Q19,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Static,
    Progressive,
}

impl From<ModeName> for RunMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Static => RunMode::Static,
            ModeName::Progressive => RunMode::Progressive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Simple,
    Optimized,
}

impl From<PolicyName> for Policy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::Simple => Policy::Simple,
            PolicyName::Optimized => Policy::Optimized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Ambient,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    Rho,
    UMagnitude,
    Psi,
}

impl FieldName {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldName::Rho => "rho",
            FieldName::UMagnitude => "u_magnitude",
            FieldName::Psi => "psi",
        }
    }
}

/// Either explicit PR constants or critical-point data.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosSpec {
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub pc: Option<f64>,
    #[serde(default = "one")]
    pub r: f64,
    pub t: f64,
    #[serde(default)]
    pub tc: Option<f64>,
    #[serde(default)]
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub tau: f64,
    #[serde(default)]
    pub eos: Option<EosSpec>,
    #[serde(default = "minus_one")]
    pub g_self: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "one")]
    pub rho_ambient: f64,
    #[serde(default)]
    pub gravity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default, rename = "box")]
    pub cuboid: Option<BoxSpec>,
    #[serde(default)]
    pub sphere: Option<SphereSpec>,
    pub density: Vec<f64>,
    #[serde(default)]
    pub velocity: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub stencil: StencilName,
    pub domain: [usize; 3],
    #[serde(default = "default_tile_extent")]
    pub tile_extent: usize,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    pub iterations: u64,
    #[serde(default = "default_interval")]
    pub report_interval: u64,
    /// 0 disables field dumps.
    #[serde(default)]
    pub snapshot_interval: u64,
    #[serde(default = "default_fields")]
    pub snapshot_fields: Vec<FieldName>,
    #[serde(default)]
    pub snapshot_pgm: bool,
    #[serde(default)]
    pub threshold: f64,
    #[serde(rename = "component")]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default)]
    pub topology: Option<PathBuf>,
    #[serde(default)]
    pub devices: Option<usize>,
    /// Defaults to one worker per device.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    #[serde(default = "default_weight_p2p")]
    pub weight_p2p: f64,
    #[serde(default = "one")]
    pub weight_staged: f64,
    #[serde(default = "default_boundary")]
    pub boundary: [Boundary; 3],
    #[serde(default, rename = "seed")]
    pub seeds: Vec<SeedSpec>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn default_beta() -> f64 {
    1.16
}
fn default_tile_extent() -> usize {
    32
}
fn default_mode() -> ModeName {
    ModeName::Progressive
}
fn default_interval() -> u64 {
    10
}
fn default_fields() -> Vec<FieldName> {
    vec![FieldName::Rho]
}
fn default_policy() -> PolicyName {
    PolicyName::Optimized
}
fn default_weight_p2p() -> f64 {
    0.5
}
fn default_boundary() -> [Boundary; 3] {
    [Boundary::Ambient; 3]
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::parse(path, m),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.geometry, &mut cfg.topology].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if cfg.output.is_relative() {
        cfg.output = base.join(&cfg.output);
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let kind = StencilKind::from(self.stencil);
        if self.tile_extent < 4 {
            return Err(bad("tile_extent must be at least 4"));
        }
        for (axis, &n) in self.domain.iter().enumerate() {
            if kind.dim() == 2 && axis == 2 {
                if n != 1 {
                    return Err(bad("domain[2] must be 1 for a 2-D stencil"));
                }
                continue;
            }
            if n == 0 || n % self.tile_extent != 0 {
                return Err(bad(format!(
                    "domain[{axis}] = {n} is not a positive multiple of tile_extent {}",
                    self.tile_extent
                )));
            }
        }
        if !(self.threshold >= 0.0) {
            return Err(bad("threshold must be >= 0"));
        }
        if self.report_interval == 0 {
            return Err(bad("report_interval must be >= 1"));
        }
        let n = self.components.len();
        if n == 0 || n > progmesh_core::engine::MAX_COMPONENTS {
            return Err(bad("between 1 and 4 [[component]] tables are required"));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.tau > 0.5) {
                return Err(bad(format!("component[{k}].tau must exceed 0.5, got {}", c.tau)));
            }
            self.component_params(k).map_err(|e| bad(format!("component[{k}]: {e}")))?;
        }
        self.coupling_matrix()?;
        if let Some(d) = self.devices {
            if d == 0 {
                return Err(bad("devices must be >= 1"));
            }
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be >= 1"));
        }
        if !(self.weight_p2p > 0.0 && self.weight_p2p <= self.weight_staged) {
            return Err(bad("weights must satisfy 0 < weight_p2p <= weight_staged"));
        }
        for (k, s) in self.seeds.iter().enumerate() {
            if s.cuboid.is_some() == s.sphere.is_some() {
                return Err(bad(format!("seed[{k}] needs exactly one of box or sphere")));
            }
            if s.density.len() != n {
                return Err(bad(format!("seed[{k}].density must have {n} entries")));
            }
            if s.velocity.as_ref().is_some_and(|v| v.len() != n) {
                return Err(bad(format!("seed[{k}].velocity must have {n} entries")));
            }
        }
        Ok(())
    }

    pub fn stencil_kind(&self) -> StencilKind {
        self.stencil.into()
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.boundary.map(|b| b == Boundary::Periodic)
    }

    pub fn component_params(&self, k: usize) -> Result<ComponentParams> {
        let c = &self.components[k];
        let eos = match &c.eos {
            None => Eos::ideal(),
            Some(e) => match (e.a, e.b, e.pc, e.tc) {
                (Some(a), Some(b), None, tc) => Eos {
                    a,
                    b,
                    r: e.r,
                    t: e.t,
                    tc: tc.unwrap_or(0.0778 * a / (0.45724 * b * e.r)),
                    omega: e.omega,
                },
                (None, None, Some(pc), Some(tc)) => Eos::from_critical(tc, pc, e.omega, e.r, e.t),
                _ => return Err(bad("eos needs either a and b, or pc and tc")),
            },
        };
        let p = ComponentParams {
            tau: c.tau,
            eos,
            g_self: c.g_self,
            beta: c.beta,
            rho_ambient: c.rho_ambient,
            gravity: c.gravity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn coupling_matrix(&self) -> Result<CouplingMatrix> {
        let n = self.components.len();
        match &self.coupling {
            None => Ok(CouplingMatrix::zeros(n)),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(bad(format!("coupling must be a {n} x {n} matrix")));
                }
                Ok(CouplingMatrix::from_rows(rows)?)
            }
        }
    }

    pub fn seeds(&self) -> Vec<Seed> {
        let n = self.components.len();
        self.seeds
            .iter()
            .map(|s| Seed {
                region: match (&s.cuboid, &s.sphere) {
                    (Some(b), _) => Region::Box { min: b.min, max: b.max },
                    (_, Some(sp)) => Region::Sphere {
                        center: sp.center,
                        radius: sp.radius,
                    },
                    _ => unreachable!("validated"),
                },
                density: s.density.clone(),
                velocity: s.velocity.clone().unwrap_or_else(|| vec![[0.0; 3]; n]),
            })
            .collect()
    }
}
