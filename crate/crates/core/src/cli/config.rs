//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{CondenserSpec, OuterSpec, ShapeSpec};
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, GridDomain, GridFunction, GridFunctionDoc};
use crate::intrinsic::{CaccioppoliOptions, Stencil};
use crate::linalg::{self, Mat3};
use crate::quasiregular::{HarmonicityOptions, MappingSpec};
use crate::solver::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Capacity,
    Caccioppoli,
    Qr,
    Metric,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Capacity => "capacity",
            Command::Caccioppoli => "caccioppoli",
            Command::Qr => "qr",
            Command::Metric => "metric",
            Command::Check => "check",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional here; must agree with the command given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub domain: DomainConfig,
    pub p: f64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Dirichlet data for `solve` and for the harmonic input of `caccioppoli`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<FunctionSpec>,
    /// Extra Dirichlet regions besides the domain boundary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pinned: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condenser: Option<CondenserSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub balls: Vec<BallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caccioppoli: Option<CaccioppoliBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<MappingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qr: Option<QrBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckBlock>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("\"p\" must be a finite number > 1, got {}", self.p)));
        }
        self.solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))
    }
}

/// Grid and coefficient field.
///
/// `field` is `"identity"`, `"scalar:<v>"`, `"random:<alpha>:<beta>"` (seeded
/// by the run seed) or `"file:<path>"` with a JSON array of per-cell `n × n`
/// matrices in row-major cell order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub extent: Vec<[f64; 2]>,
    pub shape: Vec<usize>,
    #[serde(default = "default_field")]
    pub field: String,
}

fn default_field() -> String {
    "identity".into()
}

impl DomainConfig {
    pub fn build(&self, base: &Path, seed: u64) -> Result<(GridDomain, CoefficientField)> {
        if self.extent.len() != self.dim || self.shape.len() != self.dim {
            return Err(Error::Config(format!(
                "domain: dim = {} but extent has {} and shape {} entries",
                self.dim,
                self.extent.len(),
                self.shape.len()
            )));
        }
        let d = GridDomain::new(&self.extent, &self.shape)?;
        let field = match self.field.split(':').collect::<Vec<_>>().as_slice() {
            ["identity"] => CoefficientField::identity(&d),
            ["scalar", v] => CoefficientField::scalar(&d, parse_num(v)?)?,
            ["random", a, b] => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                CoefficientField::random_elliptic(&d, parse_num(a)?, parse_num(b)?, &mut rng)?
            }
            ["file", ..] => {
                let path = base.join(&self.field["file:".len()..]);
                field_from_file(&d, &path)?
            }
            _ => return Err(Error::Config(format!("domain: unknown field \"{}\"", self.field))),
        };
        Ok((d, field))
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("domain: \"{s}\" is not a number")))
}

fn field_from_file(d: &GridDomain, path: &Path) -> Result<CoefficientField> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read field {}: {e}", path.display())))?;
    let raw: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)?;
    let n = d.dim();
    let mut mats: Vec<Mat3> = Vec::with_capacity(raw.len());
    for (c, m) in raw.iter().enumerate() {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("field: cell {c} is not an {n}×{n} matrix")));
        }
        let mut g = [0.0; 9];
        for i in 0..n {
            for j in 0..n {
                g[i * 3 + j] = m[i][j];
            }
        }
        mats.push(g);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for g in &mats {
        let ev = linalg::sym_eigenvalues(&linalg::symmetrize(g, n), n);
        lo = lo.min(ev[0]);
        hi = hi.max(ev[n - 1]);
    }
    CoefficientField::from_matrices(d, mats, lo, hi)
}

/// Nodal function given in closed form or from a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `coeffs · x + offset`
    Affine {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// Real (`part = "re"`) or imaginary part of `(z − center)^k` in the plane.
    ComplexPower {
        k: i32,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "default_part")]
        part: Part,
    },
    /// `ln max(|x − center|, min_radius)`
    LogRadius {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "default_min_radius")]
        min_radius: f64,
    },
    /// A serialized grid function `{shape, values}`.
    File { path: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Re,
    Im,
}

fn default_part() -> Part {
    Part::Re
}

fn default_min_radius() -> f64 {
    1e-3
}

impl FunctionSpec {
    pub fn build(&self, d: &GridDomain, base: &Path) -> Result<GridFunction> {
        let n = d.dim();
        let center = |c: &Option<Vec<f64>>| -> Result<[f64; 3]> {
            let mut out = [0.0; 3];
            if let Some(c) = c {
                if c.len() != n {
                    return Err(Error::Config(format!("center has {} entries in dimension {n}", c.len())));
                }
                out[..n].copy_from_slice(c);
            }
            Ok(out)
        };
        let u = match self {
            FunctionSpec::Constant { value } => GridFunction::constant(d, *value),
            FunctionSpec::Affine { coeffs, offset } => {
                if coeffs.len() != n {
                    return Err(Error::Config(format!("affine: {} coefficients in dimension {n}", coeffs.len())));
                }
                GridFunction::from_fn(d, |x| offset + x.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>())
            }
            FunctionSpec::ComplexPower { k, center: c, part } => {
                if n != 2 {
                    return Err(Error::Config("complex_power needs a planar domain".into()));
                }
                let c = center(c)?;
                GridFunction::from_fn(d, |x| {
                    let w = num_complex::Complex64::new(x[0] - c[0], x[1] - c[1]).powi(*k);
                    match part {
                        Part::Re => w.re,
                        Part::Im => w.im,
                    }
                })
            }
            FunctionSpec::LogRadius { center: c, min_radius } => {
                if !(*min_radius > 0.0) {
                    return Err(Error::Config("log_radius: min_radius must be positive".into()));
                }
                let c = center(c)?;
                GridFunction::from_fn(d, |x| {
                    let r = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    r.max(*min_radius).ln()
                })
            }
            FunctionSpec::File { path } => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let doc: GridFunctionDoc = serde_json::from_str(&text)?;
                GridFunction::from_doc(d, &doc)?
            }
        };
        Ok(u)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaccioppoliBlock {
    /// Fixed constant `c`; the weighted mean of `u` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub options: CaccioppoliOptions,
    /// Use the boundary data as is instead of solving for the harmonic
    /// extension (the input must then be harmonic already).
    pub no_solve: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub puncture: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonicity: Option<HarmonicityBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicityBlock {
    pub resolutions: [usize; 2],
    #[serde(default)]
    pub options: HarmonicityOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricBlock {
    pub source: Vec<f64>,
    #[serde(default = "default_stencil")]
    pub stencil: Stencil,
    /// Also report the cutoff `(r − ρ)⁺` and its largest cell `Γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_radius: Option<f64>,
}

fn default_stencil() -> Stencil {
    Stencil::Knight
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Sector,
    Monotone,
    Contraction,
    #[serde(rename = "D1D2", alias = "d1d2")]
    D1D2,
    Choquet,
    #[serde(rename = "increments", alias = "lemma312")]
    Increments,
    Coercive,
    Hemicontinuous,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    pub suites: Vec<Suite>,
    /// Random pairs per suite.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Node sets for the Choquet suite; the first two also give the pure
    /// potentials of the D1/D2 suite.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub e_sets: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f_sets: Vec<ShapeSpec>,
    #[serde(default = "default_outer")]
    pub outer: OuterSpec,
    /// Vertical shift of D2.
    #[serde(default = "default_shift")]
    pub alpha: f64,
    /// Level of the `T_α` truncation in the contraction suite.
    #[serde(default = "default_shift")]
    pub truncation: f64,
}

fn default_samples() -> usize {
    8
}

fn default_outer() -> OuterSpec {
    OuterSpec::DomainBoundary
}

fn default_shift() -> f64 {
    0.5
}

/// Directory against which relative paths of a config are resolved.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
