//! Quasiregular mappings: differentials, dilatations, the matrix θ_f and
//! harmonicity of components under the induced structure.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoefficientField, GridDomain, GridFunction, GridStructure};
use crate::linalg::{self, Mat3};
use crate::pform::PFormContext;
use crate::solver::normalized_harmonicity_residual;

/// Mapping description as it appears in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MappingSpec {
    Power { k: i32 },
    Radial { a: f64 },
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    /// JSON file holding one n-vector per node, node-major.
    Sampled { file: String },
}

impl MappingSpec {
    /// Resolves file references relative to `base` and validates against `d`.
    pub fn resolve(&self, d: &GridDomain, base: &Path) -> Result<Mapping> {
        let m = match self {
            MappingSpec::Power { k } => Mapping::Power { k: *k },
            MappingSpec::Radial { a } => Mapping::Radial { a: *a },
            MappingSpec::Linear { a } => Mapping::linear(a)?,
            MappingSpec::Sampled { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read sampled mapping {}: {e}", path.display()))
                })?;
                let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
                Mapping::sampled(d, &rows)?
            }
        };
        m.validate(d)?;
        Ok(m)
    }
}

/// A mapping `f: Ω → R^n` ready for analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum Mapping {
    /// `z ↦ z^k` in the plane.
    Power { k: i32 },
    /// `x ↦ |x|^{a−1} x`.
    Radial { a: f64 },
    Linear { matrix: Mat3, n: usize },
    /// Node values, `n` per node.
    Sampled { values: Vec<f64>, n: usize },
}

impl Mapping {
    pub fn linear(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if !(1..=3).contains(&n) || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Mapping("linear map needs a square matrix of size 1..=3".into()));
        }
        let mut matrix = [0.0; 9];
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                matrix[i * 3 + j] = *x;
            }
        }
        Ok(Mapping::Linear { matrix, n })
    }

    pub fn sampled(d: &GridDomain, rows: &[Vec<f64>]) -> Result<Self> {
        let n = d.dim();
        if rows.len() != d.node_count() {
            return Err(Error::ShapeMismatch {
                expected: d.node_count(),
                found: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(n * rows.len());
        for r in rows {
            if r.len() != n {
                return Err(Error::Mapping(format!("sampled rows must have {n} entries, found {}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Ok(Mapping::Sampled { values, n })
    }

    /// Samples an analytic mapping on the nodes of `d`.
    pub fn sample(&self, d: &GridDomain) -> Result<Self> {
        self.validate(d)?;
        let n = d.dim();
        let values = (0..d.node_count())
            .flat_map(|j| {
                let f = self.eval(&d.node_coords(j), n);
                f.into_iter().take(n)
            })
            .collect();
        Ok(Mapping::Sampled { values, n })
    }

    pub fn validate(&self, d: &GridDomain) -> Result<()> {
        let n = d.dim();
        if n < 2 {
            return Err(Error::Mapping("quasiregular analysis needs dimension 2 or 3".into()));
        }
        match self {
            Mapping::Power { k } => {
                if n != 2 {
                    return Err(Error::Mapping("power maps are planar".into()));
                }
                if *k == 0 {
                    return Err(Error::Mapping("power map needs k ≠ 0".into()));
                }
            }
            Mapping::Radial { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(Error::Mapping(format!("radial stretch needs a > 0, got {a}")));
                }
            }
            Mapping::Linear { matrix, n: m } => {
                if *m != n {
                    return Err(Error::Mapping(format!("matrix is {m}×{m} on a {n}-dimensional grid")));
                }
                if matrix.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Mapping("matrix has non-finite entries".into()));
                }
            }
            Mapping::Sampled { values, n: m } => {
                if *m != n {
                    return Err(Error::Mapping(format!("sampled vectors have {m} entries on a {n}-dimensional grid")));
                }
                if values.len() != n * d.node_count() {
                    return Err(Error::ShapeMismatch {
                        expected: n * d.node_count(),
                        found: values.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether `f` has closed-form values and derivatives.
    pub fn is_analytic(&self) -> bool {
        !matches!(self, Mapping::Sampled { .. })
    }

    /// Point value of an analytic mapping.
    pub fn eval(&self, x: &[f64], n: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        match self {
            Mapping::Power { k } => {
                let w = Complex64::new(x[0], x[1]).powi(*k);
                out[0] = w.re;
                out[1] = w.im;
            }
            Mapping::Radial { a } => {
                let r = norm(x, n);
                let s = if r == 0.0 {
                    if *a >= 1.0 {
                        0.0
                    } else {
                        f64::NAN
                    }
                } else {
                    r.powf(a - 1.0)
                };
                for i in 0..n {
                    out[i] = s * x[i];
                }
            }
            Mapping::Linear { matrix, .. } => out = linalg::matvec(matrix, x, n),
            Mapping::Sampled { .. } => out = [f64::NAN; 3],
        }
        out
    }

    /// Closed-form differential of an analytic mapping at `x`.
    pub fn differential(&self, x: &[f64], n: usize) -> Mat3 {
        match self {
            Mapping::Power { k } => {
                let z = Complex64::new(x[0], x[1]);
                let d = if *k == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    z.powi(k - 1) * (*k as f64)
                };
                [d.re, -d.im, 0.0, d.im, d.re, 0.0, 0.0, 0.0, 0.0]
            }
            Mapping::Radial { a } => {
                let r = norm(x, n);
                let mut m = [0.0; 9];
                if r == 0.0 {
                    return [f64::NAN; 9];
                }
                let s = r.powf(a - 1.0);
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m[i * 3 + j] = s * (delta + (a - 1.0) * x[i] * x[j] / (r * r));
                    }
                }
                m
            }
            Mapping::Linear { matrix, .. } => *matrix,
            Mapping::Sampled { .. } => [f64::NAN; 9],
        }
    }

    fn components(&self, d: &GridDomain) -> Result<Vec<Vec<f64>>> {
        let n = d.dim();
        let sampled = match self {
            Mapping::Sampled { .. } => self.clone(),
            _ => self.sample(d)?,
        };
        let Mapping::Sampled { values, .. } = sampled else {
            unreachable!()
        };
        Ok((0..n)
            .map(|i| values.iter().skip(i).step_by(n).copied().collect())
            .collect())
    }
}

fn norm(x: &[f64], n: usize) -> f64 {
    x[..n].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Radius of the disk around the origin removed by default: a tenth of the
/// smallest half-extent `max(|lo_i|, |hi_i|)`.
pub fn default_puncture(mapping: &Mapping, d: &GridDomain) -> f64 {
    let contains_origin = d.extent().iter().all(|[lo, hi]| *lo <= 0.0 && *hi >= 0.0);
    let needs = match mapping {
        Mapping::Radial { .. } => true,
        Mapping::Power { .. } => contains_origin,
        _ => false,
    };
    if !needs {
        return 0.0;
    }
    let outer = d
        .extent()
        .iter()
        .map(|[lo, hi]| lo.abs().max(hi.abs()))
        .fold(f64::INFINITY, f64::min);
    0.1 * outer
}

/// Differential and derived quantities on one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellDifferential {
    pub df: Mat3,
    pub jacobian: f64,
    /// Descending.
    pub singular: [f64; 3],
}

/// Per-cell `Df` and `J_f`: closed form at cell centers for analytic kinds,
/// averaged forward differences of each component for sampled data.
pub fn differentiate(mapping: &Mapping, d: &GridDomain) -> Result<Vec<CellDifferential>> {
    mapping.validate(d)?;
    let n = d.dim();
    let dfs: Vec<Mat3> = match mapping {
        Mapping::Sampled { .. } => {
            let s = GridStructure::identity(d.clone());
            let grads = mapping
                .components(d)?
                .into_iter()
                .map(|c| s.gradient(&GridFunction::new(c)))
                .collect::<Result<Vec<_>>>()?;
            (0..d.cell_count())
                .map(|c| {
                    let mut m = [0.0; 9];
                    for (i, g) in grads.iter().enumerate() {
                        for (j, x) in g.cell(c).iter().enumerate() {
                            m[i * 3 + j] = *x;
                        }
                    }
                    m
                })
                .collect()
        }
        _ => (0..d.cell_count())
            .into_par_iter()
            .map(|c| mapping.differential(&d.cell_center(c), n))
            .collect(),
    };
    Ok(dfs
        .into_par_iter()
        .map(|df| CellDifferential {
            df,
            jacobian: linalg::det(&df, n),
            singular: singular_values(&df, n),
        })
        .collect())
}

/// Singular values with the smallest recovered from `|det|` to keep
/// relative accuracy when the map is nearly conformal.
fn singular_values(m: &Mat3, n: usize) -> [f64; 3] {
    let det = linalg::det(m, n).abs();
    match n {
        2 => {
            // Conformal and anticonformal parts: σ₁ ± σ₂ = |·| of each.
            let (a, b, c, d) = (m[0], m[1], m[3], m[4]);
            let conf = (a + d).hypot(c - b);
            let anti = (a - d).hypot(b + c);
            [0.5 * (conf + anti), 0.5 * (conf - anti).abs(), 0.0]
        }
        _ => {
            let mut s = linalg::singular_values(m, n);
            if s[0] * s[1] > 0.0 {
                s[n - 1] = det / (s[0] * s[1]);
            }
            s
        }
    }
}

/// Cell analysis of a mapping on a grid.
#[derive(Clone, Debug)]
pub struct QrAnalysis {
    dim: usize,
    cells: Vec<CellDifferential>,
    /// Cells inside the puncture or with `J_f ≤ 0`.
    excluded: Vec<bool>,
    nonpositive: Vec<usize>,
    puncture: f64,
    excluded_measure: f64,
    k_outer: f64,
    k_inner: f64,
    k_outer_cell: usize,
    k_inner_cell: usize,
    theta: CoefficientField,
}

/// Serializable digest of a [`QrAnalysis`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QrSummary {
    pub dim: usize,
    pub cells: usize,
    pub puncture: f64,
    pub excluded_cells: usize,
    pub nonpositive_cells: usize,
    pub excluded_measure: f64,
    pub k_outer: f64,
    pub k_inner: f64,
    pub k_outer_cell: usize,
    pub k_inner_cell: usize,
    pub alpha: f64,
    pub beta: f64,
    pub max_det_theta_error: f64,
    pub max_theta_identity_deviation: f64,
    pub max_jacobian_svd_error: f64,
}

/// `K_O = max ‖Df‖^n / J_f` and `K_I = max J_f / l(Df)^n` over the cells not
/// excluded, with their arg-max cells.
pub fn dilatations(cells: &[CellDifferential], excluded: &[bool], n: usize) -> Result<(f64, usize, f64, usize)> {
    let mut ko = (f64::NEG_INFINITY, 0);
    let mut ki = (f64::NEG_INFINITY, 0);
    for (c, cd) in cells.iter().enumerate() {
        if excluded[c] {
            continue;
        }
        let o = cd.singular[0].powi(n as i32) / cd.jacobian;
        let i = cd.jacobian / cd.singular[n - 1].powi(n as i32);
        if o > ko.0 {
            ko = (o, c);
        }
        if i > ki.0 {
            ki = (i, c);
        }
    }
    if ko.0 == f64::NEG_INFINITY {
        return Err(Error::Mapping("every cell is excluded or has J_f ≤ 0".into()));
    }
    if !(ko.0.is_finite() && ki.0.is_finite()) {
        return Err(Error::Mapping("dilatation is unbounded (singular Df)".into()));
    }
    Ok((ko.0, ko.1, ki.0, ki.1))
}

/// `θ_f = J^{2/n} Df⁻¹ Df⁻ᵀ`.
pub fn theta_matrix(cd: &CellDifferential, n: usize) -> Result<Mat3> {
    let inv = linalg::inverse(&cd.df, n).ok_or_else(|| Error::Mapping("singular Df".into()))?;
    let t = linalg::scale(
        &linalg::matmul(&inv, &linalg::transpose(&inv, n), n),
        cd.jacobian.powf(2.0 / n as f64),
    );
    Ok(linalg::symmetrize(&t, n))
}

impl QrAnalysis {
    /// Analyses `mapping` on `d`. Cells whose center lies within `puncture`
    /// of the origin (default [`default_puncture`]) or with `J_f ≤ 0` are
    /// excluded from the dilatations and carry `θ = I`.
    pub fn new(mapping: &Mapping, d: &GridDomain, puncture: Option<f64>) -> Result<Self> {
        let n = d.dim();
        let puncture = puncture.unwrap_or_else(|| default_puncture(mapping, d));
        if !(puncture >= 0.0 && puncture.is_finite()) {
            return Err(Error::Mapping(format!("puncture radius must be ≥ 0, got {puncture}")));
        }
        let cells = differentiate(mapping, d)?;
        let mut nonpositive = Vec::new();
        let excluded: Vec<bool> = cells
            .iter()
            .enumerate()
            .map(|(c, cd)| {
                let bad = !(cd.jacobian > 0.0 && cd.df.iter().all(|x| x.is_finite()));
                if bad {
                    nonpositive.push(c);
                }
                bad || norm(&d.cell_center(c), n) < puncture
            })
            .collect();
        let excluded_measure = linalg::neumaier_sum(
            excluded.iter().enumerate().filter(|(_, &e)| e).map(|(c, _)| d.cell_measure(c)),
        );
        if !nonpositive.is_empty() {
            log::info!("{} cells with J_f ≤ 0 excluded", nonpositive.len());
        }
        let (k_outer, k_outer_cell, k_inner, k_inner_cell) = dilatations(&cells, &excluded, n)?;
        let alpha = k_outer.powf(-2.0 / n as f64);
        let beta = k_inner.powf(2.0 / n as f64);
        let mats = cells
            .par_iter()
            .zip(excluded.par_iter())
            .map(|(cd, &e)| if e { Ok(linalg::identity(n)) } else { theta_matrix(cd, n) })
            .collect::<Result<Vec<_>>>()?;
        let theta = CoefficientField::from_matrices(d, mats, alpha.min(1.0), beta.max(1.0))
            .map_err(|e| Error::Mapping(format!("ellipticity certification failed: {e}")))?;
        Ok(Self {
            dim: n,
            cells,
            excluded,
            nonpositive,
            puncture,
            excluded_measure,
            k_outer,
            k_inner,
            k_outer_cell,
            k_inner_cell,
            theta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[CellDifferential] {
        &self.cells
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn nonpositive_cells(&self) -> &[usize] {
        &self.nonpositive
    }

    pub fn puncture(&self) -> f64 {
        self.puncture
    }

    pub fn k_outer(&self) -> f64 {
        self.k_outer
    }

    pub fn k_inner(&self) -> f64 {
        self.k_inner
    }

    /// `K_O^{−2/n}`.
    pub fn alpha(&self) -> f64 {
        self.k_outer.powf(-2.0 / self.dim as f64)
    }

    /// `K_I^{2/n}`.
    pub fn beta(&self) -> f64 {
        self.k_inner.powf(2.0 / self.dim as f64)
    }

    pub fn theta(&self) -> &CoefficientField {
        &self.theta
    }

    /// `A(x, ξ)` with `G = θ_f` on `cell`.
    pub fn a_operator(&self, cell: usize, xi: &[f64], p: f64) -> [f64; 3] {
        a_operator(self.theta.matrix(cell), xi, p, self.dim)
    }

    pub fn summary(&self) -> QrSummary {
        let n = self.dim;
        let mut det_err = 0.0f64;
        let mut id_dev = 0.0f64;
        let mut svd_err = 0.0f64;
        let id = linalg::identity(n);
        for (c, cd) in self.cells.iter().enumerate() {
            if self.excluded[c] {
                continue;
            }
            let t = self.theta.matrix(c);
            det_err = det_err.max((linalg::det(t, n) - 1.0).abs());
            id_dev = id_dev.max(t.iter().zip(&id).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            let prod: f64 = cd.singular[..n].iter().product();
            svd_err = svd_err.max((cd.jacobian - prod).abs() / cd.jacobian.abs());
        }
        QrSummary {
            dim: n,
            cells: self.cells.len(),
            puncture: self.puncture,
            excluded_cells: self.excluded.iter().filter(|&&e| e).count(),
            nonpositive_cells: self.nonpositive.len(),
            excluded_measure: self.excluded_measure,
            k_outer: self.k_outer,
            k_inner: self.k_inner,
            k_outer_cell: self.k_outer_cell,
            k_inner_cell: self.k_inner_cell,
            alpha: self.alpha(),
            beta: self.beta(),
            max_det_theta_error: det_err,
            max_theta_identity_deviation: id_dev,
            max_jacobian_svd_error: svd_err,
        }
    }
}

/// `A(x, ξ) = (Gξ, ξ)^{(p−2)/2} Gξ`.
pub fn a_operator(g: &Mat3, xi: &[f64], p: f64, n: usize) -> [f64; 3] {
    let gx = linalg::matvec(g, xi, n);
    let q: f64 = (0..n).map(|i| gx[i] * xi[i]).sum();
    if q <= 0.0 {
        return [0.0; 3];
    }
    let w = q.powf(0.5 * (p - 2.0));
    [w * gx[0], w * gx[1], w * gx[2]]
}

/// Grid structure with `G = θ_f` and the p-form context with `p = n`.
pub fn induced_structure(analysis: &QrAnalysis, d: &GridDomain) -> Result<PFormContext> {
    let s = GridStructure::new(d.clone(), analysis.theta().clone())?;
    PFormContext::new(Arc::new(s), analysis.dim() as f64)
}

/// Interior nodes at distance at least `inner` from the origin whose
/// incident cells are all retained.
pub fn harmonicity_region(analysis: &QrAnalysis, ctx: &PFormContext, inner: f64) -> Vec<bool> {
    let s = ctx.structure();
    let d = s.domain();
    (0..d.node_count())
        .map(|j| {
            !d.is_boundary_node(j)
                && norm(&d.node_coords(j), d.dim()) >= inner
                && s.incident_cells(j).iter().all(|&(c, _)| !analysis.excluded()[c as usize])
        })
        .collect()
}

/// Normalised harmonicity residual of one function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentResidual {
    pub name: String,
    pub residual: f64,
    /// Largest `|value|` over the region, for relative floors.
    pub scale: f64,
}

/// Residuals of each component `f^i` and optionally `ln|f|` on `region`.
pub fn component_residuals(
    mapping: &Mapping,
    ctx: &PFormContext,
    region: &[bool],
    include_log: bool,
) -> Result<Vec<ComponentResidual>> {
    let s = ctx.structure();
    let d = s.domain();
    let n = d.dim();
    let comps = mapping.components(d)?;
    // Nodes whose values enter the region's coefficients.
    let mut needed = vec![false; d.node_count()];
    for (j, _) in region.iter().enumerate().filter(|(_, &r)| r) {
        for &(c, _) in s.incident_cells(j) {
            for &k in s.cell_corners(c as usize) {
                needed[k] = true;
            }
        }
    }
    let mut funcs: Vec<(String, Vec<f64>)> = comps
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("f{}", i + 1), v.clone()))
        .collect();
    if include_log {
        let log: Vec<f64> = (0..d.node_count())
            .map(|j| (0..n).map(|i| comps[i][j] * comps[i][j]).sum::<f64>().sqrt().ln())
            .collect();
        funcs.push(("ln|f|".into(), log));
    }
    let mut out = Vec::with_capacity(funcs.len());
    for (name, mut vals) in funcs {
        for (j, v) in vals.iter_mut().enumerate() {
            if !v.is_finite() {
                if needed[j] {
                    return Err(Error::Mapping(format!(
                        "{name} is not finite at node {j} (f vanishes or is singular there)"
                    )));
                }
                *v = 0.0;
            }
        }
        let scale = vals
            .iter()
            .zip(region)
            .filter(|(_, &r)| r)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        let residual = normalized_harmonicity_residual(&GridFunction::new(vals), region, ctx)?;
        out.push(ComponentResidual { name, residual, scale });
    }
    Ok(out)
}

/// Settings of the two-resolution harmonicity check.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicityOptions {
    pub puncture: Option<f64>,
    pub include_log: bool,
    /// Required observed order.
    pub min_order: f64,
    /// Residuals below `exact_floor · max(1, scale)` on both grids count as
    /// exact discrete harmonicity.
    pub exact_floor: f64,
    /// Width of the band kept clear of the puncture, in coarse spacings.
    pub margin_cells: f64,
}

impl Default for HarmonicityOptions {
    fn default() -> Self {
        Self {
            puncture: None,
            include_log: true,
            min_order: 1.0,
            exact_floor: 1e-9,
            margin_cells: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentRefinement {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    /// `ln(coarse/fine) / ln(h_coarse/h_fine)`; absent when exact.
    pub order: Option<f64>,
    pub exact: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicityReport {
    pub resolutions: [usize; 2],
    pub h: [f64; 2],
    pub puncture: f64,
    pub region_inner_radius: f64,
    pub components: Vec<ComponentRefinement>,
    pub passed: bool,
}

/// Checks that the components of an analytic mapping (and `ln|f|`) are
/// harmonic for the induced `L_n` up to a discretisation error that decays
/// at the requested order between two resolutions of `extent`.
pub fn verify_component_harmonicity(
    mapping: &Mapping,
    extent: &[[f64; 2]],
    resolutions: [usize; 2],
    opts: &HarmonicityOptions,
) -> Result<HarmonicityReport> {
    if !mapping.is_analytic() {
        return Err(Error::Mapping("refinement needs a mapping defined off the grid".into()));
    }
    if resolutions[0] >= resolutions[1] {
        return Err(Error::InvalidArgument("resolutions must increase".into()));
    }
    let n = extent.len();
    let domains = resolutions
        .iter()
        .map(|&r| GridDomain::new(extent, &vec![r; n]))
        .collect::<Result<Vec<_>>>()?;
    let puncture = opts.puncture.unwrap_or_else(|| default_puncture(mapping, &domains[0]));
    let inner = if puncture > 0.0 {
        puncture + opts.margin_cells * domains[0].h_max()
    } else {
        0.0
    };
    let mut per_grid = Vec::with_capacity(2);
    for d in &domains {
        let analysis = QrAnalysis::new(mapping, d, Some(puncture))?;
        let ctx = induced_structure(&analysis, d)?;
        let region = harmonicity_region(&analysis, &ctx, inner);
        per_grid.push(component_residuals(mapping, &ctx, &region, opts.include_log)?);
    }
    let h = [domains[0].h_max(), domains[1].h_max()];
    let components: Vec<ComponentRefinement> = per_grid[0]
        .iter()
        .zip(&per_grid[1])
        .map(|(c, f)| {
            let floor = opts.exact_floor * c.scale.max(f.scale).max(1.0);
            let exact = c.residual <= floor && f.residual <= floor;
            let order = (!exact).then(|| (c.residual / f.residual).ln() / (h[0] / h[1]).ln());
            let passed = exact || order.is_some_and(|o| o >= opts.min_order);
            ComponentRefinement {
                name: c.name.clone(),
                coarse: c.residual,
                fine: f.residual,
                order,
                exact,
                passed,
            }
        })
        .collect();
    let passed = components.iter().all(|c| c.passed);
    Ok(HarmonicityReport {
        resolutions,
        h,
        puncture,
        region_inner_radius: inner,
        components,
        passed,
    })
}
