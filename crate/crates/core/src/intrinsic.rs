//! Intrinsic metric of the form, cutoff and truncation functions, and the
//! Caccioppoli verifiers.
//!
//! `ρ(x, y)` is computed as a shortest path on a grid graph whose edges are
//! lattice displacements `e` with length `√(eᵀ (2G)⁻¹ e)`, `(2G)⁻¹` averaged
//! over the cells meeting the edge midpoint. The graph distance is an exact
//! metric; against the continuum Finsler distance it overestimates by at
//! most the stencil's metrication constant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridDomain, GridFunction, GridStructure};
use crate::linalg::{self, Mat3};
use crate::pform::PFormContext;
use crate::solver::harmonicity_residual;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Unit moves along axes and diagonals (8 neighbours in 2-D).
    Moore,
    /// Moore plus every primitive move with entries up to 2 (16 neighbours in 2-D).
    Knight,
}

impl Stencil {
    /// Lattice displacements of the stencil in dimension `dim`.
    pub fn offsets(self, dim: usize) -> Vec<[i64; 3]> {
        let reach: i64 = match self {
            Self::Moore => 1,
            Self::Knight => 2,
        };
        let mut out = Vec::new();
        let range = |d: usize, i: usize| if i < d { -reach..=reach } else { 0..=0 };
        for a in range(dim, 0) {
            for b in range(dim, 1) {
                for c in range(dim, 2) {
                    if (a, b, c) == (0, 0, 0) {
                        continue;
                    }
                    if gcd(gcd(a.unsigned_abs(), b.unsigned_abs()), c.unsigned_abs()) == 1 {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Worst relative overestimate of Euclidean length by the graph distance
    /// on the isotropic unit lattice (0 in one dimension).
    pub fn metrication(self, dim: usize) -> f64 {
        self.constants(dim).0
    }

    /// Worst relative excess of the cell gradient of the graph distance over
    /// the unit slope, on the isotropic lattice: per-cell
    /// `Γ(ρ) ≤ (1 + gradient_metrication)²` for scalar fields. Larger than
    /// [`Stencil::metrication`] for the knight stencil, where cells straddling
    /// two linear pieces of the lattice norm mix their gradients.
    pub fn gradient_metrication(self, dim: usize) -> f64 {
        self.constants(dim).1
    }

    fn constants(self, dim: usize) -> (f64, f64) {
        static CACHE: OnceLock<[[(f64, f64); 3]; 2]> = OnceLock::new();
        let table = CACHE.get_or_init(|| {
            let mut t = [[(0.0, 0.0); 3]; 2];
            for (si, s) in [Self::Moore, Self::Knight].into_iter().enumerate() {
                for d in 1..=3 {
                    t[si][d - 1] = s.measure(d);
                }
            }
            t
        });
        let si = match self {
            Self::Moore => 0,
            Self::Knight => 1,
        };
        table[si][dim - 1]
    }

    fn measure(self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (0.0, 0.0);
        }
        let radius = if dim == 2 { 40 } else { 12 };
        let n = 2 * radius + 1;
        let extent = [-(radius as f64), radius as f64];
        let d = GridDomain::new(&vec![extent; dim], &vec![n; dim]).expect("lattice");
        // (2G)⁻¹ = I makes edge lengths Euclidean and Γ(u) = |∇u|².
        let g = crate::grid::CoefficientField::scalar(&d, 0.5).expect("field");
        let s = GridStructure::new(d, g).expect("structure");
        let center = s.domain().nearest_node(&[0.0; 3][..dim]);
        let dist = shortest_paths(center, &s, self).expect("connected");
        let mut worst = 0.0f64;
        for j in 0..s.node_count() {
            let x = s.domain().node_coords(j);
            let e = x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
            if e > 0.0 && e <= radius as f64 {
                worst = worst.max(dist[j] / e - 1.0);
            }
        }
        let gamma = s.gamma(&GridFunction::new(dist)).expect("gamma");
        let steepest = gamma.into_iter().fold(0.0f64, f64::max);
        (worst, steepest.sqrt() - 1.0)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Distances `ρ(x₀, ·)` from one source node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricField {
    pub source: usize,
    pub stencil: Stencil,
    pub distances: Vec<f64>,
    /// Metrication constant of the stencil (isotropic worst case).
    pub metrication: f64,
    /// Gradient counterpart, see [`Stencil::gradient_metrication`].
    pub gradient_metrication: f64,
}

impl MetricField {
    pub fn to_function(&self) -> GridFunction {
        GridFunction::new(self.distances.clone())
    }

    /// `ρ` at cell centers, taken as the mean over the corners.
    pub fn cell_values(&self, s: &GridStructure) -> Vec<f64> {
        s.cell_average_values(&self.distances)
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by node index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Per-cell `(2G)⁻¹`.
fn inverse_tensors(s: &GridStructure) -> Result<Vec<Mat3>> {
    let n = s.dim();
    (0..s.cell_count())
        .map(|c| {
            let two_g = linalg::scale(s.field().matrix(c), 2.0);
            linalg::inverse(&two_g, n).ok_or_else(|| Error::InvalidField(format!("singular G at cell {c}")))
        })
        .collect()
}

/// Average of `(2G)⁻¹` over the cells meeting the midpoint of the edge from
/// node multi-index `a` along `e`.
fn edge_tensor(d: &GridDomain, inv: &[Mat3], a: &[usize; 3], e: &[i64; 3]) -> Mat3 {
    let dim = d.dim();
    // midpoint in doubled index units
    let mut choices: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let twice = 2 * a[i] as i64 + e[i];
        let cells = d.cell_shape()[i] as i64;
        let opts: Vec<i64> = if twice % 2 == 0 {
            vec![twice / 2 - 1, twice / 2]
        } else {
            vec![(twice - 1) / 2]
        };
        choices.push(opts.into_iter().filter(|&k| k >= 0 && k < cells).map(|k| k as usize).collect());
    }
    let mut acc = [0.0; 9];
    let mut count = 0.0;
    let mut idx = [0usize; 3];
    let total: usize = choices.iter().map(|c| c.len()).product();
    for t in 0..total {
        let mut rest = t;
        for i in 0..dim {
            let len = choices[i].len();
            idx[i] = choices[i][rest % len];
            rest /= len;
        }
        let c = d.cell_index(&idx[..dim]);
        for k in 0..9 {
            acc[k] += inv[c][k];
        }
        count += 1.0;
    }
    linalg::scale(&acc, 1.0 / count)
}

/// Shortest-path distances from node `x0` on the `stencil` graph.
pub fn intrinsic_distance(x0: usize, s: &GridStructure, stencil: Stencil) -> Result<MetricField> {
    Ok(MetricField {
        source: x0,
        stencil,
        distances: shortest_paths(x0, s, stencil)?,
        metrication: stencil.metrication(s.dim()),
        gradient_metrication: stencil.gradient_metrication(s.dim()),
    })
}

fn shortest_paths(x0: usize, s: &GridStructure, stencil: Stencil) -> Result<Vec<f64>> {
    let d = s.domain();
    let n = s.node_count();
    if x0 >= n {
        return Err(Error::InvalidArgument(format!("source node {x0} out of range")));
    }
    let dim = d.dim();
    let inv = inverse_tensors(s)?;
    let offsets = stencil.offsets(dim);
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[x0] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, x0));
    while let Some(Entry(dj, j)) = heap.pop() {
        if done[j] {
            continue;
        }
        done[j] = true;
        let a = d.node_multi(j);
        'moves: for e in &offsets {
            let mut b = [0usize; 3];
            for i in 0..dim {
                let t = a[i] as i64 + e[i];
                if t < 0 || t >= d.shape()[i] as i64 {
                    continue 'moves;
                }
                b[i] = t as usize;
            }
            let k = d.node_index(&b[..dim]);
            if done[k] {
                continue;
            }
            let mut v = [0.0; 3];
            for i in 0..dim {
                v[i] = e[i] as f64 * d.spacing()[i];
            }
            let m = edge_tensor(d, &inv, &a, e);
            let len = linalg::bilinear(&m, &v, &v, dim).sqrt();
            let cand = dj + len;
            if cand < dist[k] {
                dist[k] = cand;
                heap.push(Entry(cand, k));
            }
        }
    }
    if let Some(j) = dist.iter().position(|x| !x.is_finite()) {
        return Err(Error::Disconnected(j));
    }
    Ok(dist)
}

/// `(r − ρ(x₀, ·)) ∨ 0`.
pub fn cutoff_rho(x0: usize, r: f64, s: &GridStructure, stencil: Stencil) -> Result<GridFunction> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff radius must be positive, got {r}")));
    }
    let rho = intrinsic_distance(x0, s, stencil)?;
    Ok(GridFunction::new(rho.distances.iter().map(|d| (r - d).max(0.0)).collect()))
}

/// Largest per-cell `Γ(u)`.
pub fn max_cell_gamma(s: &GridStructure, u: &GridFunction) -> Result<f64> {
    Ok(s.gamma(u)?.into_iter().fold(0.0, f64::max))
}

/// `φ = ((R − ρ(x₀,·))₊ ∧ (R − r)) / (R − r)`: 1 on `B_r`, 0 off `B_R`.
pub fn truncation_function(x0: usize, r: f64, big_r: f64, s: &GridStructure, stencil: Stencil) -> Result<GridFunction> {
    let rho = intrinsic_distance(x0, s, stencil)?;
    truncation_from(&rho, r, big_r, s)
}

fn truncation_from(rho: &MetricField, r: f64, big_r: f64, s: &GridStructure) -> Result<GridFunction> {
    validate_radii(r, big_r, s)?;
    let d = s.domain();
    if let Some(j) = (0..d.node_count()).find(|&j| d.is_boundary_node(j) && rho.distances[j] < big_r) {
        return Err(Error::Precondition(format!(
            "ball of radius {big_r} reaches the domain boundary at node {j}"
        )));
    }
    let w = big_r - r;
    Ok(GridFunction::new(
        rho.distances
            .iter()
            .map(|d| (big_r - d).max(0.0).min(w) / w)
            .collect(),
    ))
}

/// Shortest edge of the metric graph: `R − r` below it cannot be resolved.
fn min_edge(s: &GridStructure) -> f64 {
    let (_, beta) = s.field().spectrum_bounds();
    s.domain()
        .spacing()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        / (2.0 * beta).sqrt()
}

fn validate_radii(r: f64, big_r: f64, s: &GridStructure) -> Result<()> {
    if !(r > 0.0 && big_r > r) {
        return Err(Error::Precondition(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let e = min_edge(s);
    if big_r - r < e {
        return Err(Error::Precondition(format!(
            "R − r = {} is below the shortest metric edge {e:.3e}",
            big_r - r
        )));
    }
    Ok(())
}

/// Euclidean bump: 1 on `|x − center| ≤ r`, 0 beyond `R`, linear in between
/// (slope `1/(R − r)`).
pub fn euclidean_bump(d: &GridDomain, center: &[f64], r: f64, big_r: f64) -> Result<GridFunction> {
    if center.len() != d.dim() {
        return Err(Error::InvalidArgument("center dimension mismatch".into()));
    }
    if !(r >= 0.0 && big_r > r) {
        return Err(Error::InvalidArgument(format!("need 0 ≤ r < R, got r = {r}, R = {big_r}")));
    }
    Ok(GridFunction::from_fn(d, |x| {
        let e = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        ((big_r - e) / (big_r - r)).clamp(0.0, 1.0)
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct CaccioppoliReport {
    pub kind: String,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant_used: f64,
    pub tolerance: f64,
    pub slack: f64,
    pub passed: bool,
    /// Harmonicity residual of `u` on the support of the test function.
    pub residual: f64,
    pub h: f64,
    pub c: f64,
    /// Cells in the inner / outer region (ball forms) or support (φ forms).
    pub inner_cells: usize,
    pub outer_cells: usize,
}

/// Tolerance and certification parameters of the Caccioppoli checks.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaccioppoliOptions {
    /// Largest admissible harmonicity residual of `u` on the support.
    pub certify_tol: f64,
    /// `C` in the `C·h·rhs` discretization allowance.
    pub h_constant: f64,
    pub stencil: Stencil,
}

impl Default for CaccioppoliOptions {
    fn default() -> Self {
        Self {
            certify_tol: 1e-8,
            h_constant: 1.0,
            stencil: Stencil::Knight,
        }
    }
}

/// Nodes carrying a test function supported where `weight > 0`, and the
/// residual of `u` there.
fn certify(u: &GridFunction, support: &[bool], ctx: &PFormContext, opts: &CaccioppoliOptions) -> Result<f64> {
    if !support.iter().any(|&s| s) {
        return Ok(0.0);
    }
    let res = harmonicity_residual(u, support, ctx)?;
    if res > opts.certify_tol {
        return Err(Error::Precondition(format!(
            "u is not certified harmonic on the support: residual {res:.3e} > {:.1e}",
            opts.certify_tol
        )));
    }
    Ok(res)
}

/// Weighted mean `∫ u w dm / ∫ w dm` with per-cell weights.
fn weighted_mean(s: &GridStructure, u: &GridFunction, w: &[f64]) -> Result<f64> {
    let avg = s.cell_average(u)?;
    let num: Vec<f64> = avg.iter().zip(w).map(|(a, b)| a * b).collect();
    let den = s.integrate(w);
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(s.integrate(&num) / den)
}

/// Pairing defect `(res · Σ_j |w_j|)^{1/p}` from a nonzero residual.
fn residual_term(res: f64, test: &[f64], p: f64) -> f64 {
    let l1: f64 = test.iter().map(|x| x.abs()).sum();
    (res * l1).powf(1.0 / p)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: &str,
    p: f64,
    lhs: f64,
    rhs: f64,
    constant: f64,
    tolerance: f64,
    residual: f64,
    s: &GridStructure,
    c: f64,
    inner: usize,
    outer: usize,
) -> CaccioppoliReport {
    let slack = rhs - lhs;
    CaccioppoliReport {
        kind: kind.to_string(),
        p,
        lhs,
        rhs,
        constant_used: constant,
        tolerance,
        slack,
        passed: slack >= -tolerance && slack.is_finite(),
        residual,
        h: s.domain().h_max(),
        c,
        inner_cells: inner,
        outer_cells: outer,
    }
}

/// `(∫ φ^p Γ(u)^{p/2})^{1/p} ≤ p (∫ Γ(φ)^{p/2} |u − c|^p)^{1/p}`.
///
/// `c = None` uses the `m`-weighted mean of `u` over the support of `φ`.
pub fn check_caccioppoli(
    u: &GridFunction,
    phi: &GridFunction,
    c: Option<f64>,
    ctx: &PFormContext,
    opts: &CaccioppoliOptions,
) -> Result<CaccioppoliReport> {
    let s = ctx.structure();
    s.check(u)?;
    s.check(phi)?;
    if phi.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition("φ must be nonnegative and finite".into()));
    }
    let p = ctx.p();
    let support: Vec<bool> = phi.values().iter().map(|v| *v > 0.0).collect();
    let residual = certify(u, &support, ctx, opts)?;
    let phi_bar = s.cell_average(phi)?;
    let support_cells: Vec<f64> = phi_bar.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
    let c = match c {
        Some(c) => c,
        None => weighted_mean(s, u, &support_cells)?,
    };
    let gu = s.gamma(u)?;
    let gphi = s.gamma(phi)?;
    let u_bar = s.cell_average(u)?;
    let left: Vec<f64> = phi_bar.iter().zip(&gu).map(|(f, g)| f.powf(p) * g.powf(0.5 * p)).collect();
    let right: Vec<f64> = gphi.iter().zip(&u_bar).map(|(g, a)| g.powf(0.5 * p) * (a - c).abs().powf(p)).collect();
    let lhs = s.integrate(&left).powf(1.0 / p);
    let rhs = p * s.integrate(&right).powf(1.0 / p);
    let test: Vec<f64> = phi.values().iter().zip(u.values()).map(|(f, v)| f.powf(p) * (v - c)).collect();
    let tol = opts.h_constant * s.domain().h_max() * rhs + residual_term(residual, &test, p) + 1e-12 * lhs.max(rhs);
    let inner = support_cells.iter().filter(|&&x| x > 0.0).count();
    Ok(finish("prop", p, lhs, rhs, p, tol, residual, s, c, inner, inner))
}

/// Ball form with intrinsic balls:
/// `(∫_{B_r} Γ(u)^{p/2})^{1/p} ≤ p/(R−r) · (∫_{B_R} |u − c|^p)^{1/p}`.
///
/// Balls are the cells whose center distance (mean over corners) is below
/// the radius. `c = None` uses the `m`-weighted mean of `u` over `B_R`.
#[allow(clippy::too_many_arguments)]
pub fn check_caccioppoli_ball(
    u: &GridFunction,
    x0: usize,
    r: f64,
    big_r: f64,
    c: Option<f64>,
    ctx: &PFormContext,
    opts: &CaccioppoliOptions,
) -> Result<CaccioppoliReport> {
    let s = ctx.structure();
    s.check(u)?;
    let rho = intrinsic_distance(x0, s, opts.stencil)?;
    let phi = truncation_from(&rho, r, big_r, s)?;
    let support: Vec<bool> = phi.values().iter().map(|v| *v > 0.0).collect();
    let residual = certify(u, &support, ctx, opts)?;
    let p = ctx.p();
    let centers = rho.cell_values(s);
    let in_r: Vec<f64> = centers.iter().map(|d| if *d < r { 1.0 } else { 0.0 }).collect();
    let in_big: Vec<f64> = centers.iter().map(|d| if *d < big_r { 1.0 } else { 0.0 }).collect();
    let c = match c {
        Some(c) => c,
        None => weighted_mean(s, u, &in_big)?,
    };
    let gu = s.gamma(u)?;
    let u_bar = s.cell_average(u)?;
    let left: Vec<f64> = gu.iter().zip(&in_r).map(|(g, w)| w * g.powf(0.5 * p)).collect();
    let right: Vec<f64> = u_bar.iter().zip(&in_big).map(|(a, w)| w * (a - c).abs().powf(p)).collect();
    let constant = p / (big_r - r);
    let lhs = s.integrate(&left).powf(1.0 / p);
    let rhs = constant * s.integrate(&right).powf(1.0 / p);
    let test: Vec<f64> = phi.values().iter().zip(u.values()).map(|(f, v)| f.powf(p) * (v - c)).collect();
    // The truncation function's slope exceeds 1/(R−r) by the metrication factor.
    let tol = (opts.h_constant * s.domain().h_max() + rho.gradient_metrication) * rhs
        + residual_term(residual, &test, p)
        + 1e-12 * lhs.max(rhs);
    let count = |w: &[f64]| w.iter().filter(|&&x| x > 0.0).count();
    Ok(finish("ball", p, lhs, rhs, constant, tol, residual, s, c, count(&in_r), count(&in_big)))
}

/// Euclidean form `(∫ φ^p |∇u|^p)^{1/p} ≤ p √(β/α) (∫ |∇φ|^p |u − c|^p)^{1/p}`
/// for a field with spectrum in `[α, β]`.
#[allow(clippy::too_many_arguments)]
pub fn check_caccioppoli_euclidean(
    u: &GridFunction,
    phi: &GridFunction,
    c: Option<f64>,
    alpha: f64,
    beta: f64,
    ctx: &PFormContext,
    opts: &CaccioppoliOptions,
) -> Result<CaccioppoliReport> {
    let s = ctx.structure();
    s.check(u)?;
    s.check(phi)?;
    if !(alpha > 0.0 && beta >= alpha) {
        return Err(Error::InvalidArgument(format!("need 0 < α ≤ β, got α = {alpha}, β = {beta}")));
    }
    let (lo, hi) = s.field().spectrum_bounds();
    if lo < alpha * (1.0 - 1e-10) || hi > beta * (1.0 + 1e-10) {
        return Err(Error::Precondition(format!(
            "field spectrum [{lo}, {hi}] is not inside [{alpha}, {beta}]"
        )));
    }
    if phi.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition("φ must be nonnegative and finite".into()));
    }
    let p = ctx.p();
    let support: Vec<bool> = phi.values().iter().map(|v| *v > 0.0).collect();
    let residual = certify(u, &support, ctx, opts)?;
    let phi_bar = s.cell_average(phi)?;
    let support_cells: Vec<f64> = phi_bar.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
    let c = match c {
        Some(c) => c,
        None => weighted_mean(s, u, &support_cells)?,
    };
    let grad_u = s.gradient(u)?;
    let grad_phi = s.gradient(phi)?;
    let u_bar = s.cell_average(u)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let left: Vec<f64> = (0..s.cell_count())
        .map(|k| phi_bar[k].powf(p) * norm(grad_u.cell(k)).powf(p))
        .collect();
    let right: Vec<f64> = (0..s.cell_count())
        .map(|k| norm(grad_phi.cell(k)).powf(p) * (u_bar[k] - c).abs().powf(p))
        .collect();
    let constant = p * (beta / alpha).sqrt();
    let lhs = s.integrate(&left).powf(1.0 / p);
    let rhs = constant * s.integrate(&right).powf(1.0 / p);
    let test: Vec<f64> = phi.values().iter().zip(u.values()).map(|(f, v)| f.powf(p) * (v - c)).collect();
    let tol = opts.h_constant * s.domain().h_max() * rhs
        + residual_term(residual, &test, p) / alpha.sqrt()
        + 1e-12 * lhs.max(rhs);
    let inner = support_cells.iter().filter(|&&x| x > 0.0).count();
    Ok(finish("euclidean", p, lhs, rhs, constant, tol, residual, s, c, inner, inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CoefficientField;
    use std::sync::Arc;

    fn unit2(n: usize) -> GridStructure {
        GridStructure::identity(GridDomain::unit(2, n).unwrap())
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(Stencil::Moore.offsets(2).len(), 8);
        assert_eq!(Stencil::Knight.offsets(2).len(), 16);
        assert_eq!(Stencil::Moore.offsets(1).len(), 2);
        assert_eq!(Stencil::Moore.offsets(3).len(), 26);
    }

    #[test]
    fn metrication_constants() {
        let m8 = Stencil::Moore.metrication(2);
        let m16 = Stencil::Knight.metrication(2);
        assert!((m8 - 0.0824).abs() < 2e-3, "{m8}");
        assert!(m16 < 0.028 && m16 < m8, "{m16}");
        assert_eq!(Stencil::Knight.metrication(1), 0.0);
        let g8 = Stencil::Moore.gradient_metrication(2);
        let g16 = Stencil::Knight.gradient_metrication(2);
        // The cone-face gradient attains the supremum exactly; the lattice
        // sample of the distance only approaches it.
        assert!((g8 - ((4.0 - 2.0 * 2f64.sqrt()).sqrt() - 1.0)).abs() < 1e-12, "{g8}");
        assert!(g8 >= m8 && g8 - m8 < 1e-3, "{g8} vs {m8}");
        assert!(g16 > m16 && g16 < g8, "{g16}");
    }

    #[test]
    fn one_dimensional_distance_is_exact() {
        let s = GridStructure::identity(GridDomain::unit(1, 11).unwrap());
        let f = intrinsic_distance(3, &s, Stencil::Knight).unwrap();
        for (j, d) in f.distances.iter().enumerate() {
            let exact = (j as f64 - 3.0).abs() * 0.1 / 2f64.sqrt();
            assert!((d - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn scaling_the_field_scales_distances() {
        let d = GridDomain::unit(2, 9).unwrap();
        let s1 = GridStructure::identity(d.clone());
        let s4 = GridStructure::new(d.clone(), CoefficientField::scalar(&d, 4.0).unwrap()).unwrap();
        let a = intrinsic_distance(40, &s1, Stencil::Knight).unwrap();
        let b = intrinsic_distance(40, &s4, Stencil::Knight).unwrap();
        for (x, y) in a.distances.iter().zip(&b.distances) {
            assert!((y - 0.5 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_examples() {
        let s = unit2(11);
        let x0 = s.domain().nearest_node(&[0.5, 0.5]);
        let u = cutoff_rho(x0, 0.3, &s, Stencil::Knight).unwrap();
        assert!((u.values()[x0] - 0.3).abs() < 1e-15);
        let tiny = cutoff_rho(x0, 0.01, &s, Stencil::Knight).unwrap();
        assert_eq!(tiny.values().iter().filter(|v| **v > 0.0).count(), 1);
        assert!(cutoff_rho(x0, 0.0, &s, Stencil::Knight).is_err());
    }

    #[test]
    fn truncation_guards() {
        let s = unit2(21);
        let x0 = s.domain().nearest_node(&[0.5, 0.5]);
        assert!(truncation_function(x0, 0.3, 0.3, &s, Stencil::Knight).is_err());
        assert!(truncation_function(x0, 0.299, 0.3, &s, Stencil::Knight).is_err());
        assert!(truncation_function(x0, 0.2, 0.9, &s, Stencil::Knight).is_err());
        let phi = truncation_function(x0, 0.15, 0.3, &s, Stencil::Knight).unwrap();
        let rho = intrinsic_distance(x0, &s, Stencil::Knight).unwrap();
        for (f, d) in phi.values().iter().zip(&rho.distances) {
            assert!((0.0..=1.0).contains(f));
            if *d <= 0.15 {
                assert_eq!(*f, 1.0);
            }
            if *d >= 0.3 {
                assert_eq!(*f, 0.0);
            }
        }
    }

    #[test]
    fn constant_function_has_zero_left_side() {
        let s = Arc::new(unit2(21));
        let ctx = PFormContext::new(s.clone(), 2.0).unwrap();
        let x0 = s.domain().nearest_node(&[0.5, 0.5]);
        let u = GridFunction::constant(s.domain(), 0.7);
        let opts = CaccioppoliOptions::default();
        let r = check_caccioppoli_ball(&u, x0, 0.1, 0.25, None, &ctx, &opts).unwrap();
        assert!(r.passed && r.lhs == 0.0);
        let phi = truncation_function(x0, 0.1, 0.25, &s, Stencil::Knight).unwrap();
        let r = check_caccioppoli(&u, &phi, Some(0.7), &ctx, &opts).unwrap();
        assert!(r.passed && r.lhs == 0.0 && r.rhs == 0.0);
    }

    #[test]
    fn uncertified_input_is_rejected() {
        let s = Arc::new(unit2(21));
        let ctx = PFormContext::new(s.clone(), 2.0).unwrap();
        let u = GridFunction::from_fn(s.domain(), |x| x[0] * x[0]);
        let phi = euclidean_bump(s.domain(), &[0.5, 0.5], 0.1, 0.3).unwrap();
        assert!(matches!(
            check_caccioppoli(&u, &phi, None, &ctx, &CaccioppoliOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn euclidean_constant_reduces_to_p() {
        let d = GridDomain::unit(2, 21).unwrap();
        let s = Arc::new(GridStructure::new(d.clone(), CoefficientField::scalar(&d, 3.0).unwrap()).unwrap());
        let ctx = PFormContext::new(s, 3.0).unwrap();
        let u = GridFunction::from_fn(&d, |x| 2.0 * x[0] - x[1]);
        let phi = euclidean_bump(&d, &[0.5, 0.5], 0.1, 0.3).unwrap();
        let r = check_caccioppoli_euclidean(&u, &phi, None, 3.0, 3.0, &ctx, &CaccioppoliOptions::default()).unwrap();
        assert_eq!(r.constant_used, 3.0);
        assert!(r.passed);
    }
}
