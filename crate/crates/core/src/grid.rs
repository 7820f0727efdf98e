//! Rectangular grids in one to three dimensions, the per-cell coefficient
//! field, the cell-based carré du champ and the function algebra on nodal
//! values.
//!
//! Functions live on nodes; gradients live on cells. The gradient of `u` on
//! a cell is the average of the forward differences along the cell's edges
//! in each axis direction, which makes it exact for affine functions and
//! linear in `u`. Cells are the integration atoms: every integral is a sum
//! over cells weighted by the cell measure `m(c) = density(c) · volume`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, Mat3};

pub type Point = [f64; 3];

/// Cell counts above which per-cell loops are spread over the thread pool.
const PAR_THRESHOLD: usize = 4096;

/// A tensor-product grid on a box `Π [a_i, b_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    dim: usize,
    extent: Vec<[f64; 2]>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    density: Vec<f64>,
    node_strides: Vec<usize>,
    cell_shape: Vec<usize>,
    cell_strides: Vec<usize>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl GridDomain {
    pub fn new(extent: &[[f64; 2]], shape: &[usize]) -> Result<Self> {
        let dim = extent.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if shape.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "extent has {dim} axes but shape has {}",
                shape.len()
            )));
        }
        let mut spacing = Vec::with_capacity(dim);
        for (axis, (&[a, b], &nodes)) in extent.iter().zip(shape).enumerate() {
            if nodes < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least 2 nodes, got {nodes}"
                )));
            }
            let h = (b - a) / (nodes - 1) as f64;
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has non-positive spacing for [{a}, {b}]"
                )));
            }
            spacing.push(h);
        }
        let cell_shape: Vec<usize> = shape.iter().map(|n| n - 1).collect();
        let cells = cell_shape.iter().product();
        Ok(Self {
            dim,
            extent: extent.to_vec(),
            shape: shape.to_vec(),
            spacing,
            density: vec![1.0; cells],
            node_strides: strides(shape),
            cell_strides: strides(&cell_shape),
            cell_shape,
        })
    }

    /// `[0, 1]^dim` with `nodes` nodes per axis.
    pub fn unit(dim: usize, nodes: usize) -> Result<Self> {
        Self::new(&vec![[0.0, 1.0]; dim], &vec![nodes; dim])
    }

    /// Replaces the per-cell density of the measure.
    pub fn with_density(mut self, density: Vec<f64>) -> Result<Self> {
        if density.len() != self.cell_count() {
            return Err(Error::ShapeMismatch {
                expected: self.cell_count(),
                found: density.len(),
            });
        }
        if let Some(c) = density.iter().position(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "density must be positive and finite, cell {c} has {}",
                density[c]
            )));
        }
        self.density = density;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn extent(&self) -> &[[f64; 2]] {
        &self.extent
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn h_max(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_shape.iter().product()
    }

    pub fn corners_per_cell(&self) -> usize {
        1 << self.dim
    }

    pub fn node_multi(&self, idx: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut rest = idx;
        for i in 0..self.dim {
            m[i] = rest / self.node_strides[i];
            rest %= self.node_strides[i];
        }
        m
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        (0..self.dim).map(|i| multi[i] * self.node_strides[i]).sum()
    }

    pub fn node_strides(&self) -> &[usize] {
        &self.node_strides
    }

    pub fn node_coords(&self, idx: usize) -> Point {
        let m = self.node_multi(idx);
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = self.extent[i][0] + m[i] as f64 * self.spacing[i];
        }
        x
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut m = [0usize; 3];
        for i in 0..self.dim {
            let t = ((x[i] - self.extent[i][0]) / self.spacing[i]).round();
            m[i] = t.clamp(0.0, (self.shape[i] - 1) as f64) as usize;
        }
        self.node_index(&m)
    }

    pub fn cell_multi(&self, c: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut rest = c;
        for i in 0..self.dim {
            m[i] = rest / self.cell_strides[i];
            rest %= self.cell_strides[i];
        }
        m
    }

    pub fn cell_index(&self, multi: &[usize]) -> usize {
        (0..self.dim).map(|i| multi[i] * self.cell_strides[i]).sum()
    }

    pub fn cell_shape(&self) -> &[usize] {
        &self.cell_shape
    }

    pub fn cell_center(&self, c: usize) -> Point {
        let m = self.cell_multi(c);
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = self.extent[i][0] + (m[i] as f64 + 0.5) * self.spacing[i];
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.density[c] * self.cell_volume()
    }

    pub fn total_measure(&self) -> f64 {
        linalg::neumaier_sum((0..self.cell_count()).map(|c| self.cell_measure(c)))
    }

    /// Node index of corner `k` of cell `c`; bit `i` of `k` selects the
    /// upper end along axis `i`.
    pub fn corner(&self, c: usize, k: usize) -> usize {
        let m = self.cell_multi(c);
        (0..self.dim)
            .map(|i| (m[i] + ((k >> i) & 1)) * self.node_strides[i])
            .sum()
    }

    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let m = self.node_multi(idx);
        (0..self.dim).any(|i| m[i] == 0 || m[i] == self.shape[i] - 1)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count())
            .map(|i| self.is_boundary_node(i))
            .collect()
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.extent
            .iter()
            .map(|[a, b]| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-cell symmetric matrix field `G` with validated ellipticity bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    matrices: Vec<Mat3>,
    alpha: f64,
    beta: f64,
}

impl CoefficientField {
    pub fn identity(domain: &GridDomain) -> Self {
        Self::scalar(domain, 1.0).expect("identity field is elliptic")
    }

    pub fn scalar(domain: &GridDomain, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidField(format!(
                "scalar coefficient must be positive, got {value}"
            )));
        }
        let g = linalg::scale(&linalg::identity(domain.dim()), value);
        Ok(Self {
            dim: domain.dim(),
            matrices: vec![g; domain.cell_count()],
            alpha: value,
            beta: value,
        })
    }

    /// Validates symmetry and that every cell's spectrum lies in `[alpha, beta]`.
    pub fn from_matrices(
        domain: &GridDomain,
        matrices: Vec<Mat3>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let n = domain.dim();
        if matrices.len() != domain.cell_count() {
            return Err(Error::ShapeMismatch {
                expected: domain.cell_count(),
                found: matrices.len(),
            });
        }
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::InvalidField(format!(
                "need 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        for (c, g) in matrices.iter().enumerate() {
            let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            if g.iter().any(|x| !x.is_finite()) || linalg::asymmetry(g, n) > 1e-12 * scale {
                return Err(Error::InvalidField(format!(
                    "matrix of cell {c} is not symmetric"
                )));
            }
            let ev = linalg::sym_eigenvalues(g, n);
            let tol = 1e-10 * beta;
            if ev[0] < alpha - tol || ev[n - 1] > beta + tol {
                return Err(Error::InvalidField(format!(
                    "cell {c} has eigenvalues [{}, {}] outside [{alpha}, {beta}]",
                    ev[0],
                    ev[n - 1]
                )));
            }
        }
        let matrices = matrices.iter().map(|g| linalg::symmetrize(g, n)).collect();
        Ok(Self {
            dim: n,
            matrices,
            alpha,
            beta,
        })
    }

    /// Random rotations of random diagonal matrices with spectrum in `[alpha, beta]`.
    pub fn random_elliptic<R: Rng>(
        domain: &GridDomain,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = domain.dim();
        let matrices = (0..domain.cell_count())
            .map(|_| {
                let mut d = [0.0; 9];
                for i in 0..n {
                    d[i * 3 + i] = rng.gen_range(alpha..=beta);
                }
                let q = random_rotation(n, rng);
                linalg::symmetrize(
                    &linalg::matmul(&linalg::matmul(&q, &d, n), &linalg::transpose(&q, n), n),
                    n,
                )
            })
            .collect();
        Self::from_matrices(domain, matrices, alpha, beta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, c: usize) -> &Mat3 {
        &self.matrices[c]
    }

    pub fn matrices(&self) -> &[Mat3] {
        &self.matrices
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `t · G` with bounds scaled accordingly.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidField(format!("scale must be positive, got {t}")));
        }
        Ok(Self {
            dim: self.dim,
            matrices: self.matrices.iter().map(|g| linalg::scale(g, t)).collect(),
            alpha: self.alpha * t,
            beta: self.beta * t,
        })
    }

    /// Smallest and largest eigenvalue over all cells.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        self.matrices.iter().fold((f64::INFINITY, 0.0), |(lo, hi), g| {
            let ev = linalg::sym_eigenvalues(g, self.dim);
            (lo.min(ev[0]), hi.max(ev[self.dim - 1]))
        })
    }
}

fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> Mat3 {
    // Gram–Schmidt on a random matrix.
    let mut cols: Vec<[f64; 3]> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = [0.0; 3];
        for x in v.iter_mut().take(n) {
            *x = rng.gen_range(-1.0..1.0);
        }
        for c in &cols {
            let d: f64 = (0..n).map(|i| v[i] * c[i]).sum();
            for i in 0..n {
                v[i] -= d * c[i];
            }
        }
        let norm = (0..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if norm > 1e-3 {
            for x in v.iter_mut().take(n) {
                *x /= norm;
            }
            cols.push(v);
        }
    }
    let mut q = [0.0; 9];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[i * 3 + j] = c[i];
        }
    }
    q
}

/// Nodal values with a Dirichlet mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    mask: Vec<bool>,
}

/// Serialized form of a grid function: row-major nodal values.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionDoc {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        let mask = vec![false; values.len()];
        Self { values, mask }
    }

    pub fn zeros(nodes: usize) -> Self {
        Self::new(vec![0.0; nodes])
    }

    pub fn constant(domain: &GridDomain, value: f64) -> Self {
        Self::new(vec![value; domain.node_count()])
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(domain: &GridDomain, f: F) -> Self {
        Self::new(
            (0..domain.node_count())
                .map(|i| f(&domain.node_coords(i)[..domain.dim()]))
                .collect(),
        )
    }

    pub fn from_doc(domain: &GridDomain, doc: &GridFunctionDoc) -> Result<Self> {
        if doc.shape != domain.shape() {
            return Err(Error::InvalidArgument(format!(
                "grid function shape {:?} does not match domain shape {:?}",
                doc.shape,
                domain.shape()
            )));
        }
        check_len(domain.node_count(), doc.values.len())?;
        Ok(Self::new(doc.values.clone()))
    }

    pub fn to_doc(&self, domain: &GridDomain) -> GridFunctionDoc {
        GridFunctionDoc {
            shape: domain.shape().to_vec(),
            values: self.values.clone(),
        }
    }

    /// Pins the nodes in `mask`; their values must be finite.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        check_len(self.values.len(), mask.len())?;
        if let Some(i) = (0..mask.len()).find(|&i| mask[i] && !self.values[i].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "masked node {i} carries non-finite value {}",
                self.values[i]
            )));
        }
        self.mask = mask;
        Ok(self)
    }

    pub fn with_boundary_mask(self, domain: &GridDomain) -> Result<Self> {
        self.with_mask(domain.boundary_mask())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn free(&self) -> Vec<bool> {
        self.mask.iter().map(|m| !m).collect()
    }

    pub fn has_mask(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            values: self.values.iter().map(|&x| f(x)).collect(),
            mask: self.mask.clone(),
        }
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, t: f64) -> Self {
        self.map(|x| t * x)
    }

    /// `self + t · other`
    pub fn axpy(&self, t: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + t * b)
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    /// Nodewise `u ∧ v`.
    pub fn min(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, f64::min)
    }

    /// Nodewise `u ∨ v`.
    pub fn max(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, f64::max)
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `u⁺ = u ∨ 0`
    pub fn positive_part(&self) -> Self {
        self.map(|x| x.max(0.0))
    }

    /// `u ∧ 0`
    pub fn negative_part(&self) -> Self {
        self.map(|x| x.min(0.0))
    }

    /// `u⁺ ∧ 1`
    pub fn unit_truncation(&self) -> Self {
        self.map(|x| x.clamp(0.0, 1.0))
    }

    /// `((−n) ∨ u) ∧ n`
    pub fn truncate(&self, n: f64) -> Self {
        self.map(|x| x.max(-n).min(n))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::norm_inf(&self.values)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::ShapeMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Per-cell gradient samples, `dim` components per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCovector {
    dim: usize,
    data: Vec<f64>,
}

impl CellCovector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Sparsity pattern shared by all nodal operators, plus the map from each
/// cell's local `(corner, corner)` pair to its slot in the value array.
#[derive(Debug)]
struct OperatorPattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    cell_slots: Vec<usize>,
}

/// A grid, its coefficient field and the precomputed discrete calculus:
/// the discrete stand-in for a Dirichlet form with carré du champ
/// `Γ(u,v) = 2 (G ∇u, ∇v)` on the measure space.
#[derive(Debug)]
pub struct GridStructure {
    domain: GridDomain,
    field: CoefficientField,
    /// `weights[k][i]`: coefficient of corner `k` in gradient component `i`.
    weights: Vec<[f64; 3]>,
    corners: Vec<usize>,
    incident_offsets: Vec<usize>,
    incident: Vec<(u32, u8)>,
    pattern: OnceLock<OperatorPattern>,
}

impl Clone for GridStructure {
    fn clone(&self) -> Self {
        Self::build(self.domain.clone(), self.field.clone())
    }
}

impl GridStructure {
    pub fn new(domain: GridDomain, field: CoefficientField) -> Result<Self> {
        if field.dim() != domain.dim() || field.len() != domain.cell_count() {
            return Err(Error::InvalidField(format!(
                "field has {} cells of dimension {}, domain has {} cells of dimension {}",
                field.len(),
                field.dim(),
                domain.cell_count(),
                domain.dim()
            )));
        }
        Ok(Self::build(domain, field))
    }

    /// Structure with `G = I`.
    pub fn identity(domain: GridDomain) -> Self {
        let field = CoefficientField::identity(&domain);
        Self::build(domain, field)
    }

    fn build(domain: GridDomain, field: CoefficientField) -> Self {
        let n = domain.dim();
        let nc = domain.corners_per_cell();
        let half = (nc / 2) as f64;
        let weights = (0..nc)
            .map(|k| {
                let mut w = [0.0; 3];
                for i in 0..n {
                    let sign = if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
                    w[i] = sign / (domain.spacing()[i] * half);
                }
                w
            })
            .collect();
        let cells = domain.cell_count();
        let corners: Vec<usize> = (0..cells)
            .flat_map(|c| (0..nc).map(move |k| (c, k)))
            .map(|(c, k)| domain.corner(c, k))
            .collect();
        let nodes = domain.node_count();
        let mut counts = vec![0usize; nodes + 1];
        for &node in &corners {
            counts[node + 1] += 1;
        }
        for i in 0..nodes {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut incident = vec![(0u32, 0u8); corners.len()];
        for c in 0..cells {
            for k in 0..nc {
                let node = corners[c * nc + k];
                incident[fill[node]] = (c as u32, k as u8);
                fill[node] += 1;
            }
        }
        Self {
            domain,
            field,
            weights,
            corners,
            incident_offsets: counts,
            incident,
            pattern: OnceLock::new(),
        }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn node_count(&self) -> usize {
        self.domain.node_count()
    }

    pub fn cell_count(&self) -> usize {
        self.domain.cell_count()
    }

    pub fn cell_corners(&self, c: usize) -> &[usize] {
        let nc = self.domain.corners_per_cell();
        &self.corners[c * nc..(c + 1) * nc]
    }

    /// Gradient weights: `weights()[k][i]` multiplies corner `k` in component `i`.
    pub fn gradient_weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    /// `(cell, local corner)` pairs touching `node`.
    pub fn incident_cells(&self, node: usize) -> &[(u32, u8)] {
        &self.incident[self.incident_offsets[node]..self.incident_offsets[node + 1]]
    }

    pub fn check(&self, u: &GridFunction) -> Result<()> {
        check_len(self.node_count(), u.len())
    }

    #[inline]
    pub(crate) fn cell_gradient(&self, values: &[f64], c: usize) -> [f64; 3] {
        let n = self.dim();
        let mut g = [0.0; 3];
        for (k, &node) in self.cell_corners(c).iter().enumerate() {
            let v = values[node];
            let w = &self.weights[k];
            for i in 0..n {
                g[i] += w[i] * v;
            }
        }
        g
    }

    /// `Γ(u,v)(c) = 2 (G(c) g_u, g_v)` from cell gradients.
    #[inline]
    pub(crate) fn gamma_of(&self, c: usize, gu: &[f64; 3], gv: &[f64; 3]) -> f64 {
        2.0 * linalg::bilinear(self.field.matrix(c), gu, gv, self.dim())
    }

    /// Maps `f` over cells, in parallel for large grids; output order is cell order.
    pub(crate) fn per_cell<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let cells = self.cell_count();
        if cells >= PAR_THRESHOLD {
            (0..cells).into_par_iter().map(f).collect()
        } else {
            (0..cells).map(f).collect()
        }
    }

    /// Same as [`per_cell`](Self::per_cell) but over nodes.
    pub(crate) fn per_node<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let nodes = self.node_count();
        if nodes >= PAR_THRESHOLD {
            (0..nodes).into_par_iter().map(f).collect()
        } else {
            (0..nodes).map(f).collect()
        }
    }

    pub fn gradient(&self, u: &GridFunction) -> Result<CellCovector> {
        self.check(u)?;
        let n = self.dim();
        let grads = self.per_cell(|c| self.cell_gradient(u.values(), c));
        let data = grads.iter().flat_map(|g| g[..n].to_vec()).collect();
        Ok(CellCovector { dim: n, data })
    }

    pub fn carre_du_champ(&self, u: &GridFunction, v: &GridFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.per_cell(|c| {
            let gu = self.cell_gradient(u.values(), c);
            let gv = self.cell_gradient(v.values(), c);
            self.gamma_of(c, &gu, &gv)
        }))
    }

    /// `Γ(u) = Γ(u,u)` per cell.
    pub fn gamma(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.gamma_values(u.values()))
    }

    pub(crate) fn gamma_values(&self, values: &[f64]) -> Vec<f64> {
        self.per_cell(|c| {
            let g = self.cell_gradient(values, c);
            self.gamma_of(c, &g, &g).max(0.0)
        })
    }

    /// `Σ_c f(c) m(c)` with compensated summation in cell order.
    pub fn integrate(&self, per_cell: &[f64]) -> f64 {
        linalg::neumaier_sum(
            per_cell
                .iter()
                .enumerate()
                .map(|(c, v)| v * self.domain.cell_measure(c)),
        )
    }

    /// `E(u,v) = ½ Σ_c Γ(u,v)(c) m(c)`.
    pub fn energy(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let g = self.carre_du_champ(u, v)?;
        Ok(0.5 * self.integrate(&g))
    }

    /// Arithmetic mean of the corner values of each cell.
    pub fn cell_average(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.cell_average_values(u.values()))
    }

    pub(crate) fn cell_average_values(&self, values: &[f64]) -> Vec<f64> {
        let nc = self.domain.corners_per_cell() as f64;
        self.per_cell(|c| self.cell_corners(c).iter().map(|&i| values[i]).sum::<f64>() / nc)
    }

    /// `(Σ |ū|^p m + Σ Γ(u)^{p/2} m)^{1/p}`.
    pub fn dp_norm(&self, u: &GridFunction, p: f64) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("need p > 1, got {p}")));
        }
        let avg = self.cell_average(u)?;
        let gam = self.gamma(u)?;
        let lp: Vec<f64> = avg.iter().map(|a| a.abs().powf(p)).collect();
        let gp: Vec<f64> = gam.iter().map(|g| g.powf(0.5 * p)).collect();
        Ok((self.integrate(&lp) + self.integrate(&gp)).powf(1.0 / p))
    }

    /// Lumped nodal measure: each cell's measure split evenly among its corners.
    pub fn node_measure(&self) -> Vec<f64> {
        let nc = self.domain.corners_per_cell() as f64;
        self.per_node(|j| {
            self.incident_cells(j)
                .iter()
                .map(|&(c, _)| self.domain.cell_measure(c as usize) / nc)
                .sum()
        })
    }

    /// Gathers per-cell fluxes `q_c` (one `dim`-vector per cell) into nodal
    /// coefficients `Σ_{c ∋ j} Σ_i B[k][i] q_c[i]`, the adjoint of the gradient.
    pub(crate) fn gather_fluxes(&self, fluxes: &[[f64; 3]]) -> Vec<f64> {
        let n = self.dim();
        self.per_node(|j| {
            let mut s = 0.0;
            for &(c, k) in self.incident_cells(j) {
                let w = &self.weights[k as usize];
                let q = &fluxes[c as usize];
                for i in 0..n {
                    s += w[i] * q[i];
                }
            }
            s
        })
    }

    fn pattern(&self) -> &OperatorPattern {
        self.pattern.get_or_init(|| {
            let nodes = self.node_count();
            let nc = self.domain.corners_per_cell();
            let mut row_ptr = Vec::with_capacity(nodes + 1);
            let mut col_idx = Vec::new();
            row_ptr.push(0);
            for j in 0..nodes {
                let mut cols: Vec<usize> = self
                    .incident_cells(j)
                    .iter()
                    .flat_map(|&(c, _)| self.cell_corners(c as usize).iter().copied())
                    .collect();
                cols.sort_unstable();
                cols.dedup();
                col_idx.extend(cols);
                row_ptr.push(col_idx.len());
            }
            let probe = CsrMatrix::with_pattern(nodes, row_ptr, col_idx);
            let mut cell_slots = Vec::with_capacity(self.cell_count() * nc * nc);
            for c in 0..self.cell_count() {
                let corners = self.cell_corners(c);
                for &a in corners {
                    for &b in corners {
                        cell_slots.push(probe.position(a, b).expect("pattern covers cell"));
                    }
                }
            }
            OperatorPattern {
                row_ptr: probe.row_ptr,
                col_idx: probe.col_idx,
                cell_slots,
            }
        })
    }

    /// Assembles `Σ_c Bᵀ H_c B` from per-cell `dim × dim` blocks `H_c`.
    pub(crate) fn assemble(&self, blocks: &[Mat3]) -> CsrMatrix {
        let pat = self.pattern();
        let n = self.dim();
        let nc = self.domain.corners_per_cell();
        let mut a = CsrMatrix::with_pattern(
            self.node_count(),
            pat.row_ptr.clone(),
            pat.col_idx.clone(),
        );
        for (c, h) in blocks.iter().enumerate() {
            let slots = &pat.cell_slots[c * nc * nc..(c + 1) * nc * nc];
            for ka in 0..nc {
                let hb = linalg::matvec(h, &self.weights[ka], n);
                for kb in 0..nc {
                    let wb = &self.weights[kb];
                    let v: f64 = (0..n).map(|i| hb[i] * wb[i]).sum();
                    a.values[slots[ka * nc + kb]] += v;
                }
            }
        }
        a
    }

    /// Matrix of `u ↦ ∫Γ(u) dm`, i.e. `uᵀ S u = Σ Γ(u)(c) m(c)`.
    pub fn stiffness(&self) -> CsrMatrix {
        let blocks: Vec<Mat3> = (0..self.cell_count())
            .map(|c| linalg::scale(self.field.matrix(c), 2.0 * self.domain.cell_measure(c)))
            .collect();
        self.assemble(&blocks)
    }

    /// Matrix of `u ↦ Σ ū(c)² m(c)` (cell-average mass).
    pub fn average_mass(&self) -> CsrMatrix {
        let pat = self.pattern();
        let nc = self.domain.corners_per_cell();
        let mut a = CsrMatrix::with_pattern(
            self.node_count(),
            pat.row_ptr.clone(),
            pat.col_idx.clone(),
        );
        let w = 1.0 / (nc * nc) as f64;
        for c in 0..self.cell_count() {
            let m = self.domain.cell_measure(c) * w;
            for &slot in &pat.cell_slots[c * nc * nc..(c + 1) * nc * nc] {
                a.values[slot] += m;
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit2(n: usize) -> GridStructure {
        GridStructure::identity(GridDomain::unit(2, n).unwrap())
    }

    #[test]
    fn counts_and_spacing() {
        let d = GridDomain::new(&[[0.0, 2.0], [-1.0, 1.0]], &[5, 3]).unwrap();
        assert_eq!(d.node_count(), 15);
        assert_eq!(d.cell_count(), 8);
        assert_eq!(d.spacing(), &[0.5, 1.0]);
        assert!((d.total_measure() - 4.0).abs() < 1e-15);
        assert_eq!(d.node_coords(d.node_index(&[4, 2])), [2.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDomain::new(&[[0.0, 1.0]], &[1]).is_err());
        assert!(GridDomain::new(&[[1.0, 0.0]], &[3]).is_err());
        assert!(GridDomain::new(&[[0.0, 1.0]; 4], &[2; 4]).is_err());
        let d = GridDomain::unit(1, 3).unwrap();
        assert!(d.clone().with_density(vec![1.0, 0.0]).is_err());
        assert!(d.with_density(vec![1.0]).is_err());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let s = unit2(5);
        let u = GridFunction::constant(s.domain(), 3.5);
        let g = s.gradient(&u).unwrap();
        assert!(g.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn gradient_exact_for_affine() {
        let s1 = GridStructure::identity(GridDomain::unit(1, 7).unwrap());
        let u = GridFunction::from_fn(s1.domain(), |x| x[0]);
        for c in 0..s1.cell_count() {
            assert!((s1.gradient(&u).unwrap().cell(c)[0] - 1.0).abs() < 1e-13);
        }
        let s = unit2(6);
        let u = GridFunction::from_fn(s.domain(), |x| 3.0 * x[0] - 2.0 * x[1]);
        let g = s.gradient(&u).unwrap();
        for c in 0..s.cell_count() {
            assert!((g.cell(c)[0] - 3.0).abs() < 1e-12);
            assert!((g.cell(c)[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = unit2(4);
        let u = GridFunction::zeros(3);
        assert!(matches!(s.gradient(&u), Err(Error::ShapeMismatch { .. })));
        assert!(s.energy(&u, &u).is_err());
    }

    #[test]
    fn carre_du_champ_examples() {
        let s1 = GridStructure::identity(GridDomain::unit(1, 9).unwrap());
        let x = GridFunction::from_fn(s1.domain(), |x| x[0]);
        assert!(s1.gamma(&x).unwrap().iter().all(|g| (g - 2.0).abs() < 1e-12));

        let s = unit2(5);
        let x = GridFunction::from_fn(s.domain(), |p| p[0]);
        let y = GridFunction::from_fn(s.domain(), |p| p[1]);
        let k = GridFunction::constant(s.domain(), 1.0);
        assert!(s.carre_du_champ(&x, &y).unwrap().iter().all(|g| g.abs() < 1e-13));
        assert!(s.carre_du_champ(&x, &k).unwrap().iter().all(|g| *g == 0.0));
        assert!(s.gamma(&x).unwrap().iter().all(|g| (g - 2.0).abs() < 1e-12));
    }

    #[test]
    fn energy_examples() {
        let s1 = GridStructure::identity(GridDomain::unit(1, 11).unwrap());
        let x = GridFunction::from_fn(s1.domain(), |x| x[0]);
        assert!((s1.energy(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let s = unit2(9);
        let u = GridFunction::from_fn(s.domain(), |p| p[0] + p[1]);
        assert!((s.energy(&u, &u).unwrap() - 2.0).abs() < 1e-12);
        let k = GridFunction::constant(s.domain(), -4.0);
        assert_eq!(s.energy(&k, &k).unwrap(), 0.0);
    }

    #[test]
    fn dp_norm_examples() {
        let s1 = GridStructure::identity(GridDomain::unit(1, 2).unwrap());
        let x = GridFunction::from_fn(s1.domain(), |x| x[0]);
        assert!((s1.dp_norm(&x, 2.0).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(s1.dp_norm(&GridFunction::zeros(2), 3.0).unwrap(), 0.0);
        assert!(s1.dp_norm(&x, 1.0).is_err());
    }

    #[test]
    fn lattice_examples() {
        let d = GridDomain::unit(2, 4).unwrap();
        let five = GridFunction::constant(&d, 5.0);
        assert!(five.unit_truncation().values().iter().all(|v| *v == 1.0));
        let m7 = GridFunction::constant(&d, -7.0);
        assert!(m7.truncate(2.0).values().iter().all(|v| *v == -2.0));
        let u = GridFunction::from_fn(&d, |x| x[0] - x[1]);
        let v = GridFunction::from_fn(&d, |x| (3.0 * x[1]).sin());
        let lhs = u.min(&v).unwrap().add(&u.max(&v).unwrap()).unwrap();
        let rhs = u.add(&v).unwrap();
        assert_eq!(lhs.values(), rhs.values());
    }

    #[test]
    fn field_validation() {
        let d = GridDomain::unit(2, 3).unwrap();
        let asym: Mat3 = [1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(CoefficientField::from_matrices(&d, vec![asym; 4], 0.1, 2.0).is_err());
        let g: Mat3 = [2.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        assert!(CoefficientField::from_matrices(&d, vec![g; 4], 1.0, 2.0).is_err());
        assert!(CoefficientField::from_matrices(&d, vec![g; 4], 0.5, 2.0).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = CoefficientField::random_elliptic(&d, 0.5, 3.0, &mut rng).unwrap();
        let (lo, hi) = f.spectrum_bounds();
        assert!(lo >= 0.5 - 1e-12 && hi <= 3.0 + 1e-12);
    }

    #[test]
    fn stiffness_and_mass_quadratic_forms() {
        let d = GridDomain::unit(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng).unwrap();
        let s = GridStructure::new(d, f).unwrap();
        let u = GridFunction::new((0..25).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let su = s.stiffness().mul_vec(u.values());
        let quad = linalg::dot(u.values(), &su);
        assert!((quad - 2.0 * s.energy(&u, &u).unwrap()).abs() < 1e-12);
        let mu = s.average_mass().mul_vec(u.values());
        let avg = s.cell_average(&u).unwrap();
        let sq: Vec<f64> = avg.iter().map(|a| a * a).collect();
        assert!((linalg::dot(u.values(), &mu) - s.integrate(&sq)).abs() < 1e-13);
    }

    #[test]
    fn grid_function_doc_round_trip() {
        let d = GridDomain::unit(2, 3).unwrap();
        let u = GridFunction::from_fn(&d, |x| x[0] * 10.0 + x[1]);
        let doc = u.to_doc(&d);
        let back = GridFunction::from_doc(&d, &doc).unwrap();
        assert_eq!(back.values(), u.values());
        let bad = GridFunctionDoc {
            shape: vec![9],
            values: doc.values.clone(),
        };
        assert!(GridFunction::from_doc(&d, &bad).is_err());
    }
}
