//! Independent dense oracles for the integration tests. Nothing here goes
//! through the library's assembly code: cell gradients are rebuilt from the
//! averaged forward-difference definition.

#![allow(dead_code)]

use std::sync::Arc;

use dirichlet_p::grid::{CoefficientField, GridDomain, GridFunction, GridStructure};
use dirichlet_p::pform::PFormContext;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodes of a cell, corner `k` offset by bit `i` along axis `i`.
fn corners(d: &GridDomain, c: usize) -> Vec<usize> {
    let n = d.dim();
    let base = d.cell_multi(c);
    (0..1usize << n)
        .map(|k| {
            let idx: Vec<usize> = (0..n).map(|i| base[i] + ((k >> i) & 1)).collect();
            d.node_index(&idx)
        })
        .collect()
}

/// Row `i` of the cell gradient: weights on the cell's corners.
fn gradient_rows(d: &GridDomain) -> Vec<Vec<f64>> {
    let n = d.dim();
    let pairs = (1usize << n) as f64 / 2.0;
    (0..n)
        .map(|i| {
            (0..1usize << n)
                .map(|k| {
                    let sign = if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
                    sign / (pairs * d.spacing()[i])
                })
                .collect()
        })
        .collect()
}

/// Dense matrix of `u ↦ Σ_c 2 (G ∇u, ∇u) m(c)`.
pub fn dense_stiffness(d: &GridDomain, g: &CoefficientField) -> DMatrix<f64> {
    let n = d.dim();
    let rows = gradient_rows(d);
    let mut a = DMatrix::zeros(d.node_count(), d.node_count());
    for c in 0..d.cell_count() {
        let nodes = corners(d, c);
        let gm = g.matrix(c);
        let m = d.cell_measure(c);
        for (ka, &ja) in nodes.iter().enumerate() {
            for (kb, &jb) in nodes.iter().enumerate() {
                let mut s = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        s += rows[i][ka] * gm[3 * i + l] * rows[l][kb];
                    }
                }
                a[(ja, jb)] += 2.0 * m * s;
            }
        }
    }
    a
}

/// Dense matrix of `u ↦ Σ_c ū(c)² m(c)`, `ū` the corner mean.
pub fn dense_average_mass(d: &GridDomain) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d.node_count(), d.node_count());
    for c in 0..d.cell_count() {
        let nodes = corners(d, c);
        let w = 1.0 / nodes.len() as f64;
        let m = d.cell_measure(c);
        for &ja in &nodes {
            for &jb in &nodes {
                a[(ja, jb)] += m * w * w;
            }
        }
    }
    a
}

/// Largest `k` with `M x = k S x` on the free nodes, via Cholesky of `S_ff`.
pub fn dense_poincare(d: &GridDomain, g: &CoefficientField, mask: &[bool]) -> f64 {
    let s = dense_stiffness(d, g);
    let m = dense_average_mass(d);
    let free: Vec<usize> = (0..d.node_count()).filter(|&j| !mask[j]).collect();
    let k = free.len();
    let sf = DMatrix::from_fn(k, k, |a, b| s[(free[a], free[b])]);
    let mf = DMatrix::from_fn(k, k, |a, b| m[(free[a], free[b])]);
    let l = sf.cholesky().expect("stiffness positive definite on free nodes").l();
    let li = l.clone().try_inverse().expect("invertible factor");
    let c = &li * mf * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    c.symmetric_eigenvalues().max()
}

pub fn random_function(d: &GridDomain, amp: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::new((0..d.node_count()).map(|_| rng.gen_range(-amp..amp)).collect())
}

pub fn random_context(dim: usize, nodes: usize, p: f64, rng: &mut ChaCha8Rng) -> PFormContext {
    let d = GridDomain::unit(dim, nodes).unwrap();
    let g = CoefficientField::random_elliptic(&d, 0.5, 2.0, rng).unwrap();
    PFormContext::new(Arc::new(GridStructure::new(d, g).unwrap()), p).unwrap()
}

/// `2^{p/2} (a^{1−p} + (1−b)^{1−p})`: p-capacity of `[a, b]` in `(0, 1)`
/// with `G = 1` (linear potential on each gap).
pub fn interval_capacity(a: f64, b: f64, p: f64) -> f64 {
    2f64.powf(0.5 * p) * (a.powf(1.0 - p) + (1.0 - b).powf(1.0 - p))
}

/// Closed-form capacity of a node set in `(0, 1)`: only its hull matters,
/// the potential is 1 between the outermost nodes.
pub fn node_set_capacity(d: &GridDomain, set: &[bool], p: f64) -> f64 {
    let xs: Vec<f64> = (0..d.node_count()).filter(|&j| set[j]).map(|j| d.node_coords(j)[0]).collect();
    let a = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    interval_capacity(a, b, p)
}
