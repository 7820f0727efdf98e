//! Condenser capacities, equilibrium potentials and the Choquet-property
//! checks.
//!
//! A condenser is a pair of disjoint node sets: the compact `K` (where the
//! potential equals 1) and the outer set (where it vanishes). The inequality
//! constraint `u ≥ 1` on `K` is imposed as the equality `u = 1`, which the
//! equilibrium potential satisfies; [`CapacityResult::vi_residual`] still
//! tests the inequality form against sampled competitors.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::pure_potential_violation;
use crate::error::{Error, Result};
use crate::grid::{GridDomain, GridFunction};
use crate::pform::PFormContext;
use crate::report::CheckReport;
use crate::solver::{solve_dirichlet, SolveOptions};

/// Geometric description of a node set.
///
/// Shapes are rounded to the nearest nodes: a node belongs to the set when
/// its distance to the shape is below half a grid spacing (ties excluded).
/// Node-aligned boundaries are therefore reproduced exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    /// `[a, b]` along the first axis (any dimension).
    Interval { a: f64, b: f64 },
    Disk { center: Vec<f64>, radius: f64 },
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    Nodes { indices: Vec<usize> },
}

/// Half a spacing, shrunk slightly so that midway nodes are excluded.
fn half(h: f64) -> f64 {
    0.5 * h * (1.0 - 1e-9)
}

impl ShapeSpec {
    pub fn to_mask(&self, d: &GridDomain) -> Result<Vec<bool>> {
        let n = d.dim();
        let coords = |i: usize| d.node_coords(i);
        let mask: Vec<bool> = match self {
            Self::Interval { a, b } => {
                if !(a <= b) {
                    return Err(Error::InvalidCondenser(format!("empty interval [{a}, {b}]")));
                }
                let e = half(d.spacing()[0]);
                (0..d.node_count())
                    .map(|i| {
                        let x = coords(i)[0];
                        x > a - e && x < b + e
                    })
                    .collect()
            }
            Self::Disk { center, radius } => {
                check_point(center, n)?;
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidCondenser(format!("negative radius {radius}")));
                }
                let e = half(d.h_max());
                (0..d.node_count())
                    .map(|i| dist(&coords(i)[..n], center) < radius + e)
                    .collect()
            }
            Self::Rect { lo, hi } => {
                check_point(lo, n)?;
                check_point(hi, n)?;
                (0..d.node_count())
                    .map(|i| {
                        let x = coords(i);
                        (0..n).all(|k| {
                            let e = half(d.spacing()[k]);
                            x[k] > lo[k] - e && x[k] < hi[k] + e
                        })
                    })
                    .collect()
            }
            Self::Nodes { indices } => {
                let mut m = vec![false; d.node_count()];
                for &j in indices {
                    if j >= m.len() {
                        return Err(Error::InvalidCondenser(format!(
                            "node index {j} out of range (grid has {} nodes)",
                            m.len()
                        )));
                    }
                    m[j] = true;
                }
                m
            }
        };
        Ok(mask)
    }
}

fn check_point(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidCondenser(format!(
            "point has {} coordinates, domain dimension is {n}",
            x.len()
        )));
    }
    Ok(())
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Where the potential is pinned to zero.
#[derive(Clone, Debug, PartialEq)]
pub enum OuterSpec {
    DomainBoundary,
    /// Domain boundary plus the nodes within half a spacing of `|x − center| ≥ radius`.
    OutsideDisk { center: Vec<f64>, radius: f64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OuterRepr {
    Named(String),
    Shape(OuterShape),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OuterShape {
    OutsideDisk { center: Vec<f64>, radius: f64 },
}

impl<'de> Deserialize<'de> for OuterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match OuterRepr::deserialize(de)? {
            OuterRepr::Named(s) if s == "domain_boundary" => Ok(Self::DomainBoundary),
            OuterRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "unknown outer set \"{s}\", expected \"domain_boundary\""
            ))),
            OuterRepr::Shape(OuterShape::OutsideDisk { center, radius }) => Ok(Self::OutsideDisk { center, radius }),
        }
    }
}

impl Serialize for OuterSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::DomainBoundary => ser.serialize_str("domain_boundary"),
            Self::OutsideDisk { center, radius } => OuterShape::OutsideDisk {
                center: center.clone(),
                radius: *radius,
            }
            .serialize(ser),
        }
    }
}

impl OuterSpec {
    pub fn to_mask(&self, d: &GridDomain) -> Result<Vec<bool>> {
        let mut mask = d.boundary_mask();
        if let Self::OutsideDisk { center, radius } = self {
            check_point(center, d.dim())?;
            let e = half(d.h_max());
            for (i, m) in mask.iter_mut().enumerate() {
                if dist(&d.node_coords(i)[..d.dim()], center) > radius - e {
                    *m = true;
                }
            }
        }
        Ok(mask)
    }
}

/// Config form of a condenser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondenserSpec {
    pub inner: ShapeSpec,
    #[serde(default = "default_outer")]
    pub outer: OuterSpec,
}

fn default_outer() -> OuterSpec {
    OuterSpec::DomainBoundary
}

impl CondenserSpec {
    pub fn build(&self, d: &GridDomain) -> Result<Condenser> {
        Condenser::new(d, self.inner.to_mask(d)?, self.outer.to_mask(d)?)
    }
}

/// Validated pair `(K, outer)` of node masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Condenser {
    inner: Vec<bool>,
    outer: Vec<bool>,
}

impl Condenser {
    /// Requires `K` nonempty, disjoint from `outer`, `outer` nonempty, and
    /// every remaining node joined to `K` by grid edges avoiding `outer`.
    pub fn new(d: &GridDomain, inner: Vec<bool>, outer: Vec<bool>) -> Result<Self> {
        let n = d.node_count();
        for (name, m) in [("inner", &inner), ("outer", &outer)] {
            if m.len() != n {
                return Err(Error::InvalidCondenser(format!(
                    "{name} mask has {} entries, grid has {n} nodes",
                    m.len()
                )));
            }
        }
        if !inner.iter().any(|&k| k) {
            return Err(Error::InvalidCondenser("compact set K is empty".into()));
        }
        if !outer.iter().any(|&o| o) {
            return Err(Error::InvalidCondenser("outer set is empty".into()));
        }
        if let Some(j) = (0..n).find(|&j| inner[j] && outer[j]) {
            return Err(Error::InvalidCondenser(format!("node {j} lies in both K and the outer set")));
        }
        // Breadth-first search from K through free nodes.
        let mut seen = inner.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&j| inner[j]).collect();
        while let Some(j) = queue.pop_front() {
            let m = d.node_multi(j);
            for axis in 0..d.dim() {
                for up in [false, true] {
                    if (!up && m[axis] == 0) || (up && m[axis] + 1 == d.shape()[axis]) {
                        continue;
                    }
                    let k = if up {
                        j + d.node_strides()[axis]
                    } else {
                        j - d.node_strides()[axis]
                    };
                    if !seen[k] && !outer[k] {
                        seen[k] = true;
                        queue.push_back(k);
                    }
                }
            }
        }
        if let Some(j) = (0..n).find(|&j| !seen[j] && !outer[j]) {
            return Err(Error::InvalidCondenser(format!(
                "node {j} is separated from K by the outer set"
            )));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner(&self) -> &[bool] {
        &self.inner
    }

    pub fn outer(&self) -> &[bool] {
        &self.outer
    }

    /// Dirichlet data: 1 on K, 0 on the outer set.
    pub fn boundary_data(&self) -> Result<GridFunction> {
        let values = self.inner.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
        let mask = self.inner.iter().zip(&self.outer).map(|(a, b)| *a || *b).collect();
        GridFunction::new(values).with_mask(mask)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityDiagnostics {
    pub iterations: usize,
    pub residual_norm: f64,
    /// `∫ Γ(e_K)^{p/2} dm` (the energy form of the value).
    pub energy_integral: f64,
    pub min_potential: f64,
    pub max_potential: f64,
    pub inner_nodes: usize,
    pub free_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct CapacityResult {
    /// `⟨L_p e_K, e_K⟩`.
    pub value: f64,
    pub potential: GridFunction,
    /// Worst normalized violation of `⟨L_p e_K, w − e_K⟩ ≥ 0` over sampled `w ∈ W(K)`.
    pub vi_residual: f64,
    pub diagnostics: CapacityDiagnostics,
}

/// Number of competitors sampled for the variational-inequality residual.
pub const VI_SAMPLES: usize = 32;

/// Equilibrium potential and capacity of the condenser.
pub fn capacity(c: &Condenser, ctx: &PFormContext, opts: &SolveOptions) -> Result<CapacityResult> {
    let s = ctx.structure();
    if c.inner.len() != s.node_count() {
        return Err(Error::ShapeMismatch {
            expected: s.node_count(),
            found: c.inner.len(),
        });
    }
    let boundary = c.boundary_data()?;
    let free_nodes = boundary.free().iter().filter(|&&f| f).count();
    let solved = if free_nodes == 0 {
        crate::solver::SolveResult {
            solution: boundary.clone(),
            residual_norm: 0.0,
            iterations: 0,
            energy_trace: vec![ctx.p_energy(&boundary)?],
            complementarity: None,
        }
    } else {
        solve_dirichlet(ctx, &boundary, opts)?
    };
    let e = solved.solution;
    let coeffs = ctx.lp_coefficients(&e)?;
    let value = crate::linalg::dot(&coeffs, e.values());
    let energy_integral = {
        let gam = s.gamma(&e)?;
        let p = ctx.p();
        s.integrate(&gam.iter().map(|g| g.powf(0.5 * p)).collect::<Vec<_>>())
    };
    let vi_residual = condenser_vi_residual(c, &e, &coeffs);
    let (lo, hi) = e
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(CapacityResult {
        value,
        potential: e,
        vi_residual,
        diagnostics: CapacityDiagnostics {
            iterations: solved.iterations,
            residual_norm: solved.residual_norm,
            energy_integral,
            min_potential: lo,
            max_potential: hi,
            inner_nodes: c.inner.iter().filter(|&&k| k).count(),
            free_nodes,
        },
    })
}

/// Competitors `w = e_K + δ` with `δ ≥ 0` on K, `δ = 0` on the outer set,
/// `δ` of both signs elsewhere, at several amplitudes. Seeded so that the
/// residual is a deterministic function of the inputs.
fn condenser_vi_residual(c: &Condenser, e: &GridFunction, coeffs: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for k in 0..VI_SAMPLES {
        let amp = 0.5f64.powi((k % 8) as i32);
        let delta: Vec<f64> = (0..e.len())
            .map(|j| {
                if c.outer[j] {
                    0.0
                } else if c.inner[j] {
                    amp * rng.gen_range(0.0..1.0)
                } else {
                    amp * rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let norm = crate::linalg::dot(&delta, &delta).sqrt();
        if norm > 0.0 {
            worst = worst.max(-crate::linalg::dot(coeffs, &delta) / norm);
        }
    }
    worst
}

/// Capacity of an open node set `U`: the supremum over compacts inside `U`
/// is attained at `K = U` on a finite grid.
#[derive(Clone, Debug)]
pub struct OpenCapacity {
    pub value: f64,
    pub attaining_set: Vec<usize>,
}

pub fn capacity_of_open(u: &[bool], outer: &[bool], ctx: &PFormContext, opts: &SolveOptions) -> Result<OpenCapacity> {
    let d = ctx.structure().domain();
    let c = Condenser::new(d, u.to_vec(), outer.to_vec())?;
    let r = capacity(&c, ctx, opts)?;
    Ok(OpenCapacity {
        value: r.value,
        attaining_set: (0..u.len()).filter(|&j| u[j]).collect(),
    })
}

/// True iff every coefficient of `L_p u` off `outer` is at least
/// `−1e−10 · ‖L_p u‖_∞`.
pub fn is_pure_potential(u: &GridFunction, outer: &[bool], ctx: &PFormContext) -> Result<bool> {
    Ok(pure_potential_violation(u, outer, ctx)?.is_none())
}

/// Capacities of node sets against a fixed outer set, memoized and
/// computed in parallel. The empty set has capacity 0.
pub struct CapacityTable<'a> {
    ctx: &'a PFormContext,
    outer: Vec<bool>,
    opts: SolveOptions,
    values: BTreeMap<Vec<bool>, f64>,
}

impl<'a> CapacityTable<'a> {
    pub fn new(ctx: &'a PFormContext, outer: &[bool], opts: &SolveOptions) -> Self {
        Self {
            ctx,
            outer: outer.to_vec(),
            opts: opts.clone(),
            values: BTreeMap::new(),
        }
    }

    /// Solves every set not already known; results are inserted in input order.
    pub fn fill(&mut self, sets: &[Vec<bool>]) -> Result<()> {
        let mut todo: Vec<Vec<bool>> = Vec::new();
        for s in sets {
            if !self.values.contains_key(s) && !todo.contains(s) {
                todo.push(s.clone());
            }
        }
        let d = self.ctx.structure().domain();
        let results: Vec<Result<f64>> = todo
            .par_iter()
            .map(|k| {
                if !k.iter().any(|&x| x) {
                    return Ok(0.0);
                }
                let c = Condenser::new(d, k.clone(), self.outer.clone())?;
                Ok(capacity(&c, self.ctx, &self.opts)?.value)
            })
            .collect();
        for (k, r) in todo.into_iter().zip(results) {
            self.values.insert(k, r?);
        }
        Ok(())
    }

    pub fn get(&mut self, set: &[bool]) -> Result<f64> {
        if let Some(v) = self.values.get(set) {
            return Ok(*v);
        }
        self.fill(&[set.to_vec()])?;
        Ok(self.values[set])
    }
}

fn union(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

fn intersection(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(x, y)| !*x || *y)
}

/// Tolerance model shared by the Choquet and increment-subadditivity checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChoquetTolerance {
    /// `max(1e−9·scale, 2·grad_tol·diameter)`.
    pub base: f64,
    /// `C` in the `C·h` allowance (0 in one dimension).
    pub c: f64,
    pub h: f64,
}

impl ChoquetTolerance {
    fn new(ctx: &PFormContext, opts: &SolveOptions, scale: f64) -> Self {
        let d = ctx.structure().domain();
        let base = (1e-9 * scale).max(2.0 * opts.grad_tol * d.diameter());
        let c = if d.dim() == 1 { 0.0 } else { scale };
        Self { base, c, h: d.h_max() }
    }

    /// Tolerance for inequalities that are exact only for edge-separable energies.
    pub fn lattice(&self) -> f64 {
        self.base + self.c * self.h
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChoquetReport {
    pub passed: bool,
    pub tolerance: ChoquetTolerance,
    pub checks: Vec<CheckReport>,
}

impl ChoquetReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Runs the Choquet-capacity properties over a suite of node sets sharing
/// one outer set:
///
/// 1. strong subadditivity for every pair,
/// 2. monotonicity for every nested pair, stabilization of the decreasing
///    chain of partial intersections and the increasing chain of partial
///    unions,
/// 3. finite subadditivity of the whole suite,
/// 4. positivity on nonempty sets.
pub fn check_choquet(
    sets: &[Vec<bool>],
    outer: &[bool],
    ctx: &PFormContext,
    opts: &SolveOptions,
) -> Result<ChoquetReport> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("empty Choquet suite".into()));
    }
    let n = ctx.structure().node_count();
    for (i, s) in sets.iter().enumerate() {
        if s.len() != n {
            return Err(Error::ShapeMismatch { expected: n, found: s.len() });
        }
        if s.iter().zip(outer).any(|(a, b)| *a && *b) {
            return Err(Error::InvalidCondenser(format!("set {i} meets the outer set")));
        }
    }
    let mut table = CapacityTable::new(ctx, outer, opts);
    let mut needed: Vec<Vec<bool>> = sets.to_vec();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            needed.push(union(&sets[i], &sets[j]));
            needed.push(intersection(&sets[i], &sets[j]));
        }
    }
    let mut meet = sets[0].clone();
    let mut join = sets[0].clone();
    let mut meets = vec![meet.clone()];
    let mut joins = vec![join.clone()];
    for s in &sets[1..] {
        meet = intersection(&meet, s);
        join = union(&join, s);
        meets.push(meet.clone());
        joins.push(join.clone());
    }
    needed.extend(meets.iter().cloned());
    needed.extend(joins.iter().cloned());
    table.fill(&needed)?;

    let cap: Vec<f64> = sets.iter().map(|s| table.get(s)).collect::<Result<_>>()?;
    let scale = cap.iter().cloned().fold(0.0, f64::max).max(table.get(&join)?);
    let tol = ChoquetTolerance::new(ctx, opts, scale);
    let p = ctx.p();
    let grid = ctx.structure().domain().shape().to_vec();
    let mut checks = Vec::new();

    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let lhs = table.get(&union(&sets[i], &sets[j]))? + table.get(&intersection(&sets[i], &sets[j]))?;
            checks.push(
                CheckReport::new("strong_subadditivity", p, &grid, lhs, cap[i] + cap[j], tol.lattice())
                    .with_witness(format!("sets {i},{j}")),
            );
            for (a, b) in [(i, j), (j, i)] {
                if subset(&sets[a], &sets[b]) {
                    checks.push(
                        CheckReport::new("monotonicity", p, &grid, cap[a], cap[b], tol.base)
                            .with_witness(format!("set {a} ⊆ set {b}")),
                    );
                }
            }
        }
    }
    for (name, chain, decreasing) in [("decreasing_chain", &meets, true), ("increasing_chain", &joins, false)] {
        let values: Vec<f64> = chain.iter().map(|s| table.get(s)).collect::<Result<_>>()?;
        for w in 1..values.len() {
            let (lhs, rhs) = if decreasing {
                (values[w], values[w - 1])
            } else {
                (values[w - 1], values[w])
            };
            checks.push(CheckReport::new(name, p, &grid, lhs, rhs, tol.base).with_witness(format!("step {w}")));
            if chain[w] == chain[w - 1] && values[w] != values[w - 1] {
                let r = CheckReport::new(name, p, &grid, values[w], values[w - 1], 0.0);
                checks.push(r.fail(format!("stabilized set changed capacity at step {w}")));
            }
        }
        // limit of the chain equals the capacity of its intersection/union
        let last = chain.last().expect("nonempty chain");
        let direct = {
            let mut fresh = CapacityTable::new(ctx, outer, opts);
            fresh.get(last)?
        };
        let limit = *values.last().expect("nonempty chain");
        let mut r = CheckReport::new(&format!("{name}_limit"), p, &grid, (limit - direct).abs(), 0.0, tol.base);
        r = r.with_detail("limit", limit).with_detail("direct", direct);
        checks.push(r);
    }
    let total: f64 = cap.iter().sum();
    checks.push(
        CheckReport::new("finite_subadditivity", p, &grid, table.get(&join)?, total, tol.lattice())
            .with_detail("sets", sets.len() as f64),
    );
    for (i, s) in sets.iter().enumerate() {
        if s.iter().any(|&x| x) {
            let mut r = CheckReport::new("positivity", p, &grid, 0.0, cap[i], 0.0);
            if cap[i] <= 0.0 {
                r = r.fail(format!("set {i} has capacity {}", cap[i]));
            }
            checks.push(r.with_witness(format!("set {i}")));
        }
    }
    Ok(ChoquetReport {
        passed: checks.iter().all(|c| c.passed),
        tolerance: tol,
        checks,
    })
}

/// `cap(∪E_i) − cap(∪F_i) ≤ Σ (cap(E_i) − cap(F_i))` for `F_i ⊆ E_i`.
pub fn check_increment_subadditivity(
    e_sets: &[Vec<bool>],
    f_sets: &[Vec<bool>],
    outer: &[bool],
    ctx: &PFormContext,
    opts: &SolveOptions,
) -> Result<CheckReport> {
    if e_sets.len() != f_sets.len() || e_sets.is_empty() {
        return Err(Error::InvalidArgument("need equally many E and F sets, at least one".into()));
    }
    for (i, (e, f)) in e_sets.iter().zip(f_sets).enumerate() {
        if !subset(f, e) {
            return Err(Error::Precondition(format!("F_{i} is not contained in E_{i}")));
        }
    }
    let mut table = CapacityTable::new(ctx, outer, opts);
    let ue = e_sets.iter().skip(1).fold(e_sets[0].clone(), |a, b| union(&a, b));
    let uf = f_sets.iter().skip(1).fold(f_sets[0].clone(), |a, b| union(&a, b));
    let mut all: Vec<Vec<bool>> = e_sets.iter().chain(f_sets).cloned().collect();
    all.push(ue.clone());
    all.push(uf.clone());
    table.fill(&all)?;
    let lhs = table.get(&ue)? - table.get(&uf)?;
    let mut rhs = 0.0;
    for (e, f) in e_sets.iter().zip(f_sets) {
        rhs += table.get(e)? - table.get(f)?;
    }
    let scale = table.get(&ue)?;
    let tol = ChoquetTolerance::new(ctx, opts, scale);
    let k = e_sets.len() as f64;
    Ok(
        CheckReport::new("increment_subadditivity", ctx.p(), ctx.structure().domain().shape(), lhs, rhs, k * tol.lattice())
            .with_detail("k", k)
            .with_detail("tolerance_constant", tol.c),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridStructure;
    use std::sync::Arc;

    fn ctx1(nodes: usize, p: f64) -> PFormContext {
        let s = GridStructure::identity(GridDomain::unit(1, nodes).unwrap());
        PFormContext::new(Arc::new(s), p).unwrap()
    }

    fn interval(ctx: &PFormContext, a: f64, b: f64) -> Vec<bool> {
        ShapeSpec::Interval { a, b }.to_mask(ctx.structure().domain()).unwrap()
    }

    #[test]
    fn three_node_condenser() {
        let ctx = ctx1(3, 2.0);
        let d = ctx.structure().domain();
        let c = Condenser::new(d, vec![false, true, false], d.boundary_mask()).unwrap();
        let r = capacity(&c, &ctx, &SolveOptions::default()).unwrap();
        assert_eq!(r.potential.values(), &[0.0, 1.0, 0.0]);
        assert!((r.value - 8.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_closed_forms() {
        for (p, expect) in [(2.0, 16.0), (3.0, 2f64.powf(1.5) * 32.0)] {
            let ctx = ctx1(33, p);
            let d = ctx.structure().domain();
            let c = Condenser::new(d, interval(&ctx, 0.25, 0.75), d.boundary_mask()).unwrap();
            let r = capacity(&c, &ctx, &SolveOptions::default()).unwrap();
            assert!((r.value - expect).abs() <= 1e-9 * expect, "p={p}: {}", r.value);
            assert!((r.value - r.diagnostics.energy_integral).abs() <= 1e-10 * expect);
            assert!(r.vi_residual <= 1e-8);
            assert!(is_pure_potential(&r.potential, c.outer(), &ctx).unwrap());
        }
    }

    #[test]
    fn condenser_validation() {
        let ctx = ctx1(9, 2.0);
        let d = ctx.structure().domain();
        let empty = vec![false; 9];
        assert!(Condenser::new(d, empty.clone(), d.boundary_mask()).is_err());
        assert!(Condenser::new(d, d.boundary_mask(), d.boundary_mask()).is_err());
        assert!(Condenser::new(d, interval(&ctx, 0.5, 0.5), empty).is_err());
        // node 7 separated from K by an outer node at 6
        let mut outer = d.boundary_mask();
        outer[6] = true;
        assert!(Condenser::new(d, interval(&ctx, 0.25, 0.25), outer).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: CondenserSpec =
            serde_json::from_str(r#"{"inner":{"type":"interval","a":0.25,"b":0.75},"outer":"domain_boundary"}"#).unwrap();
        assert_eq!(spec.outer, OuterSpec::DomainBoundary);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<CondenserSpec>(&json).unwrap(), spec);
        let disk: CondenserSpec = serde_json::from_str(
            r#"{"inner":{"type":"disk","center":[0,0],"radius":0.25},"outer":{"type":"outside_disk","center":[0,0],"radius":0.75}}"#,
        )
        .unwrap();
        assert!(matches!(disk.outer, OuterSpec::OutsideDisk { .. }));
        assert!(serde_json::from_str::<CondenserSpec>(r#"{"inner":{"type":"nodes","indices":[1]},"outer":"sphere"}"#).is_err());
        assert!(serde_json::from_str::<CondenserSpec>(r#"{"inner":{"type":"nodes","indices":[1],"x":1}}"#).is_err());
    }

    #[test]
    fn pure_potential_examples() {
        let ctx = ctx1(9, 2.0);
        let d = ctx.structure().domain();
        assert!(is_pure_potential(&GridFunction::zeros(9), &d.boundary_mask(), &ctx).unwrap());
        let mut dip = vec![0.0, 0.5, 0.5, 0.5, 0.2, 0.5, 0.5, 0.5, 0.0];
        assert!(!is_pure_potential(&GridFunction::new(dip.clone()), &d.boundary_mask(), &ctx).unwrap());
        dip[4] = 0.5;
        assert!(is_pure_potential(&GridFunction::new(dip), &d.boundary_mask(), &ctx).unwrap());
    }

    #[test]
    fn open_sets() {
        let ctx = ctx1(17, 2.0);
        let outer = ctx.structure().domain().boundary_mask();
        let opts = SolveOptions::default();
        let small = capacity_of_open(&interval(&ctx, 0.5, 0.5), &outer, &ctx, &opts).unwrap();
        let big = capacity_of_open(&interval(&ctx, 0.25, 0.75), &outer, &ctx, &opts).unwrap();
        assert!(small.value <= big.value);
        assert_eq!(small.attaining_set, vec![8]);
    }

    #[test]
    fn choquet_suite_in_one_dimension() {
        let ctx = ctx1(33, 3.0);
        let outer = ctx.structure().domain().boundary_mask();
        let sets = vec![
            interval(&ctx, 0.25, 0.5),
            interval(&ctx, 0.375, 0.75),
            interval(&ctx, 0.25, 0.75),
        ];
        let r = check_choquet(&sets, &outer, &ctx, &SolveOptions::default()).unwrap();
        assert!(r.passed, "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.tolerance.c, 0.0);
        let same = check_choquet(&[sets[0].clone(), sets[0].clone()], &outer, &ctx, &SolveOptions::default()).unwrap();
        let ss = &same.checks[0];
        assert!(ss.slack.abs() < 1e-12);
    }

    #[test]
    fn increment_subadditivity_examples() {
        let ctx = ctx1(33, 2.0);
        let outer = ctx.structure().domain().boundary_mask();
        let opts = SolveOptions::default();
        let e = vec![interval(&ctx, 0.125, 0.375), interval(&ctx, 0.5, 0.875)];
        let r = check_increment_subadditivity(&e, &e, &outer, &ctx, &opts).unwrap();
        assert!(r.passed && r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12);
        let f = vec![interval(&ctx, 0.25, 0.25), interval(&ctx, 0.625, 0.75)];
        assert!(check_increment_subadditivity(&e, &f, &outer, &ctx, &opts).unwrap().passed);
        assert!(matches!(
            check_increment_subadditivity(&f, &e, &outer, &ctx, &opts),
            Err(Error::Precondition(_))
        ));
    }
}
