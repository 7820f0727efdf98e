//! Minimization of `J_p` under Dirichlet data, the obstacle problem, and
//! harmonicity residuals.
//!
//! Convergence is declared on the ∞-norm of the free coefficients of
//! `L_p u`, which is the gradient of `J_p` restricted to free nodes.

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{self, pcg, CsrMatrix};
use crate::pform::PFormContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NewtonRegularized,
    Lbfgs,
    GradientArmijo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub method: Method,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease parameter.
    pub c1: f64,
    /// Step shrink factor.
    pub backtrack: f64,
    #[serde(skip)]
    pub initial_guess: Option<GridFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::NewtonRegularized,
            grad_tol: 1e-10,
            max_iter: 200,
            c1: 1e-4,
            backtrack: 0.5,
            initial_guess: None,
        }
    }
}

impl SolveOptions {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        if method != Method::NewtonRegularized && self.max_iter == 200 {
            self.max_iter = 20_000;
        }
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_initial_guess(mut self, u0: GridFunction) -> Self {
        self.initial_guess = Some(u0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument("line-search parameters must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub solution: GridFunction,
    /// ∞-norm of the free coefficients of `L_p u` (projected for obstacles).
    pub residual_norm: f64,
    pub iterations: usize,
    /// `J_p` after each accepted step, starting with the initial guess.
    /// Nonincreasing up to `16 ε |J|` per step.
    pub energy_trace: Vec<f64>,
    /// Largest `|(u − ψ)·⟨L_p u, φ_j⟩|` over free nodes (obstacle problems).
    pub complementarity: Option<f64>,
}

/// Free-node bookkeeping shared by the minimizers.
struct Problem<'a> {
    ctx: &'a PFormContext,
    free: Vec<bool>,
    /// Lower bound per node (`-∞` when unconstrained).
    lower: Option<Vec<f64>>,
}

impl Problem<'_> {
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.ctx.lp_values(u)?;
        for (gi, &f) in g.iter_mut().zip(&self.free) {
            if !f {
                *gi = 0.0;
            }
        }
        Ok(g)
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.ctx.energy_values(u)
    }

    /// Projected gradient: components pushing into an active bound vanish.
    fn residual(&self, u: &[f64], g: &[f64]) -> f64 {
        let mut r = 0.0f64;
        for i in 0..u.len() {
            if !self.free[i] {
                continue;
            }
            let gi = match &self.lower {
                Some(lo) if u[i] <= lo[i] => g[i].min(0.0),
                _ => g[i],
            };
            r = r.max(gi.abs());
        }
        r
    }

    fn project(&self, u: &mut [f64]) {
        if let Some(lo) = &self.lower {
            for i in 0..u.len() {
                if self.free[i] && u[i] < lo[i] {
                    u[i] = lo[i];
                }
            }
        }
    }
}

fn not_converged(iterations: usize, residual: f64, trace: Vec<f64>) -> Error {
    Error::NotConverged {
        iterations,
        residual,
        trace,
    }
}

/// Solves the `p = 2` problem with the structure's stiffness operator:
/// `u = boundary` on masked nodes, `S u = 0` on free nodes.
pub fn linear_solve(ctx: &PFormContext, boundary: &GridFunction) -> Result<GridFunction> {
    let s = ctx.structure();
    s.check(boundary)?;
    if !boundary.has_mask() {
        return Err(Error::EmptyMask);
    }
    let free = boundary.free();
    let stiff = s.stiffness();
    Ok(GridFunction::new(solve_linear_values(&stiff, boundary.values(), &free, 1e-14)?)
        .with_mask(boundary.mask().to_vec())?)
}

fn solve_linear_values(stiff: &CsrMatrix, data: &[f64], free: &[bool], rel: f64) -> Result<Vec<f64>> {
    let n = data.len();
    let pinned: Vec<f64> = (0..n).map(|i| if free[i] { 0.0 } else { data[i] }).collect();
    let rhs: Vec<f64> = stiff.mul_vec(&pinned).iter().map(|x| -x).collect();
    let x = pcg(stiff, 0.0, &rhs, free, rel, 20 * n + 100)?.solution;
    Ok((0..n).map(|i| if free[i] { x[i] } else { data[i] }).collect())
}

fn initial_values(ctx: &PFormContext, boundary: &GridFunction, opts: &SolveOptions) -> Result<Vec<f64>> {
    let free = boundary.free();
    let mut u = match &opts.initial_guess {
        Some(g) => {
            ctx.structure().check(g)?;
            g.values().to_vec()
        }
        None => solve_linear_values(&ctx.structure().stiffness(), boundary.values(), &free, 1e-12)?,
    };
    for i in 0..u.len() {
        if !free[i] {
            u[i] = boundary.values()[i];
        }
    }
    Ok(u)
}

/// Minimizes `J_p` subject to `u = boundary` on the masked nodes.
pub fn solve_dirichlet(ctx: &PFormContext, boundary: &GridFunction, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    ctx.structure().check(boundary)?;
    if !boundary.has_mask() {
        return Err(Error::EmptyMask);
    }
    if boundary.mask().iter().zip(boundary.values()).any(|(&m, v)| m && !v.is_finite()) {
        return Err(Error::InvalidArgument("boundary data must be finite".into()));
    }
    let problem = Problem {
        ctx,
        free: boundary.free(),
        lower: None,
    };
    let u0 = initial_values(ctx, boundary, opts)?;
    let result = run(&problem, u0, opts)?;
    finish(result, boundary.mask())
}

/// Minimizes `J_p` over `{u ≥ obstacle}` with `u = boundary` on masked nodes.
///
/// Entries of `obstacle` may be `-∞`.
pub fn solve_obstacle(
    ctx: &PFormContext,
    obstacle: &GridFunction,
    boundary: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let s = ctx.structure();
    s.check(boundary)?;
    s.check(obstacle)?;
    if !boundary.has_mask() {
        return Err(Error::EmptyMask);
    }
    let free = boundary.free();
    for i in 0..free.len() {
        let psi = obstacle.values()[i];
        if psi.is_nan() || psi == f64::INFINITY {
            return Err(Error::Infeasible(format!("obstacle is not a real lower bound at node {i}")));
        }
        if !free[i] && psi > boundary.values()[i] {
            return Err(Error::Infeasible(format!(
                "obstacle {psi} exceeds boundary value {} at node {i}",
                boundary.values()[i]
            )));
        }
    }
    let lower = obstacle.values().to_vec();
    let problem = Problem {
        ctx,
        free,
        lower: Some(lower.clone()),
    };
    let mut u0 = initial_values(ctx, boundary, opts)?;
    problem.project(&mut u0);
    let mut result = match opts.method {
        Method::NewtonRegularized => projected_newton(&problem, u0, opts)?,
        _ => run(&problem, u0, opts)?,
    };
    let g = problem.gradient(result.solution.values())?;
    let comp = (0..g.len())
        .filter(|&i| problem.free[i] && lower[i].is_finite())
        .map(|i| ((result.solution.values()[i] - lower[i]) * g[i]).abs())
        .fold(0.0, f64::max);
    result.complementarity = Some(comp);
    finish(result, boundary.mask())
}

fn finish(mut result: SolveResult, mask: &[bool]) -> Result<SolveResult> {
    result.solution = result.solution.with_mask(mask.to_vec())?;
    Ok(result)
}

fn run(problem: &Problem, u0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    match opts.method {
        Method::NewtonRegularized => newton(problem, u0, opts),
        Method::Lbfgs => lbfgs(problem, u0, opts),
        Method::GradientArmijo => gradient_descent(problem, u0, opts),
    }
}

/// Backtracking along `u + t d` (projected when bounds are present).
///
/// A step is accepted on sufficient decrease, or when the energy rises by at
/// most `slack` and the residual shrinks. Newton passes the evaluation
/// roundoff of `J` as `slack` once its predicted decrease falls below it.
#[allow(clippy::too_many_arguments)]
fn line_search(
    problem: &Problem,
    u: &[f64],
    d: &[f64],
    g: &[f64],
    energy: f64,
    residual: f64,
    slack: f64,
    opts: &SolveOptions,
) -> Result<Option<(Vec<f64>, f64, Vec<f64>, f64)>> {
    let mut t = 1.0;
    for _ in 0..60 {
        let mut trial: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + t * b).collect();
        problem.project(&mut trial);
        let e = problem.energy(&trial);
        let decrease = linalg::dot(g, &trial.iter().zip(u).map(|(a, b)| a - b).collect::<Vec<_>>());
        if e.is_finite() {
            if e <= energy + opts.c1 * decrease && decrease < 0.0 {
                let gt = problem.gradient(&trial)?;
                let r = problem.residual(&trial, &gt);
                return Ok(Some((trial, e, gt, r)));
            }
            if e <= energy + slack {
                let gt = problem.gradient(&trial)?;
                let r = problem.residual(&trial, &gt);
                if r < residual {
                    return Ok(Some((trial, e, gt, r)));
                }
            }
        }
        t *= opts.backtrack;
    }
    Ok(None)
}

/// Energy increase tolerated when a step's predicted decrease is already
/// below the evaluation roundoff of `J`.
fn roundoff_slack(energy: f64, predicted: f64) -> f64 {
    let noise = 16.0 * f64::EPSILON * energy.abs();
    if predicted <= noise {
        noise
    } else {
        0.0
    }
}

fn newton(problem: &Problem, u0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    let ctx = problem.ctx;
    let mut u = u0;
    let mut g = problem.gradient(&u)?;
    let mut energy = problem.energy(&u);
    let mut residual = problem.residual(&u, &g);
    let mut trace = vec![energy];
    let mut mu = 1e-8;
    for it in 0..opts.max_iter {
        if residual <= opts.grad_tol {
            return Ok(done(u, residual, it, trace));
        }
        let h = ctx.hessian_values(&u);
        let diag_mean = {
            let d = h.diagonal();
            let (sum, count) = d
                .iter()
                .zip(&problem.free)
                .filter(|(_, &f)| f)
                .fold((0.0, 0usize), |(s, c), (x, _)| (s + x, c + 1));
            if count > 0 && sum > 0.0 {
                sum / count as f64
            } else {
                1.0
            }
        };
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let g2 = linalg::dot(&g, &g).sqrt();
        let rel = (0.01 * opts.grad_tol / g2).clamp(1e-14, 0.1);
        let mut step = None;
        for _ in 0..12 {
            let lambda = mu * diag_mean;
            match pcg(&h, lambda, &rhs, &problem.free, rel, 20 * u.len() + 100) {
                Ok(out) => {
                    step = Some((out.solution, lambda));
                    break;
                }
                Err(_) => mu = (mu * 100.0).max(1e-10),
            }
        }
        let Some((d, _)) = step else {
            return Err(not_converged(it, residual, trace));
        };
        let hd = h.mul_vec(&d);
        let predicted = -(linalg::dot(&g, &d) + 0.5 * linalg::dot(&d, &hd));
        let slack = roundoff_slack(energy, predicted);
        match line_search(problem, &u, &d, &g, energy, residual, slack, opts)? {
            Some((un, en, gn, rn)) => {
                let full = un.iter().zip(&u).zip(&d).all(|((a, b), c)| (a - b - c).abs() <= 1e-14 * (1.0 + c.abs()));
                let ratio = if predicted > 0.0 { (energy - en) / predicted } else { 1.0 };
                if full && ratio > 0.75 {
                    mu = (mu / 10.0).max(1e-14);
                } else if ratio < 0.25 {
                    mu = (mu * 10.0).min(1e6);
                }
                debug!("newton it {it}: J = {en:.12e}, residual = {rn:.3e}, mu = {mu:.1e}");
                u = un;
                energy = en;
                g = gn;
                residual = rn;
                trace.push(energy);
            }
            None => {
                if mu >= 1e6 {
                    return Err(not_converged(it, residual, trace));
                }
                mu = (mu * 100.0).min(1e6);
            }
        }
    }
    if residual <= opts.grad_tol {
        return Ok(done(u, residual, opts.max_iter, trace));
    }
    Err(not_converged(opts.max_iter, residual, trace))
}

fn done(u: Vec<f64>, residual: f64, iterations: usize, energy_trace: Vec<f64>) -> SolveResult {
    SolveResult {
        solution: GridFunction::new(u),
        residual_norm: residual,
        iterations,
        energy_trace,
        complementarity: None,
    }
}

fn lbfgs(problem: &Problem, u0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    const MEMORY: usize = 10;
    let mut u = u0;
    let mut g = problem.gradient(&u)?;
    let mut energy = problem.energy(&u);
    let mut residual = problem.residual(&u, &g);
    let mut trace = vec![energy];
    let mut pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let precond = jacobi(problem, &u);
    for it in 0..opts.max_iter {
        if residual <= opts.grad_tol {
            return Ok(done(u, residual, it, trace));
        }
        let mut q = masked_for_bounds(problem, &u, &g);
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * linalg::dot(s, &q);
            for i in 0..q.len() {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = pairs
            .back()
            .map(|(s, y, _)| linalg::dot(s, y) / linalg::dot(y, y))
            .unwrap_or(1.0);
        let mut r: Vec<f64> = q
            .iter()
            .zip(&precond)
            .map(|(x, d)| if pairs.is_empty() { x * d } else { gamma * x })
            .collect();
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * linalg::dot(y, &r);
            for i in 0..r.len() {
                r[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = r.iter().map(|x| -x).collect();
        if linalg::dot(&d, &g) >= 0.0 {
            pairs.clear();
            d = g.iter().zip(&precond).map(|(x, p)| -x * p).collect();
        }
        match line_search(problem, &u, &d, &g, energy, residual, 0.0, opts)? {
            Some((un, en, gn, rn)) => {
                let s: Vec<f64> = un.iter().zip(&u).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = linalg::dot(&s, &y);
                if sy > 1e-300 {
                    if pairs.len() == MEMORY {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, 1.0 / sy));
                }
                u = un;
                energy = en;
                g = gn;
                residual = rn;
                trace.push(energy);
            }
            None => {
                if pairs.is_empty() {
                    return Err(not_converged(it, residual, trace));
                }
                pairs.clear();
            }
        }
    }
    if residual <= opts.grad_tol {
        return Ok(done(u, residual, opts.max_iter, trace));
    }
    Err(not_converged(opts.max_iter, residual, trace))
}

/// Gradient with bound-blocked components removed.
fn masked_for_bounds(problem: &Problem, u: &[f64], g: &[f64]) -> Vec<f64> {
    match &problem.lower {
        Some(lo) => (0..g.len())
            .map(|i| if u[i] <= lo[i] && g[i] > 0.0 { 0.0 } else { g[i] })
            .collect(),
        None => g.to_vec(),
    }
}

/// Inverse of the `p = 2` stiffness diagonal on free nodes; a fixed metric
/// for the first-order methods.
fn jacobi(problem: &Problem, _u: &[f64]) -> Vec<f64> {
    let d = problem.ctx.structure().stiffness().diagonal();
    d.iter()
        .zip(&problem.free)
        .map(|(x, &f)| if f && *x > 0.0 { 1.0 / x } else { 0.0 })
        .collect()
}

fn gradient_descent(problem: &Problem, u0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    let mut u = u0;
    let mut g = problem.gradient(&u)?;
    let mut energy = problem.energy(&u);
    let mut residual = problem.residual(&u, &g);
    let mut trace = vec![energy];
    let precond = jacobi(problem, &u);
    let mut scale = 1.0;
    for it in 0..opts.max_iter {
        if residual <= opts.grad_tol {
            return Ok(done(u, residual, it, trace));
        }
        let gm = masked_for_bounds(problem, &u, &g);
        let d: Vec<f64> = gm.iter().zip(&precond).map(|(x, p)| -scale * x * p).collect();
        match line_search(problem, &u, &d, &g, energy, residual, 0.0, opts)? {
            Some((un, en, gn, rn)) => {
                let moved = un.iter().zip(&u).zip(&d).all(|((a, b), c)| (a - b - c).abs() <= 1e-14 * (1.0 + c.abs()));
                if moved {
                    scale *= 2.0;
                } else {
                    scale *= 0.5;
                }
                u = un;
                energy = en;
                g = gn;
                residual = rn;
                trace.push(energy);
            }
            None => return Err(not_converged(it, residual, trace)),
        }
    }
    if residual <= opts.grad_tol {
        return Ok(done(u, residual, opts.max_iter, trace));
    }
    Err(not_converged(opts.max_iter, residual, trace))
}

/// Projected Newton: Newton steps on the inactive free nodes, scaled
/// gradient steps on the active ones, projected backtracking.
fn projected_newton(problem: &Problem, u0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult> {
    let ctx = problem.ctx;
    let lower = problem.lower.as_ref().expect("obstacle problem");
    let mut u = u0;
    let mut g = problem.gradient(&u)?;
    let mut energy = problem.energy(&u);
    let mut residual = problem.residual(&u, &g);
    let mut trace = vec![energy];
    let mut mu = 1e-8;
    for it in 0..opts.max_iter {
        if residual <= opts.grad_tol {
            return Ok(done(u, residual, it, trace));
        }
        // Nodes at (or within a gradient step of) the bound that the
        // gradient pushes into.
        let h = ctx.hessian_values(&u);
        let diag = h.diagonal();
        let active: Vec<bool> = (0..u.len())
            .map(|i| {
                problem.free[i] && g[i] > 0.0 && u[i] - lower[i] <= (g[i] / diag[i].max(1e-300)).min(1e-8 + residual)
            })
            .collect();
        let inactive: Vec<bool> = (0..u.len()).map(|i| problem.free[i] && !active[i]).collect();
        let diag_mean = {
            let v: Vec<f64> = diag.iter().zip(&problem.free).filter(|(_, &f)| f).map(|(x, _)| *x).collect();
            let s: f64 = v.iter().sum();
            if s > 0.0 { s / v.len() as f64 } else { 1.0 }
        };
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let g2 = linalg::dot(&g, &g).sqrt();
        let rel = (0.01 * opts.grad_tol / g2).clamp(1e-14, 0.1);
        let mut d = None;
        for _ in 0..12 {
            match pcg(&h, mu * diag_mean, &rhs, &inactive, rel, 20 * u.len() + 100) {
                Ok(out) => {
                    d = Some(out.solution);
                    break;
                }
                Err(_) => mu = (mu * 100.0).max(1e-10),
            }
        }
        let Some(mut d) = d else {
            return Err(not_converged(it, residual, trace));
        };
        for i in 0..u.len() {
            if active[i] {
                d[i] = -g[i] / diag[i].max(diag_mean * 1e-12);
            }
        }
        let predicted = -(linalg::dot(&g, &d) + 0.5 * linalg::dot(&d, &h.mul_vec(&d)));
        let slack = roundoff_slack(energy, predicted);
        match line_search(problem, &u, &d, &g, energy, residual, slack, opts)? {
            Some((un, en, gn, rn)) => {
                mu = (mu / 10.0).max(1e-14);
                u = un;
                energy = en;
                g = gn;
                residual = rn;
                trace.push(energy);
            }
            None => {
                if mu >= 1e6 {
                    return Err(not_converged(it, residual, trace));
                }
                mu = (mu * 100.0).min(1e6);
            }
        }
    }
    if residual <= opts.grad_tol {
        return Ok(done(u, residual, opts.max_iter, trace));
    }
    Err(not_converged(opts.max_iter, residual, trace))
}

/// `max(0, −⟨L_p u, v − u⟩) / ‖v − u‖₂` maximized over `samples` random
/// feasible competitors `v ≥ lower` that agree with `u` on `u`'s mask.
pub fn vi_residual<R: Rng>(
    ctx: &PFormContext,
    u: &GridFunction,
    lower: Option<&GridFunction>,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let coeffs = ctx.lp_coefficients(u)?;
    let free = u.free();
    let scale = u.max_abs().max(1.0);
    let mut worst = 0.0f64;
    for k in 0..samples {
        let amp = scale * 0.5f64.powi((k % 8) as i32);
        let mut v: Vec<f64> = u
            .values()
            .iter()
            .zip(&free)
            .map(|(x, &f)| if f { x + amp * rng.gen_range(-1.0..1.0) } else { *x })
            .collect();
        if let Some(lo) = lower {
            for (vi, l) in v.iter_mut().zip(lo.values()) {
                *vi = vi.max(*l);
            }
        }
        let diff: Vec<f64> = v.iter().zip(u.values()).map(|(a, b)| a - b).collect();
        let norm = linalg::dot(&diff, &diff).sqrt();
        if norm == 0.0 {
            continue;
        }
        let pairing = linalg::dot(&coeffs, &diff);
        worst = worst.max(-pairing / norm);
    }
    Ok(worst)
}

/// ∞-norm of the coefficients `⟨L_p u, φ_j⟩` over nodes `j` in `region`.
pub fn harmonicity_residual(u: &GridFunction, region: &[bool], ctx: &PFormContext) -> Result<f64> {
    let coeffs = region_coefficients(u, region, ctx)?;
    Ok(coeffs.iter().map(|(c, _)| c.abs()).fold(0.0, f64::max))
}

/// As [`harmonicity_residual`], each coefficient divided by the lumped
/// measure of its node: a pointwise residual of the discrete equation that
/// is comparable across resolutions.
pub fn normalized_harmonicity_residual(u: &GridFunction, region: &[bool], ctx: &PFormContext) -> Result<f64> {
    let coeffs = region_coefficients(u, region, ctx)?;
    let measure = ctx.structure().node_measure();
    Ok(coeffs.iter().map(|(c, j)| c.abs() / measure[*j]).fold(0.0, f64::max))
}

fn region_coefficients(u: &GridFunction, region: &[bool], ctx: &PFormContext) -> Result<Vec<(f64, usize)>> {
    if region.len() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len(),
            found: region.len(),
        });
    }
    if !region.iter().any(|&r| r) {
        return Err(Error::InvalidArgument("empty harmonicity region".into()));
    }
    let coeffs = ctx.lp_coefficients(u)?;
    Ok(region
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(j, _)| (coeffs[j], j))
        .collect())
}

/// Interior nodes of the domain (complement of the boundary mask).
pub fn interior_region(ctx: &PFormContext) -> Vec<bool> {
    ctx.structure().domain().boundary_mask().iter().map(|b| !b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CoefficientField, GridDomain, GridStructure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn unit_ctx(dim: usize, n: usize, p: f64) -> PFormContext {
        let s = GridStructure::identity(GridDomain::unit(dim, n).unwrap());
        PFormContext::new(Arc::new(s), p).unwrap()
    }

    fn boundary_of<F: Fn(&[f64]) -> f64>(ctx: &PFormContext, f: F) -> GridFunction {
        let d = ctx.structure().domain();
        GridFunction::from_fn(d, f).with_boundary_mask(d).unwrap()
    }

    #[test]
    fn one_dimensional_solution_is_linear() {
        for p in [2.0, 3.0, 4.0] {
            let ctx = unit_ctx(1, 17, p);
            let b = boundary_of(&ctx, |x| if x[0] > 0.5 { 1.0 } else { 0.0 });
            let r = solve_dirichlet(&ctx, &b, &SolveOptions::default()).unwrap();
            for (i, v) in r.solution.values().iter().enumerate() {
                assert!((v - i as f64 / 16.0).abs() < 1e-12, "p={p}");
            }
            assert!(r.residual_norm <= 1e-10);
        }
    }

    #[test]
    fn affine_data_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = GridDomain::unit(2, 9).unwrap();
        let g = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng).unwrap();
        // constant G keeps affine functions harmonic
        let g = CoefficientField::from_matrices(&d, vec![*g.matrix(0); d.cell_count()], 0.5, 2.0).unwrap();
        let s = GridStructure::new(d, g).unwrap();
        let ctx = PFormContext::new(Arc::new(s), 3.0).unwrap();
        let b = boundary_of(&ctx, |x| 0.3 + 2.0 * x[0] - x[1]);
        let r = solve_dirichlet(&ctx, &b, &SolveOptions::default()).unwrap();
        let exact = GridFunction::from_fn(ctx.structure().domain(), |x| 0.3 + 2.0 * x[0] - x[1]);
        for (a, b) in r.solution.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn methods_agree() {
        let ctx = unit_ctx(2, 9, 3.0);
        let b = boundary_of(&ctx, |x| (3.0 * x[0]).sin() * x[1] + x[0] * x[0]);
        let newton = solve_dirichlet(&ctx, &b, &SolveOptions::default().with_tol(1e-11)).unwrap();
        for m in [Method::Lbfgs, Method::GradientArmijo] {
            let opts = SolveOptions::default().with_method(m).with_tol(1e-11).with_max_iter(200_000);
            let r = solve_dirichlet(&ctx, &b, &opts).unwrap();
            let err = r
                .solution
                .values()
                .iter()
                .zip(newton.solution.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-7, "{m:?}: {err}");
            assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] + 16.0 * f64::EPSILON * w[0].abs()));
        }
    }

    #[test]
    fn empty_mask_is_rejected() {
        let ctx = unit_ctx(1, 5, 3.0);
        let b = GridFunction::zeros(5);
        assert!(matches!(
            solve_dirichlet(&ctx, &b, &SolveOptions::default()),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn max_iter_one_reports_trace() {
        let ctx = unit_ctx(2, 9, 4.0);
        let b = boundary_of(&ctx, |x| (5.0 * x[0]).sin() + x[1] * x[1] * x[1]);
        let opts = SolveOptions::default().with_max_iter(1);
        match solve_dirichlet(&ctx, &b, &opts) {
            Err(Error::NotConverged { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn obstacle_examples() {
        // 1-D condenser profile
        let ctx = unit_ctx(1, 17, 2.0);
        let d = ctx.structure().domain();
        let psi = GridFunction::from_fn(d, |x| if (0.25..=0.75).contains(&x[0]) { 1.0 } else { f64::NEG_INFINITY });
        let b = GridFunction::zeros(17).with_boundary_mask(d).unwrap();
        let r = solve_obstacle(&ctx, &psi, &b, &SolveOptions::default()).unwrap();
        let exact = GridFunction::from_fn(d, |x| (4.0 * x[0]).min(1.0).min(4.0 * (1.0 - x[0])));
        for (a, e) in r.solution.values().iter().zip(exact.values()) {
            assert!((a - e).abs() <= 1e-10);
        }
        assert!(r.complementarity.unwrap() <= 1e-8);

        // constants
        let one = GridFunction::constant(d, 1.0);
        let r = solve_obstacle(&ctx, &one, &one.clone().with_boundary_mask(d).unwrap(), &SolveOptions::default()).unwrap();
        assert!(r.solution.values().iter().all(|v| (v - 1.0).abs() < 1e-14));

        // inactive obstacle
        let none = GridFunction::constant(d, f64::NEG_INFINITY);
        let b = boundary_of(&ctx, |x| x[0]);
        let r = solve_obstacle(&ctx, &none, &b, &SolveOptions::default()).unwrap();
        let free = solve_dirichlet(&ctx, &b, &SolveOptions::default()).unwrap();
        for (a, b) in r.solution.values().iter().zip(free.solution.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        // infeasible
        let two = GridFunction::constant(d, 2.0);
        assert!(matches!(
            solve_obstacle(&ctx, &two, &one.with_boundary_mask(d).unwrap(), &SolveOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn kink_residual_is_local() {
        let ctx = unit_ctx(1, 21, 2.0);
        let d = ctx.structure().domain();
        let u = GridFunction::from_fn(d, |x| (x[0] - 0.5).abs());
        let region = interior_region(&ctx);
        let coeffs = ctx.lp_coefficients(&u).unwrap();
        let r = harmonicity_residual(&u, &region, &ctx).unwrap();
        assert!(r > 0.1);
        for (j, c) in coeffs.iter().enumerate() {
            if region[j] && j != 10 {
                assert!(c.abs() < 1e-14);
            }
        }
        assert!(harmonicity_residual(&u, &[false; 21], &ctx).is_err());
    }
}
