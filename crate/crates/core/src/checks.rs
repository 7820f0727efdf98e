//! Executable checkers for the algebraic properties of the p-form:
//! sector condition, monotonicity, coercivity, hemicontinuity, the
//! contraction properties and the nonlinear Dirichlet form axioms D1/D2.
//!
//! Checks that are exact on a grid use roundoff tolerances. Checks that rely
//! on strong locality (truncations commuting with `Γ`) are exact only on
//! cells whose corner values all lie on one side of every threshold; when
//! some cell straddles a threshold the tolerance is `C·h` with `C` the
//! energy scale of the inputs, reported in the details.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridStructure};
use crate::linalg::{self, pcg};
use crate::pform::PFormContext;
use crate::report::CheckReport;

const ROUNDOFF: f64 = 1e-12;

/// Relative tolerance for the pure-potential test.
pub const PURE_POTENTIAL_TOL: f64 = 1e-10;

fn grid_of(ctx: &PFormContext) -> Vec<usize> {
    ctx.structure().domain().shape().to_vec()
}

/// `|E^p(u,v)| ≤ E^p(u,u)^{(p−1)/p} E^p(v,v)^{1/p}`.
pub fn check_sector(u: &GridFunction, v: &GridFunction, ctx: &PFormContext) -> Result<CheckReport> {
    let p = ctx.p();
    let lhs = ctx.p_form(u, v)?.abs();
    let euu = ctx.p_form(u, u)?;
    let evv = ctx.p_form(v, v)?;
    let rhs = euu.powf((p - 1.0) / p) * evv.powf(1.0 / p);
    let tol = ROUNDOFF * rhs.max(lhs).max(1.0);
    Ok(CheckReport::new("sector", p, &grid_of(ctx), lhs, rhs, tol))
}

/// Per-cell monotonicity density
/// `Γ(u)^{(p−2)/2} Γ(u,u−v) − Γ(v)^{(p−2)/2} Γ(v,u−v)` and its integral.
///
/// The report's `slack` is the smallest per-cell value relative to its own
/// magnitude; `details.pairing` is `⟨L_p u − L_p v, u − v⟩`. When the pairing
/// vanishes the check also requires `Γ(u−v) ≡ 0`.
pub fn check_monotone(u: &GridFunction, v: &GridFunction, ctx: &PFormContext) -> Result<CheckReport> {
    let p = ctx.p();
    if p < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "monotonicity check needs p >= 2, got {p}"
        )));
    }
    let diff = u.sub(v)?;
    let a = ctx.p_form_density(u, &diff)?;
    let b = ctx.p_form_density(v, &diff)?;
    let s = ctx.structure();
    let mut worst_rel = f64::INFINITY;
    let mut worst_cell = 0;
    let mut min_cell = f64::INFINITY;
    for c in 0..a.len() {
        let d = a[c] - b[c];
        let scale = a[c].abs() + b[c].abs();
        min_cell = min_cell.min(d);
        let rel = if scale > 0.0 { d / scale } else { 0.0 };
        if rel < worst_rel {
            worst_rel = rel;
            worst_cell = c;
        }
    }
    let dens: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let pairing = s.integrate(&dens);
    let scale = s.integrate(&a.iter().zip(&b).map(|(x, y)| x.abs() + y.abs()).collect::<Vec<_>>());
    let gamma_diff = s.gamma(&diff)?;
    let max_gamma_diff = gamma_diff.iter().cloned().fold(0.0, f64::max);
    let mut report = CheckReport::new("monotone", p, &grid_of(ctx), 0.0, worst_rel.min(0.0), ROUNDOFF)
        .with_detail("pairing", pairing)
        .with_detail("min_cell_density", min_cell)
        .with_detail("max_gamma_difference", max_gamma_diff);
    if report.passed && pairing.abs() <= ROUNDOFF * scale.max(f64::MIN_POSITIVE) {
        let gscale = s
            .gamma(u)?
            .iter()
            .chain(s.gamma(v)?.iter())
            .cloned()
            .fold(0.0, f64::max);
        if max_gamma_diff > ROUNDOFF * gscale.max(1.0) {
            report = report.fail(format!(
                "pairing vanishes but Γ(u−v) reaches {max_gamma_diff:e}"
            ));
        }
    }
    if !report.passed && report.witness.is_none() {
        report = report.with_witness(format!("cell {worst_cell}"));
    }
    Ok(report)
}

/// Constant `c = 1 + (√k · p / 2)^p` in `‖u‖_{D_p}^p ≤ c ⟨L_p u, u⟩`, where
/// `k` bounds `‖u‖₂² ≤ k ∫Γ(u) dm`.
pub fn coercivity_constant(k: f64, p: f64) -> f64 {
    1.0 + (k.sqrt() * p / 2.0).powf(p)
}

/// Checks `‖u‖_{D_p}^p ≤ c ⟨L_p u, u⟩` on every sample. The worst sample
/// (largest ratio) is reported; lhs and rhs are its two sides.
pub fn check_coercive(ctx: &PFormContext, k: f64, samples: &[GridFunction]) -> Result<CheckReport> {
    let p = ctx.p();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("Poincaré constant must be positive, got {k}")));
    }
    let c = coercivity_constant(k, p);
    let s = ctx.structure();
    let mut worst = (0.0, 0.0, f64::NEG_INFINITY, 0usize);
    for (i, u) in samples.iter().enumerate() {
        let lhs = s.dp_norm(u, p)?.powf(p);
        let rhs = c * ctx.p_form(u, u)?;
        let gap = lhs - rhs;
        if gap > worst.2 {
            worst = (lhs, rhs, gap, i);
        }
    }
    if samples.is_empty() {
        worst = (0.0, 0.0, 0.0, 0);
    }
    let (lhs, rhs, _, idx) = worst;
    let report = CheckReport::new("coercive", p, &grid_of(ctx), lhs, rhs, ROUNDOFF * rhs.max(1e-300))
        .with_detail("constant", c)
        .with_detail("poincare_k", k)
        .with_detail("samples", samples.len() as f64);
    Ok(if report.passed {
        report
    } else {
        report.with_witness(format!("sample {idx}"))
    })
}

/// Largest `Σ ū² m / ∫Γ(u) dm` over functions vanishing on `mask`, by
/// inverse power iteration on the assembled quadratic forms.
pub fn estimate_poincare(s: &GridStructure, mask: &[bool]) -> Result<f64> {
    if mask.len() != s.node_count() {
        return Err(Error::ShapeMismatch {
            expected: s.node_count(),
            found: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let free: Vec<bool> = mask.iter().map(|m| !m).collect();
    if !free.iter().any(|&f| f) {
        return Err(Error::InvalidArgument("every node is masked".into()));
    }
    let stiff = s.stiffness();
    let mass = s.average_mass();
    let n = s.node_count();
    // Smooth positive start: overlaps the principal mode.
    let mut x: Vec<f64> = (0..n).map(|i| if free[i] { 1.0 } else { 0.0 }).collect();
    let mut k_prev = 0.0;
    let rayleigh = |x: &[f64]| -> f64 {
        let mx = mass.mul_vec(x);
        let sx = stiff.mul_vec(x);
        linalg::dot(x, &mx) / linalg::dot(x, &sx)
    };
    for _ in 0..500 {
        let b = mass.mul_vec(&x);
        let y = pcg(&stiff, 0.0, &b, &free, 1e-13, 20 * n + 100)?.solution;
        let norm = linalg::norm_inf(&y);
        if norm == 0.0 {
            return Err(Error::LinearSolve("power iteration collapsed".into()));
        }
        x = y.iter().map(|v| v / norm).collect();
        let k = rayleigh(&x);
        if (k - k_prev).abs() <= 1e-12 * k {
            return Ok(k);
        }
        k_prev = k;
    }
    Ok(k_prev)
}

/// Samples `t ↦ ⟨L_p(v + t(u−v)), u−v⟩` on `samples` and `2·samples − 1`
/// uniform points of `[0,1]` and requires the largest jump between adjacent
/// samples to shrink by at least the factor 0.75 under refinement.
pub fn check_hemicontinuous(
    u: &GridFunction,
    v: &GridFunction,
    ctx: &PFormContext,
    samples: usize,
) -> Result<CheckReport> {
    if samples < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {samples}")));
    }
    let diff = u.sub(v)?;
    let eval = |t: f64| -> Result<f64> { ctx.p_form(&v.axpy(t, &diff)?, &diff) };
    let curve = |count: usize| -> Result<Vec<f64>> {
        (0..count)
            .map(|i| eval(i as f64 / (count - 1) as f64))
            .collect()
    };
    let coarse = curve(samples)?;
    let fine = curve(2 * samples - 1)?;
    let max_jump = |c: &[f64]| c.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let j_coarse = max_jump(&coarse);
    let j_fine = max_jump(&fine);
    let scale = coarse.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let p = ctx.p();
    let mut report = if j_coarse <= ROUNDOFF * scale.max(1e-300) {
        CheckReport::new("hemicontinuous", p, &grid_of(ctx), j_fine, j_coarse, ROUNDOFF * scale.max(1e-300))
            .with_detail("jump_ratio", 0.0)
    } else {
        let ratio = j_fine / j_coarse;
        CheckReport::new("hemicontinuous", p, &grid_of(ctx), ratio, 0.75, 0.0).with_detail("jump_ratio", ratio)
    };
    report = report
        .with_detail("jump_coarse", j_coarse)
        .with_detail("jump_fine", j_fine);
    if p == 2.0 && ctx.eps() == 0.0 {
        // Linear operator: the curve is affine in t.
        let n = fine.len() - 1;
        let defect = fine
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let t = i as f64 / n as f64;
                (f - ((1.0 - t) * fine[0] + t * fine[n])).abs()
            })
            .fold(0.0, f64::max);
        report = report.with_detail("affine_defect", defect);
        if defect > 1e-10 * scale.max(1.0) {
            report = report.fail(format!("p = 2 curve not affine (defect {defect:e})"));
        }
    }
    Ok(report)
}

/// Normal contractions for the contraction checks.
#[derive(Clone)]
pub enum Contraction {
    /// `u⁺ ∧ 1`
    Unit,
    /// `u⁺ ∧ α`, α > 0
    Truncation(f64),
    /// `u ∧ 0`
    NegativePart,
    /// A `C¹` normal contraction with `|T′| ≤ 1`, `T(0) = 0`.
    Smooth {
        name: String,
        map: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Contraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Contraction {
    pub fn smooth<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, map: F) -> Self {
        Self::Smooth {
            name: name.to_string(),
            map: Arc::new(map),
        }
    }

    pub fn tanh() -> Self {
        Self::smooth("tanh", f64::tanh)
    }

    pub fn name(&self) -> String {
        match self {
            Self::Unit => "unit".into(),
            Self::Truncation(a) => format!("truncation({a})"),
            Self::NegativePart => "negative_part".into(),
            Self::Smooth { name, .. } => format!("smooth({name})"),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Unit => x.clamp(0.0, 1.0),
            Self::Truncation(a) => x.max(0.0).min(*a),
            Self::NegativePart => x.min(0.0),
            Self::Smooth { map, .. } => map(x),
        }
    }

    /// Level sets where the contraction has a kink.
    fn thresholds(&self) -> Vec<f64> {
        match self {
            Self::Unit => vec![0.0, 1.0],
            Self::Truncation(a) => vec![0.0, *a],
            Self::NegativePart => vec![0.0],
            Self::Smooth { .. } => vec![],
        }
    }

    /// Samples `T` on `[lo, hi]` and rejects `T(0) ≠ 0` or slopes above 1.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if let Self::Truncation(a) = self {
            if !(*a > 0.0) {
                return Err(Error::InvalidContraction(format!("truncation level must be positive, got {a}")));
            }
        }
        let t0 = self.apply(0.0);
        if t0.abs() > 1e-14 {
            return Err(Error::InvalidContraction(format!("T(0) = {t0}")));
        }
        let (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
        let n = 4000;
        let step = (hi - lo) / n as f64;
        let mut prev = self.apply(lo);
        for i in 1..=n {
            let x = lo + i as f64 * step;
            let y = self.apply(x);
            if (y - prev).abs() > step * (1.0 + 1e-9) {
                return Err(Error::InvalidContraction(format!(
                    "{} has slope {:.6} > 1 near {x:.4}",
                    self.name(),
                    (y - prev).abs() / step
                )));
            }
            prev = y;
        }
        Ok(())
    }
}

/// Fraction and list of cells whose corner values straddle a threshold of `t`.
fn straddling_cells(s: &GridStructure, values: &[f64], thresholds: &[f64]) -> usize {
    (0..s.cell_count())
        .filter(|&c| {
            let corners = s.cell_corners(c);
            thresholds.iter().any(|&t| {
                let below = corners.iter().any(|&i| values[i] < t);
                let above = corners.iter().any(|&i| values[i] > t);
                below && above
            })
        })
        .count()
}

/// Tolerance for a pairing whose exactness depends on level-set alignment.
fn locality_tolerance(ctx: &PFormContext, straddling: usize, energy_scale: f64) -> (f64, f64) {
    if straddling == 0 {
        (ROUNDOFF * energy_scale.max(1e-300), 0.0)
    } else {
        let c = energy_scale;
        (c * ctx.structure().domain().h_max(), c)
    }
}

/// Unit, truncation and negative-part kinds: `⟨L_p(v+Tu) − L_p v, u − Tu⟩ ≥ −tol`.
/// Smooth kinds: `⟨L_p(u+Tu+v) − L_p v, u − Tu⟩ ≥ −tol` with a roundoff tolerance.
pub fn check_contraction_operates(
    u: &GridFunction,
    v: &GridFunction,
    ctx: &PFormContext,
    kind: &Contraction,
) -> Result<CheckReport> {
    let lo = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    kind.validate(lo, hi)?;
    let tu = u.map(|x| kind.apply(x));
    let rest = u.sub(&tu)?;
    let shifted = match kind {
        Contraction::Smooth { .. } => u.add(&tu)?.add(v)?,
        _ => v.add(&tu)?,
    };
    let a = ctx.p_form(&shifted, &rest)?;
    let b = ctx.p_form(v, &rest)?;
    let pairing = a - b;
    let energy_scale = ctx.p_form(u, u)? + ctx.p_form(v, v)? + ctx.p_form(&shifted, &shifted)?;
    let check = format!("contraction:{}", kind.name());
    let p = ctx.p();
    let report = match kind {
        Contraction::Smooth { .. } => {
            let tol = ROUNDOFF * (a.abs() + b.abs()).max(1e-300);
            CheckReport::new(&check, p, &grid_of(ctx), 0.0, pairing, tol)
        }
        _ => {
            let straddle = straddling_cells(ctx.structure(), u.values(), &kind.thresholds());
            let (tol, c) = locality_tolerance(ctx, straddle, energy_scale);
            CheckReport::new(&check, p, &grid_of(ctx), 0.0, pairing, tol)
                .with_detail("straddling_cells", straddle as f64)
                .with_detail("tolerance_constant", c)
        }
    };
    Ok(report.with_detail("energy_scale", energy_scale))
}

/// First node (outside `outer`) where `L_p u` has a coefficient below
/// `−PURE_POTENTIAL_TOL · ‖L_p u‖_∞`, with that coefficient.
pub fn pure_potential_violation(
    u: &GridFunction,
    outer: &[bool],
    ctx: &PFormContext,
) -> Result<Option<(usize, f64)>> {
    if outer.len() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len(),
            found: outer.len(),
        });
    }
    let coeffs = ctx.lp_coefficients(u)?;
    let scale = coeffs
        .iter()
        .zip(outer)
        .filter(|(_, &o)| !o)
        .fold(0.0f64, |m, (c, _)| m.max(c.abs()));
    let tol = PURE_POTENTIAL_TOL * scale;
    Ok(coeffs
        .iter()
        .zip(outer)
        .enumerate()
        .find(|(_, (c, &o))| !o && **c < -tol)
        .map(|(j, (c, _))| (j, *c)))
}

/// Both axioms of a nonlinear Dirichlet form for one pair of pure potentials.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DirichletAxiomsReport {
    pub d1: CheckReport,
    pub d2: CheckReport,
}

impl DirichletAxiomsReport {
    pub fn passed(&self) -> bool {
        self.d1.passed && self.d2.passed
    }
}

/// D1: `⟨L_p(u∧v), u − u∧v⟩ ≥ −tol`, D2: `⟨L_p(u∧(v+α)), u − u∧(v+α)⟩ ≥ −tol`.
///
/// `u` and `v` must be pure potentials relative to the Dirichlet set `outer`.
pub fn check_d1_d2(
    u: &GridFunction,
    v: &GridFunction,
    alpha: f64,
    outer: &[bool],
    ctx: &PFormContext,
) -> Result<DirichletAxiomsReport> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("need alpha >= 0, got {alpha}")));
    }
    for (name, f) in [("u", u), ("v", v)] {
        if let Some((node, coeff)) = pure_potential_violation(f, outer, ctx)? {
            return Err(Error::Precondition(format!(
                "{name} is not a pure potential: coefficient {coeff:e} at node {node}"
            )));
        }
    }
    let s = ctx.structure();
    let energy_scale = ctx.p_form(u, u)? + ctx.p_form(v, v)?;
    let axiom = |name: &str, shift: f64| -> Result<CheckReport> {
        let vs = v.add_constant(shift);
        let meet = u.min(&vs)?;
        let rest = u.sub(&meet)?;
        let pairing = ctx.p_form(&meet, &rest)?;
        let gap: Vec<f64> = u.values().iter().zip(vs.values()).map(|(a, b)| a - b).collect();
        let straddle = straddling_cells(s, &gap, &[0.0]);
        let (tol, c) = locality_tolerance(ctx, straddle, energy_scale);
        Ok(CheckReport::new(name, ctx.p(), &grid_of(ctx), 0.0, pairing, tol)
            .with_detail("straddling_cells", straddle as f64)
            .with_detail("tolerance_constant", c)
            .with_detail("alpha", shift))
    };
    Ok(DirichletAxiomsReport {
        d1: axiom("D1", 0.0)?,
        d2: axiom("D2", alpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CoefficientField, GridDomain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx2(n: usize, p: f64, seed: u64) -> (PFormContext, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = GridDomain::unit(2, n).unwrap();
        let f = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng).unwrap();
        let s = GridStructure::new(d, f).unwrap();
        (PFormContext::new(Arc::new(s), p).unwrap(), rng)
    }

    fn random_fn(nodes: usize, rng: &mut ChaCha8Rng) -> GridFunction {
        GridFunction::new((0..nodes).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn sector_equality_cases() {
        let (ctx, mut rng) = ctx2(6, 3.0, 1);
        let u = random_fn(36, &mut rng);
        let r = check_sector(&u, &u, &ctx).unwrap();
        assert!(r.passed && r.slack.abs() <= 1e-10 * r.rhs);
        let r = check_sector(&u, &u.scale(-1.0), &ctx).unwrap();
        assert!(r.passed && r.slack.abs() <= 1e-10 * r.rhs);
    }

    #[test]
    fn monotone_trivial_cases() {
        let (ctx, mut rng) = ctx2(5, 3.0, 2);
        let u = random_fn(25, &mut rng);
        let r = check_monotone(&u, &u, &ctx).unwrap();
        assert!(r.passed);
        assert_eq!(r.details["pairing"], 0.0);
        let r = check_monotone(&u, &u.add_constant(0.7), &ctx).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.details["max_gamma_difference"] < 1e-20);
        assert!(check_monotone(&u, &u, &ctx.with_p(1.5).unwrap()).is_err());
    }

    #[test]
    fn hemicontinuity_examples() {
        let (ctx, mut rng) = ctx2(6, 2.0, 3);
        let u = random_fn(36, &mut rng);
        let v = random_fn(36, &mut rng);
        let r = check_hemicontinuous(&u, &u, &ctx, 8).unwrap();
        assert!(r.passed && r.details["jump_coarse"] == 0.0);
        let r = check_hemicontinuous(&u, &v, &ctx, 8).unwrap();
        assert!(r.passed && r.details["affine_defect"] < 1e-10, "{r:?}");
        let ctx3 = ctx.with_p(3.0).unwrap();
        let r = check_hemicontinuous(&u, &v, &ctx3, 64).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(check_hemicontinuous(&u, &v, &ctx3, 2).is_err());
    }

    #[test]
    fn unit_contraction_on_values_inside_the_unit_interval() {
        let (ctx, mut rng) = ctx2(6, 3.0, 4);
        let u = GridFunction::new((0..36).map(|_| rng.gen_range(0.05..0.95)).collect());
        let v = random_fn(36, &mut rng);
        let r = check_contraction_operates(&u, &v, &ctx, &Contraction::Unit).unwrap();
        assert!(r.passed && r.rhs.abs() < 1e-14 && r.details["straddling_cells"] == 0.0);
        let two = GridFunction::constant(ctx.structure().domain(), 2.0);
        let r = check_contraction_operates(&two, &v, &ctx, &Contraction::Unit).unwrap();
        assert!(r.passed && r.rhs.abs() < 1e-14);
    }

    #[test]
    fn invalid_contractions_are_rejected() {
        let (ctx, mut rng) = ctx2(4, 3.0, 5);
        let u = random_fn(16, &mut rng);
        let steep = Contraction::smooth("2x", |x| 2.0 * x);
        assert!(matches!(
            check_contraction_operates(&u, &u, &ctx, &steep),
            Err(Error::InvalidContraction(_))
        ));
        let shifted = Contraction::smooth("x+1", |x| x + 1.0);
        assert!(check_contraction_operates(&u, &u, &ctx, &shifted).is_err());
        assert!(check_contraction_operates(&u, &u, &ctx, &Contraction::Truncation(-1.0)).is_err());
    }

    #[test]
    fn poincare_needs_a_mask() {
        let s = GridStructure::identity(GridDomain::unit(1, 5).unwrap());
        assert!(matches!(
            estimate_poincare(&s, &[false; 5]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn coercive_zero_sample() {
        let s = Arc::new(GridStructure::identity(GridDomain::unit(1, 16).unwrap()));
        let ctx = PFormContext::new(s, 3.0).unwrap();
        let r = check_coercive(&ctx, 0.05, &[GridFunction::zeros(16)]).unwrap();
        assert!(r.passed && r.lhs == 0.0 && r.rhs == 0.0);
    }

    #[test]
    fn d1_d2_with_equal_inputs_vanish() {
        let s = Arc::new(GridStructure::identity(GridDomain::unit(1, 9).unwrap()));
        let ctx = PFormContext::new(s, 2.0).unwrap();
        // tent: a pure potential for the interior node 4
        let u = GridFunction::new(vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0]);
        let outer: Vec<bool> = (0..9).map(|i| i == 0 || i == 8).collect();
        let r = check_d1_d2(&u, &u, 0.3, &outer, &ctx).unwrap();
        assert!(r.passed());
        assert_eq!(r.d1.rhs, 0.0);
        assert_eq!(r.d2.rhs, 0.0);
        let bad = GridFunction::new(vec![0.0, 0.5, 0.1, 0.5, 1.0, 0.75, 0.5, 0.25, 0.0]);
        assert!(matches!(
            check_d1_d2(&bad, &u, 0.0, &outer, &ctx),
            Err(Error::Precondition(_))
        ));
    }
}
