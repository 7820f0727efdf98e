//! The nonlinear p-form `E^p(u,v) = Σ_c Γ(u)^{(p−2)/2} Γ(u,v) m(c)`, its
//! potential `J_p(u) = (1/p) Σ_c Γ(u)^{p/2} m(c)` and the operator `L_p`.
//!
//! `L_p u` is represented as the exact algebraic gradient of `J_p`, so
//! `⟨L_p u, v⟩ = E^p(u,v)` is an identity of the code rather than an
//! approximation. For `p < 2` a regularization `eps > 0` is added inside
//! `Γ(u)` before the exponent; results in that regime are flagged as
//! regularized.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridStructure};
use crate::linalg::{self, CsrMatrix, Mat3};

/// Regularization used for `p < 2` unless overridden.
pub const DEFAULT_EPS: f64 = 1e-12;

/// A grid structure with exponent `p` and regularization policy.
#[derive(Clone, Debug)]
pub struct PFormContext {
    structure: Arc<GridStructure>,
    p: f64,
    eps: f64,
}

impl PFormContext {
    /// Context with the default regularization (`0` for `p ≥ 2`).
    pub fn new(structure: Arc<GridStructure>, p: f64) -> Result<Self> {
        let eps = if p < 2.0 { DEFAULT_EPS } else { 0.0 };
        Self::with_eps(structure, p, eps)
    }

    pub fn with_eps(structure: Arc<GridStructure>, p: f64, eps: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("need p > 1, got {p}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("need eps >= 0, got {eps}")));
        }
        if eps == 0.0 && p < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "p = {p} < 2 requires eps > 0"
            )));
        }
        Ok(Self { structure, p, eps })
    }

    pub fn structure(&self) -> &GridStructure {
        &self.structure
    }

    pub fn structure_arc(&self) -> Arc<GridStructure> {
        Arc::clone(&self.structure)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_regularized(&self) -> bool {
        self.p < 2.0
    }

    /// Same structure, different exponent (default regularization).
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.structure_arc(), p)
    }

    /// `(Γ + eps)^{(p−2)/2}` with the convention `0^0 = 1`.
    #[inline]
    pub(crate) fn weight(&self, gamma: f64) -> f64 {
        let s = gamma + self.eps;
        if self.p == 2.0 {
            1.0
        } else if s == 0.0 {
            if self.p > 2.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            s.powf(0.5 * (self.p - 2.0))
        }
    }

    /// Per-cell weights `(Γ(u)+eps)^{(p−2)/2}` and cell gradients of `u`.
    fn weights_and_gradients(&self, u: &[f64]) -> Vec<(f64, [f64; 3])> {
        let s = self.structure();
        s.per_cell(|c| {
            let g = s.cell_gradient(u, c);
            let gamma = s.gamma_of(c, &g, &g).max(0.0);
            (self.weight(gamma), g)
        })
    }

    /// Per-cell integrand `(Γ(u)+eps)^{(p−2)/2} Γ(u,v)` (density w.r.t. `m`).
    pub fn p_form_density(&self, u: &GridFunction, v: &GridFunction) -> Result<Vec<f64>> {
        let s = self.structure();
        s.check(u)?;
        s.check(v)?;
        let wg = self.weights_and_gradients(u.values());
        let dens = s.per_cell(|c| {
            let (w, gu) = wg[c];
            let gv = s.cell_gradient(v.values(), c);
            let cross = s.gamma_of(c, &gu, &gv);
            if w.is_infinite() {
                if self.p > 2.0 {
                    Err(Error::Overflow { cell: c })
                } else if cross == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::SingularIntegrand { cell: c })
                }
            } else {
                Ok(w * cross)
            }
        });
        dens.into_iter().collect()
    }

    /// `E^p(u,v)`.
    pub fn p_form(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let d = self.p_form_density(u, v)?;
        Ok(self.structure().integrate(&d))
    }

    /// `J_p(u) = (1/p) Σ ((Γ(u)+eps)^{p/2} − eps^{p/2}) m`.
    pub fn p_energy(&self, u: &GridFunction) -> Result<f64> {
        self.structure().check(u)?;
        Ok(self.energy_values(u.values()))
    }

    pub(crate) fn energy_values(&self, u: &[f64]) -> f64 {
        let s = self.structure();
        let base = self.eps.powf(0.5 * self.p);
        let dens = s.per_cell(|c| {
            let g = s.cell_gradient(u, c);
            let gamma = s.gamma_of(c, &g, &g).max(0.0);
            (gamma + self.eps).powf(0.5 * self.p) - base
        });
        s.integrate(&dens) / self.p
    }

    /// Coefficients `⟨L_p u, φ_j⟩` for every node `j`, ignoring masks.
    pub fn lp_coefficients(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.structure().check(u)?;
        self.lp_values(u.values())
    }

    pub(crate) fn lp_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        let s = self.structure();
        let n = s.dim();
        let wg = self.weights_and_gradients(u);
        let mut fluxes = Vec::with_capacity(wg.len());
        for (c, (w, g)) in wg.iter().enumerate() {
            let gg = linalg::matvec(s.field().matrix(c), g, n);
            let scale = if w.is_infinite() {
                if self.p > 2.0 {
                    return Err(Error::Overflow { cell: c });
                } else if g[..n].iter().all(|x| *x == 0.0) {
                    0.0
                } else {
                    return Err(Error::SingularIntegrand { cell: c });
                }
            } else {
                2.0 * w * s.domain().cell_measure(c)
            };
            let mut q = [0.0; 3];
            for i in 0..n {
                q[i] = scale * gg[i];
            }
            fluxes.push(q);
        }
        Ok(s.gather_fluxes(&fluxes))
    }

    /// `L_p u` as a functional on the nodes not pinned by `u`'s mask.
    pub fn apply_lp(&self, u: &GridFunction) -> Result<Functional> {
        let mut coefficients = self.lp_coefficients(u)?;
        for (c, &m) in coefficients.iter_mut().zip(u.mask()) {
            if m {
                *c = 0.0;
            }
        }
        Ok(Functional {
            coefficients,
            mask: u.mask().to_vec(),
        })
    }

    /// Hessian of `J_p` at `u` over all nodes.
    pub fn hessian(&self, u: &GridFunction) -> Result<CsrMatrix> {
        self.structure().check(u)?;
        Ok(self.hessian_values(u.values()))
    }

    pub(crate) fn hessian_values(&self, u: &[f64]) -> CsrMatrix {
        let s = self.structure();
        let n = s.dim();
        let p = self.p;
        let blocks: Vec<Mat3> = s.per_cell(|c| {
            let g = s.cell_gradient(u, c);
            let gmat = s.field().matrix(c);
            let m = s.domain().cell_measure(c);
            let gamma = s.gamma_of(c, &g, &g).max(0.0);
            let sv = gamma + self.eps;
            let mut h = [0.0; 9];
            if sv == 0.0 {
                if p == 2.0 {
                    h = linalg::scale(gmat, 2.0 * m);
                }
                return h;
            }
            let first = 2.0 * sv.powf(0.5 * (p - 2.0));
            let second = (p - 2.0) * sv.powf(0.5 * (p - 4.0));
            let gg = linalg::matvec(gmat, &g, n);
            for i in 0..n {
                for j in 0..n {
                    h[i * 3 + j] =
                        m * (first * gmat[i * 3 + j] + second * 4.0 * gg[i] * gg[j]);
                }
            }
            h
        });
        s.assemble(&blocks)
    }
}

/// A linear functional on nodal test functions; masked nodes carry no
/// coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    coefficients: Vec<f64>,
    mask: Vec<bool>,
}

impl Functional {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `⟨F, v⟩` summed over unmasked nodes.
    pub fn pair(&self, v: &GridFunction) -> Result<f64> {
        if v.len() != self.coefficients.len() {
            return Err(Error::ShapeMismatch {
                expected: self.coefficients.len(),
                found: v.len(),
            });
        }
        Ok(linalg::neumaier_sum(
            self.coefficients
                .iter()
                .zip(v.values())
                .zip(&self.mask)
                .filter(|(_, &m)| !m)
                .map(|((c, x), _)| c * x),
        ))
    }

    pub fn norm_inf(&self) -> f64 {
        linalg::norm_inf(&self.coefficients)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CoefficientField, GridDomain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx1(nodes: usize, p: f64) -> PFormContext {
        let s = GridStructure::identity(GridDomain::unit(1, nodes).unwrap());
        PFormContext::new(Arc::new(s), p).unwrap()
    }

    fn random_ctx(n: usize, p: f64, seed: u64) -> (PFormContext, ChaCha8Rng) {
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
    fn context_validation() {
        let s = Arc::new(GridStructure::identity(GridDomain::unit(1, 3).unwrap()));
        assert!(PFormContext::new(s.clone(), 1.0).is_err());
        assert!(PFormContext::with_eps(s.clone(), 1.5, 0.0).is_err());
        let c = PFormContext::new(s.clone(), 1.5).unwrap();
        assert!(c.is_regularized() && c.eps() == DEFAULT_EPS);
        assert_eq!(PFormContext::new(s, 3.0).unwrap().eps(), 0.0);
    }

    #[test]
    fn one_cell_examples() {
        let ctx = ctx1(9, 4.0);
        let x = GridFunction::from_fn(ctx.structure().domain(), |x| x[0]);
        assert!((ctx.p_form(&x, &x).unwrap() - 4.0).abs() < 1e-12);
        assert!((ctx.p_energy(&x).unwrap() - 1.0).abs() < 1e-12);
        let k = GridFunction::constant(ctx.structure().domain(), 2.0);
        assert_eq!(ctx.p_energy(&k).unwrap(), 0.0);
        assert!(ctx.apply_lp(&k).unwrap().coefficients().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn p_two_reduces_to_twice_the_energy() {
        let (ctx, mut rng) = random_ctx(6, 2.0, 11);
        let nodes = ctx.structure().node_count();
        for _ in 0..10 {
            let u = random_fn(nodes, &mut rng);
            let v = random_fn(nodes, &mut rng);
            let e = ctx.structure().energy(&u, &v).unwrap();
            assert!((ctx.p_form(&u, &v).unwrap() - 2.0 * e).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn pairing_with_lp_is_the_form() {
        let (ctx, mut rng) = random_ctx(7, 3.0, 5);
        let d = ctx.structure().domain().clone();
        let nodes = d.node_count();
        let u = random_fn(nodes, &mut rng)
            .with_boundary_mask(&d)
            .unwrap();
        let lp = ctx.apply_lp(&u).unwrap();
        for _ in 0..5 {
            let mut v = random_fn(nodes, &mut rng);
            for (i, m) in d.boundary_mask().into_iter().enumerate() {
                if m {
                    v.values_mut()[i] = 0.0;
                }
            }
            let a = lp.pair(&v).unwrap();
            let b = ctx.p_form(&u, &v).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn lp_homogeneity_and_euler_identity() {
        let (ctx, mut rng) = random_ctx(6, 3.0, 8);
        let u = random_fn(ctx.structure().node_count(), &mut rng);
        let t: f64 = 1.7;
        let a = ctx.lp_coefficients(&u.scale(t)).unwrap();
        let b = ctx.lp_coefficients(&u).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - t.powf(2.0) * y).abs() <= 1e-11 * y.abs().max(1.0));
        }
        let lpu = linalg::dot(&b, u.values());
        let jp = ctx.p_energy(&u).unwrap();
        assert!((lpu - 3.0 * jp).abs() <= 1e-11 * lpu.abs());
    }

    #[test]
    fn hessian_matches_finite_difference_of_lp() {
        let (ctx, mut rng) = random_ctx(5, 3.5, 21);
        let nodes = ctx.structure().node_count();
        let u = random_fn(nodes, &mut rng);
        let v = random_fn(nodes, &mut rng);
        let h = ctx.hessian(&u).unwrap().mul_vec(v.values());
        let delta = 1e-6;
        let plus = ctx.lp_coefficients(&u.axpy(delta, &v).unwrap()).unwrap();
        let minus = ctx.lp_coefficients(&u.axpy(-delta, &v).unwrap()).unwrap();
        let scale = linalg::norm_inf(&h);
        for j in 0..nodes {
            let fd = (plus[j] - minus[j]) / (2.0 * delta);
            assert!((fd - h[j]).abs() <= 1e-5 * scale, "node {j}: {fd} vs {}", h[j]);
        }
    }

    #[test]
    fn regularized_form_is_finite_on_flat_cells() {
        let s = Arc::new(GridStructure::identity(GridDomain::unit(1, 5).unwrap()));
        let ctx = PFormContext::new(s, 1.5).unwrap();
        let u = GridFunction::new(vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        let v = GridFunction::new(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(ctx.p_form(&u, &v).unwrap().is_finite());
        assert!(ctx.p_energy(&u).unwrap() > 0.0);
    }
}
