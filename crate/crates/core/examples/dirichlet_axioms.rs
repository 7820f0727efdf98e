//! Sector condition, monotonicity, contractions and the D1/D2 axioms for
//! the p-form of a random elliptic field.

use std::sync::Arc;

use dirichlet_p::capacity::{capacity, Condenser, OuterSpec, ShapeSpec};
use dirichlet_p::checks::{check_contraction_operates, check_d1_d2, check_monotone, check_sector, Contraction};
use dirichlet_p::grid::{CoefficientField, GridDomain, GridFunction, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::report::CheckReport;
use dirichlet_p::solver::SolveOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn show(r: &CheckReport) {
    println!("{:<28} lhs {:+.6e} rhs {:+.6e} slack {:+.2e} tol {:.1e} {}", r.check, r.lhs, r.rhs, r.slack, r.tolerance, r.passed);
}

fn main() -> dirichlet_p::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = GridDomain::unit(2, 17)?;
    let field = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng)?;
    let s = Arc::new(GridStructure::new(d.clone(), field)?);
    let ctx = PFormContext::new(s, 3.0)?;
    let random = |rng: &mut ChaCha8Rng| GridFunction::new((0..d.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect());

    let (u, v) = (random(&mut rng), random(&mut rng));
    show(&check_sector(&u, &v, &ctx)?);
    show(&check_monotone(&u, &v, &ctx)?);
    for kind in [Contraction::Unit, Contraction::Truncation(0.5), Contraction::NegativePart, Contraction::tanh()] {
        show(&check_contraction_operates(&u.scale(1.5), &v, &ctx, &kind)?);
    }

    // Level-set-aligned input: u constant on every cell that meets a kink of T.
    let steps = GridFunction::from_fn(&d, |x| if x[0] < 0.5 { 2.0 } else { -1.0 });
    show(&check_contraction_operates(&steps, &v, &ctx, &Contraction::Unit)?);

    let outer = OuterSpec::DomainBoundary.to_mask(&d)?;
    let potential = |center: [f64; 2]| -> dirichlet_p::Result<GridFunction> {
        let k = ShapeSpec::Disk { center: center.to_vec(), radius: 0.15 }.to_mask(&d)?;
        let r = capacity(&Condenser::new(&d, k, outer.clone())?, &ctx, &SolveOptions::default())?;
        Ok(r.potential)
    };
    let (e1, e2) = (potential([0.4, 0.5])?, potential([0.6, 0.45])?);
    let axioms = check_d1_d2(&e1, &e2, 0.3, &outer, &ctx)?;
    show(&axioms.d1);
    show(&axioms.d2);
    Ok(())
}
