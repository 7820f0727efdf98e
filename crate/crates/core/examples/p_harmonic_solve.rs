//! p-harmonic extension of Re z² from the boundary of the unit square,
//! with the three minimisation methods.

use std::sync::Arc;
use std::time::Instant;

use dirichlet_p::grid::{GridDomain, GridFunction, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::{harmonicity_residual, interior_region, solve_dirichlet, Method, SolveOptions};

fn main() -> dirichlet_p::Result<()> {
    let d = GridDomain::new(&[[-1.0, 1.0], [-1.0, 1.0]], &[41, 41])?;
    let boundary = GridFunction::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1]).with_boundary_mask(&d)?;
    let s = Arc::new(GridStructure::identity(d));
    for p in [1.5, 2.0, 4.0] {
        let ctx = PFormContext::new(s.clone(), p)?;
        for method in [Method::NewtonRegularized, Method::Lbfgs, Method::GradientArmijo] {
            let opts = SolveOptions::default().with_method(method).with_tol(1e-8);
            let t = Instant::now();
            match solve_dirichlet(&ctx, &boundary, &opts) {
                Ok(r) => println!(
                    "p = {p:<3} {method:?}: {} iterations, residual {:.1e}, J_p = {:.10} ({:.2?})",
                    r.iterations,
                    harmonicity_residual(&r.solution, &interior_region(&ctx), &ctx)?,
                    r.energy_trace.last().unwrap(),
                    t.elapsed()
                ),
                Err(e) => println!("p = {p:<3} {method:?}: {e}"),
            }
        }
    }
    Ok(())
}
