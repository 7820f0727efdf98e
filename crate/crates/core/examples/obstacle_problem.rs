//! p-harmonic obstacle problem: a membrane pinned to 0 on the boundary and
//! pushed up by a paraboloid obstacle.

use std::sync::Arc;

use dirichlet_p::grid::{GridDomain, GridFunction, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::{solve_obstacle, SolveOptions};

fn main() -> dirichlet_p::Result<()> {
    let d = GridDomain::new(&[[-1.0, 1.0], [-1.0, 1.0]], &[33, 33])?;
    let obstacle = GridFunction::from_fn(&d, |x| 0.3 - x[0] * x[0] - x[1] * x[1]);
    let boundary = GridFunction::constant(&d, 0.0).with_boundary_mask(&d)?;
    let s = Arc::new(GridStructure::identity(d));
    for p in [2.0, 3.0] {
        let ctx = PFormContext::new(s.clone(), p)?;
        let r = solve_obstacle(&ctx, &obstacle, &boundary, &SolveOptions::default())?;
        let contact = r
            .solution
            .values()
            .iter()
            .zip(obstacle.values())
            .filter(|(u, psi)| (*u - *psi).abs() < 1e-12)
            .count();
        println!(
            "p = {p}: {} iterations, projected residual {:.1e}, complementarity {:.1e}, contact nodes {contact}, max u = {:.6}",
            r.iterations,
            r.residual_norm,
            r.complementarity.unwrap_or(0.0),
            r.solution.values().iter().cloned().fold(f64::MIN, f64::max)
        );
    }
    Ok(())
}
