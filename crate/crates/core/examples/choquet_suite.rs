//! Choquet-capacity properties and the subadditivity of capacity increments on a
//! suite of node sets, in one and two dimensions.

use std::sync::Arc;

use dirichlet_p::capacity::{check_choquet, check_increment_subadditivity, OuterSpec, ShapeSpec};
use dirichlet_p::grid::{GridDomain, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::SolveOptions;

fn run(d: GridDomain, p: f64, sets: &[ShapeSpec], e: &[ShapeSpec], f: &[ShapeSpec]) -> dirichlet_p::Result<()> {
    let masks = |s: &[ShapeSpec]| s.iter().map(|x| x.to_mask(&d)).collect::<dirichlet_p::Result<Vec<_>>>();
    let outer = OuterSpec::DomainBoundary.to_mask(&d)?;
    let ctx = PFormContext::new(Arc::new(GridStructure::identity(d.clone())), p)?;
    let opts = SolveOptions::default();
    let r = check_choquet(&masks(sets)?, &outer, &ctx, &opts)?;
    println!(
        "dim {} p = {p}: {} checks, passed = {}, base tol = {:.1e}, lattice tol = {:.1e}",
        d.dim(),
        r.checks.len(),
        r.passed,
        r.tolerance.base,
        r.tolerance.lattice()
    );
    for c in &r.checks {
        println!("  {:<40} slack {:+.3e}  tol {:.1e}  {}", c.check, c.slack, c.tolerance, c.passed);
    }
    let l = check_increment_subadditivity(&masks(e)?, &masks(f)?, &outer, &ctx, &opts)?;
    println!("  increments: lhs {:.6} rhs {:.6} passed {}", l.lhs, l.rhs, l.passed);
    Ok(())
}

fn main() -> dirichlet_p::Result<()> {
    let iv = |a, b| ShapeSpec::Interval { a, b };
    run(
        GridDomain::unit(1, 33)?,
        3.0,
        &[iv(0.25, 0.5), iv(0.375, 0.75), iv(0.125, 0.25)],
        &[iv(0.25, 0.5), iv(0.5, 0.75)],
        &[iv(0.3125, 0.4375), iv(0.5625, 0.625)],
    )?;
    let disk = |x: f64, y: f64, r: f64| ShapeSpec::Disk { center: vec![x, y], radius: r };
    run(
        GridDomain::unit(2, 33)?,
        2.0,
        &[disk(0.4, 0.5, 0.15), disk(0.6, 0.5, 0.15), disk(0.5, 0.7, 0.1)],
        &[disk(0.35, 0.5, 0.15), disk(0.65, 0.5, 0.15)],
        &[disk(0.35, 0.5, 0.08), disk(0.65, 0.5, 0.05)],
    )
}
