//! Caccioppoli inequalities for certified p-harmonic functions: the
//! extensions of Re z² and of ln|z| (with the origin pinned) from the
//! boundary of [−1, 1]².

use std::sync::Arc;

use dirichlet_p::capacity::ShapeSpec;
use dirichlet_p::grid::{GridDomain, GridFunction, GridStructure};
use dirichlet_p::intrinsic::{
    check_caccioppoli, check_caccioppoli_ball, check_caccioppoli_euclidean, euclidean_bump, truncation_function,
    CaccioppoliOptions, CaccioppoliReport,
};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::{solve_dirichlet, SolveOptions};

fn show(name: &str, r: &CaccioppoliReport) {
    println!(
        "  {name:<10} {:<9} lhs {:.6} rhs {:.6} constant {:.4} slack {:+.3e} tol {:.2e} residual {:.1e} {}",
        r.kind, r.lhs, r.rhs, r.constant_used, r.slack, r.tolerance, r.residual, r.passed
    );
}

fn main() -> dirichlet_p::Result<()> {
    let d = GridDomain::new(&[[-1.0, 1.0], [-1.0, 1.0]], &[65, 65])?;
    let s = Arc::new(GridStructure::identity(d.clone()));
    let puncture = ShapeSpec::Disk { center: vec![0.0, 0.0], radius: 0.1 }.to_mask(&d)?;
    let mut log_mask = d.boundary_mask();
    for (m, p) in log_mask.iter_mut().zip(&puncture) {
        *m |= p;
    }
    let inputs = [
        ("Re z²", GridFunction::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1]).with_boundary_mask(&d)?),
        ("ln|z|", GridFunction::from_fn(&d, |x| x[0].hypot(x[1]).max(1e-3).ln()).with_mask(log_mask)?),
    ];
    let opts = CaccioppoliOptions::default();
    let center = [0.45, 0.4];
    let x0 = d.nearest_node(&center);
    let (r, big_r) = (0.1, 0.25);
    for p in [2.0, 3.0] {
        let ctx = PFormContext::new(s.clone(), p)?;
        println!("p = {p}");
        for (name, data) in &inputs {
            let u = solve_dirichlet(&ctx, data, &SolveOptions::default())?.solution;
            let u = GridFunction::new(u.into_values());
            let phi = truncation_function(x0, r, big_r, &s, opts.stencil)?;
            show(name, &check_caccioppoli(&u, &phi, None, &ctx, &opts)?);
            show(name, &check_caccioppoli_ball(&u, x0, r, big_r, None, &ctx, &opts)?);
            let bump = euclidean_bump(&d, &center, r, big_r)?;
            show(name, &check_caccioppoli_euclidean(&u, &bump, None, 1.0, 1.0, &ctx, &opts)?);
        }
    }
    Ok(())
}
