//! Capacity of the annulus condenser between disks of radius 0.25 and 0.75.

use std::sync::Arc;
use std::time::Instant;

use dirichlet_p::capacity::{capacity, CondenserSpec, OuterSpec, ShapeSpec};
use dirichlet_p::grid::{GridDomain, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::SolveOptions;

fn main() -> dirichlet_p::Result<()> {
    let exact = 4.0 * std::f64::consts::PI / 3f64.ln();
    let spec = CondenserSpec {
        inner: ShapeSpec::Disk { center: vec![0.0, 0.0], radius: 0.25 },
        outer: OuterSpec::OutsideDisk { center: vec![0.0, 0.0], radius: 0.75 },
    };
    for nodes in [32, 64, 128, 256] {
        let t = Instant::now();
        let d = GridDomain::new(&[[-0.75, 0.75], [-0.75, 0.75]], &[nodes, nodes])?;
        let ctx = PFormContext::new(Arc::new(GridStructure::identity(d)), 2.0)?;
        let c = spec.build(ctx.structure().domain())?;
        let r = capacity(&c, &ctx, &SolveOptions::default())?;
        println!(
            "{nodes:>4}²  cap = {:.6}  rel.err = {:+.4}%  vi = {:.1e}  max e_K = {:.12}  ({:.2?})",
            r.value,
            100.0 * (r.value - exact) / exact,
            r.vi_residual,
            r.diagnostics.max_potential,
            t.elapsed()
        );
    }
    println!("limit 4π/ln 3 = {exact:.6}");
    Ok(())
}
