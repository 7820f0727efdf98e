//! One-dimensional condenser capacities against their closed forms:
//! K = [0.25, 0.75] in (0, 1) has cap_p = ½·32^(p/2).

use std::sync::Arc;

use dirichlet_p::capacity::{capacity, CondenserSpec, OuterSpec, ShapeSpec};
use dirichlet_p::grid::{GridDomain, GridStructure};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::solver::SolveOptions;

fn main() -> dirichlet_p::Result<()> {
    let spec = CondenserSpec {
        inner: ShapeSpec::Interval { a: 0.25, b: 0.75 },
        outer: OuterSpec::DomainBoundary,
    };
    for nodes in [5, 9, 33] {
        let d = GridDomain::unit(1, nodes)?;
        let s = Arc::new(GridStructure::identity(d));
        for p in [1.5, 2.0, 3.0, 5.0] {
            let ctx = PFormContext::new(s.clone(), p)?;
            let c = spec.build(s.domain())?;
            let r = capacity(&c, &ctx, &SolveOptions::default())?;
            // Two ramps of length 1/4 with Γ(e) = 2·4² = 32.
            let exact = 0.5 * 32f64.powf(0.5 * p);
            println!(
                "{nodes:>3} nodes, p = {p}: cap = {:.12}  closed form = {:.12}  rel.err = {:.1e}",
                r.value,
                exact,
                (r.value - exact).abs() / exact
            );
        }
    }
    Ok(())
}
