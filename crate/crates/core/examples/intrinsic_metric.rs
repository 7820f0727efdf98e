//! Intrinsic distance of an anisotropic field and the cutoff functions
//! built from it.

use dirichlet_p::grid::{CoefficientField, GridDomain, GridStructure};
use dirichlet_p::intrinsic::{cutoff_rho, intrinsic_distance, max_cell_gamma, truncation_function, Stencil};

fn main() -> dirichlet_p::Result<()> {
    let d = GridDomain::unit(2, 41)?;
    let center = d.nearest_node(&[0.5, 0.5]);
    for (name, g) in [("identity", [1.0, 0.0, 0.0, 0.0, 1.0]), ("diag(4, 1)", [4.0, 0.0, 0.0, 0.0, 1.0])] {
        let mut m = [0.0; 9];
        m[..5].copy_from_slice(&g);
        let field = CoefficientField::from_matrices(&d, vec![m; d.cell_count()], g[4].min(g[0]), g[4].max(g[0]))?;
        let s = GridStructure::new(d.clone(), field)?;
        for stencil in [Stencil::Moore, Stencil::Knight] {
            let rho = intrinsic_distance(center, &s, stencil)?;
            let east = rho.distances[d.nearest_node(&[0.9, 0.5])];
            let north = rho.distances[d.nearest_node(&[0.5, 0.9])];
            let cut = cutoff_rho(center, 0.2, &s, stencil)?;
            println!(
                "{name:<11} {stencil:?}: ρ(east 0.4) = {east:.5}  ρ(north 0.4) = {north:.5}  max Γ(cutoff) = {:.5}  (1+δ∇)² = {:.5}",
                max_cell_gamma(&s, &cut)?,
                (1.0 + rho.gradient_metrication).powi(2)
            );
        }
        let phi = truncation_function(center, 0.05, 0.1, &s, Stencil::Knight)?;
        let ones = phi.values().iter().filter(|v| **v == 1.0).count();
        let support = phi.values().iter().filter(|v| **v > 0.0).count();
        println!("{name:<11} truncation function: {ones} nodes at 1, support {support} nodes");
    }
    println!("Euclidean/√2 at distance 0.4: {:.5}", 0.4 / 2f64.sqrt());
    Ok(())
}
