//! Dilatations, θ_f and harmonicity of components for the built-in
//! mappings on [−1, 1]².

use dirichlet_p::grid::GridDomain;
use dirichlet_p::quasiregular::{
    induced_structure, verify_component_harmonicity, HarmonicityOptions, Mapping, QrAnalysis,
};

fn main() -> dirichlet_p::Result<()> {
    let extent = [[-1.0, 1.0], [-1.0, 1.0]];
    let d = GridDomain::new(&extent, &[65, 65])?;
    let maps = [
        ("z²", Mapping::Power { k: 2 }),
        ("z³", Mapping::Power { k: 3 }),
        ("1/z", Mapping::Power { k: -1 }),
        ("radial a=3", Mapping::Radial { a: 3.0 }),
        ("radial a=0.5", Mapping::Radial { a: 0.5 }),
        ("linear", Mapping::linear(&[vec![2.0, 0.5], vec![0.0, 1.0]])?),
    ];
    for (name, m) in &maps {
        let a = QrAnalysis::new(m, &d, None)?;
        let s = a.summary();
        let ctx = induced_structure(&a, &d)?;
        println!(
            "{name:<13} K_O = {:.10}  K_I = {:.10}  α = {:.6}  β = {:.6}  |det θ − 1| ≤ {:.1e}  excluded {} cells  (p = {})",
            s.k_outer,
            s.k_inner,
            s.alpha,
            s.beta,
            s.max_det_theta_error,
            s.excluded_cells,
            ctx.p()
        );
        if m.is_analytic() {
            // f(0) = 0 for the linear map, so ln|f| needs a puncture there too.
            let puncture = matches!(m, Mapping::Linear { .. }).then_some(0.1);
            let opts = HarmonicityOptions { puncture, ..Default::default() };
            let h = verify_component_harmonicity(m, &extent, [64, 128], &opts)?;
            for c in &h.components {
                let order = c.order.map_or("exact".to_string(), |o| format!("order {o:.2}"));
                println!("    {:<6} residual {:.2e} -> {:.2e}  {order}", c.name, c.coarse, c.fine);
            }
        }
    }
    Ok(())
}
