//! The p-form, its operator L_p and the p = 2 reduction on a random field.

use std::sync::Arc;

use dirichlet_p::grid::{CoefficientField, GridDomain, GridFunction, GridStructure};
use dirichlet_p::pform::PFormContext;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dirichlet_p::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = GridDomain::unit(2, 9)?;
    let field = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng)?;
    let s = Arc::new(GridStructure::new(d.clone(), field)?);

    let u = GridFunction::from_fn(&d, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
    let v = GridFunction::from_fn(&d, |x| x[0] * x[1]);

    let ctx2 = PFormContext::new(s.clone(), 2.0)?;
    println!("E²(u,v) = {:.15}", ctx2.p_form(&u, &v)?);
    println!("2E(u,v) = {:.15}", 2.0 * s.energy(&u, &v)?);

    for p in [1.5, 2.0, 3.0, 4.0] {
        let ctx = PFormContext::new(s.clone(), p)?;
        let t = 1.7;
        let scaled = ctx.p_form(&u.scale(t), &v)? / ctx.p_form(&u, &v)?;
        println!(
            "p = {p}: E^p(u,u) = {:.6}  J_p(u) = {:.6}  E^p(tu,v)/E^p(u,v) = {:.6} (t^(p-1) = {:.6})",
            ctx.p_form(&u, &u)?,
            ctx.p_energy(&u)?,
            scaled,
            t.powf(p - 1.0)
        );
    }

    let ctx = PFormContext::new(s, 3.0)?;
    let lu = ctx.apply_lp(&u)?;
    println!("<L_3 u, v> = {:.12}  E³(u,v) = {:.12}", lu.pair(&v)?, ctx.p_form(&u, &v)?);
    Ok(())
}
