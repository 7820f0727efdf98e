use std::sync::Arc;

use dirichlet_p::checks::{check_monotone, check_sector};
use dirichlet_p::grid::{CoefficientField, GridDomain, GridFunction, GridStructure};
use dirichlet_p::intrinsic::{intrinsic_distance, Stencil};
use dirichlet_p::pform::PFormContext;
use dirichlet_p::quasiregular::{Mapping, QrAnalysis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn structure(dim: usize, nodes: usize, seed: u64) -> Arc<GridStructure> {
    let d = GridDomain::unit(dim, nodes).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CoefficientField::random_elliptic(&d, 0.5, 2.0, &mut rng).unwrap();
    Arc::new(GridStructure::new(d, g).unwrap())
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

const NODES: usize = 5;

fn case() -> impl Strategy<Value = (usize, u64, Vec<f64>, Vec<f64>)> {
    (1usize..=2, any::<u64>()).prop_flat_map(|(dim, seed)| {
        let n = NODES.pow(dim as u32);
        (Just(dim), Just(seed), values(n), values(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear((dim, seed, u, v) in case(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = structure(dim, NODES, seed);
        let (u, v) = (GridFunction::new(u), GridFunction::new(v));
        let w = u.scale(a).axpy(b, &v).unwrap();
        let (gu, gv, gw) = (s.gradient(&u).unwrap(), s.gradient(&v).unwrap(), s.gradient(&w).unwrap());
        for k in 0..gw.as_slice().len() {
            let expect = a * gu.as_slice()[k] + b * gv.as_slice()[k];
            prop_assert!((gw.as_slice()[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()) / s.domain().h_max());
        }
    }

    #[test]
    fn carre_du_champ_is_symmetric_and_cauchy_schwarz((dim, seed, u, v) in case()) {
        let s = structure(dim, NODES, seed);
        let (u, v) = (GridFunction::new(u), GridFunction::new(v));
        let uv = s.carre_du_champ(&u, &v).unwrap();
        let vu = s.carre_du_champ(&v, &u).unwrap();
        let (gu, gv) = (s.gamma(&u).unwrap(), s.gamma(&v).unwrap());
        let gs = s.gamma(&u.add(&v).unwrap()).unwrap();
        for c in 0..uv.len() {
            prop_assert!((uv[c] - vu[c]).abs() <= 1e-12 * uv[c].abs().max(1.0));
            prop_assert!(gu[c] >= 0.0);
            let bound = (gu[c] * gv[c]).sqrt();
            prop_assert!(uv[c].abs() <= bound * (1.0 + 1e-12) + 1e-300);
            prop_assert!(gs[c].sqrt() <= (gu[c].sqrt() + gv[c].sqrt()) * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn lattice_identities(u in values(16), v in values(16), n in 0.1f64..3.0) {
        let (u, v) = (GridFunction::new(u), GridFunction::new(v));
        let sum = u.min(&v).unwrap().add(&u.max(&v).unwrap()).unwrap();
        let direct = u.add(&v).unwrap();
        for (a, b) in sum.values().iter().zip(direct.values()) {
            prop_assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
        prop_assert!(u.unit_truncation().values().iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(u.truncate(n).values().iter().all(|x| x.abs() <= n));
        let pn = u.positive_part().add(&u.negative_part()).unwrap();
        for (a, b) in pn.values().iter().zip(u.values()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn dp_norm_is_a_norm((dim, seed, u, v) in case(), p in 1.1f64..5.0, t in -4.0f64..4.0) {
        let s = structure(dim, NODES, seed);
        let (u, v) = (GridFunction::new(u), GridFunction::new(v));
        let nu = s.dp_norm(&u, p).unwrap();
        let nv = s.dp_norm(&v, p).unwrap();
        let nw = s.dp_norm(&u.add(&v).unwrap(), p).unwrap();
        prop_assert!(nw <= (nu + nv) * (1.0 + 1e-12));
        let nt = s.dp_norm(&u.scale(t), p).unwrap();
        prop_assert!((nt - t.abs() * nu).abs() <= 1e-12 * nu.max(1.0) * t.abs().max(1.0));
    }

    #[test]
    fn p_form_homogeneity_and_sector((dim, seed, u, v) in case(), p in prop::sample::select(vec![2.0, 2.5, 3.0, 4.0]), t in 0.01f64..5.0) {
        let ctx = PFormContext::new(structure(dim, NODES, seed), p).unwrap();
        let (u, v) = (GridFunction::new(u), GridFunction::new(v));
        let a = ctx.p_form(&u.scale(t), &v).unwrap();
        let b = t.powf(p - 1.0) * ctx.p_form(&u, &v).unwrap();
        let scale = t.powf(p - 1.0) * ctx.p_form(&u, &u).unwrap().max(ctx.p_form(&v, &v).unwrap()).max(1.0);
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        let sector = check_sector(&u, &v, &ctx).unwrap();
        prop_assert!(sector.passed, "{:?}", sector);
        let mono = check_monotone(&u, &v, &ctx).unwrap();
        prop_assert!(mono.passed, "{:?}", mono);
    }

    #[test]
    fn intrinsic_distance_is_a_metric(seed in any::<u64>(), a in 0usize..49, b in 0usize..49, c in 0usize..49) {
        let s = structure(2, 7, seed);
        let st = Stencil::Knight;
        let (da, db) = (intrinsic_distance(a, &s, st).unwrap(), intrinsic_distance(b, &s, st).unwrap());
        prop_assert!((da.distances[b] - db.distances[a]).abs() <= 1e-12);
        prop_assert!(da.distances[c] <= da.distances[b] + db.distances[c] + 1e-12);
        prop_assert_eq!(da.distances[a], 0.0);
    }

    #[test]
    fn theta_has_unit_determinant_for_linear_maps(m in prop::collection::vec(-3.0f64..3.0, 4)) {
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assume!(det > 0.05);
        let map = Mapping::linear(&[vec![m[0], m[1]], vec![m[2], m[3]]]).unwrap();
        let d = GridDomain::new(&[[-1.0, 1.0], [-1.0, 1.0]], &[5, 5]).unwrap();
        let a = QrAnalysis::new(&map, &d, Some(0.0)).unwrap();
        let s = a.summary();
        prop_assert!(s.max_det_theta_error <= 1e-10);
        prop_assert!(s.k_outer >= 1.0 - 1e-12 && (s.k_outer - s.k_inner).abs() <= 1e-9 * s.k_outer);
    }
}
