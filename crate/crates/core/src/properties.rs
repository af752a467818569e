//! Property tests of the invariants of each module.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{Control, ControlInnerProduct, Variant};
use crate::linalg::Operator;
use crate::model::{toy, DiscreteModel, FullOrderModel};
use crate::time_integration::{ObservationData, Problem};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Strong), Just(Variant::Weak), Just(Variant::Combined)]
}

fn random_control(model: &DiscreteModel, v: Variant, rng: &mut ChaCha8Rng) -> Control {
    let mut c = Control::zeros_for(model, v);
    for b in c.blocks_mut() {
        for x in b.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
    }
    c
}

fn toy_data(model: &DiscreteModel, rng: &mut ChaCha8Rng) -> ObservationData {
    let n = model.state_dim();
    let l = model.observation_dim();
    let k = model.num_steps();
    let mut vec = |len: usize| DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0));
    ObservationData {
        z_d: (0..k).map(|_| vec(l)).collect(),
        u_d0: Some(vec(n)),
        u_d: Some((0..k).map(|_| vec(n)).collect()),
        y0: Some(vec(n)),
        prior_offset: 0.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

mod linalg {
    use super::*;
    use crate::linalg::banded::{BandedCholesky, BandedLu};

    fn banded(n: usize, bw: usize, symmetric: bool, seed: u64) -> Operator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * bw as f64 + 1.0 + rng.random_range(0.0..1.0)));
            for j in (i + 1)..(i + 1 + bw).min(n) {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b = if symmetric { a } else { rng.random_range(-1.0..1.0) };
                t.push((i, j, a));
                t.push((j, i, b));
            }
        }
        Operator::from_triplets(n, n, &t)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lu_and_transpose_solves(n in 1usize..30, bw in 0usize..4, seed in any::<u64>()) {
            let a = banded(n, bw, false, seed);
            let lu = BandedLu::factor(&a).unwrap();
            let b = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin() + 1.0);
            let x = lu.solve(&b);
            prop_assert!((a.apply(&x) - &b).norm() <= 1e-12 * b.norm());
            let xt = lu.solve_transpose(&b);
            prop_assert!((a.apply_transpose(&xt) - &b).norm() <= 1e-12 * b.norm());
        }

        #[test]
        fn cholesky_solves_and_factors(n in 1usize..30, bw in 0usize..4, seed in any::<u64>()) {
            let a = banded(n, bw, true, seed);
            let ch = BandedCholesky::factor(&a).unwrap();
            let b = DVector::from_fn(n, |i, _| 1.0 / (1.0 + i as f64));
            prop_assert!((a.apply(&ch.solve(&b)) - &b).norm() <= 1e-12 * b.norm());
            // ‖L⁻¹b‖² = bᵀA⁻¹b
            let z = ch.solve_lower(&b);
            prop_assert!(rel(z.norm_squared(), b.dot(&ch.solve(&b))) <= 1e-12);
        }
    }
}

mod fem {
    use super::*;
    use crate::fem::{assemble_observation, assemble_operators, build_mesh, SensorBox};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn structured_mesh_counts(n in 1usize..40) {
            let mesh = build_mesh(2.0 / n as f64).unwrap();
            mesh.validate().unwrap();
            prop_assert_eq!(mesh.num_nodes(), (n + 1) * (n + 1));
            prop_assert_eq!(mesh.triangles.len(), 2 * n * n);
            prop_assert_eq!(mesh.dirichlet_nodes.len(), n + 1);
            let area: f64 = (0..mesh.triangles.len()).map(|t| mesh.signed_area(t)).sum();
            prop_assert!((area - 4.0).abs() < 1e-12);
        }

        #[test]
        fn operator_identities(n in 2usize..14) {
            let mesh = build_mesh(2.0 / n as f64).unwrap();
            let ops = assemble_operators(&mesh).unwrap();
            let ones = DVector::from_element(mesh.num_nodes(), 1.0);
            prop_assert!((ops.mass.form(&ones, &ones) - 4.0).abs() < 1e-12);
            prop_assert!(ops.diffusion.apply(&ones).amax() < 1e-12);
            let m = ops.mass.to_dense();
            prop_assert!((&m - m.transpose()).amax() == 0.0);
            let c = ops.convection.to_dense();
            prop_assert!((&c + c.transpose()).amax() == 0.0);
        }

        #[test]
        fn sensors_reproduce_linear_fields(
            n in 2usize..16,
            cx in -0.85f64..0.85,
            cy in -0.85f64..0.85,
            side in 0.01f64..0.3,
        ) {
            let mesh = build_mesh(2.0 / n as f64).unwrap();
            let c = assemble_observation(&mesh, &[SensorBox { center: [cx, cy], side }]).unwrap();
            let f = DVector::from_fn(mesh.num_nodes(), |i, _| {
                let [x, y] = mesh.nodes[i];
                1.0 + 2.0 * x - 3.0 * y
            });
            let avg = c.apply(&f)[0];
            prop_assert!((avg - (1.0 + 2.0 * cx - 3.0 * cy)).abs() < 1e-11, "{avg}");
        }
    }
}

mod time_integration {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gradient_hessian_and_quadratic_identity(v in variant(), mu in 1.0f64..4.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = toy::convection_diffusion_1d(7, 0.1, 5);
            let data = toy_data(&model, &mut rng);
            let p = Problem::new(&model, mu, &data, v).unwrap();
            let u = random_control(&model, v, &mut rng);
            let d = random_control(&model, v, &mut rng);
            let w = random_control(&model, v, &mut rng);
            let g = p.gradient(&u).unwrap();
            let h = 1e-4;
            let mut up = u.clone();
            up.axpy(h, &d);
            let mut um = u.clone();
            um.axpy(-h, &d);
            let fd = (p.cost(&up).unwrap() - p.cost(&um).unwrap()) / (2.0 * h);
            prop_assert!((fd - g.dot(&d)).abs() <= 1e-7 * (1.0 + g.dot(&d).abs()));

            let hd = p.hessian_apply(&d).unwrap();
            let hw = p.hessian_apply(&w).unwrap();
            prop_assert!(rel(hd.dot(&w), d.dot(&hw)) <= 1e-12);
            prop_assert!(d.dot(&hd) > 0.0);

            let mut ud = u.clone();
            ud.axpy(1.0, &d);
            let taylor = p.cost(&u).unwrap() + g.dot(&d) + 0.5 * d.dot(&hd);
            prop_assert!(rel(taylor, p.cost(&ud).unwrap()) <= 1e-12);
        }

        #[test]
        fn cost_is_non_negative_and_zero_at_consistent_data(v in variant(), mu in 1.0f64..4.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = toy::convection_diffusion_1d(6, 0.2, 4);
            let mut data = toy_data(&model, &mut rng);
            let u = random_control(&model, v, &mut rng);
            prop_assert!(Problem::new(&model, mu, &data, v).unwrap().cost(&u).unwrap() >= 0.0);

            let p = Problem::new(&model, mu, &data, v).unwrap();
            let prior = data.prior(&model, v);
            let y = p.solve_state(&prior).unwrap();
            data.z_d = (1..=model.num_steps()).map(|k| model.parts().observation.apply(y.at(k))).collect();
            let p = Problem::new(&model, mu, &data, v).unwrap();
            prop_assert!(p.cost(&prior).unwrap().abs() < 1e-20);
            prop_assert!(p.gradient(&prior).unwrap().blocks().iter().all(|b| b.amax() < 1e-12));
        }
    }
}

mod optimizer {
    use super::*;
    use crate::optimizer::{solve_4dvar, SolveOptions};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn solution_is_a_minimizer(v in variant(), mu in 1.0f64..4.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = toy::convection_diffusion_1d(6, 0.1, 6);
            let data = toy_data(&model, &mut rng);
            let opts = SolveOptions { record_iterations: true, ..SolveOptions::default() };
            let sol = solve_4dvar(&model, mu, &data, v, &opts).unwrap();
            let p = Problem::new(&model, mu, &data, v).unwrap();
            let ip = ControlInnerProduct::new(&model);
            let g = p.gradient(&sol.control).unwrap();
            prop_assert!(ip.dual_norm(&g) <= 1e-9 * sol.initial_residual.max(1e-300) + 1e-14);
            let mut d = random_control(&model, v, &mut rng);
            d.scale(1e-3);
            let mut u = sol.control.clone();
            u.axpy(1.0, &d);
            prop_assert!(p.cost(&u).unwrap() >= sol.cost);
            for pair in sol.iterations.windows(2) {
                prop_assert!(pair[1].model_decrease <= pair[0].model_decrease + 1e-14 * pair[0].model_decrease.abs());
            }
        }
    }
}

mod basis {
    use super::*;
    use crate::basis::pod::{pod_largest_mode, projection_error};
    use crate::basis::ReducedBasis;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn append_keeps_basis_orthonormal(count in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = toy::convection_diffusion_1d(10, 0.1, 2);
            let x = &model.parts().state_metric;
            let mut basis = Vec::new();
            for _ in 0..count {
                let v = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
                prop_assert!(ReducedBasis::append(&mut basis, x, &v, 1e-10));
            }
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((x.form(a, b) - expected).abs() < 1e-12);
                }
            }
            let combo = basis.iter().fold(DVector::zeros(10), |acc, b| acc + b * 0.3);
            prop_assert!(!ReducedBasis::append(&mut basis, x, &combo, 1e-8));
            prop_assert_eq!(basis.len(), count);
        }

        #[test]
        fn pod_mode_is_normalized_and_projection_error_orthogonal(k in 1usize..10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = toy::convection_diffusion_1d(9, 0.1, 2);
            let x = &model.parts().state_metric;
            let snaps: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(9, |_, _| rng.random_range(-1.0..1.0))).collect();
            let mode = pod_largest_mode(&snaps, x).unwrap();
            prop_assert!((x.form(&mode, &mode) - 1.0).abs() < 1e-10);
            // The largest mode captures at least the average snapshot energy.
            let captured: f64 = snaps.iter().map(|s| x.form(&mode, s).powi(2)).sum();
            let mean: f64 = snaps.iter().map(|s| x.form(s, s)).sum::<f64>() / k as f64;
            prop_assert!(captured >= mean * (1.0 - 1e-10));
            let basis = vec![mode];
            for s in &snaps {
                let e = projection_error(s, &basis, x);
                prop_assert!(x.form(&e, &basis[0]).abs() < 1e-10);
            }
        }
    }
}

mod certification {
    use super::*;
    use crate::basis::{greedy, GreedyConfig};
    use crate::certification::{bound_combined, bound_strong, bound_weak, dual_norms_dense, Constants};
    use crate::optimizer::SolveOptions;

    fn toy_fom() -> FullOrderModel {
        FullOrderModel {
            model: toy::convection_diffusion_1d(12, 0.1, 8),
            mu_domain: (1.0, 4.0),
            mu_ref: 2.0,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bound_is_the_positive_root_and_monotone(
            r in proptest::array::uniform4(0.0f64..10.0),
            alpha in 0.05f64..2.0,
            gb in 0.1f64..5.0,
            gc in 0.1f64..5.0,
            bump in 0.0f64..1.0,
        ) {
            let [ry, rp, ru0, ru] = r;
            let bounds = [
                bound_strong(ry, rp, ru0, alpha, gc).unwrap(),
                bound_weak(ry, rp, ru, alpha, gb, gc).unwrap(),
                bound_combined(ry, rp, ru0, ru, alpha, gb, gc).unwrap(),
            ];
            let bumped = [
                bound_strong(ry + bump, rp + bump, ru0 + bump, alpha, gc).unwrap(),
                bound_weak(ry + bump, rp + bump, ru + bump, alpha, gb, gc).unwrap(),
                bound_combined(ry + bump, rp + bump, ru0 + bump, ru + bump, alpha, gb, gc).unwrap(),
            ];
            for (b, bb) in bounds.iter().zip(&bumped) {
                let d = b.delta;
                prop_assert!(d >= 0.0 && d >= 2.0 * b.c1 - 1e-12);
                prop_assert!((d * d - 2.0 * b.c1 * d - b.c2).abs() <= 1e-10 * (1.0 + d * d));
                prop_assert!(bb.delta >= d);
            }
            prop_assert_eq!(bound_strong(0.0, 0.0, 0.0, alpha, gc).unwrap().delta, 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn reduced_solutions_are_certified(v in variant(), n in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fom = toy_fom();
            let data = toy_data(&fom.model, &mut rng);
            let constants = Constants::compute(&fom).unwrap();
            let cfg = GreedyConfig {
                variant: v,
                train: vec![1.0, 2.0, 3.0, 4.0],
                mu_start: 1.0,
                n_max: 3,
                tol: 1e-12,
                dependence_tol: 1e-8,
                solve: SolveOptions::default(),
            };
            let (rom, _) = greedy(&fom, &data, &constants, &cfg).unwrap();
            let rom = rom.truncated(&fom, &data, n).unwrap();
            let ip = ControlInnerProduct::new(&fom.model);
            for _ in 0..3 {
                let mu = rng.random_range(1.0..4.0);
                let full = crate::optimizer::solve_4dvar(&fom.model, mu, &data, v, &SolveOptions::default()).unwrap();
                let red = rom.solve_certified(mu, &SolveOptions::default()).unwrap();
                let err = ip.norm(&full.control.sub(&rom.lift_control(&fom, &red.result.control)));
                prop_assert!(red.certificate.delta >= err * (1.0 - 1e-8), "Δ = {} < error {}", red.certificate.delta, err);

                let s = &red.result;
                let dense = dual_norms_dense(&fom.model, &rom.basis, &data, mu, &s.control, &s.state, &s.adjoint).unwrap();
                prop_assert!(rel(dense.r_y, red.norms.r_y) <= 1e-8);
                prop_assert!(rel(dense.r_p, red.norms.r_p) <= 1e-8);
            }
        }
    }
}

mod experiments {
    use super::*;
    use crate::experiments::io::fmt_f64;
    use crate::experiments::{brent_minimize, random_parameters, synthesize_observations};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn brent_finds_interior_minimum(a in -5.0f64..5.0, width in 0.5f64..10.0, off in 0.05f64..0.95, c in -3.0f64..3.0) {
            let lo = a - off * width;
            let hi = lo + width;
            let m = brent_minimize(|x| Ok(2.0 * (x - a).powi(2) + c), lo, hi, 1e-8).unwrap();
            prop_assert!((m.x - a).abs() <= 1e-6, "{m:?}");
        }

        #[test]
        fn float_format_roundtrips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }

        #[test]
        fn test_parameters_are_seeded_and_in_domain(size in 1usize..30, seed in any::<u64>()) {
            let a = random_parameters((10.0, 50.0), size, seed);
            prop_assert_eq!(&a, &random_parameters((10.0, 50.0), size, seed));
            prop_assert!(a.iter().all(|m| (10.0..=50.0).contains(m)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn noise_is_the_exact_data_misfit(std in 0.0f64..0.5, seed in any::<u64>()) {
            let fom = FullOrderModel { model: toy::convection_diffusion_1d(8, 0.1, 6), mu_domain: (1.0, 4.0), mu_ref: 2.0 };
            let y0 = DVector::from_fn(8, |i, _| (i as f64).cos());
            let t = synthesize_observations(&fom, 2.5, &y0, std, seed).unwrap();
            for ((z, c), e) in t.z_d.iter().zip(&t.clean).zip(&t.noise) {
                prop_assert_eq!(z - c, e.clone());
            }
            let again = synthesize_observations(&fom, 2.5, &y0, std, seed).unwrap();
            prop_assert_eq!(&again.z_d, &t.z_d);
            if std == 0.0 {
                prop_assert_eq!(&t.z_d, &t.clean);
            }
        }
    }

    #[test]
    fn noise_sample_variance_matches() {
        let fom = FullOrderModel { model: toy::convection_diffusion_1d(15, 0.01, 200), mu_domain: (1.0, 4.0), mu_ref: 2.0 };
        let y0 = DVector::from_element(15, 0.1);
        let t = synthesize_observations(&fom, 2.0, &y0, 0.05, 17).unwrap();
        let all: Vec<f64> = t.noise.iter().flat_map(|e| e.iter().copied()).collect();
        assert_eq!(all.len(), 1000);
        let var = all.iter().map(|x| x * x).sum::<f64>() / all.len() as f64;
        assert!((var / 0.0025 - 1.0).abs() < 0.15, "{var}");
        let _ = DMatrix::<f64>::zeros(0, 0);
    }
}
