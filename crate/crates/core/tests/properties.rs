use proptest::prelude::*;

use hardy_flow::evolution::{imex_step, stationary_residual};
use hardy_flow::fields::gaussian_poly;
use hardy_flow::hardy::hardy_quotient;
use hardy_flow::linalg::solve_spd_tridiagonal;
use hardy_flow::selfsimilar::{from_selfsimilar, to_selfsimilar, RadialInterpolant};
use hardy_flow::variational::{
    classify, fibering_energy, high_energy_condition, nehari_scaling, ray_peak, WellConstants,
};
use hardy_flow::{evaluate, ModelParams, RadialField, RadialGrid};

fn grid(dim: usize) -> RadialGrid {
    RadialGrid::new(dim, 12.0, 256).unwrap()
}

prop_compose! {
    fn smooth_field()(
        c0 in 0.5f64..1.5,
        negative in any::<bool>(),
        rest in prop::collection::vec(-1.0f64..1.0, 0..=3),
        decay in 0.3f64..1.0,
        amp in 0.05f64..4.0,
    ) -> (Vec<f64>, f64) {
        let mut coeffs = vec![if negative { -c0 } else { c0 }];
        coeffs.extend(rest);
        for c in &mut coeffs {
            *c *= amp;
        }
        (coeffs, decay)
    }
}

fn field_on(g: &RadialGrid, (coeffs, decay): &(Vec<f64>, f64)) -> RadialField {
    gaussian_poly(g, coeffs, *decay).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functionals_scale_homogeneously(spec in smooth_field(), s in -3.0f64..3.0, dim in 3usize..6) {
        let g = grid(dim);
        let params = ModelParams::new(dim, ModelParams::mu_max(dim) / 2.0).unwrap();
        let v = field_on(&g, &spec);
        let rep = evaluate(&g, &v, &params, Some(1.5));
        let scaled = evaluate(&g, &v.scaled(s), &params, Some(1.5));
        let formula = rep.at_scale(s, &params);
        prop_assert!((scaled.a_val - s * s * rep.a_val).abs() <= 1e-12 * rep.a_val.abs().max(1.0) * s * s + 1e-300);
        prop_assert!((scaled.b_val - formula.b_val).abs() <= 1e-12 * formula.b_val.max(1e-300));
        prop_assert!((scaled.energy - (0.5 * scaled.a_val - scaled.b_val / params.two_star)).abs() <= 1e-12 * (scaled.a_val.abs() + scaled.b_val));
        prop_assert_eq!(scaled.nehari, scaled.a_val - scaled.b_val);
        prop_assert_eq!(scaled.nehari_delta.unwrap().1, 1.5 * scaled.a_val - scaled.b_val);
    }

    #[test]
    fn weighted_coercivity_holds(spec in smooth_field(), frac in 0.0f64..=1.0) {
        let g = grid(3);
        let params = ModelParams::new(3, frac * ModelParams::mu_max(3)).unwrap();
        let v = field_on(&g, &spec);
        let rep = evaluate(&g, &v, &params, None);
        prop_assert!(rep.a_val >= 0.25 * rep.l2_sq * (1.0 - 1e-3));
        prop_assert!(rep.hardy_sq <= 4.0 * rep.grad_sq);
        prop_assert!(hardy_quotient(&g, &v).unwrap() <= 4.0);
    }

    #[test]
    fn nehari_projection_is_exact(spec in smooth_field(), delta in 0.05f64..3.0) {
        let g = grid(3);
        let params = ModelParams::new(3, 0.0).unwrap();
        let v = field_on(&g, &spec);
        let rep = evaluate(&g, &v, &params, None);
        let s = nehari_scaling(&rep, delta, &params).unwrap();
        let on = evaluate(&g, &v.scaled(s), &params, None);
        let scale = (delta * on.a_val).abs().max(on.b_val);
        prop_assert!(on.nehari_at(delta).abs() <= 1e-9 * scale);
    }

    #[test]
    fn fibering_map_has_a_single_peak(spec in smooth_field()) {
        let g = grid(3);
        let params = ModelParams::new(3, 0.0).unwrap();
        let rep = evaluate(&g, &field_on(&g, &spec), &params, None);
        let peak = ray_peak(&rep, &params).unwrap();
        let e = |s: f64| fibering_energy(&rep, s, &params);
        let below: Vec<f64> = (1..=50).map(|k| e(peak.s_star * k as f64 / 51.0)).collect();
        prop_assert!(below.windows(2).all(|w| w[1] > w[0]));
        let above: Vec<f64> = (0..50).map(|k| e(peak.s_star * (1.0 + 2.0 * (k as f64 + 1.0) / 50.0))).collect();
        prop_assert!(above.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((e(peak.s_star) - peak.peak).abs() <= 1e-10 * peak.peak);
        prop_assert!(rep.at_scale(0.9 * peak.s_star, &params).nehari > 0.0);
        prop_assert!(rep.at_scale(1.1 * peak.s_star, &params).nehari < 0.0);
    }

    #[test]
    fn well_flags_are_consistent(spec in smooth_field(), s_k in 3.0f64..22.0, delta in 0.1f64..2.9) {
        let g = grid(3);
        let params = ModelParams::new(3, 0.0).unwrap();
        let consts = WellConstants::from_sk(&params, s_k);
        let rep = evaluate(&g, &field_on(&g, &spec), &params, None);
        let c = classify(&rep, &consts, delta, None);
        let count = [c.in_nehari_plus, c.in_nehari_minus, c.on_nehari].iter().filter(|b| **b).count();
        prop_assert_eq!(count, 1);
        if c.in_w_delta {
            prop_assert!(rep.nehari_at(delta) > 0.0 && rep.energy < consts.d_of(delta));
        }
        if c.in_v_delta {
            prop_assert!(rep.nehari_at(delta) < 0.0 && rep.energy < consts.d_of(delta));
        }
        prop_assert!(!(c.in_w_delta && c.in_v_delta));
        if let Some((d1, d2)) = c.delta_roots {
            prop_assert!(d1 < 1.0 && 1.0 < d2);
            prop_assert!((consts.d_of(d1) - rep.energy).abs() < 1e-7 * consts.depth);
        }
        if high_energy_condition(&rep, &params) {
            prop_assert!(c.in_nehari_minus);
        }
    }

    #[test]
    fn depth_family_rises_then_falls(s_k in 0.5f64..50.0, dim in 3usize..7) {
        let params = ModelParams::new(dim, 0.0).unwrap();
        let c = WellConstants::from_sk(&params, s_k);
        let table = c.tabulate(400);
        let peak = table.iter().position(|row| (row.0 - 1.0).abs() < 1e-9);
        let up_to = table.iter().take_while(|row| row.0 <= 1.0 + 1e-12).count();
        prop_assert!(table[..up_to].windows(2).all(|w| w[1].1 > w[0].1));
        prop_assert!(table[up_to..].windows(2).all(|w| w[1].1 < w[0].1));
        prop_assert!(c.d_of(c.delta_max()).abs() <= 1e-12 * c.depth);
        prop_assert!((c.d_of(1.0) - c.depth).abs() <= 1e-12 * c.depth);
        if let Some(i) = peak {
            prop_assert!(table.iter().all(|row| row.1 <= table[i].1));
        }
    }

    #[test]
    fn imex_steps_never_raise_the_energy(spec in smooth_field(), dt in 1e-4f64..1e-2, frac in 0.0f64..=1.0) {
        let g = grid(3);
        let params = ModelParams::new(3, frac * ModelParams::mu_max(3)).unwrap();
        let v = field_on(&g, &spec);
        if v.sup_norm().powi(4) * dt > 0.5 {
            return Ok(());
        }
        let next = imex_step(&g, &v, &params, dt).unwrap();
        let e0 = evaluate(&g, &v, &params, None).energy;
        let e1 = evaluate(&g, &next, &params, None).energy;
        let diss = g.l2_sq(&next.add_scaled(-1.0, &v)) / dt;
        prop_assert!(e1 + diss <= e0 + 1e-10 * (e0.abs() + 1.0));
    }

    #[test]
    fn stationary_residual_is_even_in_the_field(spec in smooth_field()) {
        let g = grid(4);
        let params = ModelParams::new(4, 0.0).unwrap();
        let v = field_on(&g, &spec);
        let r1 = stationary_residual(&g, &v, &params);
        let r2 = stationary_residual(&g, &v.scaled(-1.0), &params);
        prop_assert!((r1 - r2).abs() <= 1e-12 * r1);
    }

    #[test]
    fn selfsimilar_round_trip(spec in smooth_field(), s in 0.0f64..3.0) {
        let g = RadialGrid::new(3, 12.0, 2048).unwrap();
        // Odd powers of r put a cone point at the origin; keep the even ones.
        let (coeffs, decay) = &spec;
        let even: Vec<f64> = coeffs.iter().enumerate().flat_map(|(k, &c)| {
            if k % 2 == 0 { vec![c, 0.0] } else { vec![] }
        }).collect();
        let u = gaussian_poly(&g, &even, *decay).unwrap();
        let v = to_selfsimilar(&g, &u, s.exp_m1(), &g).unwrap();
        let back = from_selfsimilar(&g, &v.field, s, &g).unwrap();
        prop_assert!(back.covered);
        let err = back.field.values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-6 * u.sup_norm().max(1.0), "{}", err);
        let twice = to_selfsimilar(&g, &u.scaled(2.0), s.exp_m1(), &g).unwrap();
        let doubled = v.field.scaled(2.0);
        prop_assert_eq!(twice.field.values(), doubled.values());
    }

    #[test]
    fn interpolant_preserves_monotone_data(decay in 0.05f64..2.0, r in 0.0f64..12.0) {
        let g = grid(3);
        let v = RadialField::from_fn(&g, |x| (-decay * x * x).exp()).unwrap();
        let it = RadialInterpolant::new(&g, &v);
        let r2 = (r + 0.013).min(12.0);
        prop_assert!(it.eval(r2) <= it.eval(r) + 1e-15);
        prop_assert!(it.eval(r) >= -1e-15);
    }

    #[test]
    fn tridiagonal_solver_inverts_spd_systems(
        diag in prop::collection::vec(2.5f64..5.0, 2..40),
        seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let n = diag.len();
        let off: Vec<f64> = seed[..n - 1].to_vec();
        let x: Vec<f64> = seed[..n].iter().map(|s| s * 3.0 + 0.5).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x[i];
            if i > 0 { rhs[i] += off[i - 1] * x[i - 1]; }
            if i + 1 < n { rhs[i] += off[i] * x[i + 1]; }
        }
        let sol = solve_spd_tridiagonal(&diag, &off, &rhs).unwrap();
        for (a, b) in sol.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
