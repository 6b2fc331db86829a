use edskit::spin::{self, FourJet, Metric, SpinParams};
use edskit::Error;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SpinParams> {
    (-1.0f64..1.0, prop::array::uniform3(-1.0f64..1.0), 0.5f64..2.0)
        .prop_filter("spin vector too short", |(s0, s, _)| s0 * s0 + s.iter().map(|x| x * x).sum::<f64>() > 0.2)
        .prop_map(|(s0, s, m)| SpinParams::new(s0, s, m).unwrap())
}

fn velocity() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.6f64..0.6)
}

fn four_jet() -> impl Strategy<Value = FourJet> {
    (0.5f64..2.0, velocity(), prop::array::uniform4(-1.0f64..1.0), prop::array::uniform4(-1.0f64..1.0), prop::array::uniform4(-1.0f64..1.0))
        .prop_map(|(u0, v, x, ud, udd)| FourJet {
            x,
            u: [u0, u0 * v[0], u0 * v[1], u0 * v[2]],
            ud,
            udd,
        })
}

proptest! {
    #[test]
    fn projection_lands_on_the_constraint_surface(sp in params(), v in velocity(), a in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(spin::bracket(&v, &sp) > 0.1);
        let w: [f64; 3] = std::array::from_fn(|i| sp.s[i] - sp.s0 * v[i]);
        prop_assume!(spin::dot(&w, &w) > 1e-2);
        let a = spin::project_initial(&v, &a, &sp).unwrap();
        prop_assert!(spin::constraint(&v, &a, &sp).unwrap().abs() < 1e-12);
    }

    #[test]
    fn short_runs_keep_the_constraint(sp in params(), v in velocity(), a in prop::array::uniform3(-0.5f64..0.5)) {
        prop_assume!(spin::bracket(&v, &sp) > 0.2);
        let w: [f64; 3] = std::array::from_fn(|i| sp.s[i] - sp.s0 * v[i]);
        prop_assume!(spin::dot(&w, &w) > 0.05);
        let a = spin::project_initial(&v, &a, &sp).unwrap();
        if let Ok(traj) = spin::integrate(&[0.0; 3], &v, &a, &sp, 1e-3, 200) {
            prop_assert!(traj.max_constraint() < 1e-8);
            prop_assert!(traj.m0_drift() < 1e-8);
        }
    }

    #[test]
    fn reduction_ignores_reparametrization(j in four_jet(), lambda in 0.3f64..3.0) {
        let a = spin::reduce(&j).unwrap();
        let b = spin::reduce(&j.rescaled(lambda)).unwrap();
        for (x, y) in a.coords().iter().zip(b.coords()) {
            prop_assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rest_mass_is_scale_free(sp in params(), j in four_jet(), lambda in 0.3f64..3.0) {
        for g in [Metric::euclidean(), Metric::lorentzian()] {
            let Ok(a) = spin::rest_mass(&j.u, &sp, &g) else { continue };
            let scaled = j.rescaled(lambda);
            let b = spin::rest_mass(&scaled.u, &sp, &g).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-12 * a.value.abs().max(1.0));
            prop_assert_eq!(a.negative_radicand, b.negative_radicand);
        }
    }

    #[test]
    fn parametric_system_is_orthogonal_to_velocity(sp in params(), j in four_jet()) {
        for g in [Metric::euclidean(), Metric::lorentzian()] {
            let Ok(e) = spin::e4(&j, &sp, &g) else { continue };
            let dot: f64 = (0..4).map(|r| e[r] * j.u[r]).sum();
            let scale = e.iter().map(|x| x * x).sum::<f64>().sqrt() * j.u.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-11 * scale.max(1e-300));
        }
    }

    #[test]
    fn coefficient_matrix_is_skew(sp in params(), v in velocity()) {
        prop_assume!(spin::bracket(&v, &sp) > 0.05);
        let a = spin::a_closed_form(&v, &sp).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(a[i][k], -a[k][i]);
            }
        }
    }
}

#[test]
fn rejects_bad_parameters() {
    assert!(matches!(SpinParams::new(0.7, [0.3, -0.4, 0.5], 0.0), Err(Error::Config(_))));
    assert!(SpinParams::new(f64::NAN, [0.0; 3], 1.0).is_err());
}

#[test]
fn singular_bracket_is_reported() {
    // s⁰ = 1, s = v = 0 makes w vanish and N² = 0
    let sp = SpinParams::new(1.0, [0.0; 3], 1.0).unwrap();
    let p = spin::point(0.0, &[0.0; 3], &[0.0; 3], &[0.1, 0.0, 0.0], &[0.0; 3], &sp).unwrap();
    assert!(matches!(spin::e3(&p, &sp), Err(Error::SingularBracket(_))));
    let run = spin::integrate(&[0.0; 3], &[0.0; 3], &[0.0; 3], &sp, 1e-3, 10);
    assert!(matches!(run, Err(ref a) if matches!(a.error, Error::SingularBracket(_))));
}

#[test]
fn off_surface_initial_data_is_refused() {
    let sp = SpinParams::new(0.7, [0.3, -0.4, 0.5], 1.3).unwrap();
    let run = spin::integrate(&[0.0; 3], &[0.1, 0.2, -0.1], &[0.5, 0.0, 0.0], &sp, 1e-3, 10);
    match run {
        Err(a) => {
            assert!(matches!(a.error, Error::Domain(_)));
            assert!(a.partial.rows.is_empty());
        }
        Ok(_) => panic!("integration should not start"),
    }
}

#[test]
fn large_steps_abort_with_partial_output() {
    let sp = SpinParams::new(0.7, [0.3, -0.4, 0.5], 1.3).unwrap();
    let v = [0.1, 0.2, -0.1];
    let a = spin::project_initial(&v, &[3.0, -2.0, 1.0], &sp).unwrap();
    let ab = spin::integrate(&[0.0; 3], &v, &a, &sp, 0.5, 400).unwrap_err();
    assert_eq!(ab.partial.rows.len(), 1);
    assert!(matches!(ab.error, Error::ConstraintDrift { step: 1, .. }));
}
