use std::sync::Arc;

use edskit::dsl::{parse, Context, ExprField, ModelDoc};
use edskit::field::{Combination, Field, FieldRef, TotalDerivative};
use edskit::prolong::{prolong, Generator};
use edskit::spin::{self, SpinParams, SpinSystem};
use edskit::variational::{assemble, euler_poisson, euler_poisson_nested, extract};
use edskit::{JetPoint, TaylorScalar, TaylorSpace};
use proptest::prelude::*;

fn space(vars: usize, degree: usize) -> Arc<TaylorSpace> {
    TaylorSpace::get(vars, degree).unwrap()
}

/// Random truncated series in two variables.
fn series(degree: usize) -> impl Strategy<Value = Vec<f64>> {
    let len = space(2, degree).len();
    prop::collection::vec(-2.0f64..2.0, len)
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

fn binomial(n: u8, k: u8) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

proptest! {
    #[test]
    fn leibniz_rule(f in series(4), g in series(4)) {
        let sp = space(2, 4);
        let a = TaylorScalar::from_coeffs(&sp, f).unwrap();
        let b = TaylorScalar::from_coeffs(&sp, g).unwrap();
        let ab = &a * &b;
        for i in 0..=4u8 {
            for j in 0..=(4 - i) {
                let mut sum = 0.0;
                for k in 0..=i {
                    for l in 0..=j {
                        sum += binomial(i, k) * binomial(j, l)
                            * a.derivative(&[k, l]) * b.derivative(&[i - k, j - l]);
                    }
                }
                let d = ab.derivative(&[i, j]);
                prop_assert!((d - sum).abs() <= 1e-9 * sum.abs().max(1.0), "order ({i},{j}): {d} vs {sum}");
            }
        }
    }

    #[test]
    fn exponential_derivatives(a in -1.5f64..1.5, b in -1.5f64..1.5, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let sp = space(2, 6);
        let u = TaylorScalar::variable(&sp, 0, x).scale(a) + TaylorScalar::variable(&sp, 1, y).scale(b);
        let e = u.exp();
        let base = (a * x + b * y).exp();
        for i in 0..=6u8 {
            for j in 0..=(6 - i) {
                let want = a.powi(i as i32) * b.powi(j as i32) * base;
                let got = e.derivative(&[i, j]);
                prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pythagorean_identity_at_every_order(f in series(5)) {
        let sp = space(2, 5);
        let a = TaylorScalar::from_coeffs(&sp, f).unwrap();
        let one = &a.sin() * &a.sin() + &a.cos() * &a.cos();
        prop_assert!((one.value() - 1.0).abs() < 1e-12);
        for c in &one.coeffs()[1..] {
            prop_assert!(c.abs() < 1e-9, "{c}");
        }
    }

    #[test]
    fn reciprocal_inverts(f in series(4)) {
        let sp = space(2, 4);
        let mut f = f;
        f[0] = 1.5 + f[0].abs();
        let a = TaylorScalar::from_coeffs(&sp, f).unwrap();
        let prod = &a * &a.recip().unwrap();
        prop_assert!((prod.value() - 1.0).abs() < 1e-12);
        for c in &prod.coeffs()[1..] {
            prop_assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn total_derivative_is_linear(
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        c in prop::collection::vec(-1.0f64..1.0, 13),
    ) {
        let ctx = Context::new(3, &[]).unwrap();
        let field = |s: &str| -> FieldRef {
            let comp = ctx.compile(&parse(s).unwrap(), 2, "f").unwrap();
            Arc::new(ExprField::new(ctx.layout(), vec![comp], 0))
        };
        let f = field("sin(x1)*v2 + t*vp3");
        let g = field("exp(v1)*x3^2 - vp1*vp2");
        let combo: FieldRef = Arc::new(Combination::new(vec![(alpha, f.clone()), (beta, g.clone())]).unwrap());
        let p = JetPoint::new(c[0], &c[1..4], &c[4..7], &c[7..10], &c[10..13], &[]).unwrap();
        let d = |h: FieldRef| TotalDerivative::full(h).unwrap().eval(&p).unwrap()[0];
        let lhs = d(combo);
        let rhs = alpha * d(f) + beta * d(g);
        prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn prolongation_is_linear_in_the_generator(
        alpha in -2.0f64..2.0,
        c in prop::collection::vec(-1.0f64..1.0, 13),
    ) {
        let ctx = Context::new(3, &[]).unwrap();
        let gen = |tau: &str, xi: [&str; 3]| {
            let s = |e: &str| ctx.compile(&parse(e).unwrap(), 0, "g").unwrap();
            Generator::new(
                Arc::new(ExprField::new(ctx.layout(), vec![s(tau)], 0)),
                Arc::new(ExprField::new(ctx.layout(), xi.iter().map(|e| s(e)).collect(), 0)),
                None,
            )
            .unwrap()
        };
        let g1 = gen("x1*t", ["sin(x2)", "t^2", "x1*x3"]);
        let g2 = gen("cos(x3)", ["x2", "exp(t)*x1", "0"]);
        let sum = gen(
            &format!("x1*t + ({alpha})*cos(x3)"),
            [
                &format!("sin(x2) + ({alpha})*x2"),
                &format!("t^2 + ({alpha})*exp(t)*x1"),
                "x1*x3",
            ],
        );
        let p = JetPoint::new(c[0], &c[1..4], &c[4..7], &c[7..10], &c[10..13], &[]).unwrap();
        let (p1, p2, ps) = (prolong(&g1, 3).unwrap(), prolong(&g2, 3).unwrap(), prolong(&sum, 3).unwrap());
        for level in 0..=3 {
            let a = p1.coefficient(level).unwrap().eval(&p).unwrap();
            let b = p2.coefficient(level).unwrap().eval(&p).unwrap();
            let s = ps.coefficient(level).unwrap().eval(&p).unwrap();
            for i in 0..3 {
                let want = a[i] + alpha * b[i];
                prop_assert!((s[i] - want).abs() < 1e-11 * want.abs().max(1.0));
            }
        }
    }
}

fn spin_points(count: usize, sp: &SpinParams) -> Vec<JetPoint> {
    let mut rng = edskit::rng::SplitMix64::new(11);
    let mut out = Vec::new();
    while out.len() < count {
        let v = rng.uniform3(-0.8, 0.8);
        let (x, vp, vpp) = (rng.uniform3(-1.0, 1.0), rng.uniform3(-1.0, 1.0), rng.uniform3(-1.0, 1.0));
        if spin::bracket(&v, sp) > 0.1 {
            out.push(spin::point(rng.uniform(-1.0, 1.0), &x, &v, &vp, &vpp, sp).unwrap());
        }
    }
    out
}

#[test]
fn assembling_extracted_coefficients_reproduces_the_system() {
    let sp = SpinParams::new(0.7, [0.3, -0.4, 0.5], 1.3).unwrap();
    let tr = spin::triple(&sp).unwrap();
    let asm = assemble(&tr).unwrap();
    for p in spin_points(30, &sp) {
        let e = SpinSystem::e().eval(&p).unwrap();
        let back = asm.system.e().eval(&p).unwrap();
        for i in 0..3 {
            assert!((e[i] - back[i]).abs() < 1e-12 * e[i].abs().max(1.0));
        }
    }
}

#[test]
fn document_model_matches_built_in_model() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let doc = ModelDoc::load(dir.join("spin.json")).unwrap();
    let ctx = doc.context().unwrap();
    let sys = doc.build().unwrap().system().unwrap();
    let sp = SpinParams::new(0.7, [0.3, -0.4, 0.5], 1.3).unwrap();
    for p in spin_points(30, &sp) {
        let point = edskit::dsl::PointDoc {
            t: p.t(),
            x: p.x().to_vec(),
            v: p.v().to_vec(),
            vp: p.vp().to_vec(),
            vpp: p.vpp().to_vec(),
            ..Default::default()
        }
        .point(&ctx, &doc.param_values())
        .unwrap();
        let a = sys.e().eval(&point).unwrap();
        let b = spin::e3(&p, &sp).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12 * b[i].abs().max(1.0), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn euler_poisson_routes_agree() {
    let doc = r#"{"q": 2, "lagrangian": {"L": "sin(x1)*v2*vp1 + x2*v1^2*vp2 + sqrt(1 + dot(v, v)) + t*x1*v2"}}"#;
    let edskit::dsl::Model::Lagrangian(lag) = ModelDoc::from_json(doc).unwrap().build().unwrap() else {
        unreachable!()
    };
    let fast = euler_poisson(&lag).unwrap();
    let nested = euler_poisson_nested(&lag).unwrap();
    let mut rng = edskit::rng::SplitMix64::new(5);
    for _ in 0..20 {
        let c = rng.uniform_vec(9, -0.7, 0.7);
        let p = JetPoint::new(c[0], &c[1..3], &c[3..5], &c[5..7], &c[7..9], &[]).unwrap();
        let a = fast.e().eval(&p).unwrap();
        let b = nested.e().eval(&p).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-11 * b[i].abs().max(1.0));
        }
    }
    let tr = extract(&fast).unwrap();
    let p = JetPoint::new(0.1, &[0.2, -0.3], &[0.4, 0.1], &[0.0; 2], &[0.0; 2], &[]).unwrap();
    assert!(tr.skew_defect(&p).unwrap() < 1e-12);
}
