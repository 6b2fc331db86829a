//! The classical spinning particle: the time-parametrized third-order system
//! on `(t, x, v, v′, v″)` with parameters `(s⁰, s, m)`, its four-dimensional
//! parametric form, the reduction between them, the rest mass, and a
//! constraint-aware integrator.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::dsl::Context;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::field::{Field, GenericField};
use crate::jet::{Coord, JetPoint, Layout};
use crate::sampling::Denominators;
use crate::taylor::{Scalar, TaylorScalar, TaylorSpace};
use crate::variational::{extract, FieldTriple, Params, ThirdOrderSystem};

/// Smallest bracket `N²` accepted by [`e3`] and the integrator.
pub const MIN_BRACKET: f64 = 1e-6;
/// Smallest `|u⁰|` accepted by [`reduce`].
pub const MIN_U0: f64 = 0.1;
/// Constraint drift that aborts [`integrate`].
pub const MAX_DRIFT: f64 = 1e-4;
/// Largest initial constraint residual accepted by [`integrate`].
pub const MAX_INITIAL_CONSTRAINT: f64 = 1e-8;

/// Parameter slots of the spin layout: `s0, s1, s2, s3, m`.
pub const PARAM_NAMES: [&str; 5] = ["s0", "s1", "s2", "s3", "m"];

pub fn layout() -> Layout {
    Layout::new(3, 5)
}

/// Expression context of the spin layout: `s0`, `s` (also `s1`..`s3`), `m`.
pub fn context() -> Context {
    Context::new(3, &[("s0".into(), 1), ("s".into(), 3), ("m".into(), 1)]).expect("fixed names are valid")
}

pub type Vec3 = [f64; 3];
pub type Vec4 = [f64; 4];

fn dot3<S: Scalar>(a: &[S], b: &[S]) -> S {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

fn cross3<S: Scalar>(a: &[S], b: &[S]) -> [S; 3] {
    let m = |i: usize, j: usize| a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone();
    [m(1, 2), m(2, 0), m(0, 1)]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    cross3(a, b)
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    dot3(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinParams {
    pub s0: f64,
    pub s: Vec3,
    pub m: f64,
}

impl SpinParams {
    pub fn new(s0: f64, s: Vec3, m: f64) -> Result<Self> {
        let sp = SpinParams { s0, s, m };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.s0, self.s[0], self.s[1], self.s[2], self.m];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("spin parameters must be finite".into()));
        }
        if self.s0 * self.s0 + dot(&self.s, &self.s) <= 0.0 {
            return Err(Error::Config("spin four-vector must be nonzero".into()));
        }
        if self.m <= 0.0 {
            return Err(Error::Config(format!("mass must be positive, got {}", self.m)));
        }
        Ok(())
    }

    /// Values in the slot order of [`PARAM_NAMES`].
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.s0, self.s[0], self.s[1], self.s[2], self.m]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        SpinParams {
            s0: p[0],
            s: [p[1], p[2], p[3]],
            m: p[4],
        }
    }

    /// The four-vector `(s⁰, s)`.
    pub fn four(&self) -> Vec4 {
        [self.s0, self.s[0], self.s[1], self.s[2]]
    }

    pub fn params(&self) -> Params {
        let names = PARAM_NAMES.iter().map(|s| s.to_string()).collect();
        Params::new(names, self.to_vec()).with_denominators(denominators())
    }
}

/// `N² = (1 + v·v)(s⁰² + s·s) − (s⁰ + s·v)²`.
pub fn bracket(v: &Vec3, sp: &SpinParams) -> f64 {
    bracket_generic(v, sp.s0, &sp.s)
}

fn bracket_generic<S: Scalar>(v: &[S], s0: S, s: &[S]) -> S {
    let one = s0.lift(1.0);
    let ss = s0.clone() * s0.clone() + dot3(s, s);
    let sv = s0 + dot3(s, v);
    (one + dot3(v, v)) * ss - sv.clone() * sv
}

/// Smallest-denominator rule for sampling: the bracket `N²`.
pub fn denominators() -> Denominators {
    Arc::new(|p: &JetPoint| {
        let sp = SpinParams::from_slice(p.params());
        Ok(bracket(&[p.v()[0], p.v()[1], p.v()[2]], &sp))
    })
}

/// The three components of the system, written once over any scalar type.
fn e3_generic<S: Scalar>(c: &[S], with_vpp: bool) -> Result<Vec<S>> {
    let q = 3;
    let at = |level: usize| -> &[S] { &c[1 + level * q..1 + (level + 1) * q] };
    let (v, vp, vpp) = (at(1), at(2), at(3));
    let pbase = 1 + 4 * q;
    let s0 = c[pbase].clone();
    let s = &c[pbase + 1..pbase + 4];
    let m = c[pbase + 4].clone();
    let one = s0.lift(1.0);

    let w: Vec<S> = (0..3).map(|i| s[i].clone() - s0.clone() * v[i].clone()).collect();
    let vv1 = one + dot3(v, v);
    let ss = s0.clone() * s0.clone() + dot3(s, s);
    let sv = s0.clone() + dot3(s, v);
    let n2 = vv1.clone() * ss.clone() - sv.clone() * sv.clone();
    if n2.value() < MIN_BRACKET {
        return Err(Error::SingularBracket(n2.value()));
    }
    let n = n2.sqrt()?;
    let inv_n3 = (n2.clone() * n).recip()?;
    let inv_n5 = inv_n3.clone() * n2.recip()?;

    let coef2 = (ss.clone() * dot3(vp, v) - sv * dot3(s, vp)).scale(3.0) * inv_n5;
    let vp_w = cross3(vp, &w);
    let mass = m * (vv1.powf(1.5)? * ss.powf(1.5)?).recip()?;
    let vpv = dot3(vp, v);
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        let third = mass.clone() * (vv1.clone() * vp[i].clone() - vpv.clone() * v[i].clone());
        out.push(third - coef2.clone() * vp_w[i].clone());
    }
    if with_vpp {
        let vpp_w = cross3(vpp, &w);
        for i in 0..3 {
            out[i] = out[i].clone() + vpp_w[i].clone() * inv_n3.clone();
        }
    }
    Ok(out)
}

/// `E` as a field on the spin layout; with `with_vpp` unset it is `K`.
#[derive(Debug, Clone, Copy)]
pub struct SpinSystem {
    with_vpp: bool,
}

impl SpinSystem {
    pub fn e() -> Self {
        SpinSystem { with_vpp: true }
    }

    /// `K = E − A·v″`.
    pub fn k() -> Self {
        SpinSystem { with_vpp: false }
    }
}

impl GenericField for SpinSystem {
    fn layout(&self) -> Layout {
        layout()
    }
    fn dim(&self) -> usize {
        3
    }
    fn jet_order(&self) -> usize {
        if self.with_vpp {
            3
        } else {
            2
        }
    }
    fn depends_on(&self, flat: usize) -> bool {
        match Coord::from_flat(flat, 3) {
            Coord::T => false,
            Coord::Jet { level, .. } => (1..=GenericField::jet_order(self)).contains(&level),
            Coord::Param(_) => true,
        }
    }
    fn eval_with<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        e3_generic(coords, self.with_vpp)
    }
}

/// The system at one jet point.
pub fn e3(p: &JetPoint, sp: &SpinParams) -> Result<Vec3> {
    if p.q() != 3 {
        return Err(Error::Config(format!("spin system needs q = 3, got {}", p.q())));
    }
    let point = p.with_params(&sp.to_vec());
    let e = e3_generic(point.coords(), true)?;
    Ok([e[0], e[1], e[2]])
}

/// `A_ab = ε_abc (s − s⁰v)ᶜ / N³`.
pub fn a_closed_form(v: &Vec3, sp: &SpinParams) -> Result<[[f64; 3]; 3]> {
    let n2 = bracket(v, sp);
    if n2 < MIN_BRACKET {
        return Err(Error::SingularBracket(n2));
    }
    let n3 = n2 * n2.sqrt();
    let w: Vec3 = std::array::from_fn(|i| sp.s[i] - sp.s0 * v[i]);
    Ok([
        [0.0, w[2] / n3, -w[1] / n3],
        [-w[2] / n3, 0.0, w[0] / n3],
        [w[1] / n3, -w[0] / n3, 0.0],
    ])
}

pub fn system(sp: &SpinParams) -> Result<ThirdOrderSystem> {
    sp.validate()?;
    ThirdOrderSystem::new(Arc::new(SpinSystem::e()), sp.params())
}

/// The coefficient triple read off the system.
pub fn triple(sp: &SpinParams) -> Result<FieldTriple> {
    extract(&system(sp)?)
}

/// Point of the spin layout.
pub fn point(t: f64, x: &Vec3, v: &Vec3, vp: &Vec3, vpp: &Vec3, sp: &SpinParams) -> Result<JetPoint> {
    JetPoint::new(t, x, v, vp, vpp, &sp.to_vec())
}

/// Diagonal metric `diag(ε₀, ε₁, ε₂, ε₃)` with `ε₀ = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metric {
    signs: [f64; 4],
}

impl Metric {
    pub fn new(signs: [f64; 4]) -> Result<Self> {
        if signs[0] != 1.0 || signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::Config(format!(
                "metric signs must be ±1 with a leading +1, got {signs:?}"
            )));
        }
        Ok(Metric { signs })
    }

    pub fn euclidean() -> Self {
        Metric { signs: [1.0; 4] }
    }

    /// `diag(+1, −1, −1, −1)`.
    pub fn lorentzian() -> Self {
        Metric {
            signs: [1.0, -1.0, -1.0, -1.0],
        }
    }

    pub fn signs(&self) -> [f64; 4] {
        self.signs
    }

    pub fn dot(&self, a: &Vec4, b: &Vec4) -> f64 {
        (0..4).map(|i| self.signs[i] * a[i] * b[i]).sum()
    }

    pub fn lower(&self, a: &Vec4) -> Vec4 {
        std::array::from_fn(|i| self.signs[i] * a[i])
    }
}

/// Sign of the permutation `(i, j, k, l)` of `(0, 1, 2, 3)`, or 0.
pub fn levi_civita4(idx: [usize; 4]) -> f64 {
    let mut p = idx;
    if p.iter().any(|&i| i > 3) {
        return 0.0;
    }
    let mut sign = 1.0;
    for i in 0..4 {
        while p[i] != i {
            let j = p[i];
            if p[j] == j {
                return 0.0;
            }
            p.swap(i, j);
            sign = -sign;
        }
    }
    sign
}

/// `(∗(a∧b∧c))_ρ = e_{ρijk} aⁱ bʲ cᵏ` with `e₀₁₂₃ = +1`.
pub fn star3(a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
    let det3 = |r: [usize; 3]| -> f64 {
        // determinant of rows a, b, c restricted to columns r
        a[r[0]] * (b[r[1]] * c[r[2]] - b[r[2]] * c[r[1]]) - a[r[1]] * (b[r[0]] * c[r[2]] - b[r[2]] * c[r[0]])
            + a[r[2]] * (b[r[0]] * c[r[1]] - b[r[1]] * c[r[0]])
    };
    // e_{ρijk} over the complement of ρ in ascending order has sign (−1)^ρ
    [det3([1, 2, 3]), -det3([0, 2, 3]), det3([0, 1, 3]), -det3([0, 1, 2])]
}

/// Gram determinant `(a·a)(b·b) − (a·b)²`.
pub fn gram_wedge_norm2(a: &Vec4, b: &Vec4, g: &Metric) -> f64 {
    let ab = g.dot(a, b);
    g.dot(a, a) * g.dot(b, b) - ab * ab
}

/// `‖w‖ᵏ` for odd `k` from `n2 = ‖w‖²`, keeping `‖w‖ᵏ⁺² = n2 · ‖w‖ᵏ`
/// for negative `n2`.
fn odd_norm_power(n2: f64, k: i32) -> Result<f64> {
    if n2.abs() < MIN_BRACKET {
        return Err(Error::SingularDenominator { value: n2 });
    }
    Ok(n2.powi((k - 1) / 2) * n2.abs().sqrt())
}

/// Velocity jet of a curve in four dimensions with respect to an arbitrary
/// parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourJet {
    pub x: Vec4,
    pub u: Vec4,
    pub ud: Vec4,
    pub udd: Vec4,
}

impl FourJet {
    /// Jet with every derivative scaled as under `τ → τ/λ`.
    pub fn rescaled(&self, lambda: f64) -> FourJet {
        FourJet {
            x: self.x,
            u: self.u.map(|c| c * lambda),
            ud: self.ud.map(|c| c * lambda * lambda),
            udd: self.udd.map(|c| c * lambda * lambda * lambda),
        }
    }
}

/// The parametric system `ℰ_ρ` (a covector).
pub fn e4(j: &FourJet, sp: &SpinParams, g: &Metric) -> Result<Vec4> {
    let s = sp.four();
    let (u, ud, udd) = (&j.u, &j.ud, &j.udd);
    let su2 = gram_wedge_norm2(&s, u, g);
    let uu = g.dot(u, u);
    let ss = g.dot(&s, &s);
    let su3 = odd_norm_power(su2, 3)?;
    let su5 = odd_norm_power(su2, 5)?;
    let u1 = odd_norm_power(uu, 1)?;
    let u3 = odd_norm_power(uu, 3)?;
    let s3 = odd_norm_power(ss, 3)?;
    let t1 = star3(udd, u, &s);
    let t2 = star3(ud, u, &s);
    let wedge = g.dot(ud, u) * ss - g.dot(ud, &s) * g.dot(u, &s);
    let ud_low = g.lower(ud);
    let u_low = g.lower(u);
    let udu = g.dot(ud, u);
    Ok(std::array::from_fn(|r| {
        t1[r] / su3 - 3.0 * t2[r] * wedge / su5 + sp.m / s3 * (ud_low[r] / u1 - udu * u_low[r] / u3)
    }))
}

/// Reparametrizes the degree-3 Taylor curve of `j` by its own `x⁰`.
pub fn reduce(j: &FourJet) -> Result<JetPoint> {
    let a1 = j.u[0];
    if a1.abs() < MIN_U0 {
        return Err(Error::Domain(format!("|u⁰| = {} is below {MIN_U0}", a1.abs())));
    }
    let a2 = j.ud[0] / 2.0;
    let a3 = j.udd[0] / 6.0;
    // τ(s) = d1 s + d2 s² + d3 s³ inverts x⁰(τ) − x⁰ = a1 τ + a2 τ² + a3 τ³
    let d1 = 1.0 / a1;
    let d2 = -a2 / a1.powi(3);
    let d3 = (2.0 * a2 * a2 - a1 * a3) / a1.powi(5);
    let mut v = [0.0; 3];
    let mut vp = [0.0; 3];
    let mut vpp = [0.0; 3];
    for i in 0..3 {
        let (b1, b2, b3) = (j.u[i + 1], j.ud[i + 1] / 2.0, j.udd[i + 1] / 6.0);
        v[i] = b1 * d1;
        vp[i] = 2.0 * (b1 * d2 + b2 * d1 * d1);
        vpp[i] = 6.0 * (b1 * d3 + 2.0 * b2 * d1 * d2 + b3 * d1 * d1 * d1);
    }
    JetPoint::new(j.x[0], &j.x[1..], &v, &vp, &vpp, &[])
}

/// Draws `count` jets with `u = u⁰(1, v)`, `u⁰ ∈ [0.5, 2]`, `|vᵢ| ≤ 0.8`,
/// `x, u̇, ü` in `[-1, 1]⁴`, keeping those whose bracket `N²(v)` is at least
/// `floor`. Per jet the draw order is `u⁰, v, x, u̇, ü`.
pub fn sample_four_jets(count: usize, seed: u64, sp: &SpinParams, floor: f64) -> Result<Vec<FourJet>> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::Domain(format!("only {} admissible jets in {attempts} draws", out.len())));
        }
        let u0 = rng.uniform(0.5, 2.0);
        let v = rng.uniform3(-0.8, 0.8);
        let mut four = || -> Vec4 { std::array::from_fn(|_| rng.uniform(-1.0, 1.0)) };
        let (x, ud, udd) = (four(), four(), four());
        if bracket(&v, sp) < floor {
            continue;
        }
        out.push(FourJet {
            x,
            u: [u0, u0 * v[0], u0 * v[1], u0 * v[2]],
            ud,
            udd,
        });
    }
    Ok(out)
}

/// Normalized mismatch between `ℰ` and the density built from `E` of the
/// reduced jet: `max(|ℰ_a − u⁰E_a|, |ℰ₀ + uᵃE_a|) / max(|ℰ|, ε)`.
pub fn lift_check(j: &FourJet, sp: &SpinParams, g: &Metric) -> Result<f64> {
    let big = e4(j, sp, g)?;
    let small = e3(&reduce(j)?, sp)?;
    let u0 = j.u[0];
    let mut r = (big[0] + (0..3).map(|a| j.u[a + 1] * small[a]).sum::<f64>()).abs();
    for a in 0..3 {
        r = r.max((big[a + 1] - u0 * small[a]).abs());
    }
    let scale = big.iter().fold(1e-300f64, |m, x| m.max(f64::abs(*x)));
    Ok(r / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestMass {
    /// `m·sign(β)·|β|^{3/2}` with `β = 1 − (s·u)²/((s·s)(u·u))`.
    pub value: f64,
    /// Set when `β < 0`.
    pub negative_radicand: bool,
}

pub fn rest_mass(u: &Vec4, sp: &SpinParams, g: &Metric) -> Result<RestMass> {
    let s = sp.four();
    let den = g.dot(&s, &s) * g.dot(u, u);
    if den.abs() < 1e-300 || !den.is_finite() {
        return Err(Error::SingularDenominator { value: den });
    }
    let su = g.dot(&s, u);
    let beta = 1.0 - su * su / den;
    Ok(RestMass {
        value: sp.m * beta.signum() * beta.abs().powf(1.5),
        negative_radicand: beta < 0.0,
    })
}

/// Rest mass along a time-parametrized state, `u = (1, v)`, Euclidean.
pub fn rest_mass_of_velocity(v: &Vec3, sp: &SpinParams) -> Result<f64> {
    Ok(rest_mass(&[1.0, v[0], v[1], v[2]], sp, &Metric::euclidean())?.value)
}

/// `C = w·K` with `w = s − s⁰v`; free of `v″`, linear in `v′`.
fn constraint_generic<S: Scalar>(v: &[S], vp: &[S], sp: &SpinParams) -> Result<S> {
    let one = v[0].lift(1.0);
    let s: Vec<S> = sp.s.iter().map(|&c| v[0].lift(c)).collect();
    let w: Vec<S> = (0..3).map(|i| s[i].clone() - v[i].scale(sp.s0)).collect();
    let vv1 = one + dot3(v, v);
    let ss = sp.s0 * sp.s0 + dot(&sp.s, &sp.s);
    let mass = (vv1.powf(1.5)?).recip()?.scale(sp.m / ss.powf(1.5));
    let term = vv1 * dot3(&w, vp) - dot3(vp, v) * dot3(&w, v);
    Ok(mass * term)
}

pub fn constraint(v: &Vec3, vp: &Vec3, sp: &SpinParams) -> Result<f64> {
    constraint_generic(v, vp, sp)
}

/// Gradients of the constraint with respect to `v` and `v′`.
fn constraint_gradient(v: &Vec3, vp: &Vec3, sp: &SpinParams) -> Result<(f64, Vec3, Vec3)> {
    let space = TaylorSpace::get(6, 1)?;
    let tv: Vec<TaylorScalar> = (0..3).map(|i| TaylorScalar::variable(&space, i, v[i])).collect();
    let tvp: Vec<TaylorScalar> = (0..3).map(|i| TaylorScalar::variable(&space, 3 + i, vp[i])).collect();
    let c = constraint_generic(&tv, &tvp, sp)?;
    Ok((
        c.value(),
        std::array::from_fn(|i| c.gradient(i)),
        std::array::from_fn(|i| c.gradient(3 + i)),
    ))
}

/// Moves `vp` along `∇_{v′}C` onto `C = 0`.
pub fn project_initial(v: &Vec3, vp: &Vec3, sp: &SpinParams) -> Result<Vec3> {
    let (c, _, g) = constraint_gradient(v, vp, sp)?;
    let gg = dot(&g, &g);
    if gg < 1e-300 {
        return Err(Error::SingularDenominator { value: gg });
    }
    // C is linear in v′
    Ok(std::array::from_fn(|i| vp[i] - c / gg * g[i]))
}

/// `v″` of the index-reduced system at a state.
pub fn acceleration(v: &Vec3, vp: &Vec3, sp: &SpinParams) -> Result<Vec3> {
    let n2 = bracket(v, sp);
    if n2 < MIN_BRACKET {
        return Err(Error::SingularBracket(n2));
    }
    let p = point(0.0, &[0.0; 3], v, vp, &[0.0; 3], sp)?;
    let k = SpinSystem::k().eval(&p)?;
    let k: Vec3 = [k[0], k[1], k[2]];
    let w: Vec3 = std::array::from_fn(|i| sp.s[i] - sp.s0 * v[i]);
    let ww = dot(&w, &w);
    if ww < 1e-300 {
        return Err(Error::SingularBracket(n2));
    }
    let n3 = n2 * n2.sqrt();
    let wk = cross(&w, &k);
    let perp: Vec3 = std::array::from_fn(|i| -n3 * wk[i] / ww);
    let (_, grad_v, grad_vp) = constraint_gradient(v, vp, sp)?;
    let den = dot(&grad_vp, &w);
    if den.abs() < 1e-300 {
        return Err(Error::SingularDenominator { value: den });
    }
    let lambda = -(dot(&grad_v, vp) + dot(&grad_vp, &perp)) / den;
    Ok(std::array::from_fn(|i| perp[i] + lambda * w[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub vp: Vec3,
}

impl State {
    fn axpy(&self, k: &[Vec3; 3], h: f64) -> State {
        State {
            t: self.t,
            x: std::array::from_fn(|i| self.x[i] + h * k[0][i]),
            v: std::array::from_fn(|i| self.v[i] + h * k[1][i]),
            vp: std::array::from_fn(|i| self.vp[i] + h * k[2][i]),
        }
    }
}

fn rhs(s: &State, sp: &SpinParams) -> Result<[Vec3; 3]> {
    Ok([s.v, s.vp, acceleration(&s.v, &s.vp, sp)?])
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(s: &State, sp: &SpinParams, dt: f64) -> Result<State> {
    let k1 = rhs(s, sp)?;
    let k2 = rhs(&s.axpy(&k1, dt / 2.0), sp)?;
    let k3 = rhs(&s.axpy(&k2, dt / 2.0), sp)?;
    let k4 = rhs(&s.axpy(&k3, dt), sp)?;
    let comb = |j: usize| -> Vec3 {
        std::array::from_fn(|i| k1[j][i] + 2.0 * k2[j][i] + 2.0 * k3[j][i] + k4[j][i])
    };
    let mut next = s.axpy(&[comb(0), comb(1), comb(2)], dt / 6.0);
    next.t = s.t + dt;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub step: usize,
    pub state: State,
    pub m0: f64,
    pub constraint: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "step,t,x1,x2,x3,v1,v2,v3,vp1,vp2,vp3,m0,constraint,N2";

impl Trajectory {
    pub fn last(&self) -> &Row {
        self.rows.last().expect("trajectory has an initial row")
    }

    pub fn max_constraint(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.constraint.abs()))
    }

    /// Largest `|m₀ − m₀(0)|`.
    pub fn m0_drift(&self) -> f64 {
        let m0 = self.rows[0].m0;
        self.rows.iter().fold(0.0, |m, r| m.max((r.m0 - m0).abs()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            let s = &r.state;
            write!(out, "{},{:?}", r.step, s.t)?;
            for x in s.x.iter().chain(&s.v).chain(&s.vp) {
                write!(out, ",{x:?}")?;
            }
            writeln!(out, ",{:?},{:?},{:?}", r.m0, r.constraint, r.n2)?;
        }
        Ok(())
    }
}

fn row(step: usize, s: &State, sp: &SpinParams) -> Result<Row> {
    Ok(Row {
        step,
        state: *s,
        m0: rest_mass_of_velocity(&s.v, sp)?,
        constraint: constraint(&s.v, &s.vp, sp)?,
        n2: bracket(&s.v, sp),
    })
}

/// Failure of [`integrate`] with the rows computed so far.
#[derive(Debug, Clone)]
pub struct Aborted {
    pub error: Error,
    pub partial: Trajectory,
}

/// Integrates from `(x0, v0, vp0)` at `t = 0` for `steps` steps of size `dt`.
pub fn integrate(
    x0: &Vec3,
    v0: &Vec3,
    vp0: &Vec3,
    sp: &SpinParams,
    dt: f64,
    steps: usize,
) -> std::result::Result<Trajectory, Aborted> {
    let mut traj = Trajectory { dt, rows: Vec::new() };
    let fail = |error: Error, traj: Trajectory| Aborted { error, partial: traj };
    if let Err(e) = sp.validate() {
        return Err(fail(e, traj));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(fail(Error::Config(format!("step size must be positive, got {dt}")), traj));
    }
    let mut s = State {
        t: 0.0,
        x: *x0,
        v: *v0,
        vp: *vp0,
    };
    let n2 = bracket(&s.v, sp);
    if n2 < MIN_BRACKET {
        return Err(fail(Error::SingularBracket(n2), traj));
    }
    let first = match row(0, &s, sp) {
        Ok(r) => r,
        Err(e) => return Err(fail(e, traj)),
    };
    if first.constraint.abs() >= MAX_INITIAL_CONSTRAINT {
        let e = Error::Domain(format!(
            "initial constraint residual {:e} is not below {MAX_INITIAL_CONSTRAINT:e}",
            first.constraint
        ));
        return Err(fail(e, traj));
    }
    traj.rows.push(first);
    for step in 1..=steps {
        let next = match rk4_step(&s, sp, dt) {
            Ok(n) => n,
            Err(e) => return Err(fail(e, traj)),
        };
        let r = match row(step, &next, sp) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, traj)),
        };
        if !r.constraint.is_finite() || r.constraint.abs() > MAX_DRIFT {
            let e = Error::ConstraintDrift {
                step,
                drift: r.constraint.abs(),
                limit: MAX_DRIFT,
            };
            return Err(fail(e, traj));
        }
        if r.n2 < MIN_BRACKET {
            return Err(fail(Error::SingularBracket(r.n2), traj));
        }
        traj.rows.push(r);
        s = next;
    }
    Ok(traj)
}
