//! Invariance of third-order systems under prolonged point generators: Lie
//! derivatives of vector-valued forms along generator flows, pointwise
//! multiplier solves, and the pseudo-orthogonal family of the spin model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{gradient, Field, FieldRef, Polynomial};
use crate::jet::{Coord, JetPoint, Layout};
use crate::prolong::{apply_generator, flow_step, prolong, Generator, ProlongedGenerator};
use crate::rng::SplitMix64;
use crate::sampling::{evaluate_all, SampleSpec};
use crate::spin::{self, SpinParams, SpinSystem, Vec3};
use crate::variational::{assemble, FieldTriple, Verdict};

/// Default central-difference step of [`lie_derivative_form`].
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default tolerance; Richardson disagreement above ten times this aborts.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Contact forms `θ^{(j)a} = dv^{(j)a} − v^{(j+1)a} dt`, `j < order`, as
/// rows over the co-frame `(dt, dx, dv, dv′, dv″)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactBasis {
    pub order: usize,
    pub q: usize,
    pub rows: DMatrix<f64>,
}

impl ContactBasis {
    pub fn at(p: &JetPoint, order: usize) -> Result<Self> {
        let q = p.q();
        if order == 0 || order > 3 {
            return Err(Error::Config(format!("contact order must be 1..=3, got {order}")));
        }
        let n = p.layout().jet_len();
        let mut rows = DMatrix::zeros(order * q, n);
        for j in 0..order {
            for a in 0..q {
                let r = j * q + a;
                rows[(r, Coord::Jet { level: j, index: a }.flat(q))] = 1.0;
                rows[(r, 0)] = -p.level(j + 1)[a];
            }
        }
        Ok(ContactBasis { order, q, rows })
    }
}

/// A one-form with values in `ℝ^q`: row `a` holds the co-frame coefficients
/// of the `a`-th value component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorValuedForm {
    pub q: usize,
    pub blocks: DMatrix<f64>,
}

impl VectorValuedForm {
    pub fn zeros(layout: Layout) -> Self {
        VectorValuedForm {
            q: layout.q,
            blocks: DMatrix::zeros(layout.q, layout.jet_len()),
        }
    }

    pub fn get(&self, a: usize, c: Coord) -> f64 {
        self.blocks[(a, c.flat(self.q))]
    }

    pub fn set(&mut self, a: usize, c: Coord, value: f64) {
        self.blocks[(a, c.flat(self.q))] = value;
    }

    pub fn block_dt(&self, a: usize) -> f64 {
        self.get(a, Coord::T)
    }

    pub fn block_dvp(&self, a: usize, b: usize) -> f64 {
        self.get(a, Coord::vp(b))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.amax()
    }
}

/// A field of vector-valued one-forms on the jet space.
pub trait FormField: Send + Sync + std::fmt::Debug {
    fn layout(&self) -> Layout;
    fn jet_order(&self) -> usize;
    fn eval(&self, p: &JetPoint) -> Result<VectorValuedForm>;
}

/// `ε̲ = A_ab dxᵃ⊗dv′ᵇ + K_a dxᵃ⊗dt`.
#[derive(Debug, Clone)]
pub struct EpsilonBar {
    a: FieldRef,
    k: FieldRef,
}

impl EpsilonBar {
    pub fn new(tr: &FieldTriple) -> Result<Self> {
        Ok(EpsilonBar {
            a: tr.a().clone(),
            k: assemble(tr)?.k,
        })
    }
}

impl FormField for EpsilonBar {
    fn layout(&self) -> Layout {
        self.a.layout()
    }
    fn jet_order(&self) -> usize {
        self.k.jet_order().max(self.a.jet_order())
    }
    fn eval(&self, p: &JetPoint) -> Result<VectorValuedForm> {
        let q = p.q();
        let a = self.a.eval(p)?;
        let k = self.k.eval(p)?;
        let mut f = VectorValuedForm::zeros(p.layout());
        for i in 0..q {
            f.set(i, Coord::T, k[i]);
            for j in 0..q {
                f.set(i, Coord::vp(j), a[i * q + j]);
            }
        }
        Ok(f)
    }
}

/// Pullback of `f` along the flow of `pg` for time `eps`; the value slot is
/// left untouched.
fn pullback(pg: &ProlongedGenerator, f: &dyn FormField, p: &JetPoint, eps: f64) -> Result<DMatrix<f64>> {
    let step = flow_step(pg, p, eps)?;
    let n = p.layout().jet_len();
    let value = f.eval(&step.point)?;
    let jac = step.jacobian.view((0, 0), (n, n));
    Ok(&value.blocks * jac)
}

/// `d/dε|₀ Φ_ε^* F` by central differences at `h` and `h/2`, combined by
/// Richardson extrapolation. A disagreement between the two (relative to
/// `max(1, |result|)`) above `10·tol` is reported as [`Error::StepTooLarge`].
pub fn lie_derivative_form(
    pg: &ProlongedGenerator,
    f: &dyn FormField,
    p: &JetPoint,
    h: f64,
    tol: f64,
) -> Result<VectorValuedForm> {
    if f.layout() != pg.layout() {
        return Err(Error::Config("form and generator disagree on layout".into()));
    }
    if f.jet_order() > pg.order() {
        return Err(Error::Config(format!(
            "form of jet order {} needs a prolongation of at least that order (have {})",
            f.jet_order(),
            pg.order()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let central = |s: f64| -> Result<DMatrix<f64>> {
        Ok((pullback(pg, f, p, s)? - pullback(pg, f, p, -s)?) / (2.0 * s))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    let result = (&fine * 4.0 - &coarse) / 3.0;
    let disagreement = (&fine - &result).amax() / result.amax().max(1.0);
    let limit = 10.0 * tol;
    if !disagreement.is_finite() || disagreement > limit {
        return Err(Error::StepTooLarge { disagreement, limit });
    }
    Ok(VectorValuedForm {
        q: p.q(),
        blocks: result,
    })
}

/// Multipliers at one point: `Lε̲_a = Ξ_a^c ε̲_c + ω^x_{ab} θ_x^b + ω^v_{ab} θ_v^b`.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierSolution {
    /// `Xi[a][c]`.
    pub xi: Vec<Vec<f64>>,
    /// `omega[a]` lists the coefficients on `θ_x¹..θ_x^q, θ_v¹..θ_v^q`.
    pub omega: Vec<Vec<f64>>,
    /// Largest residual norm over value components.
    pub residual: f64,
    pub rank_deficient: bool,
}

/// Least-squares multipliers for a known `Lε̲` and `ε̲` at `p`.
pub fn solve_multipliers(lie: &VectorValuedForm, eps: &VectorValuedForm, p: &JetPoint) -> Result<MultiplierSolution> {
    let q = p.q();
    let contact = ContactBasis::at(p, 2)?;
    let n = p.layout().jet_len();
    // columns: ε̲_1..ε̲_q, θ_x, θ_v
    let mut m = DMatrix::zeros(n, 3 * q);
    for c in 0..q {
        m.set_column(c, &eps.blocks.row(c).transpose());
    }
    for r in 0..2 * q {
        m.set_column(q + r, &contact.rows.row(r).transpose());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax.max(1.0) * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let mut xi = Vec::with_capacity(q);
    let mut omega = Vec::with_capacity(q);
    let mut residual = 0.0f64;
    for a in 0..q {
        let rhs: DVector<f64> = lie.blocks.row(a).transpose();
        let u = svd
            .solve(&rhs, cutoff)
            .map_err(|e| Error::Config(format!("least-squares solve failed: {e}")))?;
        residual = residual.max((&m * &u - &rhs).norm());
        xi.push(u.rows(0, q).iter().copied().collect());
        omega.push(u.rows(q, 2 * q).iter().copied().collect());
    }
    Ok(MultiplierSolution {
        xi,
        omega,
        residual,
        rank_deficient: rank < 3 * q,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierReport {
    pub samples: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub rank_deficient: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub solutions: Vec<(usize, MultiplierSolution)>,
}

/// Sample points for [`multiplier_solve`]: `(t, x, v)` from `spec` and `v′`
/// drawn from `[-1, 1]`.
pub fn multiplier_points(tr: &FieldTriple, spec: &SampleSpec) -> Result<Vec<JetPoint>> {
    let params = tr.params();
    let mut pts = spec.draw(tr.layout(), &params.values, params.denominators.as_ref())?;
    let mut rng = SplitMix64::new(spec.seed ^ 0x0A11_0A11_0A11_0A11);
    for p in &mut pts {
        for x in p.level_mut(2) {
            *x = rng.uniform(-1.0, 1.0);
        }
    }
    Ok(pts)
}

/// Multiplier solves for `ε̲` of `tr` at every point.
pub fn multiplier_solve(
    pg: &ProlongedGenerator,
    tr: &FieldTriple,
    points: &[JetPoint],
    h: f64,
    tol: f64,
) -> Result<MultiplierReport> {
    let eps = EpsilonBar::new(tr)?;
    let eval = evaluate_all(points, |p| {
        let lie = lie_derivative_form(pg, &eps, p, h, tol)?;
        solve_multipliers(&lie, &eps.eval(p)?, p)
    })?;
    let n = eval.values.len().max(1) as f64;
    let max_residual = eval.values.iter().fold(0.0f64, |m, (_, s)| m.max(s.residual));
    let mean_residual = eval.values.iter().map(|(_, s)| s.residual).sum::<f64>() / n;
    let pass = !eval.values.is_empty() && max_residual < tol;
    Ok(MultiplierReport {
        samples: points.len(),
        skipped: eval.skipped,
        max_residual,
        mean_residual,
        rank_deficient: eval.values.iter().filter(|(_, s)| s.rank_deficient).count(),
        tolerance: tol,
        verdict: Verdict::from_bool(pass),
        solutions: eval.values,
    })
}

fn cross_terms(n: &Vec3, a: usize) -> [(f64, usize); 2] {
    // (n × y)_a = n_{a+1} y_{a+2} − n_{a+2} y_{a+1}
    [(n[(a + 1) % 3], (a + 2) % 3), (-n[(a + 2) % 3], (a + 1) % 3)]
}

/// Slots of `s⁰` and `s` among the parameters of a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinSlots {
    pub s0: usize,
    pub s: [usize; 3],
}

impl SpinSlots {
    /// The built-in spin layout.
    pub const BUILTIN: SpinSlots = SpinSlots { s0: 0, s: [1, 2, 3] };
}

/// `τ = −q·x`, `ξ = t q + n × x`, acting on `(s⁰, s)` by
/// `s⁰ ↦ −q·s`, `s ↦ s⁰ q + n × s` when `slots` is given.
pub fn pseudo_orthogonal_generator_in(layout: Layout, n: &Vec3, q: &Vec3, slots: Option<SpinSlots>) -> Result<Generator> {
    if layout.q != 3 {
        return Err(Error::Config(format!("pseudo-orthogonal generators need q = 3, got {}", layout.q)));
    }
    let tau = vec![(0..3).map(|i| (-q[i], vec![(Coord::x(i), 1)])).collect()];
    let xi = (0..3)
        .map(|a| {
            let mut terms = vec![(q[a], vec![(Coord::T, 1)])];
            for (c, j) in cross_terms(n, a) {
                terms.push((c, vec![(Coord::x(j), 1)]));
            }
            terms
        })
        .collect();
    let param_action: Option<FieldRef> = match slots {
        None => None,
        Some(sl) => {
            if sl.s.iter().chain([&sl.s0]).any(|&i| i >= layout.num_params) {
                return Err(Error::Config("spin slots outside the parameter range".into()));
            }
            let mut comps = vec![Vec::new(); layout.num_params];
            comps[sl.s0] = (0..3).map(|i| (-q[i], vec![(Coord::Param(sl.s[i]), 1)])).collect();
            for a in 0..3 {
                let mut terms = vec![(q[a], vec![(Coord::Param(sl.s0), 1)])];
                for (c, j) in cross_terms(n, a) {
                    terms.push((c, vec![(Coord::Param(sl.s[j]), 1)]));
                }
                comps[sl.s[a]] = terms;
            }
            Some(Arc::new(Polynomial::new(layout, comps)))
        }
    };
    Generator::new(
        Arc::new(Polynomial::new(layout, tau)),
        Arc::new(Polynomial::new(layout, xi)),
        param_action,
    )
}

/// The pseudo-orthogonal generator on the built-in spin layout.
pub fn pseudo_orthogonal_generator(n: &Vec3, q: &Vec3) -> Generator {
    pseudo_orthogonal_generator_in(spin::layout(), n, q, Some(SpinSlots::BUILTIN))
        .expect("spin layout has q = 3 and five parameters")
}

/// How the derivative of the components of `E` along a generator is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LieConvention {
    /// Directional derivative of each `E_a`.
    #[serde(rename = "i")]
    I,
    /// (i) plus `E_a D₁τ`.
    #[serde(rename = "ii")]
    II,
    /// (i) plus `E_b ∂_{xᵃ}ξᵇ`.
    #[serde(rename = "iii")]
    III,
}

impl LieConvention {
    pub const ALL: [LieConvention; 3] = [LieConvention::I, LieConvention::II, LieConvention::III];
    /// The reading under which the pseudo-orthogonal identity holds.
    pub const FROZEN: LieConvention = LieConvention::I;

    pub fn label(self) -> &'static str {
        match self {
            LieConvention::I => "i",
            LieConvention::II => "ii",
            LieConvention::III => "iii",
        }
    }
}

/// Derivative of the components of `f` along `pg` under `conv`.
pub fn lie_derivative_components(
    pg: &ProlongedGenerator,
    f: &dyn Field,
    p: &JetPoint,
    conv: LieConvention,
) -> Result<Vec<f64>> {
    let mut out = apply_generator(pg, f, p)?;
    if conv == LieConvention::I {
        return Ok(out);
    }
    let q = p.q();
    let value = f.eval(p)?;
    if value.len() != q {
        return Err(Error::Config("readings (ii) and (iii) need a field with q components".into()));
    }
    let g = pg.base();
    match conv {
        LieConvention::II => {
            let grad = gradient(g.tau().as_ref(), p)?.remove(0);
            let d1tau = grad[0] + (0..q).map(|i| p.v()[i] * grad[Coord::x(i).flat(q)]).sum::<f64>();
            for (o, e) in out.iter_mut().zip(&value) {
                *o += e * d1tau;
            }
        }
        LieConvention::III => {
            let grad = gradient(g.xi().as_ref(), p)?;
            for (a, o) in out.iter_mut().enumerate() {
                *o += (0..q).map(|b| value[b] * grad[b][Coord::x(a).flat(q)]).sum::<f64>();
            }
        }
        LieConvention::I => {}
    }
    Ok(out)
}

/// `R = 𝔏(E) − n×E − (q·v)E + (v·E)q` for the built-in spin system at `p`
/// (whose parameter slots are replaced by `sp`).
pub fn invariance_defect_spin(p: &JetPoint, n: &Vec3, q: &Vec3, sp: &SpinParams, conv: LieConvention) -> Result<Vec3> {
    if p.layout() != spin::layout() {
        return Err(Error::Config("point is not on the spin layout".into()));
    }
    let point = p.with_params(&sp.to_vec());
    let pg = prolong(&pseudo_orthogonal_generator(n, q), 3)?;
    let le = lie_derivative_components(&pg, &SpinSystem::e(), &point, conv)?;
    let e = spin::e3(&point, sp)?;
    let v: Vec3 = [point.v()[0], point.v()[1], point.v()[2]];
    let ne = spin::cross(n, &e);
    let qv = spin::dot(q, &v);
    let ve = spin::dot(&v, &e);
    Ok(std::array::from_fn(|a| le[a] - ne[a] - qv * e[a] + ve * q[a]))
}

/// `|R| / max(|E|, 1e-300)`.
pub fn relative_invariance_defect(p: &JetPoint, n: &Vec3, q: &Vec3, sp: &SpinParams, conv: LieConvention) -> Result<f64> {
    let r = invariance_defect_spin(p, n, q, sp, conv)?;
    let e = spin::e3(&p.with_params(&sp.to_vec()), sp)?;
    Ok(spin::dot(&r, &r).sqrt() / spin::dot(&e, &e).sqrt().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Zero;
    use crate::variational::Params;

    fn spin_params() -> SpinParams {
        SpinParams::new(0.6, [0.3, -0.5, 0.4], 1.1).unwrap()
    }

    fn spin_point(rng: &mut SplitMix64, sp: &SpinParams) -> JetPoint {
        loop {
            let v = rng.uniform3(-0.8, 0.8);
            if spin::bracket(&v, sp) < 0.1 {
                continue;
            }
            return spin::point(
                rng.uniform(-1.0, 1.0),
                &rng.uniform3(-1.0, 1.0),
                &v,
                &rng.uniform3(-1.0, 1.0),
                &rng.uniform3(-1.0, 1.0),
                sp,
            )
            .unwrap();
        }
    }

    #[test]
    fn contact_rows() {
        let p = JetPoint::new(0.0, &[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0], &[]).unwrap();
        let c = ContactBasis::at(&p, 2).unwrap();
        assert_eq!(c.rows.nrows(), 4);
        for r in 0..4 {
            let row = c.rows.row(r);
            assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 2);
        }
        assert_eq!(c.rows[(3, 0)], -6.0);
        assert_eq!(c.rows[(3, Coord::v(1).flat(2))], 1.0);
    }

    #[test]
    fn zero_generator_gives_zero() {
        let sp = spin_params();
        let tr = spin::triple(&sp).unwrap();
        let eps = EpsilonBar::new(&tr).unwrap();
        let pg = prolong(&Generator::zero(spin::layout()), 2).unwrap();
        let p = spin_point(&mut SplitMix64::new(3), &sp);
        let l = lie_derivative_form(&pg, &eps, &p, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn rotation_dt_block_matches_direct_derivative() {
        let sp = spin_params();
        let tr = spin::triple(&sp).unwrap();
        let eps = EpsilonBar::new(&tr).unwrap();
        let pg = prolong(&pseudo_orthogonal_generator(&[0.3, -0.2, 0.9], &[0.0; 3]), 2).unwrap();
        let k = assemble(&tr).unwrap().k;
        let mut rng = SplitMix64::new(8);
        for _ in 0..5 {
            let p = spin_point(&mut rng, &sp);
            let l = lie_derivative_form(&pg, &eps, &p, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
            let direct = apply_generator(&pg, k.as_ref(), &p).unwrap();
            for a in 0..3 {
                assert!((l.block_dt(a) - direct[a]).abs() < 1e-6, "{} vs {}", l.block_dt(a), direct[a]);
            }
        }
    }

    #[test]
    fn time_translation_of_autonomous_triple() {
        let sp = spin_params();
        let tr = spin::triple(&sp).unwrap();
        let pg = prolong(&Generator::time_translation(spin::layout()), 2).unwrap();
        let pts = multiplier_points(&tr, &SampleSpec::new(10, 4)).unwrap();
        let rep = multiplier_solve(&pg, &tr, &pts, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert!(rep.max_residual < 1e-8);
        for (_, s) in &rep.solutions {
            assert!(s.xi.iter().flatten().chain(s.omega.iter().flatten()).all(|x| x.abs() < 1e-8));
        }
    }

    #[test]
    fn step_too_large_is_reported() {
        // a form oscillating on the scale of the step
        #[derive(Debug)]
        struct Wiggle;
        impl FormField for Wiggle {
            fn layout(&self) -> Layout {
                Layout::new(1, 0)
            }
            fn jet_order(&self) -> usize {
                0
            }
            fn eval(&self, p: &JetPoint) -> Result<VectorValuedForm> {
                let mut f = VectorValuedForm::zeros(Layout::new(1, 0));
                f.set(0, Coord::T, (1e3 * p.t()).sin() * 1e3);
                Ok(f)
            }
        }
        let pg = prolong(&Generator::time_translation(Layout::new(1, 0)), 1).unwrap();
        let p = JetPoint::zeros(Layout::new(1, 0));
        assert!(matches!(
            lie_derivative_form(&pg, &Wiggle, &p, 1e-2, 1e-6),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn generator_shapes() {
        let g = pseudo_orthogonal_generator(&[0.0; 3], &[1.0, 0.0, 0.0]);
        let p = spin::point(0.7, &[0.2, 0.3, 0.4], &[0.0; 3], &[0.0; 3], &[0.0; 3], &spin_params()).unwrap();
        assert_eq!(g.tau().eval(&p).unwrap(), vec![-0.2]);
        assert_eq!(g.xi().eval(&p).unwrap(), vec![0.7, 0.0, 0.0]);
        let pa = g.param_action().unwrap().eval(&p).unwrap();
        assert_eq!(pa, vec![-0.3, 0.6, 0.0, 0.0, 0.0]);
        let zero = pseudo_orthogonal_generator(&[0.0; 3], &[0.0; 3]);
        assert_eq!(zero.xi().eval(&p).unwrap(), vec![0.0; 3]);
        assert!(pseudo_orthogonal_generator_in(Layout::new(2, 0), &[0.0; 3], &[0.0; 3], None).is_err());
    }

    #[test]
    fn zero_generator_has_zero_defect() {
        let sp = spin_params();
        let p = spin_point(&mut SplitMix64::new(1), &sp);
        for conv in LieConvention::ALL {
            assert_eq!(invariance_defect_spin(&p, &[0.0; 3], &[0.0; 3], &sp, conv).unwrap(), [0.0; 3]);
        }
    }

    #[test]
    fn rotation_defect_is_small() {
        let sp = spin_params();
        let mut rng = SplitMix64::new(12);
        for _ in 0..20 {
            let p = spin_point(&mut rng, &sp);
            let n = rng.uniform3(-1.0, 1.0);
            let r = relative_invariance_defect(&p, &n, &[0.0; 3], &sp, LieConvention::FROZEN).unwrap();
            assert!(r < 1e-8, "{r}");
        }
    }

    #[test]
    fn defect_is_linear_in_generator() {
        let sp = spin_params();
        let mut rng = SplitMix64::new(13);
        let p = spin_point(&mut rng, &sp);
        let (n1, q1, n2, q2) = (rng.uniform3(-1.0, 1.0), rng.uniform3(-1.0, 1.0), rng.uniform3(-1.0, 1.0), rng.uniform3(-1.0, 1.0));
        let sum = |a: &Vec3, b: &Vec3| -> Vec3 { std::array::from_fn(|i| a[i] + b[i]) };
        let conv = LieConvention::II;
        let r1 = invariance_defect_spin(&p, &n1, &q1, &sp, conv).unwrap();
        let r2 = invariance_defect_spin(&p, &n2, &q2, &sp, conv).unwrap();
        let r12 = invariance_defect_spin(&p, &sum(&n1, &n2), &sum(&q1, &q2), &sp, conv).unwrap();
        for i in 0..3 {
            assert!((r12[i] - r1[i] - r2[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_form_is_fixed() {
        #[derive(Debug)]
        struct Nothing(Layout);
        impl FormField for Nothing {
            fn layout(&self) -> Layout {
                self.0
            }
            fn jet_order(&self) -> usize {
                0
            }
            fn eval(&self, _: &JetPoint) -> Result<VectorValuedForm> {
                Ok(VectorValuedForm::zeros(self.0))
            }
        }
        let layout = Layout::new(2, 0);
        let tau: FieldRef = Arc::new(Zero { layout, dim: 1 });
        let xi: FieldRef = Arc::new(Polynomial::new(layout, vec![vec![(1.0, vec![(Coord::x(1), 2)])], vec![]]));
        let pg = prolong(&Generator::new(tau, xi, None).unwrap(), 1).unwrap();
        let p = JetPoint::new(0.0, &[0.1, 0.2], &[0.3, 0.4], &[0.0; 2], &[0.0; 2], &[]).unwrap();
        let l = lie_derivative_form(&pg, &Nothing(layout), &p, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(l.max_abs(), 0.0);
        let _ = Params::default();
    }
}
