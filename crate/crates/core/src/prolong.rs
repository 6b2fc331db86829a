//! Point-transformation generators, their jet prolongations, and flows.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{eval_lifted, expand_in, gradient, Field, FieldRef, TotalDerivative, Zero};
use crate::jet::{Coord, JetPoint, Layout, LEVELS};
use crate::taylor::{TaylorScalar, TaylorSpace};

/// Generator `τ ∂_t + ξᵃ ∂_{xᵃ}` with an optional action on the parameters.
#[derive(Debug, Clone)]
pub struct Generator {
    layout: Layout,
    tau: FieldRef,
    xi: FieldRef,
    param_action: Option<FieldRef>,
}

impl Generator {
    pub fn new(tau: FieldRef, xi: FieldRef, param_action: Option<FieldRef>) -> Result<Self> {
        let layout = tau.layout();
        if xi.layout() != layout || param_action.as_ref().is_some_and(|f| f.layout() != layout) {
            return Err(Error::Config("generator coefficients disagree on layout".into()));
        }
        if tau.dim() != 1 || xi.dim() != layout.q {
            return Err(Error::Config(format!(
                "generator needs a scalar tau and {} xi components, got {} and {}",
                layout.q,
                tau.dim(),
                xi.dim()
            )));
        }
        if let Some(pa) = &param_action {
            if pa.dim() != layout.num_params {
                return Err(Error::Config(format!(
                    "parameter action has {} components for {} parameters",
                    pa.dim(),
                    layout.num_params
                )));
            }
        }
        for (name, f) in [("tau", &tau), ("xi", &xi)]
            .into_iter()
            .chain(param_action.iter().map(|f| ("param_action", f)))
        {
            if f.jet_order() > 0 {
                return Err(Error::Config(format!(
                    "generator coefficient {name} may depend only on t, x and parameters"
                )));
            }
        }
        Ok(Generator {
            layout,
            tau,
            xi,
            param_action,
        })
    }

    pub fn zero(layout: Layout) -> Self {
        let z = |dim| -> FieldRef { Arc::new(Zero { layout, dim }) };
        Generator {
            layout,
            tau: z(1),
            xi: z(layout.q),
            param_action: None,
        }
    }

    /// `∂_t`.
    pub fn time_translation(layout: Layout) -> Self {
        let tau = crate::field::Polynomial::new(layout, vec![vec![(1.0, vec![])]]);
        Generator {
            layout,
            tau: Arc::new(tau),
            xi: Arc::new(Zero { layout, dim: layout.q }),
            param_action: None,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn tau(&self) -> &FieldRef {
        &self.tau
    }

    pub fn xi(&self) -> &FieldRef {
        &self.xi
    }

    pub fn param_action(&self) -> Option<&FieldRef> {
        self.param_action.as_ref()
    }
}

/// `coeffs[j] = D(coeffs[j-1]) − v^{(j)}·D₁τ`.
#[derive(Debug, Clone)]
struct ProlongationCoefficient {
    d_prev: FieldRef,
    d_tau: FieldRef,
    level: usize,
}

impl Field for ProlongationCoefficient {
    fn layout(&self) -> Layout {
        self.d_prev.layout()
    }
    fn dim(&self) -> usize {
        self.d_prev.dim()
    }
    fn jet_order(&self) -> usize {
        self.level
    }
    fn reads_params(&self) -> bool {
        self.d_prev.reads_params() || self.d_tau.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.d_prev.depends_on(flat)
            || self.d_tau.depends_on(flat)
            || matches!(Coord::from_flat(flat, self.layout().q), Coord::Jet { level, .. } if level == self.level)
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let q = self.layout().q;
        let space = TaylorSpace::get(vars.len(), degree)?;
        let d_prev = expand_in(self.d_prev.as_ref(), p, vars, degree)?;
        let d_tau = expand_in(self.d_tau.as_ref(), p, vars, degree)?.remove(0);
        Ok(d_prev
            .into_iter()
            .enumerate()
            .map(|(a, dp)| {
                let flat = Coord::Jet { level: self.level, index: a }.flat(q);
                let value = p.coords()[flat];
                let m = match vars.iter().position(|&v| v == flat) {
                    Some(k) => TaylorScalar::variable(&space, k, value),
                    None => TaylorScalar::constant(&space, value),
                };
                dp - m * d_tau.clone()
            })
            .collect())
    }
}

/// A generator together with its prolongation coefficients up to `order`.
#[derive(Debug, Clone)]
pub struct ProlongedGenerator {
    base: Generator,
    order: usize,
    /// `coeffs[0]` is ξ; `coeffs[j]` acts on `v^{(j)}`.
    coeffs: Vec<FieldRef>,
}

/// Prolongs `g` to jet order `order` (1..=3).
pub fn prolong(g: &Generator, order: usize) -> Result<ProlongedGenerator> {
    if order == 0 || order >= LEVELS {
        return Err(Error::Config(format!("prolongation order must be 1..=3, got {order}")));
    }
    let d_tau: FieldRef = Arc::new(TotalDerivative::d1(g.tau.clone()));
    let mut coeffs = vec![g.xi.clone()];
    for level in 1..=order {
        let prev = coeffs[level - 1].clone();
        let d_prev: FieldRef = Arc::new(TotalDerivative::new(prev, level)?);
        coeffs.push(Arc::new(ProlongationCoefficient {
            d_prev,
            d_tau: d_tau.clone(),
            level,
        }));
    }
    Ok(ProlongedGenerator {
        base: g.clone(),
        order,
        coeffs,
    })
}

impl ProlongedGenerator {
    pub fn base(&self) -> &Generator {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layout(&self) -> Layout {
        self.base.layout
    }

    /// Coefficient field acting on derivative level `level` (0 = ξ).
    pub fn coefficient(&self, level: usize) -> Option<&FieldRef> {
        self.coeffs.get(level)
    }

    /// The prolonged generator as a vector field on all flat coordinates.
    pub fn vector_field(&self) -> GeneratorField {
        GeneratorField { pg: self.clone() }
    }
}

/// Components of a prolonged generator over the full coordinate vector:
/// `(τ, ξ, coeffs[1], …, coeffs[order], 0, …, param_action)`.
#[derive(Debug, Clone)]
pub struct GeneratorField {
    pg: ProlongedGenerator,
}

impl Field for GeneratorField {
    fn layout(&self) -> Layout {
        self.pg.layout()
    }
    fn dim(&self) -> usize {
        self.layout().len()
    }
    fn jet_order(&self) -> usize {
        self.pg.order
    }
    fn reads_params(&self) -> bool {
        self.pg.coeffs.iter().any(|c| c.reads_params())
            || self.pg.base.tau.reads_params()
            || self.pg.base.param_action.is_some()
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.pg.base.tau.depends_on(flat)
            || self.pg.coeffs.iter().any(|c| c.depends_on(flat))
            || self.pg.base.param_action.as_ref().is_some_and(|f| f.depends_on(flat))
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let layout = self.layout();
        let space = TaylorSpace::get(vars.len(), degree)?;
        let mut out = expand_in(self.pg.base.tau.as_ref(), p, vars, degree)?;
        for level in 0..LEVELS {
            match self.pg.coeffs.get(level) {
                Some(c) => out.extend(expand_in(c.as_ref(), p, vars, degree)?),
                None => out.extend(std::iter::repeat(TaylorScalar::zero(&space)).take(layout.q)),
            }
        }
        match &self.pg.base.param_action {
            Some(pa) => out.extend(expand_in(pa.as_ref(), p, vars, degree)?),
            None => out.extend(std::iter::repeat(TaylorScalar::zero(&space)).take(layout.num_params)),
        }
        Ok(out)
    }
}

/// Directional derivative of every component of `f` along the prolonged
/// generator, including its action on parameters.
pub fn apply_generator(pg: &ProlongedGenerator, f: &dyn Field, p: &JetPoint) -> Result<Vec<f64>> {
    if f.jet_order() > pg.order {
        return Err(Error::Config(format!(
            "field of jet order {} needs a prolongation of at least that order (have {})",
            f.jet_order(),
            pg.order
        )));
    }
    if f.layout() != pg.layout() {
        return Err(Error::Config("field and generator disagree on layout".into()));
    }
    let direction = pg.vector_field().eval(p)?;
    let grad = gradient(f, p)?;
    Ok(grad
        .iter()
        .map(|row| row.iter().zip(&direction).map(|(g, d)| g * d).sum())
        .collect())
}

/// Result of one flow step: the advanced point and the Jacobian of the step
/// map with respect to every flat coordinate.
#[derive(Debug, Clone)]
pub struct FlowStep {
    pub point: JetPoint,
    pub jacobian: DMatrix<f64>,
}

/// Advances `p` along the prolonged generator by one classical fourth-order
/// Runge–Kutta step of size `epsilon`. The step runs on degree-1 Taylor
/// lifts of every coordinate, so the constant terms give the new point and
/// the first-order terms give the Jacobian.
pub fn flow_step(pg: &ProlongedGenerator, p: &JetPoint, epsilon: f64) -> Result<FlowStep> {
    let layout = pg.layout();
    let n = layout.len();
    let field = pg.vector_field();
    let space = TaylorSpace::get(n, 1)?;
    let z0: Vec<TaylorScalar> = p
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &c)| TaylorScalar::variable(&space, i, c))
        .collect();

    let axpy = |z: &[TaylorScalar], k: &[TaylorScalar], h: f64| -> Vec<TaylorScalar> {
        z.iter().zip(k).map(|(a, b)| a.clone() + b.scale(h)).collect()
    };
    let k1 = eval_lifted(&field, &z0)?;
    let k2 = eval_lifted(&field, &axpy(&z0, &k1, 0.5 * epsilon))?;
    let k3 = eval_lifted(&field, &axpy(&z0, &k2, 0.5 * epsilon))?;
    let k4 = eval_lifted(&field, &axpy(&z0, &k3, epsilon))?;
    let mut z1 = Vec::with_capacity(n);
    for i in 0..n {
        let incr = k1[i].clone() + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i].clone();
        z1.push(z0[i].clone() + incr.scale(epsilon / 6.0));
    }
    if z1.iter().any(|z| !z.is_finite()) {
        return Err(Error::FlowDivergence(format!(
            "non-finite state after a step of size {epsilon}"
        )));
    }
    let point = JetPoint::from_flat(layout, z1.iter().map(TaylorScalar::value).collect())?;
    let jacobian = DMatrix::from_fn(n, n, |i, j| z1[i].gradient(j));
    Ok(FlowStep { point, jacobian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Polynomial;

    fn rotation_z(layout: Layout) -> Generator {
        // ξ = e₃ × x = (−x₂, x₁, 0)
        let xi = Polynomial::new(
            layout,
            vec![
                vec![(-1.0, vec![(Coord::x(1), 1)])],
                vec![(1.0, vec![(Coord::x(0), 1)])],
                vec![],
            ],
        );
        Generator::new(Arc::new(Zero { layout, dim: 1 }), Arc::new(xi), None).unwrap()
    }

    fn sample_point() -> JetPoint {
        JetPoint::new(0.3, &[0.0, 1.0, 0.0], &[0.2, -0.1, 0.4], &[0.5, 0.3, -0.2], &[0.1, 0.2, 0.3], &[]).unwrap()
    }

    #[test]
    fn rotation_prolongs_to_rotated_derivatives() {
        let layout = Layout::new(3, 0);
        let pg = prolong(&rotation_z(layout), 3).unwrap();
        let p = sample_point();
        let cross = |a: &[f64]| vec![-a[1], a[0], 0.0];
        for level in 1..=3 {
            let c = pg.coefficient(level).unwrap().eval(&p).unwrap();
            assert_eq!(c, cross(p.level(level)), "level {level}");
        }
    }

    #[test]
    fn apply_generator_on_coordinate() {
        let layout = Layout::new(3, 0);
        let pg = prolong(&rotation_z(layout), 1).unwrap();
        let x1 = Polynomial::new(layout, vec![vec![(1.0, vec![(Coord::x(0), 1)])]]);
        let p = sample_point();
        // (e₃ × x)¹ = −x₂ = −1
        assert_eq!(apply_generator(&pg, &x1, &p).unwrap(), vec![-1.0]);
    }

    #[test]
    fn zero_and_time_translation_act_trivially() {
        let layout = Layout::new(3, 0);
        let p = sample_point();
        let f = Polynomial::new(layout, vec![vec![(2.0, vec![(Coord::x(0), 2), (Coord::vp(2), 1)])]]);
        for g in [Generator::zero(layout), Generator::time_translation(layout)] {
            let pg = prolong(&g, 3).unwrap();
            for level in 1..=3 {
                let c = pg.coefficient(level).unwrap().eval(&p).unwrap();
                assert!(c.iter().all(|&x| x == 0.0));
            }
            assert_eq!(apply_generator(&pg, &f, &p).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn apply_generator_rejects_low_order() {
        let layout = Layout::new(3, 0);
        let pg = prolong(&rotation_z(layout), 1).unwrap();
        let f = Polynomial::new(layout, vec![vec![(1.0, vec![(Coord::vpp(0), 1)])]]);
        assert!(matches!(apply_generator(&pg, &f, &sample_point()), Err(Error::Config(_))));
    }

    #[test]
    fn time_translation_flow_shifts_t() {
        let layout = Layout::new(3, 0);
        let pg = prolong(&Generator::time_translation(layout), 3).unwrap();
        let p = sample_point();
        let step = flow_step(&pg, &p, 0.25).unwrap();
        assert!((step.point.t() - 0.55).abs() < 1e-15);
        assert_eq!(&step.point.coords()[1..], &p.coords()[1..]);
        assert_eq!(step.jacobian, DMatrix::identity(layout.len(), layout.len()));
    }

    #[test]
    fn rotation_flow_preserves_norm() {
        let layout = Layout::new(3, 0);
        let pg = prolong(&rotation_z(layout), 2).unwrap();
        let p = JetPoint::new(0.0, &[0.6, 0.8, 0.2], &[0.0; 3], &[0.0; 3], &[0.0; 3], &[]).unwrap();
        let h = 0.05;
        let step = flow_step(&pg, &p, h).unwrap();
        let n0: f64 = p.x().iter().map(|a| a * a).sum();
        let n1: f64 = step.point.x().iter().map(|a| a * a).sum();
        assert!((n0 - n1).abs() < 10.0 * h.powi(5));
    }

    #[test]
    fn bad_orders_are_rejected() {
        let layout = Layout::new(2, 0);
        assert!(prolong(&Generator::zero(layout), 0).is_err());
        assert!(prolong(&Generator::zero(layout), 4).is_err());
    }
}
