//! Vector-valued fields on jet space and the derivative combinators built on
//! top of them.
//!
//! Every field can be evaluated at a [`JetPoint`] and expanded as a truncated
//! Taylor series in any subset of the flat coordinates. Closed-form fields
//! implement [`GenericField`] once over [`Scalar`]; derived fields (partial and
//! total derivatives, substitutions) compute their expansions from expansions
//! of their inputs at one degree higher.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Coord, JetPoint, Layout};
use crate::taylor::{Scalar, TaylorScalar, TaylorSpace};

pub type FieldRef = Arc<dyn Field>;

pub trait Field: Send + Sync + fmt::Debug {
    fn layout(&self) -> Layout;

    /// Number of output components.
    fn dim(&self) -> usize;

    /// Highest derivative level read (0 = x, 1 = v, 2 = v′, 3 = v″).
    fn jet_order(&self) -> usize;

    fn reads_params(&self) -> bool {
        self.layout().num_params > 0
    }

    /// Whether the field may depend on the flat coordinate `flat`.
    fn depends_on(&self, flat: usize) -> bool {
        match Coord::from_flat(flat, self.layout().q) {
            Coord::T => true,
            Coord::Jet { level, .. } => level <= self.jet_order(),
            Coord::Param(_) => self.reads_params(),
        }
    }

    fn eval(&self, p: &JetPoint) -> Result<Vec<f64>> {
        Ok(self.expand(p, &[], 0)?.iter().map(TaylorScalar::value).collect())
    }

    /// Taylor expansion at `p` of degree `degree` in the flat coordinates
    /// `vars` (all other coordinates held at their values in `p`).
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>>;
}

/// A field written once for every [`Scalar`] carrier.
pub trait GenericField: Send + Sync + fmt::Debug {
    fn layout(&self) -> Layout;
    fn dim(&self) -> usize;
    fn jet_order(&self) -> usize;
    fn reads_params(&self) -> bool {
        self.layout().num_params > 0
    }
    fn depends_on(&self, flat: usize) -> bool {
        match Coord::from_flat(flat, self.layout().q) {
            Coord::T => true,
            Coord::Jet { level, .. } => level <= self.jet_order(),
            Coord::Param(_) => self.reads_params(),
        }
    }
    fn eval_with<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>>;
}

impl<G: GenericField> Field for G {
    fn layout(&self) -> Layout {
        GenericField::layout(self)
    }
    fn dim(&self) -> usize {
        GenericField::dim(self)
    }
    fn jet_order(&self) -> usize {
        GenericField::jet_order(self)
    }
    fn reads_params(&self) -> bool {
        GenericField::reads_params(self)
    }
    fn depends_on(&self, flat: usize) -> bool {
        GenericField::depends_on(self, flat)
    }
    fn eval(&self, p: &JetPoint) -> Result<Vec<f64>> {
        self.eval_with(p.coords())
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        self.eval_with(&lift_coords(p, vars, degree)?)
    }
}

/// Like [`crate::jet::taylor_lift`] but allows an empty variable set.
pub fn lift_coords(p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
    let space = TaylorSpace::get(vars.len(), degree)?;
    let mut out: Vec<TaylorScalar> = p
        .coords()
        .iter()
        .map(|&c| TaylorScalar::constant(&space, c))
        .collect();
    for (var, &flat) in vars.iter().enumerate() {
        out[flat] = TaylorScalar::variable(&space, var, p.coords()[flat]);
    }
    Ok(out)
}

/// Expands `field` in `vars`, skipping variables the field cannot depend on.
pub fn expand_in(field: &dyn Field, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
    let kept: Vec<usize> = vars.iter().copied().filter(|&v| field.depends_on(v)).collect();
    if kept.len() == vars.len() {
        return field.expand(p, vars, degree);
    }
    let inner = field.expand(p, &kept, degree)?;
    let target = TaylorSpace::get(vars.len(), degree)?;
    let map: Vec<Option<usize>> = vars.iter().map(|v| kept.iter().position(|k| k == v)).collect();
    Ok(inner.iter().map(|t| t.remap(&target, &map)).collect())
}

/// Extends `vars` by `extra` (without duplicates), keeping `vars` first.
fn extend_vars(vars: &[usize], extra: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut w = vars.to_vec();
    for e in extra {
        if !w.contains(&e) {
            w.push(e);
        }
    }
    w
}

/// Restricts expansions over `w` (with `vars` as its prefix) to `vars` at `degree`.
fn restrict(values: Vec<TaylorScalar>, n_vars: usize, degree: usize) -> Result<Vec<TaylorScalar>> {
    let target = TaylorSpace::get(n_vars, degree)?;
    let map: Vec<Option<usize>> = (0..n_vars).map(Some).collect();
    Ok(values.iter().map(|t| t.remap(&target, &map)).collect())
}

/// Evaluates `field` with coordinates given as Taylor expansions in some
/// external variables: the field is expanded at the inputs' constant terms
/// and composed with their non-constant parts.
pub fn eval_lifted(field: &dyn Field, inputs: &[TaylorScalar]) -> Result<Vec<TaylorScalar>> {
    let layout = field.layout();
    if inputs.len() != layout.len() {
        return Err(Error::Config(format!(
            "expected {} lifted coordinates, got {}",
            layout.len(),
            inputs.len()
        )));
    }
    let values: Vec<f64> = inputs.iter().map(TaylorScalar::value).collect();
    let p = JetPoint::from_flat(layout, values)?;
    let active: Vec<usize> = (0..inputs.len())
        .filter(|&i| field.depends_on(i) && inputs[i].coeffs()[1..].iter().any(|&c| c != 0.0))
        .collect();
    let degree = inputs.first().map_or(0, TaylorScalar::degree);
    let local = field.expand(&p, &active, degree)?;
    let args: Vec<TaylorScalar> = active.iter().map(|&i| inputs[i].clone()).collect();
    if args.is_empty() {
        let space = inputs[0].space();
        return Ok(local
            .iter()
            .map(|t| TaylorScalar::constant(space, t.value()))
            .collect());
    }
    Ok(local.iter().map(|t| t.compose(&args)).collect())
}

/// Gradient of every component with respect to all coordinates the field
/// depends on, as rows of length `layout.len()`.
pub fn gradient(field: &dyn Field, p: &JetPoint) -> Result<Vec<Vec<f64>>> {
    let n = field.layout().len();
    let vars: Vec<usize> = (0..n).filter(|&i| field.depends_on(i)).collect();
    let exp = field.expand(p, &vars, 1)?;
    Ok(exp
        .iter()
        .map(|t| {
            let mut row = vec![0.0; n];
            for (k, &v) in vars.iter().enumerate() {
                row[v] = t.gradient(k);
            }
            row
        })
        .collect())
}

/// `∂f/∂z` for one flat coordinate `z`.
#[derive(Debug, Clone)]
pub struct Partial {
    inner: FieldRef,
    coord: usize,
}

impl Partial {
    pub fn new(inner: FieldRef, coord: Coord) -> Self {
        let coord = coord.flat(inner.layout().q);
        Partial { inner, coord }
    }
}

impl Field for Partial {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet_order(&self) -> usize {
        self.inner.jet_order()
    }
    fn reads_params(&self) -> bool {
        self.inner.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.inner.depends_on(flat)
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        if !self.inner.depends_on(self.coord) {
            let space = TaylorSpace::get(vars.len(), degree)?;
            return Ok(vec![TaylorScalar::zero(&space); self.dim()]);
        }
        let w = extend_vars(vars, [self.coord]);
        let pos = w.iter().position(|&c| c == self.coord).unwrap();
        let f = expand_in(self.inner.as_ref(), p, &w, degree + 1)?;
        restrict(f.iter().map(|t| t.partial(pos)).collect(), vars.len(), degree)
    }
}

/// All partials of `inner` with respect to a list of coordinates; component
/// `i * coords.len() + b` is `∂f_i/∂z_b`.
#[derive(Debug, Clone)]
pub struct Jacobian {
    inner: FieldRef,
    coords: Vec<usize>,
}

impl Jacobian {
    pub fn new(inner: FieldRef, coords: &[Coord]) -> Self {
        let q = inner.layout().q;
        Jacobian {
            coords: coords.iter().map(|c| c.flat(q)).collect(),
            inner,
        }
    }

    /// Partials with respect to a full derivative level (`q` columns).
    pub fn level(inner: FieldRef, level: usize) -> Self {
        let q = inner.layout().q;
        let coords: Vec<Coord> = (0..q).map(|index| Coord::Jet { level, index }).collect();
        Self::new(inner, &coords)
    }
}

impl Field for Jacobian {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }
    fn dim(&self) -> usize {
        self.inner.dim() * self.coords.len()
    }
    fn jet_order(&self) -> usize {
        self.inner.jet_order()
    }
    fn reads_params(&self) -> bool {
        self.inner.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.inner.depends_on(flat)
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let w = extend_vars(vars, self.coords.iter().copied());
        let f = expand_in(self.inner.as_ref(), p, &w, degree + 1)?;
        let mut out = Vec::with_capacity(self.dim());
        for fi in &f {
            for c in &self.coords {
                let pos = w.iter().position(|x| x == c).unwrap();
                out.push(fi.partial(pos));
            }
        }
        restrict(out, vars.len(), degree)
    }
}

/// Truncated total derivative `D_s = ∂_t + Σ_{l<s} v^{(l+1)}·∂_{v^{(l)}}`.
///
/// `levels = 1` is `D₁ = ∂_t + v·∂_x`; `levels = k + 1` on a field of jet
/// order `k` is the full total derivative.
#[derive(Debug, Clone)]
pub struct TotalDerivative {
    inner: FieldRef,
    levels: usize,
}

impl TotalDerivative {
    pub fn new(inner: FieldRef, levels: usize) -> Result<Self> {
        if levels == 0 || levels > 3 {
            return Err(Error::Config(format!(
                "total derivative needs 1..=3 levels, got {levels}"
            )));
        }
        Ok(TotalDerivative { inner, levels })
    }

    /// `D₁ = ∂_t + v·∂_x`.
    pub fn d1(inner: FieldRef) -> Self {
        TotalDerivative { inner, levels: 1 }
    }

    /// The total derivative that raises the jet order of `inner` by one.
    pub fn full(inner: FieldRef) -> Result<Self> {
        let k = inner.jet_order();
        Self::new(inner, k + 1)
    }
}

impl Field for TotalDerivative {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet_order(&self) -> usize {
        self.inner.jet_order().max(self.levels)
    }
    fn reads_params(&self) -> bool {
        self.inner.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        let q = self.layout().q;
        match Coord::from_flat(flat, q) {
            Coord::Jet { level, .. } if (1..=self.levels).contains(&level) => true,
            _ => self.inner.depends_on(flat),
        }
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let layout = self.layout();
        let q = layout.q;
        let mut dirs = vec![0usize];
        for l in 0..self.levels {
            dirs.extend(layout.level(l));
        }
        dirs.retain(|&d| self.inner.depends_on(d));
        let w = extend_vars(vars, dirs.iter().copied());
        let f = expand_in(self.inner.as_ref(), p, &w, degree + 1)?;
        let space = TaylorSpace::get(w.len(), degree + 1)?;
        // multiplier for direction z = (l, a) is the coordinate (l + 1, a)
        let multiplier = |flat: usize| -> TaylorScalar {
            let value = p.coords()[flat];
            match w.iter().position(|&c| c == flat) {
                Some(k) => TaylorScalar::variable(&space, k, value),
                None => TaylorScalar::constant(&space, value),
            }
        };
        let mut out = Vec::with_capacity(f.len());
        for fi in &f {
            let mut acc = TaylorScalar::zero(&space);
            for &d in &dirs {
                let pos = w.iter().position(|&c| c == d).unwrap();
                let df = fi.partial(pos);
                if d == 0 {
                    acc = acc + df;
                } else {
                    let next = d + q;
                    acc = acc + df * multiplier(next);
                }
            }
            out.push(acc);
        }
        restrict(out, vars.len(), degree)
    }
}

/// `inner` with some coordinates frozen at fixed values.
#[derive(Debug, Clone)]
pub struct Substitute {
    inner: FieldRef,
    fixes: Vec<(usize, f64)>,
    jet_order: usize,
}

impl Substitute {
    pub fn new(inner: FieldRef, fixes: &[(Coord, f64)], jet_order: usize) -> Self {
        let q = inner.layout().q;
        Substitute {
            fixes: fixes.iter().map(|(c, v)| (c.flat(q), *v)).collect(),
            inner,
            jet_order,
        }
    }

    /// Freezes every coordinate of the given levels at zero.
    pub fn zero_levels(inner: FieldRef, levels: &[usize], jet_order: usize) -> Self {
        let q = inner.layout().q;
        let fixes: Vec<(Coord, f64)> = levels
            .iter()
            .flat_map(|&level| (0..q).map(move |index| (Coord::Jet { level, index }, 0.0)))
            .collect();
        Self::new(inner, &fixes, jet_order)
    }

    fn fixed(&self, flat: usize) -> bool {
        self.fixes.iter().any(|(c, _)| *c == flat)
    }

    fn moved(&self, p: &JetPoint) -> JetPoint {
        let mut p2 = p.clone();
        for &(c, v) in &self.fixes {
            p2.coords_mut()[c] = v;
        }
        p2
    }
}

impl Field for Substitute {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet_order(&self) -> usize {
        self.jet_order
    }
    fn reads_params(&self) -> bool {
        self.inner.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        !self.fixed(flat) && self.inner.depends_on(flat)
    }
    fn eval(&self, p: &JetPoint) -> Result<Vec<f64>> {
        self.inner.eval(&self.moved(p))
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let kept: Vec<usize> = vars.iter().copied().filter(|&v| !self.fixed(v)).collect();
        let inner = expand_in(self.inner.as_ref(), &self.moved(p), &kept, degree)?;
        if kept.len() == vars.len() {
            return Ok(inner);
        }
        let target = TaylorSpace::get(vars.len(), degree)?;
        let map: Vec<Option<usize>> = vars.iter().map(|v| kept.iter().position(|k| k == v)).collect();
        Ok(inner.iter().map(|t| t.remap(&target, &map)).collect())
    }
}

/// Concatenation of several fields' components.
#[derive(Debug, Clone)]
pub struct Stack {
    parts: Vec<FieldRef>,
    layout: Layout,
}

impl Stack {
    pub fn new(parts: Vec<FieldRef>) -> Result<Self> {
        let layout = parts
            .first()
            .map(|f| f.layout())
            .ok_or_else(|| Error::Config("empty field stack".into()))?;
        if parts.iter().any(|f| f.layout() != layout) {
            return Err(Error::Config("stacked fields disagree on layout".into()));
        }
        Ok(Stack { parts, layout })
    }
}

impl Field for Stack {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.parts.iter().map(|f| f.dim()).sum()
    }
    fn jet_order(&self) -> usize {
        self.parts.iter().map(|f| f.jet_order()).max().unwrap_or(0)
    }
    fn reads_params(&self) -> bool {
        self.parts.iter().any(|f| f.reads_params())
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.parts.iter().any(|f| f.depends_on(flat))
    }
    fn eval(&self, p: &JetPoint) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        for f in &self.parts {
            out.extend(f.eval(p)?);
        }
        Ok(out)
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let mut out = Vec::with_capacity(self.dim());
        for f in &self.parts {
            out.extend(expand_in(f.as_ref(), p, vars, degree)?);
        }
        Ok(out)
    }
}

/// Selected components of another field.
#[derive(Debug, Clone)]
pub struct Components {
    inner: FieldRef,
    indices: Vec<usize>,
}

impl Components {
    pub fn new(inner: FieldRef, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= inner.dim()) {
            return Err(Error::Config(format!(
                "component {bad} out of range for a field of dimension {}",
                inner.dim()
            )));
        }
        Ok(Components { inner, indices })
    }
}

impl Field for Components {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }
    fn dim(&self) -> usize {
        self.indices.len()
    }
    fn jet_order(&self) -> usize {
        self.inner.jet_order()
    }
    fn reads_params(&self) -> bool {
        self.inner.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.inner.depends_on(flat)
    }
    fn eval(&self, p: &JetPoint) -> Result<Vec<f64>> {
        let all = self.inner.eval(p)?;
        Ok(self.indices.iter().map(|&i| all[i]).collect())
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let all = self.inner.expand(p, vars, degree)?;
        Ok(self.indices.iter().map(|&i| all[i].clone()).collect())
    }
}

/// Componentwise linear combination `Σ w_k f_k` of same-shaped fields.
#[derive(Debug, Clone)]
pub struct Combination {
    terms: Vec<(f64, FieldRef)>,
    layout: Layout,
    dim: usize,
}

impl Combination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Config("empty linear combination".into()))?;
        let layout = first.layout();
        let dim = first.dim();
        if terms.iter().any(|(_, f)| f.layout() != layout || f.dim() != dim) {
            return Err(Error::Config("combined fields disagree on shape".into()));
        }
        Ok(Combination { terms, layout, dim })
    }
}

impl Field for Combination {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet_order(&self) -> usize {
        self.terms.iter().map(|(_, f)| f.jet_order()).max().unwrap_or(0)
    }
    fn reads_params(&self) -> bool {
        self.terms.iter().any(|(_, f)| f.reads_params())
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.terms.iter().any(|(_, f)| f.depends_on(flat))
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let space = TaylorSpace::get(vars.len(), degree)?;
        let mut acc = vec![TaylorScalar::zero(&space); self.dim];
        for (w, f) in &self.terms {
            let vals = expand_in(f.as_ref(), p, vars, degree)?;
            for (a, v) in acc.iter_mut().zip(vals) {
                *a = a.clone() + v.scale(*w);
            }
        }
        Ok(acc)
    }
}

/// A field that is identically zero.
#[derive(Debug, Clone)]
pub struct Zero {
    pub layout: Layout,
    pub dim: usize,
}

impl GenericField for Zero {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet_order(&self) -> usize {
        0
    }
    fn reads_params(&self) -> bool {
        false
    }
    fn eval_with<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        Ok(vec![coords[0].lift(0.0); self.dim])
    }
}

/// Sparse polynomial in the flat coordinates, one term list per component.
#[derive(Debug, Clone)]
pub struct Polynomial {
    layout: Layout,
    /// per component: (coefficient, [(flat coordinate, exponent)])
    components: Vec<Vec<(f64, Vec<(usize, u8)>)>>,
    jet_order: usize,
}

impl Polynomial {
    pub fn new(layout: Layout, components: Vec<Vec<(f64, Vec<(Coord, u8)>)>>) -> Self {
        let q = layout.q;
        let mut jet_order = 0;
        let components = components
            .into_iter()
            .map(|terms| {
                terms
                    .into_iter()
                    .map(|(c, factors)| {
                        let factors = factors
                            .into_iter()
                            .map(|(coord, e)| {
                                if let Coord::Jet { level, .. } = coord {
                                    jet_order = jet_order.max(level);
                                }
                                (coord.flat(q), e)
                            })
                            .collect();
                        (c, factors)
                    })
                    .collect()
            })
            .collect();
        Polynomial {
            layout,
            components,
            jet_order,
        }
    }

    pub fn with_jet_order(mut self, order: usize) -> Self {
        self.jet_order = self.jet_order.max(order);
        self
    }
}

impl GenericField for Polynomial {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn jet_order(&self) -> usize {
        self.jet_order
    }
    fn eval_with<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        let zero = coords[0].lift(0.0);
        let mut out = Vec::with_capacity(self.components.len());
        for terms in &self.components {
            let mut acc = zero.clone();
            for (c, factors) in terms {
                let mut term = zero.lift(*c);
                for &(flat, e) in factors {
                    term = term * coords[flat].powi(e as i32)?;
                }
                acc = acc + term;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout1() -> Layout {
        Layout::new(1, 0)
    }

    fn point1(t: f64, x: f64, v: f64, vp: f64, vpp: f64) -> JetPoint {
        JetPoint::new(t, &[x], &[v], &[vp], &[vpp], &[]).unwrap()
    }

    #[test]
    fn d1_of_position_is_velocity() {
        let x: FieldRef = Arc::new(Polynomial::new(layout1(), vec![vec![(1.0, vec![(Coord::x(0), 1)])]]));
        let d = TotalDerivative::full(x).unwrap();
        assert_eq!(d.eval(&point1(0.0, 2.0, 5.0, 7.0, 0.0)).unwrap(), vec![5.0]);
    }

    #[test]
    fn d2_of_velocity_is_acceleration() {
        let v: FieldRef = Arc::new(Polynomial::new(layout1(), vec![vec![(1.0, vec![(Coord::v(0), 1)])]]));
        let d = TotalDerivative::full(v).unwrap();
        assert_eq!(d.jet_order(), 2);
        assert_eq!(d.eval(&point1(0.0, 2.0, 5.0, 7.0, 0.0)).unwrap(), vec![7.0]);
    }

    #[test]
    fn total_derivative_of_t_x() {
        // D(t·x) = x + t·v = 3 + 2·5
        let f: FieldRef = Arc::new(Polynomial::new(
            layout1(),
            vec![vec![(1.0, vec![(Coord::T, 1), (Coord::x(0), 1)])]],
        ));
        let d = TotalDerivative::full(f).unwrap();
        assert_eq!(d.eval(&point1(2.0, 3.0, 5.0, 0.0, 0.0)).unwrap(), vec![13.0]);
    }

    #[test]
    fn d1_ignores_velocity_dependence() {
        // D₁(v²) = 0 while the full D₂(v²) = 2 v v′
        let f: FieldRef = Arc::new(Polynomial::new(layout1(), vec![vec![(1.0, vec![(Coord::v(0), 2)])]]));
        let p = point1(0.0, 0.0, 3.0, 2.0, 0.0);
        assert_eq!(TotalDerivative::d1(f.clone()).eval(&p).unwrap(), vec![0.0]);
        assert_eq!(TotalDerivative::full(f).unwrap().eval(&p).unwrap(), vec![12.0]);
    }

    #[test]
    fn nested_total_derivatives_of_cubic() {
        // D³(x³) along (x, v, v′, v″) = 6 v³ + 18 x v v′ + 3 x² v″
        let f: FieldRef = Arc::new(Polynomial::new(layout1(), vec![vec![(1.0, vec![(Coord::x(0), 3)])]]));
        let d1: FieldRef = Arc::new(TotalDerivative::full(f).unwrap());
        let d2: FieldRef = Arc::new(TotalDerivative::full(d1).unwrap());
        let d3 = TotalDerivative::full(d2).unwrap();
        let (x, v, vp, vpp) = (1.5, -0.5, 2.0, 0.25);
        let expected = 6.0 * v * v * v + 18.0 * x * v * vp + 3.0 * x * x * vpp;
        let got = d3.eval(&point1(0.0, x, v, vp, vpp)).unwrap()[0];
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn partial_and_substitute() {
        // f = x v² + t ; ∂_v f = 2 x v ; at v = 0 → f = t
        let f: FieldRef = Arc::new(Polynomial::new(
            layout1(),
            vec![vec![(1.0, vec![(Coord::x(0), 1), (Coord::v(0), 2)]), (1.0, vec![(Coord::T, 1)])]],
        ));
        let p = point1(4.0, 3.0, 2.0, 0.0, 0.0);
        assert_eq!(Partial::new(f.clone(), Coord::v(0)).eval(&p).unwrap(), vec![12.0]);
        let s = Substitute::new(f, &[(Coord::v(0), 0.0)], 0);
        assert_eq!(s.eval(&p).unwrap(), vec![4.0]);
        let e = s.expand(&p, &[0, 2], 1).unwrap();
        assert_eq!(e[0].gradient(0), 1.0);
        assert_eq!(e[0].gradient(1), 0.0);
    }

    #[test]
    fn eval_lifted_matches_chain_rule() {
        // f = x², inputs x = 3 + 2y
        let f = Polynomial::new(layout1(), vec![vec![(1.0, vec![(Coord::x(0), 2)])]]);
        let space = TaylorSpace::get(1, 1).unwrap();
        let mut inputs: Vec<TaylorScalar> = point1(0.0, 3.0, 0.0, 0.0, 0.0)
            .coords()
            .iter()
            .map(|&c| TaylorScalar::constant(&space, c))
            .collect();
        inputs[1] = TaylorScalar::variable(&space, 0, 3.0).scale(2.0).add_constant(-3.0);
        let out = eval_lifted(&f, &inputs).unwrap();
        assert_eq!(out[0].value(), 9.0);
        assert_eq!(out[0].gradient(0), 12.0);
    }
}
