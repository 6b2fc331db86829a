//! Third-order systems of Euler–Poisson shape
//! `E = A·v″ + (v′·∂_v)A·v′ + B·v′ + c`, their coefficient triples, the
//! Helmholtz-type conditions on `(A, B, c)`, and Euler–Poisson expressions of
//! acceleration-affine Lagrangians.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{expand_in, Field, FieldRef, Jacobian, Substitute, TotalDerivative};
use crate::jet::{Coord, JetPoint, Layout};
use crate::rng::SplitMix64;
use crate::sampling::{evaluate_all, Denominators, SampleSpec};
use crate::taylor::{TaylorScalar, TaylorSpace};

/// Parameter names and values shared by a model's fields, with an optional
/// rule giving the smallest denominator at a point.
#[derive(Clone, Default)]
pub struct Params {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub denominators: Option<Denominators>,
}

impl fmt::Debug for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Params")
            .field("names", &self.names)
            .field("values", &self.values)
            .field("denominators", &self.denominators.is_some())
            .finish()
    }
}

impl Params {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        Params {
            names,
            values,
            denominators: None,
        }
    }

    pub fn with_denominators(mut self, d: Denominators) -> Self {
        self.denominators = Some(d);
        self
    }

    fn check(&self, layout: Layout) -> Result<()> {
        if self.values.len() != layout.num_params || self.names.len() != layout.num_params {
            return Err(Error::Config(format!(
                "{} parameter values / {} names for {} slots",
                self.values.len(),
                self.names.len(),
                layout.num_params
            )));
        }
        Ok(())
    }
}

fn check_field(f: &FieldRef, layout: Layout, dim: usize, max_order: usize, name: &str) -> Result<()> {
    if f.layout() != layout {
        return Err(Error::Config(format!("{name} disagrees on layout")));
    }
    if f.dim() != dim {
        return Err(Error::Config(format!("{name} has {} components, expected {dim}", f.dim())));
    }
    if f.jet_order() > max_order {
        return Err(Error::Config(format!(
            "{name} has jet order {}, at most {max_order} allowed",
            f.jet_order()
        )));
    }
    Ok(())
}

/// Coefficients `(A, B, c)` on `(t, x, v)`. `A` and `B` are stored row-major
/// (`A_ab` is component `a·q + b`).
#[derive(Debug, Clone)]
pub struct FieldTriple {
    a: FieldRef,
    b: FieldRef,
    c: FieldRef,
    params: Params,
}

impl FieldTriple {
    pub fn new(a: FieldRef, b: FieldRef, c: FieldRef, params: Params) -> Result<Self> {
        let layout = a.layout();
        let q = layout.q;
        check_field(&a, layout, q * q, 1, "A")?;
        check_field(&b, layout, q * q, 1, "B")?;
        check_field(&c, layout, q, 1, "c")?;
        params.check(layout)?;
        Ok(FieldTriple { a, b, c, params })
    }

    pub fn layout(&self) -> Layout {
        self.a.layout()
    }

    pub fn q(&self) -> usize {
        self.layout().q
    }

    pub fn a(&self) -> &FieldRef {
        &self.a
    }

    pub fn b(&self) -> &FieldRef {
        &self.b
    }

    pub fn c(&self) -> &FieldRef {
        &self.c
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `max |A + Aᵀ|` relative to `max(1, max |A|)`.
    pub fn skew_defect(&self, p: &JetPoint) -> Result<f64> {
        skew_defect(&self.a.eval(p)?, self.q())
    }
}

fn skew_defect(a: &[f64], q: usize) -> Result<f64> {
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut d = 0.0f64;
    for i in 0..q {
        for j in 0..q {
            d = d.max((a[i * q + j] + a[j * q + i]).abs());
        }
    }
    Ok(d / scale)
}

/// `E_a`, `a = 1..q`, on the order-3 jet space.
#[derive(Debug, Clone)]
pub struct ThirdOrderSystem {
    e: FieldRef,
    params: Params,
}

impl ThirdOrderSystem {
    pub fn new(e: FieldRef, params: Params) -> Result<Self> {
        let layout = e.layout();
        check_field(&e, layout, layout.q, 3, "E")?;
        params.check(layout)?;
        Ok(ThirdOrderSystem { e, params })
    }

    pub fn layout(&self) -> Layout {
        self.e.layout()
    }

    pub fn e(&self) -> &FieldRef {
        &self.e
    }

    pub fn params(&self) -> &Params {
        &self.params
    }
}

/// A Lagrange function on `(t, x, v, v′)`, affine in `v′`.
#[derive(Debug, Clone)]
pub struct LagrangianField {
    l: FieldRef,
    params: Params,
}

impl LagrangianField {
    pub fn new(l: FieldRef, params: Params) -> Result<Self> {
        let layout = l.layout();
        check_field(&l, layout, 1, 2, "L")?;
        params.check(layout)?;
        Ok(LagrangianField { l, params })
    }

    pub fn layout(&self) -> Layout {
        self.l.layout()
    }

    pub fn l(&self) -> &FieldRef {
        &self.l
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Largest second derivative in the `v′` directions at `p`.
    pub fn affinity_defect(&self, p: &JetPoint) -> Result<f64> {
        let vars: Vec<usize> = self.layout().level(2).collect();
        let l = self.l.expand(p, &vars, 2)?.remove(0);
        let n = vars.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut alpha = vec![0u8; n];
                alpha[i] += 1;
                alpha[j] += 1;
                worst = worst.max(l.derivative(&alpha).abs());
            }
        }
        Ok(worst)
    }
}

/// Taylor expansion of a single coordinate.
fn coordinate(p: &JetPoint, vars: &[usize], space: &Arc<TaylorSpace>, c: Coord) -> TaylorScalar {
    let flat = c.flat(p.q());
    let value = p.coords()[flat];
    match vars.iter().position(|&v| v == flat) {
        Some(k) => TaylorScalar::variable(space, k, value),
        None => TaylorScalar::constant(space, value),
    }
}

fn level_deps(flat: usize, q: usize, levels: &[usize]) -> bool {
    matches!(Coord::from_flat(flat, q), Coord::Jet { level, .. } if levels.contains(&level))
}

/// `K = (v′·∂_v)A·v′ + B·v′ + c`, plus `A·v″` when `with_vpp` is set.
#[derive(Debug, Clone)]
struct AssembledField {
    a: FieldRef,
    da: FieldRef,
    b: FieldRef,
    c: FieldRef,
    with_vpp: bool,
}

impl Field for AssembledField {
    fn layout(&self) -> Layout {
        self.a.layout()
    }
    fn dim(&self) -> usize {
        self.layout().q
    }
    fn jet_order(&self) -> usize {
        if self.with_vpp {
            3
        } else {
            2
        }
    }
    fn reads_params(&self) -> bool {
        self.a.reads_params() || self.b.reads_params() || self.c.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        let q = self.layout().q;
        self.a.depends_on(flat)
            || self.b.depends_on(flat)
            || self.c.depends_on(flat)
            || level_deps(flat, q, if self.with_vpp { &[2, 3] } else { &[2] })
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let q = self.layout().q;
        let space = TaylorSpace::get(vars.len(), degree)?;
        let da = expand_in(self.da.as_ref(), p, vars, degree)?;
        let b = expand_in(self.b.as_ref(), p, vars, degree)?;
        let c = expand_in(self.c.as_ref(), p, vars, degree)?;
        let vp: Vec<TaylorScalar> = (0..q).map(|i| coordinate(p, vars, &space, Coord::vp(i))).collect();
        let mut out = c;
        for a in 0..q {
            let mut acc = out[a].clone();
            for bi in 0..q {
                let mut inner = b[a * q + bi].clone();
                for ci in 0..q {
                    inner = inner + &da[(a * q + bi) * q + ci] * &vp[ci];
                }
                acc = acc + inner * vp[bi].clone();
            }
            out[a] = acc;
        }
        if self.with_vpp {
            let a_m = expand_in(self.a.as_ref(), p, vars, degree)?;
            for a in 0..q {
                for bi in 0..q {
                    let vpp = coordinate(p, vars, &space, Coord::vpp(bi));
                    out[a] = out[a].clone() + &a_m[a * q + bi] * &vpp;
                }
            }
        }
        Ok(out)
    }
}

/// A system assembled from a triple, with its `K` part.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub system: ThirdOrderSystem,
    /// `K = E − A·v″`.
    pub k: FieldRef,
}

pub fn assemble(tr: &FieldTriple) -> Result<Assembled> {
    let da: FieldRef = Arc::new(Jacobian::level(tr.a.clone(), 1));
    let build = |with_vpp| -> FieldRef {
        Arc::new(AssembledField {
            a: tr.a.clone(),
            da: da.clone(),
            b: tr.b.clone(),
            c: tr.c.clone(),
            with_vpp,
        })
    };
    Ok(Assembled {
        system: ThirdOrderSystem::new(build(true), tr.params.clone())?,
        k: build(false),
    })
}

/// Coefficients read off a system: `A = ∂E/∂v″`, `B = ∂E/∂v′` and `c = E`,
/// all at `v′ = v″ = 0`.
pub fn extract(sys: &ThirdOrderSystem) -> Result<FieldTriple> {
    let e = sys.e.clone();
    let a = Substitute::zero_levels(Arc::new(Jacobian::level(e.clone(), 3)), &[2, 3], 1);
    let b = Substitute::zero_levels(Arc::new(Jacobian::level(e.clone(), 2)), &[2, 3], 1);
    let c = Substitute::zero_levels(e, &[2, 3], 1);
    FieldTriple::new(Arc::new(a), Arc::new(b), Arc::new(c), sys.params.clone())
}

/// Extraction with diagnostics over random jets.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub triple: FieldTriple,
    /// Largest deviation of `∂E/∂v″` at random `(v′, v″)` from the extracted `A`.
    pub a_dependence: f64,
    /// Largest relative skew defect of the extracted `A`.
    pub skew_defect: f64,
    /// Largest `|assemble(extracted) − E|`.
    pub reconstruction_residual: f64,
    pub samples: usize,
    pub skipped: usize,
}

impl Extraction {
    /// Whether `A` is skew within `tol`; a system failing this is not of
    /// Euler–Poisson shape.
    pub fn is_skew(&self, tol: f64) -> bool {
        self.skew_defect <= tol
    }
}

/// [`extract`] plus diagnostics at the points of `spec`, each with `v′` and
/// `v″` drawn from `[-1, 1]`.
pub fn extract_with_diagnostics(sys: &ThirdOrderSystem, spec: &SampleSpec) -> Result<Extraction> {
    let triple = extract(sys)?;
    let layout = sys.layout();
    let q = layout.q;
    let mut points = spec.draw(layout, &sys.params.values, sys.params.denominators.as_ref())?;
    let mut rng = SplitMix64::new(spec.seed ^ 0x5EED_5EED_5EED_5EED);
    for p in &mut points {
        for level in 2..4 {
            for i in 0..q {
                p.set(Coord::Jet { level, index: i }, rng.uniform(-1.0, 1.0));
            }
        }
    }
    let rebuilt = assemble(&triple)?.system;
    let jac: FieldRef = Arc::new(Jacobian::level(sys.e.clone(), 3));
    let eval = evaluate_all(&points, |p| {
        let a = triple.a.eval(p)?;
        let a_full = jac.eval(p)?;
        let dep = a.iter().zip(&a_full).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let skew = skew_defect(&a, q)?;
        let e = sys.e.eval(p)?;
        let r = rebuilt.e.eval(p)?;
        let rec = e.iter().zip(&r).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Ok((dep, skew, rec))
    })?;
    let mut out = Extraction {
        triple,
        a_dependence: 0.0,
        skew_defect: 0.0,
        reconstruction_residual: 0.0,
        samples: points.len(),
        skipped: eval.skipped,
    };
    for (_, (dep, skew, rec)) in eval.values {
        out.a_dependence = out.a_dependence.max(dep);
        out.skew_defect = out.skew_defect.max(skew);
        out.reconstruction_residual = out.reconstruction_residual.max(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionStats {
    pub max: f64,
    pub mean: f64,
    /// Sample index and `(t, x, v)` of the largest residual.
    pub worst_sample: Option<usize>,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HelmholtzReport {
    pub conditions: BTreeMap<String, ConditionStats>,
    pub samples: usize,
    pub skipped: usize,
    pub seed: u64,
    pub domain: SampleSpec,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub brackets: Brackets,
}

impl HelmholtzReport {
    /// Names of the conditions whose maximum reaches the tolerance.
    pub fn failing(&self) -> Vec<String> {
        self.conditions
            .iter()
            .filter(|(_, s)| !(s.max < self.tolerance))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

pub const CONDITIONS: [&str; 6] = ["H1", "H2", "H3", "H4", "H5", "H6"];

/// Derived fields entering the six conditions.
struct HelmholtzFields {
    q: usize,
    d1a: FieldRef,
    d3a: FieldRef,
    jva: FieldRef,
    d1jva: FieldRef,
    d2jva: FieldRef,
    jxa: FieldRef,
    d1jxa: FieldRef,
    b: FieldRef,
    d1b: FieldRef,
    jvb: FieldRef,
    jxb: FieldRef,
    jvc: FieldRef,
    jxc: FieldRef,
    jvjvc: FieldRef,
    d1jvc: FieldRef,
}

fn d1(f: &FieldRef) -> FieldRef {
    Arc::new(TotalDerivative::d1(f.clone()))
}

fn jac(f: &FieldRef, level: usize) -> FieldRef {
    Arc::new(Jacobian::level(f.clone(), level))
}

/// Sign of the permutation taking `(0, 1, 2)` to `perm`.
const PERMS3: [([usize; 3], f64); 6] = [
    ([0, 1, 2], 1.0),
    ([1, 2, 0], 1.0),
    ([2, 0, 1], 1.0),
    ([1, 0, 2], -1.0),
    ([0, 2, 1], -1.0),
    ([2, 1, 0], -1.0),
];

impl HelmholtzFields {
    fn new(tr: &FieldTriple) -> Self {
        let d1a = d1(&tr.a);
        let d2a = d1(&d1a);
        let jva = jac(&tr.a, 1);
        let d1jva = d1(&jva);
        let jxa = jac(&tr.a, 0);
        let jvc = jac(&tr.c, 1);
        HelmholtzFields {
            q: tr.q(),
            d3a: d1(&d2a),
            d1a,
            d2jva: d1(&d1jva),
            d1jva,
            jva,
            d1jxa: d1(&jxa),
            jxa,
            b: tr.b.clone(),
            d1b: d1(&tr.b),
            jvb: jac(&tr.b, 1),
            jxb: jac(&tr.b, 0),
            jxc: jac(&tr.c, 0),
            jvjvc: jac(&jvc, 1),
            d1jvc: d1(&jvc),
            jvc,
        }
    }

    fn values(&self, p: &JetPoint) -> Result<HelmholtzValues> {
        Ok(HelmholtzValues {
            q: self.q,
            d1a: self.d1a.eval(p)?,
            d3a: self.d3a.eval(p)?,
            jva: self.jva.eval(p)?,
            d1jva: self.d1jva.eval(p)?,
            d2jva: self.d2jva.eval(p)?,
            jxa: self.jxa.eval(p)?,
            d1jxa: self.d1jxa.eval(p)?,
            b: self.b.eval(p)?,
            d1b: self.d1b.eval(p)?,
            jvb: self.jvb.eval(p)?,
            jxb: self.jxb.eval(p)?,
            jvc: self.jvc.eval(p)?,
            jxc: self.jxc.eval(p)?,
            jvjvc: self.jvjvc.eval(p)?,
            d1jvc: self.d1jvc.eval(p)?,
        })
    }
}

/// The fields of [`HelmholtzFields`] evaluated at one point.
struct HelmholtzValues {
    q: usize,
    d1a: Vec<f64>,
    d3a: Vec<f64>,
    jva: Vec<f64>,
    d1jva: Vec<f64>,
    d2jva: Vec<f64>,
    jxa: Vec<f64>,
    d1jxa: Vec<f64>,
    b: Vec<f64>,
    d1b: Vec<f64>,
    jvb: Vec<f64>,
    jxb: Vec<f64>,
    jvc: Vec<f64>,
    jxc: Vec<f64>,
    jvjvc: Vec<f64>,
    d1jvc: Vec<f64>,
}

impl HelmholtzValues {
    /// Largest absolute residual of each condition.
    fn residuals(&self, brackets: Brackets) -> [f64; 6] {
        let q = self.q;
        let (k2, k3) = brackets.weights();
        let HelmholtzValues {
            d1a,
            d3a,
            jva,
            d1jva,
            d2jva,
            jxa,
            d1jxa,
            b,
            d1b,
            jvb,
            jxb,
            jvc,
            jxc,
            jvjvc,
            d1jvc,
            ..
        } = self;

        // ∂_{z_c} M_ab for a q×q matrix field M
        let m3 = |m: &[f64], a: usize, b: usize, c: usize| m[(a * q + b) * q + c];
        // ∂_{z_b} w_a for a vector field w
        let m2 = |m: &[f64], a: usize, b: usize| m[a * q + b];
        let alt3 = |m: &[f64], i: [usize; 3]| -> f64 {
            PERMS3
                .iter()
                .map(|(s, sign)| sign * m3(m, i[s[1]], i[s[2]], i[s[0]]))
                .sum::<f64>()
                * k3
        };

        let mut r = [0.0f64; 6];
        for a in 0..q {
            for bi in 0..q {
                let h2 = 2.0 * k2 * (b[a * q + bi] - b[bi * q + a]) - 3.0 * d1a[a * q + bi];
                let h4 = k2 * (m2(jvc, bi, a) + m2(jvc, a, bi)) - k2 * (d1b[a * q + bi] + d1b[bi * q + a]);
                let h6 = 4.0 * k2 * (m2(jxc, bi, a) - m2(jxc, a, bi))
                    - 2.0 * k2 * (m2(d1jvc, bi, a) - m2(d1jvc, a, bi))
                    - d3a[a * q + bi];
                r[1] = r[1].max(h2.abs());
                r[3] = r[3].max(h4.abs());
                r[5] = r[5].max(h6.abs());
                for c in 0..q {
                    let h1 = alt3(jva, [a, bi, c]);
                    let h3 = 2.0 * k2 * (m3(jvb, bi, c, a) - m3(jvb, a, c, bi))
                        - 4.0 * k2 * (m3(jxa, bi, c, a) - m3(jxa, a, c, bi))
                        + m3(jxa, a, bi, c)
                        + 2.0 * m3(d1jva, a, bi, c);
                    let h5 = 2.0 * k2 * (m3(jvjvc, bi, a, c) - m3(jvjvc, a, bi, c))
                        - 4.0 * k2 * (m3(jxb, bi, c, a) - m3(jxb, a, c, bi))
                        + m3(d2jva, a, bi, c)
                        + 6.0 * alt3(d1jxa, [a, bi, c]);
                    r[0] = r[0].max(h1.abs());
                    r[2] = r[2].max(h3.abs());
                    r[4] = r[4].max(h5.abs());
                }
            }
        }
        r
    }
}

/// Normalization of index brackets in the conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Brackets {
    /// `[ab] = ½(ab − ba)`, `(ab) = ½(ab + ba)`, `[abc] = (1/6) Σ sgn(σ) σ(abc)`.
    Averaged,
    /// The same sums without the factors ½ and 1/6.
    Unnormalized,
}

impl Brackets {
    /// The convention used by [`helmholtz_residuals`].
    pub const FROZEN: Brackets = Brackets::Averaged;

    fn weights(self) -> (f64, f64) {
        match self {
            Brackets::Averaged => (0.5, 1.0 / 6.0),
            Brackets::Unnormalized => (1.0, 1.0),
        }
    }
}

/// Residuals of the six Helmholtz-type conditions at the points of `spec`.
pub fn helmholtz_residuals(tr: &FieldTriple, spec: &SampleSpec, tolerance: f64) -> Result<HelmholtzReport> {
    helmholtz_residuals_with(tr, spec, tolerance, Brackets::FROZEN)
}

/// [`helmholtz_compare`] at the points of `spec`.
pub fn helmholtz_residuals_each(
    tr: &FieldTriple,
    spec: &SampleSpec,
    tolerance: f64,
    brackets: &[Brackets],
) -> Result<Vec<HelmholtzReport>> {
    let points = spec.draw(tr.layout(), &tr.params.values, tr.params.denominators.as_ref())?;
    helmholtz_compare(tr, &points, spec, tolerance, brackets)
}

pub fn helmholtz_residuals_with(
    tr: &FieldTriple,
    spec: &SampleSpec,
    tolerance: f64,
    brackets: Brackets,
) -> Result<HelmholtzReport> {
    let points = spec.draw(tr.layout(), &tr.params.values, tr.params.denominators.as_ref())?;
    helmholtz_at(tr, &points, spec, tolerance, brackets)
}

/// Residuals at the given points (the `spec` is recorded in the report).
pub fn helmholtz_at(
    tr: &FieldTriple,
    points: &[JetPoint],
    spec: &SampleSpec,
    tolerance: f64,
    brackets: Brackets,
) -> Result<HelmholtzReport> {
    let mut reports = helmholtz_compare(tr, points, spec, tolerance, &[brackets])?;
    Ok(reports.remove(0))
}

/// One report per bracket convention, sharing a single evaluation of the
/// underlying fields at each point.
pub fn helmholtz_compare(
    tr: &FieldTriple,
    points: &[JetPoint],
    spec: &SampleSpec,
    tolerance: f64,
    brackets: &[Brackets],
) -> Result<Vec<HelmholtzReport>> {
    let fields = HelmholtzFields::new(tr);
    let eval = evaluate_all(points, |p| {
        let values = fields.values(p)?;
        Ok(brackets.iter().map(|&b| values.residuals(b)).collect::<Vec<_>>())
    })?;
    brackets
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let values: Vec<(usize, [f64; 6])> = eval.values.iter().map(|(i, r)| (*i, r[j])).collect();
            Ok(report(tr.q(), points, &values, eval.skipped, spec, tolerance, b))
        })
        .collect()
}

fn report(
    q: usize,
    points: &[JetPoint],
    values: &[(usize, [f64; 6])],
    skipped: usize,
    spec: &SampleSpec,
    tolerance: f64,
    brackets: Brackets,
) -> HelmholtzReport {
    let mut conditions = BTreeMap::new();
    let n = values.len().max(1) as f64;
    for (k, name) in CONDITIONS.iter().enumerate() {
        let mut stats = ConditionStats {
            max: 0.0,
            mean: 0.0,
            worst_sample: None,
            worst_point: Vec::new(),
        };
        for (i, r) in values {
            let x = r[k];
            stats.mean += x / n;
            if stats.worst_sample.is_none() || x > stats.max || x.is_nan() {
                stats.max = x;
                stats.worst_sample = Some(*i);
            }
        }
        if let Some(i) = stats.worst_sample {
            stats.worst_point = points[i].coords()[..1 + 2 * q].to_vec();
        }
        conditions.insert(name.to_string(), stats);
    }
    let pass = !values.is_empty() && conditions.values().all(|s| s.max < tolerance);
    HelmholtzReport {
        conditions,
        samples: points.len(),
        skipped,
        seed: spec.seed,
        domain: spec.clone(),
        verdict: Verdict::from_bool(pass),
        tolerance,
        brackets,
    }
}

/// `E_a = ∂_{xᵃ}L − D(∂_{vᵃ}L) + D²(∂_{v′ᵃ}L)` written out through
/// `L = L₀(t,x,v) + g_b(t,x,v) v′ᵇ`.
#[derive(Debug, Clone)]
struct EulerPoissonField {
    layout: Layout,
    /// ∂_{x^a} L₀
    dx_l0: FieldRef,
    /// ∂_{x^b} g_a at a·q + b
    dx_g: FieldRef,
    /// D₁ ∂_{v^a} L₀
    d1_dv_l0: FieldRef,
    /// ∂_{v^c} ∂_{v^a} L₀ at a·q + c
    dv_dv_l0: FieldRef,
    /// ∂_{v^c} g_a at a·q + c
    dv_g: FieldRef,
    /// D₁ ∂_{v^c} g_a at a·q + c
    d1_dv_g: FieldRef,
    /// ∂_{v^d} ∂_{v^c} g_a at (a·q + c)·q + d
    dv_dv_g: FieldRef,
    /// D₁² g_a
    d1_d1_g: FieldRef,
    /// ∂_{v^c} D₁ g_a at a·q + c
    dv_d1_g: FieldRef,
}

impl Field for EulerPoissonField {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.layout.q
    }
    fn jet_order(&self) -> usize {
        3
    }
    fn reads_params(&self) -> bool {
        self.dx_l0.reads_params() || self.dv_g.reads_params() || self.d1_dv_l0.reads_params()
    }
    fn depends_on(&self, flat: usize) -> bool {
        level_deps(flat, self.layout.q, &[2, 3])
            || [
                &self.dx_l0,
                &self.dx_g,
                &self.d1_dv_l0,
                &self.dv_dv_l0,
                &self.dv_g,
                &self.d1_dv_g,
                &self.dv_dv_g,
                &self.d1_d1_g,
                &self.dv_d1_g,
            ]
            .iter()
            .any(|f| f.depends_on(flat))
    }
    fn expand(&self, p: &JetPoint, vars: &[usize], degree: usize) -> Result<Vec<TaylorScalar>> {
        let q = self.layout.q;
        let space = TaylorSpace::get(vars.len(), degree)?;
        let ex = |f: &FieldRef| expand_in(f.as_ref(), p, vars, degree);
        let dx_l0 = ex(&self.dx_l0)?;
        let dx_g = ex(&self.dx_g)?;
        let d1_dv_l0 = ex(&self.d1_dv_l0)?;
        let dv_dv_l0 = ex(&self.dv_dv_l0)?;
        let dv_g = ex(&self.dv_g)?;
        let d1_dv_g = ex(&self.d1_dv_g)?;
        let dv_dv_g = ex(&self.dv_dv_g)?;
        let d1_d1_g = ex(&self.d1_d1_g)?;
        let dv_d1_g = ex(&self.dv_d1_g)?;
        let vp: Vec<TaylorScalar> = (0..q).map(|i| coordinate(p, vars, &space, Coord::vp(i))).collect();
        let vpp: Vec<TaylorScalar> = (0..q).map(|i| coordinate(p, vars, &space, Coord::vpp(i))).collect();

        let mut out = Vec::with_capacity(q);
        for a in 0..q {
            // ∂_x L
            let mut e = dx_l0[a].clone();
            for b in 0..q {
                e = e + &dx_g[b * q + a] * &vp[b];
            }
            // − D ∂_v L
            let mut d_dv = d1_dv_l0[a].clone();
            for c in 0..q {
                d_dv = d_dv + &vp[c] * &dv_dv_l0[a * q + c];
                d_dv = d_dv + &d1_dv_g[c * q + a] * &vp[c];
                d_dv = d_dv + &dv_g[c * q + a] * &vpp[c];
                for b in 0..q {
                    d_dv = d_dv + (&vp[c] * &vp[b]) * dv_dv_g[(b * q + a) * q + c].clone();
                }
            }
            e = e - d_dv;
            // + D² ∂_{v′} L
            let mut dd = d1_d1_g[a].clone();
            for c in 0..q {
                dd = dd + &vp[c] * &(dv_d1_g[a * q + c].clone() + d1_dv_g[a * q + c].clone());
                dd = dd + &vpp[c] * &dv_g[a * q + c];
                for d in 0..q {
                    dd = dd + (&vp[c] * &vp[d]) * dv_dv_g[(a * q + c) * q + d].clone();
                }
            }
            out.push(e + dd);
        }
        Ok(out)
    }
}

/// Euler–Poisson expressions of an acceleration-affine Lagrangian.
pub fn euler_poisson(lag: &LagrangianField) -> Result<ThirdOrderSystem> {
    let l = lag.l.clone();
    let layout = l.layout();
    let l0: FieldRef = Arc::new(Substitute::zero_levels(l.clone(), &[2], 1));
    let g: FieldRef = Arc::new(Substitute::zero_levels(jac(&l, 2), &[2], 1));
    let dv_l0 = jac(&l0, 1);
    let dv_g = jac(&g, 1);
    let d1_g = d1(&g);
    let field = EulerPoissonField {
        layout,
        dx_l0: jac(&l0, 0),
        dx_g: jac(&g, 0),
        d1_dv_l0: d1(&dv_l0),
        dv_dv_l0: jac(&dv_l0, 1),
        d1_dv_g: d1(&dv_g),
        dv_dv_g: jac(&dv_g, 1),
        d1_d1_g: d1(&d1_g),
        dv_d1_g: jac(&d1_g, 1),
        dv_g,
    };
    ThirdOrderSystem::new(Arc::new(field), lag.params.clone())
}

/// The same expressions through nested full total derivatives. Much slower
/// than [`euler_poisson`]; kept as an independent cross-check.
pub fn euler_poisson_nested(lag: &LagrangianField) -> Result<ThirdOrderSystem> {
    let l = lag.l.clone();
    let dx: FieldRef = jac(&l, 0);
    let dv: FieldRef = jac(&l, 1);
    // ∂_{v′}L depends on (t, x, v) only when L is affine in v′
    let dvp: FieldRef = Arc::new(Substitute::new(jac(&l, 2), &[], 1));
    let d_dv: FieldRef = Arc::new(TotalDerivative::full(dv)?);
    let d_dvp: FieldRef = Arc::new(TotalDerivative::full(dvp)?);
    let dd_dvp: FieldRef = Arc::new(TotalDerivative::full(d_dvp)?);
    let e = crate::field::Combination::new(vec![(1.0, dx), (-1.0, d_dv), (1.0, dd_dvp)])?;
    ThirdOrderSystem::new(Arc::new(e), lag.params.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Polynomial, Zero};

    fn constant_matrix(layout: Layout, m: &[f64]) -> FieldRef {
        Arc::new(Polynomial::new(layout, m.iter().map(|&x| vec![(x, vec![])]).collect()))
    }

    fn triple(layout: Layout, a: &[f64], b: &[f64], c: FieldRef) -> FieldTriple {
        FieldTriple::new(
            constant_matrix(layout, a),
            constant_matrix(layout, b),
            c,
            Params::default(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_examples() {
        let l2 = Layout::new(2, 0);
        let tr = triple(l2, &[0.0, 1.0, -1.0, 0.0], &[0.0; 4], Arc::new(Zero { layout: l2, dim: 2 }));
        let p = JetPoint::new(0.0, &[0.1, 0.2], &[0.3, 0.4], &[0.5, 0.6], &[0.7, 0.8], &[]).unwrap();
        let e = assemble(&tr).unwrap().system.e.eval(&p).unwrap();
        assert_eq!(e, vec![0.8, -0.7]);

        let l1 = Layout::new(1, 0);
        let tr = triple(l1, &[0.0], &[1.0], Arc::new(Zero { layout: l1, dim: 1 }));
        let p = JetPoint::new(0.0, &[0.1], &[0.3], &[0.5], &[0.7], &[]).unwrap();
        assert_eq!(assemble(&tr).unwrap().system.e.eval(&p).unwrap(), vec![0.5]);
    }

    #[test]
    fn trivial_triples() {
        let l2 = Layout::new(2, 0);
        let zero_c: FieldRef = Arc::new(Zero { layout: l2, dim: 2 });
        let spec = SampleSpec::new(20, 3);
        let ok = triple(l2, &[0.0; 4], &[1.0, 0.0, 0.0, 1.0], zero_c.clone());
        let rep = helmholtz_residuals(&ok, &spec, 1e-12).unwrap();
        assert!(rep.verdict.passed());
        assert!(rep.conditions.values().all(|s| s.max == 0.0));

        let bad = triple(l2, &[0.0; 4], &[0.0, 1.0, -1.0, 0.0], zero_c);
        let rep = helmholtz_residuals(&bad, &spec, 1e-8).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.failing(), vec!["H2".to_string()]);
        assert_eq!(rep.conditions["H2"].max, 2.0);
    }

    #[test]
    fn extract_flags_non_skew() {
        let l2 = Layout::new(2, 0);
        let e = Polynomial::new(l2, vec![vec![(1.0, vec![(Coord::vpp(0), 1)])], vec![]]);
        let sys = ThirdOrderSystem::new(Arc::new(e), Params::default()).unwrap();
        let ex = extract_with_diagnostics(&sys, &SampleSpec::new(10, 1)).unwrap();
        assert!(!ex.is_skew(1e-10));
        let p = JetPoint::zeros(l2);
        assert_eq!(ex.triple.a.eval(&p).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn free_particle_euler_poisson() {
        // L = ½ v·v → E = −v′
        let l3 = Layout::new(3, 0);
        let l = Polynomial::new(l3, vec![(0..3).map(|i| (0.5, vec![(Coord::v(i), 2)])).collect()]);
        let lag = LagrangianField::new(Arc::new(l), Params::default()).unwrap();
        let sys = euler_poisson(&lag).unwrap();
        let p = JetPoint::new(0.2, &[0.1, 0.2, 0.3], &[0.3, -0.4, 0.5], &[0.5, 0.6, -0.7], &[0.7, 0.8, 0.9], &[]).unwrap();
        let e = sys.e.eval(&p).unwrap();
        for (x, y) in e.iter().zip(p.vp()) {
            assert!((x + y).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_lagrangian_gives_zero() {
        let l2 = Layout::new(2, 0);
        let l = Polynomial::new(l2, vec![vec![(3.5, vec![])]]);
        let lag = LagrangianField::new(Arc::new(l), Params::default()).unwrap();
        let p = JetPoint::new(0.2, &[0.1, 0.2], &[0.3, -0.4], &[0.5, 0.6], &[0.7, 0.8], &[]).unwrap();
        assert_eq!(euler_poisson(&lag).unwrap().e.eval(&p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn semi_analytic_matches_nested_route() {
        // L = x1 v2 vp1 + t v1² vp2 + x2² v1 v2 − ½ v·v + t x1 vp2
        let l2 = Layout::new(2, 0);
        let l = Polynomial::new(
            l2,
            vec![vec![
                (1.0, vec![(Coord::x(0), 1), (Coord::v(1), 1), (Coord::vp(0), 1)]),
                (1.0, vec![(Coord::T, 1), (Coord::v(0), 2), (Coord::vp(1), 1)]),
                (1.0, vec![(Coord::x(1), 2), (Coord::v(0), 1), (Coord::v(1), 1)]),
                (-0.5, vec![(Coord::v(0), 2)]),
                (-0.5, vec![(Coord::v(1), 2)]),
                (1.0, vec![(Coord::T, 1), (Coord::x(0), 1), (Coord::vp(1), 1)]),
            ]],
        );
        let lag = LagrangianField::new(Arc::new(l), Params::default()).unwrap();
        let fast = euler_poisson(&lag).unwrap();
        let slow = euler_poisson_nested(&lag).unwrap();
        let p = JetPoint::new(0.3, &[0.4, -0.2], &[0.1, 0.7], &[-0.3, 0.2], &[0.5, -0.6], &[]).unwrap();
        let a = fast.e.eval(&p).unwrap();
        let b = slow.e.eval(&p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }
}
