//! JSON documents for models, generators and jet points.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldRef;
use crate::jet::{JetPoint, Layout};
use crate::prolong::Generator;
use crate::rng::SplitMix64;
use crate::sampling::{Denominators, SampleSpec};
use crate::variational::{euler_poisson, extract, FieldTriple, LagrangianField, Params, ThirdOrderSystem};

use super::compile::{Compiled, Context, ExprField, Kind};
use super::parser::{parse, Expr};

/// Largest relative skew defect of `A` accepted when loading a triple.
pub const SKEW_TOLERANCE: f64 = 1e-10;
/// Largest second `v′`-derivative of `L` accepted when loading a Lagrangian.
pub const AFFINITY_TOLERANCE: f64 = 1e-12;

const VALIDATION_SAMPLES: usize = 20;
const VALIDATION_SEED: u64 = 0x0D0C_5EED;

/// An expression in source form or a bare number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn expr(&self) -> Result<Expr> {
        match self {
            Entry::Number(x) => Ok(Expr::num(*x)),
            Entry::Text(s) => Ok(parse(s)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    fn values(&self) -> Vec<f64> {
        match self {
            ParamValue::Scalar(x) => vec![*x],
            ParamValue::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleDoc {
    #[serde(rename = "A")]
    pub a: Vec<Vec<Entry>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Entry>>,
    pub c: Vec<Entry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    #[serde(rename = "E")]
    pub e: Vec<Entry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianDoc {
    #[serde(rename = "L")]
    pub l: Entry,
}

/// A model file. Exactly one of `triple`, `system` and `lagrangian` is set.
/// Parameters occupy slots in the alphabetical order of their names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub q: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<TripleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianDoc>,
}

/// A loaded and validated model.
#[derive(Debug, Clone)]
pub enum Model {
    Triple(FieldTriple),
    System(ThirdOrderSystem),
    Lagrangian(LagrangianField),
}

impl Model {
    pub fn layout(&self) -> Layout {
        match self {
            Model::Triple(t) => t.layout(),
            Model::System(s) => s.layout(),
            Model::Lagrangian(l) => l.layout(),
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Model::Triple(t) => t.params(),
            Model::System(s) => s.params(),
            Model::Lagrangian(l) => l.params(),
        }
    }

    /// The system `E` (assembled from a triple, or the Euler–Poisson
    /// expression of a Lagrangian).
    pub fn system(&self) -> Result<ThirdOrderSystem> {
        match self {
            Model::Triple(t) => {
                let asm = crate::variational::assemble(t)?;
                Ok(asm.system)
            }
            Model::System(s) => Ok(s.clone()),
            Model::Lagrangian(l) => euler_poisson(l),
        }
    }

    /// The coefficient triple.
    pub fn triple(&self) -> Result<FieldTriple> {
        match self {
            Model::Triple(t) => Ok(t.clone()),
            Model::System(s) => extract(s),
            Model::Lagrangian(l) => extract(&euler_poisson(l)?),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn denominators_of(parts: Vec<Compiled>) -> Denominators {
    Arc::new(move |p: &JetPoint| {
        let mut m = f64::INFINITY;
        for c in &parts {
            m = m.min(c.min_denominator(p.coords())?);
        }
        Ok(m)
    })
}

impl ModelDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let forms = [doc.triple.is_some(), doc.system.is_some(), doc.lagrangian.is_some()];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(Error::Schema(
                "a model needs exactly one of `triple`, `system` and `lagrangian`".into(),
            ));
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read(path.as_ref())?)
    }

    pub fn context(&self) -> Result<Context> {
        let decl: Vec<(String, usize)> = self
            .parameters
            .iter()
            .map(|(name, v)| (name.clone(), v.values().len()))
            .collect();
        Context::new(self.q, &decl)
    }

    /// Parameter values in slot order.
    pub fn param_values(&self) -> Vec<f64> {
        self.parameters.values().flat_map(ParamValue::values).collect()
    }

    fn params(&self, ctx: &Context, parts: Vec<Compiled>) -> Params {
        Params::new(ctx.param_names().to_vec(), self.param_values()).with_denominators(denominators_of(parts))
    }

    /// Compiles and validates the model.
    pub fn build(&self) -> Result<Model> {
        let ctx = self.context()?;
        let layout = ctx.layout();
        let q = self.q;
        if let Some(t) = &self.triple {
            let a = compile_matrix(&ctx, &t.a, q, "A")?;
            let b = compile_matrix(&ctx, &t.b, q, "B")?;
            let c = compile_vector(&ctx, &t.c, q, 1, "c")?;
            let all: Vec<Compiled> = a.iter().chain(&b).chain(&c).cloned().collect();
            let params = self.params(&ctx, all);
            let field = |parts: Vec<Compiled>| -> FieldRef { Arc::new(ExprField::new(layout, parts, 0)) };
            let triple = FieldTriple::new(field(a), field(b), field(c), params)?;
            let pts = validation_points(layout, triple.params(), false)?;
            let mut worst = 0.0f64;
            for p in &pts {
                worst = worst.max(triple.skew_defect(p)?);
            }
            if worst > SKEW_TOLERANCE {
                return Err(Error::NotSkew { defect: worst });
            }
            return Ok(Model::Triple(triple));
        }
        if let Some(s) = &self.system {
            let e = compile_vector(&ctx, &s.e, q, 3, "E")?;
            let params = self.params(&ctx, e.clone());
            let sys = ThirdOrderSystem::new(Arc::new(ExprField::new(layout, e, 0)), params)?;
            return Ok(Model::System(sys));
        }
        let l = self.lagrangian.as_ref().expect("form checked on load");
        let lc = ctx.compile(&l.l.expr()?, 2, "L")?;
        if lc.kind() != Kind::Scalar {
            return Err(Error::Schema("L must be a scalar expression".into()));
        }
        let params = self.params(&ctx, vec![lc.clone()]);
        let lag = LagrangianField::new(Arc::new(ExprField::new(layout, vec![lc], 0)), params)?;
        check_affine(&lag)?;
        Ok(Model::Lagrangian(lag))
    }
}

fn compile_scalar(ctx: &Context, e: &Entry, max_level: usize, name: &str) -> Result<Compiled> {
    let c = ctx.compile(&e.expr()?, max_level, name)?;
    if c.kind() != Kind::Scalar {
        return Err(Error::Schema(format!("{name} must be a scalar expression")));
    }
    Ok(c)
}

fn compile_vector(ctx: &Context, entries: &[Entry], q: usize, max_level: usize, name: &str) -> Result<Vec<Compiled>> {
    if entries.len() == 1 && q > 1 {
        let c = ctx.compile(&entries[0].expr()?, max_level, name)?;
        if c.kind() != Kind::Vector(q) {
            return Err(Error::Schema(format!("{name} needs {q} entries or one {q}-vector expression")));
        }
        return Ok(vec![c]);
    }
    if entries.len() != q {
        return Err(Error::Schema(format!("{name} needs {q} entries, got {}", entries.len())));
    }
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| compile_scalar(ctx, e, max_level, &format!("{name}[{}]", i + 1)))
        .collect()
}

fn compile_matrix(ctx: &Context, rows: &[Vec<Entry>], q: usize, name: &str) -> Result<Vec<Compiled>> {
    if rows.len() != q || rows.iter().any(|r| r.len() != q) {
        return Err(Error::Schema(format!("{name} must be a {q}×{q} array")));
    }
    let mut out = Vec::with_capacity(q * q);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            out.push(compile_scalar(ctx, e, 1, &format!("{name}[{}][{}]", i + 1, j + 1))?);
        }
    }
    Ok(out)
}

/// Admissible points for load-time checks; with `random_vp` the `v′` slots
/// are filled from `[-1, 1]`.
fn validation_points(layout: Layout, params: &Params, random_vp: bool) -> Result<Vec<JetPoint>> {
    let spec = SampleSpec::new(VALIDATION_SAMPLES, VALIDATION_SEED);
    let mut pts = spec.draw(layout, &params.values, params.denominators.as_ref())?;
    if random_vp {
        let mut rng = SplitMix64::new(VALIDATION_SEED ^ 0xFFFF);
        for p in &mut pts {
            for x in p.level_mut(2) {
                *x = rng.uniform(-1.0, 1.0);
            }
        }
    }
    Ok(pts)
}

fn check_affine(lag: &LagrangianField) -> Result<()> {
    let layout = lag.layout();
    let vars: Vec<usize> = layout.level(2).collect();
    let n = vars.len();
    for p in validation_points(layout, lag.params(), true)? {
        let l = match lag.l().expand(&p, &vars, 2) {
            Ok(mut v) => v.remove(0),
            Err(_) => continue,
        };
        for a in 0..n {
            for b in a..n {
                let mut alpha = vec![0u8; n];
                alpha[a] += 1;
                alpha[b] += 1;
                let value = l.derivative(&alpha);
                if value.abs() > AFFINITY_TOLERANCE {
                    return Err(Error::NonAffine {
                        a: a + 1,
                        b: b + 1,
                        value,
                    });
                }
            }
        }
    }
    Ok(())
}

/// A generator file: `tau`, `xi` and an optional action on model parameters
/// keyed by scalar parameter names. `parameters` are fixed constants
/// visible to the expressions. `q` is needed only without a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub tau: Entry,
    pub xi: Vec<Entry>,
    #[serde(default)]
    pub param_action: BTreeMap<String, Entry>,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamValue>,
}

impl GeneratorDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read(path.as_ref())?)
    }

    /// Builds the generator on a model's context.
    pub fn build(&self, model: &Context) -> Result<Generator> {
        if let Some(q) = self.q {
            if q != model.layout().q {
                return Err(Error::Schema(format!(
                    "generator is for q = {q}, model has q = {}",
                    model.layout().q
                )));
            }
        }
        let mut ctx = model.clone();
        for (name, v) in &self.parameters {
            ctx = ctx.with_constant(name, v.values())?;
        }
        let layout = ctx.layout();
        let q = layout.q;
        let tau = compile_scalar(&ctx, &self.tau, 0, "tau")?;
        let xi = compile_vector(&ctx, &self.xi, q, 0, "xi")?;
        let param_action = if self.param_action.is_empty() {
            None
        } else {
            let names = ctx.param_names();
            if let Some(bad) = self.param_action.keys().find(|k| !names.contains(k)) {
                return Err(Error::Schema(format!("param_action names unknown parameter `{bad}`")));
            }
            let zero = Entry::Number(0.0);
            let parts = names
                .iter()
                .map(|n| {
                    let e = self.param_action.get(n).unwrap_or(&zero);
                    compile_scalar(&ctx, e, 0, &format!("param_action.{n}"))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(Arc::new(ExprField::new(layout, parts, 0)) as FieldRef)
        };
        Generator::new(
            Arc::new(ExprField::new(layout, vec![tau], 0)),
            Arc::new(ExprField::new(layout, xi, 0)),
            param_action,
        )
    }

    /// Builds the generator without a model. The keys of `param_action`
    /// become scalar parameters, in alphabetical order.
    pub fn build_standalone(&self) -> Result<(Generator, Context)> {
        let q = self
            .q
            .ok_or_else(|| Error::Schema("generator without a model needs `q`".into()))?;
        let decl: Vec<(String, usize)> = self.param_action.keys().map(|k| (k.clone(), 1)).collect();
        let ctx = Context::new(q, &decl)?;
        Ok((self.build(&ctx)?, ctx))
    }
}

/// A jet point file. Missing levels are zero; `params` sets parameter
/// values by any declared name (a vector or one of its components).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub v: Vec<f64>,
    #[serde(default)]
    pub vp: Vec<f64>,
    #[serde(default)]
    pub vpp: Vec<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl PointDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read(path.as_ref())?)
    }

    /// The point on the layout of `ctx`, starting from parameter values
    /// `defaults`.
    pub fn point(&self, ctx: &Context, defaults: &[f64]) -> Result<JetPoint> {
        let layout = ctx.layout();
        let q = layout.q;
        let level = |v: &Vec<f64>, name: &str| -> Result<Vec<f64>> {
            match v.len() {
                0 => Ok(vec![0.0; q]),
                n if n == q => Ok(v.clone()),
                n => Err(Error::Schema(format!("`{name}` has {n} entries, expected {q}"))),
            }
        };
        if defaults.len() != layout.num_params {
            return Err(Error::Schema("parameter values do not match the model".into()));
        }
        let mut values = defaults.to_vec();
        for (name, v) in &self.params {
            let (slots, _) = ctx
                .param_slots(name)
                .ok_or_else(|| Error::Schema(format!("point sets unknown parameter `{name}`")))?;
            let given = v.values();
            if given.len() != slots.len() {
                return Err(Error::Schema(format!(
                    "parameter `{name}` takes {} value(s), got {}",
                    slots.len(),
                    given.len()
                )));
            }
            for (slot, x) in slots.into_iter().zip(given) {
                values[slot - layout.jet_len()] = x;
            }
        }
        JetPoint::new(
            self.t,
            &level(&self.x, "x")?,
            &level(&self.v, "v")?,
            &level(&self.vp, "vp")?,
            &level(&self.vpp, "vpp")?,
            &values,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prolong::{apply_generator, prolong};

    const FREE: &str = r#"{"q": 2, "lagrangian": {"L": "sqrt(1 + dot(v, v))"}}"#;

    #[test]
    fn loads_each_form() {
        let m = ModelDoc::from_json(FREE).unwrap().build().unwrap();
        assert!(matches!(m, Model::Lagrangian(_)));
        let tri = r#"{"q": 2, "parameters": {"k": 2.0},
            "triple": {"A": [[0, "k"], ["-k", 0]], "B": [[0, 0], [0, 0]], "c": ["x1", 0]}}"#;
        let m = ModelDoc::from_json(tri).unwrap().build().unwrap();
        assert_eq!(m.layout(), Layout::new(2, 1));
        let vector = r#"{"q": 3, "system": {"E": ["cross(v, vpp) + vp"]}}"#;
        assert!(ModelDoc::from_json(vector).unwrap().build().is_ok());
        let sys = r#"{"q": 1, "system": {"E": ["vpp1 + x1"]}}"#;
        assert!(matches!(ModelDoc::from_json(sys).unwrap().build().unwrap(), Model::System(_)));
    }

    #[test]
    fn schema_errors() {
        let two = r#"{"q": 1, "system": {"E": ["x1"]}, "lagrangian": {"L": "x1"}}"#;
        assert!(matches!(ModelDoc::from_json(two), Err(Error::Schema(_))));
        let extra = r#"{"q": 1, "system": {"E": ["x1"]}, "colour": 3}"#;
        assert!(matches!(ModelDoc::from_json(extra), Err(Error::Schema(_))));
        let short = r#"{"q": 2, "system": {"E": ["x1"]}}"#;
        assert!(matches!(ModelDoc::from_json(short).unwrap().build(), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_bad_models() {
        let order = r#"{"q": 1, "triple": {"A": [[0]], "B": [["vp1"]], "c": [0]}}"#;
        match ModelDoc::from_json(order).unwrap().build() {
            Err(Error::JetOrder { field, ident }) => {
                assert_eq!(field, "B[1][1]");
                assert_eq!(ident, "vp1");
            }
            other => panic!("{other:?}"),
        }
        let sym = r#"{"q": 2, "triple": {"A": [[0, 1], [1, 0]], "B": [[0, 0], [0, 0]], "c": [0, 0]}}"#;
        assert!(matches!(ModelDoc::from_json(sym).unwrap().build(), Err(Error::NotSkew { .. })));
        let curved = r#"{"q": 1, "lagrangian": {"L": "vp1^3"}}"#;
        assert!(matches!(ModelDoc::from_json(curved).unwrap().build(), Err(Error::NonAffine { .. })));
    }

    #[test]
    fn denominators_follow_divisions() {
        let doc = r#"{"q": 1, "system": {"E": ["vpp1 / (1 - v1^2) + x1^-2"]}}"#;
        let m = ModelDoc::from_json(doc).unwrap().build().unwrap();
        let d = m.params().denominators.clone().unwrap();
        let p = JetPoint::new(0.0, &[0.5], &[0.9], &[0.0], &[0.0], &[]).unwrap();
        assert!((d(&p).unwrap() - 0.19).abs() < 1e-12);
    }

    #[test]
    fn generator_with_parameter_action() {
        let model = r#"{"q": 3, "parameters": {"s": [0.1, 0.2, 0.3]},
            "system": {"E": ["vpp1", "vpp2", "vpp3"]}}"#;
        let md = ModelDoc::from_json(model).unwrap();
        let ctx = md.context().unwrap();
        let gen = r#"{"tau": 0, "xi": ["-w*x2", "w*x1", 0],
            "param_action": {"s1": "-w*s2", "s2": "w*s1"}, "parameters": {"w": 2.0}}"#;
        let g = GeneratorDoc::from_json(gen).unwrap().build(&ctx).unwrap();
        let pg = prolong(&g, 1).unwrap();
        let pa = g.param_action().unwrap();
        let p = PointDoc::default().point(&ctx, &md.param_values()).unwrap();
        assert_eq!(pa.eval(&p).unwrap(), vec![-0.4, 0.2, 0.0]);
        let x1 = crate::field::Polynomial::new(ctx.layout(), vec![vec![(1.0, vec![(crate::jet::Coord::x(0), 1)])]]);
        let px = PointDoc {
            x: vec![0.0, 1.0, 0.0],
            ..Default::default()
        }
        .point(&ctx, &md.param_values())
        .unwrap();
        assert_eq!(apply_generator(&pg, &x1, &px).unwrap(), vec![-2.0]);
        let bad = r#"{"tau": 0, "xi": [0, 0, 0], "param_action": {"m": 1}}"#;
        assert!(GeneratorDoc::from_json(bad).unwrap().build(&ctx).is_err());
        let with_s2 = PointDoc::from_json(r#"{"params": {"s2": 5.0}}"#).unwrap();
        assert_eq!(with_s2.point(&ctx, &md.param_values()).unwrap().params(), &[0.1, 5.0, 0.3]);
        let whole = PointDoc::from_json(r#"{"params": {"s": [1, 2, 3]}}"#).unwrap();
        assert_eq!(whole.point(&ctx, &md.param_values()).unwrap().params(), &[1.0, 2.0, 3.0]);
        assert!(PointDoc::from_json(r#"{"params": {"k": 1}}"#).unwrap().point(&ctx, &md.param_values()).is_err());
        let jet = r#"{"tau": "v1", "xi": [0, 0, 0]}"#;
        assert!(matches!(GeneratorDoc::from_json(jet).unwrap().build(&ctx), Err(Error::JetOrder { .. })));
    }
}
