use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use edskit::dsl::{Context, GeneratorDoc, ModelDoc, PointDoc};
use edskit::field::{Field, TotalDerivative};
use edskit::prolong::{prolong as prolong_generator, Generator, ProlongedGenerator};
use edskit::sampling::SampleSpec;
use edskit::spin::{self, Metric, SpinParams, Vec3};
use edskit::symmetry::{
    multiplier_points, multiplier_solve, pseudo_orthogonal_generator_in, relative_invariance_defect, LieConvention,
    SpinSlots,
};
use edskit::variational::{helmholtz_residuals, FieldTriple, Params};
use edskit::{Error, JetPoint, Result};
use serde_json::{json, Value};

use crate::{ProlongArgs, ReduceArgs, SimulateArgs, SpinFlags, SymmetryArgs, VariationalArgs};

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Schema(_)
        | Error::JetOrder { .. }
        | Error::NonAffine { .. }
        | Error::NotSkew { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn spin_params(f: &SpinFlags) -> Result<SpinParams> {
    SpinParams::new(f.s0, f.s, f.m)
}

fn check_builtin(name: &str) -> Result<()> {
    if name == "spin" {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown built-in model `{name}` (available: spin)")))
    }
}

/// Where a command reads its model from.
struct Source {
    ctx: Context,
    triple: FieldTriple,
    params: Params,
    builtin: Option<SpinParams>,
}

fn load_source(model: Option<&Path>, builtin: Option<&str>, flags: &SpinFlags) -> Result<Source> {
    match (model, builtin) {
        (_, Some(name)) => {
            check_builtin(name)?;
            let sp = spin_params(flags)?;
            Ok(Source {
                ctx: spin::context(),
                triple: spin::triple(&sp)?,
                params: sp.params(),
                builtin: Some(sp),
            })
        }
        (Some(path), None) => {
            let doc = ModelDoc::load(path)?;
            let ctx = doc.context()?;
            let model = doc.build()?;
            Ok(Source {
                ctx,
                triple: model.triple()?,
                params: model.params().clone(),
                builtin: None,
            })
        }
        (None, None) => Err(Error::Config("give a model file or --builtin".into())),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn write_json(out: Option<&Path>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    write_out(out, &text)
}

pub fn check_variational(a: &VariationalArgs) -> Result<bool> {
    let src = load_source(a.model.as_deref(), a.builtin.as_deref(), &a.spin)?;
    let mut spec = SampleSpec::new(a.sampling.samples, a.sampling.seed);
    if let Some(r) = a.sampling.t_range {
        spec.t_range = r;
    }
    if let Some(r) = a.sampling.x_range {
        spec.x_range = r;
    }
    if let Some(v) = a.sampling.v_max {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("--v-max must be positive, got {v}")));
        }
        spec.v_max = v;
    }
    let report = helmholtz_residuals(&src.triple, &spec, a.tol)?;
    let failing = report.failing();
    let mut v = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    v["failing"] = json!(failing);
    write_json(a.out.as_deref(), &v)?;
    let pass = report.verdict.passed();
    if !pass {
        eprintln!("edskit: not variational; failing conditions: {}", failing.join(", "));
    }
    Ok(pass)
}

fn spin_slots(ctx: &Context) -> Option<SpinSlots> {
    let base = ctx.layout().jet_len();
    let (s0, _) = ctx.param_slots("s0")?;
    let (s, _) = ctx.param_slots("s")?;
    match (s0.as_slice(), s.as_slice()) {
        ([s0], [a, b, c]) => Some(SpinSlots {
            s0: s0 - base,
            s: [a - base, b - base, c - base],
        }),
        _ => None,
    }
}

pub fn check_symmetry(a: &SymmetryArgs) -> Result<bool> {
    let src = load_source(a.model.as_deref(), a.builtin.as_deref(), &a.spin)?;
    let (generator, label, nq): (Generator, String, Option<(Vec3, Vec3)>) = match &a.generator {
        Some(path) => {
            let doc = GeneratorDoc::load(path)?;
            let label = doc.name.clone().unwrap_or_else(|| path.display().to_string());
            (doc.build(&src.ctx)?, label, None)
        }
        None => {
            if a.rotation.is_none() && a.boost.is_none() {
                return Err(Error::Config("give --rotation, --boost or --generator".into()));
            }
            let n = a.rotation.unwrap_or([0.0; 3]);
            let q = a.boost.unwrap_or([0.0; 3]);
            let g = pseudo_orthogonal_generator_in(src.ctx.layout(), &n, &q, spin_slots(&src.ctx))?;
            (g, format!("pseudo-orthogonal n={n:?} q={q:?}"), Some((n, q)))
        }
    };
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(Error::Config(format!("--step must be positive, got {}", a.step)));
    }
    let pg = prolong_generator(&generator, 3)?;
    let spec = SampleSpec::new(a.samples, a.seed);
    let points = multiplier_points(&src.triple, &spec)?;
    let report = multiplier_solve(&pg, &src.triple, &points, a.step, a.tol)?;
    let mut v = json!({
        "generator": label,
        "samples": report.samples,
        "skipped": report.skipped,
        "max_residual": report.max_residual,
        "mean_residual": report.mean_residual,
        "rank_deficient": report.rank_deficient,
        "tolerance": report.tolerance,
        "step": a.step,
        "convention": LieConvention::FROZEN.label(),
        "verdict": report.verdict,
        "parameters": src.params.names.iter().cloned().zip(src.params.values.iter().map(|&x| Value::from(x))).collect::<serde_json::Map<String, Value>>(),
    });
    if let (Some(sp), Some((n, q))) = (&src.builtin, nq) {
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for p in &points {
            let r = relative_invariance_defect(p, &n, &q, sp, LieConvention::FROZEN)?;
            max = max.max(r);
            sum += r;
        }
        v["invariance"] = json!({
            "max_relative_defect": max,
            "mean_relative_defect": sum / points.len().max(1) as f64,
        });
    }
    write_json(a.out.as_deref(), &v)?;
    Ok(report.verdict.passed())
}

pub fn simulate(a: &SimulateArgs) -> Result<bool> {
    let sp = spin_params(&a.spin)?;
    if a.steps == 0 {
        return Err(Error::Config("--steps must be at least 1".into()));
    }
    if !(a.dt > 0.0 && a.dt.is_finite()) {
        return Err(Error::Config(format!("--dt must be positive, got {}", a.dt)));
    }
    let a0 = if a.project_initial {
        spin::project_initial(&a.v0, &a.a0, &sp)?
    } else {
        a.a0
    };
    let (traj, err) = match spin::integrate(&a.x0, &a.v0, &a0, &sp, a.dt, a.steps) {
        Ok(t) => (t, None),
        Err(ab) => (ab.partial, Some(ab.error)),
    };
    let emit = |w: &mut dyn Write| traj.write_csv(w);
    let io = match &a.out {
        Some(path) => File::create(path)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                emit(&mut w)?;
                w.flush()
            })
            .map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            match emit(&mut w).and_then(|_| w.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    };
    io?;
    if let Some(e) = err {
        return Err(e);
    }
    let last = traj.last();
    eprintln!(
        "steps {} t {:.6} max|C| {:.3e} m0 drift {:.3e} final N2 {:.6}",
        traj.rows.len() - 1,
        last.state.t,
        traj.max_constraint(),
        traj.m0_drift(),
        last.n2
    );
    Ok(true)
}

pub fn reduce_check(a: &ReduceArgs) -> Result<bool> {
    let sp = spin_params(&a.spin)?;
    if a.samples == 0 {
        return Err(Error::Config("--samples must be at least 1".into()));
    }
    let jets = spin::sample_four_jets(a.samples, a.seed, &sp, 0.1)?;
    let g = Metric::euclidean();
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut worst = 0;
    for (i, j) in jets.iter().enumerate() {
        let r = spin::lift_check(j, &sp, &g)?;
        if r > max {
            max = r;
            worst = i;
        }
        sum += r;
    }
    let pass = max < a.tol;
    let v = json!({
        "samples": jets.len(),
        "seed": a.seed,
        "max_residual": max,
        "mean_residual": sum / jets.len() as f64,
        "worst_sample": worst,
        "tolerance": a.tol,
        "verdict": if pass { "pass" } else { "fail" },
    });
    write_json(a.out.as_deref(), &v)?;
    Ok(pass)
}

pub fn prolong(a: &ProlongArgs) -> Result<bool> {
    let doc = GeneratorDoc::load(&a.generator)?;
    let (generator, ctx, defaults) = match (&a.model, &a.builtin) {
        (Some(path), _) => {
            let m = ModelDoc::load(path)?;
            let ctx = m.context()?;
            (doc.build(&ctx)?, ctx, m.param_values())
        }
        (None, Some(name)) => {
            check_builtin(name)?;
            let ctx = spin::context();
            (doc.build(&ctx)?, ctx, spin_params(&a.spin)?.to_vec())
        }
        (None, None) => {
            let (g, ctx) = doc.build_standalone()?;
            let n = ctx.layout().num_params;
            (g, ctx, vec![0.0; n])
        }
    };
    let point = match &a.at {
        Some(path) => PointDoc::load(path)?.point(&ctx, &defaults)?,
        None => PointDoc::default().point(&ctx, &defaults)?,
    };
    let pg = prolong_generator(&generator, a.order)?;
    let mut levels = Vec::new();
    for level in 0..=a.order {
        let c = pg.coefficient(level).expect("level within order");
        levels.push(json!({ "level": level, "values": c.eval(&point)? }));
    }
    let mut v = json!({
        "point": point_json(&point, &ctx),
        "order": a.order,
        "tau": generator.tau().eval(&point)?[0],
        "xi": generator.xi().eval(&point)?,
        "coefficients": levels,
    });
    if let Some(pa) = generator.param_action() {
        let names = ctx.param_names();
        v["param_action"] = names
            .iter()
            .cloned()
            .zip(pa.eval(&point)?.into_iter().map(Value::from))
            .collect::<serde_json::Map<_, _>>()
            .into();
    }
    if a.trace {
        v["trace"] = json!(trace(&pg, &point)?);
    }
    write_json(a.out.as_deref(), &v)?;
    Ok(true)
}

fn point_json(p: &JetPoint, ctx: &Context) -> Value {
    json!({
        "t": p.t(),
        "x": p.x(),
        "v": p.v(),
        "vp": p.vp(),
        "vpp": p.vpp(),
        "params": ctx.param_names().iter().cloned().zip(p.params().iter().map(|&x| Value::from(x))).collect::<serde_json::Map<_, _>>(),
    })
}

/// Each step `D_j(prev) − v^{(j)} D₁τ` of the recursion, evaluated at `p`.
fn trace(pg: &ProlongedGenerator, p: &JetPoint) -> Result<Vec<Value>> {
    let d1tau = TotalDerivative::d1(pg.base().tau().clone()).eval(p)?[0];
    let mut out = Vec::new();
    for level in 1..=pg.order() {
        let prev = pg.coefficient(level - 1).expect("level within order").clone();
        let d_prev = TotalDerivative::new(Arc::clone(&prev), level)?.eval(p)?;
        let coeff = pg.coefficient(level).expect("level within order").eval(p)?;
        out.push(json!({
            "level": level,
            "d_prev": d_prev,
            "d1_tau": d1tau,
            "v_level": p.level(level),
            "coefficient": coeff,
        }));
    }
    Ok(out)
}
