//! Seeded sample sets over jet space and deterministic parallel evaluation.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{JetPoint, Layout};
use crate::rng::SplitMix64;

/// Smallest admissible denominator of a model at a point.
pub type Denominators = Arc<dyn Fn(&JetPoint) -> Result<f64> + Send + Sync>;

/// Largest fraction of samples allowed to fail evaluation.
pub const MAX_SKIP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Velocity components are drawn from `[-v_max, v_max]`.
    pub v_max: f64,
    /// Points whose smallest model denominator falls below this are redrawn.
    pub denominator_floor: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 200,
            seed: 42,
            t_range: (-1.0, 1.0),
            x_range: (-1.0, 1.0),
            v_max: 0.8,
            denominator_floor: 0.1,
        }
    }
}

impl SampleSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        SampleSpec {
            count,
            seed,
            ..Default::default()
        }
    }

    /// Draws `count` points `(t, x, v)` with `v′ = v″ = 0` and the given
    /// parameter values, in the order t, x₁..x_q, v₁..v_q per point.
    pub fn draw(&self, layout: Layout, params: &[f64], denominators: Option<&Denominators>) -> Result<Vec<JetPoint>> {
        if params.len() != layout.num_params {
            return Err(Error::Config(format!(
                "{} parameter values for {} slots",
                params.len(),
                layout.num_params
            )));
        }
        let mut rng = SplitMix64::new(self.seed);
        let mut out = Vec::with_capacity(self.count);
        let max_attempts = 1000 * self.count.max(1);
        let mut attempts = 0;
        while out.len() < self.count {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::Domain(format!(
                    "only {} of {} admissible samples found in {max_attempts} draws",
                    out.len(),
                    self.count
                )));
            }
            let q = layout.q;
            let t = rng.uniform(self.t_range.0, self.t_range.1);
            let x = rng.uniform_vec(q, self.x_range.0, self.x_range.1);
            let v = rng.uniform_vec(q, -self.v_max, self.v_max);
            let zero = vec![0.0; q];
            let p = JetPoint::new(t, &x, &v, &zero, &zero, params)?;
            if let Some(d) = denominators {
                match d(&p) {
                    Ok(m) if m >= self.denominator_floor => {}
                    _ => continue,
                }
            }
            out.push(p);
        }
        Ok(out)
    }
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("EDSKIT_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

/// Results of evaluating something at every sample.
#[derive(Debug, Clone)]
pub struct Evaluated<T> {
    /// `(sample index, value)` for samples that evaluated, in index order.
    pub values: Vec<(usize, T)>,
    pub skipped: usize,
}

/// Evaluates `f` at every point in parallel. Failing samples are skipped and
/// counted; more than [`MAX_SKIP_FRACTION`] failures is an error.
pub fn evaluate_all<T, F>(points: &[JetPoint], f: F) -> Result<Evaluated<T>>
where
    T: Send,
    F: Fn(&JetPoint) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = pool().install(|| points.par_iter().map(&f).collect());
    let total = results.len();
    let mut values = Vec::with_capacity(total);
    let mut skipped = 0;
    let mut last = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push((i, v)),
            Err(e) => {
                skipped += 1;
                last = Some(e);
            }
        }
    }
    if skipped as f64 > MAX_SKIP_FRACTION * total as f64 {
        return Err(Error::SampleDomain {
            skipped,
            total,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    Ok(Evaluated { values, skipped })
}

/// Maps `f` over `items` on the shared pool, keeping input order.
pub fn par_map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    pool().install(|| items.par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible_and_in_range() {
        let spec = SampleSpec::new(50, 7);
        let layout = Layout::new(2, 1);
        let a = spec.draw(layout, &[3.0], None).unwrap();
        let b = spec.draw(layout, &[3.0], None).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.v().iter().all(|v| v.abs() <= 0.8));
            assert!(p.x().iter().all(|x| x.abs() <= 1.0));
            assert_eq!(p.vp(), &[0.0, 0.0]);
            assert_eq!(p.params(), &[3.0]);
        }
    }

    #[test]
    fn first_sample_follows_draw_order() {
        let layout = Layout::new(1, 0);
        let p = &SampleSpec::new(1, 99).draw(layout, &[], None).unwrap()[0];
        let mut rng = SplitMix64::new(99);
        assert_eq!(p.t(), rng.uniform(-1.0, 1.0));
        assert_eq!(p.x()[0], rng.uniform(-1.0, 1.0));
        assert_eq!(p.v()[0], rng.uniform(-0.8, 0.8));
    }

    #[test]
    fn rejection_and_skips() {
        let layout = Layout::new(1, 0);
        let d: Denominators = Arc::new(|p: &JetPoint| Ok(p.v()[0].abs()));
        let pts = SampleSpec::new(100, 1).draw(layout, &[], Some(&d)).unwrap();
        assert!(pts.iter().all(|p| p.v()[0].abs() >= 0.1));

        let ok = evaluate_all(&pts[..10], |p| if p.t() > 2.0 { Err(Error::Domain("x".into())) } else { Ok(1) }).unwrap();
        assert_eq!(ok.skipped, 0);
        let bad = evaluate_all(&pts, |_| -> Result<()> { Err(Error::Domain("always".into())) });
        assert!(matches!(bad, Err(Error::SampleDomain { skipped: 100, total: 100, .. })));
    }
}
