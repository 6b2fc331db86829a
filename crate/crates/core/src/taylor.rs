//! Truncated multivariate Taylor arithmetic.
//!
//! A [`TaylorScalar`] stores the Taylor coefficients `f^(α)(z0) / α!` of a
//! scalar function for every multi-index `α` with `|α| <= degree`. Arithmetic
//! truncates exactly: for polynomial inputs of degree `<= degree` every
//! operation reproduces the exact polynomial coefficients.
//!
//! Coefficient layouts are shared through a per-`(num_vars, degree)`
//! [`TaylorSpace`], built once and cached for the lifetime of the process.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest truncation degree a [`TaylorSpace`] can be built for.
pub const MAX_DEGREE: usize = 8;

/// Constant terms with magnitude below this are treated as singular
/// denominators.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Monomial layout and product tables for `num_vars` variables truncated at
/// total degree `degree`.
pub struct TaylorSpace {
    num_vars: usize,
    degree: usize,
    monomials: Vec<Box<[u8]>>,
    lookup: HashMap<Box<[u8]>, usize>,
    /// `products[i]` lists `(j, k)` with `mono[i] + mono[j] = mono[k]`.
    products: Vec<Vec<(u32, u32)>>,
    /// `derivs[v]` lists `(src, dst, factor)` with `∂_v mono[src] = factor · mono[dst]`.
    derivs: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for TaylorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorSpace")
            .field("num_vars", &self.num_vars)
            .field("degree", &self.degree)
            .field("len", &self.monomials.len())
            .finish()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl TaylorSpace {
    /// Returns the cached space for `(num_vars, degree)`.
    pub fn get(num_vars: usize, degree: usize) -> Result<Arc<TaylorSpace>> {
        if degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "Taylor degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<TaylorSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard
            .entry((num_vars, degree))
            .or_insert_with(|| Arc::new(TaylorSpace::build(num_vars, degree)))
            .clone())
    }

    fn build(num_vars: usize, degree: usize) -> TaylorSpace {
        // graded order: all monomials of degree 0, then 1, ...
        let mut monomials: Vec<Box<[u8]>> = Vec::new();
        for d in 0..=degree {
            let mut current = vec![0u8; num_vars];
            push_monomials_of_degree(&mut monomials, &mut current, 0, d);
        }
        debug_assert_eq!(monomials.len(), binomial(num_vars + degree, degree));
        let lookup: HashMap<Box<[u8]>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let deg = |m: &[u8]| m.iter().map(|&a| a as usize).sum::<usize>();

        let mut products = Vec::with_capacity(monomials.len());
        let mut scratch = vec![0u8; num_vars];
        for mi in &monomials {
            let di = deg(mi);
            let mut row = Vec::new();
            for (j, mj) in monomials.iter().enumerate() {
                if di + deg(mj) > degree {
                    // graded order: every later monomial has at least this degree
                    break;
                }
                for v in 0..num_vars {
                    scratch[v] = mi[v] + mj[v];
                }
                row.push((j as u32, lookup[&scratch[..]] as u32));
            }
            products.push(row);
        }

        let mut derivs = vec![Vec::new(); num_vars];
        for (k, m) in monomials.iter().enumerate() {
            for v in 0..num_vars {
                if m[v] > 0 {
                    scratch.copy_from_slice(m);
                    scratch[v] -= 1;
                    derivs[v].push((k as u32, lookup[&scratch[..]] as u32, m[v] as f64));
                }
            }
        }

        TaylorSpace {
            num_vars,
            degree,
            monomials,
            lookup,
            products,
            derivs,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of stored coefficients, `C(num_vars + degree, degree)`.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, index: usize) -> &[u8] {
        &self.monomials[index]
    }

    pub fn index_of(&self, multi_index: &[u8]) -> Option<usize> {
        self.lookup.get(multi_index).copied()
    }
}

fn push_monomials_of_degree(out: &mut Vec<Box<[u8]>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec().into_boxed_slice());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new().into_boxed_slice());
        }
        return;
    }
    for a in (0..=remaining).rev() {
        current[var] = a as u8;
        push_monomials_of_degree(out, current, var + 1, remaining - a);
    }
    current[var] = 0;
}

/// Truncated multivariate Taylor expansion of a scalar.
#[derive(Clone)]
pub struct TaylorScalar {
    space: Arc<TaylorSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for TaylorScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorScalar")
            .field("num_vars", &self.space.num_vars)
            .field("degree", &self.space.degree)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for TaylorScalar {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.coeffs == other.coeffs
    }
}

impl TaylorScalar {
    pub fn constant(space: &Arc<TaylorSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        TaylorScalar {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn zero(space: &Arc<TaylorSpace>) -> Self {
        Self::constant(space, 0.0)
    }

    /// Seed for variable `var`: constant `value`, unit first-order
    /// coefficient in its own direction.
    pub fn variable(space: &Arc<TaylorSpace>, var: usize, value: f64) -> Self {
        let mut out = Self::constant(space, value);
        if space.degree >= 1 {
            // degree-1 monomials follow the constant, in variable order
            out.coeffs[1 + var] = 1.0;
        }
        out
    }

    pub fn from_coeffs(space: &Arc<TaylorSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.len() {
            return Err(Error::Config(format!(
                "expected {} Taylor coefficients, got {}",
                space.len(),
                coeffs.len()
            )));
        }
        Ok(TaylorScalar {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<TaylorSpace> {
        &self.space
    }

    pub fn num_vars(&self) -> usize {
        self.space.num_vars
    }

    pub fn degree(&self) -> usize {
        self.space.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient for a multi-index (zero beyond the truncation).
    pub fn coeff(&self, multi_index: &[u8]) -> f64 {
        self.space
            .index_of(multi_index)
            .map_or(0.0, |i| self.coeffs[i])
    }

    /// Partial derivative `∂^α f (z0)`, i.e. the coefficient times `α!`.
    pub fn derivative(&self, multi_index: &[u8]) -> f64 {
        let fact: f64 = multi_index
            .iter()
            .map(|&a| (1..=a as u64).product::<u64>() as f64)
            .product();
        self.coeff(multi_index) * fact
    }

    /// First partial derivative with respect to `var` at the expansion point.
    pub fn gradient(&self, var: usize) -> f64 {
        if self.space.degree == 0 {
            return 0.0;
        }
        self.coeffs[1 + var]
    }

    fn same_space(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            || (self.space.num_vars == other.space.num_vars && self.space.degree == other.space.degree)
    }

    fn check_space(&self, other: &Self) {
        assert!(
            self.same_space(other),
            "TaylorScalar space mismatch: ({}, {}) vs ({}, {})",
            self.space.num_vars,
            self.space.degree,
            other.space.num_vars,
            other.space.degree
        );
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        TaylorScalar {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    fn mul_ref(&self, other: &Self) -> Self {
        self.check_space(other);
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(j, k) in &self.space.products[i] {
                out[k as usize] += a * other.coeffs[j as usize];
            }
        }
        TaylorScalar {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// `∂f/∂var` as an expansion in the same space; the top-degree
    /// coefficients of the result are zero (one order of accuracy is lost).
    pub fn partial(&self, var: usize) -> Self {
        let mut out = vec![0.0; self.coeffs.len()];
        for &(src, dst, factor) in &self.space.derivs[var] {
            out[dst as usize] += factor * self.coeffs[src as usize];
        }
        TaylorScalar {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// Applies a univariate function given its derivatives `f^(k)(a0)`,
    /// `k = 0..=degree`, at the constant term `a0`.
    fn apply_univariate(&self, derivs: &[f64]) -> Self {
        let d = self.space.degree;
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        // Horner in the nilpotent part h: Σ f^(k)/k! h^k
        let mut fact = 1.0;
        let mut taylor = Vec::with_capacity(d + 1);
        for (k, &dk) in derivs.iter().enumerate().take(d + 1) {
            if k > 0 {
                fact *= k as f64;
            }
            taylor.push(dk / fact);
        }
        let mut acc = TaylorScalar::constant(&self.space, taylor[d]);
        for k in (0..d).rev() {
            acc = acc.mul_ref(&h);
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Self> {
        let a0 = self.value();
        if a0.abs() < SINGULAR_THRESHOLD || !a0.is_finite() {
            return Err(Error::SingularDenominator { value: a0 });
        }
        let d = self.space.degree;
        let mut derivs = Vec::with_capacity(d + 1);
        let mut c = 1.0 / a0;
        for k in 0..=d {
            derivs.push(c);
            c *= -((k + 1) as f64) / a0;
        }
        Ok(self.apply_univariate(&derivs))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul_ref(&other.recip()?))
    }

    /// Real power with a positive base constant term.
    pub fn powf(&self, exponent: f64) -> Result<Self> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(Error::Domain(format!(
                "non-integer power {exponent} of non-positive base {a0}"
            )));
        }
        let d = self.space.degree;
        let mut derivs = Vec::with_capacity(d + 1);
        let mut coef = 1.0;
        for k in 0..=d {
            derivs.push(coef * a0.powf(exponent - k as f64));
            coef *= exponent - k as f64;
        }
        Ok(self.apply_univariate(&derivs))
    }

    pub fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut out = TaylorScalar::constant(&self.space, 1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        Ok(out)
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a0 = self.value();
        if a0 < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {a0}")));
        }
        if a0 == 0.0 {
            if self.coeffs[1..].iter().all(|&c| c == 0.0) {
                return Ok(self.clone());
            }
            return Err(Error::Domain("sqrt is not differentiable at 0".into()));
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.apply_univariate(&vec![e; self.space.degree + 1])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.space.degree).map(|k| cycle[k % 4]).collect();
        self.apply_univariate(&derivs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.space.degree).map(|k| cycle[k % 4]).collect();
        self.apply_univariate(&derivs)
    }

    /// `|a|`, smooth away from zero; a zero constant term is an error unless
    /// the whole expansion is zero.
    pub fn abs(&self) -> Result<Self> {
        let a0 = self.value();
        if a0 > 0.0 {
            Ok(self.clone())
        } else if a0 < 0.0 {
            Ok(self.scale(-1.0))
        } else if self.coeffs.iter().all(|&c| c == 0.0) {
            Ok(self.clone())
        } else {
            Err(Error::Domain("abs is not differentiable at 0".into()))
        }
    }

    /// Moves this expansion into `target`, whose variable `j` corresponds to
    /// variable `var_map[j]` of `self` (or to no variable at all when
    /// `None`). Monomials involving variables of `self` that are absent from
    /// the map are dropped, and degrees above the target's are truncated.
    pub fn remap(&self, target: &Arc<TaylorSpace>, var_map: &[Option<usize>]) -> Self {
        assert_eq!(var_map.len(), target.num_vars);
        let mut inverse = vec![None; self.space.num_vars];
        for (j, src) in var_map.iter().enumerate() {
            if let Some(s) = src {
                inverse[*s] = Some(j);
            }
        }
        let mut out = vec![0.0; target.len()];
        let mut key = vec![0u8; target.num_vars];
        'mono: for (i, m) in self.space.monomials.iter().enumerate() {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            key.iter_mut().for_each(|k| *k = 0);
            let mut deg = 0usize;
            for (v, &a) in m.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                match inverse[v] {
                    Some(j) => {
                        key[j] = a;
                        deg += a as usize;
                    }
                    None => continue 'mono,
                }
            }
            if deg > target.degree {
                continue;
            }
            out[target.lookup[&key[..]]] += self.coeffs[i];
        }
        TaylorScalar {
            space: target.clone(),
            coeffs: out,
        }
    }

    /// Substitutes `inputs[v]` for `z0_v + δ_v` in this polynomial and returns
    /// the result in the inputs' space. Only the non-constant parts of the
    /// inputs enter: the expansion point is taken to be the inputs' constant
    /// terms.
    pub fn compose(&self, inputs: &[TaylorScalar]) -> Self {
        assert_eq!(inputs.len(), self.space.num_vars);
        let Some(first) = inputs.first() else {
            return self.clone();
        };
        let target = first.space.clone();
        let d = self.space.degree.min(target.degree);
        // powers[v][k] = δ_v^k
        let mut powers: Vec<Vec<TaylorScalar>> = Vec::with_capacity(inputs.len());
        for input in inputs {
            let mut delta = input.clone();
            delta.coeffs[0] = 0.0;
            let mut row = vec![TaylorScalar::constant(&target, 1.0)];
            for k in 1..=d {
                let next = row[k - 1].mul_ref(&delta);
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = vec![0.0; target.len()];
        for (i, m) in self.space.monomials.iter().enumerate() {
            let c = self.coeffs[i];
            if c == 0.0 {
                continue;
            }
            let deg: usize = m.iter().map(|&a| a as usize).sum();
            if deg > d {
                continue;
            }
            let mut term: Option<TaylorScalar> = None;
            for (v, &a) in m.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let p = &powers[v][a as usize];
                term = Some(match term {
                    None => p.clone(),
                    Some(t) => t.mul_ref(p),
                });
            }
            match term {
                None => out[0] += c,
                Some(t) => {
                    for (o, tc) in out.iter_mut().zip(&t.coeffs) {
                        *o += c * tc;
                    }
                }
            }
        }
        TaylorScalar {
            space: target,
            coeffs: out,
        }
    }
}

impl Add for TaylorScalar {
    type Output = TaylorScalar;
    fn add(mut self, rhs: TaylorScalar) -> TaylorScalar {
        self.check_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for TaylorScalar {
    type Output = TaylorScalar;
    fn sub(mut self, rhs: TaylorScalar) -> TaylorScalar {
        self.check_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Mul for TaylorScalar {
    type Output = TaylorScalar;
    fn mul(self, rhs: TaylorScalar) -> TaylorScalar {
        self.mul_ref(&rhs)
    }
}

impl<'a> Mul<&'a TaylorScalar> for &'a TaylorScalar {
    type Output = TaylorScalar;
    fn mul(self, rhs: &TaylorScalar) -> TaylorScalar {
        self.mul_ref(rhs)
    }
}

impl Neg for TaylorScalar {
    type Output = TaylorScalar;
    fn neg(mut self) -> TaylorScalar {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

/// Numeric carrier shared by plain and Taylor evaluation, so closed-form
/// models and the expression evaluator are written once.
pub trait Scalar:
    Clone + fmt::Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// A constant in the same space as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn scale(&self, factor: f64) -> Self;
    fn recip(&self) -> Result<Self>;
    fn powf(&self, exponent: f64) -> Result<Self>;
    fn powi(&self, n: i32) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn abs(&self) -> Result<Self>;

    fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.clone() * other.recip()?)
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(&self, factor: f64) -> f64 {
        self * factor
    }
    fn recip(&self) -> Result<f64> {
        if f64::abs(*self) < SINGULAR_THRESHOLD || !self.is_finite() {
            return Err(Error::SingularDenominator { value: *self });
        }
        Ok(1.0 / self)
    }
    fn powf(&self, exponent: f64) -> Result<f64> {
        if *self <= 0.0 {
            return Err(Error::Domain(format!(
                "non-integer power {exponent} of non-positive base {self}"
            )));
        }
        Ok(f64::powf(*self, exponent))
    }
    fn powi(&self, n: i32) -> Result<f64> {
        if n < 0 {
            return Ok(Scalar::recip(self)?.powi(-n));
        }
        Ok(f64::powi(*self, n))
    }
    fn sqrt(&self) -> Result<f64> {
        if *self < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn abs(&self) -> Result<f64> {
        Ok(f64::abs(*self))
    }
}

impl Scalar for TaylorScalar {
    fn lift(&self, c: f64) -> TaylorScalar {
        TaylorScalar::constant(&self.space, c)
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn scale(&self, factor: f64) -> TaylorScalar {
        TaylorScalar::scale(self, factor)
    }
    fn recip(&self) -> Result<TaylorScalar> {
        TaylorScalar::recip(self)
    }
    fn powf(&self, exponent: f64) -> Result<TaylorScalar> {
        TaylorScalar::powf(self, exponent)
    }
    fn powi(&self, n: i32) -> Result<TaylorScalar> {
        TaylorScalar::powi(self, n)
    }
    fn sqrt(&self) -> Result<TaylorScalar> {
        TaylorScalar::sqrt(self)
    }
    fn exp(&self) -> TaylorScalar {
        TaylorScalar::exp(self)
    }
    fn sin(&self) -> TaylorScalar {
        TaylorScalar::sin(self)
    }
    fn cos(&self) -> TaylorScalar {
        TaylorScalar::cos(self)
    }
    fn abs(&self) -> Result<TaylorScalar> {
        TaylorScalar::abs(self)
    }
    fn div(&self, other: &TaylorScalar) -> Result<TaylorScalar> {
        TaylorScalar::div(self, other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_count_matches_binomial() {
        for n in 0..6 {
            for d in 0..=5 {
                let s = TaylorSpace::get(n, d).unwrap();
                assert_eq!(s.len(), binomial(n + d, d), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn degree_above_cap_is_rejected() {
        assert!(matches!(TaylorSpace::get(2, MAX_DEGREE + 1), Err(Error::Config(_))));
    }

    #[test]
    fn bilinear_product() {
        let s = TaylorSpace::get(2, 2).unwrap();
        let x = TaylorScalar::variable(&s, 0, 3.0);
        let v = TaylorScalar::variable(&s, 1, 5.0);
        let f = x * v;
        assert_eq!(f.value(), 15.0);
        assert_eq!(f.derivative(&[1, 0]), 5.0);
        assert_eq!(f.derivative(&[0, 1]), 3.0);
        assert_eq!(f.derivative(&[1, 1]), 1.0);
        assert_eq!(f.derivative(&[2, 0]), 0.0);
    }

    #[test]
    fn cube_binomial_coefficients() {
        let s = TaylorSpace::get(1, 3).unwrap();
        let x = TaylorScalar::variable(&s, 0, 1.0);
        let f = x.powi(3).unwrap();
        assert_eq!(f.coeffs(), &[1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn recip_of_one_plus_x() {
        let s = TaylorSpace::get(1, 4).unwrap();
        let x = TaylorScalar::variable(&s, 0, 0.0).add_constant(1.0);
        let r = x.recip().unwrap();
        let expected = [1.0, -1.0, 1.0, -1.0, 1.0];
        for (a, b) in r.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_denominator_is_an_error() {
        let s = TaylorSpace::get(1, 2).unwrap();
        let x = TaylorScalar::variable(&s, 0, 1e-13);
        assert!(matches!(x.recip(), Err(Error::SingularDenominator { .. })));
        assert!(matches!(Scalar::recip(&0.0f64), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn sqrt_series() {
        // sqrt(1+x) = 1 + x/2 - x^2/8 + x^3/16
        let s = TaylorSpace::get(1, 3).unwrap();
        let x = TaylorScalar::variable(&s, 0, 1.0);
        let r = x.sqrt().unwrap();
        let expected = [1.0, 0.5, -0.125, 0.0625];
        for (a, b) in r.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let neg = TaylorScalar::variable(&s, 0, -1.0);
        assert!(matches!(neg.sqrt(), Err(Error::Domain(_))));
    }

    #[test]
    fn sin_cos_exp_series() {
        let s = TaylorSpace::get(1, 4).unwrap();
        let x = TaylorScalar::variable(&s, 0, 0.0);
        let sin = x.sin();
        let cos = x.cos();
        let exp = x.exp();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(sin.coeffs(), &[0.0, 1.0, 0.0, -1.0 / 6.0, 0.0]));
        assert!(close(cos.coeffs(), &[1.0, 0.0, -0.5, 0.0, 1.0 / 24.0]));
        assert!(close(exp.coeffs(), &[1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]));
    }

    #[test]
    fn partial_lowers_degree() {
        let s = TaylorSpace::get(2, 3).unwrap();
        let x = TaylorScalar::variable(&s, 0, 2.0);
        let y = TaylorScalar::variable(&s, 1, -1.0);
        // f = x^2 y, ∂x f = 2 x y
        let f = x.clone() * x.clone() * y.clone();
        let fx = f.partial(0);
        let expected = (x * y).scale(2.0);
        for (a, b) in fx.coeffs().iter().zip(expected.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn remap_drops_missing_variables() {
        let big = TaylorSpace::get(3, 2).unwrap();
        let small = TaylorSpace::get(1, 2).unwrap();
        let a = TaylorScalar::variable(&big, 0, 1.0);
        let b = TaylorScalar::variable(&big, 2, 2.0);
        let f = a * b; // 2 + 2 δa + δb + δa δb
        let g = f.remap(&small, &[Some(2)]);
        assert_eq!(g.coeffs(), &[2.0, 1.0, 0.0]);
    }

    #[test]
    fn compose_with_linear_inputs() {
        // f(z) = z^2 expanded at 3, composed with z = 3 + 2y
        let s1 = TaylorSpace::get(1, 2).unwrap();
        let f = TaylorScalar::variable(&s1, 0, 3.0).powi(2).unwrap();
        let sy = TaylorSpace::get(1, 2).unwrap();
        let z = TaylorScalar::variable(&sy, 0, 0.0).scale(2.0).add_constant(3.0);
        let g = f.compose(&[z]);
        assert_eq!(g.coeffs(), &[9.0, 12.0, 4.0]);
    }
}
