//! Points of the order-3 jet space `(t, x, v, v′, v″)` plus external
//! parameters, stored as one flat coordinate vector.
//!
//! Flat layout for base dimension `q` and `np` parameters:
//! `[t, x_1..x_q, v_1..v_q, vp_1..vp_q, vpp_1..vpp_q, p_1..p_np]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taylor::{TaylorScalar, TaylorSpace};

/// Number of derivative levels stored per point: x, v, v′, v″.
pub const LEVELS: usize = 4;

/// A single coordinate of the jet space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    T,
    /// `level` 0 is x, 1 is v, 2 is v′, 3 is v″.
    Jet { level: usize, index: usize },
    Param(usize),
}

impl Coord {
    pub fn x(index: usize) -> Coord {
        Coord::Jet { level: 0, index }
    }
    pub fn v(index: usize) -> Coord {
        Coord::Jet { level: 1, index }
    }
    pub fn vp(index: usize) -> Coord {
        Coord::Jet { level: 2, index }
    }
    pub fn vpp(index: usize) -> Coord {
        Coord::Jet { level: 3, index }
    }

    pub fn flat(self, q: usize) -> usize {
        match self {
            Coord::T => 0,
            Coord::Jet { level, index } => 1 + level * q + index,
            Coord::Param(i) => 1 + LEVELS * q + i,
        }
    }

    pub fn from_flat(i: usize, q: usize) -> Coord {
        if i == 0 {
            Coord::T
        } else if i <= LEVELS * q {
            let k = i - 1;
            Coord::Jet {
                level: k / q,
                index: k % q,
            }
        } else {
            Coord::Param(i - 1 - LEVELS * q)
        }
    }

    /// Name as used by the expression language.
    pub fn name(self, param_names: &[String]) -> String {
        match self {
            Coord::T => "t".into(),
            Coord::Jet { level, index } => {
                format!("{}{}", ["x", "v", "vp", "vpp"][level], index + 1)
            }
            Coord::Param(i) => param_names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("p{}", i + 1)),
        }
    }
}

/// Shape of a flat coordinate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub q: usize,
    pub num_params: usize,
}

impl Layout {
    pub fn new(q: usize, num_params: usize) -> Self {
        Layout { q, num_params }
    }

    /// Number of jet coordinates (without parameters).
    pub fn jet_len(&self) -> usize {
        1 + LEVELS * self.q
    }

    pub fn len(&self) -> usize {
        self.jet_len() + self.num_params
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flat(&self, c: Coord) -> usize {
        c.flat(self.q)
    }

    /// Flat indices of one derivative level.
    pub fn level(&self, level: usize) -> impl Iterator<Item = usize> {
        let q = self.q;
        (0..q).map(move |a| Coord::Jet { level, index: a }.flat(q))
    }

    pub fn params(&self) -> impl Iterator<Item = usize> {
        let start = self.jet_len();
        start..start + self.num_params
    }
}

/// A point of the order-3 jet space with parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    q: usize,
    coords: Vec<f64>,
}

impl JetPoint {
    pub fn zeros(layout: Layout) -> Self {
        JetPoint {
            q: layout.q,
            coords: vec![0.0; layout.len()],
        }
    }

    pub fn new(t: f64, x: &[f64], v: &[f64], vp: &[f64], vpp: &[f64], params: &[f64]) -> Result<Self> {
        let q = x.len();
        if q == 0 {
            return Err(Error::Config("jet point needs q >= 1".into()));
        }
        for (name, s) in [("v", v), ("vp", vp), ("vpp", vpp)] {
            if s.len() != q {
                return Err(Error::Config(format!(
                    "{name} has length {}, expected q = {q}",
                    s.len()
                )));
            }
        }
        let mut coords = Vec::with_capacity(1 + LEVELS * q + params.len());
        coords.push(t);
        for s in [x, v, vp, vpp, params] {
            coords.extend_from_slice(s);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("jet point has non-finite entries".into()));
        }
        Ok(JetPoint { q, coords })
    }

    pub fn from_flat(layout: Layout, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != layout.len() {
            return Err(Error::Config(format!(
                "expected {} coordinates, got {}",
                layout.len(),
                coords.len()
            )));
        }
        Ok(JetPoint { q: layout.q, coords })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.q, self.coords.len() - 1 - LEVELS * self.q)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn get(&self, c: Coord) -> f64 {
        self.coords[c.flat(self.q)]
    }

    pub fn set(&mut self, c: Coord, value: f64) {
        let i = c.flat(self.q);
        self.coords[i] = value;
    }

    pub fn t(&self) -> f64 {
        self.coords[0]
    }

    pub fn level(&self, level: usize) -> &[f64] {
        let start = 1 + level * self.q;
        &self.coords[start..start + self.q]
    }

    pub fn level_mut(&mut self, level: usize) -> &mut [f64] {
        let start = 1 + level * self.q;
        &mut self.coords[start..start + self.q]
    }

    pub fn x(&self) -> &[f64] {
        self.level(0)
    }
    pub fn v(&self) -> &[f64] {
        self.level(1)
    }
    pub fn vp(&self) -> &[f64] {
        self.level(2)
    }
    pub fn vpp(&self) -> &[f64] {
        self.level(3)
    }

    pub fn params(&self) -> &[f64] {
        &self.coords[1 + LEVELS * self.q..]
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        let start = 1 + LEVELS * self.q;
        &mut self.coords[start..]
    }

    /// Same point with different parameter values.
    pub fn with_params(&self, params: &[f64]) -> JetPoint {
        let mut coords = self.coords[..1 + LEVELS * self.q].to_vec();
        coords.extend_from_slice(params);
        JetPoint { q: self.q, coords }
    }
}

/// Lifts every coordinate of `point` to a [`TaylorScalar`] of degree `order`
/// in the variables `active` (flat indices): selected coordinates are seeded
/// with a unit first-order coefficient, the rest are constants.
pub fn taylor_lift(point: &JetPoint, order: usize, active: &[usize]) -> Result<Vec<TaylorScalar>> {
    if active.is_empty() {
        return Err(Error::Config("taylor_lift needs at least one active variable".into()));
    }
    let space = TaylorSpace::get(active.len(), order)?;
    let mut out: Vec<TaylorScalar> = point
        .coords
        .iter()
        .map(|&c| TaylorScalar::constant(&space, c))
        .collect();
    for (var, &flat) in active.iter().enumerate() {
        let slot = out.get_mut(flat).ok_or_else(|| {
            Error::Config(format!("active variable {flat} is outside the coordinate vector"))
        })?;
        *slot = TaylorScalar::variable(&space, var, point.coords[flat]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let q = 3;
        for i in 0..(1 + LEVELS * q + 5) {
            assert_eq!(Coord::from_flat(i, q).flat(q), i);
        }
        assert_eq!(Coord::vp(1).flat(q), 1 + 2 * 3 + 1);
        assert_eq!(Coord::vp(1).name(&[]), "vp2");
    }

    #[test]
    fn lift_seeds_selected_coordinate() {
        let p = JetPoint::new(2.0, &[1.0], &[0.0], &[0.0], &[0.0], &[]).unwrap();
        let lifted = taylor_lift(&p, 1, &[0]).unwrap();
        assert_eq!(lifted[0].value(), 2.0);
        assert_eq!(lifted[0].gradient(0), 1.0);
        assert_eq!(lifted[1].gradient(0), 0.0);
        assert!(matches!(taylor_lift(&p, 1, &[]), Err(Error::Config(_))));
        assert!(matches!(taylor_lift(&p, 99, &[0]), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(JetPoint::new(0.0, &[], &[], &[], &[], &[]).is_err());
        assert!(JetPoint::new(0.0, &[1.0], &[1.0, 2.0], &[0.0], &[0.0], &[]).is_err());
        assert!(JetPoint::new(f64::NAN, &[1.0], &[1.0], &[0.0], &[0.0], &[]).is_err());
    }
}
