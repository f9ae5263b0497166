//! Single-valued right-hand sides that are Lipschitz on each of finitely many
//! regions.
//!
//! A region is identified by a [`RegionKey`]. Within one region the field
//! agrees with a Lipschitz "piece" that can be evaluated anywhere, which lets
//! the integrator take smooth Runge-Kutta steps and bisect for the exact
//! region crossing afterwards.

use crate::Result;

pub type RegionKey = u64;

pub trait Selection: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>>;

    fn region(&self, _t: f64, _x: &[f64]) -> Result<RegionKey> {
        Ok(0)
    }

    /// The Lipschitz piece active on `key`, evaluated at `(t, x)` even when
    /// that point lies outside the region.
    fn eval_piece(&self, _key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(t, x)
    }

    /// First time strictly after `t` at which the region containing `(t, x)`
    /// switches by time alone (strip boundaries). `INFINITY` if none.
    fn next_break(&self, _t: f64, _x: &[f64]) -> f64 {
        f64::INFINITY
    }

    /// Lipschitz constant of every piece for the metric `|Δt| + |Δx|`.
    fn piece_lipschitz(&self) -> f64;
}

impl<S: Selection + ?Sized> Selection for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(t, x)
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        (**self).region(t, x)
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval_piece(key, t, x)
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        (**self).next_break(t, x)
    }
    fn piece_lipschitz(&self) -> f64 {
        (**self).piece_lipschitz()
    }
}

impl<S: Selection + ?Sized> Selection for std::sync::Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(t, x)
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        (**self).region(t, x)
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval_piece(key, t, x)
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        (**self).next_break(t, x)
    }
    fn piece_lipschitz(&self) -> f64 {
        (**self).piece_lipschitz()
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstantField(pub Vec<f64>);

impl Selection for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, _t: f64, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }
    fn piece_lipschitz(&self) -> f64 {
        0.0
    }
}

/// A smooth field given by a closure and a Lipschitz constant.
pub struct FnField<F> {
    pub dim: usize,
    pub lipschitz: f64,
    pub f: F,
}

impl<F> Selection for FnField<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(t, x))
    }
    fn piece_lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `f + c`, same regions as `f`.
pub struct Shifted<S> {
    pub base: S,
    pub offset: Vec<f64>,
}

impl<S: Selection> Selection for Shifted<S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(crate::linalg::add(&self.base.eval(t, x)?, &self.offset))
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        self.base.region(t, x)
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(crate::linalg::add(&self.base.eval_piece(key, t, x)?, &self.offset))
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        self.base.next_break(t, x)
    }
    fn piece_lipschitz(&self) -> f64 {
        self.base.piece_lipschitz()
    }
}

/// Two-valued field switching on time strips of width `width`: `a` on even
/// strips, `b` on odd ones.
#[derive(Debug, Clone)]
pub struct AlternatingField {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub width: f64,
}

impl AlternatingField {
    fn strip(&self, t: f64) -> u64 {
        (t / self.width).floor().max(0.0) as u64
    }
}

impl Selection for AlternatingField {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.region(t, x)?;
        self.eval_piece(k, t, x)
    }
    fn region(&self, t: f64, _x: &[f64]) -> Result<RegionKey> {
        Ok(self.strip(t) % 2)
    }
    fn eval_piece(&self, key: RegionKey, _t: f64, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(if key == 0 { self.a.clone() } else { self.b.clone() })
    }
    fn next_break(&self, t: f64, _x: &[f64]) -> f64 {
        let next = (self.strip(t) + 1) as f64 * self.width;
        if next > t {
            next
        } else {
            next + self.width
        }
    }
    fn piece_lipschitz(&self) -> f64 {
        0.0
    }
}
