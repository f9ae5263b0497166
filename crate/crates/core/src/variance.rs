//! The maximal-variance functional and its affine majorants.
//!
//! `h²(y, K)` is the largest variance of a random variable supported in `K`
//! with mean `y`. The objective `E|w|²` is linear in the law of `w` and the
//! extreme laws under the mean constraint sit on `ext K`, so over a polytope
//! the supremum is the LP
//!
//! ```text
//! max Σθ_i |v_i|²  s.t.  Σθ_i v_i = y,  Σθ_i = 1,  θ ≥ 0
//! ```
//!
//! minus `|y|²`. Data is recentred on the Chebyshev center and rescaled by
//! the Chebyshev radius before the solve, and `h` scales back linearly.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm_sq, scale, sub};
use crate::lp::{solve_lp, LpProblem};
use crate::polytope::{Polytope, MEMBERSHIP_TOL};
use crate::{Error, Result};

/// `h(y, K)`, with `Outside` standing for the `-∞` value off `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HValue {
    Outside,
    Value(f64),
}

impl HValue {
    pub fn value(self) -> Option<f64> {
        match self {
            HValue::Value(v) => Some(v),
            HValue::Outside => None,
        }
    }

    pub fn is_outside(self) -> bool {
        matches!(self, HValue::Outside)
    }
}

/// `φ(z) = ⟨a, z⟩ + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMajorant {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffineMajorant {
    pub fn zero(dim: usize) -> Self {
        Self {
            a: vec![0.0; dim],
            b: 0.0,
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        dot(&self.a, z) + self.b
    }

    pub fn slope(&self) -> f64 {
        norm_sq(&self.a).sqrt()
    }
}

struct Normalized {
    center: Vec<f64>,
    radius: f64,
    vertices: Vec<Vec<f64>>,
}

impl Normalized {
    fn new(p: &Polytope) -> Self {
        let (center, radius) = p.chebyshev();
        let vertices = if radius > 0.0 {
            p.vertices()
                .iter()
                .map(|v| scale(&sub(v, &center), 1.0 / radius))
                .collect()
        } else {
            vec![vec![0.0; p.dim()]; p.len()]
        };
        Self {
            center,
            radius,
            vertices,
        }
    }

    fn to_local(&self, y: &[f64]) -> Vec<f64> {
        scale(&sub(y, &self.center), 1.0 / self.radius)
    }

    /// Variance LP at a local point: `(h², duals)` or `None` when infeasible.
    fn solve(&self, y: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let n = y.len();
        let m = self.vertices.len();
        let mut a = vec![vec![0.0; m]; n + 1];
        for (j, v) in self.vertices.iter().enumerate() {
            for i in 0..n {
                a[i][j] = v[i];
            }
            a[n][j] = 1.0;
        }
        let mut b = y.to_vec();
        b.push(1.0);
        let c: Vec<f64> = self.vertices.iter().map(|v| norm_sq(v)).collect();
        let lp = LpProblem::new(c, a, b)?;
        match solve_lp(&lp) {
            Ok(sol) => Ok(Some(((sol.value - norm_sq(y)).max(0.0), sol.duals))),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn check_dim(y: &[f64], p: &Polytope) -> Result<()> {
    if y.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `h(y, P)`.
pub fn h_value(y: &[f64], p: &Polytope) -> Result<HValue> {
    check_dim(y, p)?;
    let norm = Normalized::new(p);
    if norm.radius == 0.0 {
        let d = crate::linalg::dist(y, &p.vertices()[0]);
        return Ok(if d <= MEMBERSHIP_TOL {
            HValue::Value(0.0)
        } else {
            HValue::Outside
        });
    }
    Ok(match norm.solve(&norm.to_local(y))? {
        Some((h2, _)) => HValue::Value(norm.radius * h2.sqrt()),
        None => HValue::Outside,
    })
}

/// Affine `φ` with `φ(y) ≤ h(y, P) + eps/2` and `φ ≥ h(·, P)` on `P`.
///
/// The supporting plane is taken at `y' = y + λ(c(P) − y)` for
/// `λ ∈ {0, 1, 1/2, 1/4, ...}`, first success wins. At `y'` the dual prices
/// `(λ_d, μ)` of the variance LP bound `E|w|² ≤ ⟨λ_d, z⟩ + μ` for every mean
/// `z ∈ P` (weak duality), so `h(z)² ≤ q(z) = ⟨λ_d, z⟩ + μ − |z|²` and the
/// tangent plane of the concave `√q` at `y'` dominates `h` on all of `P`.
/// Falls back to the constant `r(P)`, which dominates `h` by the Chebyshev
/// bound.
pub fn affine_majorant(y: &[f64], p: &Polytope, eps: f64) -> Result<AffineMajorant> {
    check_dim(y, p)?;
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("majorant tolerance must be positive, got {eps}")));
    }
    let norm = Normalized::new(p);
    if norm.radius == 0.0 {
        if crate::linalg::dist(y, &p.vertices()[0]) > MEMBERSHIP_TOL {
            return Err(Error::NotMember {
                residual: crate::linalg::dist(y, &p.vertices()[0]),
            });
        }
        return Ok(AffineMajorant::zero(p.dim()));
    }
    let yl = norm.to_local(y);
    let Some((hy2, _)) = norm.solve(&yl)? else {
        return Err(Error::NotMember { residual: f64::NAN });
    };
    let hy = hy2.sqrt();
    let budget = eps / (2.0 * norm.radius);
    let lambdas = std::iter::once(0.0).chain((0..64).map(|k| 0.5f64.powi(k)));
    for lambda in lambdas {
        let yp: Vec<f64> = yl.iter().map(|v| v * (1.0 - lambda)).collect();
        let Some(local) = tangent_at(&norm, &yp)? else {
            continue;
        };
        if local.eval(&yl) <= hy + budget && sound_on_vertices(&norm, &local) {
            return Ok(unscale(&norm, local));
        }
    }
    Ok(AffineMajorant {
        a: vec![0.0; p.dim()],
        b: norm.radius,
    })
}

fn tangent_at(norm: &Normalized, yp: &[f64]) -> Result<Option<AffineMajorant>> {
    let Some((_, duals)) = norm.solve(yp)? else {
        return Ok(None);
    };
    let n = yp.len();
    let lam = &duals[..n];
    // repair μ so that (λ, μ) is exactly dual feasible
    let mu = norm
        .vertices
        .iter()
        .map(|v| norm_sq(v) - dot(lam, v))
        .fold(f64::NEG_INFINITY, f64::max);
    let q = dot(lam, yp) + mu - norm_sq(yp);
    if !(q > 1e-14) {
        return Ok(None);
    }
    let s = q.sqrt();
    let a: Vec<f64> = lam.iter().zip(yp).map(|(l, y)| (l - 2.0 * y) / (2.0 * s)).collect();
    let b = s - dot(&a, yp);
    if !a.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Ok(None);
    }
    Ok(Some(AffineMajorant { a, b }))
}

fn sound_on_vertices(norm: &Normalized, phi: &AffineMajorant) -> bool {
    norm.vertices.iter().all(|v| phi.eval(v) >= -1e-12)
}

fn unscale(norm: &Normalized, local: AffineMajorant) -> AffineMajorant {
    let b = norm.radius * local.b - dot(&local.a, &norm.center);
    AffineMajorant { a: local.a, b }
}
