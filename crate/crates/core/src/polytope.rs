//! Polytopes in V-representation.
//!
//! Facets are never enumerated: membership and decompositions go through the
//! feasibility LP `{Σθ_i v_i = y, Σθ_i = 1, θ ≥ 0}`, distances through
//! Wolfe's minimum-norm-point iteration and the Chebyshev ball through
//! Welzl's recursion.

use serde::{Deserialize, Serialize};

use crate::linalg::{dist, dot, norm_sq, solve, sub};
use crate::lp::{basic_feasible_point, min_infeasibility, LpProblem};
use crate::{Error, Result};

/// Tolerance for membership tests used by canonicalization.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricDecomposition {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl BarycentricDecomposition {
    pub fn recombine(&self, p: &Polytope) -> Vec<f64> {
        let mut y = vec![0.0; p.dim()];
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            crate::linalg::axpy(&mut y, w, &p.vertices[i]);
        }
        y
    }
}

impl TryFrom<Vec<Vec<f64>>> for Polytope {
    type Error = Error;

    fn try_from(vertices: Vec<Vec<f64>>) -> Result<Self> {
        Polytope::new(vertices)
    }
}

impl From<Polytope> for Vec<Vec<f64>> {
    fn from(p: Polytope) -> Self {
        p.vertices
    }
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices.first().ok_or(Error::EmptyPolytope)?.len();
        if dim == 0 {
            return Err(Error::Invalid("polytope dimension must be positive".into()));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("polytope vertex"));
            }
        }
        Ok(Self { dim, vertices })
    }

    pub fn singleton(p: Vec<f64>) -> Result<Self> {
        Self::new(vec![p])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        Ok(())
    }

    fn membership_lp(vertices: &[&Vec<f64>], y: &[f64]) -> Result<LpProblem> {
        let n = y.len();
        let m = vertices.len();
        let mut a = vec![vec![0.0; m]; n + 1];
        for (j, v) in vertices.iter().enumerate() {
            for i in 0..n {
                a[i][j] = v[i];
            }
            a[n][j] = 1.0;
        }
        let mut b = y.to_vec();
        b.push(1.0);
        LpProblem::new(vec![0.0; m], a, b)
    }

    /// Indices of the vertices that survive redundancy removal, in increasing
    /// order. Later duplicates and points inside the hull of the remaining
    /// vertices are dropped, so the lowest index of a duplicate group is kept.
    pub fn extreme_indices(&self) -> Vec<usize> {
        let mut alive = vec![true; self.vertices.len()];
        for i in (0..self.vertices.len()).rev() {
            let others: Vec<&Vec<f64>> = self
                .vertices
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && alive[j])
                .map(|(_, v)| v)
                .collect();
            if others.is_empty() {
                continue;
            }
            let redundant = match Self::membership_lp(&others, &self.vertices[i]) {
                Ok(lp) => min_infeasibility(&lp).map(|r| r <= MEMBERSHIP_TOL).unwrap_or(false),
                Err(_) => false,
            };
            if redundant {
                alive[i] = false;
            }
        }
        (0..self.vertices.len()).filter(|&i| alive[i]).collect()
    }

    /// Drops redundant vertices so that `vertices` approximates `ext P`.
    pub fn canonicalize(&self) -> Polytope {
        let keep = self.extreme_indices();
        Polytope {
            dim: self.dim,
            vertices: keep.iter().map(|&i| self.vertices[i].clone()).collect(),
        }
    }

    /// Whether the membership LP has L1 infeasibility at most `tol`.
    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(y)?;
        let refs: Vec<&Vec<f64>> = self.vertices.iter().collect();
        let lp = Self::membership_lp(&refs, y)?;
        Ok(min_infeasibility(&lp)? <= tol)
    }

    /// Writes `y` as a convex combination of at most `dim + 1` vertices, taken
    /// from a basic feasible solution of the membership LP.
    pub fn caratheodory(&self, y: &[f64]) -> Result<BarycentricDecomposition> {
        self.check_dim(y)?;
        let refs: Vec<&Vec<f64>> = self.vertices.iter().collect();
        let lp = Self::membership_lp(&refs, y)?;
        let theta = basic_feasible_point(&lp).map_err(|e| match e {
            Error::Infeasible { residual } => Error::NotMember { residual },
            other => other,
        })?;
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        for (i, &w) in theta.iter().enumerate() {
            if w > 1e-15 {
                indices.push(i);
                weights.push(w);
            }
        }
        if indices.is_empty() {
            return Err(Error::NotMember { residual: f64::NAN });
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let dec = BarycentricDecomposition { indices, weights };
        let err = dist(&dec.recombine(self), y);
        if err > 1e-9 {
            return Err(Error::NotMember { residual: err });
        }
        Ok(dec)
    }

    /// Center and radius of the smallest ball containing every vertex.
    pub fn chebyshev(&self) -> (Vec<f64>, f64) {
        let pts = &self.vertices;
        let mut boundary = Vec::with_capacity(self.dim + 1);
        let ball = welzl(pts, pts.len(), &mut boundary, self.dim)
            .unwrap_or_else(|| Ball::point(pts[0].clone()));
        let radius = pts
            .iter()
            .map(|v| dist(v, &ball.center))
            .fold(0.0, f64::max);
        (ball.center, radius)
    }

    /// Euclidean distance from `y` to the polytope.
    pub fn distance(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        if self.contains(y, 1e-12)? {
            return Ok(0.0);
        }
        let shifted: Vec<Vec<f64>> = self.vertices.iter().map(|v| sub(v, y)).collect();
        Ok(min_norm_point(&shifted).iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Hausdorff distance; for polytopes the supremum is attained at vertices.
    pub fn hausdorff(&self, other: &Polytope) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut d = 0.0f64;
        for v in &self.vertices {
            d = d.max(other.distance(v)?);
        }
        for v in &other.vertices {
            d = d.max(self.distance(v)?);
        }
        Ok(d)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(dist(a, b));
            }
        }
        d
    }
}

#[derive(Debug, Clone)]
struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    fn point(p: Vec<f64>) -> Self {
        Ball {
            center: p,
            radius: 0.0,
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        dist(&self.center, p) <= self.radius + 1e-12 * (1.0 + self.radius)
    }
}

/// Smallest ball with every point of `boundary` on its sphere, centered in
/// their affine hull. Affinely dependent points are skipped greedily.
fn circumball(pts: &[Vec<f64>], boundary: &[usize]) -> Option<Ball> {
    let (&first, rest) = boundary.split_first()?;
    let p0 = &pts[first];
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for &i in rest {
        let d = sub(&pts[i], p0);
        let mut trial = dirs.clone();
        trial.push(d);
        if gram_solve(&trial).is_some() {
            dirs = trial;
        }
    }
    let alpha = gram_solve(&dirs)?;
    let mut center = p0.clone();
    for (a, d) in alpha.iter().zip(&dirs) {
        crate::linalg::axpy(&mut center, *a, d);
    }
    let radius = boundary
        .iter()
        .map(|&i| dist(&pts[i], &center))
        .fold(0.0, f64::max);
    Some(Ball { center, radius })
}

fn gram_solve(dirs: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = dirs.len();
    let g: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&dirs[i], &dirs[j])).collect())
        .collect();
    let rhs: Vec<f64> = dirs.iter().map(|d| 0.5 * norm_sq(d)).collect();
    solve(g, rhs)
}

fn welzl(pts: &[Vec<f64>], n: usize, boundary: &mut Vec<usize>, dim: usize) -> Option<Ball> {
    if n == 0 || boundary.len() == dim + 1 {
        return circumball(pts, boundary);
    }
    let p = n - 1;
    if let Some(ball) = welzl(pts, n - 1, boundary, dim) {
        if ball.contains(&pts[p]) {
            return Some(ball);
        }
    }
    boundary.push(p);
    let ball = welzl(pts, n - 1, boundary, dim);
    boundary.pop();
    ball
}

/// Minimum-norm point of the convex hull of `z` (Wolfe's algorithm).
pub(crate) fn min_norm_point(z: &[Vec<f64>]) -> Vec<f64> {
    let scale = z.iter().map(|v| norm_sq(v)).fold(0.0, f64::max).max(1e-300);
    let start = (0..z.len())
        .min_by(|&a, &b| norm_sq(&z[a]).total_cmp(&norm_sq(&z[b])))
        .expect("nonempty point set");
    let mut support = vec![start];
    let mut lambda = vec![1.0];
    let mut x = z[start].clone();
    for _ in 0..1000 {
        let xx = norm_sq(&x);
        let (j, best) = (0..z.len())
            .map(|i| (i, dot(&x, &z[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best >= xx - 1e-14 * scale || support.contains(&j) {
            break;
        }
        support.push(j);
        lambda.push(0.0);
        loop {
            let Some(alpha) = affine_min_norm(z, &support) else {
                return x;
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                x = combine(z, &support, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let mut k = 0;
            while k < support.len() {
                if lambda[k] <= 1e-14 {
                    support.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            for l in lambda.iter_mut() {
                *l /= total;
            }
            x = combine(z, &support, &lambda);
            if support.len() <= 1 {
                break;
            }
        }
    }
    x
}

fn combine(z: &[Vec<f64>], support: &[usize], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; z[0].len()];
    for (&i, &wi) in support.iter().zip(w) {
        crate::linalg::axpy(&mut x, wi, &z[i]);
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of `z[support]`.
fn affine_min_norm(z: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = dot(&z[support[i]], &z[support[j]]);
        }
        a[i][k] = 1.0;
        a[k][i] = 1.0;
    }
    let mut rhs = vec![0.0; k + 1];
    rhs[k] = 1.0;
    let sol = solve(a, rhs)?;
    Some(sol[..k].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment() -> Polytope {
        Polytope::new(vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    fn triangle() -> Polytope {
        Polytope::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn square() -> Polytope {
        Polytope::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn membership_examples() {
        assert!(segment().contains(&[0.0], 1e-9).unwrap());
        assert!(!segment().contains(&[2.0], 1e-9).unwrap());
        // facet x + y ≤ 1 is violated by (0.6, 0.6)
        assert!(!triangle().contains(&[0.6, 0.6], 1e-9).unwrap());
        assert!(matches!(
            triangle().contains(&[0.1], 1e-9),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn caratheodory_examples() {
        let t = triangle();
        let d = t.caratheodory(&[0.0, 1.0]).unwrap();
        assert_eq!(d.indices, vec![2]);
        assert_eq!(d.weights, vec![1.0]);

        let d = segment().caratheodory(&[0.0]).unwrap();
        assert_eq!(d.indices, vec![0, 1]);
        assert!((d.weights[0] - 0.5).abs() < 1e-15 && (d.weights[1] - 0.5).abs() < 1e-15);

        let s = square();
        let d = s.caratheodory(&[0.5, 0.5]).unwrap();
        assert!(d.indices.len() <= 3);
        assert!(dist(&d.recombine(&s), &[0.5, 0.5]) <= 1e-9);

        assert!(matches!(
            segment().caratheodory(&[1.5]),
            Err(Error::NotMember { .. })
        ));
    }

    #[test]
    fn chebyshev_examples() {
        let (c, r) = Polytope::singleton(vec![2.0, -1.0]).unwrap().chebyshev();
        assert_eq!((c, r), (vec![2.0, -1.0], 0.0));
        let (c, r) = segment().chebyshev();
        assert!(c[0].abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        let (c, r) = square().chebyshev();
        assert!(dist(&c, &[0.5, 0.5]) < 1e-12);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_matches_grid_minimax_on_square() {
        // brute-force oracle: minimize max-vertex distance over a 1e-3 grid
        let s = square();
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            for j in (400..=600).step_by(1) {
                let c = [i as f64 * 1e-3, j as f64 * 1e-3];
                let r = s.vertices().iter().map(|v| dist(v, &c)).fold(0.0, f64::max);
                best = best.min(r);
            }
        }
        let (_, r) = s.chebyshev();
        assert!((r - best).abs() < 1e-3);
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_examples() {
        let p = square();
        assert!(p.hausdorff(&p).unwrap() < 1e-12);
        let a = Polytope::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let b = Polytope::new(vec![vec![0.0], vec![2.0]]).unwrap();
        assert!((a.hausdorff(&b).unwrap() - 1.0).abs() < 1e-12);
        let shifted = Polytope::new(
            p.vertices().iter().map(|v| vec![v[0] + 1.0, v[1]]).collect(),
        )
        .unwrap();
        assert!((p.hausdorff(&shifted).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_triangle_edge() {
        let t = triangle();
        let d = t.distance(&[1.0, 1.0]).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(t.distance(&[0.2, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn canonicalize_drops_interior_and_duplicate_points() {
        let p = Polytope::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.2, 0.2],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.5, 0.5],
        ])
        .unwrap();
        assert_eq!(p.extreme_indices(), vec![0, 1, 3]);
        assert_eq!(p.canonicalize().len(), 3);
    }

    #[test]
    fn serializes_as_vertex_arrays() {
        let json = serde_json::to_string(&segment()).unwrap();
        assert_eq!(json, "[[-1.0],[1.0]]");
        let back: Polytope = serde_json::from_str(&json).unwrap();
        assert_eq!(back, segment());
        assert!(serde_json::from_str::<Polytope>("[[1.0],[1.0,2.0]]").is_err());
    }
}
