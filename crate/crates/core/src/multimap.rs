//! Multifunctions `F(t, x) = co{v_1(t, x), ..., v_m(t, x)}` with Lipschitz
//! vertex maps, and the Lipschitz sample paths used to probe Picard operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::VectorExpr;
use crate::linalg::{axpy, dist, norm};
use crate::polytope::{BarycentricDecomposition, Polytope};
use crate::selection::Selection;
use crate::{Error, Result};

/// Samples used by the Lipschitz estimator.
pub const LIPSCHITZ_SAMPLES: usize = 100_000;
/// Safety factor applied to sampled Lipschitz quotients.
pub const LIPSCHITZ_SAFETY: f64 = 1.5;

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl StateBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::Invalid("box bounds must be nonempty and of equal length".into()));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid(format!("degenerate box {min:?} .. {max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    pub fn contains_box(&self, other: &StateBox, tol: f64) -> bool {
        self.contains(&other.min, tol) && self.contains(&other.max, tol)
    }

    pub fn inflate(&self, r: f64) -> StateBox {
        StateBox {
            min: self.min.iter().map(|v| v - r).collect(),
            max: self.max.iter().map(|v| v + r).collect(),
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (a, b))| v.clamp(*a, *b))
            .collect()
    }

    /// Euclidean distance to the box.
    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(x, &self.project(x))
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| b - a).collect()
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * norm(&self.widths())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| if b > a { rng.gen_range(*a..=*b) } else { *a })
            .collect()
    }

    /// Tensor grid with `per_axis` nodes per coordinate (endpoints included;
    /// the midpoint when `per_axis == 1`), lexicographic order.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let axis = |i: usize| -> Vec<f64> {
            if per_axis == 1 {
                vec![0.5 * (self.min[i] + self.max[i])]
            } else {
                (0..per_axis)
                    .map(|k| self.min[i] + (self.max[i] - self.min[i]) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        };
        let mut pts = vec![vec![]];
        for i in 0..self.dim() {
            let ax = axis(i);
            pts = pts
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    ax.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        pts
    }
}

/// The seed set `D` of initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSet {
    Box(StateBox),
    Points { points: Vec<Vec<f64>> },
}

impl SeedSet {
    pub fn dim(&self) -> usize {
        match self {
            SeedSet::Box(b) => b.dim(),
            SeedSet::Points { points } => points.first().map_or(0, |p| p.len()),
        }
    }

    pub fn bounding_box(&self) -> StateBox {
        match self {
            SeedSet::Box(b) => b.clone(),
            SeedSet::Points { points } => {
                let n = self.dim();
                let mut min = vec![f64::INFINITY; n];
                let mut max = vec![f64::NEG_INFINITY; n];
                for p in points {
                    for i in 0..n {
                        min[i] = min[i].min(p[i]);
                        max[i] = max[i].max(p[i]);
                    }
                }
                StateBox { min, max }
            }
        }
    }

    pub fn nearest(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SeedSet::Box(b) => b.project(x),
            SeedSet::Points { points } => points
                .iter()
                .min_by(|a, b| dist(a, x).total_cmp(&dist(b, x)))
                .cloned()
                .unwrap_or_else(|| x.to_vec()),
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(x, &self.nearest(x))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            SeedSet::Box(b) => b.sample(rng),
            SeedSet::Points { points } => points[rng.gen_range(0..points.len())].clone(),
        }
    }

    /// Initial states for grid sweeps: a tensor grid of a box, or the points.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        match self {
            SeedSet::Box(b) => b.grid(per_axis),
            SeedSet::Points { points } => points.clone(),
        }
    }
}

/// `|v(t, x) − v(s, y)| ≤ time·|t − s| + state·|x − y|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzBound {
    pub time: f64,
    pub state: f64,
}

impl LipschitzBound {
    pub fn total(&self) -> f64 {
        self.time.max(self.state)
    }

    pub fn max(self, other: LipschitzBound) -> LipschitzBound {
        LipschitzBound {
            time: self.time.max(other.time),
            state: self.state.max(other.state),
        }
    }

    pub const ZERO: LipschitzBound = LipschitzBound {
        time: 0.0,
        state: 0.0,
    };
}

/// Sampled Lipschitz quotients of `f` on `[0, horizon] × region`, separately
/// in time and in state, inflated by [`LIPSCHITZ_SAFETY`].
pub fn estimate_lipschitz<F>(f: F, horizon: f64, region: &StateBox, seed: u64) -> LipschitzBound
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = region.widths().iter().cloned().fold(horizon, f64::max).max(1e-12);
    let mut lt = 0.0f64;
    let mut lx = 0.0f64;
    for k in 0..LIPSCHITZ_SAMPLES {
        let t = rng.gen_range(0.0..=horizon);
        let x = region.sample(&mut rng);
        let step = scale * 10f64.powf(rng.gen_range(-6.0..-1.0));
        let v0 = f(t, &x);
        if k % 2 == 0 {
            let s = (t + step).min(horizon);
            let dt = s - t;
            if dt > 0.0 {
                lt = lt.max(dist(&f(s, &x), &v0) / dt);
            }
        } else {
            let mut dir: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let nd = norm(&dir);
            if nd == 0.0 {
                continue;
            }
            dir.iter_mut().for_each(|d| *d *= step / nd);
            let y = region.project(&crate::linalg::add(&x, &dir));
            let dx = dist(&x, &y);
            if dx > 0.0 {
                lx = lx.max(dist(&f(t, &y), &v0) / dx);
            }
        }
    }
    LipschitzBound {
        time: lt * LIPSCHITZ_SAFETY,
        state: lx * LIPSCHITZ_SAFETY,
    }
}

#[derive(Debug, Clone)]
pub struct VertexMultiMap {
    dim: usize,
    horizon: f64,
    bound: f64,
    domain: StateBox,
    seed_set: SeedSet,
    maps: Vec<VectorExpr>,
    lipschitz: Vec<LipschitzBound>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub max_vertex_norm: f64,
    pub bound: f64,
    pub bound_ok: bool,
    /// Largest sampled `|Δv| / (L_t|Δt| + L_x|Δx|)`; at most `1 + 1e-6` when sound.
    pub max_lipschitz_ratio: f64,
    pub lipschitz_ok: bool,
    pub inflated_seed_fits: bool,
}

impl HypothesisReport {
    pub fn ok(&self) -> bool {
        self.bound_ok && self.lipschitz_ok && self.inflated_seed_fits
    }
}

impl VertexMultiMap {
    /// Builds the multimap; missing Lipschitz bounds are estimated by sampling.
    pub fn new(
        horizon: f64,
        bound: f64,
        domain: StateBox,
        seed_set: SeedSet,
        maps: Vec<VectorExpr>,
        lipschitz: Option<Vec<LipschitzBound>>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if maps.is_empty() {
            return Err(Error::Invalid("multimap needs at least one vertex map".into()));
        }
        if let Some(bad) = maps.iter().find(|m| m.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if seed_set.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: seed_set.dim(),
            });
        }
        if !(horizon > 0.0) || !(bound >= 0.0) {
            return Err(Error::Invalid("horizon must be positive and bound nonnegative".into()));
        }
        let mut mm = Self {
            dim,
            horizon,
            bound,
            domain,
            seed_set,
            maps,
            lipschitz: vec![],
        };
        mm.lipschitz = match lipschitz {
            Some(l) if l.len() == mm.maps.len() => l,
            Some(l) => {
                return Err(Error::DimensionMismatch {
                    expected: mm.maps.len(),
                    got: l.len(),
                })
            }
            None => {
                let region = mm.reachable_box();
                (0..mm.maps.len())
                    .map(|i| {
                        let m = &mm.maps[i];
                        estimate_lipschitz(|t, x| m.eval(t, x, &[]), horizon, &region, 0x5eed + i as u64)
                    })
                    .collect()
            }
        };
        Ok(mm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn domain(&self) -> &StateBox {
        &self.domain
    }

    pub fn seed_set(&self) -> &SeedSet {
        &self.seed_set
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[VectorExpr] {
        &self.maps
    }

    pub fn lipschitz(&self) -> &[LipschitzBound] {
        &self.lipschitz
    }

    pub fn max_lipschitz(&self) -> LipschitzBound {
        self.lipschitz
            .iter()
            .fold(LipschitzBound::ZERO, |a, b| a.max(*b))
    }

    /// Box hull of `B̄(D, MT)`: the spatial part of the compact set on which
    /// selections are built.
    pub fn reachable_box(&self) -> StateBox {
        self.seed_set.bounding_box().inflate(self.bound * self.horizon)
    }

    pub fn in_reachable(&self, x: &[f64], tol: f64) -> bool {
        self.seed_set.distance(x) <= self.bound * self.horizon + tol
    }

    pub fn check_domain(&self, t: f64, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let tol = 1e-9 * (1.0 + self.horizon);
        if t < -tol || t > self.horizon + tol || !self.domain.contains(x, 1e-9) {
            return Err(Error::OutOfDomain { t, x: x.to_vec() });
        }
        Ok(())
    }

    pub fn vertex(&self, i: usize, t: f64, x: &[f64]) -> Vec<f64> {
        self.maps[i].eval(t, x, &[])
    }

    pub fn vertex_into(&self, i: usize, t: f64, x: &[f64], out: &mut [f64]) {
        self.maps[i].eval_into(t, x, &[], out)
    }

    pub fn raw_vertices(&self, t: f64, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.maps.len()).map(|i| self.vertex(i, t, x)).collect()
    }

    /// Canonical value polytope together with the vertex-map index of each
    /// surviving vertex.
    pub fn value_with_sources(&self, t: f64, x: &[f64]) -> Result<(Polytope, Vec<usize>)> {
        self.check_domain(t, x)?;
        let raw = Polytope::new(self.raw_vertices(t, x))?;
        let keep = raw.extreme_indices();
        let verts = keep.iter().map(|&i| raw.vertices()[i].clone()).collect();
        Ok((Polytope::new(verts)?, keep))
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<Polytope> {
        Ok(self.value_with_sources(t, x)?.0)
    }

    /// Lipschitz selection of `co F` through `y` at `(t, x)`: fixed barycentric
    /// weights of the moving vertices.
    pub fn lsp_selection(&self, t: f64, x: &[f64], y: &[f64], eps: f64) -> Result<LspSelection<'_>> {
        if !(eps > 0.0) {
            return Err(Error::Invalid("eps must be positive".into()));
        }
        let (poly, sources) = self.value_with_sources(t, x)?;
        let BarycentricDecomposition { indices, weights } = poly.caratheodory(y)?;
        Ok(LspSelection {
            map: self,
            indices: indices.into_iter().map(|i| sources[i]).collect(),
            weights,
        })
    }

    /// Samples the bound and Lipschitz hypotheses on `[0, T] × Ω` and checks
    /// `B̄(D, MT) ⊂ Ω`.
    pub fn check_hypotheses(&self, grid_points: usize, pairs: usize, seed: u64) -> HypothesisReport {
        let per_axis = (grid_points as f64).powf(1.0 / (self.dim + 1) as f64).ceil().max(2.0) as usize;
        let mut max_norm = 0.0f64;
        for k in 0..per_axis {
            let t = self.horizon * k as f64 / (per_axis - 1) as f64;
            for x in self.domain.grid(per_axis) {
                for i in 0..self.maps.len() {
                    max_norm = max_norm.max(norm(&self.vertex(i, t, &x)));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ratio = 0.0f64;
        for _ in 0..pairs {
            let t = rng.gen_range(0.0..=self.horizon);
            let s = rng.gen_range(0.0..=self.horizon);
            let x = self.domain.sample(&mut rng);
            let y = self.domain.sample(&mut rng);
            for (i, l) in self.lipschitz.iter().enumerate() {
                let num = dist(&self.vertex(i, t, &x), &self.vertex(i, s, &y));
                let den = l.time * (t - s).abs() + l.state * dist(&x, &y);
                let r = if den > 0.0 {
                    num / den
                } else if num > 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                };
                ratio = ratio.max(r);
            }
        }
        let fits = self
            .domain
            .contains_box(&self.reachable_box(), 1e-12);
        HypothesisReport {
            max_vertex_norm: max_norm,
            bound: self.bound,
            bound_ok: max_norm <= self.bound + 1e-9,
            max_lipschitz_ratio: ratio,
            lipschitz_ok: ratio <= 1.0 + 1e-6,
            inflated_seed_fits: fits,
        }
    }

    /// Seeded piecewise-linear path in `Y`: slopes drawn in `B̄(0, M)`, nodes
    /// clipped to `B̄(D, MT)`.
    pub fn random_path(&self, seed: u64, segments: usize) -> LipschitzPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segments = segments.max(1);
        let dt = self.horizon / segments as f64;
        let reach = self.bound * self.horizon;
        let mut x = self.seed_set.sample(&mut rng);
        let mut times = Vec::with_capacity(segments + 1);
        let mut states = Vec::with_capacity(segments + 1);
        times.push(0.0);
        states.push(x.clone());
        for k in 1..=segments {
            let v = sample_ball(&mut rng, self.dim, self.bound);
            let mut next = x.clone();
            axpy(&mut next, dt, &v);
            let anchor = self.seed_set.nearest(&next);
            let d = dist(&next, &anchor);
            if d > reach {
                next = crate::linalg::lerp(&anchor, &next, reach / d);
            }
            x = next;
            times.push(if k == segments { self.horizon } else { k as f64 * dt });
            states.push(x.clone());
        }
        LipschitzPath {
            times,
            states,
            lipschitz: self.bound,
        }
    }
}

fn sample_ball(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; dim];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if norm(&v) <= 1.0 {
            return v.into_iter().map(|c| c * radius).collect();
        }
    }
}

/// `ψ(s, z) = Σ_j θ_j v_{i_j}(s, z)` with weights frozen at one point.
#[derive(Debug, Clone)]
pub struct LspSelection<'a> {
    map: &'a VertexMultiMap,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl LspSelection<'_> {
    pub fn at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.map.dim];
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            axpy(&mut y, w, &self.map.vertex(i, t, x));
        }
        y
    }

    pub fn lipschitz(&self) -> f64 {
        self.indices
            .iter()
            .map(|&i| self.map.lipschitz[i].total())
            .fold(0.0, f64::max)
    }
}

impl Selection for LspSelection<'_> {
    fn dim(&self) -> usize {
        self.map.dim
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.at(t, x))
    }
    fn piece_lipschitz(&self) -> f64 {
        self.lipschitz()
    }
}

/// An element of `Y`: piecewise linear with `|u(t) − u(s)| ≤ M|t − s|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub lipschitz: f64,
}

impl LipschitzPath {
    pub fn constant(horizon: f64, x: Vec<f64>) -> Self {
        Self {
            times: vec![0.0, horizon],
            states: vec![x.clone(), x],
            lipschitz: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => return self.states[0].clone(),
            k if k >= self.times.len() => return self.states[self.times.len() - 1].clone(),
            k => k - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        crate::linalg::lerp(&self.states[k], &self.states[k + 1], s)
    }

    /// Largest violation of the Lipschitz condition across adjacent nodes.
    pub fn max_lipschitz_excess(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.states.windows(2))
            .map(|(t, x)| dist(&x[0], &x[1]) - self.lipschitz * (t[1] - t[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Vars;

    fn vars(n: usize) -> Vars {
        Vars {
            states: n,
            controls: 0,
        }
    }

    pub(crate) fn constant_segment() -> VertexMultiMap {
        VertexMultiMap::new(
            1.0,
            1.0,
            StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
            SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
            vec![
                VectorExpr::parse(&["-1"], vars(1)).unwrap(),
                VectorExpr::parse(&["1"], vars(1)).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    fn rotating_segment() -> VertexMultiMap {
        VertexMultiMap::new(
            1.0,
            1.0,
            StateBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
            SeedSet::Box(StateBox::new(vec![-0.25, -0.25], vec![0.25, 0.25]).unwrap()),
            vec![
                VectorExpr::parse(&["cos(t)", "sin(t)"], vars(2)).unwrap(),
                VectorExpr::parse(&["-cos(t)", "-sin(t)"], vars(2)).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn constant_segment_value_and_estimates() {
        let f = constant_segment();
        let p = f.value(0.3, &[0.1]).unwrap();
        assert_eq!(p.vertices(), &[vec![-1.0], vec![1.0]]);
        assert_eq!(f.max_lipschitz(), LipschitzBound::ZERO);
        assert!(f.check_hypotheses(10_000, 1000, 1).ok());
        assert!(matches!(f.value(1.5, &[0.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(f.value(0.5, &[3.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn singleton_multimap() {
        let f = VertexMultiMap::new(
            1.0,
            2.0,
            StateBox::new(vec![-5.0], vec![5.0]).unwrap(),
            SeedSet::Box(StateBox::new(vec![0.0], vec![0.0]).unwrap()),
            vec![VectorExpr::parse(&["sin(x)"], vars(1)).unwrap()],
            None,
        )
        .unwrap();
        let p = f.value(0.0, &[0.3]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.vertices()[0][0], 0.3f64.sin());
    }

    #[test]
    fn rotating_segment_value_and_lsp() {
        let f = rotating_segment();
        let t = 0.4;
        let p = f.value(t, &[0.0, 0.0]).unwrap();
        assert!((p.diameter() - 2.0).abs() < 1e-12);
        let ang = p.vertices()[0][1].atan2(p.vertices()[0][0]);
        assert!((ang - t).abs() < 1e-12);
        let lt = f.max_lipschitz().time;
        assert!((1.0..=1.5 + 1e-9).contains(&lt), "estimated {lt}");
        assert!(f.max_lipschitz().state < 1e-12);

        let psi = f.lsp_selection(t, &[0.0, 0.0], &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(psi.weights.len(), 2);
        for s in [0.0, 0.3, 0.9] {
            assert!(norm(&psi.at(s, &[1.0, -1.0])) < 1e-12);
        }
        let v1 = f.vertex(0, t, &[0.0, 0.0]);
        let psi = f.lsp_selection(t, &[0.0, 0.0], &v1, 0.1).unwrap();
        assert_eq!(psi.indices, vec![0]);
    }

    #[test]
    fn lsp_stays_in_moving_hull() {
        let f = rotating_segment();
        let psi = f.lsp_selection(0.2, &[0.0, 0.0], &[0.3, 0.3 * 0.2f64.tan()], 0.1).unwrap();
        for k in 0..10 {
            let s = 0.1 * k as f64;
            let p = f.value(s, &[0.0, 0.0]).unwrap();
            assert!(p.contains(&psi.at(s, &[0.0, 0.0]), 1e-9).unwrap());
        }
    }

    #[test]
    fn random_paths_are_deterministic_and_lipschitz() {
        let f = rotating_segment();
        let a = f.random_path(17, 64);
        assert_eq!(a, f.random_path(17, 64));
        assert_ne!(a, f.random_path(18, 64));
        assert!(a.max_lipschitz_excess() <= 1e-9);
        for x in &a.states {
            assert!(f.in_reachable(x, 1e-9));
        }
        assert_eq!(*a.times.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_bound_gives_constant_path() {
        let f = VertexMultiMap::new(
            1.0,
            0.0,
            StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
            SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
            vec![VectorExpr::parse(&["0"], vars(1)).unwrap()],
            None,
        )
        .unwrap();
        let p = f.random_path(3, 16);
        assert!(p.states.iter().all(|s| s == &p.states[0]));
    }

    #[test]
    fn understated_bound_is_flagged() {
        let f = VertexMultiMap::new(
            1.0,
            0.5,
            StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
            SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
            vec![
                VectorExpr::parse(&["-1"], vars(1)).unwrap(),
                VectorExpr::parse(&["1"], vars(1)).unwrap(),
            ],
            None,
        )
        .unwrap();
        let r = f.check_hypotheses(1000, 100, 1);
        assert!(!r.bound_ok && !r.ok());
    }

    #[test]
    fn path_interpolates_linearly() {
        let p = LipschitzPath {
            times: vec![0.0, 1.0, 2.0],
            states: vec![vec![0.0], vec![1.0], vec![1.0]],
            lipschitz: 1.0,
        };
        assert_eq!(p.at(0.5), vec![0.5]);
        assert_eq!(p.at(1.5), vec![1.0]);
        assert_eq!(p.at(5.0), vec![1.0]);
        assert_eq!(p.at(-1.0), vec![0.0]);
    }
}
