//! Bang-bang feedback from chattering feedback for `x' = g(t, x, u)`, `u ∈ U`.
//!
//! `U` is a finite list of control points, so the extreme points of
//! `F(t, x) = co{g(t, x, ω) : ω ∈ U}` are among the images `g(t, x, u_i)`.
//! The extremal selection built on that multimap is inverted control by
//! control.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::expr::VectorExpr;
use crate::flow::integrate::{fmt17, integrate, IntegrateOptions, Trajectory};
use crate::flow::iteration::{build_extremal, BuildOptions, IterationState, LevelView};
use crate::linalg::{axpy, dist};
use crate::multimap::{estimate_lipschitz, LipschitzBound, SeedSet, StateBox, VertexMultiMap};
use crate::selection::{RegionKey, Selection};
use crate::{Error, Result};

/// Weights may leave the simplex by this much on samples.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Largest `|g(t, x, ω) − f(t, x)|` accepted by the inversion.
pub const INVERSION_TOL: f64 = 1e-6;
/// Residuals within this of the best one count as ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ControlSystem {
    /// `g(t, x, u)`, one component per state.
    pub dynamics: VectorExpr,
    pub controls: Vec<Vec<f64>>,
    pub horizon: f64,
    pub bound: f64,
    pub domain: StateBox,
    pub seed_set: SeedSet,
    /// Per-control `(L_t, L_x)`; estimated when absent.
    pub lipschitz: Option<Vec<LipschitzBound>>,
}

impl ControlSystem {
    pub fn dim(&self) -> usize {
        self.dynamics.len()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.first().map_or(0, Vec::len)
    }

    pub fn g(&self, t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.dynamics.eval(t, x, u)
    }

    /// `F(t, x) = co{g(t, x, u_i)}` with one vertex map per control point.
    pub fn to_multimap(&self) -> Result<VertexMultiMap> {
        if self.controls.is_empty() {
            return Err(Error::Invalid("control set is empty".into()));
        }
        let m = self.control_dim();
        if let Some(bad) = self.controls.iter().find(|u| u.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bad.len(),
            });
        }
        let maps = self.controls.iter().map(|u| self.dynamics.bind_controls(u)).collect();
        VertexMultiMap::new(
            self.horizon,
            self.bound,
            self.domain.clone(),
            self.seed_set.clone(),
            maps,
            self.lipschitz.clone(),
        )
    }

    /// Index of the control reproducing `f` at `(t, x)`: the smallest residual
    /// `|g(t, x, ω) − f|`, ties broken by the lexicographically smallest `ω`.
    pub fn invert(&self, t: f64, x: &[f64], f: &[f64]) -> Result<usize> {
        let res: Vec<f64> = self.controls.iter().map(|u| dist(&self.g(t, x, u), f)).collect();
        let best = res.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(best <= INVERSION_TOL) {
            return Err(Error::Hypothesis(format!(
                "no control reproduces f = {f:?} at ({t}, {x:?}); best residual {best:.3e}"
            )));
        }
        let mut pick: Option<usize> = None;
        for (i, r) in res.iter().enumerate() {
            if *r > best + TIE_TOL {
                continue;
            }
            pick = match pick {
                Some(j) if lex_cmp(&self.controls[j], &self.controls[i]).is_le() => Some(j),
                _ => Some(i),
            };
        }
        Ok(pick.expect("at least one control"))
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Component controls (indices into `U`, constant in `(t, x)`) and weights
/// `θ(t, x)` in the simplex.
#[derive(Debug, Clone)]
pub struct ChatteringFeedback {
    pub components: Vec<usize>,
    pub weights: VectorExpr,
}

/// `f₀(t, x) = Σ_i θ_i(t, x) w_i(t, x)` for smooth fields `w_i`.
pub struct RelaxedField {
    dim: usize,
    fields: Vec<VectorExpr>,
    weights: VectorExpr,
    lipschitz: LipschitzBound,
}

impl RelaxedField {
    /// Checks the weights on a grid of `[0, T] × region` and estimates the
    /// Lipschitz constant of the combination.
    pub fn new(
        fields: Vec<VectorExpr>,
        weights: VectorExpr,
        horizon: f64,
        region: &StateBox,
    ) -> Result<Self> {
        if fields.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: fields.len(),
                got: weights.len(),
            });
        }
        let dim = region.dim();
        if let Some(bad) = fields.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let mut f = Self {
            dim,
            fields,
            weights,
            lipschitz: LipschitzBound::ZERO,
        };
        let per_axis = if dim == 1 { 21 } else { 7 };
        for k in 0..=10 {
            let t = horizon * k as f64 / 10.0;
            for x in region.grid(per_axis) {
                let th = f.weights.eval(t, &x, &[]);
                let sum: f64 = th.iter().sum();
                if th.iter().any(|w| !(*w >= -SIMPLEX_TOL)) || !((sum - 1.0).abs() <= SIMPLEX_TOL) {
                    return Err(Error::Hypothesis(format!(
                        "weights {th:?} at ({t}, {x:?}) are off the simplex"
                    )));
                }
            }
        }
        f.lipschitz = estimate_lipschitz(|t, x| f.at(t, x), horizon, region, 0xc0de);
        Ok(f)
    }

    pub fn at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let th = self.weights.eval(t, x, &[]);
        let mut y = vec![0.0; self.dim];
        for (w, f) in th.iter().zip(&self.fields) {
            if *w != 0.0 {
                axpy(&mut y, *w, &f.eval(t, x, &[]));
            }
        }
        y
    }

    pub fn lipschitz(&self) -> LipschitzBound {
        self.lipschitz
    }
}

impl Selection for RelaxedField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.at(t, x))
    }
    fn piece_lipschitz(&self) -> f64 {
        self.lipschitz.total()
    }
}

/// `f₀ = Σ θ_i g(·, ·, u_i)`.
pub fn relax(sys: &ControlSystem, fb: &ChatteringFeedback) -> Result<RelaxedField> {
    if fb.components.is_empty() || fb.components.len() > sys.dim() + 1 {
        return Err(Error::Invalid(format!(
            "chattering feedback needs 1..={} components, got {}",
            sys.dim() + 1,
            fb.components.len()
        )));
    }
    let fields = fb
        .components
        .iter()
        .map(|&i| {
            sys.controls
                .get(i)
                .map(|u| sys.dynamics.bind_controls(u))
                .ok_or_else(|| Error::Invalid(format!("control index {i} out of range")))
        })
        .collect::<Result<Vec<_>>>()?;
    let region = sys.seed_set.bounding_box().inflate(sys.bound * sys.horizon);
    RelaxedField::new(fields, fb.weights.clone(), sys.horizon, &region)
}

pub struct BangBangFeedback {
    pub system: ControlSystem,
    pub relaxed: Arc<RelaxedField>,
    pub state: IterationState,
}

impl BangBangFeedback {
    /// `ū(t, x)` as an index into `U`.
    pub fn control_index(&self, t: f64, x: &[f64]) -> Result<usize> {
        let f = self.state.extremal().eval(t, x)?;
        self.system.invert(t, x, &f)
    }

    pub fn control(&self, t: f64, x: &[f64]) -> Result<&[f64]> {
        Ok(&self.system.controls[self.control_index(t, x)?])
    }

    /// The closed-loop field `g(t, x, ū(t, x))`, regions shared with `f`.
    pub fn field(&self) -> ClosedLoopField<'_> {
        ClosedLoopField {
            fb: self,
            f: self.state.extremal(),
        }
    }
}

pub struct ClosedLoopField<'a> {
    fb: &'a BangBangFeedback,
    f: LevelView<'a>,
}

impl Selection for ClosedLoopField<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let key = self.f.region(t, x)?;
        self.eval_piece(key, t, x)
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        self.f.region(t, x)
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.f.eval_piece(key, t, x)?;
        let i = self.fb.system.invert(t, x, &y)?;
        Ok(self.fb.system.g(t, x, &self.fb.system.controls[i]))
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        self.f.next_break(t, x)
    }
    fn piece_lipschitz(&self) -> f64 {
        self.f.piece_lipschitz()
    }
}

/// Builds the extremal selection for the relaxed field and wraps its inversion.
pub fn synthesize(
    sys: &ControlSystem,
    fb: &ChatteringFeedback,
    eps0: f64,
    opts: &BuildOptions,
) -> Result<BangBangFeedback> {
    let relaxed = Arc::new(relax(sys, fb)?);
    let map = Arc::new(sys.to_multimap()?);
    let state = build_extremal(map, relaxed.clone(), eps0, opts)?;
    Ok(BangBangFeedback {
        system: sys.clone(),
        relaxed,
        state,
    })
}

/// A closed-loop run with the control applied from each node onwards.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoop {
    pub trajectory: Trajectory,
    pub controls: Vec<Vec<f64>>,
}

impl ClosedLoop {
    /// Writes `t, u1..um` rows.
    pub fn write_controls_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.controls.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("u{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, u) in self.trajectory.times.iter().zip(&self.controls) {
            let mut row = vec![fmt17(*t)];
            row.extend(u.iter().map(|v| fmt17(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates `x' = g(t, x, ū(t, x))` from `(t0, x0)` to `T`.
pub fn closed_loop(
    fb: &BangBangFeedback,
    t0: f64,
    x0: &[f64],
    opts: &IntegrateOptions,
) -> Result<ClosedLoop> {
    let field = fb.field();
    let trajectory = integrate(&field, t0, x0, fb.system.horizon, opts)?;
    let controls = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .zip(&trajectory.derivs)
        .map(|((t, x), d)| {
            let i = fb.system.invert(*t, x, d)?;
            Ok(fb.system.controls[i].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClosedLoop {
        trajectory,
        controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Vars;
    use crate::flow::integrate::sup_distance;

    fn scalar(dynamics: &str, controls: Vec<Vec<f64>>) -> ControlSystem {
        ControlSystem {
            dynamics: VectorExpr::parse(&[dynamics], Vars { states: 1, controls: 1 }).unwrap(),
            controls,
            horizon: 1.0,
            bound: 3.0,
            domain: StateBox::new(vec![-4.0], vec![4.0]).unwrap(),
            seed_set: SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
            lipschitz: None,
        }
    }

    fn weights(src: &[&str]) -> VectorExpr {
        VectorExpr::parse(src, Vars { states: 1, controls: 0 }).unwrap()
    }

    #[test]
    fn linear_system_gives_shifted_segment() {
        let sys = scalar("u - x", vec![vec![-1.0], vec![1.0]]);
        let map = sys.to_multimap().unwrap();
        let p = map.value(0.3, &[0.25]).unwrap();
        let mut v: Vec<f64> = p.vertices().iter().map(|v| v[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![-1.25, 0.75]);
    }

    #[test]
    fn single_control_is_a_singleton() {
        let sys = scalar("u", vec![vec![0.5]]);
        let map = sys.to_multimap().unwrap();
        assert_eq!(map.value(0.0, &[0.0]).unwrap().len(), 1);
    }

    #[test]
    fn symmetric_weights_relax_to_zero() {
        let sys = scalar("u", vec![vec![-1.0], vec![1.0]]);
        let fb = ChatteringFeedback {
            components: vec![0, 1],
            weights: weights(&["0.5", "0.5"]),
        };
        let f0 = relax(&sys, &fb).unwrap();
        assert_eq!(f0.at(0.4, &[0.1]), vec![0.0]);
        assert_eq!(f0.piece_lipschitz(), 0.0);
    }

    #[test]
    fn unit_weight_picks_one_control() {
        let sys = scalar("u - x", vec![vec![-1.0], vec![1.0]]);
        let fb = ChatteringFeedback {
            components: vec![1, 0],
            weights: weights(&["1", "0"]),
        };
        let f0 = relax(&sys, &fb).unwrap();
        assert_eq!(f0.at(0.0, &[0.5]), vec![0.5]);
    }

    #[test]
    fn weights_off_the_simplex_are_rejected() {
        let sys = scalar("u", vec![vec![-1.0], vec![1.0]]);
        let fb = ChatteringFeedback {
            components: vec![0, 1],
            weights: weights(&["0.5", "0.6"]),
        };
        assert!(matches!(relax(&sys, &fb), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn ties_go_to_the_smaller_control() {
        let sys = scalar("u*u", vec![vec![1.0], vec![-1.0], vec![0.0]]);
        assert_eq!(sys.invert(0.0, &[0.0], &[1.0]).unwrap(), 1);
        assert!(matches!(sys.invert(0.0, &[0.0], &[0.5]), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn zigzag_feedback_is_bang_bang_and_tracks() {
        let sys = scalar("u", vec![vec![-1.0], vec![1.0]]);
        let fb = ChatteringFeedback {
            components: vec![0, 1],
            weights: weights(&["0.5", "0.5"]),
        };
        let opts = BuildOptions {
            levels: 2,
            paths: 4,
            h_paths: 2,
            ..BuildOptions::default()
        };
        let bb = synthesize(&sys, &fb, 0.05, &opts).unwrap();
        let io = IntegrateOptions::with_step(1e-2);
        let run = closed_loop(&bb, 0.0, &[0.2], &io).unwrap();
        assert!(run.controls.iter().all(|u| u[0] == 1.0 || u[0] == -1.0));
        let worst = run
            .trajectory
            .states
            .iter()
            .map(|x| (x[0] - 0.2).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05 + 1e-6, "{worst}");
        let direct = integrate(&bb.state.extremal(), 0.0, &[0.2], 1.0, &io).unwrap();
        assert!(sup_distance(&direct, &run.trajectory) <= 1e-9);
        let mut csv = Vec::new();
        run.write_controls_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("t,u1\n"));
    }
}
