//! Runge-Kutta integration of `x' = f(t, x)` for piecewise-Lipschitz `f`.
//!
//! Each step freezes the piece active at its start, so the right-hand side is
//! Lipschitz within the step. Steps end at every time break reported by the
//! selection; a change of region inside a step is located by bisection and
//! the step is cut there.

use std::io::Write;

use serde::Serialize;

use crate::linalg::{axpy, dist, norm};
use crate::multimap::SeedSet;
use crate::quadrature::{Curve, CROSSING_TOL};
use crate::selection::{RegionKey, Selection};
use crate::{Error, Result};

/// Offset after a node at which the active region is probed.
const PROBE: f64 = 1e-9;
/// Steps after which the integration is considered stalled.
const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub max_step: f64,
    /// `(D, r)`: fail if the state leaves `B̄(D, r)`.
    pub containment: Option<(SeedSet, f64)>,
}

impl IntegrateOptions {
    pub fn with_step(max_step: f64) -> Self {
        Self {
            max_step,
            containment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Right derivative `f(t_k+, x_k)` at every node.
    pub derivs: Vec<Vec<f64>>,
    /// Left derivative at every node (equal to `derivs[0]` at the first).
    #[serde(skip)]
    pub left_derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    /// Cubic Hermite interpolation between nodes; constant outside.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[last] {
            return self.states[last].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let mut x = vec![0.0; self.dim()];
        axpy(&mut x, h00, &self.states[k]);
        axpy(&mut x, h10 * h, &self.derivs[k]);
        axpy(&mut x, h01, &self.states[k + 1]);
        axpy(&mut x, h11 * h, &self.left_derivs[k + 1]);
        x
    }

    /// Largest speed over the node derivatives.
    pub fn speed(&self) -> f64 {
        self.derivs
            .iter()
            .chain(&self.left_derivs)
            .map(|d| norm(d))
            .fold(0.0, f64::max)
    }

    /// Checks that the grid increases and `|Δx| ≤ M·Δt + 1e-9`.
    pub fn check(&self, bound: f64) -> Result<()> {
        for k in 1..self.times.len() {
            let dt = self.times[k] - self.times[k - 1];
            if !(dt > 0.0) {
                return Err(Error::Invalid(format!("time grid not increasing at node {k}")));
            }
            if dist(&self.states[k], &self.states[k - 1]) > bound * dt + 1e-9 {
                return Err(Error::Hypothesis(format!(
                    "trajectory moves faster than M near t = {}",
                    self.times[k]
                )));
            }
        }
        Ok(())
    }

    /// Writes `t, x1..xn, xdot1..xdotn` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("xdot{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt17(*v)));
            row.extend(self.derivs[k].iter().map(|v| fmt17(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// A float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Curve for Trajectory {
    fn at(&self, t: f64) -> Vec<f64> {
        Trajectory::at(self, t)
    }
    fn nodes(&self) -> &[f64] {
        &self.times
    }
    fn lipschitz(&self) -> f64 {
        self.speed()
    }
}

fn rk4(f: &dyn Selection, key: RegionKey, t: f64, x: &[f64], h: f64, k1: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    axpy(&mut y, 0.5 * h, k1);
    let k2 = f.eval_piece(key, t + 0.5 * h, &y)?;
    y.copy_from_slice(x);
    axpy(&mut y, 0.5 * h, &k2);
    let k3 = f.eval_piece(key, t + 0.5 * h, &y)?;
    y.copy_from_slice(x);
    axpy(&mut y, h, &k3);
    let k4 = f.eval_piece(key, t + h, &y)?;
    let mut out = x.to_vec();
    for i in 0..out.len() {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn probe_key(f: &dyn Selection, t: f64, t1: f64, x: &[f64]) -> Result<RegionKey> {
    let tp = t + (0.5 * (t1 - t)).min(PROBE * (1.0 + t.abs()));
    f.region(tp, x)
}

/// Solves `x' = f(t, x)`, `x(t0) = x0` on `[t0, t_end]`.
pub fn integrate(
    f: &dyn Selection,
    t0: f64,
    x0: &[f64],
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    if !(opts.max_step > 0.0) || !(t_end >= t0) {
        return Err(Error::Invalid("integration needs max_step > 0 and t_end >= t0".into()));
    }
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut traj = Trajectory {
        t0,
        x0: x0.to_vec(),
        times: vec![t0],
        states: vec![x.clone()],
        derivs: vec![],
        left_derivs: vec![],
    };
    while t < t_end {
        if traj.times.len() > MAX_STEPS {
            return Err(Error::Hypothesis(format!("integration stalled at t = {t}")));
        }
        let mut t1 = (t + opts.max_step).min(t_end);
        let nb = f.next_break(t, &x);
        if nb > t && nb < t1 {
            t1 = nb;
        }
        let key = probe_key(f, t, t1, &x)?;
        let k1 = f.eval_piece(key, t, &x)?;
        let mut x1 = rk4(f, key, t, &x, t1 - t, &k1)?;
        let te = t1 - (0.5 * (t1 - t)).min(PROBE * (1.0 + t1.abs()));
        if f.region(te, &x1)? != key {
            let tp = t + (0.5 * (t1 - t)).min(PROBE * (1.0 + t.abs()));
            let (mut lo, mut hi) = (tp, te);
            while hi - lo > CROSSING_TOL * (1.0 + hi.abs()) {
                let mid = 0.5 * (lo + hi);
                let xm = rk4(f, key, t, &x, mid - t, &k1)?;
                if f.region(mid, &xm)? == key {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            t1 = hi;
            x1 = rk4(f, key, t, &x, t1 - t, &k1)?;
        }
        if let Some((seed, r)) = &opts.containment {
            if seed.distance(&x1) > r + 1e-9 {
                return Err(Error::Hypothesis(format!(
                    "trajectory left the reachable set at t = {t1}"
                )));
            }
        }
        traj.derivs.push(k1);
        traj.left_derivs.push(f.eval_piece(key, t1, &x1)?);
        t = t1;
        x = x1;
        traj.times.push(t);
        traj.states.push(x.clone());
    }
    // left_derivs[k] so far belongs to node k+1
    let last_left = traj.left_derivs.last().cloned();
    let final_right = if t_end > t0 {
        last_left.clone().expect("at least one step")
    } else {
        f.eval(t0, x0)?
    };
    traj.derivs.push(final_right.clone());
    let first = traj.derivs[0].clone();
    traj.left_derivs.insert(0, first);
    Ok(traj)
}

/// `sup_t |a(t) − b(t)|` over the union of both time grids.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut times: Vec<f64> = a.times.iter().chain(&b.times).cloned().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .iter()
        .map(|&t| dist(&a.at(t), &b.at(t)))
        .fold(0.0, f64::max)
}
