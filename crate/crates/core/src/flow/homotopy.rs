//! The null homotopy `Φ(v, λ)`: follow `v` on `[0, λT]`, then the flow of
//! `f` from `(λT, v(λT))`.

use crate::flow::integrate::{integrate, IntegrateOptions, Trajectory};
use crate::multimap::VertexMultiMap;
use crate::selection::Selection;
use crate::{Error, Result};

/// Tolerance on the membership `v'(t) ∈ F(t, v(t))` at the nodes of `v`.
pub const INCLUSION_TOL: f64 = 1e-6;

/// Checks that the node derivatives of `v` lie in `F`.
pub fn check_inclusion(v: &Trajectory, map: &VertexMultiMap) -> Result<()> {
    for (k, (t, x)) in v.times.iter().zip(&v.states).enumerate() {
        let poly = map.value(*t, x)?;
        for d in [&v.derivs[k], &v.left_derivs[k]] {
            if !poly.contains(d, INCLUSION_TOL)? {
                return Err(Error::Hypothesis(format!(
                    "v is not a trajectory of the inclusion near t = {t}"
                )));
            }
        }
    }
    Ok(())
}

pub fn homotopy(
    v: &Trajectory,
    lambda: f64,
    f: &dyn Selection,
    map: &VertexMultiMap,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if v.t0 != 0.0 {
        return Err(Error::Invalid("v must start at t = 0".into()));
    }
    check_inclusion(v, map)?;
    if lambda == 1.0 {
        return Ok(v.clone());
    }
    let s = lambda * map.horizon();
    let junction = v.at(s);
    let tail = integrate(f, s, &junction, map.horizon(), opts)?;
    let keep = v.times.partition_point(|&t| t < s);
    if keep == 0 {
        return Ok(tail);
    }
    let mut out = Trajectory {
        t0: v.t0,
        x0: v.x0.clone(),
        times: v.times[..keep].to_vec(),
        states: v.states[..keep].to_vec(),
        derivs: v.derivs[..keep].to_vec(),
        left_derivs: v.left_derivs[..keep].to_vec(),
    };
    // left derivative of v at the junction, from the Hermite segment
    let h = (s - v.times[keep - 1]).max(f64::MIN_POSITIVE);
    let probe = v.at(s - 1e-3 * h);
    let left: Vec<f64> = junction
        .iter()
        .zip(&probe)
        .map(|(a, b)| (a - b) / (1e-3 * h))
        .collect();
    out.times.extend_from_slice(&tail.times);
    out.states.extend_from_slice(&tail.states);
    out.derivs.extend_from_slice(&tail.derivs);
    out.left_derivs.push(left);
    out.left_derivs.extend_from_slice(&tail.left_derivs[1..]);
    Ok(out)
}
