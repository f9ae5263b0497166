//! Empirical stability of the flow under perturbations of the field and of
//! the initial data.

use serde::Serialize;

use crate::flow::integrate::{integrate, sup_distance, IntegrateOptions};
use crate::flow::picard::picard_distance;
use crate::multimap::{LipschitzPath, SeedSet, VertexMultiMap};
use crate::selection::Selection;
use crate::Result;

/// Slack allowed on top of `eps0` for integration error in closeness checks.
pub const INTEGRATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEntry {
    /// Measured Picard distance `d` between `f` and the perturbation.
    pub picard: f64,
    /// Largest trajectory sup-distance over the start grid.
    pub trajectory: f64,
}

/// `(t0, x0)` pairs: `nt` start times in `[0, T)` times `nx` seed points.
pub fn start_grid(map: &VertexMultiMap, nt: usize, nx: usize) -> Vec<(f64, Vec<f64>)> {
    let xs = seed_points(map.seed_set(), nx);
    let mut out = Vec::with_capacity(nt * xs.len());
    for k in 0..nt {
        let t0 = map.horizon() * k as f64 / nt as f64;
        for x in &xs {
            out.push((t0, x.clone()));
        }
    }
    out
}

/// `count` points of `D`: the main diagonal of a box, or the listed points.
pub fn seed_points(d: &SeedSet, count: usize) -> Vec<Vec<f64>> {
    match d {
        SeedSet::Box(b) => (0..count)
            .map(|j| {
                let s = if count == 1 { 0.5 } else { j as f64 / (count - 1) as f64 };
                b.min.iter().zip(&b.max).map(|(lo, hi)| lo + s * (hi - lo)).collect()
            })
            .collect(),
        SeedSet::Points { points } => points.iter().take(count.max(1)).cloned().collect(),
    }
}

/// For every perturbation `g`: the Picard distance to `f` and the largest
/// trajectory deviation over `starts`.
pub fn stability_probe(
    f: &dyn Selection,
    perturbations: &[&dyn Selection],
    starts: &[(f64, Vec<f64>)],
    paths: &[LipschitzPath],
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<Vec<StabilityEntry>> {
    let base: Vec<_> = starts
        .iter()
        .map(|(t0, x0)| integrate(f, *t0, x0, horizon, opts))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(perturbations.len());
    for g in perturbations {
        let d = picard_distance(f, *g, paths, horizon)?;
        let mut worst = 0.0f64;
        for ((t0, x0), a) in starts.iter().zip(&base) {
            let b = integrate(*g, *t0, x0, horizon, opts)?;
            worst = worst.max(sup_distance(a, &b));
        }
        out.push(StabilityEntry {
            picard: d.sup,
            trajectory: worst,
        });
    }
    Ok(out)
}

/// Sup-distance between the solutions from `x0` and `x0 + δ e_1`, per `δ`.
pub fn continuity_probe(
    f: &dyn Selection,
    t0: f64,
    x0: &[f64],
    deltas: &[f64],
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<Vec<f64>> {
    let a = integrate(f, t0, x0, horizon, opts)?;
    deltas
        .iter()
        .map(|d| {
            let mut y0 = x0.to_vec();
            y0[0] += d;
            Ok(sup_distance(&a, &integrate(f, t0, &y0, horizon, opts)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessReport {
    pub max_distance: f64,
    pub per_start: Vec<f64>,
}

/// `sup_t |y(t) − x(t)|` between the solutions of `f` and `f0` from each start.
pub fn closeness(
    f: &dyn Selection,
    f0: &dyn Selection,
    starts: &[(f64, Vec<f64>)],
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<ClosenessReport> {
    let mut per_start = Vec::with_capacity(starts.len());
    for (t0, x0) in starts {
        let x = integrate(f, *t0, x0, horizon, opts)?;
        let y = integrate(f0, *t0, x0, horizon, opts)?;
        per_start.push(sup_distance(&x, &y));
    }
    Ok(ClosenessReport {
        max_distance: per_start.iter().cloned().fold(0.0, f64::max),
        per_start,
    })
}
