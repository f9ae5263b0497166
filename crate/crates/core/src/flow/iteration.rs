//! The level iteration `f_0 → f_1 → ... → f_K`.
//!
//! Level 1 refines the base selection on all of `Ω† = [0, T] × B̄(D, MT)`.
//! Level `k + 1` refines each piece `ψ` of level `k` separately on the closure
//! of the region where it is active, with the tolerance `ε_{k+1}` dictated by
//! the measured crossing numbers. Pieces whose values already sit on `ext F`
//! are kept as they are.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::extremal::{refine, CoverRegion, Piece, PiecewiseSelection};
use crate::flow::picard::{h_integral, picard_distance, PicardDistance, H_SAMPLES};
use crate::linalg::norm;
use crate::multimap::{LipschitzPath, StateBox, VertexMultiMap};
use crate::quadrature::region_runs;
use crate::selection::{RegionKey, Selection};
use crate::variance::h_value;
use crate::{Error, Result};

/// `h` below which a piece counts as extremal and is not refined further.
pub const EXTREMAL_TOL: f64 = 1e-7;
/// Segments of each sampled path in `Y`.
pub const PATH_SEGMENTS: usize = 64;
const LOCAL_BITS: u32 = 32;

/// A single vertex-map combination used as a base selection.
pub struct PieceField {
    pub map: Arc<VertexMultiMap>,
    pub piece: Piece,
}

impl Selection for PieceField {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.piece.eval(&self.map, t, x))
    }
    fn piece_lipschitz(&self) -> f64 {
        self.piece.lipschitz(&self.map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Child {
    /// The piece is kept at every deeper level.
    Identity,
    Node(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementNode {
    pub level: usize,
    pub parent: Option<(usize, RegionKey)>,
    pub selection: PiecewiseSelection,
    /// Indexed by the local region key; `None` until the next level is built.
    pub children: Vec<Option<Child>>,
    #[serde(skip)]
    lipschitz: f64,
}

/// The tree of refinement steps; [`ExtremalField::level`] views `f_k`.
pub struct ExtremalField {
    map: Arc<VertexMultiMap>,
    base: Arc<dyn Selection>,
    nodes: Vec<RefinementNode>,
}

impl ExtremalField {
    pub fn map(&self) -> &Arc<VertexMultiMap> {
        &self.map
    }

    pub fn base(&self) -> &Arc<dyn Selection> {
        &self.base
    }

    pub fn nodes(&self) -> &[RefinementNode] {
        &self.nodes
    }

    pub fn level(&self, depth: usize) -> LevelView<'_> {
        let lipschitz = if depth == 0 {
            self.base.piece_lipschitz()
        } else {
            self.nodes
                .iter()
                .filter(|n| n.level <= depth)
                .map(|n| n.lipschitz)
                .fold(0.0, f64::max)
        };
        LevelView {
            field: self,
            depth,
            lipschitz,
        }
    }

    fn push(&mut self, level: usize, parent: Option<(usize, RegionKey)>, sel: PiecewiseSelection) -> usize {
        let slots = sel.len() * (self.map.dim() + 1);
        let lipschitz = sel.lipschitz();
        self.nodes.push(RefinementNode {
            level,
            parent,
            selection: sel,
            children: vec![None; slots],
            lipschitz,
        });
        self.nodes.len() - 1
    }
}

/// `f_k` as a [`Selection`]. Region keys carry the node id in the high bits.
pub struct LevelView<'a> {
    field: &'a ExtremalField,
    depth: usize,
    lipschitz: f64,
}

impl LevelView<'_> {
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Deepest node reached at `(t, x)`, its local key and the earliest
    /// break along the way.
    fn descend(&self, t: f64, x: &[f64]) -> Result<(usize, RegionKey, f64)> {
        let mut id = 0;
        let mut remaining = self.depth;
        let mut brk = f64::INFINITY;
        loop {
            let sel = &self.field.nodes[id].selection;
            let (cell, slot) = sel.locate(t, x)?;
            brk = brk.min(sel.next_break_in(cell, t));
            let local = sel.key(cell, slot);
            remaining -= 1;
            if remaining == 0 {
                return Ok((id, local, brk));
            }
            match self.field.nodes[id].children[local as usize] {
                Some(Child::Node(c)) => id = c,
                _ => return Ok((id, local, brk)),
            }
        }
    }
}

impl Selection for LevelView<'_> {
    fn dim(&self) -> usize {
        self.field.map.dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if self.depth == 0 {
            return self.field.base.eval(t, x);
        }
        let (id, local, _) = self.descend(t, x)?;
        self.field.nodes[id].selection.eval_piece(local, t, x)
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        if self.depth == 0 {
            return self.field.base.region(t, x);
        }
        let (id, local, _) = self.descend(t, x)?;
        Ok(((id as u64) << LOCAL_BITS) | local)
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if self.depth == 0 {
            return self.field.base.eval_piece(key, t, x);
        }
        let id = (key >> LOCAL_BITS) as usize;
        let local = key & ((1u64 << LOCAL_BITS) - 1);
        self.field.nodes[id].selection.eval_piece(local, t, x)
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        if self.depth == 0 {
            return self.field.base.next_break(t, x);
        }
        self.descend(t, x).map_or(f64::INFINITY, |d| d.2)
    }
    fn piece_lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// `K`, the number of levels.
    pub levels: usize,
    /// Sampled paths in `Y` used for crossing numbers and Picard distances.
    pub paths: usize,
    /// Paths used for the extremality integral.
    pub h_paths: usize,
    pub seed: u64,
    /// Stop once the extremality integral drops below this value.
    pub h_target: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            levels: 8,
            paths: 50,
            h_paths: 20,
            seed: 0,
            h_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    /// `ε_k`.
    pub eps: f64,
    /// `δ_k = δ_0 2^{−k}`.
    pub delta: f64,
    /// Refinement steps performed at this level.
    pub new_nodes: usize,
    pub cells: usize,
    pub max_strips: u64,
    /// `N_k`: twice the largest measured number of region runs along a path.
    pub crossings: usize,
    /// `max |a^i_j|` over the majorants of this level.
    pub max_slope: f64,
    /// Distance between the Picard operators of `f_k` and `f_{k−1}`.
    pub picard: PicardDistance,
    /// Largest `∫_0^T h(f_k(s, u(s)), F) ds` over the sampled paths.
    pub h_integral: f64,
    pub h_integral_mean: f64,
    /// `2^{2−k} T + 2^{1−k}`.
    pub h_bound: f64,
    pub extremality_violations: usize,
    pub soundness_violations: usize,
    pub eta_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationStatus {
    Complete,
    TargetReached { level: usize },
    ScheduleInfeasible { level: usize, reason: String },
}

#[derive(Serialize)]
pub struct IterationState {
    #[serde(skip)]
    pub field: ExtremalField,
    pub horizon: f64,
    pub eps0: f64,
    pub delta0: f64,
    pub base_lipschitz: f64,
    pub levels: Vec<LevelRecord>,
    pub status: IterationStatus,
    pub seed: u64,
}

impl IterationState {
    /// Number of levels actually built.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `f_k`; `k = 0` is the base selection.
    pub fn selection(&self, k: usize) -> LevelView<'_> {
        self.field.level(k.min(self.depth()))
    }

    /// The last iterate `f_K`.
    pub fn extremal(&self) -> LevelView<'_> {
        self.selection(self.depth())
    }

    pub fn certificates_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }

    /// Sum of the measured Picard distances between consecutive levels `≥ 1`.
    pub fn telescoped_distance(&self) -> f64 {
        self.levels.iter().skip(1).map(|l| l.picard.sup).sum()
    }
}

/// Seeded sample paths of `Y`.
pub fn sample_paths(map: &VertexMultiMap, seed: u64, count: usize) -> Vec<LipschitzPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| map.random_path(rng.gen(), PATH_SEGMENTS))
        .collect()
}

/// Largest `h(f(t, x), F(t, x))` over a grid of `Ω†`; `Err` when `f` leaves `F`
/// or exceeds the bound `M`.
fn base_eta(map: &VertexMultiMap, f0: &dyn Selection) -> Result<f64> {
    let region = map.reachable_box();
    let per_axis = if map.dim() == 1 { 21 } else { 7 };
    let mut worst = 0.0f64;
    for k in 0..per_axis {
        let t = map.horizon() * k as f64 / (per_axis - 1) as f64;
        for x in region.grid(per_axis) {
            let y = f0.eval(t, &x)?;
            if norm(&y) > map.bound() + 1e-9 {
                return Err(Error::Hypothesis(format!(
                    "base selection exceeds M at ({t}, {x:?})"
                )));
            }
            let poly = map.value(t, &x)?;
            match h_value(&y, &poly)?.value() {
                Some(h) => worst = worst.max(h),
                None => {
                    return Err(Error::Hypothesis(format!(
                        "base selection leaves co F at ({t}, {x:?})"
                    )))
                }
            }
        }
    }
    Ok(worst)
}

fn schedule_error(level: usize, e: Error) -> Error {
    match e {
        Error::TooManyStrips { .. } | Error::CoverTooFine { .. } => Error::ScheduleInfeasible {
            level,
            reason: e.to_string(),
        },
        other => other,
    }
}

/// Closure of the part of `S` covered by cell `i`: its time slab and the
/// cone's widest cross-section, clipped to `S`.
fn cell_region(sel: &PiecewiseSelection, cell: usize) -> CoverRegion {
    let c = &sel.cells[cell].cell;
    let s = &sel.cover.region;
    let r = c.slope * c.extent;
    let lo: Vec<f64> = c.apex_x.iter().zip(&s.states.min).map(|(x, m)| (x - r).max(*m)).collect();
    let hi: Vec<f64> = c.apex_x.iter().zip(&s.states.max).map(|(x, m)| (x + r).min(*m)).collect();
    CoverRegion {
        t0: c.anchor_t,
        t1: (c.apex_t + c.extent).min(s.t1),
        states: StateBox { min: lo, max: hi },
    }
}

struct Measure {
    picard: PicardDistance,
    crossings: usize,
    h_max: f64,
    h_mean: f64,
}

fn measure(
    field: &ExtremalField,
    level: usize,
    paths: &[LipschitzPath],
    h_paths: usize,
    fresh: bool,
    previous: Option<&LevelRecord>,
) -> Result<Measure> {
    let horizon = field.map.horizon();
    if let (false, Some(prev)) = (fresh, previous) {
        return Ok(Measure {
            picard: PicardDistance::default(),
            crossings: prev.crossings,
            h_max: prev.h_integral,
            h_mean: prev.h_integral_mean,
        });
    }
    let cur = field.level(level);
    let prev = field.level(level - 1);
    let picard = picard_distance(&cur, &prev, paths, horizon)?;
    let mut runs = 0usize;
    for u in paths {
        runs = runs.max(region_runs(&cur, u, 0.0, horizon, horizon / 64.0)?);
    }
    let mut h_max = 0.0f64;
    let mut h_sum = 0.0;
    let hp = &paths[..h_paths.min(paths.len())];
    for u in hp {
        let h = h_integral(&cur, &field.map, u, 0.0, horizon, H_SAMPLES)?;
        h_max = h_max.max(h);
        h_sum += h;
    }
    Ok(Measure {
        picard,
        crossings: 2 * runs,
        h_max,
        h_mean: if hp.is_empty() { 0.0 } else { h_sum / hp.len() as f64 },
    })
}

/// Builds `f_1, ..., f_K` from the base selection `f0`.
pub fn build_extremal(
    map: Arc<VertexMultiMap>,
    f0: Arc<dyn Selection>,
    eps0: f64,
    opts: &BuildOptions,
) -> Result<IterationState> {
    if !(eps0 > 0.0) || opts.levels == 0 {
        return Err(Error::Invalid("need eps0 > 0 and at least one level".into()));
    }
    let horizon = map.horizon();
    let eta0 = base_eta(&map, f0.as_ref())?;
    let base_lipschitz = f0.piece_lipschitz();
    let delta0 = eps0 * (-base_lipschitz * horizon).exp();
    let paths = sample_paths(&map, opts.seed, opts.paths.max(opts.h_paths).max(1));
    let omega = CoverRegion {
        t0: 0.0,
        t1: horizon,
        states: map.reachable_box(),
    };
    let mut field = ExtremalField {
        map: Arc::clone(&map),
        base: Arc::clone(&f0),
        nodes: vec![],
    };
    let eps1 = delta0 / 2.0;
    let root = refine(&omega, &map, f0.as_ref(), eta0 + 1e-9, eps1).map_err(|e| schedule_error(1, e))?;
    field.push(1, None, root);
    let mut state = IterationState {
        field,
        horizon,
        eps0,
        delta0,
        base_lipschitz,
        levels: vec![],
        status: IterationStatus::Complete,
        seed: opts.seed,
    };
    let mut level_nodes = vec![0usize];
    let mut eps = eps1;
    for level in 1..=opts.levels {
        if level > 1 {
            let prev = state.levels.last().expect("previous level");
            let delta_prev = delta0 * 0.5f64.powi(prev.level as i32);
            let n_prev = prev.crossings.max(1) as f64;
            let pow = 0.5f64.powi(prev.level as i32);
            let mut next = (delta_prev / (2.0 * n_prev)).min(pow / n_prev);
            if prev.max_slope > 0.0 {
                next = next.min(pow / (n_prev * prev.max_slope));
            }
            if !(next.is_finite() && next > f64::MIN_POSITIVE) {
                state.status = IterationStatus::ScheduleInfeasible {
                    level,
                    reason: format!("eps underflows ({next:e})"),
                };
                break;
            }
            eps = next;
            match grow(&mut state.field, &level_nodes, level, eps) {
                Ok(ids) => level_nodes = ids,
                Err(e) => {
                    let e = schedule_error(level, e);
                    if let Error::ScheduleInfeasible { level, reason } = e {
                        state.status = IterationStatus::ScheduleInfeasible { level, reason };
                        break;
                    }
                    return Err(e);
                }
            }
        }
        let fresh = level == 1 || !level_nodes.is_empty();
        let m = measure(&state.field, level, &paths, opts.h_paths, fresh, state.levels.last())?;
        let nodes: Vec<&RefinementNode> = level_nodes.iter().map(|&i| &state.field.nodes[i]).collect();
        let record = LevelRecord {
            level,
            eps,
            delta: delta0 * 0.5f64.powi(level as i32),
            new_nodes: nodes.len(),
            cells: nodes.iter().map(|n| n.selection.len()).sum(),
            max_strips: nodes.iter().map(|n| n.selection.strips).max().unwrap_or(0),
            crossings: m.crossings,
            max_slope: nodes.iter().map(|n| n.selection.max_slope()).fold(0.0, f64::max),
            picard: m.picard,
            h_integral: m.h_max,
            h_integral_mean: m.h_mean,
            h_bound: 4.0 * 0.5f64.powi(level as i32) * horizon + 2.0 * 0.5f64.powi(level as i32),
            extremality_violations: nodes
                .iter()
                .map(|n| n.selection.certificate.extremality_violations)
                .sum(),
            soundness_violations: nodes
                .iter()
                .map(|n| n.selection.certificate.soundness_violations)
                .sum(),
            eta_observed: nodes
                .iter()
                .map(|n| n.selection.certificate.eta_observed)
                .fold(0.0, f64::max),
        };
        let reached = opts.h_target.is_some_and(|target| record.h_integral < target);
        state.levels.push(record);
        if reached && level < opts.levels {
            state.status = IterationStatus::TargetReached { level };
            break;
        }
    }
    Ok(state)
}

/// Refines every non-extremal piece of the nodes in `parents`; returns the new node ids.
fn grow(field: &mut ExtremalField, parents: &[usize], level: usize, eps: f64) -> Result<Vec<usize>> {
    let mut created = vec![];
    let slots = field.map.dim() + 1;
    for &pid in parents {
        let cells = field.nodes[pid].selection.len();
        for cell in 0..cells {
            for slot in 0..slots {
                let sel = &field.nodes[pid].selection;
                let key = sel.key(cell, slot);
                if sel.cells[cell].theta[slot] == 0.0 {
                    field.nodes[pid].children[key as usize] = Some(Child::Identity);
                    continue;
                }
                let piece = PieceField {
                    map: Arc::clone(&field.map),
                    piece: sel.piece(cell, slot).clone(),
                };
                let mut worst = 0.0f64;
                for (t, x) in sel.cover.sample_points(cell) {
                    let y = piece.eval(t, &x)?;
                    let poly = field.map.value(t, &x)?;
                    worst = worst.max(h_value(&y, &poly)?.value().unwrap_or(f64::INFINITY));
                }
                if worst <= EXTREMAL_TOL {
                    field.nodes[pid].children[key as usize] = Some(Child::Identity);
                    continue;
                }
                let region = cell_region(sel, cell);
                let child = refine(&region, &field.map, &piece, worst + 1e-9, eps)?;
                let id = field.push(level, Some((pid, key)), child);
                field.nodes[pid].children[key as usize] = Some(Child::Node(id));
                created.push(id);
            }
        }
    }
    Ok(created)
}
