//! Cone covers and the strip-splitting constructor.
//!
//! Given a Lipschitz selection `φ` of `co F` on a compact cell `S`, [`refine`]
//! covers `S` by forward cones of slope `M + 1`, decomposes `φ` at the anchor
//! of every cone into vertices of `F`, and lets the resulting selection `g`
//! cycle through those vertex maps on time strips whose lengths are
//! proportional to the barycentric weights. Averaged over a strip, `g` then
//! reproduces `φ`, which keeps the two Picard operators close while the values
//! of `g` stay on `ext F`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dist, norm, norm_sq};
use crate::multimap::{StateBox, VertexMultiMap};
use crate::quadrature::{difference_integral, for_each_segment, Curve, DifferenceIntegral};
use crate::selection::{RegionKey, Selection};
use crate::variance::{affine_majorant, h_value, AffineMajorant};
use crate::{Error, Result};

/// Largest number of cone cells a single cover may have.
pub const CELL_LIMIT: usize = 200_000;
/// Largest strip count `N` accepted by [`refine`].
/// Times the cover is shrunk so that majorant slack fits in `eps/2`.
const MAX_COVER_SHRINKS: usize = 8;
pub const STRIP_LIMIT: u64 = 50_000_000;
/// Cells sampled for certificates and oscillation checks, at most.
const CERT_CELL_SAMPLES: usize = 400;

/// The compact set `S = [t0, t1] × states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRegion {
    pub t0: f64,
    pub t1: f64,
    pub states: StateBox,
}

impl CoverRegion {
    pub fn contains(&self, t: f64, x: &[f64], tol: f64) -> bool {
        t >= self.t0 - tol && t <= self.t1 + tol && self.states.contains(x, tol)
    }
}

/// `Γ = {(s, y) : t̂ ≤ s ≤ t̂ + extent, |y − x̂| ≤ slope·(s − t̂)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeCell {
    pub index: usize,
    pub apex_t: f64,
    pub apex_x: Vec<f64>,
    pub extent: f64,
    pub slope: f64,
    /// Point of `S` where the base selection is decomposed.
    pub anchor_t: f64,
    pub anchor_x: Vec<f64>,
}

impl ConeCell {
    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        let tol = 1e-12 * (1.0 + t.abs());
        let s = t - self.apex_t;
        s >= -tol
            && s <= self.extent + tol
            && dist(x, &self.apex_x) <= self.slope * s.max(0.0) + 1e-12 * (1.0 + norm(x))
    }
}

/// Cones indexed by time slab, then lexicographically by spatial node.
///
/// Slab `k` cones start at `t̂_k = t0 + kδ − r0/slope` so that at the slab
/// start they already have radius `r0`, the half-diagonal of a grid cell,
/// and end at `t0 + (k+1)δ`. Every point of `S` is in some cone of its slab,
/// and `Δ^i = Γ_i \ ∪_{ℓ<i} Γ_ℓ` is found by testing cones in index order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeCover {
    pub region: CoverRegion,
    pub slope: f64,
    pub delta: f64,
    pub slabs: usize,
    pub counts: Vec<usize>,
    pub spacing: Vec<f64>,
    pub r0: f64,
    pub modulus: f64,
}

impl ConeCover {
    pub fn len(&self) -> usize {
        self.slabs * self.nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nodes(&self) -> usize {
        self.counts.iter().product()
    }

    fn node_coords(&self, mut lin: usize) -> Vec<f64> {
        let n = self.counts.len();
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = lin % self.counts[a];
            lin /= self.counts[a];
        }
        idx.iter()
            .enumerate()
            .map(|(a, &j)| self.region.states.min[a] + (j as f64 + 0.5) * self.spacing[a])
            .collect()
    }

    fn apex_time(&self, slab: usize) -> f64 {
        self.region.t0 + slab as f64 * self.delta - self.back()
    }

    fn back(&self) -> f64 {
        self.r0 / self.slope
    }

    pub fn cell(&self, i: usize) -> ConeCell {
        let slab = i / self.nodes();
        let x = self.node_coords(i % self.nodes());
        ConeCell {
            index: i,
            apex_t: self.apex_time(slab),
            apex_x: x.clone(),
            extent: self.delta + self.back(),
            slope: self.slope,
            anchor_t: self.region.t0 + slab as f64 * self.delta,
            anchor_x: x,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = ConeCell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    /// Index of the cell `Δ^i` containing `(t, x)`; points within `1e-9` of
    /// `S` are projected onto it first.
    pub fn locate(&self, t: f64, x: &[f64]) -> Option<usize> {
        if !self.region.contains(t, x, 1e-9) {
            return None;
        }
        let t = t.clamp(self.region.t0, self.region.t1);
        let x = self.region.states.project(x);
        let rel = t - self.region.t0;
        let (k_lo, k_hi) = if self.delta > 0.0 {
            let lo = ((rel / self.delta).floor() as usize).saturating_sub(1);
            let hi = ((rel + self.back()) / self.delta).floor() as usize;
            (lo, hi.min(self.slabs - 1))
        } else {
            (0, 0)
        };
        let nodes = self.nodes();
        for k in k_lo..=k_hi {
            let s = t - self.apex_time(k);
            let tol = 1e-12 * (1.0 + t.abs());
            if s < -tol || s > self.delta + self.back() + tol {
                continue;
            }
            let rho = self.slope * s.max(0.0);
            let rho_tol = rho + 1e-12 * (1.0 + norm(&x));
            if let Some(lin) = self.first_node_within(&x, rho_tol) {
                return Some(k * nodes + lin);
            }
        }
        None
    }

    fn first_node_within(&self, x: &[f64], rho: f64) -> Option<usize> {
        let n = self.counts.len();
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for a in 0..n {
            let s = self.spacing[a];
            if s == 0.0 || self.counts[a] == 1 {
                continue;
            }
            let c = (x[a] - self.region.states.min[a]) / s - 0.5;
            let l = (c - rho / s).ceil().max(0.0);
            let h = (c + rho / s).floor().min((self.counts[a] - 1) as f64);
            if h < l {
                return None;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        let mut idx = lo.clone();
        let rho2 = rho * rho;
        loop {
            let mut d2 = 0.0;
            for a in 0..n {
                let c = self.region.states.min[a] + (idx[a] as f64 + 0.5) * self.spacing[a];
                d2 += (x[a] - c) * (x[a] - c);
            }
            if d2 <= rho2 {
                let mut lin = 0;
                for (c, i) in self.counts.iter().zip(&idx) {
                    lin = lin * c + i;
                }
                return Some(lin);
            }
            let mut a = n;
            loop {
                if a == 0 {
                    return None;
                }
                a -= 1;
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }

    /// Cones `Γ_ℓ`, `ℓ < i`, that meet `Γ_i` and so carve `Δ^i` out of it.
    pub fn predecessors(&self, i: usize) -> Vec<usize> {
        let me = self.cell(i);
        (0..i)
            .filter(|&l| {
                let other = self.cell(l);
                let start = me.apex_t.max(other.apex_t);
                let end = (me.apex_t + me.extent).min(other.apex_t + other.extent);
                end >= start
                    && dist(&me.apex_x, &other.apex_x)
                        <= self.slope * ((end - me.apex_t) + (end - other.apex_t))
            })
            .collect()
    }

    /// A few deterministic points of `Δ^i ∩ S`: the anchor and the extreme
    /// spatial offsets at the end of the slab.
    pub(crate) fn sample_points(&self, i: usize) -> Vec<(f64, Vec<f64>)> {
        let c = self.cell(i);
        let t_end = (c.apex_t + c.extent).min(self.region.t1);
        let t_mid = 0.5 * (c.anchor_t + t_end);
        let mut pts = vec![(c.anchor_t, c.anchor_x.clone()), (t_end, c.anchor_x.clone())];
        let r = 0.5 * self.spacing.iter().cloned().fold(0.0, f64::max);
        for a in 0..c.anchor_x.len() {
            for sign in [-1.0, 1.0] {
                let mut x = c.anchor_x.clone();
                x[a] += sign * r;
                pts.push((t_mid, self.region.states.project(&x)));
            }
        }
        pts.retain(|(t, x)| self.locate(*t, x) == Some(i));
        pts
    }
}

/// Builds the cone cover of `S` on which `F` and a base selection with
/// Lipschitz constant `phi_lipschitz` oscillate by at most `modulus / 2`
/// inside each cell.
pub fn build_cone_cover(
    region: &CoverRegion,
    f: &VertexMultiMap,
    phi_lipschitz: f64,
    modulus: f64,
) -> Result<ConeCover> {
    if !(modulus > 0.0) || !modulus.is_finite() {
        return Err(Error::Invalid(format!("cover modulus must be positive, got {modulus}")));
    }
    if region.states.dim() != f.dim() || !(region.t1 >= region.t0) {
        return Err(Error::Invalid("cover region does not match the multimap".into()));
    }
    let n = f.dim();
    let lip = f.max_lipschitz();
    let a = lip.time + phi_lipschitz;
    let b = lip.state + phi_lipschitz;
    let slope = f.bound() + 1.0;
    let span = region.t1 - region.t0;
    let widths = region.states.widths();
    let (target_r0, delta_max) = if b > 0.0 {
        (modulus / (8.0 * b), modulus / (4.0 * (a + b * slope)))
    } else if a > 0.0 {
        (f64::INFINITY, modulus / (2.0 * a))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let slabs_f = if span > 0.0 { (span / delta_max).ceil().max(1.0) } else { 1.0 };
    let counts_f: Vec<f64> = widths
        .iter()
        .map(|w| {
            if target_r0.is_finite() {
                let h = 2.0 * target_r0 / (n as f64).sqrt();
                (w / h).ceil().max(1.0)
            } else {
                1.0
            }
        })
        .collect();
    let cells = slabs_f * counts_f.iter().product::<f64>();
    if !(cells <= CELL_LIMIT as f64) {
        return Err(Error::CoverTooFine {
            cells,
            limit: CELL_LIMIT,
        });
    }
    let slabs = slabs_f as usize;
    let counts: Vec<usize> = counts_f.iter().map(|&c| c as usize).collect();
    let spacing: Vec<f64> = widths.iter().zip(&counts).map(|(w, &c)| w / c as f64).collect();
    let r0 = 0.5 * norm(&spacing);
    Ok(ConeCover {
        region: region.clone(),
        slope,
        delta: span / slabs as f64,
        slabs,
        counts,
        spacing,
        r0,
        modulus,
    })
}

/// `ψ(t, x) = Σ weights_k · v_{maps_k}(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub maps: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, f: &VertexMultiMap, t: f64, x: &[f64]) -> Vec<f64> {
        if let ([i], [w]) = (self.maps.as_slice(), self.weights.as_slice()) {
            if *w == 1.0 {
                return f.vertex(*i, t, x);
            }
        }
        let mut y = vec![0.0; f.dim()];
        let mut v = vec![0.0; f.dim()];
        for (&i, &w) in self.maps.iter().zip(&self.weights) {
            f.vertex_into(i, t, x, &mut v);
            axpy(&mut y, w, &v);
        }
        y
    }

    pub fn lipschitz(&self, f: &VertexMultiMap) -> f64 {
        self.maps
            .iter()
            .map(|&i| f.lipschitz()[i].total())
            .fold(0.0, f64::max)
    }
}

/// Decomposition data of one cone cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellData {
    pub cell: ConeCell,
    /// `θ^i_0..θ^i_n`, zero-padded.
    pub theta: Vec<f64>,
    /// Partial sums of `theta`, the last one exactly 1.
    pub cumulative: Vec<f64>,
    /// `y^i_j`, vertices of `F` at the anchor.
    pub targets: Vec<Vec<f64>>,
    pub pieces: Vec<Piece>,
    pub majorants: Vec<AffineMajorant>,
    /// Amount added to each `b^i_j` to cover nearby fibers.
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelectionCertificate {
    pub samples: usize,
    /// `max φ^i_j(ψ^i_j(t, x))` over sampled points; should be `≤ eps`.
    pub max_majorant_on_piece: f64,
    /// `min φ^i_j(z)` over sampled vertices `z` of `F(t, x)`; should be `≥ −1e-6`.
    pub min_majorant_on_vertices: f64,
    pub extremality_violations: usize,
    pub soundness_violations: usize,
    /// `max h(φ(anchor), F(anchor))` over cells.
    pub eta_observed: f64,
    /// Largest sampled `|ψ^i_j − y^i_j|` and `|φ − φ(anchor)|` inside a cell.
    pub max_oscillation: f64,
}

impl SelectionCertificate {
    pub fn holds(&self) -> bool {
        self.extremality_violations == 0 && self.soundness_violations == 0
    }
}

/// The selection `g` of a single refinement step.
#[derive(Debug, Clone, Serialize)]
pub struct PiecewiseSelection {
    #[serde(skip)]
    map: Arc<VertexMultiMap>,
    pub cover: ConeCover,
    pub cells: Vec<CellData>,
    /// Strip count `N`: `J_k = [kT/N, (k+1)T/N)`.
    pub strips: u64,
    pub horizon: f64,
    pub eps: f64,
    pub eta: f64,
    pub certificate: SelectionCertificate,
}

/// Runs one refinement step on `S`: builds the cover for `eps`, decomposes
/// `phi` at every anchor and lays out the strips. The cover is shrunk until
/// the drift of `F` across a cell costs every majorant at most `eps/2`.
pub fn refine(
    region: &CoverRegion,
    f: &Arc<VertexMultiMap>,
    phi: &dyn Selection,
    eta: f64,
    eps: f64,
) -> Result<PiecewiseSelection> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let horizon = f.horizon();
    let n = f.dim();
    let lip = f.max_lipschitz();
    let mut modulus = eps / (4.0 * horizon);
    let mut attempt = 0;
    let (cover, cells, eta_observed) = loop {
        let cover = build_cone_cover(region, f, phi.piece_lipschitz(), modulus)?;
        let spread = lip.time * cover.delta + lip.state * (cover.slope * cover.delta + cover.r0);
        let (cells, eta_observed) = decompose(&cover, f, phi, eps, spread, n)?;
        // a majorant of slope |a| read at a drifted vertex, plus its slack
        let need = cells
            .iter()
            .flat_map(|c| c.majorants.iter())
            .map(|m| (1.0 + 2.0 * m.slope()) * spread)
            .fold(0.0, f64::max);
        if need <= 0.5 * eps || attempt == MAX_COVER_SHRINKS {
            break (cover, cells, eta_observed);
        }
        modulus *= 0.9 * 0.5 * eps / need;
        attempt += 1;
    };
    let nu = cover.len() as f64;
    let strips_f = (8.0 * f.bound() * nu * nu * horizon / eps).floor() + 1.0;
    if !(strips_f <= STRIP_LIMIT as f64) {
        return Err(Error::TooManyStrips {
            strips: strips_f,
            limit: STRIP_LIMIT,
        });
    }
    let mut g = PiecewiseSelection {
        map: Arc::clone(f),
        cover,
        cells,
        strips: strips_f as u64,
        horizon,
        eps,
        eta,
        certificate: SelectionCertificate::default(),
    };
    g.certificate = g.check(phi)?;
    g.certificate.eta_observed = eta_observed;
    Ok(g)
}

/// Carathéodory data and majorants at every anchor of `cover`.
fn decompose(
    cover: &ConeCover,
    f: &VertexMultiMap,
    phi: &dyn Selection,
    eps: f64,
    spread: f64,
    n: usize,
) -> Result<(Vec<CellData>, f64)> {
    let mut cells = Vec::with_capacity(cover.len());
    let mut eta_observed = 0.0f64;
    for cell in cover.cells() {
        let (ta, xa) = (cell.anchor_t, cell.anchor_x.clone());
        let y = phi.eval(ta, &xa)?;
        let (poly, sources) = f.value_with_sources(ta, &xa)?;
        let dec = poly.caratheodory(&y).map_err(|e| Error::DecompositionFailed {
            t: ta,
            x: xa.clone(),
            reason: e.to_string(),
        })?;
        if let Some(h) = h_value(&y, &poly)?.value() {
            eta_observed = eta_observed.max(h);
        }
        let mut theta = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(n + 1);
        let mut pieces = Vec::with_capacity(n + 1);
        let mut majorants = Vec::with_capacity(n + 1);
        let mut slack = 0.0f64;
        for (&idx, &w) in dec.indices.iter().zip(&dec.weights) {
            let target = poly.vertices()[idx].clone();
            let mut phi_j = affine_majorant(&target, &poly, eps)?;
            let kappa = (1.0 + phi_j.slope()) * spread;
            phi_j.b += kappa;
            slack = slack.max(kappa);
            // the Lipschitz selection through a vertex is its own vertex map
            pieces.push(Piece {
                maps: vec![sources[idx]],
                weights: vec![1.0],
            });
            theta.push(w);
            targets.push(target);
            majorants.push(phi_j);
        }
        while theta.len() < n + 1 {
            theta.push(0.0);
            targets.push(targets[0].clone());
            pieces.push(pieces[0].clone());
            majorants.push(majorants[0].clone());
        }
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|w| *w /= total);
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = theta
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last = theta.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for c in cumulative.iter_mut().skip(last) {
            *c = 1.0;
        }
        cells.push(CellData {
            cell,
            theta,
            cumulative,
            targets,
            pieces,
            majorants,
            slack,
        });
    }
    Ok((cells, eta_observed))
}

impl PiecewiseSelection {
    pub fn multimap(&self) -> &Arc<VertexMultiMap> {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn slots(&self) -> usize {
        self.map.dim() + 1
    }

    fn strip_width(&self) -> f64 {
        self.horizon / self.strips as f64
    }

    /// Sub-strip slot `j` of `cell` active at time `t`.
    pub fn slot(&self, cell: usize, t: f64) -> usize {
        let data = &self.cells[cell];
        let s = t / self.strip_width();
        let k = s.floor().clamp(0.0, (self.strips - 1) as f64);
        let frac = s - k;
        let mut last = 0;
        for (j, (&w, &c)) in data.theta.iter().zip(&data.cumulative).enumerate() {
            if w > 0.0 {
                if frac < c {
                    return j;
                }
                last = j;
            }
        }
        last
    }

    /// `(cell, slot)` of the point.
    pub fn locate(&self, t: f64, x: &[f64]) -> Result<(usize, usize)> {
        let cell = self.cover.locate(t, x).ok_or_else(|| Error::NotCovered { t, x: x.to_vec() })?;
        Ok((cell, self.slot(cell, t)))
    }

    pub fn key(&self, cell: usize, slot: usize) -> RegionKey {
        (cell * self.slots() + slot) as RegionKey
    }

    pub fn unkey(&self, key: RegionKey) -> (usize, usize) {
        let k = key as usize;
        (k / self.slots(), k % self.slots())
    }

    pub fn piece(&self, cell: usize, slot: usize) -> &Piece {
        &self.cells[cell].pieces[slot]
    }

    /// `g(t, x)`.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (cell, slot) = self.locate(t, x)?;
        Ok(self.piece(cell, slot).eval(&self.map, t, x))
    }

    /// `ḡ(t, x) = y^i_j`.
    pub fn evaluate_bar(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (cell, slot) = self.locate(t, x)?;
        Ok(self.cells[cell].targets[slot].clone())
    }

    /// Bounds of the sub-strip `J^i_{k,j}`.
    pub fn sub_strip(&self, cell: usize, k: u64, slot: usize) -> (f64, f64) {
        let data = &self.cells[cell];
        let lo = if slot == 0 { 0.0 } else { data.cumulative[slot - 1] };
        let w = self.strip_width();
        (w * (k as f64 + lo), w * (k as f64 + data.cumulative[slot]))
    }

    /// First strip boundary or cone end strictly after `t` for the cell of `(t, x)`.
    pub fn next_break_in(&self, cell: usize, t: f64) -> f64 {
        let data = &self.cells[cell];
        let w = self.strip_width();
        let guard = t + 1e-13 * (1.0 + t.abs());
        let k0 = (t / w).floor().max(0.0);
        let cone_end = data.cell.apex_t + data.cell.extent;
        let mut best = if cone_end > guard { cone_end } else { f64::INFINITY };
        'outer: for k in [k0, k0 + 1.0] {
            for (&th, &c) in data.theta.iter().zip(&data.cumulative) {
                if th > 0.0 {
                    let b = w * (k + c);
                    if b > guard {
                        best = best.min(b);
                        break 'outer;
                    }
                }
            }
        }
        best
    }

    /// Number of maximal subintervals on which `(t, u(t))` stays in one `Δ^i`.
    pub fn crossing_count<C: Curve + ?Sized>(&self, u: &C) -> Result<usize> {
        let view = CellView(self);
        let a = self.cover.region.t0.max(0.0);
        let b = self.cover.region.t1.min(self.horizon);
        let step = self.cover.delta.min(self.cover.back()).max(self.horizon * 1e-6) / 2.0;
        let mut runs = 0usize;
        let mut last = None;
        for_each_segment(&[&view], u, a, b, step.max(1e-9), |_, _, keys| {
            if keys[0] != u64::MAX && last != Some(keys[0]) {
                runs += 1;
            }
            last = Some(keys[0]);
            Ok(())
        })?;
        Ok(runs)
    }

    /// Quadrature of `φ − g` along `u` on `[τ, τ']` for the two estimates of
    /// the construction.
    pub fn estimates<C: Curve + ?Sized>(
        &self,
        phi: &dyn Selection,
        u: &C,
        tau: f64,
        tau_end: f64,
    ) -> Result<StepEstimate> {
        let d = difference_integral(phi, self, u, tau, tau_end, self.horizon / 256.0)?;
        Ok(StepEstimate::new(d, self.eps, self.eta, tau_end - tau))
    }

    /// Samples the certificates and the oscillation of pieces and `phi`.
    fn check(&self, phi: &dyn Selection) -> Result<SelectionCertificate> {
        let mut cert = SelectionCertificate {
            min_majorant_on_vertices: f64::INFINITY,
            max_majorant_on_piece: f64::NEG_INFINITY,
            ..Default::default()
        };
        let stride = (self.cells.len() / CERT_CELL_SAMPLES).max(1);
        let allowed = self.cover.modulus;
        for i in (0..self.cells.len()).step_by(stride) {
            let data = &self.cells[i];
            let phi_anchor = phi.eval(data.cell.anchor_t, &data.cell.anchor_x)?;
            for (t, x) in self.cover.sample_points(i) {
                let osc = dist(&phi.eval(t, &x)?, &phi_anchor);
                cert.max_oscillation = cert.max_oscillation.max(osc);
                if osc > allowed {
                    return Err(Error::CoverTooCoarse {
                        cell: i,
                        observed: osc,
                        allowed,
                    });
                }
                let poly = self.map.value(t, &x)?;
                cert.samples += 1;
                for j in 0..data.theta.len() {
                    if data.theta[j] == 0.0 {
                        continue;
                    }
                    let psi = data.pieces[j].eval(&self.map, t, &x);
                    let osc = dist(&psi, &data.targets[j]);
                    cert.max_oscillation = cert.max_oscillation.max(osc);
                    if osc > allowed {
                        return Err(Error::CoverTooCoarse {
                            cell: i,
                            observed: osc,
                            allowed,
                        });
                    }
                    let on_piece = data.majorants[j].eval(&psi);
                    cert.max_majorant_on_piece = cert.max_majorant_on_piece.max(on_piece);
                    if on_piece > self.eps {
                        cert.extremality_violations += 1;
                    }
                    for z in poly.vertices() {
                        let v = data.majorants[j].eval(z);
                        cert.min_majorant_on_vertices = cert.min_majorant_on_vertices.min(v);
                        if v < -1e-6 {
                            cert.soundness_violations += 1;
                        }
                    }
                }
            }
        }
        Ok(cert)
    }

    /// Largest `|a^i_j|` over cells and slots.
    pub fn max_slope(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.majorants.iter().map(|m| m.slope()))
            .fold(0.0, f64::max)
    }

    /// Largest Lipschitz constant of the pieces.
    pub fn lipschitz(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.pieces.iter().map(|p| p.lipschitz(&self.map)))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("selection serializes")
    }
}

impl Selection for PiecewiseSelection {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.evaluate(t, x)
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        let (cell, slot) = self.locate(t, x)?;
        Ok(self.key(cell, slot))
    }
    fn eval_piece(&self, key: RegionKey, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (cell, slot) = self.unkey(key);
        Ok(self.piece(cell, slot).eval(&self.map, t, x))
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        match self.cover.locate(t, x) {
            Some(cell) => self.next_break_in(cell, t),
            None => f64::INFINITY,
        }
    }
    fn piece_lipschitz(&self) -> f64 {
        self.lipschitz()
    }
}

/// Cells only, for crossing counts.
struct CellView<'a>(&'a PiecewiseSelection);

impl Selection for CellView<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, _t: f64, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0.dim()])
    }
    fn region(&self, t: f64, x: &[f64]) -> Result<RegionKey> {
        Ok(self.0.cover.locate(t, x).map_or(u64::MAX, |c| c as u64))
    }
    fn next_break(&self, t: f64, x: &[f64]) -> f64 {
        match self.0.cover.locate(t, x) {
            Some(c) => {
                let cell = &self.0.cells[c].cell;
                let end = cell.apex_t + cell.extent;
                if end > t {
                    end
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    }
    fn piece_lipschitz(&self) -> f64 {
        0.0
    }
}

/// Residuals of the two path estimates of one refinement step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepEstimate {
    /// `|∫(φ − g)|`.
    pub signed: f64,
    /// `∫|φ − g|`.
    pub absolute: f64,
    /// Quadrature error bound `Q`.
    pub quadrature: f64,
    /// `eps + Q`.
    pub signed_bound: f64,
    /// `eps + η(τ' − τ) + Q`.
    pub absolute_bound: f64,
}

impl StepEstimate {
    fn new(d: DifferenceIntegral, eps: f64, eta: f64, span: f64) -> Self {
        Self {
            signed: norm_sq(&d.integral).sqrt(),
            absolute: d.abs_integral,
            quadrature: d.error_bound,
            signed_bound: eps + d.error_bound,
            absolute_bound: eps + eta * span + d.error_bound,
        }
    }

    pub fn holds(&self) -> bool {
        self.signed <= self.signed_bound && self.absolute <= self.absolute_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Vars, VectorExpr};
    use crate::multimap::{LipschitzBound, SeedSet};
    use crate::selection::ConstantField;

    fn segment_map(bound: f64) -> Arc<VertexMultiMap> {
        let vars = Vars {
            states: 1,
            controls: 0,
        };
        Arc::new(
            VertexMultiMap::new(
                1.0,
                bound,
                StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
                SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
                vec![
                    VectorExpr::parse(&["-1"], vars).unwrap(),
                    VectorExpr::parse(&["1"], vars).unwrap(),
                ],
                None,
            )
            .unwrap(),
        )
    }

    fn drifting_map() -> Arc<VertexMultiMap> {
        let vars = Vars {
            states: 1,
            controls: 0,
        };
        Arc::new(
            VertexMultiMap::new(
                1.0,
                1.0,
                StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
                SeedSet::Box(StateBox::new(vec![-0.5], vec![0.5]).unwrap()),
                vec![
                    VectorExpr::parse(&["-0.5 + 0.02*sin(x)"], vars).unwrap(),
                    VectorExpr::parse(&["0.5 + 0.2*cos(t)"], vars).unwrap(),
                ],
                Some(vec![
                    LipschitzBound { time: 0.0, state: 0.02 },
                    LipschitzBound { time: 0.2, state: 0.0 },
                ]),
            )
            .unwrap(),
        )
    }

    fn unit_region() -> CoverRegion {
        CoverRegion {
            t0: 0.0,
            t1: 1.0,
            states: StateBox::new(vec![-1.0], vec![1.0]).unwrap(),
        }
    }

    #[test]
    fn cover_partitions_samples() {
        let f = drifting_map();
        let cover = build_cone_cover(&unit_region(), &f, 0.0, 0.05).unwrap();
        assert!(cover.len() > 1);
        for k in 0..10_000 {
            let t = (k % 100) as f64 / 99.0;
            let x = -1.0 + 2.0 * (k / 100) as f64 / 99.0;
            let i = cover.locate(t, &[x]).expect("covered");
            assert!(cover.cell(i).contains(t, &[x]));
            for l in cover.predecessors(i) {
                assert!(!cover.cell(l).contains(t, &[x]), "Δ^{i} overlaps Γ_{l}");
            }
        }
    }

    #[test]
    fn halving_the_modulus_at_least_doubles_the_cells() {
        let f = drifting_map();
        let a = build_cone_cover(&unit_region(), &f, 0.0, 0.05).unwrap();
        let b = build_cone_cover(&unit_region(), &f, 0.0, 0.025).unwrap();
        assert!(b.len() >= 2 * a.len(), "{} vs {}", a.len(), b.len());
    }

    #[test]
    fn zero_slope_cover_counts_slabs_times_nodes() {
        let f = drifting_map();
        let cover = build_cone_cover(&unit_region(), &f, 0.0, 0.05).unwrap();
        assert_eq!(cover.len(), cover.slabs * cover.counts[0]);
        assert_eq!(cover.cells().count(), cover.len());
    }

    #[test]
    fn constant_segment_alternates_vertices() {
        let f = segment_map(1.0);
        let g = refine(&unit_region(), &f, &ConstantField(vec![0.0]), 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.strips, 81);
        let data = &g.cells[0];
        assert_eq!(data.theta, vec![0.5, 0.5]);
        let w = 1.0 / 81.0;
        for k in [0u64, 40, 80] {
            let (a0, b0) = g.sub_strip(0, k, 0);
            let (a1, b1) = g.sub_strip(0, k, 1);
            assert!((b0 - a0 - 0.5 * w).abs() < 1e-12 && (b1 - a1 - 0.5 * w).abs() < 1e-12);
            let v0 = g.evaluate(0.5 * (a0 + b0), &[0.3]).unwrap();
            let v1 = g.evaluate(0.5 * (a1 + b1), &[0.3]).unwrap();
            assert_eq!(v0[0] + v1[0], 0.0);
            assert_eq!(v0[0].abs(), 1.0);
        }
        assert!(g.certificate.holds(), "{:?}", g.certificate);
        assert_eq!(g.certificate.eta_observed, 1.0);
    }

    #[test]
    fn constant_segment_estimates_hold() {
        let f = segment_map(1.0);
        let phi = ConstantField(vec![0.0]);
        let g = refine(&unit_region(), &f, &phi, 1.0, 0.1).unwrap();
        for seed in 0..5 {
            let u = f.random_path(seed, 32);
            let e = g.estimates(&phi, &u, 0.0, 1.0).unwrap();
            assert!(e.holds(), "{e:?}");
            assert!(e.signed <= 1.0 / 81.0 + 1e-12);
        }
    }

    #[test]
    fn drifting_map_estimates_hold() {
        let f = drifting_map();
        let phi = ConstantField(vec![0.0]);
        let g = refine(&unit_region(), &f, &phi, 1.0, 0.2).unwrap();
        assert_eq!(g.strips, (8.0 * (g.len() * g.len()) as f64 / 0.2).floor() as u64 + 1);
        for seed in 0..3 {
            let u = f.random_path(seed, 16);
            let e = g.estimates(&phi, &u, 0.0, 1.0).unwrap();
            assert!(e.holds(), "{e:?}");
            assert!(g.crossing_count(&u).unwrap() >= 1);
        }
    }

    #[test]
    fn base_outside_hull_fails_with_location() {
        let f = segment_map(1.0);
        let err = refine(&unit_region(), &f, &ConstantField(vec![3.0]), 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::DecompositionFailed { .. }));
    }

    #[test]
    fn evaluation_is_total_on_grid() {
        let f = drifting_map();
        let g = refine(&unit_region(), &f, &ConstantField(vec![0.0]), 1.0, 0.2).unwrap();
        for k in 0..10_000 {
            let t = (k % 100) as f64 / 99.0;
            let x = -1.0 + 2.0 * (k / 100) as f64 / 99.0;
            let y = g.evaluate(t, &[x]).unwrap();
            assert_eq!(y, g.evaluate(t, &[x]).unwrap());
            let p = f.value(t, &[x]).unwrap();
            assert!(h_value(&y, &p).unwrap().value().unwrap() < 1e-7);
        }
    }

    #[test]
    fn single_cell_crossing_count_is_one() {
        let f = segment_map(1.0);
        let g = refine(&unit_region(), &f, &ConstantField(vec![0.0]), 1.0, 0.1).unwrap();
        let u = f.random_path(9, 8);
        assert_eq!(g.crossing_count(&u).unwrap(), 1);
    }

    #[test]
    fn serializes_to_json() {
        let f = segment_map(1.0);
        let g = refine(&unit_region(), &f, &ConstantField(vec![0.0]), 1.0, 0.1).unwrap();
        let v = g.to_json();
        assert_eq!(v["strips"], 81);
        assert_eq!(v["cells"][0]["theta"][0], 0.5);
    }
}
