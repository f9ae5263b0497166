//! Integrals of piecewise-Lipschitz fields along Lipschitz curves.
//!
//! The curve `s ↦ (s, u(s))` is cut at every time break of the fields, at
//! every node of the curve and at every region crossing (located by
//! bisection), so the integrand is Lipschitz on each segment and a single
//! midpoint per segment has error at most `L·len²/4`.

use crate::linalg::{axpy, norm, sub};
use crate::multimap::LipschitzPath;
use crate::selection::{RegionKey, Selection};
use crate::Result;

/// Width at which region crossings are considered located.
pub const CROSSING_TOL: f64 = 1e-12;

/// A curve `t ↦ u(t)` with Lipschitz constant `lipschitz()`.
pub trait Curve {
    fn at(&self, t: f64) -> Vec<f64>;
    /// Times at which the curve may have a kink.
    fn nodes(&self) -> &[f64];
    fn lipschitz(&self) -> f64;
}

impl Curve for LipschitzPath {
    fn at(&self, t: f64) -> Vec<f64> {
        LipschitzPath::at(self, t)
    }
    fn nodes(&self) -> &[f64] {
        &self.times
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

fn keys_at(sels: &[&dyn Selection], t: f64, x: &[f64], out: &mut Vec<RegionKey>) -> Result<()> {
    out.clear();
    for s in sels {
        out.push(s.region(t, x)?);
    }
    Ok(())
}

/// Calls `visit(t0, t1, keys)` for consecutive segments of `[a, b]` on which
/// every selection stays in one region along the curve.
pub fn for_each_segment<C, V>(
    sels: &[&dyn Selection],
    curve: &C,
    a: f64,
    b: f64,
    max_step: f64,
    mut visit: V,
) -> Result<()>
where
    C: Curve + ?Sized,
    V: FnMut(f64, f64, &[RegionKey]) -> Result<()>,
{
    let nodes = curve.nodes();
    let mut node = nodes.partition_point(|&s| s <= a);
    let mut t = a;
    let mut ks = Vec::new();
    let mut ke = Vec::new();
    let mut km = Vec::new();
    while t < b {
        let x = curve.at(t);
        let mut t1 = (t + max_step).min(b);
        while node < nodes.len() && nodes[node] <= t {
            node += 1;
        }
        if node < nodes.len() {
            t1 = t1.min(nodes[node]);
        }
        for s in sels {
            let nb = s.next_break(t, &x);
            if nb > t {
                t1 = t1.min(nb);
            }
        }
        let len = t1 - t;
        let ts = t + 0.25 * len;
        let te = t1 - 0.25 * len;
        keys_at(sels, ts, &curve.at(ts), &mut ks)?;
        keys_at(sels, te, &curve.at(te), &mut ke)?;
        if ks == ke {
            visit(t, t1, &ks)?;
            t = t1;
            continue;
        }
        let (mut lo, mut hi) = (ts, te);
        while hi - lo > CROSSING_TOL * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            keys_at(sels, mid, &curve.at(mid), &mut km)?;
            if km == ks {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        visit(t, hi, &ks)?;
        t = hi;
    }
    Ok(())
}

/// Integrals of `f − g` along a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceIntegral {
    /// `∫_a^b (f − g)(s, u(s)) ds`.
    pub integral: Vec<f64>,
    /// `∫_a^b |f − g|(s, u(s)) ds`.
    pub abs_integral: f64,
    /// `max_{t} |∫_a^t (f − g)|` over segment endpoints.
    pub sup_running: f64,
    /// Bound on the quadrature error of each of the three quantities.
    pub error_bound: f64,
    pub segments: usize,
}

/// Midpoint quadrature of `f − g` along `u` on `[a, b]`.
pub fn difference_integral<C: Curve + ?Sized>(
    f: &dyn Selection,
    g: &dyn Selection,
    curve: &C,
    a: f64,
    b: f64,
    max_step: f64,
) -> Result<DifferenceIntegral> {
    let n = f.dim();
    let lip = (f.piece_lipschitz() + g.piece_lipschitz()) * (1.0 + curve.lipschitz());
    let mut out = DifferenceIntegral {
        integral: vec![0.0; n],
        abs_integral: 0.0,
        sup_running: 0.0,
        error_bound: 0.0,
        segments: 0,
    };
    for_each_segment(&[f, g], curve, a, b, max_step, |t0, t1, keys| {
        let tm = 0.5 * (t0 + t1);
        let x = curve.at(tm);
        let w = sub(&f.eval_piece(keys[0], tm, &x)?, &g.eval_piece(keys[1], tm, &x)?);
        let len = t1 - t0;
        axpy(&mut out.integral, len, &w);
        out.abs_integral += len * norm(&w);
        out.error_bound += lip * len * len / 4.0;
        out.sup_running = out.sup_running.max(norm(&out.integral));
        out.segments += 1;
        Ok(())
    })?;
    Ok(out)
}

/// Number of maximal subintervals of `[a, b]` on which `sel` stays in one region.
pub fn region_runs<C: Curve + ?Sized>(
    sel: &dyn Selection,
    curve: &C,
    a: f64,
    b: f64,
    max_step: f64,
) -> Result<usize> {
    let mut runs = 0usize;
    let mut last: Option<RegionKey> = None;
    for_each_segment(&[sel], curve, a, b, max_step, |_, _, keys| {
        if last != Some(keys[0]) {
            runs += 1;
            last = Some(keys[0]);
        }
        Ok(())
    })?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{AlternatingField, ConstantField};

    fn still(x: f64) -> LipschitzPath {
        LipschitzPath::constant(1.0, vec![x])
    }

    #[test]
    fn identical_fields_have_zero_difference() {
        let f = AlternatingField {
            a: vec![1.0],
            b: vec![-1.0],
            width: 0.1,
        };
        let d = difference_integral(&f, &f, &still(0.0), 0.0, 1.0, 0.05).unwrap();
        assert_eq!(d.sup_running, 0.0);
        assert_eq!(d.abs_integral, 0.0);
    }

    #[test]
    fn constant_offset_integrates_linearly() {
        let f = ConstantField(vec![0.3, -0.4]);
        let g = ConstantField(vec![0.0, 0.0]);
        let path = LipschitzPath::constant(1.0, vec![0.0, 0.0]);
        let d = difference_integral(&f, &g, &path, 0.0, 1.0, 0.01).unwrap();
        assert!((d.sup_running - 0.5).abs() < 1e-12);
        assert!((d.abs_integral - 0.5).abs() < 1e-12);
        assert_eq!(d.error_bound, 0.0);
    }

    #[test]
    fn zigzag_has_small_running_integral() {
        let f = AlternatingField {
            a: vec![1.0],
            b: vec![-1.0],
            width: 0.125,
        };
        let zero = ConstantField(vec![0.0]);
        let d = difference_integral(&f, &zero, &still(0.0), 0.0, 1.0, 1.0).unwrap();
        assert!((d.sup_running - 0.125).abs() < 1e-12);
        assert!(d.integral[0].abs() < 1e-12);
        assert!((d.abs_integral - 1.0).abs() < 1e-12);
        assert_eq!(region_runs(&f, &still(0.0), 0.0, 1.0, 1.0).unwrap(), 8);
    }
}
