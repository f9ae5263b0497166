//! Distances between Picard operators and extremality integrals along paths.

use serde::Serialize;

use crate::multimap::VertexMultiMap;
use crate::quadrature::{difference_integral, Curve};
use crate::selection::Selection;
use crate::variance::h_value;
use crate::Result;

/// Uniform samples used for `∫ h(f(s, u(s)), F(s, u(s))) ds`.
pub const H_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PicardDistance {
    /// `max_u max_t |∫_0^t (f − g)(s, u(s)) ds|`.
    pub sup: f64,
    /// `max_u ∫_0^T |f − g|(s, u(s)) ds`.
    pub l1: f64,
    /// Largest quadrature error bound among the paths.
    pub quadrature: f64,
}

/// Sampled distance between the Picard operators of `f` and `g` on `[0, T]`.
pub fn picard_distance<C: Curve>(
    f: &dyn Selection,
    g: &dyn Selection,
    paths: &[C],
    horizon: f64,
) -> Result<PicardDistance> {
    let mut out = PicardDistance::default();
    for u in paths {
        let d = difference_integral(f, g, u, 0.0, horizon, horizon / 256.0)?;
        out.sup = out.sup.max(d.sup_running);
        out.l1 = out.l1.max(d.abs_integral);
        out.quadrature = out.quadrature.max(d.error_bound);
    }
    Ok(out)
}

/// Midpoint-sampled `∫_a^b h(f(s, u(s)), F(s, u(s))) ds`.
pub fn h_integral<C: Curve + ?Sized>(
    f: &dyn Selection,
    map: &VertexMultiMap,
    u: &C,
    a: f64,
    b: f64,
    samples: usize,
) -> Result<f64> {
    let w = (b - a) / samples as f64;
    let mut acc = 0.0;
    for k in 0..samples {
        let s = a + (k as f64 + 0.5) * w;
        let x = u.at(s);
        let y = f.eval(s, &x)?;
        let poly = map.value(s, &x)?;
        // a value off F counts with the largest possible h
        let h = h_value(&y, &poly)?
            .value()
            .unwrap_or_else(|| poly.chebyshev().1);
        acc += h * w;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multimap::LipschitzPath;
    use crate::selection::ConstantField;

    #[test]
    fn same_field_is_at_distance_zero() {
        let f = ConstantField(vec![0.2]);
        let paths = vec![LipschitzPath::constant(1.0, vec![0.0])];
        let d = picard_distance(&f, &f, &paths, 1.0).unwrap();
        assert_eq!(d.sup, 0.0);
    }

    #[test]
    fn constant_difference_gives_c_times_t() {
        let f = ConstantField(vec![0.2, 0.0]);
        let g = ConstantField(vec![-0.1, 0.4]);
        let paths = vec![LipschitzPath::constant(2.0, vec![0.0, 0.0])];
        let d = picard_distance(&f, &g, &paths, 2.0).unwrap();
        assert!((d.sup - 0.5 * 2.0).abs() < 1e-12);
    }
}
