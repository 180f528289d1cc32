//! Clamped B-spline basis of order 3 (quadratic) used for the monotone
//! baseline. Evaluation outside the knot range continues linearly.

use crate::error::{Error, Result};

pub const SPLINE_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplineBasis {
    /// Full clamped knot vector of length n_basis + order.
    pub knots: Vec<f64>,
    pub n_basis: usize,
}

impl SplineBasis {
    /// Builds a clamped basis with `interior` knots placed at quantiles of
    /// the sample `xs` (any order). Degenerate samples shrink the interior
    /// grid until knots are strictly increasing.
    pub fn from_sample(xs: &[f64], interior: usize) -> Result<SplineBasis> {
        if xs.is_empty() {
            return Err(Error::InvalidData("empty sample for spline knots".into()));
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lo = sorted[0];
        let mut hi = *sorted.last().unwrap();
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        let span = hi - lo;
        // Inverse empirical CDF (no interpolation): invariant under
        // duplicating the sample, so replicated datasets share knots.
        let quantile = |q: f64| -> f64 {
            let pos = (q * sorted.len() as f64).ceil() as usize;
            sorted[pos.clamp(1, sorted.len()) - 1]
        };
        let mut inner = Vec::with_capacity(interior);
        let min_gap = 1e-6 * span;
        let mut last = lo;
        for i in 1..=interior {
            let q = i as f64 / (interior + 1) as f64;
            let cand = quantile(q);
            if cand > last + min_gap && cand < hi - min_gap {
                inner.push(cand);
                last = cand;
            }
        }
        Ok(SplineBasis::from_knots(lo, hi, &inner))
    }

    pub fn from_knots(lo: f64, hi: f64, interior: &[f64]) -> SplineBasis {
        let k = SPLINE_ORDER;
        let mut knots = Vec::with_capacity(interior.len() + 2 * k);
        knots.extend(std::iter::repeat_n(lo, k));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, k));
        let n_basis = knots.len() - k;
        SplineBasis { knots, n_basis }
    }

    fn lo(&self) -> f64 {
        self.knots[0]
    }

    fn hi(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// All basis values and first derivatives at `x`, in the knot range.
    fn raw_row(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let k = SPLINE_ORDER;
        let t = &self.knots;
        let nb = self.n_basis;
        // Order-1 (piecewise constant) basis.
        let mut b = vec![0.0; nb + k - 1];
        for (j, slot) in b.iter_mut().enumerate() {
            if t[j] >= t[j + 1] {
                continue;
            }
            let right_closed = t[j + 1] >= self.hi();
            if (t[j] <= x && x < t[j + 1]) || (right_closed && t[j] <= x && x <= t[j + 1]) {
                *slot = 1.0;
            }
        }
        let mut prev = b;
        let mut deriv = vec![0.0; nb];
        for ord in 2..=k {
            let cols = nb + k - ord;
            let mut cur = vec![0.0; cols];
            for j in 0..cols {
                let d1 = t[j + ord - 1] - t[j];
                let d2 = t[j + ord] - t[j + 1];
                let a = if d1 > 0.0 { (x - t[j]) / d1 } else { 0.0 };
                let c = if d2 > 0.0 { (t[j + ord] - x) / d2 } else { 0.0 };
                cur[j] = a * prev[j] + c * prev[j + 1];
                if ord == k {
                    let da = if d1 > 0.0 { prev[j] / d1 } else { 0.0 };
                    let dc = if d2 > 0.0 { prev[j + 1] / d2 } else { 0.0 };
                    deriv[j] = (ord as f64 - 1.0) * (da - dc);
                }
            }
            prev = cur;
        }
        (prev, deriv)
    }

    /// Basis values and derivatives at `x`; outside the knot range the
    /// returned row is the linear continuation of the boundary value and
    /// slope, so coefficients still enter linearly.
    pub fn row(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        if x < self.lo() {
            let (b0, d0) = self.raw_row(self.lo());
            let dx = x - self.lo();
            let b = b0.iter().zip(&d0).map(|(b, d)| b + d * dx).collect();
            (b, d0)
        } else if x > self.hi() {
            let (b0, d0) = self.raw_row(self.hi());
            let dx = x - self.hi();
            let b = b0.iter().zip(&d0).map(|(b, d)| b + d * dx).collect();
            (b, d0)
        } else {
            self.raw_row(x)
        }
    }
}

/// Coefficients gamma from the raw parameterization: gamma_0 = raw_0 and
/// gamma_j = gamma_{j-1} + exp(raw_j), which makes the fitted curve
/// nondecreasing for any raw vector.
pub fn monotone_coefficients(raw: &[f64]) -> Vec<f64> {
    let mut g = Vec::with_capacity(raw.len());
    let mut acc = raw[0];
    g.push(acc);
    for &r in &raw[1..] {
        acc += r.exp();
        g.push(acc);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis() -> SplineBasis {
        SplineBasis::from_knots(0.0, 1.0, &[0.2, 0.4, 0.6, 0.8])
    }

    #[test]
    fn partition_of_unity_and_zero_derivative_sum() {
        let b = basis();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let (row, drow) = b.row(x);
            let s: f64 = row.iter().sum();
            let ds: f64 = drow.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} sum={s}");
            assert!(ds.abs() < 1e-10, "x={x} dsum={ds}");
        }
        // Extrapolated rows keep both properties.
        for x in [-0.5, 1.7] {
            let (row, drow) = b.row(x);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(drow.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let b = basis();
        let h = 1e-6;
        // Offset grid: the second derivative jumps at knots, where a
        // central difference straddling the knot is only O(h) accurate.
        for i in 1..100 {
            let x = (i as f64 + 0.5) / 100.0;
            let (_, drow) = b.row(x);
            let (up, _) = b.row(x + h);
            let (dn, _) = b.row(x - h);
            for j in 0..b.n_basis {
                let fd = (up[j] - dn[j]) / (2.0 * h);
                assert!((drow[j] - fd).abs() < 1e-6, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn knots_from_degenerate_sample() {
        let b = SplineBasis::from_sample(&[2.0, 2.0, 2.0], 8).unwrap();
        assert!(b.n_basis >= SPLINE_ORDER);
        let (row, _) = b.row(2.0);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        /// Monotone reparameterization gives a nondecreasing curve for
        /// arbitrary raw coefficients, inside and outside the knot range.
        #[test]
        fn monotone_for_arbitrary_raw(raw in proptest::collection::vec(-10.0f64..10.0, 7)) {
            let b = basis();
            let g = monotone_coefficients(&raw);
            let mut prev = f64::NEG_INFINITY;
            for i in -20..=120 {
                let x = i as f64 / 100.0;
                let (row, drow) = b.row(x);
                let eta: f64 = row.iter().zip(&g).map(|(r, c)| r * c).sum();
                let slope: f64 = drow.iter().zip(&g).map(|(r, c)| r * c).sum();
                prop_assert!(eta >= prev - 1e-9, "eta decreased at x={x}");
                prop_assert!(slope >= -1e-9, "negative slope at x={x}");
                prev = eta;
            }
        }
    }
}
