//! Monotone cubic (Fritsch-Carlson) interpolation of sampled profiles.

use crate::radial::{RadialFunction, RadialGrid};

/// Piecewise cubic Hermite interpolant with shape-preserving slopes.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, `x.len() == y.len() >= 2`.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                m[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        m[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], *delta.get(1).unwrap_or(&delta[0]));
        m[n - 1] = end_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    /// Interpolant through a profile; the slope at the origin is pinned to 0.
    pub fn regular(f: &RadialFunction) -> Self {
        let mut p = Self::new(f.grid().nodes(), f.values());
        p.m[0] = 0.0;
        p
    }

    /// Evaluates at `t`; zero outside `[x_0, x_last]`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return 0.0;
        }
        let k = match self.x.binary_search_by(|v| v.partial_cmp(&t).expect("finite")) {
            Ok(k) => return self.y[k],
            Err(k) => k - 1,
        };
        self.eval_in(k, t)
    }

    fn eval_in(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }

    /// Evaluates at an increasing sequence of points in one sweep.
    pub fn eval_sorted(&self, ts: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        let mut k = 0;
        ts.iter()
            .map(|&t| {
                if t < self.x[0] || t > self.x[n - 1] {
                    return 0.0;
                }
                while k + 2 < n && self.x[k + 1] < t {
                    k += 1;
                }
                while k > 0 && self.x[k] > t {
                    k -= 1;
                }
                self.eval_in(k, t)
            })
            .collect()
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Resamples `(x, y)` data onto `grid`, zero beyond the data range.
pub fn resample_onto(x: &[f64], y: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let mut p = Pchip::new(x, y);
    if x[0] == 0.0 {
        p.m[0] = 0.0;
    }
    p.eval_sorted(grid.nodes())
}

/// Eight-point Lagrange interpolation in index space at fractional index
/// `x`. Values at negative indices mirror the positive ones (profiles are
/// even in `r` and the grid map is odd); zero beyond the last node.
pub fn lagrange_even(values: &[f64], x: f64) -> f64 {
    const W: i64 = 8;
    let n = values.len() as i64;
    if x > (n - 1) as f64 || x < -((n - 1) as f64) {
        return 0.0;
    }
    let x = x.abs();
    let k = x.floor() as i64;
    if x == k as f64 {
        return values[k as usize];
    }
    let start = (k - W / 2 + 1).min(n - W).max(-(W / 2 - 1));
    let mut acc = 0.0;
    for j in start..start + W {
        let mut w = 1.0;
        for l in start..start + W {
            if l != j {
                w *= (x - l as f64) / (j - l) as f64;
            }
        }
        acc += w * values[j.unsigned_abs() as usize];
    }
    acc
}

/// `t^2 u(t r)` on the same grid, with zero extension beyond `r_max`.
///
/// Uses [`lagrange_even`]: the resampled profile feeds a discrete
/// Laplacian, which amplifies an O(h^k) interpolation error by `1/h^2`.
pub fn fiber_rescale(u: &RadialFunction, t: f64) -> RadialFunction {
    if t == 1.0 {
        return u.clone();
    }
    let grid = u.grid();
    let vals = grid
        .nodes()
        .iter()
        .map(|r| t * t * lagrange_even(u.values(), grid.index_of(t * r)))
        .collect();
    RadialFunction::new(std::sync::Arc::clone(grid), vals).expect("finite resample")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::make_grid;

    #[test]
    fn reproduces_nodes_and_stays_monotone() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let p = Pchip::new(&x, &y);
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a), *b);
        }
        let fine: Vec<f64> = (0..1000).map(|i| i as f64 * 0.0095).collect();
        let v = p.eval_sorted(&fine);
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
        for (t, val) in fine.iter().zip(&v) {
            assert_eq!(*val, p.eval(*t));
        }
    }

    #[test]
    fn lagrange_is_exact_on_even_polynomials() {
        let vals: Vec<f64> = (0..40).map(|i| {
            let x = i as f64;
            1.0 - 0.3 * x * x + 0.01 * x.powi(4) - 1e-4 * x.powi(6)
        }).collect();
        for x in [0.25_f64, 1.5, 2.75, 17.3, 38.9] {
            let exact = 1.0 - 0.3 * x * x + 0.01 * x.powi(4) - 1e-4 * x.powi(6);
            assert!((lagrange_even(&vals, x) - exact).abs() < 1e-9 * exact.abs().max(1.0));
        }
        assert_eq!(lagrange_even(&vals, 39.5), 0.0);
        assert_eq!(lagrange_even(&vals, 7.0), vals[7]);
    }

    #[test]
    fn rescale_on_stretched_grid() {
        let g = make_grid(1201, 20.0, 3.0).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (-r * r / 4.0).exp()).unwrap();
        let ut = fiber_rescale(&u, 1.05);
        for (r, v) in g.nodes().iter().zip(ut.values()) {
            let s = 1.05 * r;
            assert!((v - 1.05 * 1.05 * (-s * s / 4.0).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn fiber_rescale_of_gaussian() {
        let g = make_grid(2001, 20.0, 1.0).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (-r * r).exp()).unwrap();
        for t in [0.9, 1.1] {
            let ut = fiber_rescale(&u, t);
            for (r, v) in g.nodes().iter().zip(ut.values()) {
                let exact = t * t * (-(t * r) * (t * r)).exp();
                assert!((v - exact).abs() < 1e-9);
            }
        }
        assert_eq!(fiber_rescale(&u, 1.0), u);
    }
}
