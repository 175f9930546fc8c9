//! Radial mesh on `[0, r_max]` and the profile algebra every other module
//! is built on.
//!
//! Nodes are the images of equally spaced indices under the odd map
//! `r(s) = r_max * sinh(beta*s) / sinh(beta)`, `s = i/(n-1)`, with
//! `cosh(beta) = stretch` (the ratio of the outermost to the innermost
//! spacing). `stretch = 1` is the uniform grid. Because the map is odd, a
//! regular radial profile is even in the index variable, so finite
//! differences near the origin can use reflected values.
//!
//! All integrals carry the 3-D radial measure `4*pi*r^2 dr`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Result, SpsError};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    stretch: f64,
    nodes: Vec<f64>,
    /// dr/di at each node (index spacing 1).
    jac: Vec<f64>,
    /// d^2r/di^2 at each node.
    jac2: Vec<f64>,
    /// Composite Simpson weights in index space, times 4*pi*r^2*dr/di.
    weights: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.r_max == other.r_max && self.stretch == other.stretch
    }
}

/// Builds a grid of `n` nodes on `[0, r_max]`.
pub fn make_grid(n: usize, r_max: f64, stretch: f64) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(n, r_max, stretch).map(Arc::new)
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64, stretch: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(SpsError::NonPositiveDomain(r_max));
        }
        if !(stretch >= 1.0) || !stretch.is_finite() {
            return Err(SpsError::BadStretch(stretch));
        }
        if n < MIN_NODES {
            return Err(SpsError::TooFewNodes(n));
        }
        Ok(Self::build(n, r_max, stretch))
    }

    /// Same as [`RadialGrid::new`] without the `n >= 16` floor; used for
    /// tiny hand-checkable meshes.
    pub fn new_unchecked_size(n: usize, r_max: f64, stretch: f64) -> Result<Self> {
        if n < 5 {
            return Err(SpsError::TooFewNodes(n));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(SpsError::NonPositiveDomain(r_max));
        }
        if !(stretch >= 1.0) || !stretch.is_finite() {
            return Err(SpsError::BadStretch(stretch));
        }
        Ok(Self::build(n, r_max, stretch))
    }

    fn build(n: usize, r_max: f64, stretch: f64) -> Self {
        let m = (n - 1) as f64;
        let beta = stretch.acosh();
        let mut nodes = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        let mut jac2 = Vec::with_capacity(n);
        if beta < 1e-8 {
            let h = r_max / m;
            for i in 0..n {
                nodes.push(i as f64 * h);
                jac.push(h);
                jac2.push(0.0);
            }
        } else {
            let sb = beta.sinh();
            for i in 0..n {
                let s = i as f64 / m;
                nodes.push(r_max * (beta * s).sinh() / sb);
                jac.push(r_max * beta * (beta * s).cosh() / (sb * m));
                jac2.push(r_max * beta * beta * (beta * s).sinh() / (sb * m * m));
            }
        }
        nodes[0] = 0.0;
        nodes[n - 1] = r_max;

        let simpson = index_simpson_weights(n);
        let weights = (0..n)
            .map(|i| simpson[i] * jac[i] * 4.0 * PI * nodes[i] * nodes[i])
            .collect();

        RadialGrid {
            n,
            r_max,
            stretch,
            nodes,
            jac,
            jac2,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn stretch(&self) -> f64 {
        self.stretch
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn jac(&self) -> &[f64] {
        &self.jac
    }
    pub fn jac2(&self) -> &[f64] {
        &self.jac2
    }
    /// Quadrature weights including the `4*pi*r^2` measure.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `g(r) dr` from 0 to each node (no radial weight), by
    /// a six-point (sixth-order) rule on every index interval.
    pub fn cumulative(&self, g: &[f64]) -> Vec<f64> {
        let piece = self.interval_integrals(g);
        let mut out = Vec::with_capacity(self.n);
        let mut acc = 0.0;
        out.push(0.0);
        for v in piece {
            acc += v;
            out.push(acc);
        }
        out
    }

    /// Integral of `g(r) dr` from each node to `r_max`.
    pub fn cumulative_from_end(&self, g: &[f64]) -> Vec<f64> {
        let piece = self.interval_integrals(g);
        let mut out = vec![0.0; self.n];
        let mut acc = 0.0;
        for i in (0..self.n - 1).rev() {
            acc += piece[i];
            out[i] = acc;
        }
        out
    }

    fn interval_integrals(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let f: Vec<f64> = g.iter().zip(&self.jac).map(|(a, j)| a * j).collect();
        // quintic through six nodes; centred where the grid allows
        let rules: Vec<Vec<f64>> = (0..5)
            .map(|a| {
                let a = a as f64;
                stencil(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], |k| {
                    ((a + 1.0).powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)
                })
            })
            .collect();
        (0..n - 1)
            .map(|i| {
                let start = i.saturating_sub(2).min(n - 6);
                let w = &rules[i - start];
                (0..6).map(|j| w[j] * f[start + j]).sum()
            })
            .collect()
    }

    /// Fractional node index of radius `r` (inverse of the grid map).
    pub fn index_of(&self, r: f64) -> f64 {
        let m = (self.n - 1) as f64;
        let beta = self.stretch.acosh();
        if beta < 1e-8 {
            r / self.r_max * m
        } else {
            m * (r / self.r_max * beta.sinh()).asinh() / beta
        }
    }

    /// Index of the interval `[r_k, r_{k+1}]` containing `r` (clamped).
    pub fn locate(&self, r: f64) -> usize {
        if r <= 0.0 {
            return 0;
        }
        if r >= self.r_max {
            return self.n - 2;
        }
        match self
            .nodes
            .binary_search_by(|x| x.partial_cmp(&r).expect("finite node"))
        {
            Ok(k) => k.min(self.n - 2),
            Err(k) => k - 1,
        }
    }
}

/// Composite Simpson weights for unit spacing; the last three intervals use
/// the 3/8 rule when the interval count is odd.
fn index_simpson_weights(n: usize) -> Vec<f64> {
    let intervals = n - 1;
    let mut w = vec![0.0; n];
    let simpson_end = if intervals % 2 == 0 {
        intervals
    } else {
        intervals - 3
    };
    let mut k = 0;
    while k < simpson_end {
        w[k] += 1.0 / 3.0;
        w[k + 1] += 4.0 / 3.0;
        w[k + 2] += 1.0 / 3.0;
        k += 2;
    }
    if simpson_end < intervals {
        let k = simpson_end;
        w[k] += 3.0 / 8.0;
        w[k + 1] += 9.0 / 8.0;
        w[k + 2] += 9.0 / 8.0;
        w[k + 3] += 3.0 / 8.0;
    }
    w
}

/// Samples of a radial profile on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SpsError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpsError::NonFinite);
        }
        Ok(RadialFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(Arc::clone(grid), values)
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.n()],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Truncation sanity: the last sample is negligible against the peak.
    pub fn is_decaying(&self) -> bool {
        let last = self.values[self.values.len() - 1].abs();
        last <= 1e-6 * self.sup_norm()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RadialFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a*self + b*other` on a common grid.
    pub fn axpby(&self, a: f64, other: &RadialFunction, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(SpsError::GridMismatch);
        }
        Ok(RadialFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &RadialFunction) -> Result<Self> {
        self.axpby(1.0, other, -1.0)
    }

    /// Two-column CSV `r,value` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 48);
        s.push_str("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt17(*r), fmt17(*v));
        }
        s
    }

    /// Parses the CSV written by [`RadialFunction::to_csv`] onto `grid`.
    pub fn from_csv(grid: &Arc<RadialGrid>, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "r,value" => {}
            _ => {
                return Err(SpsError::Parse {
                    location: "line 1".into(),
                    message: "expected header `r,value`".into(),
                })
            }
        }
        let mut values = Vec::with_capacity(grid.n());
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or_else(|| SpsError::Parse {
                        location: format!("line {}", ln + 1),
                        message: "expected two numeric columns".into(),
                    })
            };
            let r = parse(cols.next())?;
            let v = parse(cols.next())?;
            let k = values.len();
            if k >= grid.n() || (r - grid.nodes()[k]).abs() > 1e-12 * grid.r_max() {
                return Err(SpsError::Parse {
                    location: format!("line {}", ln + 1),
                    message: format!("node {r} does not match the grid"),
                });
            }
            values.push(v);
        }
        Self::new(Arc::clone(grid), values)
    }
}

/// Decimal formatting with 17 significant digits (round-trips any f64).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `int_{R^3} f = 4*pi * int_0^{r_max} f(r) r^2 dr`.
pub fn integrate(f: &RadialFunction) -> f64 {
    f.grid
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(w, v)| w * v)
        .sum()
}

/// `int |u|^q` over R^3.
pub fn lp_power(u: &RadialFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(SpsError::BadLpExponent(q));
    }
    let w = u.grid.weights();
    Ok(if q == 2.0 {
        u.values.iter().zip(w).map(|(v, w)| w * v * v).sum()
    } else {
        u.values
            .iter()
            .zip(w)
            .map(|(v, w)| w * v.abs().powf(q))
            .sum()
    })
}

/// Weights `w` with `sum_j w_j x_j^k = moment(k)` for `k < offsets.len()`:
/// the finite-difference or quadrature rule on the given index offsets that
/// is exact for polynomials of that degree.
fn stencil(offsets: &[f64], moment: impl Fn(usize) -> f64) -> Vec<f64> {
    let m = offsets.len();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut row: Vec<f64> = offsets.iter().map(|x| x.powi(k as i32)).collect();
            row.push(moment(k));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..m).map(|k| a[k][m] / a[k][k]).collect()
}

/// Weights for the `order`-th index derivative at offset 0 (Fornberg's
/// recursion).
fn diff_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Applies derivative stencils of `width` points: centred in the interior,
/// mirrored through the origin (`u(-r) = u(r)`) when `regular`, and
/// shifted one-sided where the grid ends.
fn index_diff(u: &[f64], order: usize, width: usize, regular: bool) -> Vec<f64> {
    let n = u.len();
    let half = width / 2;
    let centred: Vec<f64> = (0..width).map(|j| j as f64 - half as f64).collect();
    let wc = diff_weights(&centred, order);
    let mut d = vec![0.0; n];
    for i in 0..n {
        let start = i as isize - half as isize;
        if start + width as isize <= n as isize && (start >= 0 || regular) {
            d[i] = (0..width)
                .map(|j| wc[j] * u[(start + j as isize).unsigned_abs()])
                .sum();
        } else {
            let start = if start < 0 { 0 } else { n - width };
            let offs: Vec<f64> = (0..width).map(|j| (start + j) as f64 - i as f64).collect();
            let w = diff_weights(&offs, order);
            d[i] = (0..width).map(|j| w[j] * u[start + j]).sum();
        }
    }
    d
}

/// Radial derivative `du/dr`.
///
/// Seven-point differences in the index variable (sixth order, which
/// includes the second-order contract), shifted one-sided stencils at the
/// ends. With `regular` set the profile is reflected evenly through the
/// origin, which pins `u'(0) = 0`.
pub fn derivative(u: &RadialFunction, regular: bool) -> RadialFunction {
    let du = index_derivative(&u.values, regular);
    let values = du
        .iter()
        .zip(u.grid.jac())
        .map(|(d, j)| d / j)
        .collect();
    RadialFunction {
        grid: Arc::clone(&u.grid),
        values,
    }
}

pub(crate) fn index_derivative(u: &[f64], regular: bool) -> Vec<f64> {
    let mut d = index_diff(u, 1, 7, regular);
    if regular {
        d[0] = 0.0;
    }
    d
}

/// Radial Laplacian `u'' + 2u'/r` of a regular profile, sixth order in the
/// interior, with `3 u''(0)` at the origin.
pub fn laplacian(u: &RadialFunction) -> RadialFunction {
    let grid = &u.grid;
    let v = &u.values;
    let n = v.len();
    let d1 = index_derivative(v, true);
    let d2 = index_diff(v, 2, 7, true);
    let nodes = grid.nodes();
    let jac = grid.jac();
    let jac2 = grid.jac2();
    let values = (0..n)
        .map(|i| {
            let urr = (d2[i] - d1[i] * jac2[i] / jac[i]) / (jac[i] * jac[i]);
            if i == 0 {
                3.0 * urr
            } else {
                urr + 2.0 * d1[i] / (jac[i] * nodes[i])
            }
        })
        .collect();
    RadialFunction {
        grid: Arc::clone(grid),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, r_max: f64) -> Arc<RadialGrid> {
        make_grid(n, r_max, 1.0).unwrap()
    }

    #[test]
    fn tiny_uniform_nodes() {
        let g = RadialGrid::new_unchecked_size(5, 4.0, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn uniform_spacing() {
        let g = uniform(16, 40.0);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 40.0 / 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(make_grid(8, 1.0, 1.0).unwrap_err(), SpsError::TooFewNodes(8));
        let e = make_grid(8, -1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("non-positive domain"));
        assert!(matches!(
            make_grid(16, 1.0, 0.5),
            Err(SpsError::BadStretch(_))
        ));
    }

    #[test]
    fn stretched_grid_invariants() {
        let g = make_grid(200, 60.0, 8.0).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[199], 60.0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        let first = x[1] - x[0];
        let last = x[199] - x[198];
        assert!((last / first - 8.0).abs() < 0.2);
    }

    #[test]
    fn integrates_exponential() {
        // the cusp of e^{-2|x|} at the origin limits Simpson to h^4 f'''(0)
        let g = uniform(4096, 40.0);
        let f = RadialFunction::from_fn(&g, |r| (-2.0 * r).exp()).unwrap();
        assert!((integrate(&f) - PI).abs() / PI < 1e-8);
        assert_eq!(integrate(&RadialFunction::zeros(&g)), 0.0);
    }

    #[test]
    fn ball_volume_both_parities() {
        for n in [64, 65] {
            let g = uniform(n, 1.0);
            let one = RadialFunction::from_fn(&g, |_| 1.0).unwrap();
            assert!((integrate(&one) - 4.0 * PI / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stretched_quadrature_is_accurate() {
        let g = make_grid(1025, 40.0, 5.0).unwrap();
        let f = RadialFunction::from_fn(&g, |r| (-2.0 * r).exp()).unwrap();
        assert!((integrate(&f) - PI).abs() / PI < 1e-7);
    }

    #[test]
    fn lp_powers_of_exponential() {
        let g = uniform(4001, 40.0);
        let u = RadialFunction::from_fn(&g, |r| (-r).exp()).unwrap();
        assert!((lp_power(&u, 2.0).unwrap() - PI).abs() / PI < 1e-8);
        assert!((lp_power(&u, 4.0).unwrap() - PI / 8.0).abs() / (PI / 8.0) < 1e-7);
        assert_eq!(lp_power(&RadialFunction::zeros(&g), 3.3).unwrap(), 0.0);
        assert!(matches!(lp_power(&u, 0.5), Err(SpsError::BadLpExponent(_))));
    }

    #[test]
    fn derivative_examples() {
        let g = uniform(401, 10.0);
        let lin = RadialFunction::from_fn(&g, |r| r).unwrap();
        let d = derivative(&lin, false);
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

        let c = RadialFunction::from_fn(&g, |_| 2.5).unwrap();
        assert!(derivative(&c, true).values().iter().all(|v| v.abs() < 1e-12));
        assert!(derivative(&c, false).values().iter().all(|v| v.abs() < 1e-12));

        let e = RadialFunction::from_fn(&g, |r| (-r).exp()).unwrap();
        let d = derivative(&e, false);
        let k = 40; // r = 1
        assert!((d.values()[k] + (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn regular_flag_pins_origin_slope() {
        let g = uniform(101, 5.0);
        let u = RadialFunction::from_fn(&g, |r| (-r * r).exp()).unwrap();
        let d = derivative(&u, true);
        assert_eq!(d.values()[0], 0.0);
        assert!((d.values()[1] - (-2.0 * 0.05 * (-0.0025f64).exp())).abs() < 1e-5);
    }

    #[test]
    fn laplacian_of_gaussian() {
        for stretch in [1.0, 4.0] {
            let g = make_grid(2001, 12.0, stretch).unwrap();
            let u = RadialFunction::from_fn(&g, |r| (-r * r).exp()).unwrap();
            let lap = laplacian(&u);
            for (r, v) in g.nodes().iter().zip(lap.values()) {
                let exact = (4.0 * r * r - 6.0) * (-r * r).exp();
                assert!((v - exact).abs() < 1e-6, "r={r} got {v} want {exact}");
            }
        }
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let g = make_grid(801, 10.0, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| r.cos()).collect();
        let c = g.cumulative(&f);
        let t = g.cumulative_from_end(&f);
        for (i, r) in g.nodes().iter().enumerate() {
            assert!((c[i] - r.sin()).abs() < 1e-8);
            assert!((t[i] - (10f64.sin() - r.sin())).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = make_grid(64, 7.0, 1.5).unwrap();
        let u = RadialFunction::from_fn(&g, |r| (1.0 + r).recip() * (-r).exp()).unwrap();
        let back = RadialFunction::from_csv(&g, &u.to_csv()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_reports_bad_rows() {
        let g = make_grid(16, 1.0, 1.0).unwrap();
        let err = RadialFunction::from_csv(&g, "r,value\n0,1\nx,2\n").unwrap_err();
        assert!(matches!(err, SpsError::Parse { ref location, .. } if location == "line 3"));
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = make_grid(16, 1.0, 1.0).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(RadialFunction::new(g, v).unwrap_err(), SpsError::NonFinite);
    }
}
