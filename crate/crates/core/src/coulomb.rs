//! Newtonian potential `phi_u = I_2 * |u|^2` with `I_2(x) = 1/(4 pi |x|)`
//! for radial profiles, and the Coulomb self-interaction
//! `C = int (I_2 * |u|^2) |u|^2`.
//!
//! For radial charge `rho = u^2` the kernel averages to `1/max(r, s)`:
//!
//! ```text
//! phi(r) = (1/r) int_0^r rho(s) s^2 ds + int_r^inf rho(s) s ds
//! ```
//!
//! Both pieces are running quadrature sums, so the whole potential costs
//! O(n). Charge beyond `r_max` is taken to be zero.

use std::sync::Arc;

use crate::error::{Result, SpsError};
use crate::radial::{integrate, lp_power, RadialFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct CoulombPair {
    pub u: RadialFunction,
    pub phi: RadialFunction,
    /// `Q = int |u|^2`.
    pub total_charge: f64,
}

pub fn newtonian_potential(u: &RadialFunction) -> CoulombPair {
    let rho: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    CoulombPair {
        u: u.clone(),
        phi: potential_of_density(u, &rho),
        total_charge: lp_power(u, 2.0).expect("q = 2"),
    }
}

/// Potential generated by the radial density `rho` sampled on `like`'s grid.
pub(crate) fn potential_of_density(like: &RadialFunction, rho: &[f64]) -> RadialFunction {
    let grid = like.grid();
    let r = grid.nodes();
    let inner: Vec<f64> = rho.iter().zip(r).map(|(p, r)| p * r * r).collect();
    let outer: Vec<f64> = rho.iter().zip(r).map(|(p, r)| p * r).collect();
    let enclosed = grid.cumulative(&inner);
    let beyond = grid.cumulative_from_end(&outer);
    let values = (0..grid.n())
        .map(|i| {
            if i == 0 {
                beyond[0]
            } else {
                enclosed[i] / r[i] + beyond[i]
            }
        })
        .collect();
    RadialFunction::new(Arc::clone(grid), values).expect("finite potential")
}

/// `C = int phi_u |u|^2`.
pub fn coulomb_energy(u: &RadialFunction) -> f64 {
    let pair = newtonian_potential(u);
    coulomb_energy_of_pair(&pair)
}

pub(crate) fn coulomb_energy_of_pair(pair: &CoulombPair) -> f64 {
    let integrand = RadialFunction::new(
        Arc::clone(pair.u.grid()),
        pair.u
            .values()
            .iter()
            .zip(pair.phi.values())
            .map(|(u, p)| p * u * u)
            .collect(),
    )
    .expect("finite integrand");
    integrate(&integrand)
}

/// Direct double quadrature of `int int rho(x) rho(y) / (4 pi |x-y|)` with
/// the radially averaged kernel `1/max(r, s)`. O(n^2); independent of the
/// running-sum route used by [`coulomb_energy`]. Each inner integral is split
/// at the kink `s = r` and integrated by closed Newton-Cotes rules on both
/// sides.
pub fn brute_force_coulomb(u: &RadialFunction) -> Result<f64> {
    let grid = u.grid();
    let n = grid.n();
    if n > 512 {
        return Err(SpsError::OracleTooLarge(n));
    }
    let r = grid.nodes();
    let jac = grid.jac();
    let rho: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let inner_fn: Vec<f64> = (0..n).map(|j| rho[j] * r[j] * r[j] * jac[j]).collect();
    let outer_fn: Vec<f64> = (0..n).map(|j| rho[j] * r[j] * jac[j]).collect();
    let outer_w = newton_cotes(n);
    let mut total = 0.0;
    for i in 1..n {
        if rho[i] == 0.0 {
            continue;
        }
        let below = newton_cotes(i + 1);
        let above = newton_cotes(n - i);
        let near: f64 = (0..=i).map(|j| below[j] * inner_fn[j]).sum::<f64>() / r[i];
        let far: f64 = (i..n).map(|j| above[j - i] * outer_fn[j]).sum();
        total += outer_w[i] * inner_fn[i] * (near + far);
    }
    Ok(4.0 * std::f64::consts::PI * total)
}

/// Closed composite Newton-Cotes weights for `m` equally spaced points.
fn newton_cotes(m: usize) -> Vec<f64> {
    let mut w = vec![0.0; m];
    match m {
        0 | 1 => return w,
        2 => return vec![0.5, 0.5],
        _ => {}
    }
    let intervals = m - 1;
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
