//! Self-consistent-field cross-check for the descent solver.
//!
//! With the potential frozen, the radial equation
//! `-u'' - (2/r) u' + (eps + k phi) u = u^(p-1)` is a local ODE whose
//! positive decaying solution is found by shooting on `u(0)`. The potential
//! is then rebuilt from the new profile and the two steps alternate with
//! damped mixing.

use std::sync::Arc;

use crate::coulomb::newtonian_potential;
use crate::error::{Result, SpsError};
use crate::functionals::{breakdown_with_pair, energy, nehari, pohozaev_identity, ProblemParams};
use crate::interp::lagrange_even;
use crate::radial::{RadialFunction, RadialGrid};
use crate::solver::{equation_residual, initial_profile, Residuals, Solution, SolverConfig};

/// Relative gap between the bracketing trajectories at which shooting
/// hands over to the asymptotic tail.
const SPLIT: f64 = 1e-6;

/// Smallest mixing weight tried before giving up.
const MIN_MIXING: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    /// Crossed zero: the shot started too high.
    Over,
    /// Turned back up while still positive: too low.
    Under,
    Decayed,
}

struct Shot {
    u: Vec<f64>,
    fate: Fate,
}

/// Frozen-potential shooting problem on a fixed grid.
struct Shooter<'a> {
    grid: &'a RadialGrid,
    /// `eps + k phi` at the nodes.
    potential: Vec<f64>,
    p: f64,
}

impl Shooter<'_> {
    fn potential_at(&self, r: f64) -> f64 {
        lagrange_even(&self.potential, self.grid.index_of(r))
    }

    fn rhs(&self, r: f64, u: f64, w: f64) -> (f64, f64) {
        let v = self.potential_at(r);
        (w, -2.0 * w / r + v * u - u.abs().powf(self.p - 2.0) * u)
    }

    /// Integrates from the origin with `u(0) = a` until the trajectory
    /// declares itself or the grid ends.
    fn shoot(&self, a: f64) -> Shot {
        let r = self.grid.nodes();
        let n = r.len();
        let mut u = vec![0.0; n];
        u[0] = a;
        let f0 = (self.potential[0] - a.abs().powf(self.p - 2.0)) * a;
        let mut y = a + f0 * r[1] * r[1] / 6.0;
        let mut w = f0 * r[1] / 3.0;
        u[1] = y;
        for i in 1..n - 1 {
            let (r0, h) = (r[i], r[i + 1] - r[i]);
            let (k1u, k1w) = self.rhs(r0, y, w);
            let (k2u, k2w) = self.rhs(r0 + h / 2.0, y + h / 2.0 * k1u, w + h / 2.0 * k1w);
            let (k3u, k3w) = self.rhs(r0 + h / 2.0, y + h / 2.0 * k2u, w + h / 2.0 * k2w);
            let (k4u, k4w) = self.rhs(r0 + h, y + h * k3u, w + h * k3w);
            y += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            u[i + 1] = y;
            if y <= 0.0 {
                return Shot { u, fate: Fate::Over };
            }
            if w > 0.0 {
                return Shot { u, fate: Fate::Under };
            }
        }
        Shot {
            u,
            fate: Fate::Decayed,
        }
    }

    /// Positive decaying solution: bisection on `u(0)` to machine
    /// precision, the common part of the bracketing trajectories, and the
    /// tail `u_c (r_c / r) exp(-k (r - r_c))` with `k^2` the potential at
    /// the splice point `r_c`.
    fn solve(&self, guess: f64) -> Result<Vec<f64>> {
        let floor = self.potential[0].max(0.0).powf(1.0 / (self.p - 2.0));
        let mut lo = floor;
        let mut hi = guess.max(2.0 * floor).max(1e-3);
        // widen until the upper end overshoots
        let mut tries = 0;
        while self.shoot(hi).fate != Fate::Over {
            lo = hi;
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(SpsError::ScfStagnation(0));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.shoot(mid).fate {
                Fate::Over => hi = mid,
                _ => lo = mid,
            }
        }
        let low = self.shoot(lo).u;
        let high = self.shoot(hi).u;
        let r = self.grid.nodes();
        let n = r.len();
        let mut cut = 1;
        while cut + 1 < n - 1 {
            let a = low[cut + 1];
            let b = high[cut + 1];
            if !(a > 0.0 && b > 0.0) || (a - b).abs() > SPLIT * a.min(b) {
                break;
            }
            cut += 1;
        }
        let mut u: Vec<f64> = (0..n)
            .map(|i| if i <= cut { 0.5 * (low[i] + high[i]) } else { 0.0 })
            .collect();
        let (rc, uc) = (r[cut], u[cut]);
        let k = self.potential[cut].max(0.0).sqrt();
        for i in cut + 1..n - 1 {
            u[i] = uc * rc / r[i] * (-k * (r[i] - rc)).exp();
        }
        u[n - 1] = 0.0;
        Ok(u)
    }
}

/// Ground state by SCF iteration with shooting; independent of the
/// descent solver apart from the shared quadratures.
pub fn scf_cross_check(params: &ProblemParams, config: &SolverConfig) -> Result<Solution> {
    params.validate()?;
    config.validate()?;
    if params.eps <= 0.0 {
        return Err(SpsError::ShootingNeedsMass);
    }
    let grid = config.grid.build()?;
    let tol = config.tol_residual.max(1e-9);
    let mut u = initial_profile(&grid, &config.init)?;
    let mut beta = 0.5;
    let mut last_change = f64::INFINITY;
    for iter in 0..config.max_iters {
        let phi = newtonian_potential(&u).phi;
        let shooter = Shooter {
            grid: &grid,
            potential: phi
                .values()
                .iter()
                .map(|f| params.eps + params.coupling * f)
                .collect(),
            p: params.p,
        };
        let target = shooter.solve(u.values()[0])?;
        let size = u.sup_norm().max(f64::MIN_POSITIVE);
        let change = target
            .iter()
            .zip(u.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / size;
        if change < tol {
            let u = RadialFunction::new(Arc::clone(&grid), target)?;
            return Ok(measure(params, u, iter + 1));
        }
        if change > last_change {
            beta *= 0.5;
            if beta < MIN_MIXING {
                return Err(SpsError::ScfStagnation(iter + 1));
            }
        }
        last_change = change;
        let mixed = u
            .values()
            .iter()
            .zip(&target)
            .map(|(a, b)| (1.0 - beta) * a + beta * b)
            .collect();
        u = RadialFunction::new(Arc::clone(&grid), mixed)?;
    }
    Err(SpsError::ScfStagnation(config.max_iters))
}

fn measure(params: &ProblemParams, u: RadialFunction, iters: usize) -> Solution {
    let pair = newtonian_potential(&u);
    let bd = breakdown_with_pair(&u, &pair, params.p);
    let coupled = bd.with_coulomb_coupling(params.coupling);
    let scale = coupled.scale();
    let (res, res_scale) = equation_residual(&u, &pair.phi, params);
    let ode = res.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / res_scale;
    Solution {
        params: *params,
        m: energy(&coupled, params.eps),
        residuals: Residuals {
            nehari: nehari(&coupled, params.eps) / scale,
            pohozaev: pohozaev_identity(&coupled, params.eps) / scale,
            ode_sup: ode,
        },
        u,
        phi: pair.phi,
        bd,
        iters,
        converged: true,
        min_m_functional: crate::functionals::m_functional(&bd),
    }
}
