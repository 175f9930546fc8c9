//! Positive radial ground states of
//!
//! ```text
//! -Lap v + eps v + k (I_2 * v^2) v = v^(p-1)
//! ```
//!
//! by Sobolev-preconditioned gradient descent on the Pohozaev manifold.
//! Every iterate is pushed back onto the manifold along its fiber
//! `t^2 v(t r)`, so the descent minimizes the fiber maximum
//! `J(v) = max_t I(v_t)` whose minimizers are the ground states.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coulomb::{newtonian_potential, potential_of_density, CoulombPair};
use crate::error::{Result, SpsError};
use crate::functionals::{
    breakdown_with_pair, energy, fiber_energy, fiber_project, m_functional, nehari,
    pohozaev_identity, pohozaev_manifold, EnergyBreakdown, ProblemParams,
};
use crate::interp::{fiber_rescale, resample_onto};
use crate::radial::{laplacian, make_grid, RadialFunction, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    pub stretch: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 4096,
            r_max: 40.0,
            stretch: 1.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        make_grid(self.n, self.r_max, self.stretch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Gaussian { amplitude: f64, width: f64 },
    /// Profile CSV (`r,value`) or a solution JSON document.
    FromFile(PathBuf),
    Continuation(Box<Solution>),
}

impl Default for Init {
    fn default() -> Self {
        Init::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentParams {
    pub initial_step: f64,
    pub backtrack: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub growth: f64,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams {
            initial_step: 0.5,
            backtrack: 0.5,
            min_step: 1e-8,
            max_step: 1.5,
            growth: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub tol_residual: f64,
    pub max_iters: usize,
    pub init: Init,
    pub descent: DescentParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid: GridSpec::default(),
            tol_residual: 1e-8,
            max_iters: 200_000,
            init: Init::default(),
            descent: DescentParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(SpsError::BadConfig("tol_residual must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(SpsError::BadConfig("max_iters must be >= 1".into()));
        }
        let d = &self.descent;
        if !(d.initial_step > 0.0 && d.backtrack > 0.0 && d.backtrack < 1.0 && d.min_step > 0.0)
        {
            return Err(SpsError::BadConfig("invalid descent parameters".into()));
        }
        Ok(())
    }
}

/// Relative residuals: the two integral identities are divided by
/// `A + B + C + D`, the pointwise equation residual by the sup of the
/// magnitudes of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub nehari: f64,
    pub pohozaev: f64,
    pub ode_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub params: ProblemParams,
    pub u: RadialFunction,
    pub phi: RadialFunction,
    /// Raw integrals; the coupling is applied when forming energies.
    pub bd: EnergyBreakdown,
    pub m: f64,
    pub residuals: Residuals,
    pub iters: usize,
    pub converged: bool,
    /// Smallest `M(u) = A + C` seen over the manifold iterates.
    pub min_m_functional: f64,
}

impl Solution {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    /// Breakdown with the coupling folded into `C`.
    pub fn coupled(&self) -> EnergyBreakdown {
        self.bd.with_coulomb_coupling(self.params.coupling)
    }
}

/// Pointwise residual `-Lap u + eps u + k phi u - u^(p-1)` and the scale it
/// is measured against. The Dirichlet node is excluded.
pub(crate) fn equation_residual(
    u: &RadialFunction,
    phi: &RadialFunction,
    params: &ProblemParams,
) -> (Vec<f64>, f64) {
    let lap = laplacian(u);
    let n = u.values().len();
    let mut res = vec![0.0; n];
    let mut scale = 0.0_f64;
    for i in 0..n - 1 {
        let v = u.values()[i];
        let nl = v.abs().powf(params.p - 2.0) * v;
        let terms = [
            -lap.values()[i],
            params.eps * v,
            params.coupling * phi.values()[i] * v,
            -nl,
        ];
        res[i] = terms.iter().sum();
        scale = scale.max(terms.iter().map(|t| t.abs()).sum());
    }
    (res, scale)
}

/// Solves `(-Lap + shift) x = b` with the second-order radial Laplacian
/// and Dirichlet data at `r_max` (tridiagonal, Thomas algorithm).
pub(crate) fn precondition(grid: &RadialGrid, shift: f64, b: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let m = n - 1; // unknowns 0..n-2
    let r = grid.nodes();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    // origin: -Lap u ~ 6 (u0 - u1) / r1^2
    let c0 = 6.0 / (r[1] * r[1]);
    diag[0] = c0 + shift;
    upper[0] = -c0;
    for i in 1..m {
        let rm = 0.5 * (r[i - 1] + r[i]);
        let rp = 0.5 * (r[i] + r[i + 1]);
        let hm = r[i] - r[i - 1];
        let hp = r[i + 1] - r[i];
        let vol = r[i] * r[i] * 0.5 * (hm + hp);
        let a = rm * rm / hm / vol;
        let c = rp * rp / hp / vol;
        lower[i] = -a;
        diag[i] = a + c + shift;
        upper[i] = if i + 1 < m { -c } else { 0.0 };
    }
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    cp[0] = upper[0] / diag[0];
    dp[0] = b[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / den;
        dp[i] = (b[i] - lower[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// A descent iterate. `u` itself need not lie on the manifold; `t` is its
/// fiber maximizer, so the manifold point it stands for is `u_t`.
#[derive(Clone)]
struct Iterate {
    u: RadialFunction,
    pair: CoulombPair,
    bd: EnergyBreakdown,
    t: f64,
    /// `J(u) = I(u_t)`.
    level: f64,
}

impl Iterate {
    fn new(u: RadialFunction, params: &ProblemParams) -> Result<Self> {
        let pair = newtonian_potential(&u);
        let bd = breakdown_with_pair(&u, &pair, params.p);
        if !(bd.d > 1e-280) {
            return Err(SpsError::Collapse);
        }
        let coupled = bd.with_coulomb_coupling(params.coupling);
        let t = fiber_project(&coupled, params.eps)?;
        let level = fiber_energy(&coupled, params.eps, t)?;
        Ok(Iterate {
            u,
            pair,
            bd,
            t,
            level,
        })
    }

    /// Resamples `u_t` onto the grid when the fiber parameter has drifted
    /// by more than `drift`.
    fn settle(self, params: &ProblemParams, drift: f64) -> Result<Self> {
        if (self.t - 1.0).abs() <= drift {
            return Ok(self);
        }
        Iterate::new(clean(fiber_rescale(&self.u, self.t)), params)
    }

    /// Gradient of `J` at `u`, divided by `t^3`, together with the relative
    /// sup residual of the equation at `u_t`. Pulling the equation back
    /// along the fiber turns `G(u_t)(r)` into `t^4 g(t r)`, so both share
    /// the same relative size.
    fn gradient(&self, params: &ProblemParams) -> (Vec<f64>, f64) {
        let t = self.t;
        let lap = laplacian(&self.u);
        let phi = self.pair.phi.values();
        let mass = params.eps / (t * t);
        let gain = t.powf(2.0 * params.p - 6.0);
        let n = self.u.values().len();
        let mut g = vec![0.0; n];
        let mut scale = 0.0_f64;
        for i in 0..n - 1 {
            let v = self.u.values()[i];
            let terms = [
                -lap.values()[i],
                mass * v,
                params.coupling * phi[i] * v,
                -gain * v.abs().powf(params.p - 2.0) * v,
            ];
            g[i] = terms.iter().sum();
            scale = scale.max(terms.iter().map(|x| x.abs()).sum());
        }
        let sup = sup_abs(&g) / scale.max(f64::MIN_POSITIVE);
        (g, sup)
    }
}

fn clean(u: RadialFunction) -> RadialFunction {
    let grid = Arc::clone(u.grid());
    let mut v = u.into_values();
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
    let n = v.len();
    v[n - 1] = 0.0;
    RadialFunction::new(grid, v).expect("finite")
}

pub(crate) fn initial_profile(grid: &Arc<RadialGrid>, init: &Init) -> Result<RadialFunction> {
    let values = match init {
        Init::Gaussian { amplitude, width } => {
            if !(*amplitude > 0.0 && *width > 0.0) {
                return Err(SpsError::BadConfig(
                    "gaussian amplitude and width must be positive".into(),
                ));
            }
            grid.nodes()
                .iter()
                .map(|r| amplitude * (-(r / width) * (r / width)).exp())
                .collect()
        }
        Init::Continuation(prev) => {
            let g = prev.grid();
            if **g == **grid {
                prev.u.values().to_vec()
            } else {
                resample_onto(g.nodes(), prev.u.values(), grid)
            }
        }
        Init::FromFile(path) => {
            let (x, y) = crate::io::read_profile_file(path)?;
            resample_onto(&x, &y, grid)
        }
    };
    RadialFunction::new(Arc::clone(grid), values).map(clean)
}

/// Fiber drift tolerated before an iterate is resampled onto the manifold.
const DRIFT: f64 = 1e-3;

/// Relative equation residual below which descent hands over to Newton.
const NEWTON_SWITCH: f64 = 1e-4;

/// Descent solver for the ground state.
///
/// Descent runs until the equation residual falls below [`NEWTON_SWITCH`]
/// or the line search stalls; Newton steps on the discrete equation then
/// finish the job, since `J` is flat to rounding near its minimum.
pub fn ground_state(params: &ProblemParams, config: &SolverConfig) -> Result<Solution> {
    ground_state_observed(params, config, &mut |_| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Descent,
    Newton,
}

/// Snapshot handed to the observer once per iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iter: usize,
    pub phase: Phase,
    /// `J` of the iterate: the energy of its manifold point.
    pub level: f64,
    pub ode_sup: f64,
    /// `A + C` of the manifold point.
    pub m_functional: f64,
}

/// [`ground_state`] reporting every iterate to `observer`.
pub fn ground_state_observed(
    params: &ProblemParams,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&Progress),
) -> Result<Solution> {
    params.validate()?;
    config.validate()?;
    let grid = config.grid.build()?;
    let u0 = initial_profile(&grid, &config.init)?;
    let mut it = Iterate::new(u0, params)?.settle(params, 0.0)?;
    let shift = params.eps.max(1.0);
    let d = config.descent;
    let tol = config.tol_residual;
    let mut step = d.initial_step;
    let mut min_m = m_functional(&it.bd.scaled(it.t));
    let mut iters = 0;

    while iters < config.max_iters {
        let (g, ode_sup) = it.gradient(params);
        observer(&Progress {
            iter: iters,
            phase: Phase::Descent,
            level: it.level,
            ode_sup,
            m_functional: m_functional(&it.bd.scaled(it.t)),
        });
        if ode_sup < NEWTON_SWITCH.max(tol) {
            break;
        }
        let dir = precondition(&grid, shift, &g);
        let mut accepted = None;
        while step >= d.min_step {
            let trial: Vec<f64> = it
                .u
                .values()
                .iter()
                .zip(&dir)
                .map(|(u, g)| u - step * g)
                .collect();
            let trial = clean(RadialFunction::new(Arc::clone(&grid), trial)?);
            match Iterate::new(trial, params) {
                Ok(next) if next.level <= it.level => {
                    accepted = Some(next);
                    break;
                }
                Ok(_) | Err(SpsError::ZeroProfile) | Err(SpsError::Collapse) => {
                    step *= d.backtrack;
                }
                Err(e) => return Err(e),
            }
        }
        let Some(next) = accepted else { break };
        it = next.settle(params, DRIFT)?;
        min_m = min_m.min(m_functional(&it.bd.scaled(it.t)));
        step = (step * d.growth).min(d.max_step);
        iters += 1;
    }

    let it = it.settle(params, 1e-14)?;
    let (it, newton_iters) =
        polish(params, it, tol, config.max_iters - iters, &mut min_m, observer)?;
    iters += newton_iters;
    let sol = finish(params, it, iters, min_m);
    let r = sol.residuals;
    if r.ode_sup < tol && r.nehari.abs() < tol && r.pohozaev.abs() < tol {
        Ok(Solution {
            converged: true,
            ..sol
        })
    } else {
        Err(not_converged(sol, iters))
    }
}

/// Newton iteration for the discrete equation, each linear solve by GMRES
/// preconditioned with the tridiagonal operator. Steps are halved until the
/// residual drops; returns when it is below `tol` or stops improving.
fn polish(
    params: &ProblemParams,
    mut it: Iterate,
    tol: f64,
    budget: usize,
    min_m: &mut f64,
    observer: &mut dyn FnMut(&Progress),
) -> Result<(Iterate, usize)> {
    let grid = Arc::clone(it.u.grid());
    let shift = params.eps.max(1.0);
    let (mut res, scale) = equation_residual(&it.u, &it.pair.phi, params);
    let mut ode = sup_abs(&res) / scale;
    let mut steps = 0;
    while steps < budget.min(MAX_NEWTON) && ode >= 0.1 * tol {
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let lin = crate::krylov::gmres(
            |v| linearized(&it, params, v),
            |v| precondition(&grid, shift, v),
            &rhs,
            1e-10,
            60,
            600,
        );
        if !(lin.relative_residual < 1e-3) {
            break;
        }
        let mut damping = 1.0;
        let mut next = None;
        while damping >= 1.0 / 64.0 {
            let trial: Vec<f64> = it
                .u
                .values()
                .iter()
                .zip(&lin.x)
                .map(|(u, dx)| u + damping * dx)
                .collect();
            let cand = Iterate::new(clean(RadialFunction::new(Arc::clone(&grid), trial)?), params)?;
            let (r2, s2) = equation_residual(&cand.u, &cand.pair.phi, params);
            let o2 = sup_abs(&r2) / s2;
            if o2 < ode {
                next = Some((cand, r2, o2));
                break;
            }
            damping *= 0.5;
        }
        let Some((cand, r2, o2)) = next else { break };
        observer(&Progress {
            iter: steps,
            phase: Phase::Newton,
            level: cand.level,
            ode_sup: o2,
            m_functional: m_functional(&cand.bd.scaled(cand.t)),
        });
        it = cand;
        res = r2;
        ode = o2;
        *min_m = min_m.min(m_functional(&it.bd.scaled(it.t)));
        steps += 1;
    }
    Ok((it, steps))
}

const MAX_NEWTON: usize = 40;

/// Derivative of the equation residual at `it.u` applied to `v`; the
/// Dirichlet row is the identity.
fn linearized(it: &Iterate, params: &ProblemParams, v: &[f64]) -> Vec<f64> {
    let grid = it.u.grid();
    let vf = RadialFunction::new(Arc::clone(grid), v.to_vec()).expect("finite direction");
    let lap = laplacian(&vf);
    let u = it.u.values();
    let phi = it.pair.phi.values();
    let drho: Vec<f64> = u.iter().zip(v).map(|(a, b)| 2.0 * a * b).collect();
    let dphi = potential_of_density(&it.u, &drho);
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        out[i] = -lap.values()[i] + params.eps * v[i]
            + params.coupling * (phi[i] * v[i] + dphi.values()[i] * u[i])
            - (params.p - 1.0) * u[i].abs().powf(params.p - 2.0) * v[i];
    }
    out[n - 1] = v[n - 1];
    out
}

fn not_converged(sol: Solution, iters: usize) -> SpsError {
    SpsError::NotConverged {
        iters,
        ode_sup: sol.residuals.ode_sup,
        best: Box::new(sol),
    }
}


fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Measures an iterate from scratch.
fn finish(params: &ProblemParams, it: Iterate, iters: usize, min_m: f64) -> Solution {
    let coupled = it.bd.with_coulomb_coupling(params.coupling);
    let scale = coupled.scale();
    let (res, res_scale) = equation_residual(&it.u, &it.pair.phi, params);
    Solution {
        params: *params,
        m: energy(&coupled, params.eps),
        residuals: Residuals {
            nehari: nehari(&coupled, params.eps) / scale,
            pohozaev: pohozaev_identity(&coupled, params.eps) / scale,
            ode_sup: sup_abs(&res) / res_scale.max(f64::MIN_POSITIVE),
        },
        u: it.u,
        phi: it.pair.phi,
        bd: it.bd,
        iters,
        converged: false,
        min_m_functional: min_m,
    }
}

/// Independent residual check of a stored solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub nehari: f64,
    pub pohozaev_identity: f64,
    pub pohozaev_manifold: f64,
    pub ode_sup: f64,
    pub empty: bool,
    pub pass: bool,
}

/// Recomputes every residual from the stored profile alone.
pub fn verify(sol: &Solution, tol: f64) -> ResidualReport {
    if sol.u.is_zero() {
        return ResidualReport {
            nehari: 0.0,
            pohozaev_identity: 0.0,
            pohozaev_manifold: 0.0,
            ode_sup: 0.0,
            empty: true,
            pass: false,
        };
    }
    let params = &sol.params;
    let pair = newtonian_potential(&sol.u);
    let bd = breakdown_with_pair(&sol.u, &pair, params.p).with_coulomb_coupling(params.coupling);
    let scale = bd.scale();
    let (res, res_scale) = equation_residual(&sol.u, &pair.phi, params);
    let report = ResidualReport {
        nehari: nehari(&bd, params.eps) / scale,
        pohozaev_identity: pohozaev_identity(&bd, params.eps) / scale,
        pohozaev_manifold: pohozaev_manifold(&bd, params.eps) / scale,
        ode_sup: sup_abs(&res) / res_scale,
        empty: false,
        pass: false,
    };
    let pass = [
        report.nehari,
        report.pohozaev_identity,
        report.pohozaev_manifold,
        report.ode_sup,
    ]
    .iter()
    .all(|r| r.abs() <= tol);
    ResidualReport { pass, ..report }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SolverConfig {
        SolverConfig {
            grid: GridSpec {
                n: 2048,
                r_max: 30.0,
                stretch: 1.0,
            },
            ..SolverConfig::default()
        }
    }

    #[test]
    fn rejects_exponent_outside_range() {
        let err = ProblemParams::new(7.0, 1.0).unwrap_err();
        assert!(err.to_string().starts_with("p outside (3,6)"));
    }

    #[test]
    fn converged_state_is_positive_decreasing_and_verified() {
        let params = ProblemParams::new(4.0, 1.0).unwrap();
        let sol = ground_state(&params, &small()).unwrap();
        assert!(sol.converged && sol.m > 0.0);
        let u = sol.u.values();
        assert!(u[..u.len() - 1].iter().all(|v| *v > 0.0));
        assert!(u.windows(2).all(|w| w[1] < w[0]));
        let report = verify(&sol, 1e-8);
        assert!(report.pass, "{report:?}");
        assert!(report.pohozaev_manifold.abs() < 1e-8);
    }

    #[test]
    fn descent_never_raises_the_level() {
        let params = ProblemParams::new(4.5, 0.5).unwrap();
        let mut levels = Vec::new();
        let mut phases = Vec::new();
        ground_state_observed(&params, &small(), &mut |p| {
            phases.push(p.phase);
            if p.phase == Phase::Descent {
                levels.push(p.level);
            }
        })
        .unwrap();
        assert!(levels.len() > 3);
        assert!(levels.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(phases.last(), Some(&Phase::Newton));
    }

    #[test]
    fn perturbed_profile_fails_verification() {
        let params = ProblemParams::new(4.0, 1.0).unwrap();
        let mut sol = ground_state(&params, &small()).unwrap();
        sol.u = sol.u.map(|v| 1.1 * v);
        let report = verify(&sol, 1e-6);
        assert!(!report.pass);
        assert!(report.nehari.abs() > 1e-2 && report.nehari.abs() < 1.0);
    }

    #[test]
    fn empty_solution_is_flagged() {
        let params = ProblemParams::new(4.0, 1.0).unwrap();
        let mut sol = ground_state(&params, &small()).unwrap();
        sol.u = RadialFunction::zeros(sol.grid());
        let report = verify(&sol, 1e-6);
        assert!(report.empty && !report.pass);
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let params = ProblemParams::new(4.0, 1.0).unwrap();
        let cfg = SolverConfig {
            max_iters: 2,
            ..small()
        };
        match ground_state(&params, &cfg) {
            Err(SpsError::NotConverged { iters, best, .. }) => {
                assert_eq!(iters, 2);
                assert!(!best.converged && best.m > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn vanishing_start_collapses() {
        let params = ProblemParams::new(4.0, 1.0).unwrap();
        let cfg = SolverConfig {
            init: Init::Gaussian {
                amplitude: 1e-200,
                width: 1.0,
            },
            ..small()
        };
        assert_eq!(ground_state(&params, &cfg).unwrap_err(), SpsError::Collapse);
    }

    #[test]
    fn preconditioner_inverts_its_operator() {
        let grid = make_grid(200, 10.0, 2.0).unwrap();
        let b: Vec<f64> = grid.nodes().iter().map(|r| (-r).exp() * r.cos()).collect();
        let x = precondition(&grid, 1.5, &b);
        let r = grid.nodes();
        // apply the same tridiagonal operator and compare
        for i in 1..198 {
            let rm = 0.5 * (r[i - 1] + r[i]);
            let rp = 0.5 * (r[i] + r[i + 1]);
            let (hm, hp) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            let vol = r[i] * r[i] * 0.5 * (hm + hp);
            let ax = (rm * rm * (x[i] - x[i - 1]) / hm - rp * rp * (x[i + 1] - x[i]) / hp) / vol
                + 1.5 * x[i];
            assert!((ax - b[i]).abs() < 1e-10, "i={i}");
        }
        assert_eq!(x[199], 0.0);
    }
}
