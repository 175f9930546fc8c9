//! The `lambda -> infinity` study: parameter map, rescaling, sweeps in
//! `eps` down to the zero-mass problem and the diagnostics along them, plus
//! the `lambda -> 0` local limit.
//!
//! With `eps = lambda^((p-2)/(4(3-p)))` the rescaling
//! `v(x) = lambda^(1/(2(3-p))) u(eps x)` maps ground states of
//! `-Lap u + u + lambda phi_u u = |u|^(p-2) u` onto ground states of
//! `-Lap v + eps v + phi_v v = |v|^(p-2) v`.

use std::sync::Arc;

use serde::Serialize;

use crate::coulomb::{coulomb_energy, newtonian_potential};
use crate::error::{Result, SpsError};
use crate::functionals::{
    check_exponent, fiber_energy, fiber_project, pohozaev_manifold,
    EnergyBreakdown, ProblemParams,
};
use crate::interp::lagrange_even;
use crate::radial::{derivative, integrate, lp_power, RadialFunction};
use crate::solver::{ground_state, Init, Solution, SolverConfig};

fn eps_exponent(p: f64) -> f64 {
    (p - 2.0) / (4.0 * (3.0 - p))
}

fn amplitude_exponent(p: f64) -> f64 {
    1.0 / (2.0 * (3.0 - p))
}

pub fn eps_of_lambda(lambda: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SpsError::NonPositiveLambda(lambda));
    }
    Ok(lambda.powf(eps_exponent(p)))
}

/// Inverse of [`eps_of_lambda`].
pub fn lambda_of_eps(eps: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SpsError::BadEps(eps));
    }
    Ok(eps.powf(1.0 / eps_exponent(p)))
}

/// `c f(s r)` resampled on `f`'s grid, zero beyond `r_max`.
fn dilate(f: &RadialFunction, c: f64, s: f64) -> RadialFunction {
    if c == 1.0 && s == 1.0 {
        return f.clone();
    }
    let grid = f.grid();
    let values = grid
        .nodes()
        .iter()
        .map(|r| c * lagrange_even(f.values(), grid.index_of(s * r)))
        .collect();
    RadialFunction::new(Arc::clone(grid), values).expect("finite resample")
}

/// `v(r) = lambda^(1/(2(3-p))) u(lambda^((p-2)/(4(3-p))) r)`.
pub fn rescale_u_to_v(u: &RadialFunction, lambda: f64, p: f64) -> Result<RadialFunction> {
    let eps = eps_of_lambda(lambda, p)?;
    Ok(dilate(u, lambda.powf(amplitude_exponent(p)), eps))
}

/// Inverse of [`rescale_u_to_v`].
pub fn rescale_v_to_u(v: &RadialFunction, lambda: f64, p: f64) -> Result<RadialFunction> {
    let eps = eps_of_lambda(lambda, p)?;
    Ok(dilate(v, lambda.powf(-amplitude_exponent(p)), 1.0 / eps))
}

/// `|v - w|_E` with the two halves of the convergence criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EDistance {
    /// `(A + C^(1/2))^(1/2)` of `v - w`.
    pub e_dist: f64,
    /// `|grad(v - w)|_2`.
    pub grad_dist: f64,
    /// `|grad(phi_v - phi_w)|_2`.
    pub potential_grad_dist: f64,
}

pub fn e_distance(v: &RadialFunction, w: &RadialFunction) -> Result<EDistance> {
    let d = v.sub(w)?;
    let a = lp_power(&derivative(&d, true), 2.0)?;
    let c = coulomb_energy(&d);
    // |grad psi|^2 = int psi (-Lap psi) with psi = phi_v - phi_w
    let dphi = newtonian_potential(v).phi.sub(&newtonian_potential(w).phi)?;
    let drho: Vec<f64> = v
        .values()
        .iter()
        .zip(w.values())
        .zip(dphi.values())
        .map(|((a, b), f)| f * (a * a - b * b))
        .collect();
    let pot = integrate(&RadialFunction::new(Arc::clone(v.grid()), drho)?);
    Ok(EDistance {
        e_dist: (a + c.sqrt()).sqrt(),
        grad_dist: a.sqrt(),
        potential_grad_dist: pot.max(0.0).sqrt(),
    })
}

/// Values at or below this fraction of the peak count as underflowed.
const TAIL_FLOOR: f64 = 1e-250;

/// Least-squares slope of `-log u` over `[0.5, 0.8] r_max`, or over
/// `[0.25, 0.5] r_max` when the tail has underflowed there.
pub fn decay_rate(u: &RadialFunction) -> Result<f64> {
    let r_max = u.grid().r_max();
    fit_tail(u, 0.5 * r_max, 0.8 * r_max)
        .or_else(|_| fit_tail(u, 0.25 * r_max, 0.5 * r_max))
}

fn fit_tail(u: &RadialFunction, from: f64, to: f64) -> Result<f64> {
    let floor = TAIL_FLOOR * u.sup_norm();
    let mut pts = Vec::new();
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        if *r >= from && *r <= to {
            if !(*v > floor) {
                return Err(SpsError::TailUnderflow);
            }
            pts.push((*r, -v.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(SpsError::TailUnderflow);
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Ok(sxy / sxx)
}

/// Where `v_eps` lands when projected onto the zero-mass manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProjection {
    pub t_proj: f64,
    pub energy_at_projection: f64,
}

/// Fiber projection of a solution with `eps > 0` onto the zero-mass
/// manifold and the zero-mass energy there.
pub fn project_to_limit_manifold(v: &Solution) -> Result<LimitProjection> {
    if !(v.params.eps > 0.0) {
        return Err(SpsError::ZeroMassProjection);
    }
    let bd = v.coupled();
    let t = fiber_project(&bd, 0.0)?;
    Ok(LimitProjection {
        t_proj: t,
        energy_at_projection: fiber_energy(&bd, 0.0, t)?,
    })
}

/// `P_0` of a breakdown, which at a solution of the eps-problem equals
/// `-eps B / 2`.
pub fn zero_mass_pohozaev(bd: &EnergyBreakdown) -> f64 {
    pohozaev_manifold(bd, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub lambda: Option<f64>,
    pub m_eps: f64,
    pub gap: f64,
    pub eps_times_b: f64,
    pub t_proj: f64,
    pub e_dist: f64,
    pub decay_rate: f64,
    pub energy_at_projection: f64,
    pub grad_dist: f64,
    pub potential_grad_dist: f64,
    pub converged: bool,
    pub iters: usize,
    pub min_m_functional: f64,
    /// Solver message when the row did not converge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Pass/fail of each sweep invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepFlags {
    pub sorted_descending: bool,
    pub gap_positive: bool,
    pub gap_monotone: bool,
    pub eps_times_b_monotone: bool,
    pub t_proj_monotone: bool,
    pub e_dist_monotone: bool,
    pub t_proj_in_unit_interval: bool,
    pub projection_sandwich: bool,
    pub slope_in_range: bool,
    pub reference_on_manifold: bool,
    pub all_converged: bool,
}

impl SweepFlags {
    pub fn all(&self) -> bool {
        [
            self.sorted_descending,
            self.gap_positive,
            self.gap_monotone,
            self.eps_times_b_monotone,
            self.t_proj_monotone,
            self.e_dist_monotone,
            self.t_proj_in_unit_interval,
            self.projection_sandwich,
            self.slope_in_range,
            self.reference_on_manifold,
            self.all_converged,
        ]
        .iter()
        .all(|f| *f)
    }
}

/// Slack allowed when checking that a diagnostic shrinks along the sweep.
pub const MONOTONE_SLACK: f64 = 0.05;

/// Accepted range of the fitted `log gap / log eps` slope.
pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub p: f64,
    /// Descending in `eps`, ending with the `eps = 0` row.
    pub rows: Vec<SweepRow>,
    pub m_inf: f64,
    /// Slope of `log gap` against `log eps` over the three smallest
    /// positive `eps`.
    pub slope: Option<f64>,
    /// Smallest `A + C` over every manifold iterate of every solve.
    pub eta: f64,
    pub reference: Solution,
    pub flags: SweepFlags,
    /// Some row failed to converge.
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Start each solve from the neighbouring `eps` (sequential).
    pub continuation: bool,
    /// Worker threads for rows when continuation is off.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            continuation: true,
            jobs: 1,
        }
    }
}

pub fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 2 {
        return Err(SpsError::BadEpsList(
            "need at least one positive eps followed by 0".into(),
        ));
    }
    if eps_list.last() != Some(&0.0) {
        return Err(SpsError::BadEpsList("last entry must be 0".into()));
    }
    if eps_list.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(SpsError::BadEpsList("entries must be finite and >= 0".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SpsError::BadEpsList("entries must strictly decrease".into()));
    }
    Ok(())
}

/// Non-converged solves are kept with their best iterate and a note.
fn solve_row(params: &ProblemParams, config: &SolverConfig) -> Result<Solution> {
    match ground_state(params, config) {
        Ok(s) => Ok(s),
        Err(SpsError::NotConverged { best, .. }) => Ok(*best),
        Err(e) => Err(e),
    }
}

/// Solves `eps = 0` first, then the positive `eps` in ascending order, and
/// fills in every diagnostic against the zero-mass reference.
pub fn sweep(
    p: f64,
    eps_list: &[f64],
    config: &SolverConfig,
    options: SweepOptions,
) -> Result<SweepReport> {
    check_exponent(p)?;
    check_eps_list(eps_list)?;
    let reference = solve_row(&ProblemParams::new(p, 0.0)?, config)?;
    let positive: Vec<f64> = eps_list.iter().rev().skip(1).copied().collect();

    let solutions: Vec<Solution> = if options.continuation {
        let mut out: Vec<Solution> = Vec::with_capacity(positive.len());
        for &eps in &positive {
            let prev = out.last().unwrap_or(&reference);
            let cfg = SolverConfig {
                init: Init::Continuation(Box::new(prev.clone())),
                ..config.clone()
            };
            out.push(solve_row(&ProblemParams::new(p, eps)?, &cfg)?);
        }
        out
    } else {
        solve_parallel(p, &positive, config, options.jobs.max(1))?
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    for sol in solutions.iter().rev() {
        rows.push(diagnose(sol, &reference)?);
    }
    rows.push(reference_row(&reference)?);
    let slope = fit_slope(&rows);
    let eta = solutions
        .iter()
        .chain(std::iter::once(&reference))
        .map(|s| s.min_m_functional)
        .fold(f64::INFINITY, f64::min);
    let flags = check_rows(&rows, slope, &reference, config.tol_residual);
    Ok(SweepReport {
        p,
        partial: rows.iter().any(|r| !r.converged),
        m_inf: reference.m,
        rows,
        slope,
        eta,
        reference,
        flags,
    })
}

fn solve_parallel(
    p: f64,
    eps: &[f64],
    config: &SolverConfig,
    jobs: usize,
) -> Result<Vec<Solution>> {
    let chunk = eps.len().div_ceil(jobs).max(1);
    let results: Vec<Result<Vec<Solution>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&e| solve_row(&ProblemParams::new(p, e)?, config))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(eps.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn note(sol: &Solution) -> Option<String> {
    (!sol.converged).then(|| {
        format!(
            "not converged after {} iterations (ode residual {:e})",
            sol.iters, sol.residuals.ode_sup
        )
    })
}

fn diagnose(sol: &Solution, reference: &Solution) -> Result<SweepRow> {
    let eps = sol.params.eps;
    let proj = project_to_limit_manifold(sol)?;
    let dist = e_distance(&sol.u, &reference.u)?;
    Ok(SweepRow {
        eps,
        lambda: Some(lambda_of_eps(eps, sol.params.p)?),
        m_eps: sol.m,
        gap: sol.m - reference.m,
        eps_times_b: eps * sol.bd.b,
        t_proj: proj.t_proj,
        e_dist: dist.e_dist,
        decay_rate: decay_rate(&sol.u).unwrap_or(f64::NAN),
        energy_at_projection: proj.energy_at_projection,
        grad_dist: dist.grad_dist,
        potential_grad_dist: dist.potential_grad_dist,
        converged: sol.converged,
        iters: sol.iters,
        min_m_functional: sol.min_m_functional,
        note: note(sol),
    })
}

fn reference_row(reference: &Solution) -> Result<SweepRow> {
    Ok(SweepRow {
        eps: 0.0,
        lambda: None,
        m_eps: reference.m,
        gap: 0.0,
        eps_times_b: 0.0,
        t_proj: fiber_project(&reference.coupled(), 0.0)?,
        e_dist: 0.0,
        decay_rate: decay_rate(&reference.u).unwrap_or(f64::NAN),
        energy_at_projection: reference.m,
        grad_dist: 0.0,
        potential_grad_dist: 0.0,
        converged: reference.converged,
        iters: reference.iters,
        min_m_functional: reference.min_m_functional,
        note: note(reference),
    })
}

/// Least-squares slope of `log gap` against `log eps` over the three
/// smallest positive `eps`.
pub fn fit_slope(rows: &[SweepRow]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eps > 0.0 && r.gap > 0.0)
        .map(|r| (r.eps.ln(), r.gap.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(3);
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Whether `values` (in sweep order) never grows by more than the slack.
fn shrinks(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE)
}

pub fn check_rows(
    rows: &[SweepRow],
    slope: Option<f64>,
    reference: &Solution,
    tol: f64,
) -> SweepFlags {
    let pos: Vec<&SweepRow> = rows.iter().filter(|r| r.eps > 0.0).collect();
    let bd = reference.coupled();
    SweepFlags {
        sorted_descending: rows.windows(2).all(|w| w[1].eps < w[0].eps)
            && rows.last().is_some_and(|r| r.eps == 0.0),
        gap_positive: pos.iter().all(|r| r.gap > 0.0),
        gap_monotone: shrinks(rows.iter().map(|r| r.gap)),
        eps_times_b_monotone: shrinks(rows.iter().map(|r| r.eps_times_b)),
        t_proj_monotone: shrinks(pos.iter().map(|r| (r.t_proj - 1.0).abs())),
        e_dist_monotone: shrinks(rows.iter().map(|r| r.e_dist)),
        t_proj_in_unit_interval: pos.iter().all(|r| r.t_proj > 0.0 && r.t_proj < 1.0),
        projection_sandwich: pos.iter().all(|r| {
            let m_inf = reference.m;
            r.energy_at_projection >= m_inf * (1.0 - tol) && r.energy_at_projection < r.m_eps
        }),
        slope_in_range: slope.is_some_and(|s| s >= SLOPE_RANGE.0 && s <= SLOPE_RANGE.1),
        reference_on_manifold: {
            let scale = bd.scale();
            crate::functionals::pohozaev_identity(&bd, 0.0).abs() <= tol * scale
        },
        all_converged: rows.iter().all(|r| r.converged),
    }
}

/// One row of the `lambda -> 0` study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalLimitRow {
    pub lambda: f64,
    pub m: f64,
    /// `lambda C`, the Coulomb share of the energy before the 1/4.
    pub coulomb_term: f64,
    pub sup_distance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLimitReport {
    pub p: f64,
    /// `-Lap u + u = u^(p-1)`, solved with the Coulomb term switched off.
    pub reference: Solution,
    pub rows: Vec<LocalLimitRow>,
    /// Distances strictly decrease along the list.
    pub monotone: bool,
}

/// Solves `-Lap u + u + lambda phi_u u = u^(p-1)` directly for each
/// `lambda` and measures the sup distance to the local ground state.
pub fn local_limit_study(
    p: f64,
    lambda_list: &[f64],
    config: &SolverConfig,
) -> Result<LocalLimitReport> {
    check_exponent(p)?;
    if lambda_list.is_empty() {
        return Err(SpsError::BadLambdaList("empty".into()));
    }
    if lambda_list.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
        return Err(SpsError::BadLambdaList("entries must lie in (0, 1]".into()));
    }
    if lambda_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SpsError::BadLambdaList("entries must strictly decrease".into()));
    }
    let reference = ground_state(&ProblemParams::new(p, 1.0)?.with_coupling(0.0), config)?;
    let size = reference.u.sup_norm();
    let mut rows = Vec::with_capacity(lambda_list.len());
    for &lambda in lambda_list {
        let cfg = SolverConfig {
            init: Init::Continuation(Box::new(reference.clone())),
            ..config.clone()
        };
        let sol = ground_state(&ProblemParams::new(p, 1.0)?.with_coupling(lambda), &cfg)?;
        rows.push(LocalLimitRow {
            lambda,
            m: sol.m,
            coulomb_term: lambda * sol.bd.c,
            sup_distance: sol.u.sub(&reference.u)?.sup_norm() / size,
            converged: sol.converged,
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].sup_distance < w[0].sup_distance);
    Ok(LocalLimitReport {
        p,
        reference,
        rows,
        monotone,
    })
}
