//! Scalar functionals over the four integrals
//!
//! ```text
//! A = |grad u|_2^2   B = |u|_2^2   C = int (I_2 * |u|^2)|u|^2   D = |u|_p^p
//! ```
//!
//! Everything here is algebra in `(A, B, C, D)`, which keeps the identities
//! between the functionals exact and free of quadrature noise. `eps` is the
//! mass coefficient of the rescaled equation; `eps = 0` is the zero-mass
//! limit.

use serde::{Deserialize, Serialize};

use crate::coulomb::{coulomb_energy_of_pair, newtonian_potential, CoulombPair};
use crate::error::{Result, SpsError};
use crate::radial::{derivative, integrate, lp_power, RadialFunction};

pub fn check_exponent(p: f64) -> Result<()> {
    if p > 3.0 && p < 6.0 {
        Ok(())
    } else {
        Err(SpsError::ExponentOutOfRange(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(skip)]
    pub p: f64,
}

impl EnergyBreakdown {
    pub fn new(a: f64, b: f64, c: f64, d: f64, p: f64) -> Self {
        EnergyBreakdown { a, b, c, d, p }
    }

    pub fn zero(p: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, p)
    }

    /// `A + B + C + D`, the scale residuals are measured against.
    pub fn scale(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    /// Breakdown of `u_t(x) = t^2 u(t x)`.
    pub fn scaled(&self, t: f64) -> Self {
        let t3 = t * t * t;
        Self::new(
            t3 * self.a,
            t * self.b,
            t3 * self.c,
            t.powf(2.0 * self.p - 3.0) * self.d,
            self.p,
        )
    }

    /// Multiplies the Coulomb integral by `k`; a coupling `k` in front of
    /// the nonlocal term enters every functional through `k*C` only.
    pub fn with_coulomb_coupling(&self, k: f64) -> Self {
        Self::new(self.a, self.b, k * self.c, self.d, self.p)
    }
}

/// Parameters of the rescaled problem
/// `-Lap v + eps v + coupling (I_2 * v^2) v = v^(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: f64,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "unit", skip_serializing_if = "is_unit")]
    pub coupling: f64,
}

fn unit() -> f64 {
    1.0
}

fn is_unit(x: &f64) -> bool {
    *x == 1.0
}

impl ProblemParams {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(SpsError::BadEps(eps));
        }
        Ok(ProblemParams {
            p,
            eps,
            lambda: None,
            coupling: 1.0,
        })
    }

    /// Parameters for the original coupling `lambda`, via
    /// `eps = lambda^((p-2)/(4(3-p)))`.
    pub fn from_lambda(p: f64, lambda: f64) -> Result<Self> {
        let eps = crate::asymptotics::eps_of_lambda(lambda, p)?;
        Ok(ProblemParams {
            lambda: Some(lambda),
            ..Self::new(p, eps)?
        })
    }

    pub fn with_coupling(mut self, k: f64) -> Self {
        self.coupling = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(SpsError::BadEps(self.eps));
        }
        if let Some(l) = self.lambda {
            let e = crate::asymptotics::eps_of_lambda(l, self.p)?;
            if (e - self.eps).abs() > 1e-12 * e {
                return Err(SpsError::BadConfig(format!(
                    "eps {} inconsistent with lambda {l}",
                    self.eps
                )));
            }
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(SpsError::BadConfig(format!(
                "coupling must be >= 0, got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

/// A, B, C, D of a profile.
pub fn breakdown(u: &RadialFunction, p: f64) -> Result<EnergyBreakdown> {
    check_exponent(p)?;
    Ok(breakdown_with_pair(u, &newtonian_potential(u), p))
}

pub(crate) fn breakdown_with_pair(u: &RadialFunction, pair: &CoulombPair, p: f64) -> EnergyBreakdown {
    EnergyBreakdown::new(
        dirichlet_integral(u),
        pair.total_charge,
        coulomb_energy_of_pair(pair),
        lp_power(u, p).expect("p > 3"),
        p,
    )
}

/// `|grad u|_2^2` for a regular radial profile.
pub fn dirichlet_integral(u: &RadialFunction) -> f64 {
    integrate(&derivative(u, true).map(|d| d * d))
}

/// `A/2 + eps B/2 + C/4 - D/p`.
pub fn energy(bd: &EnergyBreakdown, eps: f64) -> f64 {
    0.5 * bd.a + 0.5 * eps * bd.b + 0.25 * bd.c - bd.d / bd.p
}

/// Combination of the Nehari and Pohozaev functionals whose zero set is
/// the constraint manifold.
pub fn pohozaev_manifold(bd: &EnergyBreakdown, eps: f64) -> f64 {
    1.5 * bd.a + 0.5 * eps * bd.b + 0.75 * bd.c - (2.0 * bd.p - 3.0) / bd.p * bd.d
}

/// `<I'(u), u> = A + eps B + C - D`.
pub fn nehari(bd: &EnergyBreakdown, eps: f64) -> f64 {
    bd.a + eps * bd.b + bd.c - bd.d
}

/// Pohozaev identity residual; vanishes on weak solutions.
pub fn pohozaev_identity(bd: &EnergyBreakdown, eps: f64) -> f64 {
    0.5 * bd.a + 1.5 * eps * bd.b + 1.25 * bd.c - 3.0 / bd.p * bd.d
}

/// Energy along the fiber `t -> t^2 u(t x)`.
pub fn fiber_energy(bd: &EnergyBreakdown, eps: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(SpsError::NonPositiveScale(t));
    }
    let t3 = t * t * t;
    Ok(0.5 * t3 * bd.a + 0.5 * eps * t * bd.b + 0.25 * t3 * bd.c
        - t.powf(2.0 * bd.p - 3.0) / bd.p * bd.d)
}

/// `t f_u'(t) / t = g(t)`: positive below the maximizer, negative above.
fn fiber_slope(bd: &EnergyBreakdown, eps: f64, t: f64) -> f64 {
    let k = (2.0 * bd.p - 3.0) / bd.p;
    1.5 * (bd.a + 0.5 * bd.c) * t * t + 0.5 * eps * bd.b - k * bd.d * t.powf(2.0 * bd.p - 4.0)
}

fn fiber_slope_dt(bd: &EnergyBreakdown, t: f64) -> f64 {
    let k = (2.0 * bd.p - 3.0) / bd.p;
    3.0 * (bd.a + 0.5 * bd.c) * t - k * bd.d * (2.0 * bd.p - 4.0) * t.powf(2.0 * bd.p - 5.0)
}

/// The unique maximizer `t* > 0` of the fiber energy; `scaled(t*)` lies on
/// the manifold.
pub fn fiber_project(bd: &EnergyBreakdown, eps: f64) -> Result<f64> {
    if !(bd.d > 0.0) {
        return Err(SpsError::ZeroProfile);
    }
    let g = |t: f64| fiber_slope(bd, eps, t);
    let quad = bd.a + 0.5 * bd.c;
    if eps * bd.b == 0.0 && quad > 0.0 {
        // closed form when the linear term is absent
        let base = 3.0 * bd.p * (2.0 * bd.a + bd.c) / (4.0 * (2.0 * bd.p - 3.0) * bd.d);
        return Ok(base.powf(1.0 / (2.0 * bd.p - 6.0)));
    }

    let mut lo = 1.0;
    let mut hi = 1.0;
    while g(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(SpsError::ZeroProfile);
        }
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(SpsError::ZeroProfile);
        }
    }
    if lo == hi {
        lo = hi * 0.5;
    }
    while (hi - lo) > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = g(t) / fiber_slope_dt(bd, t);
        let next = t - step;
        if !(next > lo * 0.5 && next < hi * 2.0) {
            break;
        }
        t = next;
        if step.abs() <= 1e-15 * t {
            break;
        }
    }
    Ok(t)
}

/// Energy restricted to the manifold, with the `D` term eliminated.
pub fn manifold_energy(bd: &EnergyBreakdown, eps: f64) -> Result<f64> {
    let scale = bd.scale().max(f64::MIN_POSITIVE);
    let res = pohozaev_manifold(bd, eps).abs() / scale;
    if res > MANIFOLD_TOL {
        return Err(SpsError::OffManifold(res));
    }
    Ok(reduced_energy(bd, eps))
}

pub(crate) const MANIFOLD_TOL: f64 = 1e-8;

pub(crate) fn reduced_energy(bd: &EnergyBreakdown, eps: f64) -> f64 {
    let p = bd.p;
    let q = 2.0 * p - 3.0;
    (p - 3.0) / q * bd.a + (p - 2.0) / q * eps * bd.b + (p - 3.0) / (2.0 * q) * bd.c
}

/// `M(u) = A + C`.
pub fn m_functional(bd: &EnergyBreakdown) -> f64 {
    bd.a + bd.c
}

/// Coulomb-Sobolev norm `(A + C^(1/2))^(1/2)`.
pub fn e_norm(bd: &EnergyBreakdown) -> f64 {
    (bd.a + bd.c.sqrt()).sqrt()
}

/// `D / M^((2p-3)/3)`, invariant along fibers.
pub fn interpolation_ratio(bd: &EnergyBreakdown) -> f64 {
    bd.d / m_functional(bd).powf((2.0 * bd.p - 3.0) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EnergyBreakdown {
        EnergyBreakdown::new(1.0, 1.0, 2.0, 2.4, 4.0)
    }

    #[test]
    fn energy_examples() {
        let bd = sample();
        assert!((energy(&bd, 0.0) - 0.4).abs() < 1e-15);
        assert!((energy(&bd, 1.0) - 0.9).abs() < 1e-15);
        assert_eq!(energy(&EnergyBreakdown::zero(4.0), 0.3), 0.0);
    }

    #[test]
    fn manifold_and_identities() {
        let bd = sample();
        assert!(pohozaev_manifold(&bd, 0.0).abs() < 1e-15);
        assert!((pohozaev_manifold(&bd, 1.0) - 0.5).abs() < 1e-15);
        assert!((nehari(&bd, 0.0) - 0.6).abs() < 1e-15);
        let z = EnergyBreakdown::new(1.0, 0.4, 2.0, 3.4, 4.0);
        assert!(nehari(&z, 1.0).abs() < 1e-15);
        assert!((pohozaev_identity(&bd, 0.0) - 1.2).abs() < 1e-15);
        let zero = EnergyBreakdown::zero(4.0);
        assert_eq!(pohozaev_manifold(&zero, 1.0), 0.0);
        assert_eq!(nehari(&zero, 1.0), 0.0);
        assert_eq!(pohozaev_identity(&zero, 1.0), 0.0);
    }

    #[test]
    fn fiber_energy_examples() {
        let bd = sample();
        assert_eq!(fiber_energy(&bd, 0.7, 1.0).unwrap(), energy(&bd, 0.7));
        assert!((fiber_energy(&bd, 0.0, 2.0).unwrap() + 11.2).abs() < 1e-12);
        assert!(fiber_energy(&bd, 1.0, 1e-9).unwrap().abs() < 1e-8);
        assert!(matches!(
            fiber_energy(&bd, 1.0, 0.0),
            Err(SpsError::NonPositiveScale(_))
        ));
    }

    #[test]
    fn fiber_project_examples() {
        let bd = sample();
        assert!((fiber_project(&bd, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let quartic = ((1.0 + (5.0f64 / 3.0).sqrt()) / 2.0).sqrt();
        assert!((fiber_project(&bd, 1.0).unwrap() - quartic).abs() < 1e-12);
        let bd2 = EnergyBreakdown::new(1.0, 1.0, 2.0, 1.2, 4.0);
        assert!((fiber_project(&bd2, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            fiber_project(&EnergyBreakdown::zero(4.0), 1.0).unwrap_err(),
            SpsError::ZeroProfile
        );
    }

    #[test]
    fn manifold_energy_examples() {
        let bd = sample();
        assert!((manifold_energy(&bd, 0.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            manifold_energy(&bd, 1.0),
            Err(SpsError::OffManifold(_))
        ));
        // no B coefficient at eps = 0
        let more_mass = EnergyBreakdown { b: 50.0, ..bd };
        assert_eq!(
            manifold_energy(&more_mass, 0.0).unwrap(),
            manifold_energy(&bd, 0.0).unwrap()
        );
    }

    #[test]
    fn m_and_e_norm() {
        let bd = EnergyBreakdown::new(0.25, 0.0, 0.04, 0.0, 4.0);
        assert!((m_functional(&bd) - 0.29).abs() < 1e-15);
        let e = e_norm(&bd);
        assert!((e - 0.45f64.sqrt()).abs() < 1e-15);
        assert!(0.5 * e.powi(4) <= m_functional(&bd) && m_functional(&bd) <= e * e);
        let bd = EnergyBreakdown::new(1.0, 0.0, 4.0, 0.0, 4.0);
        assert_eq!(m_functional(&bd), 5.0);
        assert!((e_norm(&bd) - 3f64.sqrt()).abs() < 1e-15);
        let z = EnergyBreakdown::zero(4.0);
        assert_eq!((m_functional(&z), e_norm(&z)), (0.0, 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(2.5, 1.0).is_err());
        assert!(ProblemParams::new(7.0, 1.0).is_err());
        assert!(ProblemParams::new(4.0, -1.0).is_err());
        let p = ProblemParams::from_lambda(4.0, 4.0).unwrap();
        assert!((p.eps - 0.5).abs() < 1e-15);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn breakdown_rejects_bad_exponent() {
        let g = crate::radial::make_grid(64, 10.0, 1.0).unwrap();
        let u = RadialFunction::zeros(&g);
        assert_eq!(
            breakdown(&u, 2.5).unwrap_err(),
            SpsError::ExponentOutOfRange(2.5)
        );
        let bd = breakdown(&u, 4.0).unwrap();
        assert_eq!((bd.a, bd.b, bd.c, bd.d), (0.0, 0.0, 0.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_bd() -> impl Strategy<Value = EnergyBreakdown> {
            (1e-2..10.0f64, 1e-2..10.0f64, 1e-2..10.0f64, 1e-2..10.0f64, 3.3..5.9f64)
                .prop_map(|(a, b, c, d, p)| EnergyBreakdown::new(a, b, c, d, p))
        }

        proptest! {
            #[test]
            fn manifold_is_nehari_pohozaev_combination(bd in any_bd(), eps in 0.0..5.0f64) {
                let lhs = pohozaev_manifold(&bd, eps);
                let rhs = 2.0 * nehari(&bd, eps) - pohozaev_identity(&bd, eps);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + bd.scale()));
            }

            #[test]
            fn projection_lands_on_manifold(bd in any_bd(), eps in 0.0..5.0f64) {
                let t = fiber_project(&bd, eps).unwrap();
                let s = bd.scaled(t);
                prop_assert!(pohozaev_manifold(&s, eps).abs() <= 1e-10 * s.scale());
                // maximizer of the fiber energy
                let f = |x: f64| fiber_energy(&bd, eps, x).unwrap();
                prop_assert!(f(t) >= f(t * 1.01) && f(t) >= f(t * 0.99));
                let e = manifold_energy(&s, eps).unwrap();
                prop_assert!((e - energy(&s, eps)).abs() <= 1e-9 * s.scale());
            }

            #[test]
            fn projection_increases_with_mass(bd in any_bd(), eps in 0.0..3.0f64) {
                let t0 = fiber_project(&bd, eps).unwrap();
                let t1 = fiber_project(&bd, eps + 0.5).unwrap();
                prop_assert!(t1 > t0);
            }

            #[test]
            fn interpolation_ratio_is_fiber_invariant(bd in any_bd(), t in 0.2..5.0f64) {
                let r0 = interpolation_ratio(&bd);
                let r1 = interpolation_ratio(&bd.scaled(t));
                prop_assert!((r0 - r1).abs() <= 1e-10 * r0);
            }

            #[test]
            fn e_norm_sandwich(a in 0.0..1.0f64, c in 0.0..1.0f64) {
                let bd = EnergyBreakdown::new(a, 0.0, c, 0.0, 4.0);
                let e = e_norm(&bd);
                let m = m_functional(&bd);
                if e <= 1.0 || m <= 1.0 {
                    prop_assert!(0.5 * e.powi(4) <= m + 1e-15);
                    prop_assert!(m <= e * e + 1e-15);
                }
            }
        }
    }
}
