//! Closed-form comparison solutions and canonical initial data.
//!
//! Round spheres reduce the flow to a Bernoulli equation in the radius a(t):
//!
//!   normalized:    da/dt = gamma (a - a^{1+s})
//!   unnormalized:  da/dt = -gamma a^{1+s}
//!
//! with s = (alpha - beta - k)/beta. Substituting w = a^{-s} makes both
//! linear, giving
//!
//!   normalized:    a(t) = (1 + (a0^{-s} - 1) e^{-s gamma t})^{-1/s}
//!   unnormalized:  a(t) = (a0^{-s} + s gamma t)^{-1/s}
//!
//! for s != 0 and the exponential special cases a0 (stationary) and
//! a0 e^{-gamma t} on the critical line s = 0. Finite-time extinction occurs
//! only for s < 0: always for the unnormalized flow, and for normalized
//! spheres starting inside the unit ball.

use std::sync::Arc;

use thiserror::Error;

use crate::grid_geom::{Grid, GridGeomError, RadialField};
use crate::params::{FlowParams, Mode};

#[derive(Debug, Error, PartialEq)]
pub enum ReferenceError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("time {t} is at or past the extinction time {limit}")]
    PastExtinction { t: f64, limit: f64 },
    #[error("initial radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("aspect ratio must be finite and at least 1, got {0}")]
    BadAspect(f64),
    #[error("profile requires the sub regime (alpha < beta + k); got q = {q}")]
    NotSubRegime { q: f64 },
    #[error("profile exponent theta must satisfy theta > 1/q and q theta > beta; got theta = {theta} with q = {q}, beta = {beta}")]
    BadTheta { theta: f64, q: f64, beta: f64 },
    #[error("profile is defined for t < 0 and |x| <= 1, got x = {x}, t = {t}")]
    ProfileOutOfDomain { x: f64, t: f64 },
    #[error(transparent)]
    Grid(#[from] GridGeomError),
}

/// Time at which the comparison sphere of initial radius a0 reaches the
/// origin, when that happens at all.
pub fn extinction_time(a0: f64, params: &FlowParams, mode: Mode) -> Result<Option<f64>, ReferenceError> {
    check_radius(a0)?;
    let s = params.regime_exp();
    let gamma = params.gamma();
    Ok(match mode {
        Mode::Unnormalized => {
            if s < 0.0 {
                // a0^{-s} + s gamma t hits zero
                Some(a0.powf(-s) / (-s * gamma))
            } else {
                None
            }
        }
        Mode::Normalized => {
            if s < 0.0 && a0 < 1.0 {
                // 1 + (a0^{-s} - 1) e^{-s gamma t} hits zero
                let w0 = a0.powf(-s);
                Some((1.0 / (1.0 - w0)).ln() / (-s * gamma))
            } else {
                None
            }
        }
    })
}

/// Radius at time t of the sphere starting at a0.
pub fn sphere_radius(t: f64, a0: f64, params: &FlowParams, mode: Mode) -> Result<f64, ReferenceError> {
    check_radius(a0)?;
    if !(t >= 0.0) {
        return Err(ReferenceError::NegativeTime(t));
    }
    let s = params.regime_exp();
    let gamma = params.gamma();
    let base = match mode {
        Mode::Normalized => {
            if s == 0.0 {
                return Ok(a0);
            }
            1.0 + (a0.powf(-s) - 1.0) * (-s * gamma * t).exp()
        }
        Mode::Unnormalized => {
            if s == 0.0 {
                return Ok(a0 * (-gamma * t).exp());
            }
            a0.powf(-s) + s * gamma * t
        }
    };
    if base <= 0.0 {
        let limit = extinction_time(a0, params, mode)?.expect("non-positive base implies extinction");
        return Err(ReferenceError::PastExtinction { t, limit });
    }
    Ok(base.powf(-1.0 / s))
}

fn check_radius(a0: f64) -> Result<(), ReferenceError> {
    if a0.is_finite() && a0 > 0.0 {
        Ok(())
    } else {
        Err(ReferenceError::BadRadius(a0))
    }
}

/// Prolate ellipsoid of revolution with unit equatorial radius and polar
/// radius `aspect`, sampled as a radial graph:
/// phi(theta) = -log(cos^2(theta)/aspect^2 + sin^2(theta)) / 2.
pub fn elongated_initial(grid: Arc<Grid>, aspect: f64) -> Result<RadialField, ReferenceError> {
    if !(aspect.is_finite() && aspect >= 1.0) {
        return Err(ReferenceError::BadAspect(aspect));
    }
    let b2 = aspect * aspect;
    let field = RadialField::from_fn(grid, |t| {
        let c = t.cos();
        let s = t.sin();
        -0.5 * (c * c / b2 + s * s).ln()
    })?;
    Ok(field)
}

/// Graph profile whose sub-regime evolution pulls a flat near-origin cap onto
/// the origin in finite time: the model for unbounded radial ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleProfile {
    q: f64,
    theta_exp: f64,
    sigma_exp: f64,
}

impl CounterexampleProfile {
    /// `theta` defaults to (2 + beta)/q, which satisfies both constraints
    /// theta > 1/q and q theta > beta with margin.
    pub fn new(params: &FlowParams, theta: Option<f64>) -> Result<Self, ReferenceError> {
        let q = -params.alpha() + params.beta() + params.k() as f64;
        if q <= 0.0 {
            return Err(ReferenceError::NotSubRegime { q });
        }
        let theta_exp = theta.unwrap_or((2.0 + params.beta()) / q);
        if !(theta_exp.is_finite() && theta_exp * q > 1.0 && theta_exp * q > params.beta()) {
            return Err(ReferenceError::BadTheta { theta: theta_exp, q, beta: params.beta() });
        }
        let sigma_exp = (q * theta_exp - params.beta()) / (params.k() as f64 * theta_exp);
        Ok(CounterexampleProfile { q, theta_exp, sigma_exp })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn theta_exp(&self) -> f64 {
        self.theta_exp
    }

    #[inline]
    pub fn sigma_exp(&self) -> f64 {
        self.sigma_exp
    }
}

/// Height of the model graph at radius |x| <= 1 and time t < 0. The inner
/// paraboloid cap (|x| < |t|^theta) and the outer power profile match in
/// value and slope at |x| = |t|^theta.
pub fn counterexample_phi(profile: &CounterexampleProfile, x: f64, t: f64) -> Result<f64, ReferenceError> {
    if !(t < 0.0 && x.is_finite() && x.abs() <= 1.0) {
        return Err(ReferenceError::ProfileOutOfDomain { x, t });
    }
    let theta = profile.theta_exp;
    let sigma = profile.sigma_exp;
    let at = -t; // |t|
    let ax = x.abs();
    let cap = at.powf(theta);
    if ax < cap {
        Ok(-cap + at.powf(theta * (sigma - 1.0)) * ax * ax)
    } else {
        let mid = (1.0 - sigma) / (1.0 + sigma) * at.powf(theta * (1.0 + sigma));
        Ok(-cap - mid + 2.0 / (1.0 + sigma) * ax.powf(1.0 + sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_geom::{geometry, GridKind};
    use crate::symfun::{cone_membership, DEFAULT_CONE_TOL};

    fn params(n: usize, k: usize, alpha: f64, beta: f64) -> FlowParams {
        FlowParams::new(n, k, alpha, beta).unwrap()
    }

    #[test]
    fn unit_sphere_is_stationary_under_normalized_flow() {
        for p in [
            params(2, 1, 1.5, 1.0),
            params(2, 1, 2.0, 1.0),
            params(2, 1, 3.0, 1.0),
            params(3, 2, 4.5, 2.0),
        ] {
            for t in [0.0, 0.5, 3.0] {
                assert_eq!(sphere_radius(t, 1.0, &p, Mode::Normalized).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn critical_sphere_solutions() {
        let p = params(2, 1, 2.0, 1.0);
        assert_eq!(sphere_radius(1.7, 2.0, &p, Mode::Normalized).unwrap(), 2.0);
        let a = sphere_radius(0.25, 2.0, &p, Mode::Unnormalized).unwrap();
        assert!((a - 2.0 * (-p.gamma() * 0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn super_regime_sphere_decays_to_unit() {
        let p = params(2, 1, 3.0, 1.0);
        let mut prev = 2.0;
        for i in 1..=40 {
            let a = sphere_radius(0.25 * i as f64, 2.0, &p, Mode::Normalized).unwrap();
            assert!(a < prev && a > 1.0);
            prev = a;
        }
        assert!((sphere_radius(40.0, 2.0, &p, Mode::Normalized).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Independent check: integrate the radius equation with a fine
    /// fixed-step fourth-order scheme and compare to the closed form.
    #[test]
    fn closed_forms_match_ode_integration() {
        let cases = [
            (params(2, 1, 3.0, 1.0), 2.0, Mode::Normalized),
            (params(2, 1, 3.0, 1.0), 2.0, Mode::Unnormalized),
            (params(2, 1, 2.0, 1.0), 1.4, Mode::Unnormalized),
            (params(2, 2, 4.0, 2.0), 0.8, Mode::Normalized),
            (params(2, 1, 1.5, 1.0), 1.6, Mode::Normalized),
            (params(3, 2, 3.5, 2.0), 1.1, Mode::Normalized),
            (params(2, 1, 2.5, 1.0), 0.7, Mode::Unnormalized),
        ];
        for (p, a0, mode) in cases {
            let gamma = p.gamma();
            let s = p.regime_exp();
            let rhs = |a: f64| -> f64 {
                let shrink = gamma * a.powf(1.0 + s);
                match mode {
                    Mode::Normalized => gamma * a - shrink,
                    Mode::Unnormalized => -shrink,
                }
            };
            let t_end = 1.0;
            let steps = 20_000;
            let dt = t_end / steps as f64;
            let mut a = a0;
            let mut t = 0.0;
            for _ in 0..steps {
                let k1 = rhs(a);
                let k2 = rhs(a + 0.5 * dt * k1);
                let k3 = rhs(a + 0.5 * dt * k2);
                let k4 = rhs(a + dt * k3);
                a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += dt;
                if t > 0.2 {
                    // compare along the way, not only at the end
                    let want = sphere_radius(t, a0, &p, mode).unwrap();
                    assert!(
                        (a - want).abs() < 1e-10 * want.max(1.0),
                        "alpha={} mode={:?} t={t}: {a} vs {want}",
                        p.alpha(),
                        mode
                    );
                }
            }
        }
    }

    /// The same solution can be written with the shrink exponent in the
    /// numerator: a(t) = (e^{s g t} / (e^{s g t} - (a0^s - 1)/a0^s))^{1/s}.
    /// Both algebraic arrangements must agree where both are defined.
    #[test]
    fn alternative_display_form_agrees() {
        let p = params(2, 1, 3.0, 1.0);
        let s = p.regime_exp();
        let g = p.gamma();
        for a0 in [0.5f64, 1.3, 2.0] {
            for t in [0.1, 0.7, 2.0] {
                let e = (s * g * t).exp();
                let alt = (e / (e - (a0.powf(s) - 1.0) / a0.powf(s))).powf(1.0 / s);
                let got = sphere_radius(t, a0, &p, Mode::Normalized).unwrap();
                assert!((alt - got).abs() < 1e-12 * got, "a0={a0} t={t}: {alt} vs {got}");
            }
        }
    }

    #[test]
    fn sub_regime_extinction() {
        let p = params(2, 1, 1.5, 1.0); // s = -1/2, gamma = 2
        // unnormalized from a0 = 1: T = 1 / (0.5 * 2) = 1
        let t_ext = extinction_time(1.0, &p, Mode::Unnormalized).unwrap().unwrap();
        assert!((t_ext - 1.0).abs() < 1e-15);
        assert!(sphere_radius(0.999, 1.0, &p, Mode::Unnormalized).unwrap() > 0.0);
        assert!(matches!(
            sphere_radius(1.001, 1.0, &p, Mode::Unnormalized),
            Err(ReferenceError::PastExtinction { .. })
        ));
        // normalized: spheres inside the unit ball die, outside they inflate
        assert!(extinction_time(0.5, &p, Mode::Normalized).unwrap().is_some());
        assert!(extinction_time(1.5, &p, Mode::Normalized).unwrap().is_none());
        let t_half = extinction_time(0.5, &p, Mode::Normalized).unwrap().unwrap();
        let near = sphere_radius(t_half * (1.0 - 1e-6), 0.5, &p, Mode::Normalized).unwrap();
        assert!(near < 0.02, "radius near extinction: {near}");
        // super regime never goes extinct
        let p_super = params(2, 1, 3.0, 1.0);
        assert!(extinction_time(0.5, &p_super, Mode::Unnormalized).unwrap().is_none());
    }

    #[test]
    fn input_validation() {
        let p = params(2, 1, 3.0, 1.0);
        assert!(matches!(
            sphere_radius(-0.1, 1.0, &p, Mode::Normalized),
            Err(ReferenceError::NegativeTime(_))
        ));
        assert!(matches!(
            sphere_radius(0.1, 0.0, &p, Mode::Normalized),
            Err(ReferenceError::BadRadius(_))
        ));
    }

    #[test]
    fn elongated_initial_shapes() {
        // aspect 1 is the unit sphere
        let grid = Arc::new(Grid::axisym_polar(64).unwrap());
        let sphere = elongated_initial(Arc::clone(&grid), 1.0).unwrap();
        assert!(sphere.phi().iter().all(|&p| p.abs() < 1e-15));

        // on the circle grid theta = 0 is a node, so the polar radius is exact
        let circle = Arc::new(Grid::periodic_circle(64).unwrap());
        let f = elongated_initial(Arc::clone(&circle), 2.0).unwrap();
        let r = f.r();
        assert!((r[0] - 2.0).abs() < 1e-14);
        assert!((r[16] - 1.0).abs() < 1e-14); // theta = pi/2
        assert!((r[32] - 2.0).abs() < 1e-14); // theta = pi

        // uniformly convex: every node sits in the full positivity cone
        let p = params(2, 2, 4.0, 2.0);
        let fine = Arc::new(Grid::axisym_polar(128).unwrap());
        let body = elongated_initial(Arc::clone(&fine), 1.5).unwrap();
        let geo = geometry(&body, &p).unwrap();
        for i in 0..geo.len() {
            let cone = cone_membership(&geo.kappa_at(i), DEFAULT_CONE_TOL);
            assert_eq!(cone.max_k, 2, "node {i}");
        }
        assert_eq!(fine.kind(), GridKind::AxisymPolar);

        assert!(matches!(
            elongated_initial(grid, 0.5),
            Err(ReferenceError::BadAspect(_))
        ));
    }

    #[test]
    fn profile_parameters() {
        // n=2, k=1, alpha=1.5, beta=1: q = 1/2, default theta = 6, sigma = 1/3
        let p = params(2, 1, 1.5, 1.0);
        let prof = CounterexampleProfile::new(&p, None).unwrap();
        assert!((prof.q() - 0.5).abs() < 1e-15);
        assert!((prof.theta_exp() - 6.0).abs() < 1e-15);
        assert!((prof.sigma_exp() - 1.0 / 3.0).abs() < 1e-15);
        // super regime is rejected
        assert!(matches!(
            CounterexampleProfile::new(&params(2, 1, 3.0, 1.0), None),
            Err(ReferenceError::NotSubRegime { .. })
        ));
        // theta too small is rejected
        assert!(matches!(
            CounterexampleProfile::new(&p, Some(1.0)),
            Err(ReferenceError::BadTheta { .. })
        ));
    }

    #[test]
    fn profile_values_and_matching() {
        let p = params(2, 1, 1.5, 1.0);
        let prof = CounterexampleProfile::new(&p, None).unwrap();
        // at the axis the height is -|t|^theta
        let t = -0.5;
        let cap = 0.5f64.powi(6);
        assert!((counterexample_phi(&prof, 0.0, t).unwrap() + cap).abs() < 1e-15);

        // outer-branch sample at (x, t) = (0.5, -0.5), frozen from the exact
        // arithmetic: -2^-6 - (1/2) 2^-8 + (3/2) 2^{-4/3}
        let got = counterexample_phi(&prof, 0.5, t).unwrap();
        assert!((got - 0.5776972694880748).abs() < 1e-15, "{got}");

        // inner-branch sample: |t|^{theta(sigma-1)} = 2^4 = 16
        let got = counterexample_phi(&prof, 0.005, t).unwrap();
        assert!((got - (-cap + 16.0 * 0.005f64 * 0.005)).abs() < 1e-15);

        // value and slope match across the interface
        let xi = cap;
        let eps = 1e-9;
        let inner = counterexample_phi(&prof, xi - eps, t).unwrap();
        let outer = counterexample_phi(&prof, xi + eps, t).unwrap();
        assert!((inner - outer).abs() < 1e-8);
        let d_in = (counterexample_phi(&prof, xi - eps, t).unwrap()
            - counterexample_phi(&prof, xi - 2.0 * eps, t).unwrap())
            / eps;
        let d_out = (counterexample_phi(&prof, xi + 2.0 * eps, t).unwrap()
            - counterexample_phi(&prof, xi + eps, t).unwrap())
            / eps;
        assert!((d_in - d_out).abs() < 1e-4, "{d_in} vs {d_out}");

        // domain checks
        assert!(counterexample_phi(&prof, 0.0, 0.0).is_err());
        assert!(counterexample_phi(&prof, 1.5, -0.5).is_err());
    }
}
