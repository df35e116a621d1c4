//! Scalar observables of a flow state, decay-rate fits, and comparison
//! against sphere envelopes.
//!
//! Every reduction walks the node arrays in index order so repeated runs
//! produce bit-identical output.

use serde::{Deserialize, Serialize};

use crate::grid_geom::{sigma_axisym, GeometryState};
use crate::params::{FlowParams, Mode};
use crate::reference::{sphere_radius, ReferenceError};

/// Gradient magnitudes at or below this floor are treated as converged noise
/// rather than fit data.
pub const GRAD_FLOOR: f64 = 1e-14;

/// Minimum number of usable tail points for a meaningful decay fit.
pub const MIN_FIT_POINTS: usize = 10;

/// Scalar summary of one flow state.
///
/// `grad_norm` is max |D phi|, which equals max |Dr|/r and is the cheaper of
/// the two to evaluate on the log-radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// ratio of radii r_max / r_min
    #[serde(rename = "R")]
    pub ratio: f64,
    pub grad_norm: f64,
    pub u_min: f64,
    #[serde(rename = "F_min")]
    pub f_min: f64,
    #[serde(rename = "F_max")]
    pub f_max: f64,
    #[serde(rename = "Phi_min")]
    pub big_phi_min: f64,
    #[serde(rename = "Phi_max")]
    pub big_phi_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// min over nodes and orders j <= k of sigma_j; positive while the state
    /// is strictly k-convex
    pub cone_margin: f64,
    /// (r_max - r_min) / r_avg, scale invariant
    pub sphere_dev: f64,
}

/// Reduce a geometry state to its scalar observables.
pub fn record(state: &GeometryState, t: f64) -> DiagnosticsRecord {
    let m = state.len();
    assert!(m > 0, "empty geometry state");
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    let mut grad_norm = 0.0f64;
    let mut u_min = f64::INFINITY;
    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    let mut big_phi_min = f64::INFINITY;
    let mut big_phi_max = f64::NEG_INFINITY;
    let mut kappa_min = f64::INFINITY;
    let mut kappa_max = f64::NEG_INFINITY;
    let mut cone_margin = f64::INFINITY;
    for i in 0..m {
        r_min = r_min.min(state.r[i]);
        r_max = r_max.max(state.r[i]);
        grad_norm = grad_norm.max(state.dphi[i].abs());
        u_min = u_min.min(state.u[i]);
        f_min = f_min.min(state.f[i]);
        f_max = f_max.max(state.f[i]);
        big_phi_min = big_phi_min.min(state.big_phi[i]);
        big_phi_max = big_phi_max.max(state.big_phi[i]);
        kappa_min = kappa_min.min(state.kappa_mer[i]);
        kappa_max = kappa_max.max(state.kappa_mer[i]);
        if state.n > 1 {
            kappa_min = kappa_min.min(state.kappa_rot[i]);
            kappa_max = kappa_max.max(state.kappa_rot[i]);
        }
        for j in 1..=state.k {
            cone_margin =
                cone_margin.min(sigma_axisym(j, state.kappa_mer[i], state.kappa_rot[i], state.n));
        }
    }
    DiagnosticsRecord {
        t,
        r_min,
        r_max,
        ratio: r_max / r_min,
        grad_norm,
        u_min,
        f_min,
        f_max,
        big_phi_min,
        big_phi_max,
        kappa_min,
        kappa_max,
        cone_margin,
        sphere_dev: (r_max - r_min) / (0.5 * (r_max + r_min)),
    }
}

/// Result of a log-linear fit of a gradient tail.
///
/// `rate` is +infinity with `below_floor` set when the tail is unusable:
/// fewer than [`MIN_FIT_POINTS`] points above [`GRAD_FLOOR`], or no time
/// spread. Serialization of the infinite sentinel is the caller's problem
/// (JSON has no inf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub rms_residual: f64,
    pub below_floor: bool,
    pub points_used: usize,
}

/// Least-squares line through (t, log g) over the trailing `tail_fraction`
/// of the series; the model is g(t) = amplitude * exp(-rate * t).
pub fn fit_decay(points: &[(f64, f64)], tail_fraction: f64) -> DecayFit {
    let frac = if tail_fraction.is_finite() && tail_fraction > 0.0 {
        tail_fraction.min(1.0)
    } else {
        0.5
    };
    let take = ((points.len() as f64 * frac).ceil() as usize).max(1).min(points.len());
    let tail = &points[points.len() - take..];
    let usable: Vec<(f64, f64)> =
        tail.iter().filter(|(_, g)| *g > GRAD_FLOOR).map(|&(t, g)| (t, g.ln())).collect();
    let degenerate = DecayFit {
        rate: f64::INFINITY,
        amplitude: 0.0,
        rms_residual: 0.0,
        below_floor: true,
        points_used: usable.len(),
    };
    if usable.len() < MIN_FIT_POINTS {
        return degenerate;
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(t, y) in &usable {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    if sxx <= 0.0 {
        return degenerate;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let mut ss = 0.0;
    for &(t, y) in &usable {
        let e = y - (intercept + slope * t);
        ss += e * e;
    }
    DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        rms_residual: (ss / n).sqrt(),
        below_floor: false,
        points_used: usable.len(),
    }
}

/// Convenience extraction of the (t, grad_norm) pairs a decay fit consumes.
pub fn grad_series(series: &[DiagnosticsRecord]) -> Vec<(f64, f64)> {
    series.iter().map(|r| (r.t, r.grad_norm)).collect()
}

/// Outcome of checking a series against two comparison spheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: usize,
    /// largest amount by which r_min dropped below the lower sphere (0 if never)
    pub worst_low: f64,
    /// largest amount by which r_max exceeded the upper sphere (0 if never)
    pub worst_high: f64,
}

impl SandwichReport {
    #[inline]
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Verify the two-sided comparison-sphere envelope: at every record,
/// sphere(a_low0) - eps <= r_min and r_max <= sphere(a_high0) + eps.
/// A lower sphere that has already vanished imposes no constraint; an upper
/// sphere that has vanished while the body persists is charged as a
/// violation of the full r_max.
pub fn sandwich_check(
    series: &[DiagnosticsRecord],
    a_low0: f64,
    a_high0: f64,
    params: &FlowParams,
    mode: Mode,
    eps: f64,
) -> Result<SandwichReport, ReferenceError> {
    let mut report = SandwichReport { checked: 0, violations: 0, worst_low: 0.0, worst_high: 0.0 };
    for rec in series {
        let low = radius_or_zero(rec.t, a_low0, params, mode)?;
        let high = radius_or_zero(rec.t, a_high0, params, mode)?;
        let excess_low = low - rec.r_min;
        let excess_high = rec.r_max - high;
        let mut bad = false;
        if excess_low > eps {
            report.worst_low = report.worst_low.max(excess_low);
            bad = true;
        }
        if excess_high > eps {
            report.worst_high = report.worst_high.max(excess_high);
            bad = true;
        }
        if bad {
            report.violations += 1;
        }
        report.checked += 1;
    }
    Ok(report)
}

fn radius_or_zero(t: f64, a0: f64, params: &FlowParams, mode: Mode) -> Result<f64, ReferenceError> {
    match sphere_radius(t, a0, params, mode) {
        Ok(a) => Ok(a),
        Err(ReferenceError::PastExtinction { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}
