//! Explicit time integration of the contracting flow in log-radial form.
//!
//! The motion law for the graph phi = log r is
//!
//!   d phi / dt = -e^{(alpha/beta - 1) phi} rho sigma_k(kappa)^{1/beta}  [+ gamma]
//!
//! with rho = sqrt(1 + |D phi|^2); the +gamma term is the normalized
//! variant, which holds the unit sphere fixed. Steps are explicit (RK4 by
//! default) under the parabolic restriction dt <= cfl h^2 / D_max, where D
//! is the diffusivity obtained by differentiating the right-hand side
//! through the second-derivative dependence of the meridional curvature.
//!
//! Curvature positivity is a precondition, not a maintained invariant: the
//! right-hand side refuses to evaluate states outside the cone (beyond
//! `cone_tol`) and the run ends with status `blowup`. Clamping is
//! deliberately avoided; for sub-critical parameters cone exit is the
//! expected physical endpoint, not a numerical accident.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::diagnostics::{record, DiagnosticsRecord};
use crate::grid_geom::{
    geometry, sigma_axisym, GeometryState, Grid, GridGeomError, GridKind, RadialField,
};
use crate::params::{pow_real, FlowParams, Mode};
use crate::symfun::{binomial, DEFAULT_CONE_TOL};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("stepper config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridGeomError),
    #[error("curvature left the positivity cone at node {node} (theta = {theta:.6}, t = {t:.6e}, step {step}): sigma_1..sigma_k = {sigma:?}")]
    ConeViolation { step: usize, t: f64, node: usize, theta: f64, sigma: Vec<f64> },
    #[error("non-finite value at node {node} (t = {t:.6e}, step {step})")]
    NonFinite { step: usize, t: f64, node: usize },
    #[error("degenerate parabolicity: max diffusivity {d_max:.3e} (t = {t:.6e}, step {step})")]
    Stability { step: usize, t: f64, d_max: f64 },
    #[error("time {t} outside the rescaling domain [0, {valid_until})")]
    RescaleDomain { t: f64, valid_until: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Euler,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Rk4
    }
}

/// Knobs of the explicit stepper. `sphere_dev_tol = 0` disables the
/// roundness-based convergence stop, which is what trajectory-accuracy runs
/// on exactly spherical data want (they are round from step one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub scheme: Scheme,
    /// fraction of the parabolic limit h^2 / D_max
    pub cfl: f64,
    pub t_end: f64,
    pub max_steps: usize,
    /// emit a state snapshot every this many steps (0: endpoints only)
    pub snapshot_every: usize,
    /// append to the diagnostics series every this many steps (endpoints always)
    pub record_every: usize,
    /// curvature-positivity tolerance, scaled internally by (1 + |kappa|)^j
    pub cone_tol: f64,
    /// declare convergence when sphere_dev stays below this ...
    pub sphere_dev_tol: f64,
    /// ... for this many consecutive steps
    pub conv_consecutive: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            scheme: Scheme::Rk4,
            cfl: 0.2,
            t_end: 1.0,
            max_steps: 2_000_000,
            snapshot_every: 0,
            record_every: 1,
            cone_tol: DEFAULT_CONE_TOL,
            sphere_dev_tol: 1e-6,
            conv_consecutive: 50,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::Config(msg));
        if !(self.cfl.is_finite() && self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.cone_tol.is_finite() && self.cone_tol >= 0.0) {
            return bad(format!("cone_tol must be non-negative, got {}", self.cone_tol));
        }
        if !(self.sphere_dev_tol.is_finite() && self.sphere_dev_tol >= 0.0) {
            return bad(format!("sphere_dev_tol must be non-negative, got {}", self.sphere_dev_tol));
        }
        if self.conv_consecutive == 0 {
            return bad("conv_consecutive must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// roundness threshold held for the required streak
    Converged,
    /// integrated to t_end
    TEnd,
    /// step budget exhausted
    MaxSteps,
    /// cone exit, non-finite value, or lost parabolicity; see `failure`
    Blowup,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::TEnd => "t_end",
            RunStatus::MaxSteps => "max_steps",
            RunStatus::Blowup => "blowup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotGrid {
    pub kind: GridKind,
    pub m: usize,
}

/// Full field state at one instant; enough to restart or re-derive geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub grid: SnapshotGrid,
    pub phi: Vec<f64>,
}

impl Snapshot {
    pub fn of(step: usize, t: f64, field: &RadialField) -> Snapshot {
        Snapshot {
            step,
            t,
            grid: SnapshotGrid { kind: field.grid().kind(), m: field.grid().len() },
            phi: field.phi().to_vec(),
        }
    }

    /// Rebuild the radial field (fresh grid of the recorded kind and size).
    pub fn to_field(&self) -> Result<RadialField, GridGeomError> {
        let grid = match self.grid.kind {
            GridKind::PeriodicCircle => Grid::periodic_circle(self.grid.m)?,
            GridKind::AxisymPolar => Grid::axisym_polar(self.grid.m)?,
        };
        RadialField::new(Arc::new(grid), self.phi.clone())
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub status: RunStatus,
    /// set when status is Blowup
    pub failure: Option<FlowError>,
    pub series: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_field: RadialField,
    pub steps: usize,
    pub t_final: f64,
}

/// Scale factor of the self-similar comparison solution: the radius at time
/// t of the unit sphere under the unnormalized flow. Undefined past the
/// sub-regime vanishing time.
pub fn rescale_factor(t: f64, params: &FlowParams) -> Result<f64, FlowError> {
    let s = params.regime_exp();
    let gamma = params.gamma();
    let valid_until = if s < 0.0 { -1.0 / (s * gamma) } else { f64::INFINITY };
    if !(t >= 0.0) {
        return Err(FlowError::RescaleDomain { t, valid_until });
    }
    if s == 0.0 {
        return Ok((-gamma * t).exp());
    }
    let base = 1.0 + s * gamma * t;
    if base <= 0.0 {
        return Err(FlowError::RescaleDomain { t, valid_until });
    }
    Ok(pow_real(base, -1.0 / s))
}

/// Stretched clock of the normalization map: tau(t) satisfies
/// rescale_factor(t) = e^{-gamma tau(t)}, with tau = t on the critical line.
pub fn tau(t: f64, params: &FlowParams) -> Result<f64, FlowError> {
    let s = params.regime_exp();
    let gamma = params.gamma();
    let valid_until = if s < 0.0 { -1.0 / (s * gamma) } else { f64::INFINITY };
    if !(t >= 0.0) {
        return Err(FlowError::RescaleDomain { t, valid_until });
    }
    if s == 0.0 {
        return Ok(t);
    }
    let base = 1.0 + s * gamma * t;
    if base <= 0.0 {
        return Err(FlowError::RescaleDomain { t, valid_until });
    }
    Ok(base.ln() / (s * gamma))
}

/// sigma_j on the axisymmetric curvature pair as a pair of binomial weights:
/// sigma_j = w_rot kappa_rot^j + w_mer kappa_rot^{j-1} kappa_mer.
fn cone_coeffs(n: usize, k: usize) -> Vec<(f64, f64)> {
    (1..=k).map(|j| (binomial(n - 1, j), binomial(n - 1, j - 1))).collect()
}

struct Workspace {
    geo: GeometryState,
    coeffs: Vec<(f64, f64)>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: RadialField,
    next: Vec<f64>,
}

impl Workspace {
    fn new(initial: &RadialField, params: &FlowParams) -> Result<Workspace, FlowError> {
        let geo = geometry(initial, params)?;
        let m = initial.phi().len();
        Ok(Workspace {
            geo,
            coeffs: cone_coeffs(params.n(), params.k()),
            k1: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            stage: initial.clone(),
            next: vec![0.0; m],
        })
    }
}

/// Right-hand side evaluated from an already-computed geometry state.
/// Validates the curvature cone node by node before trusting sigma_k^{1/beta}.
fn rhs_from_geo(
    geo: &GeometryState,
    grid: &Grid,
    params: &FlowParams,
    mode: Mode,
    coeffs: &[(f64, f64)],
    cone_tol: f64,
    step: usize,
    t: f64,
    out: &mut [f64],
) -> Result<(), FlowError> {
    let gamma_term = match mode {
        Mode::Normalized => params.gamma(),
        Mode::Unnormalized => 0.0,
    };
    let n = geo.n;
    for i in 0..out.len() {
        let kme = geo.kappa_mer[i];
        let kro = geo.kappa_rot[i];
        let amax = kme.abs().max(kro.abs());
        if !amax.is_finite() {
            return Err(FlowError::NonFinite { step, t, node: i });
        }
        let scale = 1.0 + amax;
        let mut floor = cone_tol;
        let mut kro_pow = 1.0; // kappa_rot^{j-1}
        for &(w_rot, w_mer) in coeffs {
            let s_j = w_rot * kro_pow * kro + w_mer * kro_pow * kme;
            floor *= scale;
            if !(s_j > floor) {
                let sigma: Vec<f64> =
                    (1..=geo.k).map(|j| sigma_axisym(j, kme, kro, n)).collect();
                return Err(FlowError::ConeViolation {
                    step,
                    t,
                    node: i,
                    theta: grid.nodes()[i],
                    sigma,
                });
            }
            kro_pow *= kro;
        }
        let v = gamma_term - geo.big_phi[i] * geo.rho[i] / geo.r[i];
        if !v.is_finite() {
            return Err(FlowError::NonFinite { step, t, node: i });
        }
        out[i] = v;
    }
    Ok(())
}

/// Normalized-flow right-hand side (with the +gamma forcing).
pub fn rhs_normalized(
    field: &RadialField,
    params: &FlowParams,
    cone_tol: f64,
) -> Result<Vec<f64>, FlowError> {
    rhs_standalone(field, params, Mode::Normalized, cone_tol)
}

/// Pure contraction right-hand side (no forcing term).
pub fn rhs_unnormalized(
    field: &RadialField,
    params: &FlowParams,
    cone_tol: f64,
) -> Result<Vec<f64>, FlowError> {
    rhs_standalone(field, params, Mode::Unnormalized, cone_tol)
}

fn rhs_standalone(
    field: &RadialField,
    params: &FlowParams,
    mode: Mode,
    cone_tol: f64,
) -> Result<Vec<f64>, FlowError> {
    let geo = geometry(field, params)?;
    let coeffs = cone_coeffs(params.n(), params.k());
    let mut out = vec![0.0; field.phi().len()];
    rhs_from_geo(&geo, field.grid(), params, mode, &coeffs, cone_tol, 0, 0.0, &mut out)?;
    Ok(out)
}

/// Largest linearized diffusivity over the nodes. The right-hand side
/// depends on phi'' only through kappa_mer = (1 - phi''/rho^2)/(r rho), so
/// d(RHS)/d(phi'') = r^{alpha/beta - 2} (1/beta) sigma_k^{1/beta - 1}
///                   sigma_{k-1}(kappa | mer) / rho^2.
fn max_diffusivity(geo: &GeometryState, params: &FlowParams) -> f64 {
    let ex = params.speed_exp() - 1.0; // alpha/beta - 2
    let inv_beta = params.inv_beta();
    let w = binomial(geo.n - 1, geo.k - 1);
    let mut d_max = f64::NEG_INFINITY;
    for i in 0..geo.r.len() {
        let sk = geo.sigma_k[i];
        let mut kro_pow = 1.0;
        for _ in 1..geo.k {
            kro_pow *= geo.kappa_rot[i];
        }
        let d = pow_real(geo.r[i], ex) * inv_beta * (geo.f[i] / sk) * w * kro_pow
            / (geo.rho[i] * geo.rho[i]);
        if !d.is_finite() {
            return f64::NAN;
        }
        if d > d_max {
            d_max = d;
        }
    }
    d_max
}

fn stable_dt_from_geo(
    geo: &GeometryState,
    h: f64,
    params: &FlowParams,
    cfl: f64,
    step: usize,
    t: f64,
) -> Result<f64, FlowError> {
    let d_max = max_diffusivity(geo, params);
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(FlowError::Stability { step, t, d_max });
    }
    Ok(cfl * h * h / d_max)
}

/// Parabolic step bound cfl * h^2 / D_max for the current state.
pub fn stable_dt(
    field: &RadialField,
    params: &FlowParams,
    cfg: &StepperConfig,
) -> Result<f64, FlowError> {
    cfg.validate()?;
    let geo = geometry(field, params)?;
    stable_dt_from_geo(&geo, field.grid().spacing(), params, cfg.cfl, 0, 0.0)
}

/// One explicit step of the scheme from a filled workspace geometry whose
/// `k1` buffer already holds the right-hand side of `field`. On success the
/// field is replaced by the post-step state; on failure it is untouched.
fn advance_with_dt(
    ws: &mut Workspace,
    field: &mut RadialField,
    params: &FlowParams,
    mode: Mode,
    scheme: Scheme,
    cone_tol: f64,
    step: usize,
    t: f64,
    dt: f64,
) -> Result<(), FlowError> {
    let grid = Arc::clone(field.grid());
    let m = field.phi().len();
    let phi = field.phi();
    match scheme {
        Scheme::Euler => {
            for i in 0..m {
                ws.next[i] = phi[i] + dt * ws.k1[i];
            }
        }
        Scheme::Rk4 => {
            {
                let stage_phi = ws.stage.phi_mut();
                for i in 0..m {
                    stage_phi[i] = phi[i] + 0.5 * dt * ws.k1[i];
                }
            }
            ws.geo.fill(&ws.stage, params);
            rhs_from_geo(&ws.geo, &grid, params, mode, &ws.coeffs, cone_tol, step, t, &mut ws.k2)?;
            {
                let stage_phi = ws.stage.phi_mut();
                for i in 0..m {
                    stage_phi[i] = phi[i] + 0.5 * dt * ws.k2[i];
                }
            }
            ws.geo.fill(&ws.stage, params);
            rhs_from_geo(&ws.geo, &grid, params, mode, &ws.coeffs, cone_tol, step, t, &mut ws.k3)?;
            {
                let stage_phi = ws.stage.phi_mut();
                for i in 0..m {
                    stage_phi[i] = phi[i] + dt * ws.k3[i];
                }
            }
            ws.geo.fill(&ws.stage, params);
            rhs_from_geo(&ws.geo, &grid, params, mode, &ws.coeffs, cone_tol, step, t, &mut ws.k4)?;
            for i in 0..m {
                ws.next[i] = phi[i]
                    + dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
            }
        }
    }
    for (i, v) in ws.next.iter().enumerate() {
        if !v.is_finite() {
            return Err(FlowError::NonFinite { step, t, node: i });
        }
    }
    field.phi_mut().copy_from_slice(&ws.next);
    Ok(())
}

/// Cone-check the current geometry (filling `k1`), pick the stable step
/// size capped by `dt_cap`, and advance. Returns the step size taken.
fn advance_one(
    ws: &mut Workspace,
    field: &mut RadialField,
    params: &FlowParams,
    mode: Mode,
    cfg: &StepperConfig,
    step: usize,
    t: f64,
    dt_cap: f64,
) -> Result<f64, FlowError> {
    let grid = Arc::clone(field.grid());
    rhs_from_geo(&ws.geo, &grid, params, mode, &ws.coeffs, cfg.cone_tol, step, t, &mut ws.k1)?;
    let dt = stable_dt_from_geo(&ws.geo, grid.spacing(), params, cfg.cfl, step, t)?.min(dt_cap);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FlowError::Stability { step, t, d_max: f64::NAN });
    }
    advance_with_dt(ws, field, params, mode, cfg.scheme, cfg.cone_tol, step, t, dt)?;
    Ok(dt)
}

/// One adaptive step; returns the new field and its diagnostics (recorded at
/// the post-step time, i.e. at t = dt from the given state).
pub fn step(
    field: &RadialField,
    params: &FlowParams,
    mode: Mode,
    cfg: &StepperConfig,
) -> Result<(RadialField, DiagnosticsRecord), FlowError> {
    cfg.validate()?;
    let mut ws = Workspace::new(field, params)?;
    let mut out = field.clone();
    ws.geo.fill(&out, params);
    let dt = advance_one(&mut ws, &mut out, params, mode, cfg, 0, 0.0, f64::INFINITY)?;
    ws.geo.fill(&out, params);
    let rec = record(&ws.geo, dt);
    Ok((out, rec))
}

/// Fixed-step variant for order-of-accuracy measurements; takes exactly one
/// step of size dt with no stability cap.
pub fn step_with_dt(
    field: &RadialField,
    params: &FlowParams,
    mode: Mode,
    scheme: Scheme,
    cone_tol: f64,
    dt: f64,
) -> Result<RadialField, FlowError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FlowError::Config(format!("dt must be positive and finite, got {dt}")));
    }
    let mut ws = Workspace::new(field, params)?;
    let mut out = field.clone();
    ws.geo.fill(&out, params);
    let grid = Arc::clone(out.grid());
    rhs_from_geo(&ws.geo, &grid, params, mode, &ws.coeffs, cone_tol, 0, 0.0, &mut ws.k1)?;
    advance_with_dt(&mut ws, &mut out, params, mode, scheme, cone_tol, 0, 0.0, dt)?;
    Ok(out)
}

/// Integrate from `initial` until t_end, convergence, the step budget, or a
/// validity failure. Validity failures (cone exit, non-finite, lost
/// parabolicity) are reported as status Blowup with the series intact, not
/// as errors; Err is reserved for unusable configurations.
pub fn run(
    initial: &RadialField,
    params: &FlowParams,
    cfg: &StepperConfig,
    mode: Mode,
) -> Result<RunResult, FlowError> {
    cfg.validate()?;
    let mut ws = Workspace::new(initial, params)?;
    let mut field = initial.clone();
    let mut series: Vec<DiagnosticsRecord> = Vec::new();
    let mut snapshots: Vec<Snapshot> = vec![Snapshot::of(0, 0.0, &field)];
    let mut last_snapshot_step = 0usize;
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut conv_streak = 0usize;
    let mut last_series_step = usize::MAX;
    let t_cut = cfg.t_end - 1e-12 * cfg.t_end.max(1.0);
    let status;
    let mut failure = None;

    loop {
        ws.geo.fill(&field, params);
        let rec = record(&ws.geo, t);
        if steps % cfg.record_every == 0 {
            series.push(rec.clone());
            last_series_step = steps;
        }
        if cfg.sphere_dev_tol > 0.0 && rec.sphere_dev < cfg.sphere_dev_tol {
            conv_streak += 1;
        } else {
            conv_streak = 0;
        }
        if conv_streak >= cfg.conv_consecutive {
            if last_series_step != steps {
                series.push(rec);
            }
            status = RunStatus::Converged;
            break;
        }
        if t >= t_cut {
            if last_series_step != steps {
                series.push(rec);
            }
            status = RunStatus::TEnd;
            break;
        }
        if steps >= cfg.max_steps {
            if last_series_step != steps {
                series.push(rec);
            }
            status = RunStatus::MaxSteps;
            break;
        }
        match advance_one(&mut ws, &mut field, params, mode, cfg, steps, t, cfg.t_end - t) {
            Ok(dt) => {
                t += dt;
                steps += 1;
            }
            Err(e) => {
                if last_series_step != steps {
                    series.push(rec);
                }
                failure = Some(e);
                status = RunStatus::Blowup;
                break;
            }
        }
        if cfg.snapshot_every > 0 && steps % cfg.snapshot_every == 0 {
            snapshots.push(Snapshot::of(steps, t, &field));
            last_snapshot_step = steps;
        }
    }

    if last_snapshot_step != steps || snapshots.is_empty() {
        snapshots.push(Snapshot::of(steps, t, &field));
    }
    Ok(RunResult { status, failure, series, snapshots, final_field: field, steps, t_final: t })
}
