//! Discrete radial graphs r = exp(phi(theta)) and their extrinsic geometry.
//!
//! Two node layouts cover the rotationally symmetric cases:
//!
//! * `PeriodicCircle` (curves in the plane, n = 1): theta_i = i h, h = 2 pi / m,
//!   wrap-around stencils.
//! * `AxisymPolar` (hypersurfaces of revolution, n >= 2): cell centers
//!   theta_i = (i + 1/2) h, h = pi / m. Smooth axisymmetric profiles are even
//!   across both poles, so ghost values are the even reflection of the first
//!   and last cells; that also enforces phi'(0) = phi'(pi) = 0 to second order.
//!
//! With rho^2 = 1 + phi'^2 the principal curvatures of the graph are
//!   kappa_mer = (1 - phi''/rho^2) / (r rho)          (meridian direction)
//!   kappa_rot = (1 - phi' cot(theta)) / (r rho)      (multiplicity n - 1)
//! and the support function is u = r / rho. cot(theta) is only ever evaluated
//! at cell centers, which sit at least h/2 away from the poles; the removable
//! pole singularity of phi' cot(theta) is resolved by the reflection stencil.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{pow_real, FlowParams};
use crate::symfun::{binomial, KappaVector};

#[derive(Debug, Error, PartialEq)]
pub enum GridGeomError {
    #[error("grid needs at least {min} nodes, got {m}")]
    TooCoarse { m: usize, min: usize },
    #[error("field length {len} does not match grid size {m}")]
    LengthMismatch { len: usize, m: usize },
    #[error("field value at node {index} is not finite")]
    NonFinite { index: usize },
    #[error("{kind:?} supports ambient dimension {supported}, got n = {n}")]
    DimensionMismatch {
        kind: GridKind,
        n: usize,
        supported: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    PeriodicCircle,
    AxisymPolar,
}

pub const MIN_GRID_NODES: usize = 8;

/// Uniform angular grid. Nodes and cot(theta) values are precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    m: usize,
    h: f64,
    nodes: Vec<f64>,
    cot: Vec<f64>,
}

impl Grid {
    pub fn periodic_circle(m: usize) -> Result<Grid, GridGeomError> {
        Self::check_m(m)?;
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let nodes: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
        Ok(Grid { kind: GridKind::PeriodicCircle, m, h, nodes, cot: Vec::new() })
    }

    pub fn axisym_polar(m: usize) -> Result<Grid, GridGeomError> {
        Self::check_m(m)?;
        let h = std::f64::consts::PI / m as f64;
        let nodes: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
        let cot = nodes.iter().map(|&t| 1.0 / t.tan()).collect();
        Ok(Grid { kind: GridKind::AxisymPolar, m, h, nodes, cot })
    }

    fn check_m(m: usize) -> Result<(), GridGeomError> {
        if m < MIN_GRID_NODES {
            Err(GridGeomError::TooCoarse { m, min: MIN_GRID_NODES })
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Stencil neighbors (phi_{i-1}, phi_{i+1}) including ghost handling.
    #[inline]
    fn neighbors(&self, phi: &[f64], i: usize) -> (f64, f64) {
        match self.kind {
            GridKind::PeriodicCircle => {
                let m = self.m;
                let prev = phi[(i + m - 1) % m];
                let next = phi[(i + 1) % m];
                (prev, next)
            }
            GridKind::AxisymPolar => {
                // even reflection: ghost(-1) mirrors cell 0, ghost(m) mirrors cell m-1
                let prev = if i == 0 { phi[0] } else { phi[i - 1] };
                let next = if i + 1 == self.m { phi[self.m - 1] } else { phi[i + 1] };
                (prev, next)
            }
        }
    }
}

/// Log-radius samples phi_i on a shared grid. r = exp(phi) stays positive by
/// construction, so star-shapedness about the origin is built in.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<Grid>,
    phi: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<Grid>, phi: Vec<f64>) -> Result<Self, GridGeomError> {
        if phi.len() != grid.len() {
            return Err(GridGeomError::LengthMismatch { len: phi.len(), m: grid.len() });
        }
        for (index, v) in phi.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridGeomError::NonFinite { index });
            }
        }
        Ok(RadialField { grid, phi })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self, GridGeomError> {
        let phi: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, phi)
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Result<Self, GridGeomError> {
        let m = grid.len();
        Self::new(grid, vec![value; m])
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn r(&self) -> Vec<f64> {
        self.phi.iter().map(|&p| p.exp()).collect()
    }

    /// Same shape scaled by exp(shift): phi -> phi + shift.
    pub fn offset(&self, shift: f64) -> RadialField {
        RadialField {
            grid: Arc::clone(&self.grid),
            phi: self.phi.iter().map(|&p| p + shift).collect(),
        }
    }

    pub(crate) fn phi_mut(&mut self) -> &mut Vec<f64> {
        &mut self.phi
    }
}

/// Centered first derivative d phi / d theta.
pub fn d1(field: &RadialField) -> Vec<f64> {
    let grid = field.grid();
    let phi = field.phi();
    let two_h = 2.0 * grid.spacing();
    (0..grid.len())
        .map(|i| {
            let (prev, next) = grid.neighbors(phi, i);
            (next - prev) / two_h
        })
        .collect()
}

/// Centered second derivative d^2 phi / d theta^2.
pub fn d2(field: &RadialField) -> Vec<f64> {
    let grid = field.grid();
    let phi = field.phi();
    let h2 = grid.spacing() * grid.spacing();
    (0..grid.len())
        .map(|i| {
            let (prev, next) = grid.neighbors(phi, i);
            (next - 2.0 * phi[i] + prev) / h2
        })
        .collect()
}

/// sigma_j of the curvature vector (kappa_mer, kappa_rot repeated n-1 times).
/// Only two distinct entries occur, so
///   sigma_j = C(n-1, j) kappa_rot^j + C(n-1, j-1) kappa_rot^{j-1} kappa_mer.
pub fn sigma_axisym(j: usize, kappa_mer: f64, kappa_rot: f64, n: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let rot_only = binomial(n - 1, j) * kappa_rot.powi(j as i32);
    let with_mer = binomial(n - 1, j - 1) * kappa_rot.powi(j as i32 - 1) * kappa_mer;
    rot_only + with_mer
}

/// Per-node extrinsic quantities of a radial graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryState {
    pub n: usize,
    pub k: usize,
    /// radius r = exp(phi)
    pub r: Vec<f64>,
    /// phi' (first tangential derivative)
    pub dphi: Vec<f64>,
    /// rho = sqrt(1 + phi'^2)
    pub rho: Vec<f64>,
    /// support function u = r / rho
    pub u: Vec<f64>,
    pub kappa_mer: Vec<f64>,
    /// rotational principal curvature; zeros on the circle (multiplicity 0)
    pub kappa_rot: Vec<f64>,
    pub sigma_k: Vec<f64>,
    /// speed function F = sigma_k^{1/beta}; NaN where sigma_k <= 0 makes the
    /// fractional power undefined
    pub f: Vec<f64>,
    /// weighted speed Phi = r^{alpha/beta} F
    pub big_phi: Vec<f64>,
}

impl GeometryState {
    pub(crate) fn empty(n: usize, k: usize) -> GeometryState {
        GeometryState {
            n,
            k,
            r: Vec::new(),
            dphi: Vec::new(),
            rho: Vec::new(),
            u: Vec::new(),
            kappa_mer: Vec::new(),
            kappa_rot: Vec::new(),
            sigma_k: Vec::new(),
            f: Vec::new(),
            big_phi: Vec::new(),
        }
    }

    /// Full principal-curvature vector at node i.
    pub fn kappa_at(&self, i: usize) -> KappaVector {
        let mut values = Vec::with_capacity(self.n);
        values.push(self.kappa_mer[i]);
        for _ in 1..self.n {
            values.push(self.kappa_rot[i]);
        }
        KappaVector::new(values).expect("geometry values are finite")
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub(crate) fn fill(&mut self, field: &RadialField, params: &FlowParams) {
        let grid = field.grid();
        let phi = field.phi();
        let m = grid.len();
        let n = params.n();
        self.n = n;
        self.k = params.k();
        let two_h = 2.0 * grid.spacing();
        let h2 = grid.spacing() * grid.spacing();
        let inv_beta = params.inv_beta();
        let speed_exp_plus_1 = params.alpha() / params.beta();

        resize(&mut self.r, m);
        resize(&mut self.dphi, m);
        resize(&mut self.rho, m);
        resize(&mut self.u, m);
        resize(&mut self.kappa_mer, m);
        resize(&mut self.kappa_rot, m);
        resize(&mut self.sigma_k, m);
        resize(&mut self.f, m);
        resize(&mut self.big_phi, m);

        let k = params.k();
        // binomial coefficients of the two-entry sigma_k formula
        let b_rot = binomial(n - 1, k);
        let b_mer = binomial(n - 1, k - 1);

        for i in 0..m {
            let (prev, next) = grid.neighbors(phi, i);
            let p1 = (next - prev) / two_h;
            let p2 = (next - 2.0 * phi[i] + prev) / h2;
            let r = phi[i].exp();
            let rho2 = 1.0 + p1 * p1;
            let rho = rho2.sqrt();
            let inv_rrho = 1.0 / (r * rho);
            let kappa_mer = (1.0 - p2 / rho2) * inv_rrho;
            let kappa_rot = match grid.kind() {
                GridKind::PeriodicCircle => 0.0,
                GridKind::AxisymPolar => (1.0 - p1 * grid.cot[i]) * inv_rrho,
            };
            let sigma_k = if k == 1 {
                // sigma_1 = kappa_mer + (n-1) kappa_rot
                kappa_mer + (n as f64 - 1.0) * kappa_rot
            } else {
                b_rot * kappa_rot.powi(k as i32) + b_mer * kappa_rot.powi(k as i32 - 1) * kappa_mer
            };
            let f = if sigma_k > 0.0 {
                pow_real(sigma_k, inv_beta)
            } else if inv_beta == 1.0 {
                sigma_k
            } else {
                f64::NAN
            };
            self.r[i] = r;
            self.dphi[i] = p1;
            self.rho[i] = rho;
            self.u[i] = r / rho;
            self.kappa_mer[i] = kappa_mer;
            self.kappa_rot[i] = kappa_rot;
            self.sigma_k[i] = sigma_k;
            self.f[i] = f;
            self.big_phi[i] = pow_real(r, speed_exp_plus_1) * f;
        }
    }
}

fn resize(v: &mut Vec<f64>, m: usize) {
    v.clear();
    v.resize(m, 0.0);
}

/// Extrinsic geometry of the graph for the given parameters. The grid kind
/// must match the ambient dimension: curves live on the periodic circle,
/// n >= 2 hypersurfaces of revolution on the polar grid.
pub fn geometry(field: &RadialField, params: &FlowParams) -> Result<GeometryState, GridGeomError> {
    check_grid_dimension(field.grid(), params.n())?;
    let mut state = GeometryState::empty(params.n(), params.k());
    state.fill(field, params);
    Ok(state)
}

pub(crate) fn check_grid_dimension(grid: &Grid, n: usize) -> Result<(), GridGeomError> {
    match grid.kind() {
        GridKind::PeriodicCircle if n != 1 => Err(GridGeomError::DimensionMismatch {
            kind: GridKind::PeriodicCircle,
            n,
            supported: "n = 1",
        }),
        GridKind::AxisymPolar if n < 2 => Err(GridGeomError::DimensionMismatch {
            kind: GridKind::AxisymPolar,
            n,
            supported: "n >= 2",
        }),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, k: usize, alpha: f64, beta: f64) -> FlowParams {
        FlowParams::new(n, k, alpha, beta).unwrap()
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        for grid in [Grid::periodic_circle(32).unwrap(), Grid::axisym_polar(32).unwrap()] {
            let field = RadialField::constant(Arc::new(grid), 0.7).unwrap();
            assert!(d1(&field).iter().all(|&v| v == 0.0));
            assert!(d2(&field).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn derivatives_second_order_on_circle() {
        let err = |m: usize| -> (f64, f64) {
            let grid = Arc::new(Grid::periodic_circle(m).unwrap());
            let field = RadialField::from_fn(Arc::clone(&grid), |t| t.cos()).unwrap();
            let e1 = d1(&field)
                .iter()
                .zip(grid.nodes())
                .map(|(&v, &t)| (v + t.sin()).abs())
                .fold(0.0f64, f64::max);
            let e2 = d2(&field)
                .iter()
                .zip(grid.nodes())
                .map(|(&v, &t)| (v + t.cos()).abs())
                .fold(0.0f64, f64::max);
            (e1, e2)
        };
        let (a1, a2) = err(64);
        let (b1, b2) = err(128);
        // second-order stencils: error drops by about 4x per refinement
        assert!(a1 / b1 > 3.5 && a1 / b1 < 4.5, "d1 ratio {}", a1 / b1);
        assert!(a2 / b2 > 3.5 && a2 / b2 < 4.5, "d2 ratio {}", a2 / b2);
    }

    #[test]
    fn derivatives_second_order_on_polar_grid_including_poles() {
        // even profile, so the reflection ghosts are exact up to O(h^2)
        let err = |m: usize| -> f64 {
            let grid = Arc::new(Grid::axisym_polar(m).unwrap());
            let field = RadialField::from_fn(Arc::clone(&grid), |t| 0.1 * t.cos()).unwrap();
            d1(&field)
                .iter()
                .zip(grid.nodes())
                .map(|(&v, &t)| (v + 0.1 * t.sin()).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn sphere_geometry_is_exact() {
        let p = params(2, 1, 3.0, 1.0);
        let a = 2.0f64;
        let grid = Arc::new(Grid::axisym_polar(64).unwrap());
        let field = RadialField::constant(grid, a.ln()).unwrap();
        let geo = geometry(&field, &p).unwrap();
        for i in 0..geo.len() {
            assert!((geo.r[i] - a).abs() < 1e-14);
            assert!((geo.kappa_mer[i] - 1.0 / a).abs() < 1e-14);
            assert!((geo.kappa_rot[i] - 1.0 / a).abs() < 1e-14);
            assert!((geo.u[i] - a).abs() < 1e-14);
            // Phi = r^{alpha/beta} sigma_k^{1/beta} = a^3 * (2/a) = gamma a^{(alpha-k)/beta}
            let want = p.gamma() * pow_real(a, (p.alpha() - p.k() as f64) / p.beta());
            assert!((geo.big_phi[i] - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn support_function_bounds() {
        let p = params(2, 1, 3.0, 1.0);
        let grid = Arc::new(Grid::axisym_polar(64).unwrap());
        let field = crate::reference::elongated_initial(Arc::clone(&grid), 2.0).unwrap();
        let geo = geometry(&field, &p).unwrap();
        let dphi = d1(&field);
        for i in 0..geo.len() {
            assert!(geo.u[i] <= geo.r[i] + 1e-15);
            if dphi[i] == 0.0 {
                assert!((geo.u[i] - geo.r[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let p = params(3, 2, 2.5, 2.0);
        let grid = Arc::new(Grid::axisym_polar(48).unwrap());
        let field = RadialField::from_fn(Arc::clone(&grid), |t| 0.2 * t.cos()).unwrap();
        let lam: f64 = 1.7;
        let scaled = field.offset(lam.ln());
        let g0 = geometry(&field, &p).unwrap();
        let g1 = geometry(&scaled, &p).unwrap();
        let k_exp = -(p.k() as f64) / p.beta();
        let phi_exp = (p.alpha() - p.k() as f64) / p.beta();
        for i in 0..g0.len() {
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            assert!(rel(g1.r[i], lam * g0.r[i]) < 1e-12);
            assert!(rel(g1.u[i], lam * g0.u[i]) < 1e-12);
            assert!(rel(g1.kappa_mer[i], g0.kappa_mer[i] / lam) < 1e-12);
            assert!(rel(g1.kappa_rot[i], g0.kappa_rot[i] / lam) < 1e-12);
            assert!(rel(g1.f[i], lam.powf(k_exp) * g0.f[i]) < 1e-12);
            assert!(rel(g1.big_phi[i], lam.powf(phi_exp) * g0.big_phi[i]) < 1e-12);
        }
    }

    #[test]
    fn sigma_axisym_matches_general_sigma() {
        use crate::symfun::{sigma, KappaVector};
        let cases = [
            (2usize, 0.7, -0.4),
            (3, 1.3, 0.9),
            (4, -0.2, 1.1),
            (5, 2.0, 0.3),
            (1, 0.8, 0.0),
        ];
        for &(n, kmer, krot) in &cases {
            let mut values = vec![kmer];
            values.extend(std::iter::repeat(krot).take(n - 1));
            let kappa = KappaVector::new(values).unwrap();
            for j in 0..=n {
                let fast = sigma_axisym(j, kmer, krot, n);
                let general = sigma(j, &kappa);
                assert!(
                    (fast - general).abs() <= 1e-13 * general.abs().max(1.0),
                    "n={n} j={j}: {fast} vs {general}"
                );
            }
        }
    }

    #[test]
    fn poles_are_discretely_umbilic() {
        // for an even smooth profile the two curvatures agree at the poles;
        // the nearest cell center sits at theta = h/2, so the gap is O(h^2)
        let p = params(2, 1, 3.0, 1.0);
        let gap = |m: usize| -> f64 {
            let grid = Arc::new(Grid::axisym_polar(m).unwrap());
            let field = RadialField::from_fn(Arc::clone(&grid), |t| 0.1 * t.cos()).unwrap();
            let geo = geometry(&field, &p).unwrap();
            (geo.kappa_rot[0] - geo.kappa_mer[0]).abs()
        };
        let ratio = gap(64) / gap(128);
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn grid_dimension_checks() {
        let p1 = params(1, 1, 2.0, 1.0);
        let p2 = params(2, 1, 2.0, 1.0);
        let circle = Arc::new(Grid::periodic_circle(16).unwrap());
        let polar = Arc::new(Grid::axisym_polar(16).unwrap());
        let f_circle = RadialField::constant(Arc::clone(&circle), 0.0).unwrap();
        let f_polar = RadialField::constant(Arc::clone(&polar), 0.0).unwrap();
        assert!(geometry(&f_circle, &p1).is_ok());
        assert!(geometry(&f_polar, &p2).is_ok());
        assert!(matches!(
            geometry(&f_circle, &p2),
            Err(GridGeomError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            geometry(&f_polar, &p1),
            Err(GridGeomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            Grid::periodic_circle(4),
            Err(GridGeomError::TooCoarse { m: 4, min: MIN_GRID_NODES })
        ));
        let grid = Arc::new(Grid::axisym_polar(16).unwrap());
        assert!(matches!(
            RadialField::new(Arc::clone(&grid), vec![0.0; 5]),
            Err(GridGeomError::LengthMismatch { len: 5, m: 16 })
        ));
        assert!(matches!(
            RadialField::new(grid, vec![f64::NAN; 16]),
            Err(GridGeomError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn circle_curvature_matches_polar_closed_form() {
        // r(theta) = 1 + 0.3 cos(theta):
        // kappa = (r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^{3/2}
        let p = params(1, 1, 2.0, 1.0);
        let grid = Arc::new(Grid::periodic_circle(256).unwrap());
        let field =
            RadialField::from_fn(Arc::clone(&grid), |t| (1.0 + 0.3 * t.cos()).ln()).unwrap();
        let geo = geometry(&field, &p).unwrap();
        for (i, &t) in grid.nodes().iter().enumerate() {
            let r = 1.0 + 0.3 * t.cos();
            let rp = -0.3 * t.sin();
            let rpp = -0.3 * t.cos();
            let want = (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp).powf(1.5);
            assert!(
                (geo.kappa_mer[i] - want).abs() < 2e-4,
                "node {i}: {} vs {want}",
                geo.kappa_mer[i]
            );
        }
    }
}
