//! Runtime verification suite.
//!
//! Three groups of checks, all deterministic given a seed:
//!
//! * algebraic properties of the elementary symmetric functions and the two
//!   quadratic-form inequalities the convergence argument leans on, each on
//!   a stream of seeded random samples;
//! * geometry oracles: the discrete principal curvatures compared against a
//!   closed-form polar-curve formula and against an independent
//!   embedding-based finite-difference reconstruction, with measured
//!   convergence order;
//! * dynamics: simulated spheres against the closed-form radius, the radius
//!   closed form against direct integration of its defining equation, and
//!   the unnormalized-to-normalized change of variables.
//!
//! `ANISOFLOW_SEED` overrides the sample seed. `ANISOFLOW_FAULT_INJECT=<id>`
//! forces the named check to report failure; it exists so the reporting
//! pipeline itself can be negative-controlled end to end.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::record;
use crate::flow_engine::{rescale_factor, run, tau, RunStatus, Scheme, StepperConfig};
use crate::grid_geom::{geometry, Grid, RadialField};
use crate::params::{FlowParams, Mode};
use crate::reference::{elongated_initial, sphere_radius};
use crate::symfun::{
    binomial, cone_membership, sigma, sigma_deleted, sigma_gradient, sigma_hessian_form,
    KappaVector, SymmetricMatrix,
};

pub const DEFAULT_SEED: u64 = 0x616e_69736f;
pub const SEED_ENV: &str = "ANISOFLOW_SEED";
pub const FAULT_ENV: &str = "ANISOFLOW_FAULT_INJECT";

/// Default sample count per randomized property.
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub detail: String,
}

#[derive(Debug)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Run every check with seed and fault hook taken from the environment.
pub fn run_all() -> VerifyReport {
    let seed = std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .unwrap_or(DEFAULT_SEED);
    let fault = std::env::var(FAULT_ENV).ok();
    run_with(seed, DEFAULT_SAMPLES, fault.as_deref())
}

pub fn run_with(seed: u64, samples: usize, fault: Option<&str>) -> VerifyReport {
    let mut checks = symfun_checks(seed, samples);
    checks.extend(geometry_checks());
    checks.extend(dynamics_checks());
    if let Some(id) = fault {
        for c in &mut checks {
            if c.id == id {
                c.passed = false;
                c.detail = format!("fault injected via {FAULT_ENV} (negative control)");
            }
        }
    }
    VerifyReport { seed, checks }
}

fn seeded(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Accumulates the worst signed violation (positive = failed tolerance).
struct Tally {
    worst: f64,
    failures: usize,
    samples: usize,
}

impl Tally {
    fn new() -> Tally {
        Tally { worst: f64::NEG_INFINITY, failures: 0, samples: 0 }
    }

    /// `margin` is violation minus tolerance: > 0 fails the sample.
    fn push(&mut self, margin: f64) {
        self.samples += 1;
        if !(margin <= 0.0) {
            self.failures += 1;
        }
        if margin > self.worst || self.worst == f64::NEG_INFINITY {
            self.worst = margin;
        }
    }

    fn result(self, id: &'static str) -> CheckResult {
        CheckResult {
            id,
            passed: self.failures == 0,
            samples: self.samples,
            detail: format!("{} failures, worst margin {:+.3e}", self.failures, self.worst),
        }
    }
}

fn sample_mixed(rng: &mut ChaCha8Rng, n: usize) -> KappaVector {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    KappaVector::new(v).unwrap()
}

/// Positive sorted sample with occasional downward shifts, rejection-filtered
/// into Gamma_m^+; falls back to the all-positive draw when rejection stalls.
fn sample_in_cone(rng: &mut ChaCha8Rng, n: usize, m: usize) -> KappaVector {
    for _ in 0..200 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
        if rng.gen_bool(0.5) {
            let shift = rng.gen_range(0.0..1.5);
            let i = rng.gen_range(0..n);
            v[i] -= shift;
        }
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let kappa = KappaVector::new(v).unwrap();
        if cone_membership(&kappa, 1e-9).max_k >= m {
            return kappa;
        }
    }
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    KappaVector::new(v).unwrap().sorted_non_increasing()
}

fn sample_positive(rng: &mut ChaCha8Rng, n: usize) -> KappaVector {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.5)).collect();
    KappaVector::new(v).unwrap()
}

fn sample_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let mut eta = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            eta.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    eta
}

/// All randomized symmetric-function checks at `samples` samples each.
pub fn symfun_checks(seed: u64, samples: usize) -> Vec<CheckResult> {
    vec![
        check_expansion_identity(seed, samples),
        check_newton_maclaurin(seed, samples),
        check_maclaurin_chain(seed, samples),
        check_radial_identity(seed, samples),
        check_dominant_entry(seed, samples),
        check_homogeneity(seed, samples),
        check_root_concavity(seed, samples),
        check_gradient_fd(seed, samples),
        check_hessian_fd(seed, samples),
        check_hessian_concavity_form(seed, samples),
        check_inverse_weingarten_form(seed, samples),
    ]
}

/// sigma_m = sigma_m(k|i) + k_i sigma_{m-1}(k|i) for arbitrary k.
fn check_expansion_identity(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 1);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let i = rng.gen_range(0..n);
        let kappa = sample_mixed(&mut rng, n);
        let lhs = sigma(m, &kappa);
        let without = sigma_deleted(m, &kappa, &[i]).unwrap();
        let lower = sigma_deleted(m - 1, &kappa, &[i]).unwrap();
        let rhs = without + kappa.values()[i] * lower;
        let scale = 1.0 + lhs.abs().max(without.abs()).max((kappa.values()[i] * lower).abs());
        tally.push((lhs - rhs).abs() - 1e-10 * scale);
    }
    tally.result("sigma-expansion-identity")
}

/// sigma_m sigma_{m-2} <= (m-1)(n-m+1)/(m(n-m+2)) sigma_{m-1}^2 on Gamma_m^+.
fn check_newton_maclaurin(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 2);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=n);
        let kappa = sample_in_cone(&mut rng, n, m);
        let (nf, mf) = (n as f64, m as f64);
        let coef = (mf - 1.0) * (nf - mf + 1.0) / (mf * (nf - mf + 2.0));
        let lhs = sigma(m, &kappa) * sigma(m - 2, &kappa);
        let rhs = coef * sigma(m - 1, &kappa).powi(2);
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        tally.push(lhs - rhs - 1e-12 * scale);
    }
    tally.result("newton-maclaurin")
}

/// (sigma_m / C_n^m)^{1/m} <= (sigma_l / C_n^l)^{1/l} for l <= m on Gamma_m^+.
fn check_maclaurin_chain(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 3);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let l = rng.gen_range(1..=m);
        let kappa = sample_in_cone(&mut rng, n, m);
        let lhs = (sigma(m, &kappa) / binomial(n, m)).powf(1.0 / m as f64);
        let rhs = (sigma(l, &kappa) / binomial(n, l)).powf(1.0 / l as f64);
        tally.push(lhs - rhs - 1e-12 * (1.0 + rhs.abs()));
    }
    tally.result("maclaurin-chain")
}

/// sum_i dsigma_m/dk_i k_i^2 = sigma_1 sigma_m - (m+1) sigma_{m+1}.
fn check_radial_identity(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 4);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let kappa = sample_mixed(&mut rng, n);
        let grad = sigma_gradient(m, &kappa);
        let lhs: f64 =
            grad.iter().zip(kappa.values()).map(|(g, k)| g * k * k).sum();
        let rhs = sigma(1, &kappa) * sigma(m, &kappa) - (m as f64 + 1.0) * sigma(m + 1, &kappa);
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        tally.push((lhs - rhs).abs() - 1e-10 * scale);
    }
    tally.result("sigma-radial-identity")
}

/// For sorted kappa in Gamma_k^+: kappa_1 sigma_{k-1}(kappa|1) >= (k/n) sigma_k.
fn check_dominant_entry(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 5);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..=n);
        let kappa = sample_in_cone(&mut rng, n, k).sorted_non_increasing();
        let lhs = kappa.values()[0] * sigma_deleted(k - 1, &kappa, &[0]).unwrap();
        let rhs = k as f64 / n as f64 * sigma(k, &kappa);
        tally.push(rhs - lhs - 1e-12 * (1.0 + lhs.abs()));
    }
    tally.result("dominant-entry-bound")
}

/// sigma_m(lambda kappa) = lambda^m sigma_m(kappa).
fn check_homogeneity(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 6);
    let mut tally = Tally::new();
    for s in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let lambda = if s % 2 == 0 { 2.0 } else { 0.5 };
        let kappa = sample_mixed(&mut rng, n);
        let scaled =
            KappaVector::new(kappa.values().iter().map(|v| lambda * v).collect()).unwrap();
        let lhs = sigma(m, &scaled);
        let rhs = lambda.powi(m as i32) * sigma(m, &kappa);
        tally.push((lhs - rhs).abs() - 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }
    tally.result("homogeneity")
}

/// Concavity of sigma_m^{1/m} on Gamma_m^+ at random midpoints.
fn check_root_concavity(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 7);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let a = sample_in_cone(&mut rng, n, m);
        let b = sample_in_cone(&mut rng, n, m);
        let lam: f64 = rng.gen_range(0.05..0.95);
        let mix = KappaVector::new(
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| lam * x + (1.0 - lam) * y)
                .collect(),
        )
        .unwrap();
        let root = |k: &KappaVector| sigma(m, k).powf(1.0 / m as f64);
        // the cone is convex, so the mixture is admissible and the root real
        let lhs = lam * root(&a) + (1.0 - lam) * root(&b);
        let rhs = root(&mix);
        tally.push(lhs - rhs - 1e-12 * (1.0 + rhs.abs()));
    }
    tally.result("root-concavity")
}

/// sigma_gradient against central finite differences of sigma.
fn check_gradient_fd(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 8);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=n);
        let kappa = sample_mixed(&mut rng, n);
        let grad = sigma_gradient(m, &kappa);
        let i = rng.gen_range(0..n);
        let eps = 1e-6 * (1.0 + kappa.values()[i].abs());
        let mut up = kappa.values().to_vec();
        up[i] += eps;
        let mut dn = kappa.values().to_vec();
        dn[i] -= eps;
        let fd = (sigma(m, &KappaVector::new(up).unwrap())
            - sigma(m, &KappaVector::new(dn).unwrap()))
            / (2.0 * eps);
        let scale = 1.0 + grad[i].abs();
        tally.push((grad[i] - fd).abs() - 1e-8 * scale);
    }
    tally.result("gradient-matches-fd")
}

/// sigma_k of a full symmetric matrix via power sums and Newton's identities;
/// the independent path used to validate the diagonal hessian form.
fn matrix_sigma_k(a: &[f64], n: usize, k: usize) -> f64 {
    // power sums p_j = tr(a^j)
    let mut pows = vec![0.0; k + 1];
    let mut cur = a.to_vec();
    for j in 1..=k {
        pows[j] = (0..n).map(|i| cur[i * n + i]).sum();
        if j < k {
            let mut next = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += cur[r * n + l] * a[l * n + c];
                    }
                    next[r * n + c] = acc;
                }
            }
            cur = next;
        }
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for j in 1..=k {
        let mut acc = 0.0;
        let mut sign = 1.0;
        for i in 1..=j {
            acc += sign * e[j - i] * pows[i];
            sign = -sign;
        }
        e[j] = acc / j as f64;
    }
    e[k]
}

/// Quadratic form of the sigma_k matrix second derivative against a central
/// second difference of sigma_k(diag(kappa) + s eta) at s = 0.
fn check_hessian_fd(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 9);
    let mut tally = Tally::new();
    for _ in 0..samples {
        let n = rng.gen_range(2..=5);
        let k = rng.gen_range(2..=n.min(4));
        let kappa = sample_in_cone(&mut rng, n, k);
        let eta = sample_symmetric(&mut rng, n);
        let q = sigma_hessian_form(k, &kappa, &eta).unwrap();
        let eps = 3e-4;
        let eval = |s: f64| {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = s * eta.get(i, j);
                }
                a[i * n + i] += kappa.values()[i];
            }
            matrix_sigma_k(&a, n, k)
        };
        let fd = (eval(eps) - 2.0 * eval(0.0) + eval(-eps)) / (eps * eps);
        let scale = 1.0 + q.abs().max(fd.abs());
        tally.push((q - fd).abs() - 1e-6 * scale);
    }
    tally.result("hessian-matches-fd")
}

/// The concavity-type bound on the sigma_k quadratic form: for diagonal
/// kappa in Gamma_k^+ (k >= 2) and symmetric eta, with
/// S := sum_p sigma_{k-1}(kappa|p) eta_pp and T := tr(eta),
///
///   Q(eta) <= -sigma_k (S/sigma_k - T/H)
///             (((2-k)/(k-1)) S/sigma_k - (k/(k-1)) T/H),   H = sigma_1.
fn check_hessian_concavity_form(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 10);
    let mut tally = Tally::new();
    let combos: Vec<(usize, usize)> =
        [(2usize, 3usize), (2, 4), (2, 5), (3, 3), (3, 4), (3, 5)].to_vec();
    for s in 0..samples {
        let (k, n) = combos[s % combos.len()];
        let kappa = sample_in_cone(&mut rng, n, k);
        let eta = sample_symmetric(&mut rng, n);
        let q = sigma_hessian_form(k, &kappa, &eta).unwrap();
        let sk = sigma(k, &kappa);
        let h = sigma(1, &kappa);
        let grad_s: f64 = (0..n)
            .map(|p| sigma_deleted(k - 1, &kappa, &[p]).unwrap() * eta.get(p, p))
            .sum();
        let tr: f64 = (0..n).map(|p| eta.get(p, p)).sum();
        let kf = k as f64;
        let a = grad_s / sk - tr / h;
        let b = (2.0 - kf) / (kf - 1.0) * grad_s / sk - kf / (kf - 1.0) * tr / h;
        let rhs = -sk * a * b;
        let scale = 1.0 + q.abs() + rhs.abs();
        tally.push(q - rhs - 1e-10 * scale);
    }
    tally.result("hessian-concavity-form")
}

/// The inverse-Weingarten-compensated convexity bound for G = sigma_k^{1/k}
/// at diagonal h with all entries positive: for symmetric eta,
///
///   Gdd(eta,eta) + 2 sum_{p,q} Gd_p eta_pq^2 / h_q
///       >= 2 G^{-1} (sum_p Gd_p eta_pp)^2
///
/// where Gd_p = (1/k) sigma_k^{1/k-1} sigma_{k-1}(h|p) and Gdd is the chain
/// rule through Q and the squared gradient.
fn check_inverse_weingarten_form(seed: u64, samples: usize) -> CheckResult {
    let mut rng = seeded(seed, 11);
    let mut tally = Tally::new();
    let combos: Vec<(usize, usize)> =
        [(2usize, 3usize), (2, 4), (2, 5), (3, 3), (3, 4), (3, 5)].to_vec();
    for s in 0..samples {
        let (k, n) = combos[s % combos.len()];
        let hvec = sample_positive(&mut rng, n);
        let eta = sample_symmetric(&mut rng, n);
        let kf = k as f64;
        let sk = sigma(k, &hvec);
        let g = sk.powf(1.0 / kf);
        let grad: Vec<f64> =
            (0..n).map(|p| sigma_deleted(k - 1, &hvec, &[p]).unwrap()).collect();
        let gd: Vec<f64> =
            grad.iter().map(|d| d / kf * sk.powf(1.0 / kf - 1.0)).collect();
        let q = sigma_hessian_form(k, &hvec, &eta).unwrap();
        let s_eta: f64 = (0..n).map(|p| grad[p] * eta.get(p, p)).sum();
        let gdd = sk.powf(1.0 / kf - 1.0) / kf * q
            + (1.0 / kf) * (1.0 / kf - 1.0) * sk.powf(1.0 / kf - 2.0) * s_eta * s_eta;
        let mut inverse_term = 0.0;
        for p in 0..n {
            for qi in 0..n {
                let e = eta.get(p, qi);
                inverse_term += gd[p] * e * e / hvec.values()[qi];
            }
        }
        let lhs = gdd + 2.0 * inverse_term;
        let diag_proj: f64 = (0..n).map(|p| gd[p] * eta.get(p, p)).sum();
        let rhs = 2.0 / g * diag_proj * diag_proj;
        let scale = 1.0 + lhs.abs() + rhs.abs();
        tally.push(rhs - lhs - 1e-10 * scale);
    }
    tally.result("inverse-weingarten-form")
}

// ---------------------------------------------------------------------------
// geometry oracles

const ORACLE_SIZES: [usize; 3] = [64, 128, 256];
const MIN_ORDER: f64 = 1.9;

fn test_profile(theta: f64) -> f64 {
    1.0 + 0.3 * theta.cos()
}

/// Least-squares slope of log(err) against log(h).
fn ls_order(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

fn order_check(id: &'static str, errs: Vec<(f64, f64)>) -> CheckResult {
    let order = ls_order(&errs);
    let detail = format!(
        "order {:.3}; errors {}",
        order,
        errs.iter().map(|e| format!("{:.3e}", e.1)).collect::<Vec<_>>().join(", ")
    );
    CheckResult { id, passed: order >= MIN_ORDER, samples: errs.len(), detail }
}

/// Discrete curvature of the planar curve r(theta) = 1 + 0.3 cos theta
/// against the classical closed form with analytic derivatives.
fn polar_closed_form_error(m: usize) -> f64 {
    let p = FlowParams::new(1, 1, 2.0, 1.0).unwrap();
    let grid = Arc::new(Grid::periodic_circle(m).unwrap());
    let field = RadialField::from_fn(Arc::clone(&grid), |t| test_profile(t).ln()).unwrap();
    let geo = geometry(&field, &p).unwrap();
    let mut worst = 0.0f64;
    for (i, &t) in grid.nodes().iter().enumerate() {
        let r = test_profile(t);
        let rp = -0.3 * t.sin();
        let rpp = -0.3 * t.cos();
        let want = (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp).powf(1.5);
        worst = worst.max((geo.kappa_mer[i] - want).abs());
    }
    worst
}

/// Discrete curvature against an embedding oracle: place the curve in the
/// plane, difference the positions, and use kappa = (x'y'' - y'x'')/|X'|^3.
fn embedding_curve_error(m: usize) -> f64 {
    let p = FlowParams::new(1, 1, 2.0, 1.0).unwrap();
    let grid = Arc::new(Grid::periodic_circle(m).unwrap());
    let field = RadialField::from_fn(Arc::clone(&grid), |t| test_profile(t).ln()).unwrap();
    let geo = geometry(&field, &p).unwrap();
    let h = grid.spacing();
    let r = field.r();
    let xy = |i: usize| {
        let t = grid.nodes()[i];
        (r[i] * t.cos(), r[i] * t.sin())
    };
    let mut worst = 0.0f64;
    for i in 0..m {
        let prev = xy((i + m - 1) % m);
        let here = xy(i);
        let next = xy((i + 1) % m);
        let d1 = ((next.0 - prev.0) / (2.0 * h), (next.1 - prev.1) / (2.0 * h));
        let d2 = (
            (next.0 - 2.0 * here.0 + prev.0) / (h * h),
            (next.1 - 2.0 * here.1 + prev.1) / (h * h),
        );
        let speed = (d1.0 * d1.0 + d1.1 * d1.1).sqrt();
        let kappa = (d1.0 * d2.1 - d1.1 * d2.0) / (speed * speed * speed);
        worst = worst.max((geo.kappa_mer[i] - kappa).abs());
    }
    worst
}

/// Discrete curvatures of the surface of revolution with meridian profile
/// r(theta) against an embedding oracle built on the generating curve
/// c(theta) = (r sin theta, r cos theta): difference c, rotate the tangent
/// to the outward normal, and read both principal curvatures from the
/// fundamental forms (the rotational direction is exact by symmetry).
fn embedding_surface_error(m: usize) -> f64 {
    let p = FlowParams::new(2, 1, 3.0, 1.0).unwrap();
    let grid = Arc::new(Grid::axisym_polar(m).unwrap());
    let field = RadialField::from_fn(Arc::clone(&grid), |t| test_profile(t).ln()).unwrap();
    let geo = geometry(&field, &p).unwrap();
    let h = grid.spacing();
    let r = field.r();
    // signed-theta meridian: even profile continues smoothly through both
    // poles, matching the grid's reflection ghosts
    let c = |i: isize| -> (f64, f64) {
        let (theta, rv) = if i < 0 {
            (-grid.nodes()[(-i - 1) as usize], r[(-i - 1) as usize])
        } else if (i as usize) < m {
            (grid.nodes()[i as usize], r[i as usize])
        } else {
            let mirror = 2 * m as isize - 1 - i;
            (2.0 * std::f64::consts::PI - grid.nodes()[mirror as usize], r[mirror as usize])
        };
        (rv * theta.sin(), rv * theta.cos())
    };
    let mut worst = 0.0f64;
    for i in 0..m as isize {
        let prev = c(i - 1);
        let here = c(i);
        let next = c(i + 1);
        let d1 = ((next.0 - prev.0) / (2.0 * h), (next.1 - prev.1) / (2.0 * h));
        let d2 = (
            (next.0 - 2.0 * here.0 + prev.0) / (h * h),
            (next.1 - 2.0 * here.1 + prev.1) / (h * h),
        );
        let speed2 = d1.0 * d1.0 + d1.1 * d1.1;
        let speed = speed2.sqrt();
        // outward normal: tangent rotated by +90 degrees in the (rho, z) plane
        let nrm = (-d1.1 / speed, d1.0 / speed);
        let kappa_mer = -(d2.0 * nrm.0 + d2.1 * nrm.1) / speed2;
        let kappa_rot = nrm.0 / here.0;
        let iu = i as usize;
        worst = worst.max((geo.kappa_mer[iu] - kappa_mer).abs());
        worst = worst.max((geo.kappa_rot[iu] - kappa_rot).abs());
    }
    worst
}

/// Curvature oracle gate: closed form and embedding reconstructions, each
/// with measured second-order convergence.
pub fn geometry_checks() -> Vec<CheckResult> {
    let errs = |f: fn(usize) -> f64| -> Vec<(f64, f64)> {
        ORACLE_SIZES
            .iter()
            .map(|&m| (std::f64::consts::PI / m as f64, f(m)))
            .collect()
    };
    vec![
        order_check("curvature-polar-closed-form", errs(polar_closed_form_error)),
        order_check("curvature-embedding-curve", errs(embedding_curve_error)),
        order_check("curvature-embedding-surface", errs(embedding_surface_error)),
    ]
}

// ---------------------------------------------------------------------------
// dynamics

/// Closed-form radius against a fine fixed-step integration of
/// da/dt = gamma(a - a^{1+s}) (normalized) or -gamma a^{1+s} (unnormalized).
fn check_sphere_ode_agreement() -> CheckResult {
    let cases = [
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), 2.0, Mode::Normalized),
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), 0.6, Mode::Unnormalized),
        (FlowParams::new(2, 2, 4.0, 2.0).unwrap(), 1.5, Mode::Normalized),
        (FlowParams::new(2, 1, 1.5, 1.0).unwrap(), 1.3, Mode::Normalized),
        (FlowParams::new(3, 2, 3.5, 1.5).unwrap(), 0.9, Mode::Normalized),
    ];
    let mut worst = 0.0f64;
    for (p, a0, mode) in cases {
        let gamma = p.gamma();
        let s = p.regime_exp();
        let rhs = |a: f64| match mode {
            Mode::Normalized => gamma * (a - a.powf(1.0 + s)),
            Mode::Unnormalized => -gamma * a.powf(1.0 + s),
        };
        let steps = 20_000;
        let dt = 1.0 / steps as f64;
        let mut a = a0;
        for i in 0..steps {
            let k1 = rhs(a);
            let k2 = rhs(a + 0.5 * dt * k1);
            let k3 = rhs(a + 0.5 * dt * k2);
            let k4 = rhs(a + dt * k3);
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let t = dt * (i + 1) as f64;
            let want = sphere_radius(t, a0, &p, mode).unwrap();
            worst = worst.max((a - want).abs() / want.max(1.0));
        }
    }
    CheckResult {
        id: "sphere-closed-form-vs-ode",
        passed: worst < 1e-10,
        samples: 5,
        detail: format!("worst relative deviation {worst:.3e}"),
    }
}

/// Simulated round sphere against the closed-form radius (the full grid
/// pipeline, small m: spatial error vanishes on uniform states).
fn check_sphere_flow_agreement() -> CheckResult {
    let grid = Arc::new(Grid::axisym_polar(32).unwrap());
    let cfg = StepperConfig {
        t_end: 1.0,
        sphere_dev_tol: 0.0,
        record_every: 10,
        ..StepperConfig::default()
    };
    let mut worst = 0.0f64;
    let mut detail_status = true;
    for (p, a0) in [
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), 2.0f64),
        (FlowParams::new(2, 1, 2.0, 1.0).unwrap(), 2.0f64),
    ] {
        let field = RadialField::constant(Arc::clone(&grid), a0.ln()).unwrap();
        let out = run(&field, &p, &cfg, Mode::Normalized).unwrap();
        detail_status &= out.status == RunStatus::TEnd;
        for rec in &out.series {
            let want = sphere_radius(rec.t, a0, &p, Mode::Normalized).unwrap();
            worst = worst.max((rec.r_max - want).abs() / want);
        }
    }
    CheckResult {
        id: "sphere-flow-vs-closed-form",
        passed: detail_status && worst < 1e-8,
        samples: 2,
        detail: format!("worst relative deviation {worst:.3e}"),
    }
}

/// Linear interpolation of snapshot fields at a target time.
fn interp_phi(snaps: &[(f64, &[f64])], target: f64) -> Option<Vec<f64>> {
    if snaps.len() < 2 {
        return None;
    }
    let idx = snaps.iter().position(|(t, _)| *t >= target)?;
    if idx == 0 {
        return if snaps[0].0 == target { Some(snaps[0].1.to_vec()) } else { None };
    }
    let (t0, p0) = snaps[idx - 1];
    let (t1, p1) = snaps[idx];
    let w = if t1 > t0 { (target - t0) / (t1 - t0) } else { 0.0 };
    Some(p0.iter().zip(p1).map(|(a, b)| a + w * (b - a)).collect())
}

/// Evolve the same body unnormalized and normalized; mapping the first
/// through (r, t) -> (r / rescale_factor, tau) must land on the second.
/// Returns the worst pointwise radial deviation at matched tau times.
pub fn normalization_deviation(
    params: &FlowParams,
    aspect: f64,
    m: usize,
    t_end_unnorm: f64,
    snapshot_every: usize,
) -> Result<f64, crate::flow_engine::FlowError> {
    let grid = Arc::new(Grid::axisym_polar(m).unwrap());
    let initial = elongated_initial(Arc::clone(&grid), aspect).map_err(|e| match e {
        crate::reference::ReferenceError::Grid(g) => crate::flow_engine::FlowError::Grid(g),
        other => crate::flow_engine::FlowError::Config(format!("initial data: {other}")),
    })?;
    let tau_max = tau(t_end_unnorm, params)?;
    let cfg_u = StepperConfig {
        t_end: t_end_unnorm,
        sphere_dev_tol: 0.0,
        record_every: 1000,
        snapshot_every,
        scheme: Scheme::Rk4,
        ..StepperConfig::default()
    };
    let cfg_n = StepperConfig { t_end: tau_max, ..cfg_u.clone() };
    let out_u = run(&initial, params, &cfg_u, Mode::Unnormalized)?;
    let out_n = run(&initial, params, &cfg_n, Mode::Normalized)?;
    if let Some(f) = out_u.failure {
        return Err(f);
    }
    if let Some(f) = out_n.failure {
        return Err(f);
    }
    let norm_snaps: Vec<(f64, &[f64])> =
        out_n.snapshots.iter().map(|s| (s.t, s.phi.as_slice())).collect();
    let last_norm_t = norm_snaps.last().map(|s| s.0).unwrap_or(0.0);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for snap in &out_u.snapshots {
        let tau_j = tau(snap.t, params)?;
        if tau_j > last_norm_t {
            continue;
        }
        let factor = rescale_factor(snap.t, params)?;
        let shift = factor.ln();
        let Some(norm_phi) = interp_phi(&norm_snaps, tau_j) else { continue };
        for (a, b) in snap.phi.iter().zip(&norm_phi) {
            worst = worst.max(((a - shift).exp() - b.exp()).abs());
        }
        compared += 1;
    }
    if compared < 3 {
        return Err(crate::flow_engine::FlowError::Config(format!(
            "normalization comparison had only {compared} matched snapshots"
        )));
    }
    Ok(worst)
}

fn check_normalization_quick() -> CheckResult {
    let mut worst = 0.0f64;
    let mut err: Option<String> = None;
    for (p, t_end) in [
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), 1.5),
        (FlowParams::new(2, 1, 2.0, 1.0).unwrap(), 0.7),
    ] {
        match normalization_deviation(&p, 1.2, 64, t_end, 5) {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => err = Some(e.to_string()),
        }
    }
    match err {
        Some(e) => CheckResult {
            id: "normalization-consistency",
            passed: false,
            samples: 2,
            detail: format!("run failed: {e}"),
        },
        None => CheckResult {
            id: "normalization-consistency",
            passed: worst < 1e-5,
            samples: 2,
            detail: format!("worst pointwise radial deviation {worst:.3e}"),
        },
    }
}

pub fn dynamics_checks() -> Vec<CheckResult> {
    vec![check_sphere_ode_agreement(), check_sphere_flow_agreement(), check_normalization_quick()]
}

// ---------------------------------------------------------------------------

/// Geometry record sanity used by tests: unit sphere observables.
pub fn unit_sphere_observables(m: usize) -> crate::diagnostics::DiagnosticsRecord {
    let p = FlowParams::new(2, 1, 3.0, 1.0).unwrap();
    let grid = Arc::new(Grid::axisym_polar(m).unwrap());
    let field = RadialField::constant(grid, 0.0).unwrap();
    record(&geometry(&field, &p).unwrap(), 0.0)
}
