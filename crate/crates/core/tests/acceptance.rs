//! End-to-end acceptance gates. Each test is one criterion and prints one
//! pass/fail line (visible with --nocapture, always visible on failure).
//!
//! Budgets assume the optimized dev profile configured at the workspace root.

use std::sync::Arc;
use std::time::Instant;

use anisoflow::diagnostics::{fit_decay, grad_series, sandwich_check, DiagnosticsRecord};
use anisoflow::flow_engine::{run, RunResult, RunStatus, Scheme, StepperConfig};
use anisoflow::grid_geom::{Grid, RadialField};
use anisoflow::params::{FlowParams, Mode};
use anisoflow::reference::{elongated_initial, sphere_radius};
use anisoflow::verify;

const M: usize = 256;

/// Experiment-grade stepper settings: RK4 well inside its stability region,
/// convergence detection on, records thinned enough to keep series small.
fn cfg(t_end: f64) -> StepperConfig {
    StepperConfig {
        scheme: Scheme::Rk4,
        cfl: 0.4,
        t_end,
        record_every: 20,
        sphere_dev_tol: 1e-6,
        ..StepperConfig::default()
    }
}

fn h_of(m: usize) -> f64 {
    std::f64::consts::PI / m as f64
}

fn line(tag: &str, pass: bool, detail: &str) -> bool {
    println!("{tag}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn sphere_run(params: &FlowParams, a0: f64, t_end: f64) -> RunResult {
    let grid = Arc::new(Grid::axisym_polar(M).unwrap());
    let field = RadialField::constant(grid, a0.ln()).unwrap();
    let config = StepperConfig { sphere_dev_tol: 0.0, ..cfg(t_end) };
    run(&field, params, &config, Mode::Normalized).unwrap()
}

#[test]
fn criterion_1_super_regime_sphere_tracks_closed_form() {
    let started = Instant::now();
    let p = FlowParams::new(2, 1, 3.0, 1.0).unwrap();
    let out = sphere_run(&p, 2.0, 3.0);
    let mut worst = 0.0f64;
    for rec in &out.series {
        let want = sphere_radius(rec.t, 2.0, &p, Mode::Normalized).unwrap();
        worst = worst.max((rec.r_max - want).abs() / want);
        worst = worst.max((rec.r_min - want).abs() / want);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = out.status == RunStatus::TEnd && worst < 1e-6 && elapsed < 10.0;
    let detail = format!(
        "worst relative radius error {worst:.2e}, status {:?}, {elapsed:.1}s",
        out.status
    );
    assert!(line("criterion 1, super-regime sphere vs closed form", pass, &detail), "{detail}");
}

#[test]
fn criterion_2_critical_regime_sphere_is_stationary() {
    let p = FlowParams::new(2, 1, 2.0, 1.0).unwrap();
    let out = sphere_run(&p, 2.0, 5.0);
    let mut worst = 0.0f64;
    for rec in &out.series {
        worst = worst.max((rec.r_max - 2.0).abs());
        worst = worst.max((rec.r_min - 2.0).abs());
    }
    let pass = out.status == RunStatus::TEnd && worst < 1e-8;
    let detail = format!("max |r - 2| = {worst:.2e} up to t = 5, status {:?}", out.status);
    assert!(line("criterion 2, critical-regime sphere fixed point", pass, &detail), "{detail}");
}

struct ConvergenceOutcome {
    ok: bool,
    detail: String,
}

/// Shared harness for the convergence criteria: evolve an elongated body,
/// require roundness < 1e-5, a positive cleanly-fitted gradient decay rate,
/// the two-sphere ordering barrier, and gradient monotonicity up to a
/// resolution allowance eps_h = 10 h^2.
fn converges_to_sphere(params: &FlowParams, aspect: f64, t_end: f64) -> ConvergenceOutcome {
    let grid = Arc::new(Grid::axisym_polar(M).unwrap());
    let initial = elongated_initial(Arc::clone(&grid), aspect).unwrap();
    let out = run(&initial, params, &cfg(t_end), Mode::Normalized).unwrap();
    if let Some(f) = &out.failure {
        return ConvergenceOutcome { ok: false, detail: format!("run aborted: {f}") };
    }
    let final_rec = out.series.last().unwrap();
    let dev_ok = final_rec.sphere_dev < 1e-5;

    let fit = fit_decay(&grad_series(&out.series), 0.5);
    let fit_ok = !fit.below_floor && fit.rate > 0.0 && fit.rms_residual < 0.1;

    let eps = 10.0 * h_of(M) * h_of(M);
    let sandwich =
        sandwich_check(&out.series, 1.0, aspect, params, Mode::Normalized, eps).unwrap();

    let mut grad_floor = f64::INFINITY;
    let mut grad_ok = true;
    for rec in &out.series {
        if rec.grad_norm > grad_floor + eps {
            grad_ok = false;
        }
        grad_floor = grad_floor.min(rec.grad_norm);
    }

    let ok = dev_ok && fit_ok && sandwich.ok() && grad_ok;
    let detail = format!(
        "sphere_dev {:.2e}, decay rate {:.3} (rms {:.2e}, {} pts), sandwich {}/{} violations, grad monotone {}, status {:?}, t_final {:.2}",
        final_rec.sphere_dev,
        fit.rate,
        fit.rms_residual,
        fit.points_used,
        sandwich.violations,
        sandwich.checked,
        grad_ok,
        out.status,
        out.t_final,
    );
    ConvergenceOutcome { ok, detail }
}

#[test]
fn criterion_3_elongated_bodies_round_out() {
    for (p, label) in [
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), "n=2 k=1 alpha=3 beta=1"),
        (FlowParams::new(2, 2, 4.0, 2.0).unwrap(), "n=2 k=2 alpha=4 beta=2"),
    ] {
        let started = Instant::now();
        let outcome = converges_to_sphere(&p, 1.5, 30.0);
        let elapsed = started.elapsed().as_secs_f64();
        let pass = outcome.ok && elapsed < 60.0;
        let detail = format!("{label}: {}, {elapsed:.1}s", outcome.detail);
        assert!(
            line("criterion 3, aspect-1.5 convergence to round", pass, &detail),
            "{detail}"
        );
    }
}

#[test]
fn criterion_4_fully_constrained_curvature_case_converges() {
    let p = FlowParams::new(2, 2, 4.0, 2.0).unwrap();
    let outcome = converges_to_sphere(&p, 1.3, 30.0);
    assert!(
        line("criterion 4, k=n Gauss-type speed, aspect 1.3", outcome.ok, &outcome.detail),
        "{}",
        outcome.detail
    );
}

#[test]
fn criterion_5_low_speed_exponent_elongates_ratio() {
    // main branch: below the critical exponent the ratio of radii is supposed
    // to grow; track max R over the run and demand a 1.5x gain
    let p = FlowParams::new(2, 1, 1.5, 1.0).unwrap();
    let grid = Arc::new(Grid::axisym_polar(M).unwrap());
    let initial = elongated_initial(Arc::clone(&grid), 3.0).unwrap();
    let config = StepperConfig { sphere_dev_tol: 0.0, ..cfg(4.0) };
    let out = run(&initial, &p, &config, Mode::Normalized).unwrap();
    let r0 = out.series[0].ratio;
    let r_peak = out.series.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    let growth = r_peak / r0;
    let grew = growth >= 1.5;

    // negative control: same data above the critical exponent rounds out
    let p_ctrl = FlowParams::new(2, 1, 3.0, 1.0).unwrap();
    let ctrl = converges_to_sphere(&p_ctrl, 3.0, 30.0);

    let pass = grew && ctrl.ok;
    let detail = format!(
        "ratio growth factor {growth:.3} (peak {r_peak:.3} from {r0:.3}, need 1.5x); negative control converged: {}",
        ctrl.ok
    );
    assert!(line("criterion 5, sub-critical ratio growth", pass, &detail), "{detail}");
}

#[test]
fn criterion_6_symmetric_function_property_suite() {
    let started = Instant::now();
    let checks = verify::symfun_checks(verify::DEFAULT_SEED, 1000);
    let elapsed = started.elapsed().as_secs_f64();
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.id, c.detail)).collect();
    let pass = failed.is_empty() && elapsed < 30.0;
    let detail = format!(
        "{} checks x 1000 samples, {} failed, {elapsed:.1}s{}{}",
        checks.len(),
        failed.len(),
        if failed.is_empty() { "" } else { ": " },
        failed.join("; ")
    );
    assert!(line("criterion 6, symmetric-function inequalities", pass, &detail), "{detail}");
}

#[test]
fn criterion_7_curvature_oracle_convergence_order() {
    let checks = verify::geometry_checks();
    let pass = checks.iter().all(|c| c.passed);
    let detail = checks
        .iter()
        .map(|c| format!("{} [{}] {}", c.id, if c.passed { "ok" } else { "FAIL" }, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    assert!(line("criterion 7, discrete curvature oracles", pass, &detail), "{detail}");
}

#[test]
fn criterion_8_normalization_change_of_variables() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, t_end, label) in [
        (FlowParams::new(2, 1, 3.0, 1.0).unwrap(), 1.5, "super"),
        (FlowParams::new(2, 1, 2.0, 1.0).unwrap(), 0.7, "critical"),
    ] {
        match verify::normalization_deviation(&p, 1.2, M, t_end, 20) {
            Ok(dev) => {
                pass &= dev < 1e-5;
                parts.push(format!("{label}: worst radial deviation {dev:.2e}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{label}: run failed: {e}"));
            }
        }
    }
    let detail = parts.join("; ");
    assert!(line("criterion 8, rescaling map consistency", pass, &detail), "{detail}");
}

/// The roundness observable the convergence criteria rely on is scale
/// invariant; pin that here so the criterion-3 thresholds stay meaningful.
#[test]
fn sphere_dev_observable_sanity() {
    let rec: DiagnosticsRecord = {
        let p = FlowParams::new(2, 1, 3.0, 1.0).unwrap();
        let grid = Arc::new(Grid::axisym_polar(64).unwrap());
        let field = RadialField::constant(grid, 7.0f64.ln()).unwrap();
        anisoflow::diagnostics::record(&anisoflow::grid_geom::geometry(&field, &p).unwrap(), 0.0)
    };
    assert!(rec.sphere_dev.abs() < 1e-12);
    assert!((rec.ratio - 1.0).abs() < 1e-12);
}
