//! Subcommand implementations.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anisoflow::flow_engine::{run, RunResult};
use anisoflow::params::FlowParams;
use anisoflow::reference::elongated_initial;
use anisoflow::verify;

use crate::config::{self, ExperimentConfig};
use crate::outputs;
use crate::CliError;

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<(FlowParams, RunResult), CliError> {
    let params = cfg.build_params()?;
    let grid = cfg.grid.build()?;
    let initial = cfg.initial.build(grid, &cfg.grid, dir)?;
    let out = run(&initial, &params, &cfg.stepper, cfg.mode)
        .map_err(|e| CliError::Config(format!("run setup: {e}")))?;
    Ok((params, out))
}

pub fn cmd_run(path: &Path) -> Result<(), CliError> {
    let cfg = config::load(path)?;
    if cfg.sweep.is_some() {
        return Err(CliError::Config(
            "config has a [sweep] section; use `anisoflow sweep` for it".into(),
        ));
    }
    let (params, out) = execute(&cfg, &config_dir(path))?;
    outputs::write_run_outputs(&cfg.output.directory, &cfg, &params, &out)?;
    let last = out.series.last().expect("series always has records");
    println!(
        "status {}, regime {}, steps {}, t_final {:.6}, R {:.6}, sphere_dev {:.3e} -> {}",
        out.status.as_str(),
        params.regime().as_str(),
        out.steps,
        out.t_final,
        last.ratio,
        last.sphere_dev,
        cfg.output.directory.display()
    );
    Ok(())
}

pub fn cmd_verify() -> Result<(), CliError> {
    let report = verify::run_all();
    println!("verification suite, seed {}", report.seed);
    for c in &report.checks {
        println!(
            "  {:<34} {}  {:>5} samples  {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.samples,
            c.detail
        );
    }
    let failed = report.failed();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            report.checks.len(),
            failed.iter().map(|c| c.id).collect::<Vec<_>>().join(", ")
        )))
    }
}

struct SweepRow {
    alpha: f64,
    beta: f64,
    k: usize,
    aspect: f64,
    regime: String,
    status: String,
    steps: String,
    t_final: String,
    ratio_final: String,
    sphere_dev_final: String,
    decay_rate: String,
    error: String,
}

fn sanitize(msg: &str) -> String {
    msg.replace(',', ";").replace('\n', "; ")
}

/// Directory-name-safe rendering of a cell coordinate: 1.5 -> 1p5, -2 -> m2.
fn tag(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

pub fn cmd_sweep(path: &Path) -> Result<(), CliError> {
    let cfg = config::load(path)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep requires a [sweep] section".into()))?;
    for (name, len) in [
        ("alpha", sweep.alpha.len()),
        ("beta", sweep.beta.len()),
        ("k", sweep.k.len()),
        ("aspect", sweep.aspect.len()),
    ] {
        if len == 0 {
            return Err(CliError::Config(format!("sweep.{name} list is empty")));
        }
    }
    if cfg.initial.kind != "ellipsoid" {
        return Err(CliError::Config(
            "sweep varies the ellipsoid aspect; set initial.kind = \"ellipsoid\"".into(),
        ));
    }
    let scale = cfg.initial.scale.unwrap_or(1.0);

    // Cartesian product in list order with first-occurrence dedup
    let mut seen: HashSet<(u64, u64, u64, u64)> = HashSet::new();
    let mut cells: Vec<(f64, f64, usize, f64)> = Vec::new();
    for &alpha in &sweep.alpha {
        for &beta in &sweep.beta {
            for &k in &sweep.k {
                for &aspect in &sweep.aspect {
                    if seen.insert((alpha.to_bits(), beta.to_bits(), k as u64, aspect.to_bits())) {
                        cells.push((alpha, beta, k, aspect));
                    }
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(cells.len());
    for (alpha, beta, k, aspect) in cells {
        let label = format!(
            "alpha{}_beta{}_k{}_aspect{}",
            tag(alpha),
            tag(beta),
            tag(k as f64),
            tag(aspect)
        );
        let row = run_cell(&cfg, alpha, beta, k, aspect, scale, &label);
        println!(
            "cell {label}: {}",
            if row.error.is_empty() { row.status.as_str() } else { row.error.as_str() }
        );
        rows.push(row);
    }

    std::fs::create_dir_all(&cfg.output.directory).map_err(|e| {
        CliError::Runtime(format!("cannot create {}: {e}", cfg.output.directory.display()))
    })?;
    let table_path = cfg.output.directory.join("sweep.csv");
    let mut body = String::from(
        "alpha,beta,k,aspect,regime,status,steps,t_final,R_final,sphere_dev_final,decay_rate,error\n",
    );
    for r in &rows {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.beta,
            r.k,
            r.aspect,
            r.regime,
            r.status,
            r.steps,
            r.t_final,
            r.ratio_final,
            r.sphere_dev_final,
            r.decay_rate,
            r.error
        ));
    }
    std::fs::write(&table_path, body)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", table_path.display())))?;
    println!("{} cells -> {}", rows.len(), table_path.display());
    Ok(())
}

fn run_cell(
    cfg: &ExperimentConfig,
    alpha: f64,
    beta: f64,
    k: usize,
    aspect: f64,
    scale: f64,
    label: &str,
) -> SweepRow {
    let mut row = SweepRow {
        alpha,
        beta,
        k,
        aspect,
        regime: String::new(),
        status: String::new(),
        steps: String::new(),
        t_final: String::new(),
        ratio_final: String::new(),
        sphere_dev_final: String::new(),
        decay_rate: String::new(),
        error: String::new(),
    };
    let params = match FlowParams::new(cfg.params.n, k, alpha, beta) {
        Ok(p) => p,
        Err(e) => {
            row.error = sanitize(&e.to_string());
            return row;
        }
    };
    row.regime = params.regime().as_str().to_string();
    let cell_outcome = (|| -> Result<RunResult, CliError> {
        let grid = cfg.grid.build()?;
        let initial = elongated_initial(grid, aspect)
            .map_err(|e| CliError::Config(format!("initial ellipsoid: {e}")))?
            .offset(scale.ln());
        run(&initial, &params, &cfg.stepper, cfg.mode)
            .map_err(|e| CliError::Config(format!("run setup: {e}")))
    })();
    match cell_outcome {
        Ok(out) => {
            let dir = cfg.output.directory.join(label);
            if let Err(e) = outputs::write_run_outputs(&dir, cfg, &params, &out) {
                row.error = sanitize(&e.to_string());
                return row;
            }
            let last = out.series.last().expect("series always has records");
            let fit = anisoflow::diagnostics::fit_decay(
                &anisoflow::diagnostics::grad_series(&out.series),
                outputs::DECAY_TAIL,
            );
            row.status = out.status.as_str().to_string();
            row.steps = out.steps.to_string();
            row.t_final = format!("{:.16e}", out.t_final);
            row.ratio_final = format!("{:.16e}", last.ratio);
            row.sphere_dev_final = format!("{:.16e}", last.sphere_dev);
            if !fit.below_floor && fit.rate.is_finite() {
                row.decay_rate = format!("{:.16e}", fit.rate);
            }
            if let Some(f) = &out.failure {
                row.error = sanitize(&f.to_string());
            }
        }
        Err(e) => {
            row.error = sanitize(&e.to_string());
        }
    }
    row
}

pub fn cmd_emit_plot(series: &Path) -> Result<(), CliError> {
    let written = outputs::emit_plot_files(series)?;
    for path in &written {
        println!("{}", path.display());
    }
    println!("{} observables -> .dat files", written.len());
    Ok(())
}
