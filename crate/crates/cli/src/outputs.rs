//! Artifact writers. Every file is a pure function of the run result, so
//! re-running a config byte-reproduces the outputs: floats go out at 17
//! significant digits in the CSV and shortest-round-trip form in JSON, and
//! nothing time- or path-dependent is recorded.

use std::fs;
use std::path::Path;

use serde::Serialize;

use anisoflow::diagnostics::{fit_decay, grad_series, DecayFit, DiagnosticsRecord};
use anisoflow::flow_engine::RunResult;
use anisoflow::params::{FlowParams, Mode};

use crate::config::{ExperimentConfig, OutputFormat, SnapshotFile};
use crate::CliError;

pub const SERIES_HEADER: &str = "t,r_min,r_max,R,grad_norm,u_min,F_min,F_max,Phi_min,Phi_max,kappa_min,kappa_max,cone_margin,sphere_dev";

/// Tail fraction of the series used for the gradient decay fit.
pub const DECAY_TAIL: f64 = 0.5;

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot {what} {}: {e}", path.display()))
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn series_csv(series: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(series.len() * 32 * 14 + 128);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in series {
        let cols = [
            r.t,
            r.r_min,
            r.r_max,
            r.ratio,
            r.grad_norm,
            r.u_min,
            r.f_min,
            r.f_max,
            r.big_phi_min,
            r.big_phi_max,
            r.kappa_min,
            r.kappa_max,
            r.cone_margin,
            r.sphere_dev,
        ];
        let row: Vec<String> = cols.iter().map(|&c| fmt17(c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ParamsEcho {
    n: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct GridEcho {
    kind: &'static str,
    m: usize,
}

#[derive(Serialize)]
struct Extrema {
    r_min: f64,
    r_max: f64,
    ratio_max: f64,
    grad_norm_max: f64,
    cone_margin_min: f64,
}

/// Decay fit with unusable rates written as null rather than sentinel values.
#[derive(Serialize)]
pub struct DecaySummary {
    pub rate: Option<f64>,
    pub amplitude: Option<f64>,
    pub rms_residual: f64,
    pub points_used: usize,
    pub below_floor: bool,
}

impl DecaySummary {
    pub fn from_fit(fit: &DecayFit) -> DecaySummary {
        let usable = !fit.below_floor && fit.rate.is_finite();
        DecaySummary {
            rate: usable.then_some(fit.rate),
            amplitude: usable.then_some(fit.amplitude),
            rms_residual: fit.rms_residual,
            points_used: fit.points_used,
            below_floor: fit.below_floor,
        }
    }
}

#[derive(Serialize)]
pub struct Summary {
    version: &'static str,
    status: &'static str,
    failure: Option<String>,
    mode: &'static str,
    params: ParamsEcho,
    regime: &'static str,
    grid: GridEcho,
    steps: usize,
    t_final: f64,
    #[serde(rename = "final")]
    final_record: DiagnosticsRecord,
    extrema: Extrema,
    decay: DecaySummary,
}

pub fn build_summary(cfg: &ExperimentConfig, params: &FlowParams, out: &RunResult) -> Summary {
    let fit = fit_decay(&grad_series(&out.series), DECAY_TAIL);
    let final_record = out.series.last().expect("series always has records").clone();
    let mut extrema = Extrema {
        r_min: f64::INFINITY,
        r_max: f64::NEG_INFINITY,
        ratio_max: f64::NEG_INFINITY,
        grad_norm_max: f64::NEG_INFINITY,
        cone_margin_min: f64::INFINITY,
    };
    for r in &out.series {
        extrema.r_min = extrema.r_min.min(r.r_min);
        extrema.r_max = extrema.r_max.max(r.r_max);
        extrema.ratio_max = extrema.ratio_max.max(r.ratio);
        extrema.grad_norm_max = extrema.grad_norm_max.max(r.grad_norm);
        extrema.cone_margin_min = extrema.cone_margin_min.min(r.cone_margin);
    }
    Summary {
        version: env!("CARGO_PKG_VERSION"),
        status: out.status.as_str(),
        failure: out.failure.as_ref().map(|e| e.to_string()),
        mode: match cfg.mode {
            Mode::Normalized => "normalized",
            Mode::Unnormalized => "unnormalized",
        },
        params: ParamsEcho {
            n: params.n(),
            k: params.k(),
            alpha: params.alpha(),
            beta: params.beta(),
            gamma: params.gamma(),
        },
        regime: params.regime().as_str(),
        grid: GridEcho {
            kind: match cfg.grid.kind {
                crate::config::GridKindCfg::Circle => "circle",
                crate::config::GridKindCfg::Polar => "polar",
            },
            m: cfg.grid.m,
        },
        steps: out.steps,
        t_final: out.t_final,
        final_record,
        extrema,
        decay: DecaySummary::from_fit(&fit),
    }
}

pub fn write_run_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    params: &FlowParams,
    out: &RunResult,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err("create directory", dir, e))?;

    if cfg.output.wants(OutputFormat::Csv) {
        let path = dir.join("series.csv");
        fs::write(&path, series_csv(&out.series)).map_err(|e| io_err("write", &path, e))?;
    }

    if cfg.output.wants(OutputFormat::Json) {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(|e| io_err("create directory", &snap_dir, e))?;
        for snap in &out.snapshots {
            let path = snap_dir.join(format!("snap_{:06}.json", snap.step));
            let file = SnapshotFile { t: snap.t, grid: snap.grid.clone(), phi: snap.phi.clone() };
            let body = serde_json::to_string(&file)
                .map_err(|e| CliError::Runtime(format!("snapshot serialization: {e}")))?;
            fs::write(&path, body + "\n").map_err(|e| io_err("write", &path, e))?;
        }
    }

    let summary = build_summary(cfg, params, out);
    let path = dir.join("summary.json");
    let body = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(format!("summary serialization: {e}")))?;
    fs::write(&path, body + "\n").map_err(|e| io_err("write", &path, e))?;
    Ok(())
}

/// Split a series.csv into one two-column (t, value) file per observable,
/// next to the input. Values are copied as written, preserving their bytes.
pub fn emit_plot_files(series: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let text = std::fs::read_to_string(series)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", series.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", series.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "t" {
        return Err(CliError::Config(format!(
            "{}: expected a header starting with column t, got \"{header}\"",
            series.display()
        )));
    }
    let mut rows: Vec<Vec<&str>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(CliError::Config(format!(
                "{}: line {} has {} fields, header has {}",
                series.display(),
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        rows.push(fields);
    }
    let dir = series.parent().unwrap_or_else(|| Path::new("."));
    let stem = series.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    let mut written = Vec::new();
    for (j, name) in cols.iter().enumerate().skip(1) {
        let path = dir.join(format!("{stem}_{name}.dat"));
        let mut body = String::with_capacity(rows.len() * 48);
        for row in &rows {
            body.push_str(row[0]);
            body.push(' ');
            body.push_str(row[j]);
            body.push('\n');
        }
        fs::write(&path, body).map_err(|e| io_err("write", &path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_rows_have_fixed_width_and_order() {
        let rec = DiagnosticsRecord {
            t: 0.5,
            r_min: 1.0,
            r_max: 2.0,
            ratio: 2.0,
            grad_norm: 0.25,
            u_min: 0.9,
            f_min: 1.5,
            f_max: 3.0,
            big_phi_min: 1.0,
            big_phi_max: 4.0,
            kappa_min: 0.4,
            kappa_max: 1.1,
            cone_margin: 0.4,
            sphere_dev: 0.66,
        };
        let csv = series_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SERIES_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 14);
        assert!(row.starts_with("5.0000000000000000e-1,1.0000000000000000e0,"));
    }

    #[test]
    fn decay_summary_nulls_unusable_rates() {
        let fit = DecayFit {
            rate: f64::INFINITY,
            amplitude: 0.0,
            rms_residual: 0.0,
            below_floor: true,
            points_used: 0,
        };
        let s = DecaySummary::from_fit(&fit);
        assert!(s.rate.is_none());
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"rate\":null"));
    }
}
