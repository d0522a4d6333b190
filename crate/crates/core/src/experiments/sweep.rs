use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{Scenario, SolverContext};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "lambda",
    "terminal_error",
    "picard_iterations",
    "contraction_K",
    "mu1_energy",
    "mu2_norm",
    "converged",
    "error",
];

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// `‖u_a - u(a)‖`
    pub terminal_error: f64,
    pub picard_iterations: usize,
    pub contraction_k: f64,
    pub mu1_energy: f64,
    pub mu2_norm: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// Rows in strictly decreasing λ.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// 17 significant digits, so a CSV round-trips every `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn terminal_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.terminal_error).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                format_float(r.lambda),
                format_float(r.terminal_error),
                r.picard_iterations.to_string(),
                format_float(r.contraction_k),
                format_float(r.mu1_energy),
                format_float(r.mu2_norm),
                r.converged.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Solves the scenario at every λ of its list, sharing one solver context.
/// A failed solve is recorded in its row and does not stop the others.
pub fn sweep(scen: &Scenario) -> Result<SweepResult> {
    let ctx = SolverContext::new(scen.clone())?;
    let k = ctx.contraction.k;
    let mut rows: Vec<SweepRow> = scen
        .lambdas
        .par_iter()
        .map(|&lambda| match ctx.solve(lambda) {
            Ok(sol) => SweepRow {
                lambda,
                terminal_error: sol.terminal_error(),
                picard_iterations: sol.diagnostics.iterations,
                contraction_k: k,
                mu1_energy: sol.controls.mu1_energy(),
                mu2_norm: sol.controls.mu2_norm(),
                converged: true,
                error: None,
            },
            Err(Error::PicardDivergence(d)) => SweepRow {
                lambda,
                terminal_error: d.terminal_error,
                picard_iterations: d.iterations,
                contraction_k: k,
                mu1_energy: f64::NAN,
                mu2_norm: f64::NAN,
                converged: false,
                error: Some(format!(
                    "picard did not converge, last change {:e}",
                    d.sup_changes.last().copied().unwrap_or(f64::NAN)
                )),
            },
            Err(e) => SweepRow {
                lambda,
                terminal_error: f64::NAN,
                picard_iterations: 0,
                contraction_k: k,
                mu1_energy: f64::NAN,
                mu2_norm: f64::NAN,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    rows.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone)]
pub struct SweepOutputs {
    pub result: SweepResult,
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub plot: PathBuf,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    config_path: String,
    csv: String,
    started_unix: u64,
    wall_seconds: f64,
    threads: usize,
    all_converged: bool,
    scenario: &'a crate::dynamics::ScenarioConfig,
}

fn gnuplot_script(csv: &Path) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set format x '10^{{%L}}'\n\
         set xlabel 'lambda'\n\
         set ylabel 'terminal error'\n\
         set key off\n\
         set grid\n\
         plot '{name}' every ::1 using 1:2 with linespoints pt 7\n"
    )
}

/// Loads a scenario, sweeps λ and writes `out`, `out.meta.json` and `out.gp`.
pub fn run_lambda_sweep(config: &Path, out: &Path) -> Result<SweepOutputs> {
    let scen = Scenario::load(config)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let result = sweep(&scen)?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    std::fs::write(out, result.to_csv()?)?;
    let meta_path = with_suffix(out, ".meta.json");
    let meta = RunMeta {
        tool: "fracreach",
        version: env!("CARGO_PKG_VERSION"),
        config_path: config.display().to_string(),
        csv: out.display().to_string(),
        started_unix: started,
        wall_seconds,
        threads: rayon::current_num_threads(),
        all_converged: result.all_converged(),
        scenario: &scen.config,
    };
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    let plot = with_suffix(out, ".gp");
    std::fs::write(&plot, gnuplot_script(out))?;
    Ok(SweepOutputs {
        result,
        csv: out.to_path_buf(),
        meta: meta_path,
        plot,
    })
}
