use std::path::PathBuf;

use fracreach_core::dynamics::{ControlSpec, NamedControl, Scenario, ScenarioConfig};
use fracreach_core::experiments::{linear_check, run_lambda_sweep, sweep};
use fracreach_core::fracops::s_alpha_diag;
use fracreach_core::FractionalOrder;

fn scenario_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn linear(alpha: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(alpha, 1.0);
    c.n_modes = 8;
    c.n_steps = 128;
    c.u0 = vec![1.0, 0.5, -0.25];
    c
}

#[test]
fn free_endpoint_needs_no_control() {
    let mut c = linear(0.6);
    let s = s_alpha_diag(FractionalOrder::new(0.6).unwrap(), 1.0, 3).unwrap();
    c.u_target = c.u0.iter().zip(&s).map(|(u, s)| u * s).collect();
    let result = sweep(&Scenario::new(c).unwrap()).unwrap();
    for row in &result.rows {
        assert!(row.converged);
        assert!(row.terminal_error <= 1e-8, "λ = {}: {}", row.lambda, row.terminal_error);
        assert!(row.mu2_norm <= 1e-8);
    }
}

#[test]
fn reachable_target_decays_with_lambda() {
    let mut c = linear(0.5);
    c.b1 = ControlSpec::Named(NamedControl::Identity);
    c.b2 = ControlSpec::Named(NamedControl::Identity);
    c.u_target = vec![0.3, -0.2, 0.1];
    let result = sweep(&Scenario::new(c).unwrap()).unwrap();
    let e = result.terminal_errors();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(e[e.len() - 1] / e[0] <= 0.1);
    assert!(result.rows.windows(2).all(|w| w[1].lambda < w[0].lambda));
}

#[test]
fn bundled_scenarios_load() {
    for name in ["nonlinear.json", "linear.json"] {
        let scen = Scenario::load(scenario_file(name)).unwrap();
        assert_eq!(scen.lambdas.len(), 7);
    }
    let nl = Scenario::load(scenario_file("nonlinear.json")).unwrap();
    assert_eq!(nl.b1.n_controls(), 15);
    assert!(!nl.is_linear());
}

#[test]
fn bundled_linear_scenario_passes_its_check() {
    let report = linear_check(&Scenario::load(scenario_file("linear.json")).unwrap()).unwrap();
    assert!(report.passed(), "{:#?}", report.checks);
}

#[test]
fn sweep_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    let mut c = linear(0.8);
    c.u_target = vec![0.1, 0.1];
    c.lambdas = vec![1.0, 1e-3];
    std::fs::write(&config, serde_json::to_string(&c).unwrap()).unwrap();
    let out = dir.path().join("out.csv");
    let outputs = run_lambda_sweep(&config, &out).unwrap();
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv, outputs.result.to_csv().unwrap());
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let lambda: f64 = rows[1][0].parse().unwrap();
    assert_eq!(lambda, 1e-3);
    let err: f64 = rows[1][1].parse().unwrap();
    assert_eq!(err, outputs.result.rows[1].terminal_error);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(outputs.meta).unwrap()).unwrap();
    assert_eq!(meta["scenario"]["alpha"], 0.8);
}

#[test]
fn divergent_solve_is_recorded_in_its_row() {
    let mut c = linear(0.5);
    c.g.scale = 5.0;
    c.max_iter = 3;
    c.u_target = vec![0.5];
    c.lambdas = vec![1e-2];
    let result = sweep(&Scenario::new(c).unwrap()).unwrap();
    let row = &result.rows[0];
    assert!(!row.converged);
    assert_eq!(row.picard_iterations, 3);
    assert!(row.error.as_deref().unwrap().contains("did not converge"));
}
