use std::fs;
use std::path::Path;

use nmflux::dynamics::{amplitudes_exact, flux_from_amplitudes};
use nmflux::measure::{sign_map, GroundTruth, SignAxis};
use nmflux::spectrum::VerdictLabel;
use nmflux::sweep::{
    figure_datasets, run_and_write, run_sweep, FigureOptions, GridSpec, SweepConfig, FIG2_DELTA_RANGE, FIG2_TIMES,
    FIG4_PAIRS,
};
use nmflux::{ModelParams, TimeGrid};

fn column(path: &Path, idx: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn single_cell_at_strong_coupling() {
    let cfg = SweepConfig::new(GridSpec::new(1.0, 1.0, 1), GridSpec::new(0.0, 0.0, 1), "unused");
    let map = run_sweep(&cfg).unwrap();
    assert_eq!(map.cells.len(), 1);
    assert!(map.cells[0].n_value.unwrap() > 0.0);
    assert!((map.cells[0].omega - 2.0).abs() < 1e-15);
}

#[test]
fn ground_truth_flips_between_couplings() {
    let cfg = SweepConfig::new(GridSpec::new(0.1, 0.3, 3), GridSpec::new(0.0, 0.0, 1), "unused");
    let map = run_sweep(&cfg).unwrap();
    let labels: Vec<_> = map.cells.iter().map(|c| c.verdict.unwrap()).collect();
    assert_eq!(labels[0], VerdictLabel::Markovian);
    assert_eq!(labels[1], VerdictLabel::Markovian);
    assert_ne!(labels[2], VerdictLabel::Markovian);
    assert_eq!(map.cell(0, 1).v, 0.2);
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (w, name) in [(1, "w1"), (3, "w3")] {
        let mut cfg = SweepConfig::new(GridSpec::new(0.2, 1.0, 4), GridSpec::new(0.0, 2.0, 3), dir.path().join(name));
        cfg.workers = Some(w);
        run_and_write(&cfg).unwrap();
        outs.push((
            fs::read(dir.path().join(name).join("cells.csv")).unwrap(),
            fs::read(dir.path().join(name).join("manifest.json")).unwrap(),
        ));
    }
    assert_eq!(outs[0], outs[1]);
    let header = String::from_utf8(outs[0].0.clone()).unwrap();
    assert!(header.starts_with("delta,v,n_value,omega,omega_peak,prominence,verdict\n"));
    assert_eq!(header.lines().count(), 13);
}

#[test]
fn stochastic_sweep_is_reproducible() {
    let mut cfg = SweepConfig::new(GridSpec::new(0.5, 2.0, 2), GridSpec::new(0.0, 2.0, 2), "unused");
    cfg.n_traj = 2000;
    cfg.master_seed = Some(5);
    let a = run_sweep(&cfg).unwrap();
    cfg.workers = Some(2);
    assert_eq!(a, run_sweep(&cfg).unwrap());
}

#[test]
fn detections_are_truly_nonmarkovian() {
    let cfg = SweepConfig::new(GridSpec::new(0.05, 2.0, 8), GridSpec::new(0.0, 2.5, 8), "unused");
    let map = run_sweep(&cfg).unwrap();
    assert!(map.all_ok());
    let eps = cfg.ground_truth.eps_n;
    let mut detected = 0;
    for c in &map.cells {
        if c.verdict == Some(VerdictLabel::NonMarkovianDetected) {
            detected += 1;
            assert!(c.n_value.unwrap() > eps, "{c:?}");
        }
        if c.verdict == Some(VerdictLabel::Markovian) {
            assert!(c.n_value.unwrap() <= eps);
        }
    }
    assert!(detected > 0);
}

#[test]
fn failing_cells_are_recorded_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SweepConfig::new(GridSpec::new(0.5, 1.0, 2), GridSpec::new(0.0, 0.0, 1), dir.path());
    cfg.ground_truth = GroundTruth {
        horizon: -1.0,
        ..GroundTruth::default()
    };
    let map = run_and_write(&cfg).unwrap();
    assert!(!map.all_ok());
    assert_eq!(map.manifest.failures.len(), 2);
    assert!(map.cells.iter().all(|c| c.error.is_some()));
    let csv = fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",Error")));
}

#[test]
fn figure1_curves() {
    let dir = tempfile::tempdir().unwrap();
    let files = figure_datasets(1, dir.path(), &FigureOptions::default()).unwrap();
    let csvs = files.iter().filter(|f| f.extension().unwrap() == "csv").count();
    assert_eq!(csvs, 12);
    assert!(dir.path().join("fig1/plot.py").exists());
    let max = |name: &str| column(&dir.path().join("fig1").join(name), 1).into_iter().fold(0.0, f64::max);
    assert!(max("flux_d0_v1.csv") > max("flux_d1_v1.csv"));
    let pop = column(&dir.path().join("fig1/population_d0_v0.5.csv"), 1);
    assert_eq!(pop.len(), 14_001);
    assert_eq!(pop[0], 1.0);
}

#[test]
fn figure2_delegates_to_sign_maps() {
    let dir = tempfile::tempdir().unwrap();
    figure_datasets(2, dir.path(), &FigureOptions::default()).unwrap();
    let (d0, d1, dn) = FIG2_DELTA_RANGE;
    let direct = sign_map(
        &ModelParams::default(),
        SignAxis::Detuning { v: 1.0 },
        &GridSpec::new(d0, d1, dn).values(),
        FIG2_TIMES,
    )
    .unwrap();
    direct.write_csv(&dir.path().join("direct.csv")).unwrap();
    assert_eq!(
        fs::read(dir.path().join("direct.csv")).unwrap(),
        fs::read(dir.path().join("fig2/sign_map_v1.csv")).unwrap()
    );
    let bottom = fs::read_to_string(dir.path().join("fig2/sign_map_d1.csv")).unwrap();
    assert!(bottom.starts_with("t,v,c_pos,b_pos\n"));
}

#[test]
fn figure3_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let opts = FigureOptions {
        grid_points: 21,
        ..FigureOptions::default()
    };
    figure_datasets(3, dir.path(), &opts).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig3/threshold.json")).unwrap()).unwrap();
    let w = report["threshold"]["omega_m"].as_f64().unwrap();
    assert!(w > 1.0 && w < 2.5, "{w}");
    let map = fs::read_to_string(dir.path().join("fig3/omega_map.csv")).unwrap();
    assert_eq!(map.lines().count(), 1 + 21 * 21);
    let boundary = column(&dir.path().join("fig3/boundary.csv"), 1);
    assert!((boundary[0] - 0.25).abs() < 5e-3);
}

#[test]
fn figure4_strong_coupling_dominates_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let opts = FigureOptions {
        omega_threshold: Some(1.8),
        ..FigureOptions::default()
    };
    figure_datasets(4, dir.path(), &opts).unwrap();
    let mut best = Vec::new();
    for &(delta, v) in &FIG4_PAIRS {
        let path = dir.path().join(format!("fig4/spectrum_d{delta}_v{v}.csv"));
        let omega = column(&path, 0);
        let power = column(&path, 1);
        // normalise by the total power to compare shapes
        let total: f64 = power.iter().sum();
        let above = omega
            .iter()
            .zip(&power)
            .filter(|(w, _)| **w > 1.8)
            .map(|(_, p)| p / total)
            .fold(0.0, f64::max);
        best.push(above);
    }
    assert!(best[1..].iter().all(|&b| best[0] > b), "{best:?}");
    let verdicts: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig4/verdicts.json")).unwrap()).unwrap();
    assert_eq!(verdicts[0]["detector"], "NonMarkovianDetected");
}

#[test]
fn analytic_flux_integral_matches_emitted_probability() {
    let p = ModelParams::unit(1.0, 0.0);
    let s = amplitudes_exact(&p, TimeGrid::new(14.0, 1e-3).unwrap());
    let f = flux_from_amplitudes(&s);
    let last = s.c.len() - 1;
    let left = s.c[last].norm_sqr() + s.b[last].norm_sqr();
    assert!((f.integral() + left - 1.0).abs() < 1e-6);
}
