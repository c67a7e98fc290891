mod common;

use common::{interp, rk4_oracle};
use nmflux::mcwf::{
    analytic_flux_at, dkw_epsilon, estimate_flux, flux_residual_stats, record_from_table, simulate_record,
    SurvivalTable,
};
use nmflux::sweep::with_workers;
use nmflux::ModelParams;

const DT: f64 = 1e-3;

/// `N^2(t) = |c|^2 + |b|^2` from the independent integrator.
fn oracle_survival(v: f64, delta: f64) -> Vec<f64> {
    rk4_oracle(1.0, v, delta, 14.0, DT)
        .iter()
        .map(|(c, b)| c.norm_sqr() + b.norm_sqr())
        .collect()
}

#[test]
fn jump_times_follow_the_survival_law() {
    for &(v, delta) in &[(1.0, 0.0), (0.5, 1.0), (0.2, 0.0)] {
        let n = 20_000;
        let rec = simulate_record(&ModelParams::unit(v, delta), n, 11).unwrap();
        let surv = oracle_survival(v, delta);
        let mut times: Vec<f64> = rec.outcomes.iter().filter_map(|o| o.jump_time).collect();
        times.sort_by(f64::total_cmp);
        let mut dev: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let cdf = 1.0 - interp(&surv, DT, t);
            dev = dev.max((i as f64 / n as f64 - cdf).abs()).max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        let eps = dkw_epsilon(n, 0.01);
        assert!(dev <= eps, "(V, delta) = ({v}, {delta}): sup deviation {dev} > {eps}");
    }
}

#[test]
fn jump_fraction_within_four_standard_errors() {
    for &(v, delta) in &[(0.2, 0.0), (0.3, 1.7), (0.5, 1.0)] {
        let n = 20_000u64;
        let p_jump = 1.0 - *oracle_survival(v, delta).last().unwrap();
        let rec = simulate_record(&ModelParams::unit(v, delta), n, 5).unwrap();
        let se = (p_jump * (1.0 - p_jump) / n as f64).sqrt().max(1.0 / n as f64);
        assert!(
            (rec.jump_fraction() - p_jump).abs() <= 4.0 * se,
            "fraction {} vs {p_jump}",
            rec.jump_fraction()
        );
    }
}

#[test]
fn residual_rms_shrinks_as_inverse_square_root() {
    let p = ModelParams::unit(1.0, 0.0);
    let mean_rms = |n: u64| {
        (0..6u64)
            .map(|s| {
                let est = estimate_flux(&p, n, 0.1, 100 + s).unwrap();
                flux_residual_stats(&est, &analytic_flux_at(&p, &est.times), 3.0).unwrap().rms
            })
            .sum::<f64>()
            / 6.0
    };
    let ratio = mean_rms(40_000) / mean_rms(20_000);
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn record_does_not_depend_on_worker_count() {
    let table = SurvivalTable::new(&ModelParams::unit(0.7, 0.4)).unwrap();
    let one = with_workers(Some(1), || record_from_table(&table, 5000, 77)).unwrap();
    let four = with_workers(Some(4), || record_from_table(&table, 5000, 77)).unwrap();
    assert_eq!(one, four);
    let dir = tempfile::tempdir().unwrap();
    one.write_csv(&dir.path().join("a.csv")).unwrap();
    four.write_csv(&dir.path().join("b.csv")).unwrap();
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("trajectory_index,jump_time\n"));
}

#[test]
fn manifest_records_inputs() {
    let rec = simulate_record(&ModelParams::unit(1.0, 0.0), 10, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m/manifest.json");
    rec.write_manifest(&path, 0.1).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["master_seed"], 3);
    assert_eq!(v["n_traj"], 10);
    assert_eq!(v["bin_width"], 0.1);
    assert_eq!(v["params"]["v"], 1.0);
    assert!(v["engine_version"].as_str().unwrap().starts_with("nmflux"));
}
