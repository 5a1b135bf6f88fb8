mod support;

use std::fs;

use p2gsim_core::scenario::{load_scenario, ProfileRole};
use p2gsim_core::sim::{check_invariants, emit_reports, run, Period, Tolerances, REPORT_FILES};

#[test]
fn binding_budget_episode_follows_the_control_narrative() {
    let s = support::episode_scenario();
    let r = run(&s).unwrap();
    assert!(check_invariants(&r, &Tolerances::default()).is_empty());
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&r, dir.path()).unwrap();
    for c in support::episode_checks(&s, &dir.path().join("dispatch_log.csv")) {
        assert!(c.pass, "{}: {}", c.name, c.detail);
    }
}

#[test]
fn no_renewables_means_no_sng() {
    let mut s = load_scenario(&support::demo_config()).unwrap().window(0, 96 * 3).unwrap();
    for p in s.profiles.iter_mut().filter(|p| p.role == ProfileRole::ResGenerationKw) {
        p.samples.iter_mut().for_each(|v| *v = 0.0);
    }
    let r = run(&s).unwrap();
    for rec in &r.records {
        assert!(rec.feeders.iter().all(|f| f.surplus_kw == 0.0 && f.absorbed_kw == 0.0 && f.rpf_kw == 0.0));
        assert_eq!(rec.gas.sng_injected_kg, 0.0);
        for (p, cfg) in rec.plants.iter().zip(&s.plants) {
            assert_eq!(p.step.setpoint_kw, cfg.electrolyzer.standby_power_kw);
            assert_eq!(p.step.electricity_surplus_kwh, 0.0);
        }
    }
    assert!(check_invariants(&r, &Tolerances::default()).is_empty());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let s = load_scenario(&support::demo_config()).unwrap().window(96 * 150, 96).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_reports(&run(&s).unwrap(), a.path()).unwrap();
    emit_reports(&run(&s).unwrap(), b.path()).unwrap();
    for name in REPORT_FILES {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn seasonal_rows_add_up_to_the_whole_horizon() {
    // Window straddling the end of the heating season.
    let s = load_scenario(&support::demo_config()).unwrap().window(96 * 100, 96 * 10).unwrap();
    let r = run(&s).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let g = &r.seasonal.gas;
    let (h, n, w) = (&g[0], &g[1], &g[2]);
    assert_eq!((h.period, n.period, w.period), (Period::Heating, Period::NonHeating, Period::WholeYear));
    assert!(h.ng_demand_mwh > 0.0 && n.ng_demand_mwh > 0.0);
    assert!(close(h.ng_demand_mwh + n.ng_demand_mwh, w.ng_demand_mwh));
    assert!(close(h.sng_mwh + n.sng_mwh, w.sng_mwh));
    assert!(close(h.linepack_change_mwh + n.linepack_change_mwh, w.linepack_change_mwh));
    for rows in r.seasonal.electric.chunks(3) {
        assert!(close(rows[0].res_mwh + rows[1].res_mwh, rows[2].res_mwh));
        assert!(close(rows[0].absorbed_mwh + rows[1].absorbed_mwh, rows[2].absorbed_mwh));
        assert!(close(rows[2].surplus_mwh, rows[2].absorbed_mwh + rows[2].rpf_mwh));
    }
    for rows in r.seasonal.plants.chunks(3) {
        assert!(close(rows[0].sng_mwh + rows[1].sng_mwh, rows[2].sng_mwh));
        assert_eq!(rows[0].curtailed_steps + rows[1].curtailed_steps, rows[2].curtailed_steps);
        assert!(close(rows[2].surplus_electricity_mwh + rows[2].deficit_electricity_mwh, rows[2].electricity_mwh));
    }
}

#[test]
fn single_step_run_writes_every_report() {
    let s = support::episode_scenario().window(0, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_reports(&run(&s).unwrap(), dir.path()).unwrap();
    assert_eq!(paths.len(), REPORT_FILES.len());
    let ts = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = ts.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("step,timestamp,season,tr1_load_kw"));
    assert!(header.contains("P2G#3_meth_phase") && header.ends_with("budget_binding"));
    assert_eq!(lines.count(), 1);
    let log = fs::read_to_string(dir.path().join("dispatch_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["step_count"], 1);
    assert_eq!(manifest["files"].as_object().unwrap().len(), REPORT_FILES.len() - 1);
}

#[test]
fn demo_week_keeps_every_invariant() {
    let s = load_scenario(&support::demo_config()).unwrap().window(96 * 180, 96 * 7).unwrap();
    let r = run(&s).unwrap();
    let v = check_invariants(&r, &Tolerances::default());
    assert!(v.is_empty(), "{:?}", &v[..v.len().min(5)]);
    let sng: f64 = r.records.iter().map(|x| x.gas.sng_injected_kg).sum();
    assert!(sng > 0.0);
}
