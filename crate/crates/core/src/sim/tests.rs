use chrono::NaiveDate;

use super::*;
use crate::electric::{Branch, ElectricalNetwork, Transformer};
use crate::gas::{GasNetwork, GasProperties, Pipe, PressureLimits};
use crate::scenario::{Profile, SeasonCalendar, TimeGrid};

fn tiny(steps: usize) -> Scenario {
    let start = NaiveDate::from_ymd_opt(2030, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let en = ElectricalNetwork::new(
        10.0,
        15.0,
        1.0,
        vec![Transformer { id: 1, root_bus: 1 }],
        vec![Branch { from: 1, to: 2, r_pu: 0.01, x_pu: 0.01, length_km: 1.0 }],
    )
    .unwrap();
    let gn = GasNetwork::new(
        vec![Pipe { from: 1, to: 2, length_m: 1000.0, diameter_mm: 150.0 }],
        1,
        GasProperties::default(),
        PressureLimits::default(),
    )
    .unwrap();
    Scenario {
        name: "tiny".into(),
        seed: 0,
        time_grid: TimeGrid::new(start, 900, steps).unwrap(),
        calendar: SeasonCalendar::default(),
        ng_lhv_kwh_per_kg: 13.1,
        electrical_network: en,
        gas_network: gn,
        initial_gas_pressure_barg: None,
        plants: vec![],
        cost_scenarios: vec![],
        profiles: vec![
            Profile { role: ProfileRole::ElectricLoadKw, node_id: 2, samples: vec![500.0; steps] },
            Profile { role: ProfileRole::GasWithdrawalKgPerS, node_id: 2, samples: vec![0.05; steps] },
        ],
    }
}

#[test]
fn missing_series_read_as_zero() {
    let s = tiny(3);
    let inputs = Inputs::new(&s);
    let mut res = vec![7.0; 2];
    Inputs::at(&inputs.res, 1, &mut res);
    assert_eq!(res, [0.0, 0.0]);
    let mut load = vec![0.0; 2];
    Inputs::at(&inputs.load, 2, &mut load);
    assert_eq!(load[s.electrical_network.bus_index(2).unwrap()], 500.0);
}

#[test]
fn steady_start_stays_put_under_constant_demand() {
    let r = run(&tiny(8)).unwrap();
    let first = r.records[0].gas.mean_pressure_barg;
    for rec in &r.records {
        assert!((rec.gas.mean_pressure_barg - first).abs() < 1e-6);
        assert!((rec.gas.citygate_kg - 0.05 * 900.0).abs() < 1e-6);
        assert_eq!(rec.feeders[0].rpf_kw, 0.0);
        assert!(rec.feeders[0].import_kw > 500.0);
    }
}

#[test]
fn annualization_of_one_day() {
    let r = run(&tiny(96)).unwrap();
    assert!((r.annualization() - 365.0).abs() < 1e-12);
    assert_eq!(r.timestamp(4), r.meta.start + Duration::hours(1));
}
