mod support;

use num_complex::Complex64;
use p2gsim_core::electric::{
    bfs_power_flow, transformer_balance, Branch, ElectricalNetwork, FeederTotals, PowerFlowOptions, Transformer,
};
use proptest::prelude::*;

fn tight() -> PowerFlowOptions {
    PowerFlowOptions { tolerance_pu: 1e-13, max_iterations: 500 }
}

#[test]
fn bfs_agrees_with_newton_on_random_radial_networks() {
    let mut rng = support::rng(0xB1F5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (net, inj) = support::random_radial(&mut rng, 15);
        let bfs = bfs_power_flow(&net, &inj, &tight()).unwrap();
        let newton = support::newton_power_flow(&net, &inj, 1e-13);
        for (a, b) in bfs.voltages.iter().zip(&newton) {
            worst = worst.max((a.norm() - b.norm()).abs());
            assert!((a - b).norm() < 1e-8, "complex voltage {a} vs {b}");
        }
    }
    assert!(worst < 1e-8, "worst magnitude difference {worst:e}");
}

#[test]
fn two_bus_voltage_matches_closed_form() {
    // V² − V + rP = 0 for a purely resistive branch and a unit slack.
    let net = ElectricalNetwork::new(
        10.0,
        15.0,
        1.0,
        vec![Transformer { id: 1, root_bus: 1 }],
        vec![Branch { from: 1, to: 2, r_pu: 0.01, x_pu: 0.0, length_km: 1.0 }],
    )
    .unwrap();
    let mut inj = vec![Complex64::new(0.0, 0.0); 2];
    inj[net.bus_index(2).unwrap()] = Complex64::new(-0.1, 0.0);
    let st = bfs_power_flow(&net, &inj, &tight()).unwrap();
    let v = st.voltage_magnitude(net.bus_index(2).unwrap());
    assert!((v - 0.998_998_997_994_985_9).abs() < 1e-12, "{v}");
    let losses = st.feeder_losses_pu[0];
    assert!((st.transformer_power_pu[0].re - (0.1 + losses)).abs() < 1e-12);
}

#[test]
fn feeders_are_balanced_separately() {
    let net = support::three_feeder_network();
    let mut inj = vec![Complex64::new(0.0, 0.0); net.bus_count()];
    inj[net.bus_index(11).unwrap()] = Complex64::new(0.2, 0.0);
    inj[net.bus_index(21).unwrap()] = Complex64::new(-0.3, 0.0);
    let st = bfs_power_flow(&net, &inj, &PowerFlowOptions::default()).unwrap();
    let totals =
        [FeederTotals { load_kw: 0.0, res_kw: 2000.0 }, FeederTotals { load_kw: 3000.0, res_kw: 0.0 }, FeederTotals::default()];
    let bal = transformer_balance(&net, &st, &totals);
    assert!(bal[0].rpf_kw > 1900.0 && bal[0].rpf_kw < 2000.0);
    assert_eq!(bal[0].surplus_kw, 2000.0);
    assert_eq!(bal[1].rpf_kw, 0.0);
    assert!(bal[1].import_kw > 3000.0);
    assert!(bal[2].import_kw.abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transformer_power_covers_injections_and_losses(seed in any::<u64>()) {
        let mut rng = support::rng(seed);
        let (net, inj) = support::random_radial(&mut rng, 15);
        let st = bfs_power_flow(&net, &inj, &tight()).unwrap();
        for f in 0..net.transformers.len() {
            let generated: f64 = net.buses().iter().zip(&inj).filter(|(b, _)| b.feeder == f).map(|(_, s)| s.re).sum();
            let import = st.transformer_power_pu[f].re;
            prop_assert!((import + generated - st.feeder_losses_pu[f]).abs() < 1e-10);
            prop_assert!(st.feeder_losses_pu[f] >= 0.0);
        }
    }

    #[test]
    fn branch_order_and_orientation_do_not_change_the_solution(seed in any::<u64>()) {
        let mut rng = support::rng(seed);
        let (net, inj) = support::random_radial(&mut rng, 12);
        let flipped: Vec<Branch> = net
            .branches
            .iter()
            .rev()
            .map(|b| Branch { from: b.to, to: b.from, ..b.clone() })
            .collect();
        let other = ElectricalNetwork::new(net.base_mva, net.base_kv, net.slack_voltage_pu, net.transformers.clone(), flipped).unwrap();
        let a = bfs_power_flow(&net, &inj, &tight()).unwrap();
        let inj_other: Vec<Complex64> = other.buses().iter().map(|b| inj[net.bus_index(b.id).unwrap()]).collect();
        let b = bfs_power_flow(&other, &inj_other, &tight()).unwrap();
        for bus in net.buses() {
            let va = a.voltages[net.bus_index(bus.id).unwrap()];
            let vb = b.voltages[other.bus_index(bus.id).unwrap()];
            prop_assert!((va - vb).norm() < 1e-10);
        }
    }
}
