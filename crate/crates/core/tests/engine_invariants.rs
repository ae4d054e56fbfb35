use std::f64::consts::PI;

use halmba_core::engine::{
    amam_ampm, closed_form_impedances, first_peak_obo, local_efficiency_maxima, sweep,
    ArchitectureConfig, BaPort, Mode,
};
use halmba_core::network::{port_impedance, solve, Port};
use halmba_core::{Phasor, Region};
use proptest::prelude::*;

fn rel_close(a: Option<Phasor>, b: Option<Phasor>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).norm() <= tol * b.norm().max(1e-300),
        _ => false,
    }
}

#[test]
fn solver_matches_closed_forms_on_full_grid() {
    for phi_deg in [0.0, 30.0, -75.0, 180.0] {
        let cfg = ArchitectureConfig::nominal().with_phi(f64::to_radians(phi_deg));
        let r = sweep(&cfg, cfg.matched_load()).unwrap();
        for p in &r.points {
            let cf = closed_form_impedances(p.beta, &cfg).unwrap();
            let got = [p.z_ca, p.z_ba1, p.z_ba2];
            for k in 0..3 {
                assert!(
                    rel_close(got[k], cf[k], 1e-9),
                    "phi {phi_deg} beta {} device {k}: {:?} vs {:?}",
                    p.beta,
                    got[k],
                    cf[k]
                );
            }
        }
    }
}

#[test]
fn zero_phase_is_flat() {
    let cfg = ArchitectureConfig::nominal();
    let r = sweep(&cfg, cfg.matched_load()).unwrap();
    let lin = amam_ampm(&r).unwrap();
    assert!(lin.ampm_span_deg <= 1e-9);
    assert!((lin.amam_span_db - 20.0 * (0.8156854f64 / 0.5).log10()).abs() < 1e-5);
    let maxima: Vec<f64> = local_efficiency_maxima(&r)
        .iter()
        .map(|&k| r.points[k].beta)
        .collect();
    assert_eq!(maxima, vec![0.5, 0.75, 1.0]);
    assert!((first_peak_obo(&r).unwrap() - 10.2716539).abs() < 1e-6);
    for p in r.points.iter().filter(|p| p.beta == 0.5 || p.beta == 1.0) {
        assert!((p.efficiency - PI / 4.0).abs() < 1e-9);
    }
}

#[test]
fn thirty_degree_offset_spreads_phase() {
    let cfg = ArchitectureConfig::nominal().with_phi(f64::to_radians(30.0));
    let r = sweep(&cfg, cfg.matched_load()).unwrap();
    let lin = amam_ampm(&r).unwrap();
    let last = r.last();
    let expected = (last.out_phase - r.points[1].out_phase).to_degrees();
    assert!((lin.phase_deg.last().unwrap().unwrap() - expected).abs() < 1e-9);
    assert!((lin.ampm_span_deg - 20.92).abs() < 0.01, "{}", lin.ampm_span_deg);
}

#[test]
fn pdlmba_mode_keeps_carrier_unmodulated() {
    let cfg = ArchitectureConfig::nominal().with_mode(Mode::Pdlmba);
    let r = sweep(&cfg, cfg.matched_load()).unwrap();
    assert!(r.points[0].z_ca.is_none());
    for p in &r.points[1..] {
        assert!((p.z_ca.unwrap() - Phasor::new(1.0, 0.0)).norm() < 1e-12);
        assert!(p.power_residual <= 1e-9);
    }
    assert_eq!(
        local_efficiency_maxima(&r).first().map(|&k| r.points[k].beta),
        Some(0.5)
    );
}

fn arb_load() -> impl Strategy<Value = Phasor> {
    (0.05f64..20.0, -20.0f64..20.0).prop_map(|(re, im)| Phasor::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_is_conserved(load in arb_load(), phi in -PI..PI, swap in any::<bool>()) {
        let mut cfg = ArchitectureConfig::nominal().with_phi(phi);
        if swap {
            cfg = cfg.with_primary(BaPort::Ba2, true);
        }
        let r = sweep(&cfg, load).unwrap();
        for p in &r.points {
            prop_assert!(p.power_residual <= 1e-9, "beta {} residual {}", p.beta, p.power_residual);
        }
    }

    #[test]
    fn lower_regions_are_linear(phi in -PI..PI) {
        let cfg = ArchitectureConfig::nominal().with_phi(phi);
        let r = sweep(&cfg, cfg.matched_load()).unwrap();
        let low: Vec<_> = r.points.iter().filter(|p| p.beta > 0.0 && p.region != Region::Almba).collect();
        let (g0, ph0) = (low[0].gain.unwrap(), low[0].out_phase);
        for p in low {
            prop_assert!((p.gain.unwrap() - g0).abs() <= 1e-12);
            prop_assert!((p.out_phase - ph0).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn low_power_carrier_sees_inverted_load(load in arb_load(), beta in 0.01f64..0.49) {
        let cfg = ArchitectureConfig::nominal();
        let ex = halmba_core::engine::assemble_excitations(beta, &cfg, load).unwrap();
        let sol = solve(&cfg.net, &ex).unwrap();
        let z = port_impedance(&sol, Port::Ca).unwrap();
        let want = 1.0 / load;
        prop_assert!((z - want).norm() <= 1e-10 * want.norm());
    }
}
