use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::f64::consts::PI;

use slugsim_core::backaction::{
    cavity_fill, dephasing_rate, effective_cavity_temperature, electron_temperature, occupation_temperature,
    photon_occupation, DephasingModel, QubitCavityParams,
};
use slugsim_core::pulsed::{pulsed_mode_timeline, PulseEvent, SlugState};
use slugsim_core::ramsey::fringe_envelope;
use slugsim_core::scattering::{cascade_s_parameters, Abcd, MatchingNetwork};
use slugsim_core::small_signal::{directionality, TwoPortZ};
use slugsim_core::{BiasPoint, DeviceParams};

fn sequence(active: (f64, f64), pi: (f64, f64)) -> Vec<PulseEvent> {
    let mut ev = vec![
        (active.0, PulseEvent::Slug {
            start: active.0,
            end: active.1,
            state: SlugState::Active,
        }),
        (pi.0, PulseEvent::PiHalf { time: pi.0 }),
        (pi.1, PulseEvent::PiHalf { time: pi.1 }),
    ];
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    ev.into_iter().map(|(_, e)| e).collect()
}

proptest! {
    #[test]
    fn electron_temperature_rises_with_power(p in 1e-13f64..1e-7, k in 1.01f64..10.0, tp in 0.0f64..0.5) {
        let lo = electron_temperature(p, 1.2e9, 5e-19, tp);
        let hi = electron_temperature(p * k, 1.2e9, 5e-19, tp);
        prop_assert!(hi > lo);
        prop_assert!(lo >= tp);
    }

    #[test]
    fn occupation_round_trip(t in 1e-3f64..10.0, f in 1e8f64..2e10) {
        let back = occupation_temperature(photon_occupation(t, f), f);
        prop_assert!((back / t - 1.0).abs() < 1e-9, "{} vs {}", back, t);
    }

    #[test]
    fn cavity_temperature_between_ports(hot in 0.2f64..5.0, cold in 0.0f64..0.19, f in 1e9f64..1e10) {
        let t = effective_cavity_temperature(hot, cold, f);
        prop_assert!(t > cold && t < hot);
    }

    #[test]
    fn lossless_network_is_unitary(zc in 0.5f64..20.0, f0 in 1e9f64..1e10, f in 1e8f64..3e10) {
        let net = MatchingNetwork::new(zc, f0, 50.0, 50.0).unwrap();
        let [s11, s12, s21, s22] = net.abcd(2.0 * PI * f).to_s(50.0, 50.0);
        prop_assert!((s11.norm_sqr() + s21.norm_sqr() - 1.0).abs() < 1e-6);
        prop_assert!((s22.norm_sqr() + s12.norm_sqr() - 1.0).abs() < 1e-6);
        prop_assert!((s12 - s21).norm() < 1e-9);
    }

    #[test]
    fn reciprocal_load_gives_reciprocal_embedding(r in 0.1f64..10.0, x in 0.01f64..1.0, m in 0.01f64..0.5, f in 3e9f64..9e9) {
        // Two coupled lossy inductors: a passive, reciprocal two-port.
        let z = TwoPortZ {
            omega: 2.0 * PI * f,
            z11: C::new(r * 1e-3, x),
            z12: C::new(0.0, m * x),
            z21: C::new(0.0, m * x),
            z22: C::new(r, x),
            bias: BiasPoint::new(0.0, 0.0),
            v_phi: 0.0,
            v_mean: 0.0,
            rel_stderr: 0.0,
        };
        let s = cascade_s_parameters(&z, &MatchingNetwork::default(), z.omega).unwrap();
        prop_assert!((s.s12 - s.s21).norm() < 1e-6 * s.s21.norm());
        prop_assert!(s.s11.norm_sqr() + s.s21.norm_sqr() <= 1.0 + 1e-9);
    }

    #[test]
    fn abcd_cascade_is_associative(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0) {
        let x = Abcd::series(C::new(0.0, a));
        let y = Abcd::shunt(C::new(0.0, b));
        let w = Abcd::series(C::new(c, 0.0));
        let l = x.cascade(&y).cascade(&w);
        let r = x.cascade(&y.cascade(&w));
        prop_assert!((l.a - r.a).norm() + (l.b - r.b).norm() + (l.c - r.c).norm() + (l.d - r.d).norm() < 1e-9);
    }

    #[test]
    fn ramsey_envelope_falls_with_photons(n in 0.0f64..5.0, dn in 0.01f64..3.0, tau in 1e-9f64..2e-6, t_hs in 0.0f64..3e-6) {
        let qc = QubitCavityParams::default();
        for model in [DephasingModel::StrongDispersive, DephasingModel::WeakDispersive] {
            let a = fringe_envelope(&qc, n, t_hs, tau, model);
            let b = fringe_envelope(&qc, n + dn, t_hs, tau, model);
            prop_assert!(b <= a);
            prop_assert!(a <= 1.0);
        }
    }

    #[test]
    fn strong_dispersive_dephasing_tends_to_weak(n in 0.01f64..3.0) {
        let qc = QubitCavityParams { chi_over_2pi: 10.0, ..Default::default() };
        let s = dephasing_rate(n, &qc, DephasingModel::StrongDispersive);
        let w = dephasing_rate(n, &qc, DephasingModel::WeakDispersive);
        prop_assert!((s / w - 1.0).abs() < 1e-3, "{} vs {}", s, w);
    }

    #[test]
    fn cavity_fill_is_monotone_and_bounded(n in 0.0f64..10.0, t in 0.0f64..5e-6, dt in 0.0f64..1e-6) {
        let kappa = 1.0 / 350e-9;
        let a = cavity_fill(n, kappa, t);
        let b = cavity_fill(n, kappa, t + dt);
        prop_assert!(a <= b + 1e-15 && b <= n + 1e-12);
    }

    #[test]
    fn activity_after_readout_pulse_costs_no_exposure(gap in 0.0f64..1e-6, span in 1e-8f64..1e-6, len in 1e-8f64..2e-6) {
        // SLUG switched on only after the second π/2 pulse.
        let qc = QubitCavityParams::default();
        let pi = (0.0, span);
        let on = pi.1 + gap;
        let tl = pulsed_mode_timeline(&sequence((on, on + len), pi), &qc, 1.5, 1e-9).unwrap();
        prop_assert_eq!(tl.exposure, 0.0);
        prop_assert!((tl.dissipated_energy - 1e-9 * len).abs() < 1e-12 * 1e-9 * len.max(1.0) + 1e-24);
    }

    #[test]
    fn exposure_grows_with_overlap(span in 1e-7f64..2e-6, lead in 0.0f64..1e-6) {
        let qc = QubitCavityParams::default();
        let pi = (lead, lead + span);
        let full = pulsed_mode_timeline(&sequence((0.0, pi.1), pi), &qc, 1.5, 1e-9).unwrap();
        let half = pulsed_mode_timeline(&sequence((0.0, pi.0 + 0.5 * span), pi), &qc, 1.5, 1e-9).unwrap();
        prop_assert!(full.exposure > half.exposure);
        prop_assert!(full.exposure <= 1.5 * span * (1.0 + 1e-12));
    }

    #[test]
    fn directionality_is_even_in_chi_r(v in 1e-5f64..5e-4, chi in 0.05f64..2.0, f in 1e9f64..1e10) {
        let d = DeviceParams::default();
        let w = 2.0 * PI * f;
        prop_assert_eq!(directionality(&d, v, w, chi), directionality(&d, v, w, -chi));
    }
}
