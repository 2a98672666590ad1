//! Acceptance suite: one PASS/FAIL line per criterion. Runs as its own
//! harness so the lines are always printed.

use std::f64::consts::PI;
use std::time::Instant;

use slugsim_cli::{execute, RunConfig};
use slugsim_core::backaction::{
    backaction_chain, effective_cavity_temperature, electron_temperature, occupation_temperature,
    photon_occupation, stark_shift, DephasingModel, QubitCavityParams,
};
use slugsim_core::langevin::EngineOptions;
use slugsim_core::ramsey::{extract_fringe_frequencies, fit_rise, ramsey_surface};
use slugsim_core::scattering::{scattering_map, MatchingNetwork};
use slugsim_core::small_signal::{
    analytic_im_zr, analytic_zf, directionality_from_terms, extract_two_port, ExtractOptions, ProbeAmplitudes,
};
use slugsim_core::transfer::v_phi_curve;
use slugsim_core::{normalize, time_average, BiasPoint, DeviceParams, SimConfig, Topology};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn hot_electron() -> Verdict {
    let t = electron_temperature(1e-9, 1.2e9, 5e-19, 0.1);
    verdict(rel(t, 1.10) <= 0.02, format!("T_e = {t:.4} K (1.10 K ± 2%)"))
}

fn occupation() -> Verdict {
    let n = photon_occupation(0.6, 6.605e9);
    let t_eff = effective_cavity_temperature(1.1, 0.05, 6.605e9);
    verdict(
        (n - 1.46).abs() <= 0.05,
        format!("n̄(0.6 K, 6.605 GHz) = {n:.4} (1.46 ± 0.05); chain T_eff = {t_eff:.3} K"),
    )
}

fn stark() -> Verdict {
    let qc = QubitCavityParams {
        chi_over_2pi: 0.75e6,
        ..Default::default()
    };
    let s = stark_shift(1.47, &qc) * 1e-6;
    verdict(rel(s, 2.20) <= 0.05, format!("shift = {s:.4} MHz (2.20 MHz ± 5%)"))
}

fn ramsey_rise() -> Verdict {
    let start = Instant::now();
    let qc = QubitCavityParams::default();
    let report = backaction_chain(&DeviceParams::default(), 1e-9, 0.05, &qc, DephasingModel::default()).unwrap();
    let n = report.n_bar_steady;
    let hs: Vec<f64> = (0..31).map(|i| i as f64 * 100e-9).collect();
    let tau: Vec<f64> = (0..251).map(|i| i as f64 * 1e-9).collect();
    let surface = ramsey_surface(&qc, n, &hs, &tau, DephasingModel::default()).unwrap();
    let freqs = extract_fringe_frequencies(&surface).unwrap();
    let fit = fit_rise(&hs, &freqs).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let tc = fit.time_constant * 1e9;
    let shift = (fit.f_sat - qc.ramsey_detuning) * 1e-6;
    verdict(
        rel(tc, 350.0) <= 0.10 && rel(shift, 2.2) <= 0.05 && elapsed < 1.0,
        format!(
            "τ = {tc:.1} ns (350 ns ± 10%), saturation = detuning + {shift:.3} MHz (2.2 MHz ± 5%), {elapsed:.2} s (< 1 s)"
        ),
    )
}

fn composite_junction() -> Verdict {
    let dev = DeviceParams {
        topology: Topology::Symmetric,
        ..Default::default()
    };
    let norm = normalize(&dev, dev.noise_temperature()).unwrap();
    let sim = SimConfig {
        dt: 0.01,
        t_total: 2e4,
        noise_enabled: false,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for i_b in [45e-6, 60e-6, 80e-6] {
        let v = time_average(&dev, &BiasPoint::new(i_b, 0.0), &sim, EngineOptions::default()).unwrap();
        let v = norm.to_volts(v.mean);
        let expect = 0.5 * dev.r * (i_b * i_b - 4.0 * dev.i0 * dev.i0).sqrt();
        worst = worst.max(rel(v, expect));
        parts.push(format!("{:.0} µA: {:.2}/{:.2} µV", i_b * 1e6, v * 1e6, expect * 1e6));
    }
    verdict(worst <= 0.01, format!("{} (worst {:.3}% ≤ 1%)", parts.join(", "), worst * 100.0))
}

fn vphi_curve() -> Verdict {
    let dev = DeviceParams::default();
    let i_b = 42e-6;
    let sim = SimConfig {
        t_total: 4e4,
        ..Default::default()
    };
    let grid: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
    let curve = v_phi_curve(&dev, i_b, &grid, &sim).unwrap();
    let pp = curve.peak_to_peak() * 1e6;

    // Invariants at 3σ, on streams disjoint from the curve's.
    let norm = normalize(&dev, dev.noise_temperature()).unwrap();
    let offset = Topology::Slug.bias_flux_offset(norm.beta_l, i_b / dev.i0);
    let at = |phi: f64, stream: u64| {
        let opts = EngineOptions {
            stream: 1000 + stream,
            ..Default::default()
        };
        let v = time_average(&dev, &BiasPoint::new(i_b, phi), &sim, opts).unwrap();
        (v.mean, v.stderr)
    };
    let mut worst_sigma: f64 = 0.0;
    for (k, x) in [0.05, 0.17, 0.29, 0.41].into_iter().enumerate() {
        let k = 4 * k as u64;
        for (a, b) in [
            (at(x, k), at(x + 1.0, k + 1)),
            (at(-offset + x, k + 2), at(-offset - x, k + 3)),
        ] {
            let z = (a.0 - b.0).abs() / (a.1 * a.1 + b.1 * b.1).sqrt();
            worst_sigma = worst_sigma.max(z);
        }
    }
    verdict(
        rel(pp, 130.0) <= 0.30 && worst_sigma <= 3.0,
        format!(
            "peak-to-peak = {pp:.1} µV (130 µV ± 30%), periodicity/parity worst deviation {worst_sigma:.2}σ (≤ 3σ)"
        ),
    )
}

fn directionality_formula() -> Verdict {
    let d = directionality_from_terms(80.0 / 6.0, 1.0, 1.0).db();
    verdict((19.0..=26.0).contains(&d), format!("D = {d:.2} dB (19–26 dB)"))
}

fn scattering_maps() -> Verdict {
    let dev = DeviceParams::default();
    let flux: Vec<f64> = (0..32).map(|i| i as f64 / 32.0).collect();
    let freqs: Vec<f64> = (0..16).map(|j| 4e9 + 4e9 * j as f64 / 15.0).collect();
    let sim = SimConfig {
        t_total: 1.2e5,
        ..Default::default()
    };
    let opts = ExtractOptions {
        probe: ProbeAmplitudes {
            input_flux: 1e-3,
            output_current: 4e-2,
        },
        max_doublings: 0,
        check_linearity: false,
        ..Default::default()
    };
    let start = Instant::now();
    let map = scattering_map(&dev, 42e-6, &flux, &freqs, &MatchingNetwork::default(), &sim, &opts).unwrap();
    let minutes = start.elapsed().as_secs_f64() / 60.0;

    let v_phi = |i: usize| map.cells[i].iter().find_map(|c| c.point()).map(|p| p.z.v_phi);
    let (gi, gj, g_peak) = map.argmax(|p| p.s21_db).unwrap();
    let best_on = |positive: bool| {
        map.cells
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, c)| (i, j, c)))
            .filter_map(|(i, j, c)| c.point().map(|p| (i, j, p)))
            .filter(|(_, _, p)| (p.z.v_phi > 0.0) == positive && p.z.v_phi != 0.0)
            .max_by(|a, b| a.2.s21_db.total_cmp(&b.2.s21_db))
            .map(|(i, j, p)| (i, j, p.s21_db))
    };
    let left = best_on(true);
    let right = best_on(false);
    // Two separate maxima: each shoulder within 3 dB of the global peak, with
    // a dip of at least 6 dB between them at the peak frequency.
    let column: Vec<Option<f64>> = map.cells.iter().map(|row| row[gj].point().map(|p| p.s21_db)).collect();
    let dip = column.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let both = matches!((left, right), (Some(l), Some(r)) if g_peak - l.2 <= 3.0 && g_peak - r.2 <= 3.0)
        && g_peak - dip >= 6.0;

    let (si, sj, s_min) = map.argmin(|p| p.s12_db).unwrap();
    let min_vphi = v_phi(si).unwrap_or(0.0);
    let on_negative = map.cells[si][sj].point().is_some_and(|p| p.z.v_phi < 0.0);

    // Longest contiguous run with S12 ≤ -15 dB at the minimizing bias.
    let mut band: f64 = 0.0;
    let mut run_start: Option<usize> = None;
    for j in 0..freqs.len() {
        let ok = map.cells[si][j].point().is_some_and(|p| p.s12_db <= -15.0);
        match (ok, run_start) {
            (true, None) => run_start = Some(j),
            (false, Some(s)) => {
                band = band.max(freqs[j - 1] - freqs[s]);
                run_start = None;
            }
            _ => {}
        }
        if ok && j == freqs.len() - 1 {
            band = band.max(freqs[j] - freqs[run_start.unwrap()]);
        }
    }
    let band_ghz = band * 1e-9;

    let fmt = |o: Option<(usize, usize, f64)>| {
        o.map_or("none".to_string(), |(i, j, v)| {
            format!("{v:.1} dB at {:.3} Φ₀/{:.2} GHz", flux[i], freqs[j] * 1e-9)
        })
    };
    verdict(
        both && on_negative && band_ghz >= 0.5,
        format!(
            "S21 peak {g_peak:.1} dB at {:.3} Φ₀ (V_Φ>0 best {}, V_Φ<0 best {}, column minimum {dip:.1} dB); \
             min S12 {s_min:.1} dB at {:.3} Φ₀/{:.2} GHz with V_Φ = {:.0} µV/Φ₀; \
             S12 ≤ -15 dB over {band_ghz:.2} GHz (≥ 0.5); masked {}; {minutes:.1} min",
            flux[gi],
            fmt(left),
            fmt(right),
            flux[si],
            freqs[sj] * 1e-9,
            min_vphi * 1e6,
            map.masked_count(),
        ),
    )
}

fn reciprocity() -> (bool, String) {
    let dev = DeviceParams::default();
    let sim = SimConfig {
        t_total: 2e4,
        ..Default::default()
    };
    let opts = ExtractOptions {
        require_voltage_state: false,
        v_phi: Some(0.0),
        max_doublings: 0,
        check_linearity: false,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for (k, phi) in [0.1, 0.25, 0.4].into_iter().enumerate() {
        let o = ExtractOptions {
            stream: k as u64,
            ..opts.clone()
        };
        let z = extract_two_port(&dev, &BiasPoint::new(0.0, phi), 2.0 * PI * 6e9, &sim, &o).unwrap();
        worst = worst.max((z.z12 - z.z21).norm() / z.z21.norm());
    }
    (worst < 0.05, format!("reciprocity worst {:.2}% (< 5%)", worst * 100.0))
}

fn forward_consistency() -> (bool, String) {
    let dev = DeviceParams::default();
    let sim = SimConfig {
        t_total: 1.2e5,
        ..Default::default()
    };
    let opts = ExtractOptions {
        probe: ProbeAmplitudes {
            input_flux: 1e-3,
            output_current: 4e-2,
        },
        max_doublings: 0,
        check_linearity: false,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for (k, phi) in [0.156, 0.75].into_iter().enumerate() {
        let o = ExtractOptions {
            stream: k as u64,
            ..opts.clone()
        };
        let z = extract_two_port(&dev, &BiasPoint::new(42e-6, phi), 2.0 * PI * 6e9, &sim, &o).unwrap();
        let zf = analytic_zf(&dev, z.v_phi);
        worst = worst.max((z.z21 - zf).norm() / zf.abs());
    }
    (worst < 0.15, format!("Z21 vs L·V_Φ worst {:.1}% (< 15%)", worst * 100.0))
}

/// Sign changes of `y` on grid `x`, located by linear interpolation.
fn crossings(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(y.windows(2))
        .filter(|(_, w)| w[0].signum() != w[1].signum())
        .map(|(xs, w)| xs[0] + (xs[1] - xs[0]) * w[0] / (w[0] - w[1]))
        .collect()
}

fn reverse_zero_crossing() -> (bool, String) {
    // Symmetric coupling carries no bias-current flux, so the simulated
    // reverse transimpedance is the interference part alone.
    let dev = DeviceParams {
        topology: Topology::Symmetric,
        ..Default::default()
    };
    let sim = SimConfig {
        t_total: 4e4,
        ..Default::default()
    };
    let omega = 2.0 * PI * 6e9;
    let step = 0.05;
    let mut ok = true;
    let mut parts = Vec::new();
    for (w, center) in [0.0, 0.5].into_iter().enumerate() {
        let grid: Vec<f64> = (-4..=4).map(|i| center + step * i as f64).collect();
        let mut sim_im = Vec::new();
        let mut an_im = Vec::new();
        for (k, &phi) in grid.iter().enumerate() {
            let o = ExtractOptions {
                probe: ProbeAmplitudes {
                    input_flux: 1e-3,
                    output_current: 4e-2,
                },
                max_doublings: 0,
                check_linearity: false,
                stream: (w * 100 + k) as u64,
                ..Default::default()
            };
            let z = extract_two_port(&dev, &BiasPoint::new(42e-6, phi), omega, &sim, &o).unwrap();
            sim_im.push(z.z12.im);
            an_im.push(analytic_im_zr(&dev, z.v_phi, omega, 1.0) - analytic_im_zr(&dev, 0.0, omega, 1.0));
        }
        let (cs, ca) = (crossings(&grid, &sim_im), crossings(&grid, &an_im));
        let matched = cs.len() == 1 && ca.len() == 1 && (cs[0] - ca[0]).abs() <= step;
        ok &= matched;
        parts.push(format!("simulated {cs:.3?} vs analytic {ca:.3?}"));
    }
    (ok, format!("Im Z_r crossings {} (within {step} Φ₀)", parts.join("; ")))
}

fn unitarity() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for zc in [1.0, 2.0, 5.0] {
        let net = MatchingNetwork::new(zc, 6e9, 50.0, 50.0).unwrap();
        for j in 0..=40 {
            let f = 1e9 + j as f64 * 0.25e9;
            let [s11, _, s21, _] = net.abcd(2.0 * PI * f).to_s(50.0, 50.0);
            worst = worst.max((s11.norm_sqr() + s21.norm_sqr() - 1.0).abs());
        }
    }
    (worst <= 1e-6, format!("unitarity worst {worst:.1e} (≤ 1e-6)"))
}

fn round_trip() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for t in [0.01, 0.05, 0.1, 0.6, 1.1, 4.0] {
        for f in [1e9, 6.605e9, 1.2e10] {
            worst = worst.max(rel(occupation_temperature(photon_occupation(t, f), f), t));
        }
    }
    (worst <= 1e-9, format!("occupation round trip worst {worst:.1e} (≤ 1e-9)"))
}

fn determinism() -> (bool, String) {
    let text = r#"
experiment = "smatrix"
[bias]
I_b_uA = 42.0
[sweep]
flux = { start = 0.1, stop = 0.8, count = 3 }
freq_GHz = { start = 5.0, stop = 7.0, count = 4 }
[sim]
t_total = 6000.0
t_transient = 500.0
[extraction]
max_doublings = 0
check_linearity = false
"#;
    let mut cfg = RunConfig::from_toml(text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for workers in [1, 2, 4] {
        cfg.workers = workers;
        let m = execute(&cfg, &tmp.path().join(format!("w{workers}"))).unwrap();
        digests.push(m.files);
    }
    let same = digests.windows(2).all(|w| w[0] == w[1]);
    (same, format!("artifacts identical across 1/2/4 workers: {same}"))
}

fn property_suites() -> Verdict {
    let checks = [
        reciprocity(),
        forward_consistency(),
        reverse_zero_crossing(),
        unitarity(),
        round_trip(),
        determinism(),
    ];
    let pass = checks.iter().all(|c| c.0);
    let detail = checks
        .iter()
        .map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "[failed] " }))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(pass, detail)
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run only when unfiltered or
    // explicitly selected.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    if std::env::args().any(|a| a == "--list") {
        return;
    }

    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("hot-electron temperature", hot_electron),
        ("cavity photon occupation", occupation),
        ("ac Stark shift", stark),
        ("Ramsey frequency rise", ramsey_rise),
        ("composite-junction voltage", composite_junction),
        ("V-Φ modulation and invariants", vphi_curve),
        ("directionality formula", directionality_formula),
        ("scattering maps", scattering_maps),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        println!(
            "criterion {} {}: {} — {} [{:.1} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
