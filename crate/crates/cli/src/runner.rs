//! Experiment execution. Grid points run on a rayon pool sized by `workers`;
//! every point draws from its own random stream, so the output does not
//! depend on the pool size or on scheduling.

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

use slugsim_core::backaction::{backaction_chain, josephson_frequency, static_dissipation, BackactionReport};
use slugsim_core::langevin::EngineOptions;
use slugsim_core::pulsed::pulsed_mode_timeline;
use slugsim_core::ramsey::{extract_fringe_frequencies, fit_rise, precession_frequency, ramsey_surface};
use slugsim_core::scattering::{scattering_map, MapCell, MaskReason};
use slugsim_core::small_signal::{
    analytic_im_zr, analytic_zf, directionality, extract_bias_constants, extract_two_port, transfer_coefficient,
    ExtractOptions,
};
use slugsim_core::transfer::gradient;
use slugsim_core::{normalize, time_average, BiasPoint, Normalization};

use crate::artifacts::{Cell, PointState, PointStatus, Results, Table};
use crate::config::{Experiment, RunConfig};
use crate::error::CliError;

/// Run the configured experiment on a pool of `config.workers` threads.
pub fn run(config: &RunConfig) -> Result<Results, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::field("workers", e.to_string()))?;
    pool.install(|| match config.experiment {
        Experiment::Vphi => run_vphi(config),
        Experiment::Twoport => run_twoport(config),
        Experiment::Smatrix => run_smatrix(config),
        Experiment::Backaction => run_backaction(config),
        Experiment::Ramsey => run_ramsey(config),
        Experiment::Pulsed => run_pulsed(config),
    })
}

fn ok(index: usize, label: String) -> PointStatus {
    PointStatus {
        index,
        label,
        status: PointState::Ok,
        reason: None,
    }
}

fn masked(index: usize, label: String, reason: &MaskReason) -> PointStatus {
    PointStatus {
        index,
        label,
        status: PointState::Masked,
        reason: Some(reason.code().to_string()),
    }
}

fn norm_of(config: &RunConfig) -> Result<Normalization, CliError> {
    let d = config.device();
    Ok(normalize(&d, d.noise_temperature())?)
}

fn run_vphi(config: &RunConfig) -> Result<Results, CliError> {
    let device = config.device();
    let sim = config.sim();
    let norm = norm_of(config)?;
    let i_b = config.bias()?.i_b_ua * 1e-6;
    let flux = config.flux_grid()?;

    let estimates: Vec<_> = flux
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let opts = EngineOptions {
                stream: i as u64,
                ..Default::default()
            };
            time_average(&device, &BiasPoint::new(i_b, phi), &sim, opts)
        })
        .collect();

    let mut points = Vec::with_capacity(flux.len());
    let mut volts = Vec::with_capacity(flux.len());
    for (i, (e, &phi)) in estimates.iter().zip(&flux).enumerate() {
        let label = format!("flux={phi}");
        match e {
            Ok(v) => {
                points.push(ok(i, label));
                volts.push(Some((norm.to_volts(v.mean), norm.to_volts(v.stderr))));
            }
            Err(err) => {
                points.push(masked(i, label, &MaskReason::from_error(err)));
                volts.push(None);
            }
        }
    }
    // Transfer coefficient only where the whole stencil is valid.
    let v_phi: Vec<Option<f64>> = if volts.iter().all(Option::is_some) && flux.len() >= 3 {
        let v: Vec<f64> = volts.iter().map(|p| p.expect("checked").0).collect();
        gradient(&flux, &v)?.into_iter().map(Some).collect()
    } else {
        (0..flux.len())
            .map(|i| {
                let (a, b) = (i.checked_sub(1)?, i + 1);
                let (va, vb) = (volts[a]?, (*volts.get(b)?)?);
                Some((vb.0 - va.0) / (flux[b] - flux[a]))
            })
            .collect()
    };

    let mut table = Table::new("vphi.csv", &["flux_phi0", "voltage_uV", "stderr_uV", "v_phi_uV_per_phi0"]);
    for i in 0..flux.len() {
        table.push(vec![
            flux[i].into(),
            volts[i].map(|v| v.0 * 1e6).into(),
            volts[i].map(|v| v.1 * 1e6).into(),
            v_phi[i].map(|g| g * 1e6).into(),
        ]);
    }
    let valid: Vec<f64> = volts.iter().flatten().map(|v| v.0).collect();
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!("vphi"));
    summary.insert("I_b_uA".into(), json!(i_b * 1e6));
    summary.insert("points".into(), json!(flux.len()));
    summary.insert("masked".into(), json!(flux.len() - valid.len()));
    if !valid.is_empty() {
        let max = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = valid.iter().cloned().fold(f64::INFINITY, f64::min);
        summary.insert("peak_to_peak_uV".into(), json!((max - min) * 1e6));
        summary.insert("v_max_uV".into(), json!(max * 1e6));
        summary.insert("v_min_uV".into(), json!(min * 1e6));
    }
    let slopes: Vec<(f64, f64)> = v_phi.iter().zip(&flux).filter_map(|(g, &f)| g.map(|g| (f, g))).collect();
    if let Some((f, g)) = slopes.iter().cloned().max_by(|a, b| a.1.total_cmp(&b.1)) {
        summary.insert("left_shoulder".into(), json!({"flux_phi0": f, "v_phi_uV_per_phi0": g * 1e6}));
    }
    if let Some((f, g)) = slopes.iter().cloned().min_by(|a, b| a.1.total_cmp(&b.1)) {
        summary.insert("right_shoulder".into(), json!({"flux_phi0": f, "v_phi_uV_per_phi0": g * 1e6}));
    }
    Ok(Results {
        tables: vec![table],
        summary,
        points,
    })
}

fn run_twoport(config: &RunConfig) -> Result<Results, CliError> {
    let device = config.device();
    let sim = config.sim();
    let b = config.bias()?;
    let bias = BiasPoint::new(b.i_b_ua * 1e-6, b.phi_a);
    let freqs = config.freq_grid()?;
    let v_phi = transfer_coefficient(&device, &bias, &sim, ExtractOptions::default().v_phi_step, 0)?;
    let base = ExtractOptions {
        v_phi: Some(v_phi),
        ..config.extraction.to_options()
    };

    let results: Vec<_> = freqs
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let opts = ExtractOptions {
                stream: i as u64 + 1,
                ..base.clone()
            };
            extract_two_port(&device, &bias, 2.0 * PI * f, &sim, &opts)
        })
        .collect();

    let header = [
        "freq_GHz",
        "z11_re_ohm",
        "z11_im_ohm",
        "z12_re_ohm",
        "z12_im_ohm",
        "z21_re_ohm",
        "z21_im_ohm",
        "z22_re_ohm",
        "z22_im_ohm",
        "rel_stderr",
        "rho_i",
        "rho_o",
        "chi_r",
        "zf_analytic_ohm",
        "im_zr_analytic_ohm",
        "directionality_db",
    ];
    let mut table = Table::new("twoport.csv", &header);
    let mut sidecar = Table::new("twoport_masked.csv", &["freq_GHz", "reason"]);
    let mut points = Vec::with_capacity(freqs.len());
    let mut v_mean = None;
    for (i, (r, &f)) in results.iter().zip(&freqs).enumerate() {
        let label = format!("freq={f}");
        match r {
            Ok(z) => {
                points.push(ok(i, label));
                v_mean = Some(z.v_mean);
                let c = extract_bias_constants(z, &device);
                let chi = c.chi_r.value();
                table.push(vec![
                    (f * 1e-9).into(),
                    z.z11.re.into(),
                    z.z11.im.into(),
                    z.z12.re.into(),
                    z.z12.im.into(),
                    z.z21.re.into(),
                    z.z21.im.into(),
                    z.z22.re.into(),
                    z.z22.im.into(),
                    z.rel_stderr.into(),
                    c.rho_i.into(),
                    c.rho_o.into(),
                    chi.into(),
                    analytic_zf(&device, z.v_phi).into(),
                    analytic_im_zr(&device, z.v_phi, z.omega, 1.0).into(),
                    directionality(&device, z.v_phi, z.omega, 1.0).db().into(),
                ]);
            }
            Err(e) => {
                let reason = MaskReason::from_error(e);
                points.push(masked(i, label, &reason));
                let mut row = vec![Cell::from(f * 1e-9)];
                row.resize(header.len(), Cell::Empty);
                table.push(row);
                sidecar.push(vec![(f * 1e-9).into(), reason.code().into()]);
            }
        }
    }
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!("twoport"));
    summary.insert("I_b_uA".into(), json!(bias.i_b * 1e6));
    summary.insert("phi_a".into(), json!(bias.phi_a));
    summary.insert("v_phi_uV_per_phi0".into(), json!(v_phi * 1e6));
    summary.insert("zf_analytic_ohm".into(), json!(analytic_zf(&device, v_phi)));
    if let Some(v) = v_mean {
        summary.insert("v_mean_uV".into(), json!(v * 1e6));
    }
    summary.insert("masked".into(), json!(sidecar.rows.len()));
    Ok(Results {
        tables: vec![table, sidecar],
        summary,
        points,
    })
}

fn run_smatrix(config: &RunConfig) -> Result<Results, CliError> {
    let device = config.device();
    let sim = config.sim();
    let i_b = config.bias()?.i_b_ua * 1e-6;
    let flux = config.flux_grid()?;
    let freqs = config.freq_grid()?;
    let network = config.network()?;
    let opts = config.extraction.to_options();
    let map = scattering_map(&device, i_b, &flux, &freqs, &network, &sim, &opts)?;

    let mut long = Table::new(
        "smatrix.csv",
        &[
            "flux_phi0",
            "freq_GHz",
            "s11_db",
            "s12_db",
            "s21_db",
            "s22_db",
            "v_phi_uV_per_phi0",
            "directionality_db",
        ],
    );
    let mut sidecar = Table::new("smatrix_masked.csv", &["flux_phi0", "freq_GHz", "reason"]);
    let wide_header: Vec<String> = std::iter::once("flux_phi0".to_string())
        .chain(freqs.iter().map(|f| format!("f_{}GHz", f * 1e-9)))
        .collect();
    let wide_header: Vec<&str> = wide_header.iter().map(String::as_str).collect();
    let mut s21 = Table::new("s21_db.csv", &wide_header);
    let mut s12 = Table::new("s12_db.csv", &wide_header);
    let mut points = Vec::with_capacity(map.len());
    for (i, row) in map.cells.iter().enumerate() {
        let mut w21 = vec![Cell::from(flux[i])];
        let mut w12 = vec![Cell::from(flux[i])];
        for (j, cell) in row.iter().enumerate() {
            let index = i * freqs.len() + j;
            let label = format!("flux={},freq={}", flux[i], freqs[j]);
            match cell {
                MapCell::Ok(p) => {
                    points.push(ok(index, label));
                    long.push(vec![
                        flux[i].into(),
                        (freqs[j] * 1e-9).into(),
                        p.s11_db.into(),
                        p.s12_db.into(),
                        p.s21_db.into(),
                        p.s22_db.into(),
                        (p.z.v_phi * 1e6).into(),
                        (p.s21_db - p.s12_db).into(),
                    ]);
                    w21.push(p.s21_db.into());
                    w12.push(p.s12_db.into());
                }
                MapCell::Masked(reason) => {
                    points.push(masked(index, label, reason));
                    let mut r = vec![Cell::from(flux[i]), Cell::from(freqs[j] * 1e-9)];
                    r.resize(8, Cell::Empty);
                    long.push(r);
                    sidecar.push(vec![flux[i].into(), (freqs[j] * 1e-9).into(), reason.code().into()]);
                    w21.push(Cell::Empty);
                    w12.push(Cell::Empty);
                }
            }
        }
        s21.push(w21);
        s12.push(w12);
    }

    let mut summary = Map::new();
    summary.insert("experiment".into(), json!("smatrix"));
    summary.insert("I_b_uA".into(), json!(i_b * 1e6));
    summary.insert("points".into(), json!(map.len()));
    summary.insert("masked".into(), json!(map.masked_count()));
    summary.insert("output_embedding".into(), json!("direct to Z_load, no output network"));
    let at = |(i, j, v): (usize, usize, f64)| json!({"db": v, "flux_phi0": flux[i], "freq_GHz": freqs[j] * 1e-9});
    if let Some(best) = map.argmax(|p| p.s21_db) {
        summary.insert("peak_gain".into(), at(best));
    }
    if let Some(best) = map.argmin(|p| p.s12_db) {
        summary.insert("min_s12".into(), at(best));
    }
    Ok(Results {
        tables: vec![long, sidecar, s21, s12],
        summary,
        points,
    })
}

/// Shunt power for the backaction chain: configured, or I_b·V at the
/// configured bias, or the device's working dissipation.
fn chain_power(config: &RunConfig) -> Result<(f64, Option<f64>), CliError> {
    if let Some(p) = config.backaction.power_nw {
        return Ok((p * 1e-9, None));
    }
    match &config.bias {
        Some(b) => {
            let device = config.device();
            let norm = norm_of(config)?;
            let bias = BiasPoint::new(b.i_b_ua * 1e-6, b.phi_a);
            let v = time_average(&device, &bias, &config.sim(), EngineOptions::default())?;
            let v_mean = norm.to_volts(v.mean);
            Ok((static_dissipation(&bias, v_mean), Some(v_mean)))
        }
        None => Ok((config.device().shunt_power, None)),
    }
}

fn chain(config: &RunConfig) -> Result<BackactionReport, CliError> {
    let (power, v_mean) = chain_power(config)?;
    let mut report = backaction_chain(
        &config.device(),
        power,
        config.backaction.t_cold_k,
        &config.qubit_cavity.to_params(),
        config.backaction.dephasing,
    )?;
    report.josephson_frequency = v_mean.map(josephson_frequency);
    Ok(report)
}

fn report_summary(r: &BackactionReport) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("P_nW".into(), json!(r.p_dissipated * 1e9));
    s.insert("T_e_K".into(), json!(r.t_electron));
    s.insert("T_eff_K".into(), json!(r.t_cavity_effective));
    s.insert("n_bar".into(), json!(r.n_bar_steady));
    s.insert("stark_shift_MHz".into(), json!(r.stark_shift * 1e-6));
    s.insert("dephasing_rate_per_s".into(), json!(r.dephasing_rate));
    if let Some(f) = r.josephson_frequency {
        s.insert("josephson_frequency_GHz".into(), json!(f * 1e-9));
    }
    s.insert("caveats".into(), json!(r.caveats));
    s
}

fn run_backaction(config: &RunConfig) -> Result<Results, CliError> {
    let r = chain(config)?;
    let mut table = Table::new("backaction.csv", &["quantity", "value", "unit"]);
    let rows: [(&str, f64, &str); 6] = [
        ("P_dissipated", r.p_dissipated, "W"),
        ("T_electron", r.t_electron, "K"),
        ("T_cavity_effective", r.t_cavity_effective, "K"),
        ("n_bar_steady", r.n_bar_steady, "1"),
        ("stark_shift", r.stark_shift, "Hz"),
        ("dephasing_rate", r.dephasing_rate, "1/s"),
    ];
    for (q, v, u) in rows {
        table.push(vec![q.into(), v.into(), u.into()]);
    }
    if let Some(f) = r.josephson_frequency {
        table.push(vec!["josephson_frequency".into(), f.into(), "Hz".into()]);
    }
    let mut summary = report_summary(&r);
    summary.insert("experiment".into(), json!("backaction"));
    Ok(Results {
        tables: vec![table],
        summary,
        points: vec![ok(0, "chain".into())],
    })
}

fn run_ramsey(config: &RunConfig) -> Result<Results, CliError> {
    let qc = config.qubit_cavity.to_params();
    let (n_steady, report) = match config.ramsey.n_steady {
        Some(n) => (n, None),
        None => {
            let r = chain(config)?;
            (r.n_bar_steady, Some(r))
        }
    };
    let hs: Vec<f64> = config.ramsey.head_start_ns.points().iter().map(|t| t * 1e-9).collect();
    let tau: Vec<f64> = config.ramsey.evolution_ns.points().iter().map(|t| t * 1e-9).collect();

    let mut surface_t = Table::new("ramsey_surface.csv", &["head_start_ns", "evolution_ns", "amplitude"]);
    let mut freq_t = Table::new(
        "ramsey_frequency.csv",
        &["head_start_ns", "extracted_MHz", "instantaneous_MHz"],
    );
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!("ramsey"));
    summary.insert("n_steady".into(), json!(n_steady));
    summary.insert("ramsey_detuning_MHz".into(), json!(qc.ramsey_detuning * 1e-6));
    summary.insert(
        "saturated_frequency_MHz".into(),
        json!((qc.ramsey_detuning + qc.two_chi_over_2pi() * n_steady) * 1e-6),
    );
    if let Some(r) = &report {
        summary.insert("backaction".into(), Value::Object(report_summary(r)));
    }
    let mut points = Vec::new();
    if !hs.is_empty() {
        let surface = ramsey_surface(&qc, n_steady, &hs, &tau, config.backaction.dephasing)?;
        for (i, row) in surface.amplitude.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                surface_t.push(vec![(hs[i] * 1e9).into(), (tau[j] * 1e9).into(), (*a).into()]);
            }
        }
        let freqs = extract_fringe_frequencies(&surface)?;
        for (i, f) in freqs.iter().enumerate() {
            points.push(ok(i, format!("head_start={}", hs[i])));
            freq_t.push(vec![
                (hs[i] * 1e9).into(),
                (f * 1e-6).into(),
                (precession_frequency(&qc, n_steady, hs[i]) * 1e-6).into(),
            ]);
        }
        let fit = fit_rise(&hs, &freqs)?;
        summary.insert(
            "rise_fit".into(),
            json!({
                "time_constant_ns": fit.time_constant * 1e9,
                "f_sat_MHz": fit.f_sat * 1e-6,
                "amplitude_MHz": fit.amplitude * 1e-6,
                "rms_residual_kHz": fit.rms_residual * 1e-3,
            }),
        );
    }
    Ok(Results {
        tables: vec![surface_t, freq_t],
        summary,
        points,
    })
}

fn run_pulsed(config: &RunConfig) -> Result<Results, CliError> {
    let section = config.pulsed.as_ref().ok_or(CliError::MissingSection {
        section: "pulsed",
        experiment: "pulsed",
    })?;
    let qc = config.qubit_cavity.to_params();
    let report = chain(config)?;
    let n_steady = section.n_steady.unwrap_or(report.n_bar_steady);
    let events: Vec<_> = section.events.iter().map(|e| e.to_event()).collect();
    let tl = pulsed_mode_timeline(&events, &qc, n_steady, report.p_dissipated)?;

    let mut table = Table::new(
        "pulsed.csv",
        &["start_ns", "end_ns", "state", "emits", "n_start", "n_end", "exposure_ns", "energy_fJ"],
    );
    let mut points = Vec::new();
    for (i, iv) in tl.intervals.iter().enumerate() {
        let active = iv.state == slugsim_core::SlugState::Active;
        points.push(ok(i, format!("interval={i}")));
        table.push(vec![
            (iv.start * 1e9).into(),
            (iv.end * 1e9).into(),
            (if active { "active" } else { "idle" }).into(),
            (if active { "emits" } else { "reflects" }).into(),
            iv.n_start.into(),
            iv.n_end.into(),
            (iv.exposure * 1e9).into(),
            (iv.dissipated_energy * 1e15).into(),
        ]);
    }
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!("pulsed"));
    summary.insert("n_steady".into(), json!(n_steady));
    summary.insert("exposure_ns".into(), json!(tl.exposure * 1e9));
    summary.insert("stark_phase_rad".into(), json!(tl.stark_phase));
    summary.insert("dissipated_energy_fJ".into(), json!(tl.dissipated_energy * 1e15));
    summary.insert(
        "free_evolution_ns".into(),
        json!([tl.free_evolution.0 * 1e9, tl.free_evolution.1 * 1e9]),
    );
    Ok(Results {
        tables: vec![table],
        summary,
        points,
    })
}
