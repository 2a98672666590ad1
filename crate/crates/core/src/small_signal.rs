//! Small-signal two-port impedance of the biased device, extracted from
//! perturbed time-domain runs, and the closed-form transimpedance and
//! directionality approximations it is compared against.
//!
//! Every probe is applied twice, with opposite signs and the same random
//! stream; the response is half the difference. Noise that does not depend on
//! the probe cancels, so the lock-in converges far faster than a single run.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::FLUX_QUANTUM;
use crate::device::{normalize, BiasPoint, DeviceParams, Normalization, SimConfig, Topology};
use crate::error::{domain, Result, SlugError};
use crate::langevin::{run, time_average, Drive, EngineOptions, Port};
use crate::lockin::{complex_mean_stderr, LockInObserver, Window};

/// Complex impedance matrix of the SLUG at one bias point and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPortZ {
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Input impedance (Ω).
    pub z11: Complex64,
    /// Reverse transimpedance Z_r = ∂V_in/∂I_out (Ω).
    pub z12: Complex64,
    /// Forward transimpedance Z_f = ∂V_out/∂I_in (Ω).
    pub z21: Complex64,
    /// Output impedance (Ω).
    pub z22: Complex64,
    pub bias: BiasPoint,
    /// Transfer coefficient at the bias point (V/Φ₀).
    pub v_phi: f64,
    /// Mean output voltage at the bias point (V).
    pub v_mean: f64,
    /// Largest relative lock-in standard error among the four entries.
    pub rel_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAmplitudes {
    /// Input probe as a flux amplitude (Φ₀).
    pub input_flux: f64,
    /// Output probe as a bias-current amplitude (units of I0).
    pub output_current: f64,
}

impl Default for ProbeAmplitudes {
    fn default() -> Self {
        Self {
            input_flux: 1e-3,
            output_current: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub probe: ProbeAmplitudes,
    /// Stop extending the averaging window once every entry's relative
    /// standard error is below this.
    pub target_rel_stderr: f64,
    /// Maximum number of window doublings.
    pub max_doublings: u32,
    /// Repeat at half amplitude and fail if any entry moves by more than
    /// `linearity_tolerance` (and by more than 3 standard errors).
    pub check_linearity: bool,
    pub linearity_tolerance: f64,
    /// Fail with a bias-state error when the device is in the zero-voltage
    /// state.
    pub require_voltage_state: bool,
    /// Mean voltage (units of I0R) below which the bias counts as zero-voltage.
    pub voltage_threshold: f64,
    /// Known transfer coefficient (V/Φ₀); computed by a ±`v_phi_step` flux
    /// difference when absent.
    pub v_phi: Option<f64>,
    pub v_phi_step: f64,
    /// Random stream of this extraction task.
    pub stream: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            probe: ProbeAmplitudes::default(),
            target_rel_stderr: 0.02,
            max_doublings: 3,
            check_linearity: true,
            linearity_tolerance: 0.05,
            require_voltage_state: true,
            voltage_threshold: 1e-3,
            v_phi: None,
            v_phi_step: 0.01,
            stream: 0,
        }
    }
}

/// Demodulated response of both port voltages to a drive at one port, per
/// tone: (mean, stderr) in dimensionless voltage per unit drive amplitude.
struct PortResponse {
    out: Vec<(Complex64, f64)>,
    inp: Vec<(Complex64, f64)>,
    v_mean: f64,
}

struct Plan {
    /// Dimensionless tone frequencies.
    omegas: Vec<f64>,
    window: Window,
    block_steps: usize,
    sim: SimConfig,
}

fn plan(omegas: &[f64], norm: &Normalization, sim: &SimConfig) -> Plan {
    let dt = sim.dt;
    let n_tr = (sim.t_transient / dt).round() as usize;
    let post_target = ((sim.t_total - sim.t_transient) / dt).round() as usize;
    let w: Vec<f64> = omegas.iter().map(|&o| norm.to_dimensionless_omega(o)).collect();
    let (window, block_steps) = if w.len() == 1 {
        let period = 2.0 * PI / w[0];
        let periods = (sim.block_span / period).ceil().max(1.0);
        (Window::Rectangular, (periods * period / dt).round() as usize)
    } else {
        let mut sorted = w.clone();
        sorted.sort_by(f64::total_cmp);
        let min_gap = sorted.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        let lowest = sorted[0];
        let mut span = sim.block_span.max(8.0 * 2.0 * PI / lowest);
        if min_gap.is_finite() && min_gap > 0.0 {
            span = span.max(8.0 * 2.0 * PI / min_gap);
        }
        (Window::Hann, (span / dt).round() as usize)
    };
    let block_steps = block_steps.max(1);
    let blocks = (post_target / block_steps).max(8);
    let post = blocks * block_steps;
    Plan {
        omegas: w,
        window,
        block_steps,
        sim: SimConfig {
            t_total: (n_tr + post) as f64 * dt,
            ..sim.clone()
        },
    }
}

fn probe_port(
    device: &DeviceParams,
    bias: &BiasPoint,
    plan: &Plan,
    port: Port,
    amplitude: f64,
    omegas: &[f64],
    stream: u64,
) -> Result<PortResponse> {
    let freqs: Vec<f64> = omegas.iter().map(|o| o / (2.0 * PI)).collect();
    let opts = EngineOptions {
        stream,
        ..Default::default()
    };
    let mut sides = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let drive = Drive::comb(port, sign * amplitude, &freqs);
        let mut obs = LockInObserver::new(&plan.omegas, plan.window, plan.block_steps);
        run(device, bias, &plan.sim, Some(&drive), opts, &mut obs)?;
        sides.push(obs);
    }
    let (plus, minus) = (&sides[0], &sides[1]);
    let blocks = plus.blocks_out.len().min(minus.blocks_out.len());
    let per_tone = |p: &Vec<Vec<Complex64>>, m: &Vec<Vec<Complex64>>, k: usize| {
        let diffs: Vec<Complex64> = (0..blocks).map(|b| (p[b][k] - m[b][k]) / (2.0 * amplitude)).collect();
        complex_mean_stderr(&diffs)
    };
    Ok(PortResponse {
        out: (0..freqs.len()).map(|k| per_tone(&plus.blocks_out, &minus.blocks_out, k)).collect(),
        inp: (0..freqs.len()).map(|k| per_tone(&plus.blocks_in, &minus.blocks_in, k)).collect(),
        v_mean: 0.5 * (plus.mean_voltage() + minus.mean_voltage()),
    })
}

/// Impedances (Ω) with standard errors, per tone, from the two port responses.
struct Measured {
    z: Vec<[(Complex64, f64); 4]>,
    v_mean: f64,
}

fn measure(
    device: &DeviceParams,
    bias: &BiasPoint,
    plan: &Plan,
    omegas: &[f64],
    opts: &ExtractOptions,
    scale: f64,
) -> Result<Measured> {
    let per_tone = 1.0 / (omegas.len() as f64).sqrt();
    let a_in = opts.probe.input_flux * per_tone * scale;
    let a_out = opts.probe.output_current * per_tone * scale;
    let input = probe_port(device, bias, plan, Port::InputFlux, a_in, omegas, opts.stream)?;
    if opts.require_voltage_state && input.v_mean.abs() < opts.voltage_threshold {
        return Err(SlugError::BiasState {
            v_mean: input.v_mean * device.i0 * device.r,
        });
    }
    let output = probe_port(device, bias, plan, Port::OutputCurrent, a_out, omegas, opts.stream)?;
    // Input probe amplitudes are fluxes; I_in = Φ/M.
    let k_in = device.i0 * device.r * device.m / FLUX_QUANTUM;
    let k_out = device.r;
    let z = (0..omegas.len())
        .map(|k| {
            let s = |(h, e): (Complex64, f64), c: f64| (h * c, e * c);
            [
                s(input.inp[k], k_in),
                s(output.inp[k], k_out),
                s(input.out[k], k_in),
                s(output.out[k], k_out),
            ]
        })
        .collect();
    Ok(Measured {
        z,
        v_mean: input.v_mean,
    })
}

fn worst_rel(m: &Measured) -> f64 {
    m.z.iter()
        .flat_map(|row| row.iter())
        .map(|(z, e)| if z.norm() > 0.0 { e / z.norm() } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

const ENTRY_NAMES: [&str; 4] = ["Z11", "Z12", "Z21", "Z22"];

/// Transfer coefficient (V/Φ₀) by a common-noise central difference in flux.
pub fn transfer_coefficient(
    device: &DeviceParams,
    bias: &BiasPoint,
    sim: &SimConfig,
    step: f64,
    stream: u64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(domain("v_phi_step", "must be > 0"));
    }
    let opts = EngineOptions {
        stream,
        ..Default::default()
    };
    let hi = time_average(device, &BiasPoint::new(bias.i_b, bias.phi_a + step), sim, opts)?;
    let lo = time_average(device, &BiasPoint::new(bias.i_b, bias.phi_a - step), sim, opts)?;
    Ok((hi.mean - lo.mean) / (2.0 * step) * device.i0 * device.r)
}

/// Extract the two-port at several angular frequencies at once by driving
/// each port with a comb of tones (Hann-windowed lock-in). A single
/// frequency uses a rectangular window over whole probe periods.
pub fn extract_two_port_sweep(
    device: &DeviceParams,
    bias: &BiasPoint,
    omegas: &[f64],
    sim: &SimConfig,
    opts: &ExtractOptions,
) -> Result<Vec<TwoPortZ>> {
    if omegas.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = omegas.iter().find(|o| !(o.is_finite() && **o > 0.0)) {
        return Err(domain("omega", format!("must be > 0, got {bad}")));
    }
    if !(opts.probe.input_flux > 0.0 && opts.probe.output_current > 0.0) {
        return Err(domain("probe", "probe amplitudes must be > 0"));
    }
    let norm = normalize(device, device.noise_temperature())?;
    let mut cur = sim.clone();
    let mut doublings = 0;
    let (measured, plan) = loop {
        let p = plan(omegas, &norm, &cur);
        let m = measure(device, bias, &p, omegas, opts, 1.0)?;
        if worst_rel(&m) <= opts.target_rel_stderr || doublings >= opts.max_doublings {
            break (m, p);
        }
        doublings += 1;
        cur = cur.with_post_transient_scaled(2.0);
    };

    if opts.check_linearity {
        let half = measure(device, bias, &plan, omegas, opts, 0.5)?;
        for (full, halved) in measured.z.iter().zip(&half.z) {
            for (i, ((a, ea), (b, eb))) in full.iter().zip(halved.iter()).enumerate() {
                let diff = (a - b).norm();
                let rel = diff / a.norm().max(f64::MIN_POSITIVE);
                let noise = 3.0 * (ea * ea + eb * eb).sqrt();
                if rel > opts.linearity_tolerance && diff > noise {
                    return Err(SlugError::Nonlinearity {
                        quantity: ENTRY_NAMES[i],
                        change: 100.0 * rel,
                    });
                }
            }
        }
    }

    let v_phi = match opts.v_phi {
        Some(v) => v,
        None => transfer_coefficient(device, bias, &plan.sim, opts.v_phi_step, opts.stream)?,
    };
    let v_mean = norm.to_volts(measured.v_mean);
    Ok(omegas
        .iter()
        .zip(&measured.z)
        .map(|(&omega, row)| {
            let rel = row
                .iter()
                .map(|(z, e)| if z.norm() > 0.0 { e / z.norm() } else { f64::INFINITY })
                .fold(0.0, f64::max);
            TwoPortZ {
                omega,
                z11: row[0].0,
                z12: row[1].0,
                z21: row[2].0,
                z22: row[3].0,
                bias: *bias,
                v_phi,
                v_mean,
                rel_stderr: rel,
            }
        })
        .collect())
}

/// Extract the two-port impedance matrix at angular frequency `omega`.
pub fn extract_two_port(
    device: &DeviceParams,
    bias: &BiasPoint,
    omega: f64,
    sim: &SimConfig,
    opts: &ExtractOptions,
) -> Result<TwoPortZ> {
    let mut v = extract_two_port_sweep(device, bias, &[omega], sim, opts)?;
    Ok(v.remove(0))
}

/// Transfer coefficient in V/Wb (equivalently s⁻¹).
fn v_phi_si(v_phi: f64) -> f64 {
    v_phi / FLUX_QUANTUM
}

/// Forward transimpedance L·V_Φ (Ω) for `v_phi` in V/Φ₀.
pub fn analytic_zf(device: &DeviceParams, v_phi: f64) -> f64 {
    device.l * v_phi_si(v_phi)
}

/// `1 + (L/R)·V_Φ`, the factor by which quantum interference scales the
/// Faraday reverse term.
pub fn reverse_bracket(device: &DeviceParams, v_phi: f64) -> f64 {
    1.0 + device.l / device.r * v_phi_si(v_phi)
}

/// Im[Z_r] = χ_r·ωL·(1 + (L/R)·V_Φ) in Ω.
pub fn analytic_im_zr(device: &DeviceParams, v_phi: f64, omega: f64, chi_r: f64) -> f64 {
    chi_r * omega * device.l * reverse_bracket(device, v_phi)
}

/// Reverse transimpedance carried by the bias current through the loop
/// inductance alone (Ω, imaginary part): half the bias flows through M in the
/// galvanic topology, none in the symmetric one.
pub fn faraday_reverse_term(device: &DeviceParams, omega: f64) -> f64 {
    match device.topology {
        Topology::Slug => 0.5 * omega * device.m,
        Topology::Symmetric => 0.0,
    }
}

/// Power ratio |S21|²/|S12|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directionality {
    Finite(f64),
    /// The reverse transimpedance cancels exactly.
    Infinite,
}

impl Directionality {
    pub fn db(&self) -> f64 {
        match self {
            Directionality::Finite(d) => 10.0 * d.log10(),
            Directionality::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Directionality::Infinite)
    }
}

/// `χ_r⁻²·ratio²·bracket⁻²` where `ratio` = V_Φ/ω (dimensionless).
pub fn directionality_from_terms(ratio: f64, bracket: f64, chi_r: f64) -> Directionality {
    // Rounding leaves ~1e-16 where the bracket cancels analytically.
    if chi_r == 0.0 || bracket.abs() < 1e-12 {
        return Directionality::Infinite;
    }
    let denom = chi_r * chi_r * bracket * bracket;
    if denom == 0.0 {
        Directionality::Infinite
    } else {
        Directionality::Finite(ratio * ratio / denom)
    }
}

/// D = χ_r⁻²·(V_Φ/ω)²·(1 + (L/R)·V_Φ)⁻², with `v_phi` in V/Φ₀ and `omega`
/// in rad/s.
pub fn directionality(device: &DeviceParams, v_phi: f64, omega: f64, chi_r: f64) -> Directionality {
    directionality_from_terms(v_phi_si(v_phi) / omega, reverse_bracket(device, v_phi), chi_r)
}

/// χ_r, or the cancellation marker when the bracket is too small to divide by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiR {
    Value(f64),
    UndefinedAtCancellation,
}

impl ChiR {
    pub fn value(&self) -> Option<f64> {
        match self {
            ChiR::Value(v) => Some(*v),
            ChiR::UndefinedAtCancellation => None,
        }
    }
}

/// Dimensionless bias-dependent constants of the gain expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConstants {
    /// R_i = ρ_i·(ωL)²/R.
    pub rho_i: f64,
    /// R_o = ρ_o·R.
    pub rho_o: f64,
    pub chi_r: ChiR,
}

pub const CANCELLATION_GUARD: f64 = 1e-3;

pub fn extract_bias_constants(two_port: &TwoPortZ, device: &DeviceParams) -> BiasConstants {
    let wl = two_port.omega * device.l;
    let bracket = reverse_bracket(device, two_port.v_phi);
    let chi_r = if bracket.abs() < CANCELLATION_GUARD {
        ChiR::UndefinedAtCancellation
    } else {
        ChiR::Value(two_port.z12.im / (wl * bracket))
    };
    BiasConstants {
        rho_i: two_port.z11.re * device.r / (wl * wl),
        rho_o: two_port.z22.re / device.r,
        chi_r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dev() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn forward_transimpedance_values() {
        assert_relative_eq!(analytic_zf(&dev(), 1e-3), 6.7e-12 * 1e-3 / FLUX_QUANTUM, max_relative = 1e-12);
        assert!((analytic_zf(&dev(), 1e-3) - 3.24).abs() < 0.01);
        assert_eq!(analytic_zf(&dev(), 0.0), 0.0);
        assert!(analytic_zf(&dev(), -2e-4) < 0.0);
    }

    #[test]
    fn reverse_transimpedance_cancels() {
        let d = dev();
        let omega = 2.0 * PI * 6e9;
        let cancel = -d.r_over_l_v_per_phi0();
        assert!(analytic_im_zr(&d, cancel, omega, 0.7).abs() < 1e-15);
        // pure Faraday term ωL
        assert!((analytic_im_zr(&d, 0.0, omega, 1.0) - 0.2526).abs() < 1e-3);
    }

    #[test]
    fn directionality_of_order_twenty_db() {
        let d = directionality_from_terms(80.0 / 6.0, 1.0, 1.0);
        assert_relative_eq!(d.db(), 10.0 * (80.0f64 / 6.0).powi(2).log10(), max_relative = 1e-12);
        assert!((d.db() - 22.5).abs() < 0.05);
        let dev = dev();
        assert!(directionality(&dev, -dev.r_over_l_v_per_phi0(), 1e10, 1.0).is_infinite());
    }

    #[test]
    fn directionality_falls_six_db_per_octave() {
        let d = dev();
        let v = 3e-4;
        let a = directionality(&d, v, 2.0 * PI * 5e9, 0.5).db();
        let b = directionality(&d, v, 2.0 * PI * 10e9, 0.5).db();
        assert_relative_eq!(a - b, 20.0 * 2f64.log10(), max_relative = 1e-12);
    }

    #[test]
    fn chi_r_round_trip_and_guard() {
        let d = dev();
        let omega = 2.0 * PI * 6e9;
        let z = TwoPortZ {
            omega,
            z11: Complex64::new(0.003, 0.25),
            z12: Complex64::new(0.01, 0.118),
            z21: Complex64::new(-1.1, 0.13),
            z22: Complex64::new(6.0, 0.06),
            bias: BiasPoint::new(42e-6, 0.75),
            v_phi: -3.5e-4,
            v_mean: 1e-4,
            rel_stderr: 0.0,
        };
        let c = extract_bias_constants(&z, &d);
        let chi = c.chi_r.value().unwrap();
        assert_relative_eq!(analytic_im_zr(&d, z.v_phi, omega, chi), z.z12.im, max_relative = 1e-12);
        assert_relative_eq!(c.rho_o, 0.75, max_relative = 1e-12);
        let at_cancel = TwoPortZ { v_phi: -d.r_over_l_v_per_phi0(), ..z };
        assert_eq!(extract_bias_constants(&at_cancel, &d).chi_r, ChiR::UndefinedAtCancellation);
    }
}
