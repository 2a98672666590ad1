//! Classical backaction of the SLUG on a dispersively read-out qubit: shunt
//! hot-electron temperature, thermal photons in the readout cavity, the ac
//! Stark shift they produce and the dephasing from their fluctuations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{BOLTZMANN, FLUX_QUANTUM, PLANCK};
use crate::device::{BiasPoint, DeviceParams};
use crate::error::{domain, Result};
use crate::ramsey::FringeSurface;

/// Readout cavity and qubit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCavityParams {
    /// Readout mode frequency (Hz).
    pub f_cavity: f64,
    /// χ/2π (Hz) for H = ħχ·n·σz; the cavity pull between qubit states is 2χ.
    pub chi_over_2pi: f64,
    /// Cavity energy decay rate (s⁻¹).
    pub kappa: f64,
    /// Qubit frequency (Hz).
    pub f_qubit: f64,
    /// Intrinsic Ramsey coherence time (s).
    pub t2: f64,
    /// Deliberate Ramsey detuning (Hz).
    pub ramsey_detuning: f64,
}

impl Default for QubitCavityParams {
    fn default() -> Self {
        Self {
            f_cavity: 6.605e9,
            chi_over_2pi: 0.75e6,
            kappa: 1.0 / 350e-9,
            f_qubit: 5.5e9,
            t2: 10e-6,
            ramsey_detuning: 10e6,
        }
    }
}

impl QubitCavityParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("qubit_cavity.f_cavity", self.f_cavity),
            ("qubit_cavity.kappa", self.kappa),
            ("qubit_cavity.f_qubit", self.f_qubit),
            ("qubit_cavity.t2", self.t2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(field, format!("must be > 0, got {v}")));
            }
        }
        if !(self.chi_over_2pi.is_finite() && self.chi_over_2pi >= 0.0) {
            return Err(domain("qubit_cavity.chi_over_2pi", "must be >= 0"));
        }
        if !self.ramsey_detuning.is_finite() {
            return Err(domain("qubit_cavity.ramsey_detuning", "must be finite"));
        }
        Ok(())
    }

    /// State-dependent cavity shift 2χ/2π (Hz).
    pub fn two_chi_over_2pi(&self) -> f64 {
        2.0 * self.chi_over_2pi
    }
}

/// Electron temperature from P/(ΣV) = Tₑ⁵ − Tₚ⁵.
pub fn electron_temperature(power: f64, sigma_ep: f64, volume: f64, t_phonon: f64) -> f64 {
    (power.max(0.0) / (sigma_ep * volume) + t_phonon.powi(5)).powf(0.2)
}

/// Electron temperature of the device's shunts at dissipated power `power`.
pub fn shunt_electron_temperature(device: &DeviceParams, power: f64) -> f64 {
    electron_temperature(power, device.sigma_ep, device.shunt_volume, device.t_phonon)
}

/// Static power I_b·V delivered to the shunts (W) for mean voltage `v_mean` (V).
pub fn static_dissipation(bias: &BiasPoint, v_mean: f64) -> f64 {
    bias.i_b * v_mean
}

/// Bose–Einstein occupation of a mode at `frequency` (Hz) and `temperature` (K).
pub fn photon_occupation(temperature: f64, frequency: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = PLANCK * frequency / (BOLTZMANN * temperature);
    1.0 / x.exp_m1()
}

/// Temperature at which a mode at `frequency` holds `n` thermal photons.
pub fn occupation_temperature(n: f64, frequency: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    PLANCK * frequency / (BOLTZMANN * (1.0 / n).ln_1p())
}

/// Temperature of a mode coupled equally to a hot and a cold port: the
/// occupations average.
pub fn effective_cavity_temperature(t_hot: f64, t_cold: f64, frequency: f64) -> f64 {
    let n = 0.5 * (photon_occupation(t_hot, frequency) + photon_occupation(t_cold, frequency));
    occupation_temperature(n, frequency)
}

/// ac Stark shift of the qubit (Hz): 2χ/2π per photon.
pub fn stark_shift(n_bar: f64, qc: &QubitCavityParams) -> f64 {
    qc.two_chi_over_2pi() * n_bar
}

/// Mean photon number `t` seconds after the SLUG starts emitting into an
/// empty cavity.
pub fn cavity_fill(n_steady: f64, kappa: f64, t: f64) -> f64 {
    n_steady * (-(kappa * t)).exp_m1().abs()
}

/// `∫₀^τ cavity_fill(t₀ + t) dt`.
pub fn cavity_fill_integral(n_steady: f64, kappa: f64, t0: f64, tau: f64) -> f64 {
    n_steady * (tau - (-kappa * t0).exp() * (-(kappa * tau)).exp_m1().abs() / kappa)
}

/// Thermal-photon dephasing model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DephasingModel {
    /// Γ = (κ/2)·Re[√((1 + 2iχ/κ)² + 8iχn/κ) − 1], valid for any χ/κ.
    #[default]
    StrongDispersive,
    /// Γ = 4χ²n(n+1)/κ, the χ ≪ κ limit of the above.
    WeakDispersive,
}

/// Dephasing rate (s⁻¹) from thermal photon-number fluctuations at mean
/// occupation `n_bar`.
pub fn dephasing_rate(n_bar: f64, qc: &QubitCavityParams, model: DephasingModel) -> f64 {
    if n_bar <= 0.0 {
        return 0.0;
    }
    let chi = 2.0 * PI * qc.chi_over_2pi;
    let k = qc.kappa;
    match model {
        DephasingModel::WeakDispersive => 4.0 * chi * chi * n_bar * (n_bar + 1.0) / k,
        DephasingModel::StrongDispersive => {
            let a = Complex64::new(1.0, 2.0 * chi / k);
            let root = (a * a + Complex64::new(0.0, 8.0 * chi * n_bar / k)).sqrt();
            0.5 * k * (root.re - 1.0)
        }
    }
}

/// Fundamental Josephson frequency V/Φ₀ (Hz) for mean voltage `v_mean` (V).
pub fn josephson_frequency(v_mean: f64) -> f64 {
    v_mean / FLUX_QUANTUM
}

/// Model choices that go beyond the closed-form chain, recorded with every
/// report.
pub const CAVEATS: [&str; 3] = [
    "photon dephasing uses the thermal strong-dispersive formula",
    "dressed dephasing is not modeled",
    "emission at the Josephson frequency is reported but not coupled to the qubit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackactionReport {
    /// W.
    pub p_dissipated: f64,
    /// K.
    pub t_electron: f64,
    /// K.
    pub t_cavity_effective: f64,
    pub n_bar_steady: f64,
    /// Hz.
    pub stark_shift: f64,
    /// s⁻¹.
    pub dephasing_rate: f64,
    /// Hz; present when a mean voltage was supplied.
    pub josephson_frequency: Option<f64>,
    pub fringe_surface: Option<FringeSurface>,
    pub caveats: Vec<String>,
}

/// Dissipated power → electron temperature → cavity temperature → photons →
/// Stark shift and dephasing.
pub fn backaction_chain(
    device: &DeviceParams,
    power: f64,
    t_cold: f64,
    qc: &QubitCavityParams,
    model: DephasingModel,
) -> Result<BackactionReport> {
    device.validate()?;
    qc.validate()?;
    if !(power.is_finite() && power >= 0.0) {
        return Err(domain("power", format!("must be >= 0, got {power}")));
    }
    if !(t_cold.is_finite() && t_cold >= 0.0) {
        return Err(domain("t_cold", format!("must be >= 0, got {t_cold}")));
    }
    let t_electron = shunt_electron_temperature(device, power);
    let t_cavity_effective = effective_cavity_temperature(t_electron, t_cold, qc.f_cavity);
    let n_bar_steady = photon_occupation(t_cavity_effective, qc.f_cavity);
    Ok(BackactionReport {
        p_dissipated: power,
        t_electron,
        t_cavity_effective,
        n_bar_steady,
        stark_shift: stark_shift(n_bar_steady, qc),
        dephasing_rate: dephasing_rate(n_bar_steady, qc, model),
        josephson_frequency: None,
        fringe_surface: None,
        caveats: CAVEATS.iter().map(|s| s.to_string()).collect(),
    })
}
