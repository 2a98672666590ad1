//! Physical device description, operating point and the dimensionless
//! normalization used by the time-domain integrator.

use serde::{Deserialize, Serialize};

use crate::backaction::electron_temperature;
use crate::constants::{BOLTZMANN, FLUX_QUANTUM};
use crate::error::{domain, Result};

/// How the bias (output) current and the input signal current thread the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Galvanic SLUG: the whole loop inductance sits in the arm of junction 2,
    /// the input current is injected at the node between junction 2 and the
    /// inductance, and the output is the node shared by both junctions. Half of
    /// the bias current flows through the loop inductance.
    #[default]
    Slug,
    /// Textbook dc SQUID with the inductance split evenly between the arms and
    /// the input coupled through a mutual inductance. Bias current produces no
    /// loop flux.
    Symmetric,
}

impl Topology {
    /// Flux (Φ₀) added to the applied flux by the static bias current `i_b`
    /// (units of I0). The mean voltage of the SLUG at applied flux `φ` equals
    /// that of the symmetric SQUID at `-(φ + offset)`.
    pub fn bias_flux_offset(self, beta_l: f64, i_b: f64) -> f64 {
        match self {
            Topology::Slug => beta_l * i_b / 4.0,
            Topology::Symmetric => 0.0,
        }
    }
}

/// Physical SLUG parameters (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Critical current per junction (A).
    pub i0: f64,
    /// Shunt resistance per junction (Ω).
    pub r: f64,
    /// Junction capacitance (F). Zero selects the overdamped RSJ model.
    pub c: f64,
    /// Loop inductance (H).
    pub l: f64,
    /// Input mutual inductance (H).
    pub m: f64,
    /// Normal-metal shunt volume (m³).
    pub shunt_volume: f64,
    /// Electron–phonon coupling constant (W·m⁻³·K⁻⁵).
    pub sigma_ep: f64,
    /// Substrate phonon temperature (K).
    pub t_phonon: f64,
    /// Fixed electron temperature used for Johnson noise (K). When absent the
    /// hot-electron temperature at `shunt_power` is used.
    pub t_electron_override: Option<f64>,
    /// Static power dissipated in the shunts at the working point (W).
    pub shunt_power: f64,
    pub topology: Topology,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            i0: 20e-6,
            r: 8.0,
            c: 0.0,
            l: 6.7e-12,
            m: 6.7e-12,
            shunt_volume: 5e-19,
            sigma_ep: 1.2e9,
            t_phonon: 0.1,
            t_electron_override: None,
            shunt_power: 1e-9,
            topology: Topology::Slug,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        positive("i0", self.i0)?;
        positive("r", self.r)?;
        positive("l", self.l)?;
        positive("m", self.m)?;
        positive("shunt_volume", self.shunt_volume)?;
        positive("sigma_ep", self.sigma_ep)?;
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(domain("c", format!("must be >= 0, got {}", self.c)));
        }
        if !(self.t_phonon.is_finite() && self.t_phonon >= 0.0) {
            return Err(domain("t_phonon", format!("must be >= 0, got {}", self.t_phonon)));
        }
        if !(self.shunt_power.is_finite() && self.shunt_power >= 0.0) {
            return Err(domain("shunt_power", format!("must be >= 0, got {}", self.shunt_power)));
        }
        if let Some(t) = self.t_electron_override {
            if !(t.is_finite() && t >= 0.0) {
                return Err(domain("t_electron_override", format!("must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    /// Temperature of the Johnson noise sources in the shunts.
    pub fn noise_temperature(&self) -> f64 {
        self.t_electron_override.unwrap_or_else(|| {
            electron_temperature(self.shunt_power, self.sigma_ep, self.shunt_volume, self.t_phonon)
        })
    }

    /// R/L expressed as a transfer coefficient in V/Φ₀.
    pub fn r_over_l_v_per_phi0(&self) -> f64 {
        self.r / self.l * FLUX_QUANTUM
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(field, format!("must be > 0, got {v}")))
    }
}

/// Conversion factors between SI and the dimensionless integration units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Φ₀/(2π·I0·R) (s).
    pub time_unit: f64,
    /// I0·R (V).
    pub voltage_unit: f64,
    /// I0 (A).
    pub current_unit: f64,
    /// Φ₀ (Wb).
    pub flux_unit: f64,
    /// 2·L·I0/Φ₀.
    pub beta_l: f64,
    /// 2·M·I0/Φ₀.
    pub beta_m: f64,
    /// 2π·I0·R²·C/Φ₀.
    pub beta_c: f64,
    /// 2π·k_B·T/(I0·Φ₀).
    pub gamma_noise: f64,
}

impl Normalization {
    pub fn to_dimensionless_time(&self, seconds: f64) -> f64 {
        seconds / self.time_unit
    }
    pub fn to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit
    }
    pub fn to_dimensionless_voltage(&self, volts: f64) -> f64 {
        volts / self.voltage_unit
    }
    pub fn to_volts(&self, v: f64) -> f64 {
        v * self.voltage_unit
    }
    pub fn to_dimensionless_current(&self, amps: f64) -> f64 {
        amps / self.current_unit
    }
    pub fn to_amps(&self, i: f64) -> f64 {
        i * self.current_unit
    }
    /// Angular frequency (rad/s) to dimensionless angular frequency.
    pub fn to_dimensionless_omega(&self, omega: f64) -> f64 {
        omega * self.time_unit
    }
}

/// Normalization constants for `device` with Johnson noise at `t_noise` (K).
pub fn normalize(device: &DeviceParams, t_noise: f64) -> Result<Normalization> {
    device.validate()?;
    if !(t_noise.is_finite() && t_noise >= 0.0) {
        return Err(domain("t_noise", format!("must be >= 0, got {t_noise}")));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(Normalization {
        time_unit: FLUX_QUANTUM / (two_pi * device.i0 * device.r),
        voltage_unit: device.i0 * device.r,
        current_unit: device.i0,
        flux_unit: FLUX_QUANTUM,
        beta_l: 2.0 * device.l * device.i0 / FLUX_QUANTUM,
        beta_m: 2.0 * device.m * device.i0 / FLUX_QUANTUM,
        beta_c: two_pi * device.i0 * device.r * device.r * device.c / FLUX_QUANTUM,
        gamma_noise: two_pi * BOLTZMANN * t_noise / (device.i0 * FLUX_QUANTUM),
    })
}

/// Quasistatic operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    /// Device bias current (A).
    pub i_b: f64,
    /// Applied flux (Φ₀), stored as given.
    pub phi_a: f64,
}

impl BiasPoint {
    pub fn new(i_b: f64, phi_a: f64) -> Self {
        Self { i_b, phi_a }
    }

    /// Applied flux folded into [0, 1).
    pub fn reduced_flux(&self) -> f64 {
        self.phi_a.rem_euclid(1.0)
    }
}

/// Integration controls, all in dimensionless time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_total: f64,
    pub t_transient: f64,
    pub seed: u64,
    pub noise_enabled: bool,
    /// Samples per recorded trajectory point; recorded voltages are averaged
    /// over each stride.
    pub record_stride: usize,
    /// Phase-rate magnitude above which the integration is declared unstable.
    pub stability_bound: f64,
    /// Span of the batches used for the standard error of time averages.
    pub block_span: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_total: 2.0e5,
            t_transient: 1.0e3,
            seed: 0x5106,
            noise_enabled: true,
            record_stride: 100,
            stability_bound: 1.0e3,
            block_span: 500.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(domain("dt", format!("must satisfy 0 < dt <= 0.1, got {}", self.dt)));
        }
        if !(self.t_transient >= 0.0 && self.t_transient < self.t_total && self.t_total.is_finite()) {
            return Err(domain(
                "t_transient",
                format!("need 0 <= t_transient < t_total, got {} / {}", self.t_transient, self.t_total),
            ));
        }
        if self.record_stride == 0 {
            return Err(domain("record_stride", "must be >= 1"));
        }
        if !(self.stability_bound > 0.0) {
            return Err(domain("stability_bound", "must be > 0"));
        }
        if !(self.block_span > 0.0) {
            return Err(domain("block_span", "must be > 0"));
        }
        Ok(())
    }

    /// Copy with the total span (transient included) scaled so that the
    /// post-transient window grows by `factor`.
    pub fn with_post_transient_scaled(&self, factor: f64) -> Self {
        let post = (self.t_total - self.t_transient) * factor;
        Self {
            t_total: self.t_transient + post,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_device_units() {
        let n = normalize(&DeviceParams::default(), 1.1).unwrap();
        assert_relative_eq!(n.voltage_unit, 160e-6, max_relative = 1e-12);
        assert_relative_eq!(n.beta_l, 2.0 * 6.7e-12 * 20e-6 / 2.067_833_848e-15, max_relative = 1e-9);
        assert!((n.beta_l - 0.130).abs() < 5e-4);
        // 2π·1.38e-23·1.1/(20e-6·2.068e-15)
        assert!((n.gamma_noise - 2.3e-3).abs() < 0.05e-3);
        assert_eq!(n.beta_c, 0.0);
    }

    #[test]
    fn zero_temperature_has_no_noise() {
        let n = normalize(&DeviceParams::default(), 0.0).unwrap();
        assert_eq!(n.gamma_noise, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        for (field, dev) in [
            ("i0", DeviceParams { i0: 0.0, ..Default::default() }),
            ("r", DeviceParams { r: -8.0, ..Default::default() }),
            ("l", DeviceParams { l: 0.0, ..Default::default() }),
        ] {
            match normalize(&dev, 0.1) {
                Err(crate::SlugError::ParameterDomain { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected domain error for {field}, got {other:?}"),
            }
        }
        assert!(normalize(&DeviceParams::default(), -1.0).is_err());
    }

    #[test]
    fn unit_round_trip() {
        let n = normalize(&DeviceParams::default(), 0.5).unwrap();
        for x in [1e-12, 3.3e-6, 0.25, 17.0] {
            assert_relative_eq!(n.to_seconds(n.to_dimensionless_time(x)), x, max_relative = 1e-15);
            assert_relative_eq!(n.to_volts(n.to_dimensionless_voltage(x)), x, max_relative = 1e-15);
            assert_relative_eq!(n.to_amps(n.to_dimensionless_current(x)), x, max_relative = 1e-15);
        }
    }

    #[test]
    fn sim_config_bounds() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { dt: 0.2, ..Default::default() }.validate().is_err());
        assert!(SimConfig { t_transient: 3e5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn flux_folding_preserves_raw_value() {
        let b = BiasPoint::new(40e-6, -0.25);
        assert_eq!(b.phi_a, -0.25);
        assert_relative_eq!(b.reduced_flux(), 0.75);
    }
}
