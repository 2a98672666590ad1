//! Run configuration: TOML with the physical unit in every key name.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use slugsim_core::backaction::DephasingModel;
use slugsim_core::pulsed::{PulseEvent, SlugState};
use slugsim_core::small_signal::{ExtractOptions, ProbeAmplitudes};
use slugsim_core::{DeviceParams, MatchingNetwork, QubitCavityParams, SimConfig, SlugError, Topology};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Vphi,
    Twoport,
    Smatrix,
    Backaction,
    Ramsey,
    Pulsed,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Vphi => "vphi",
            Experiment::Twoport => "twoport",
            Experiment::Smatrix => "smatrix",
            Experiment::Backaction => "backaction",
            Experiment::Ramsey => "ramsey",
            Experiment::Pulsed => "pulsed",
        }
    }
}

/// Inclusive linear range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::field(field, "start and stop must be finite"));
        }
        if self.count > 1 && self.stop <= self.start {
            return Err(CliError::field(field, "stop must exceed start"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    #[serde(rename = "I0_uA")]
    pub i0_ua: f64,
    #[serde(rename = "R_ohm")]
    pub r_ohm: f64,
    #[serde(rename = "C_fF")]
    pub c_ff: f64,
    #[serde(rename = "L_pH")]
    pub l_ph: f64,
    #[serde(rename = "M_pH")]
    pub m_ph: f64,
    pub shunt_volume_m3: f64,
    #[serde(rename = "sigma_ep_W_m3_K5")]
    pub sigma_ep: f64,
    #[serde(rename = "T_phonon_K")]
    pub t_phonon_k: f64,
    #[serde(rename = "T_electron_override_K", skip_serializing_if = "Option::is_none")]
    pub t_electron_override_k: Option<f64>,
    /// Shunt dissipation that sets the noise temperature.
    #[serde(rename = "shunt_power_nW")]
    pub shunt_power_nw: f64,
    pub topology: Topology,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self::from(&DeviceParams::default())
    }
}

impl From<&DeviceParams> for DeviceSection {
    fn from(d: &DeviceParams) -> Self {
        Self {
            i0_ua: d.i0 * 1e6,
            r_ohm: d.r,
            c_ff: d.c * 1e15,
            l_ph: d.l * 1e12,
            m_ph: d.m * 1e12,
            shunt_volume_m3: d.shunt_volume,
            sigma_ep: d.sigma_ep,
            t_phonon_k: d.t_phonon,
            t_electron_override_k: d.t_electron_override,
            shunt_power_nw: d.shunt_power * 1e9,
            topology: d.topology,
        }
    }
}

impl DeviceSection {
    pub fn to_params(&self) -> DeviceParams {
        DeviceParams {
            i0: self.i0_ua / 1e6,
            r: self.r_ohm,
            c: self.c_ff / 1e15,
            l: self.l_ph / 1e12,
            m: self.m_ph / 1e12,
            shunt_volume: self.shunt_volume_m3,
            sigma_ep: self.sigma_ep,
            t_phonon: self.t_phonon_k,
            t_electron_override: self.t_electron_override_k,
            shunt_power: self.shunt_power_nw / 1e9,
            topology: self.topology,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub t_total: f64,
    pub t_transient: f64,
    pub noise: bool,
    pub record_stride: usize,
    pub stability_bound: f64,
    pub block_span: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            dt: s.dt,
            t_total: s.t_total,
            t_transient: s.t_transient,
            noise: s.noise_enabled,
            record_stride: s.record_stride,
            stability_bound: s.stability_bound,
            block_span: s.block_span,
        }
    }
}

impl SimSection {
    pub fn to_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_total: self.t_total,
            t_transient: self.t_transient,
            seed,
            noise_enabled: self.noise,
            record_stride: self.record_stride,
            stability_bound: self.stability_bound,
            block_span: self.block_span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    #[serde(rename = "I_b_uA")]
    pub i_b_ua: f64,
    /// Applied flux (Φ₀); ignored by sweeps over flux.
    #[serde(default)]
    pub phi_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Applied flux (Φ₀).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<Range>,
    #[serde(rename = "freq_GHz", skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<Range>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    #[serde(rename = "Z_char_ohm")]
    pub z_char_ohm: f64,
    #[serde(rename = "f_center_GHz")]
    pub f_center_ghz: f64,
    #[serde(rename = "Z_source_ohm")]
    pub z_source_ohm: f64,
    #[serde(rename = "Z_load_ohm")]
    pub z_load_ohm: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            z_char_ohm: 2.0,
            f_center_ghz: 6.0,
            z_source_ohm: 50.0,
            z_load_ohm: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionSection {
    #[serde(rename = "probe_input_flux_phi0")]
    pub probe_input_flux: f64,
    #[serde(rename = "probe_output_current_I0")]
    pub probe_output_current: f64,
    pub target_rel_stderr: f64,
    pub max_doublings: u32,
    pub check_linearity: bool,
    pub linearity_tolerance: f64,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        let o = ExtractOptions::default();
        Self {
            probe_input_flux: o.probe.input_flux,
            probe_output_current: o.probe.output_current,
            target_rel_stderr: o.target_rel_stderr,
            max_doublings: o.max_doublings,
            check_linearity: o.check_linearity,
            linearity_tolerance: o.linearity_tolerance,
        }
    }
}

impl ExtractionSection {
    pub fn to_options(&self) -> ExtractOptions {
        ExtractOptions {
            probe: ProbeAmplitudes {
                input_flux: self.probe_input_flux,
                output_current: self.probe_output_current,
            },
            target_rel_stderr: self.target_rel_stderr,
            max_doublings: self.max_doublings,
            check_linearity: self.check_linearity,
            linearity_tolerance: self.linearity_tolerance,
            ..ExtractOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitCavitySection {
    #[serde(rename = "f_cavity_GHz")]
    pub f_cavity_ghz: f64,
    /// 2χ/2π, the cavity pull between qubit states.
    #[serde(rename = "two_chi_over_2pi_MHz")]
    pub two_chi_mhz: f64,
    #[serde(rename = "kappa_inv_ns")]
    pub kappa_inv_ns: f64,
    #[serde(rename = "f_qubit_GHz")]
    pub f_qubit_ghz: f64,
    #[serde(rename = "T2_us")]
    pub t2_us: f64,
    #[serde(rename = "ramsey_detuning_MHz")]
    pub detuning_mhz: f64,
}

impl Default for QubitCavitySection {
    fn default() -> Self {
        let q = QubitCavityParams::default();
        Self {
            f_cavity_ghz: q.f_cavity / 1e9,
            two_chi_mhz: q.two_chi_over_2pi() / 1e6,
            kappa_inv_ns: 1e9 / q.kappa,
            f_qubit_ghz: q.f_qubit / 1e9,
            t2_us: q.t2 * 1e6,
            detuning_mhz: q.ramsey_detuning / 1e6,
        }
    }
}

impl QubitCavitySection {
    pub fn to_params(&self) -> QubitCavityParams {
        QubitCavityParams {
            f_cavity: self.f_cavity_ghz * 1e9,
            chi_over_2pi: 0.5 * self.two_chi_mhz * 1e6,
            kappa: 1e9 / self.kappa_inv_ns,
            f_qubit: self.f_qubit_ghz * 1e9,
            t2: self.t2_us / 1e6,
            ramsey_detuning: self.detuning_mhz * 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackactionSection {
    /// Shunt dissipation; when absent and a bias is given, I_b·V from a
    /// simulation at that bias.
    #[serde(rename = "power_nW", skip_serializing_if = "Option::is_none")]
    pub power_nw: Option<f64>,
    #[serde(rename = "T_cold_K")]
    pub t_cold_k: f64,
    pub dephasing: DephasingModel,
}

impl Default for BackactionSection {
    fn default() -> Self {
        Self {
            power_nw: None,
            t_cold_k: 0.05,
            dephasing: DephasingModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseySection {
    pub head_start_ns: Range,
    pub evolution_ns: Range,
    /// Steady photon number; from the backaction chain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steady: Option<f64>,
}

impl Default for RamseySection {
    fn default() -> Self {
        Self {
            head_start_ns: Range {
                start: 0.0,
                stop: 1000.0,
                count: 41,
            },
            evolution_ns: Range {
                start: 0.0,
                stop: 250.0,
                count: 251,
            },
            n_steady: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventEntry {
    Slug { start_ns: f64, end_ns: f64, state: SlugState },
    PiHalf { time_ns: f64 },
    Measure { start_ns: f64, end_ns: f64 },
}

impl EventEntry {
    pub fn to_event(self) -> PulseEvent {
        match self {
            EventEntry::Slug { start_ns, end_ns, state } => PulseEvent::Slug {
                start: start_ns * 1e-9,
                end: end_ns * 1e-9,
                state,
            },
            EventEntry::PiHalf { time_ns } => PulseEvent::PiHalf { time: time_ns * 1e-9 },
            EventEntry::Measure { start_ns, end_ns } => PulseEvent::Measure {
                start: start_ns * 1e-9,
                end: end_ns * 1e-9,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsedSection {
    pub events: Vec<EventEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steady: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
    #[serde(default)]
    pub qubit_cavity: QubitCavitySection,
    #[serde(default)]
    pub backaction: BackactionSection,
    #[serde(default)]
    pub ramsey: RamseySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulsed: Option<PulsedSection>,
}

fn default_seed() -> u64 {
    SimConfig::default().seed
}

fn default_workers() -> usize {
    1
}

/// Config key holding a core parameter, for error messages.
fn config_key(section: &str, field: &str) -> String {
    let key = match (section, field) {
        ("device", "i0") => "I0_uA",
        ("device", "r") => "R_ohm",
        ("device", "c") => "C_fF",
        ("device", "l") => "L_pH",
        ("device", "m") => "M_pH",
        ("device", "shunt_volume") => "shunt_volume_m3",
        ("device", "sigma_ep") => "sigma_ep_W_m3_K5",
        ("device", "t_phonon") => "T_phonon_K",
        ("device", "t_electron_override") => "T_electron_override_K",
        ("device", "shunt_power") => "shunt_power_nW",
        ("network", "network.z_char") => "Z_char_ohm",
        ("network", "network.f_center") => "f_center_GHz",
        ("network", "network.z_source") => "Z_source_ohm",
        ("network", "network.z_load") => "Z_load_ohm",
        ("qubit_cavity", "qubit_cavity.f_cavity") => "f_cavity_GHz",
        ("qubit_cavity", "qubit_cavity.chi_over_2pi") => "two_chi_over_2pi_MHz",
        ("qubit_cavity", "qubit_cavity.kappa") => "kappa_inv_ns",
        ("qubit_cavity", "qubit_cavity.f_qubit") => "f_qubit_GHz",
        ("qubit_cavity", "qubit_cavity.t2") => "T2_us",
        ("qubit_cavity", "qubit_cavity.ramsey_detuning") => "ramsey_detuning_MHz",
        (_, f) => f,
    };
    format!("{section}.{key}")
}

fn in_section(section: &str, r: slugsim_core::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| match e {
        SlugError::ParameterDomain { field, reason } => CliError::field(config_key(section, field), reason),
        other => CliError::field(section, other.to_string()),
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn device(&self) -> DeviceParams {
        self.device.to_params()
    }

    pub fn sim(&self) -> SimConfig {
        self.sim.to_config(self.seed)
    }

    pub fn network(&self) -> Result<MatchingNetwork, CliError> {
        let n = &self.network;
        let r = MatchingNetwork::new(n.z_char_ohm, n.f_center_ghz * 1e9, n.z_source_ohm, n.z_load_ohm);
        r.map_err(|e| match e {
            SlugError::ParameterDomain { field, reason } => CliError::field(config_key("network", field), reason),
            other => CliError::field("network", other.to_string()),
        })
    }

    pub fn bias(&self) -> Result<&BiasSection, CliError> {
        self.bias.as_ref().ok_or(CliError::MissingSection {
            section: "bias",
            experiment: self.experiment.name(),
        })
    }

    fn sweep_range(&self, key: &'static str) -> Result<Range, CliError> {
        let missing = CliError::MissingSection {
            section: key,
            experiment: self.experiment.name(),
        };
        let s = self.sweep.as_ref().ok_or(missing.clone())?;
        match key {
            "sweep.flux" => s.flux,
            _ => s.freq_ghz,
        }
        .ok_or(missing)
    }

    pub fn flux_grid(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.sweep_range("sweep.flux")?.points())
    }

    /// Hz.
    pub fn freq_grid(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.sweep_range("sweep.freq_GHz")?.points().iter().map(|f| f * 1e9).collect())
    }

    /// Every check the runner would otherwise hit later.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::field("workers", "must be >= 1"));
        }
        in_section("device", self.device().validate())?;
        in_section("sim", self.sim().validate())?;
        self.network()?;
        in_section("qubit_cavity", self.qubit_cavity.to_params().validate())?;
        let e = &self.extraction;
        if !(e.probe_input_flux > 0.0) {
            return Err(CliError::field("extraction.probe_input_flux_phi0", "must be > 0"));
        }
        if !(e.probe_output_current > 0.0) {
            return Err(CliError::field("extraction.probe_output_current_I0", "must be > 0"));
        }
        if !(e.target_rel_stderr > 0.0) {
            return Err(CliError::field("extraction.target_rel_stderr", "must be > 0"));
        }
        if !(e.linearity_tolerance > 0.0) {
            return Err(CliError::field("extraction.linearity_tolerance", "must be > 0"));
        }
        if let Some(b) = &self.bias {
            if !(b.i_b_ua.is_finite() && b.i_b_ua >= 0.0) {
                return Err(CliError::field("bias.I_b_uA", "must be >= 0"));
            }
            if !b.phi_a.is_finite() {
                return Err(CliError::field("bias.phi_a", "must be finite"));
            }
        }
        if let Some(s) = &self.sweep {
            if let Some(r) = &s.flux {
                r.check("sweep.flux")?;
            }
            if let Some(r) = &s.freq_ghz {
                r.check("sweep.freq_GHz")?;
                if r.count > 0 && r.start <= 0.0 {
                    return Err(CliError::field("sweep.freq_GHz", "frequencies must be > 0"));
                }
            }
        }
        let b = &self.backaction;
        if let Some(p) = b.power_nw {
            if !(p.is_finite() && p >= 0.0) {
                return Err(CliError::field("backaction.power_nW", "must be >= 0"));
            }
        }
        if !(b.t_cold_k.is_finite() && b.t_cold_k >= 0.0) {
            return Err(CliError::field("backaction.T_cold_K", "must be >= 0"));
        }

        match self.experiment {
            Experiment::Vphi => {
                self.bias()?;
                let n = self.flux_grid()?.len();
                if n != 0 && n < 3 {
                    return Err(CliError::field("sweep.flux.count", "need 0 or at least 3 points"));
                }
            }
            Experiment::Twoport => {
                self.bias()?;
                self.freq_grid()?;
            }
            Experiment::Smatrix => {
                self.bias()?;
                self.flux_grid()?;
                self.freq_grid()?;
            }
            Experiment::Backaction => {}
            Experiment::Ramsey => {
                let r = &self.ramsey;
                r.head_start_ns.check("ramsey.head_start_ns")?;
                r.evolution_ns.check("ramsey.evolution_ns")?;
                if r.head_start_ns.start < 0.0 {
                    return Err(CliError::field("ramsey.head_start_ns", "times must be >= 0"));
                }
                if r.evolution_ns.start < 0.0 {
                    return Err(CliError::field("ramsey.evolution_ns", "times must be >= 0"));
                }
                if r.head_start_ns.count != 0 && r.head_start_ns.count < 3 {
                    return Err(CliError::field("ramsey.head_start_ns.count", "need 0 or at least 3 points"));
                }
                if r.evolution_ns.count < 4 {
                    return Err(CliError::field("ramsey.evolution_ns.count", "need at least 4 points"));
                }
                if let Some(n) = r.n_steady {
                    if !(n.is_finite() && n >= 0.0) {
                        return Err(CliError::field("ramsey.n_steady", "must be >= 0"));
                    }
                }
            }
            Experiment::Pulsed => {
                let p = self.pulsed.as_ref().ok_or(CliError::MissingSection {
                    section: "pulsed",
                    experiment: "pulsed",
                })?;
                let events: Vec<PulseEvent> = p.events.iter().map(|e| e.to_event()).collect();
                slugsim_core::pulsed::validate_sequence(&events)
                    .map_err(|e| CliError::field("pulsed.events", e.to_string()))?;
                if let Some(n) = p.n_steady {
                    if !(n.is_finite() && n >= 0.0) {
                        return Err(CliError::field("pulsed.n_steady", "must be >= 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Read, parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml(&text)
}
