//! Embedding of the SLUG two-port between a 50 Ω source (through the input
//! LC section) and a 50 Ω load, and the flux × frequency scattering maps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device::{BiasPoint, DeviceParams, SimConfig};
use crate::error::{domain, Result, SlugError};
use crate::small_signal::{extract_bias_constants, extract_two_port_sweep, BiasConstants, ExtractOptions, TwoPortZ};

type C = Complex64;

/// ABCD (transmission) matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abcd {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Abcd {
    pub fn identity() -> Self {
        Self::new(C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0))
    }

    pub fn new(a: C, b: C, c: C, d: C) -> Self {
        Self { a, b, c, d }
    }

    pub fn series(z: C) -> Self {
        Self::new(C::new(1.0, 0.0), z, C::new(0.0, 0.0), C::new(1.0, 0.0))
    }

    pub fn shunt(y: C) -> Self {
        Self::new(C::new(1.0, 0.0), C::new(0.0, 0.0), y, C::new(1.0, 0.0))
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    /// `self` followed by `next`.
    pub fn cascade(&self, next: &Abcd) -> Abcd {
        Abcd {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// From an impedance matrix; `None` when Z21 vanishes.
    pub fn from_z(z11: C, z12: C, z21: C, z22: C) -> Option<Abcd> {
        if z21.norm() == 0.0 || !z21.norm().is_finite() {
            return None;
        }
        let det = z11 * z22 - z12 * z21;
        Some(Abcd::new(z11 / z21, det / z21, C::new(1.0, 0.0) / z21, z22 / z21))
    }

    /// S-parameters for real reference impedances `z1` (port 1) and `z2`
    /// (port 2), ordered (S11, S12, S21, S22).
    pub fn to_s(&self, z1: f64, z2: f64) -> [C; 4] {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let k = 2.0 * (z1 * z2).sqrt();
        let den = a * z2 + b + c * z1 * z2 + d * z1;
        [
            (a * z2 + b - c * z1 * z2 - d * z1) / den,
            self.det() * k / den,
            C::new(k, 0.0) / den,
            (-a * z2 + b - c * z1 * z2 + d * z1) / den,
        ]
    }
}

/// Single-pole LC section: shunt capacitor across the source side, series
/// inductor toward the SLUG input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingNetwork {
    /// Series inductance (H).
    pub l_m: f64,
    /// Shunt capacitance (F).
    pub c_m: f64,
    /// √(L_m/C_m) (Ω).
    pub z_char: f64,
    /// 1/(2π√(L_m·C_m)) (Hz).
    pub f_center: f64,
    pub z_source: f64,
    pub z_load: f64,
}

impl MatchingNetwork {
    pub fn new(z_char: f64, f_center: f64, z_source: f64, z_load: f64) -> Result<Self> {
        for (field, v) in [
            ("network.z_char", z_char),
            ("network.f_center", f_center),
            ("network.z_source", z_source),
            ("network.z_load", z_load),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(field, format!("must be > 0, got {v}")));
            }
        }
        let w0 = 2.0 * PI * f_center;
        let l_m = z_char / w0;
        let c_m = 1.0 / (w0 * z_char);
        Ok(Self {
            l_m,
            c_m,
            z_char: (l_m / c_m).sqrt(),
            f_center,
            z_source,
            z_load,
        })
    }

    pub fn abcd(&self, omega: f64) -> Abcd {
        Abcd::shunt(C::new(0.0, omega * self.c_m)).cascade(&Abcd::series(C::new(0.0, omega * self.l_m)))
    }
}

impl Default for MatchingNetwork {
    fn default() -> Self {
        Self::new(2.0, 6e9, 50.0, 50.0).expect("valid defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Regular,
    /// Z21 vanished: the device transmits nothing in either direction and its
    /// output is a short.
    IdealShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedS {
    pub s11: C,
    pub s12: C,
    pub s21: C,
    pub s22: C,
    pub kind: EmbeddingKind,
}

/// Threshold on |Z21| (Ω) below which the conversion to ABCD is treated as
/// singular.
pub const SINGULAR_Z21: f64 = 1e-12;

/// Cascade the input network with the SLUG and reference the result to the
/// network's source and load impedances.
pub fn cascade_s_parameters(two_port: &TwoPortZ, network: &MatchingNetwork, omega: f64) -> Result<EmbeddedS> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(domain("omega", format!("must be > 0, got {omega}")));
    }
    let net = network.abcd(omega);
    let slug = if two_port.z21.norm() < SINGULAR_Z21 {
        None
    } else {
        Abcd::from_z(two_port.z11, two_port.z12, two_port.z21, two_port.z22)
    };
    Ok(match slug {
        Some(s) => {
            let [s11, s12, s21, s22] = net.cascade(&s).to_s(network.z_source, network.z_load);
            EmbeddedS { s11, s12, s21, s22, kind: EmbeddingKind::Regular }
        }
        None => {
            // Source side sees the network terminated by Z11; the load sees Z22.
            let zin = input_impedance(&net, two_port.z11);
            let zs = network.z_source;
            let zl = network.z_load;
            EmbeddedS {
                s11: (zin - zs) / (zin + zs),
                s12: C::new(0.0, 0.0),
                s21: C::new(0.0, 0.0),
                s22: (two_port.z22 - zl) / (two_port.z22 + zl),
                kind: EmbeddingKind::IdealShort,
            }
        }
    })
}

fn input_impedance(m: &Abcd, z_term: C) -> C {
    (m.a * z_term + m.b) / (m.c * z_term + m.d)
}

/// Power gains |S21|² and |S12|² of a device matched at both ports:
/// |Z|²/(4·R_i·R_o) with R_i = ρ_i(ωL)²/R and R_o = ρ_o·R.
pub fn ideal_matched_gain(two_port: &TwoPortZ, constants: &BiasConstants, device: &DeviceParams) -> Result<(f64, f64)> {
    let wl = two_port.omega * device.l;
    let r_i = constants.rho_i * wl * wl / device.r;
    let r_o = constants.rho_o * device.r;
    if !(r_i > 0.0 && r_o > 0.0) {
        return Err(SlugError::PassivityViolation(format!(
            "matched gain needs R_i, R_o > 0 (got {r_i:.3e} Ω, {r_o:.3e} Ω)"
        )));
    }
    let denom = 4.0 * r_i * r_o;
    Ok((two_port.z21.norm_sqr() / denom, two_port.z12.norm_sqr() / denom))
}

/// Why a map entry carries no value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum MaskReason {
    /// Zero-voltage state: gain undefined.
    Supercurrent,
    Nonlinear(String),
    Unstable(String),
    Other(String),
}

impl MaskReason {
    pub fn code(&self) -> &'static str {
        match self {
            MaskReason::Supercurrent => "supercurrent",
            MaskReason::Nonlinear(_) => "nonlinear",
            MaskReason::Unstable(_) => "unstable",
            MaskReason::Other(_) => "error",
        }
    }

    pub fn from_error(e: &SlugError) -> Self {
        match e {
            SlugError::BiasState { .. } => MaskReason::Supercurrent,
            SlugError::Nonlinearity { .. } => MaskReason::Nonlinear(e.to_string()),
            SlugError::IntegrationStability { .. } => MaskReason::Unstable(e.to_string()),
            other => MaskReason::Other(other.to_string()),
        }
    }
}

/// One (flux, frequency) point of a scattering map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub s11_db: f64,
    pub s12_db: f64,
    pub s21_db: f64,
    pub s22_db: f64,
    pub z: TwoPortZ,
    pub constants: BiasConstants,
    pub kind: EmbeddingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapCell {
    Ok(Box<MapPoint>),
    Masked(MaskReason),
}

impl MapCell {
    pub fn point(&self) -> Option<&MapPoint> {
        match self {
            MapCell::Ok(p) => Some(p),
            MapCell::Masked(_) => None,
        }
    }
}

/// S-parameters over a flux × frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMap {
    /// Φ₀.
    pub flux_grid: Vec<f64>,
    /// Hz.
    pub freq_grid: Vec<f64>,
    /// A.
    pub bias_current: f64,
    /// Indexed `[flux][frequency]`.
    pub cells: Vec<Vec<MapCell>>,
}

impl ScatteringMap {
    fn column(&self, f: impl Fn(&MapPoint) -> f64) -> Vec<Vec<Option<f64>>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.point().map(&f)).collect())
            .collect()
    }

    pub fn s21_db(&self) -> Vec<Vec<Option<f64>>> {
        self.column(|p| p.s21_db)
    }

    pub fn s12_db(&self) -> Vec<Vec<Option<f64>>> {
        self.column(|p| p.s12_db)
    }

    pub fn masked_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.point().is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.flux_grid.len() * self.freq_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (flux index, frequency index, value) of the extreme valid entry.
    pub fn argmin(&self, f: impl Fn(&MapPoint) -> f64) -> Option<(usize, usize, f64)> {
        self.extreme(f, |a, b| a < b)
    }

    pub fn argmax(&self, f: impl Fn(&MapPoint) -> f64) -> Option<(usize, usize, f64)> {
        self.extreme(f, |a, b| a > b)
    }

    fn extreme(&self, f: impl Fn(&MapPoint) -> f64, better: impl Fn(f64, f64) -> bool) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Some(p) = c.point() {
                    let v = f(p);
                    if best.is_none_or(|(_, _, b)| better(v, b)) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best
    }
}

pub fn db20(x: C) -> f64 {
    20.0 * x.norm().log10()
}

/// Scattering parameters of the embedded SLUG over `flux_grid` (Φ₀) ×
/// `freq_grid` (Hz). Flux points run in parallel; each extracts all
/// frequencies with one multi-tone probe on its own random stream (the flux
/// index). Failed points are masked, not fatal.
pub fn scattering_map(
    device: &DeviceParams,
    i_b: f64,
    flux_grid: &[f64],
    freq_grid: &[f64],
    network: &MatchingNetwork,
    sim: &SimConfig,
    opts: &ExtractOptions,
) -> Result<ScatteringMap> {
    device.validate()?;
    sim.validate()?;
    if let Some(bad) = freq_grid.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(domain("freq_grid", format!("frequencies must be > 0, got {bad}")));
    }
    let omegas: Vec<f64> = freq_grid.iter().map(|f| 2.0 * PI * f).collect();
    let cells: Vec<Vec<MapCell>> = flux_grid
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let o = ExtractOptions {
                stream: i as u64,
                ..opts.clone()
            };
            let bias = BiasPoint::new(i_b, phi);
            match extract_two_port_sweep(device, &bias, &omegas, sim, &o) {
                Ok(zs) => zs.into_iter().map(|z| embed(z, network, device)).collect(),
                Err(e) => {
                    let reason = MaskReason::from_error(&e);
                    vec![MapCell::Masked(reason); freq_grid.len()]
                }
            }
        })
        .collect();
    Ok(ScatteringMap {
        flux_grid: flux_grid.to_vec(),
        freq_grid: freq_grid.to_vec(),
        bias_current: i_b,
        cells,
    })
}

fn embed(z: TwoPortZ, network: &MatchingNetwork, device: &DeviceParams) -> MapCell {
    match cascade_s_parameters(&z, network, z.omega) {
        Ok(s) => {
            let vals = [db20(s.s11), db20(s.s12), db20(s.s21), db20(s.s22)];
            if vals.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return MapCell::Masked(MaskReason::Other("non-finite S-parameter".into()));
            }
            let constants = extract_bias_constants(&z, device);
            MapCell::Ok(Box::new(MapPoint {
                s11_db: vals[0],
                s12_db: vals[1],
                s21_db: vals[2],
                s22_db: vals[3],
                z,
                constants,
                kind: s.kind,
            }))
        }
        Err(e) => MapCell::Masked(MaskReason::from_error(&e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_network_element_values() {
        let n = MatchingNetwork::default();
        assert_relative_eq!(n.z_char, 2.0, max_relative = 1e-14);
        assert!((n.l_m - 53.05e-12).abs() < 0.05e-12);
        assert!((n.c_m - 13.26e-12).abs() < 0.05e-12);
    }

    #[test]
    fn lossless_network_is_unitary() {
        let n = MatchingNetwork::default();
        for f in [1e9, 4e9, 6e9, 7.3e9, 20e9] {
            let [s11, _, s21, _] = n.abcd(2.0 * PI * f).to_s(50.0, 50.0);
            assert!((s11.norm_sqr() + s21.norm_sqr() - 1.0).abs() < 1e-12, "{f}");
        }
    }

    #[test]
    fn transforms_source_down_at_center() {
        // Zc²/Rs is the load an L-section of impedance Zc matches to Rs.
        let n = MatchingNetwork::default();
        let r_low = n.z_char * n.z_char / 50.0;
        let t = |f: f64| n.abcd(2.0 * PI * f).to_s(50.0, r_low)[2].norm_sqr();
        assert!(t(6e9) > 0.999, "{}", t(6e9));
        for f in [3e9, 4.5e9, 8e9, 12e9] {
            assert!(t(f) < t(6e9));
        }
    }

    #[test]
    fn z_to_abcd_round_trip_for_reciprocal_network() {
        // T network: series 3, shunt 5j, series 1-2j
        let m = Abcd::series(C::new(3.0, 0.0))
            .cascade(&Abcd::shunt(C::new(1.0, 0.0) / C::new(0.0, 5.0)))
            .cascade(&Abcd::series(C::new(1.0, -2.0)));
        assert!((m.det() - C::new(1.0, 0.0)).norm() < 1e-12);
        let z21 = C::new(1.0, 0.0) / m.c;
        let z11 = m.a * z21;
        let z22 = m.d * z21;
        let z12 = m.det() * z21;
        let back = Abcd::from_z(z11, z12, z21, z22).unwrap();
        assert!((back.b - m.b).norm() < 1e-12);
    }

    #[test]
    fn vanishing_z21_is_tagged() {
        let z = TwoPortZ {
            omega: 2.0 * PI * 6e9,
            z11: C::new(0.0, 0.25),
            z12: C::new(0.0, 0.0),
            z21: C::new(0.0, 0.0),
            z22: C::new(0.0, 0.0),
            bias: BiasPoint::new(0.0, 0.0),
            v_phi: 0.0,
            v_mean: 0.0,
            rel_stderr: 0.0,
        };
        let s = cascade_s_parameters(&z, &MatchingNetwork::default(), z.omega).unwrap();
        assert_eq!(s.kind, EmbeddingKind::IdealShort);
        assert_eq!(s.s12.norm(), 0.0);
        assert_relative_eq!(s.s22.re, -1.0);
    }
}
