//! Flux-to-voltage transfer curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{normalize, BiasPoint, DeviceParams, SimConfig};
use crate::error::{Result, SlugError};
use crate::langevin::{time_average, EngineOptions};

/// Side of the V–Φ curve a bias point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shoulder {
    /// V_Φ > 0.
    Left,
    /// V_Φ < 0.
    Right,
    Flat,
}

impl Shoulder {
    pub fn of(v_phi: f64) -> Self {
        if v_phi > 0.0 {
            Shoulder::Left
        } else if v_phi < 0.0 {
            Shoulder::Right
        } else {
            Shoulder::Flat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    /// Bias current (A).
    pub i_b: f64,
    /// Applied flux (Φ₀).
    pub flux: Vec<f64>,
    /// Mean output voltage (V).
    pub voltage: Vec<f64>,
    /// Standard error of each mean (V).
    pub stderr: Vec<f64>,
    /// Centered-difference transfer coefficient (V/Φ₀).
    pub v_phi: Vec<f64>,
}

impl TransferCurve {
    pub fn peak_to_peak(&self) -> f64 {
        let max = self.voltage.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.voltage.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Index of the largest |V_Φ| on the given shoulder.
    pub fn steepest(&self, shoulder: Shoulder) -> Option<usize> {
        self.v_phi
            .iter()
            .enumerate()
            .filter(|(_, &g)| Shoulder::of(g) == shoulder)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
    }
}

/// Centered finite differences on a (possibly non-uniform) grid, one-sided
/// at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len().min(y.len());
    if n < 3 {
        return Err(SlugError::GradientUndefined(n));
    }
    let mut g = Vec::with_capacity(n);
    g.push((y[1] - y[0]) / (x[1] - x[0]));
    for i in 1..n - 1 {
        g.push((y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]));
    }
    g.push((y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]));
    Ok(g)
}

/// Time-averaged voltage at every flux point of `flux_grid`. Each point uses
/// its own random stream (index in the grid) and runs on the current rayon
/// pool.
pub fn v_phi_curve(device: &DeviceParams, i_b: f64, flux_grid: &[f64], sim: &SimConfig) -> Result<TransferCurve> {
    if flux_grid.len() < 3 {
        return Err(SlugError::GradientUndefined(flux_grid.len()));
    }
    let norm = normalize(device, device.noise_temperature())?;
    let points: Vec<_> = flux_grid
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let opts = EngineOptions {
                stream: i as u64,
                ..Default::default()
            };
            time_average(device, &BiasPoint::new(i_b, phi), sim, opts)
        })
        .collect::<Result<_>>()?;
    let voltage: Vec<f64> = points.iter().map(|p| norm.to_volts(p.mean)).collect();
    let stderr = points.iter().map(|p| norm.to_volts(p.stderr)).collect();
    let v_phi = gradient(flux_grid, &voltage)?;
    Ok(TransferCurve {
        i_b,
        flux: flux_grid.to_vec(),
        voltage,
        stderr,
        v_phi,
    })
}
