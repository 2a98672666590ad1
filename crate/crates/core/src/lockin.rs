//! Quadrature demodulation of simulated port voltages.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::langevin::{Observer, StepView};

/// Per-block weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Uniform weights; blocks should hold a whole number of probe periods.
    Rectangular,
    /// Hann taper; suppresses leakage between neighbouring tones.
    Hann,
}

impl Window {
    fn weight(self, pos: usize, len: usize) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => {
                let x = (pos as f64 + 0.5) / len as f64;
                let s = (PI * x).sin();
                s * s
            }
        }
    }
}

/// Complex amplitude `2·⟨w·x·e^{-iωt}⟩/⟨w⟩` of `signal` sampled at `times`.
pub fn demodulate(signal: &[f64], times: &[f64], omega: f64, window: Window) -> Complex64 {
    let n = signal.len().min(times.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for i in 0..n {
        let w = window.weight(i, n);
        acc += w * signal[i] * Complex64::from_polar(1.0, -omega * times[i]);
        wsum += w;
    }
    if wsum > 0.0 {
        2.0 * acc / wsum
    } else {
        acc
    }
}

/// Block-wise demodulation of the output and input port voltages against
/// every drive tone. Complete blocks only.
///
/// The input voltage is a derivative, so it is demodulated as `iω` times its
/// (bounded) antiderivative; this drops the block-edge terms that otherwise
/// dominate the block-to-block scatter.
pub(crate) struct LockInObserver {
    window: Window,
    omegas: Vec<f64>,
    block_steps: usize,
    acc_out: Vec<Complex64>,
    acc_in: Vec<Complex64>,
    wsum: f64,
    filled: usize,
    v_sum: f64,
    v_count: usize,
    pub blocks_out: Vec<Vec<Complex64>>,
    pub blocks_in: Vec<Vec<Complex64>>,
}

impl LockInObserver {
    /// `omegas` are the dimensionless angular frequencies of the tones.
    pub fn new(omegas: &[f64], window: Window, block_steps: usize) -> Self {
        let tones = omegas.len();
        Self {
            window,
            omegas: omegas.to_vec(),
            block_steps: block_steps.max(1),
            acc_out: vec![Complex64::new(0.0, 0.0); tones],
            acc_in: vec![Complex64::new(0.0, 0.0); tones],
            wsum: 0.0,
            filled: 0,
            v_sum: 0.0,
            v_count: 0,
            blocks_out: Vec::new(),
            blocks_in: Vec::new(),
        }
    }

    pub fn mean_voltage(&self) -> f64 {
        if self.v_count == 0 {
            0.0
        } else {
            self.v_sum / self.v_count as f64
        }
    }
}

impl Observer for LockInObserver {
    fn observe(&mut self, s: &StepView<'_>) {
        self.v_sum += s.v_out;
        self.v_count += 1;
        let w = self.window.weight(self.filled, self.block_steps);
        for (k, p) in s.phasors.iter().enumerate() {
            let c = p.conj() * w;
            self.acc_out[k] += c * s.v_out;
            self.acc_in[k] += c * s.u_in;
        }
        self.wsum += w;
        self.filled += 1;
        if self.filled == self.block_steps {
            let scale = 2.0 / self.wsum;
            self.blocks_out.push(self.acc_out.iter().map(|a| a * scale).collect());
            self.blocks_in.push(
                self.acc_in
                    .iter()
                    .zip(&self.omegas)
                    .map(|(a, &w)| a * Complex64::new(0.0, w) * scale)
                    .collect(),
            );
            self.acc_out.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            self.acc_in.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            self.wsum = 0.0;
            self.filled = 0;
        }
    }
}

/// Mean and standard error (of the complex mean, combined over both
/// quadratures) of per-block estimates.
pub(crate) fn complex_mean_stderr(xs: &[Complex64]) -> (Complex64, f64) {
    let n = xs.len();
    if n == 0 {
        return (Complex64::new(0.0, 0.0), f64::INFINITY);
    }
    let mean = xs.iter().sum::<Complex64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_amplitude_and_phase() {
        let omega = 0.37;
        let dt = 0.01;
        let periods = 40.0;
        let n = (periods * 2.0 * PI / omega / dt).round() as usize;
        let times: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dt).collect();
        let z = Complex64::from_polar(0.8, 0.6);
        let sig: Vec<f64> = times
            .iter()
            .map(|&t| (z * Complex64::from_polar(1.0, omega * t)).re + 0.3 + 0.2 * (3.1 * t).cos())
            .collect();
        for w in [Window::Rectangular, Window::Hann] {
            let got = demodulate(&sig, &times, omega, w);
            assert!((got - z).norm() < 2e-3, "{w:?}: {got}");
        }
    }

    #[test]
    fn hann_suppresses_neighbour_tone() {
        let dt = 0.05;
        let n = 40_000;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let (w1, w2) = (0.30, 0.33);
        let sig: Vec<f64> = times.iter().map(|&t| (w1 * t).cos() + 5.0 * (w2 * t + 0.4).cos()).collect();
        let one = Complex64::new(1.0, 0.0);
        let hann = (demodulate(&sig, &times, w1, Window::Hann) - one).norm();
        let rect = (demodulate(&sig, &times, w1, Window::Rectangular) - one).norm();
        assert!(hann < 5e-3 && hann < rect / 5.0, "{hann} vs {rect}");
    }
}
