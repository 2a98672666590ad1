//! Two-junction Langevin integrator.
//!
//! Dimensionless equations (time in Φ₀/2πI0R, currents in I0, voltages in
//! I0R), for junction k = 1, 2:
//!
//! ```text
//! β_C·δ̈_k + δ̇_k + sin δ_k = i_k + i_nk,   ⟨i_nk(s) i_nk(s')⟩ = 2Γ δ(s − s')
//! ```
//!
//! The arm currents `i_k` come from the loop constraint of the chosen
//! [`Topology`]. Stepping is stochastic Heun with one set of noise increments
//! shared by the predictor and corrector.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device::{normalize, BiasPoint, DeviceParams, Normalization, SimConfig, Topology};
use crate::error::{domain, Result, SlugError};
use crate::rng::task_rng;

/// Port through which a small-signal drive enters the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    /// Flux coupled by the input current; amplitude in Φ₀.
    InputFlux,
    /// Current added to the bias at the output node; amplitude in units of I0.
    OutputCurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Hz.
    pub frequency: f64,
    pub amplitude: f64,
    /// Radians.
    pub phase: f64,
}

/// Sum of sinusoids `Σ a·cos(ωt + θ)` applied at one port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub port: Port,
    pub tones: Vec<Tone>,
}

impl Drive {
    pub fn tone(port: Port, amplitude: f64, frequency: f64) -> Self {
        Self {
            port,
            tones: vec![Tone {
                frequency,
                amplitude,
                phase: 0.0,
            }],
        }
    }

    /// Equal-amplitude comb with Schroeder phases, which keeps the crest
    /// factor low when many tones are applied at once.
    pub fn comb(port: Port, amplitude: f64, frequencies: &[f64]) -> Self {
        let n = frequencies.len().max(1) as f64;
        let tones = frequencies
            .iter()
            .enumerate()
            .map(|(k, &frequency)| Tone {
                frequency,
                amplitude,
                phase: -PI * (k * k) as f64 / n,
            })
            .collect();
        Self { port, tones }
    }

    fn validate(&self) -> Result<()> {
        for t in &self.tones {
            if !(t.frequency.is_finite() && t.frequency >= 0.0) {
                return Err(domain("drive.frequency", format!("must be >= 0, got {}", t.frequency)));
            }
            if !t.amplitude.is_finite() || !t.phase.is_finite() {
                return Err(domain("drive.amplitude", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Recorded junction dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    /// Dimensionless time at the end of each recorded stride.
    pub times: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    /// Output voltage averaged over each stride (units of I0R).
    pub v_inst: Vec<f64>,
    /// Circulating current averaged over each stride (units of I0).
    pub j_circ: Vec<f64>,
    /// Mean output voltage over the post-transient span (units of I0R).
    pub v_mean: f64,
    /// Batch-means standard error of `v_mean`.
    pub v_stderr: f64,
    /// Index of the first post-transient record.
    pub first_post_transient: usize,
}

/// Time-averaged output voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageEstimate {
    /// Units of I0R.
    pub mean: f64,
    pub stderr: f64,
}

/// One post-transient integration step as seen by an observer.
pub(crate) struct StepView<'a> {
    /// Time at the step midpoint.
    pub t_mid: f64,
    pub v_out: f64,
    /// Input-port flux variable, at the step midpoint; its time derivative
    /// is the input-port voltage.
    pub u_in: f64,
    pub j: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `e^{i(ωt+θ)}` of every drive tone at the step midpoint.
    pub phasors: &'a [Complex64],
}

pub(crate) trait Observer {
    fn begin(&mut self, _post_steps: usize) {}
    fn observe(&mut self, step: &StepView<'_>);
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn begin(&mut self, n: usize) {
        self.0.begin(n);
        self.1.begin(n);
    }
    fn observe(&mut self, s: &StepView<'_>) {
        self.0.observe(s);
        self.1.observe(s);
    }
}

/// Integration switches that are not part of the persisted `SimConfig`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Drop the `sin δ` terms: both junctions become plain resistors.
    pub junctions_enabled: bool,
    /// Random stream index; independent tasks use distinct streams.
    pub stream: u64,
    /// Noise temperature (K). `None` uses the device's noise temperature.
    pub t_noise: Option<f64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            junctions_enabled: true,
            stream: 0,
            t_noise: None,
        }
    }
}

struct Phasors {
    amp: Vec<f64>,
    omega: Vec<f64>,
    theta: Vec<f64>,
    p: Vec<Complex64>,
    rot: Vec<Complex64>,
    half: Vec<Complex64>,
    mid: Vec<Complex64>,
}

impl Phasors {
    fn new(drive: Option<&Drive>, norm: &Normalization, dt: f64) -> Self {
        let tones: &[Tone] = drive.map(|d| d.tones.as_slice()).unwrap_or(&[]);
        let omega: Vec<f64> = tones
            .iter()
            .map(|t| norm.to_dimensionless_omega(2.0 * PI * t.frequency))
            .collect();
        Self {
            amp: tones.iter().map(|t| t.amplitude).collect(),
            theta: tones.iter().map(|t| t.phase).collect(),
            p: omega.iter().zip(tones).map(|(_, t)| Complex64::from_polar(1.0, t.phase)).collect(),
            rot: omega.iter().map(|w| Complex64::from_polar(1.0, w * dt)).collect(),
            half: omega.iter().map(|w| Complex64::from_polar(1.0, 0.5 * w * dt)).collect(),
            mid: vec![Complex64::new(0.0, 0.0); omega.len()],
            omega,
        }
    }

    /// Resynchronise the recurrence with the exact phase at time `t`.
    fn reset(&mut self, t: f64) {
        for ((p, w), th) in self.p.iter_mut().zip(&self.omega).zip(&self.theta) {
            *p = Complex64::from_polar(1.0, w * t + th);
        }
    }

    /// Drive value at the start and end of the step, plus its derivative at
    /// the midpoint. Fills `mid`.
    fn values(&mut self) -> (f64, f64, f64) {
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for i in 0..self.p.len() {
            let p = self.p[i];
            let m = p * self.half[i];
            self.mid[i] = m;
            a += self.amp[i] * p.re;
            b += self.amp[i] * (p * self.rot[i]).re;
            d -= self.amp[i] * self.omega[i] * m.im;
        }
        (a, b, d)
    }

    fn advance(&mut self) {
        for (p, r) in self.p.iter_mut().zip(&self.rot) {
            *p *= r;
        }
    }
}

/// Pre-computed coefficients of the loop equations.
#[derive(Clone, Copy)]
struct Loop {
    topology: Topology,
    beta_l: f64,
    m_over_l: f64,
    i_b: f64,
    phi_a: f64,
    junctions: f64,
}

impl Loop {
    /// Arm currents for phases `(d1, d2)` with drive offsets applied.
    #[inline]
    fn arm_currents(&self, d1: f64, d2: f64, flux_drive: f64, bias_drive: f64) -> (f64, f64) {
        let phi = self.phi_a + flux_drive;
        let ib = self.i_b + bias_drive;
        match self.topology {
            Topology::Slug => {
                let i2 = ((d1 - d2) / PI - 2.0 * phi) / self.beta_l;
                (ib - i2, i2)
            }
            Topology::Symmetric => {
                let j = ((d2 - d1) / PI - 2.0 * phi) / self.beta_l;
                (0.5 * ib + j, 0.5 * ib - j)
            }
        }
    }

    #[inline]
    fn circulating(&self, i1: f64, i2: f64) -> f64 {
        0.5 * (i1 - i2)
    }

    /// Antiderivative of the input-port voltage.
    #[inline]
    fn input_flux(&self, d1: f64, d2: f64) -> f64 {
        match self.topology {
            Topology::Slug => self.m_over_l * (d1 - d2),
            Topology::Symmetric => self.m_over_l * (d2 - d1),
        }
    }

    /// Output voltage from the phase increments of one step.
    #[inline]
    fn output_voltage(&self, rate1: f64, rate2: f64, bias_rate: f64) -> f64 {
        match self.topology {
            Topology::Slug => rate1,
            Topology::Symmetric => 0.5 * (rate1 + rate2) + 0.25 * PI * self.beta_l * bias_rate,
        }
    }
}

/// Integrate one realization, feeding every post-transient step to `obs`.
pub(crate) fn run<O: Observer>(
    device: &DeviceParams,
    bias: &BiasPoint,
    sim: &SimConfig,
    drive: Option<&Drive>,
    opts: EngineOptions,
    obs: &mut O,
) -> Result<()> {
    sim.validate()?;
    if let Some(d) = drive {
        d.validate()?;
    }
    if !bias.i_b.is_finite() || !bias.phi_a.is_finite() {
        return Err(domain("bias", "bias current and flux must be finite"));
    }
    let t_noise = opts.t_noise.unwrap_or_else(|| device.noise_temperature());
    let norm = normalize(device, t_noise)?;
    let dt = sim.dt;
    let n_total = (sim.t_total / dt).round() as usize;
    let n_tr = (sim.t_transient / dt).round() as usize;
    let post = n_total.saturating_sub(n_tr);
    obs.begin(post);

    let lp = Loop {
        topology: device.topology,
        beta_l: norm.beta_l,
        m_over_l: device.m / device.l,
        i_b: norm.to_dimensionless_current(bias.i_b),
        phi_a: bias.phi_a,
        junctions: if opts.junctions_enabled { 1.0 } else { 0.0 },
    };
    let port = drive.map(|d| d.port);
    let mut ph = Phasors::new(drive, &norm, dt);

    let sigma = if sim.noise_enabled && norm.gamma_noise > 0.0 {
        (2.0 * norm.gamma_noise / dt).sqrt()
    } else {
        0.0
    };
    let mut rng = task_rng(sim.seed, opts.stream);
    let beta_c = norm.beta_c;
    let inertial = beta_c > 0.0;

    let (mut d1, mut d2) = (0.0_f64, 0.0_f64);
    let (mut u1, mut u2) = (0.0_f64, 0.0_f64);
    let bound = sim.stability_bound;

    for k in 0..n_total {
        if k % 1024 == 0 {
            ph.reset(k as f64 * dt);
        }
        let t = k as f64 * dt;
        let (drv0, drv1, drv_rate) = ph.values();
        let (flux0, bias0, flux1, bias1, bias_rate) = match port {
            Some(Port::InputFlux) => (drv0, 0.0, drv1, 0.0, 0.0),
            Some(Port::OutputCurrent) => (0.0, drv0, 0.0, drv1, drv_rate),
            None => (0.0, 0.0, 0.0, 0.0, 0.0),
        };
        let (n1, n2) = if sigma > 0.0 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (sigma * a, sigma * b)
        } else {
            (0.0, 0.0)
        };

        let jn = lp.junctions;
        let (i1a, i2a) = lp.arm_currents(d1, d2, flux0, bias0);
        let (nd1, nd2, nu1, nu2);
        if !inertial {
            let f1 = i1a - jn * d1.sin() + n1;
            let f2 = i2a - jn * d2.sin() + n2;
            let p1 = d1 + dt * f1;
            let p2 = d2 + dt * f2;
            let (i1b, i2b) = lp.arm_currents(p1, p2, flux1, bias1);
            let g1 = i1b - jn * p1.sin() + n1;
            let g2 = i2b - jn * p2.sin() + n2;
            nd1 = d1 + 0.5 * dt * (f1 + g1);
            nd2 = d2 + 0.5 * dt * (f2 + g2);
            nu1 = 0.0;
            nu2 = 0.0;
        } else {
            let a1 = (i1a - jn * d1.sin() - u1 + n1) / beta_c;
            let a2 = (i2a - jn * d2.sin() - u2 + n2) / beta_c;
            let p1 = d1 + dt * u1;
            let p2 = d2 + dt * u2;
            let q1 = u1 + dt * a1;
            let q2 = u2 + dt * a2;
            let (i1b, i2b) = lp.arm_currents(p1, p2, flux1, bias1);
            let b1 = (i1b - jn * p1.sin() - q1 + n1) / beta_c;
            let b2 = (i2b - jn * p2.sin() - q2 + n2) / beta_c;
            nd1 = d1 + 0.5 * dt * (u1 + q1);
            nd2 = d2 + 0.5 * dt * (u2 + q2);
            nu1 = u1 + 0.5 * dt * (a1 + b1);
            nu2 = u2 + 0.5 * dt * (a2 + b2);
        }

        let rate1 = (nd1 - d1) / dt;
        let rate2 = (nd2 - d2) / dt;
        let worst = rate1.abs().max(rate2.abs());
        if !(worst <= bound) {
            return Err(SlugError::IntegrationStability {
                time: t,
                rate: worst,
                bound,
            });
        }

        if k >= n_tr {
            let v_out = lp.output_voltage(rate1, rate2, bias_rate);
            let (i1c, i2c) = lp.arm_currents(nd1, nd2, flux1, bias1);
            let j = 0.5 * (lp.circulating(i1a, i2a) + lp.circulating(i1c, i2c));
            obs.observe(&StepView {
                t_mid: t + 0.5 * dt,
                v_out,
                u_in: 0.5 * (lp.input_flux(d1, d2) + lp.input_flux(nd1, nd2)),
                j,
                delta1: nd1,
                delta2: nd2,
                phasors: &ph.mid,
            });
        }
        d1 = nd1;
        d2 = nd2;
        u1 = nu1;
        u2 = nu2;
        ph.advance();
    }
    Ok(())
}

/// Running mean with batch-means standard error.
pub(crate) struct MeanObserver {
    block_steps: usize,
    sum: f64,
    count: usize,
    block_sum: f64,
    block_count: usize,
    blocks: Vec<f64>,
}

impl MeanObserver {
    pub fn new(sim: &SimConfig) -> Self {
        Self {
            block_steps: ((sim.block_span / sim.dt).round() as usize).max(1),
            sum: 0.0,
            count: 0,
            block_sum: 0.0,
            block_count: 0,
            blocks: Vec::new(),
        }
    }

    pub fn estimate(&self) -> VoltageEstimate {
        let mean = if self.count > 0 { self.sum / self.count as f64 } else { 0.0 };
        VoltageEstimate {
            mean,
            stderr: standard_error(&self.blocks),
        }
    }
}

impl Observer for MeanObserver {
    fn observe(&mut self, s: &StepView<'_>) {
        self.sum += s.v_out;
        self.count += 1;
        self.block_sum += s.v_out;
        self.block_count += 1;
        if self.block_count == self.block_steps {
            self.blocks.push(self.block_sum / self.block_count as f64);
            self.block_sum = 0.0;
            self.block_count = 0;
        }
    }
}

/// Standard error of the mean of (approximately independent) batch values.
pub(crate) fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

struct RecordObserver {
    stride: usize,
    acc_v: f64,
    acc_j: f64,
    filled: usize,
    out: PhaseTrajectory,
}

impl Observer for RecordObserver {
    fn observe(&mut self, s: &StepView<'_>) {
        self.acc_v += s.v_out;
        self.acc_j += s.j;
        self.filled += 1;
        if self.filled == self.stride {
            let n = self.stride as f64;
            self.out.times.push(s.t_mid + 0.0);
            self.out.delta1.push(s.delta1);
            self.out.delta2.push(s.delta2);
            self.out.v_inst.push(self.acc_v / n);
            self.out.j_circ.push(self.acc_j / n);
            self.acc_v = 0.0;
            self.acc_j = 0.0;
            self.filled = 0;
        }
    }
}

/// Integrate and record the post-transient trajectory.
///
/// The post-transient span is rounded up to a whole number of record strides
/// so that `v_mean` is exactly the mean of `v_inst`.
pub fn integrate_langevin(
    device: &DeviceParams,
    bias: &BiasPoint,
    sim: &SimConfig,
    drive: Option<&Drive>,
) -> Result<PhaseTrajectory> {
    integrate_langevin_with(device, bias, sim, drive, EngineOptions::default())
}

pub fn integrate_langevin_with(
    device: &DeviceParams,
    bias: &BiasPoint,
    sim: &SimConfig,
    drive: Option<&Drive>,
    opts: EngineOptions,
) -> Result<PhaseTrajectory> {
    sim.validate()?;
    let stride = sim.record_stride;
    let n_tr = (sim.t_transient / sim.dt).round() as usize;
    let n_total = (sim.t_total / sim.dt).round() as usize;
    let post = n_total.saturating_sub(n_tr).div_ceil(stride) * stride;
    let adjusted = SimConfig {
        t_total: (n_tr + post) as f64 * sim.dt,
        ..sim.clone()
    };
    let mut obs = (
        MeanObserver::new(&adjusted),
        RecordObserver {
            stride,
            acc_v: 0.0,
            acc_j: 0.0,
            filled: 0,
            out: PhaseTrajectory {
                times: Vec::with_capacity(post / stride),
                delta1: Vec::with_capacity(post / stride),
                delta2: Vec::with_capacity(post / stride),
                v_inst: Vec::with_capacity(post / stride),
                j_circ: Vec::with_capacity(post / stride),
                v_mean: 0.0,
                v_stderr: 0.0,
                first_post_transient: 0,
            },
        },
    );
    run(device, bias, &adjusted, drive, opts, &mut obs)?;
    let est = obs.0.estimate();
    let mut traj = obs.1.out;
    traj.v_mean = est.mean;
    traj.v_stderr = est.stderr;
    Ok(traj)
}

/// Post-transient mean output voltage without recording the trajectory.
pub fn time_average(
    device: &DeviceParams,
    bias: &BiasPoint,
    sim: &SimConfig,
    opts: EngineOptions,
) -> Result<VoltageEstimate> {
    let mut obs = MeanObserver::new(sim);
    run(device, bias, sim, None, opts, &mut obs)?;
    Ok(obs.estimate())
}
