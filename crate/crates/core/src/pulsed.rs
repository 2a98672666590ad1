//! Pulsed operation: the SLUG is biased only while it is needed, and the
//! qubit sees cavity photons only while they linger.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::backaction::QubitCavityParams;
use crate::error::{Result, SlugError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlugState {
    /// Unbiased: no dissipation, no emission.
    Idle,
    /// Biased in the voltage state: dissipates and fills the cavity.
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseEvent {
    Slug { start: f64, end: f64, state: SlugState },
    PiHalf { time: f64 },
    Measure { start: f64, end: f64 },
}

impl PulseEvent {
    fn start(&self) -> f64 {
        match *self {
            PulseEvent::Slug { start, .. } | PulseEvent::Measure { start, .. } => start,
            PulseEvent::PiHalf { time } => time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub start: f64,
    pub end: f64,
    pub state: SlugState,
    /// Photon number at the interval edges.
    pub n_start: f64,
    pub n_end: f64,
    /// ∫n dt over the part of the interval inside the free evolution (s).
    pub exposure: f64,
    /// J.
    pub dissipated_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsedTimeline {
    pub intervals: Vec<IntervalReport>,
    /// The two π/2 pulse times (s).
    pub free_evolution: (f64, f64),
    /// ∫n dt between the π/2 pulses (s).
    pub exposure: f64,
    /// Stark phase picked up by the qubit (rad).
    pub stark_phase: f64,
    pub dissipated_energy: f64,
}

fn invalid(msg: impl Into<String>) -> SlugError {
    SlugError::SequenceValidation(msg.into())
}

/// Checks ordering, overlaps and the π/2 pair; returns the SLUG intervals
/// and the free-evolution window.
pub fn validate_sequence(events: &[PulseEvent]) -> Result<(Vec<(f64, f64, SlugState)>, (f64, f64))> {
    for e in events {
        let ok = match *e {
            PulseEvent::Slug { start, end, .. } | PulseEvent::Measure { start, end } => {
                start.is_finite() && end.is_finite() && end > start
            }
            PulseEvent::PiHalf { time } => time.is_finite(),
        };
        if !ok {
            return Err(invalid(format!("malformed event {e:?}")));
        }
    }
    if events.windows(2).any(|w| w[1].start() < w[0].start()) {
        return Err(invalid("events are not in time order"));
    }
    let slug: Vec<_> = events
        .iter()
        .filter_map(|e| match *e {
            PulseEvent::Slug { start, end, state } => Some((start, end, state)),
            _ => None,
        })
        .collect();
    if let Some(w) = slug.windows(2).find(|w| w[1].0 < w[0].1) {
        return Err(invalid(format!("SLUG intervals overlap at {} s", w[1].0)));
    }
    let pulses: Vec<f64> = events
        .iter()
        .filter_map(|e| match *e {
            PulseEvent::PiHalf { time } => Some(time),
            _ => None,
        })
        .collect();
    if pulses.len() != 2 {
        return Err(invalid(format!("expected two π/2 pulses, found {}", pulses.len())));
    }
    if pulses[1] <= pulses[0] {
        return Err(invalid("π/2 pulses must be separated in time"));
    }
    Ok((slug, (pulses[0], pulses[1])))
}

/// Photon number after `dt` relaxing toward `target`.
fn relax(n0: f64, target: f64, kappa: f64, dt: f64) -> f64 {
    target + (n0 - target) * (-kappa * dt).exp()
}

/// ∫₀^dt of the same relaxation.
fn relax_integral(n0: f64, target: f64, kappa: f64, dt: f64) -> f64 {
    target * dt + (n0 - target) * (-(kappa * dt)).exp_m1().abs() / kappa
}

/// Photon number and qubit exposure along a pulse sequence. The cavity
/// starts empty at the first event, fills toward `n_steady` while the SLUG is
/// active and decays otherwise. `power` is the dissipation while active.
pub fn pulsed_mode_timeline(
    events: &[PulseEvent],
    qc: &QubitCavityParams,
    n_steady: f64,
    power: f64,
) -> Result<PulsedTimeline> {
    qc.validate()?;
    let (slug, (t1, t2)) = validate_sequence(events)?;
    let kappa = qc.kappa;

    // Piecewise-constant drive over the whole timeline; gaps are idle.
    let origin = events.first().map_or(t1, |e| e.start());
    let mut segments: Vec<(f64, f64, f64)> = Vec::new(); // (start, end, target)
    let mut cursor = origin;
    for &(s, e, state) in &slug {
        if s > cursor {
            segments.push((cursor, s, 0.0));
        }
        segments.push((s, e, if state == SlugState::Active { n_steady } else { 0.0 }));
        cursor = e;
    }
    if t2 > cursor {
        segments.push((cursor, t2, 0.0));
    }

    let mut n = 0.0;
    let mut exposure = 0.0;
    let mut n_at = Vec::with_capacity(segments.len());
    for &(s, e, target) in &segments {
        let n0 = n;
        // Overlap with the free evolution window.
        let (a, b) = (s.max(t1), e.min(t2));
        if b > a {
            let na = relax(n0, target, kappa, a - s);
            exposure += relax_integral(na, target, kappa, b - a);
        }
        n = relax(n0, target, kappa, e - s);
        n_at.push((s, e, n0, n));
    }

    let mut intervals = Vec::with_capacity(slug.len());
    let mut dissipated_energy = 0.0;
    for &(s, e, state) in &slug {
        let &(_, _, n_start, n_end) = n_at.iter().find(|x| x.0 == s && x.1 == e).expect("segment exists");
        let (a, b) = (s.max(t1), e.min(t2));
        let target = if state == SlugState::Active { n_steady } else { 0.0 };
        let exp = if b > a {
            relax_integral(relax(n_start, target, kappa, a - s), target, kappa, b - a)
        } else {
            0.0
        };
        let energy = if state == SlugState::Active { power * (e - s) } else { 0.0 };
        dissipated_energy += energy;
        intervals.push(IntervalReport {
            start: s,
            end: e,
            state,
            n_start,
            n_end,
            exposure: exp,
            dissipated_energy: energy,
        });
    }

    Ok(PulsedTimeline {
        intervals,
        free_evolution: (t1, t2),
        exposure,
        stark_phase: 2.0 * PI * qc.two_chi_over_2pi() * exposure,
        dissipated_energy,
    })
}
