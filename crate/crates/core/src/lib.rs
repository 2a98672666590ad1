//! Stochastic simulation of a SQUID-based microwave amplifier (SLUG): junction
//! dynamics, small-signal impedances, embedded scattering parameters and
//! backaction on a dispersively coupled qubit.

pub mod backaction;
pub mod constants;
pub mod device;
pub mod error;
pub mod langevin;
pub mod lockin;
pub mod pulsed;
pub mod ramsey;
pub mod rng;
pub mod scattering;
pub mod small_signal;
pub mod transfer;

pub use backaction::{backaction_chain, BackactionReport, DephasingModel, QubitCavityParams};
pub use device::{normalize, BiasPoint, DeviceParams, Normalization, SimConfig, Topology};
pub use error::{Result, SlugError};
pub use langevin::{integrate_langevin, integrate_langevin_with, time_average, Drive, PhaseTrajectory, Port, Tone};
pub use pulsed::{pulsed_mode_timeline, PulseEvent, PulsedTimeline, SlugState};
pub use ramsey::{ramsey_surface, FringeSurface, RiseFit};
pub use scattering::{cascade_s_parameters, scattering_map, MatchingNetwork, ScatteringMap};
pub use small_signal::{extract_two_port, extract_two_port_sweep, BiasConstants, ExtractOptions, TwoPortZ};
pub use transfer::{v_phi_curve, TransferCurve};
