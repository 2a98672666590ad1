//! Shared fixtures for the benchmarks.

use slugsim_core::{BiasPoint, DeviceParams, SimConfig};

/// Default device at a bias on the steep shoulder of the transfer curve.
pub fn operating_point() -> (DeviceParams, BiasPoint) {
    (DeviceParams::default(), BiasPoint::new(42e-6, 0.25))
}

/// A short run: `span` dimensionless time units after a brief transient.
pub fn short_run(span: f64) -> SimConfig {
    SimConfig {
        t_total: span + 100.0,
        t_transient: 100.0,
        ..SimConfig::default()
    }
}
