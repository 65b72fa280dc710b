//! The built-in four-follower scenario: a double integrator tracking a
//! unit-frequency sinusoid with one step each of input and communication delay.

use crate::config::{Problem, ScenarioConfig};
use crate::error::Result;

pub const CONFIG_TOML: &str = include_str!("../fixtures/four_agent_example.toml");

/// Published state-feedback gain `(K_x, K_z)` for this scenario.
pub const EXPECTED_STATE_GAIN: [f64; 4] = [0.1292, -0.1788, -0.0659, -0.1597];

/// Published observer gain.
pub const EXPECTED_OBSERVER_GAIN: [f64; 2] = [0.72, 0.0648];

/// Entrywise tolerance of the published four-decimal gains.
pub const GAIN_TOLERANCE: f64 = 5e-4;

/// The γ at which the solver reproduces [`EXPECTED_STATE_GAIN`].
pub const REPRODUCING_GAMMA: f64 = 0.11;

/// Uncertainty magnitudes, ordered `δA(1,2)` of followers 1..4, then
/// `δB(1)`, then `δE(1,2)`.
pub const UNCERTAINTY: [f64; 12] = [0.1, 0.2, 0.3, 0.4, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

pub fn config() -> ScenarioConfig {
    ScenarioConfig::parse(CONFIG_TOML).expect("embedded example parses")
}

pub fn problem() -> Result<Problem> {
    config().build()
}
