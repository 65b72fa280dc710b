//! Cooperative robust output regulation of discrete-time multi-agent systems
//! with input and communication delays: low-gain internal-model controller
//! synthesis, delay-lifted stability certificates and closed-loop simulation.

pub mod config;
pub mod error;
pub mod example;
pub mod graph;
pub mod imodel;
pub mod matcore;
pub mod simulator;
pub mod synthesis;

pub use error::{Error, Result};
