//! Real-time gateway for the mirror-eyes simulator: tick loop, wire
//! protocol, WebSocket/HTTP server and headless batch runs.

pub mod config;
pub mod headless;
pub mod protocol;
pub mod server;
pub mod sim;

pub use config::SimConfig;
pub use sim::Simulation;
