//! Command-line surface and live WebSocket session for the singularity-avoiding
//! admittance controller.

pub mod batch;
pub mod server;
pub mod sweep;
