//! Wavefront tracking for a triangular system of conservation laws
//!
//! ```text
//! w_t + f(w, v)_x = 0,    v_t - v_x = 0,
//! ```
//!
//! with every `w` jump split into unit waves that keep their identity, and
//! runtime checks of the interaction estimates on each run.

pub mod envelopes;
pub mod flux_models;
pub mod pair_history;
pub mod riemann;
pub mod scenario;
pub mod simulator;
pub mod verifier;
pub mod wavefield;
