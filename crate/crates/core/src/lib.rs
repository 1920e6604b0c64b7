//! DC microgrid voltage stabilization: an averaged-model plant, a cascaded
//! PI baseline, a Mamdani fuzzy stabilizer and a particle swarm tuner for
//! its output membership functions.

// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod fis;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod tuner;
