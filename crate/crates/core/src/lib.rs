//! Modular domain-structured chaos.
//!
//! * [`symseq`]: labels over `{1..m}`, the shift and the sequence metric.
//! * [`structure`]: modules with prefix-labeled cells and their certifiers.
//! * [`dynamics`]: the modular similarity map and chaos witnesses.
//! * [`randproc`]: random processes whose realizations are trajectories.
//! * [`cli`]: the `modchaos` command line.

pub mod cli;
pub mod dynamics;
pub mod randproc;
pub mod render;
pub mod structure;
pub mod symseq;
