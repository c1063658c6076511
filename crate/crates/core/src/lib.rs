//! Two-way molecular relay channel: diffusion channels with memory,
//! ligand-receptor reception with blocking, straightforward and
//! reaction-based network coding with rate-adaptive ISI mitigation, analytical
//! error probabilities and a Monte Carlo simulator.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod channel;
pub mod coding;
pub mod config;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod reception;
pub mod sweep;

pub use config::{load_config, unit_convert, BlockingProfile, SystemConfig};
pub use error::{Error, Result};
pub use model::{Scheme, SystemModel};
