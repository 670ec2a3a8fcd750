//! Reward-driven intention reasoning for motion forecasting.
//!
//! A target-centric bird's-eye grid is treated as a finite-horizon MDP. A
//! per-cell reward is learned with maximum-entropy inverse reinforcement
//! learning from quantized future trajectories; policy rollouts over the grid
//! then seed multimodal trajectory proposals which are clustered, smoothed and
//! scored.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and parallel drivers live in the `fim-cli` crate.

#![no_std]

extern crate alloc;

pub mod decode;
pub mod error;
pub mod eval;
pub mod grid;
pub mod irl;
pub mod occupancy;
pub mod pipeline;
pub mod rng;
pub mod rollout;
pub mod scene;

pub use error::{Error, Result};
pub use grid::{Action, CellIndex, GridSpec};

/// A point in the target frame, meters.
pub type Point = [f64; 2];
