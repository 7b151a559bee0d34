//! Social network video sharing emulation.
//!
//! Estimates the resolution and H.264 CRF a platform applies to uploads from
//! a set of (original, shared) video pairs, stores them as a platform
//! profile, and re-encodes arbitrary videos with that profile.
//!
//! Pipeline: [`probe`] and [`bitrate`] measure files, [`encoder`] runs the
//! re-encode, [`estimator`] searches the CRF per pair, [`profile_db`] persists
//! the results, [`planner`] applies them, and [`analysis`] reports how many
//! samples per resolution are needed.

pub mod analysis;
pub mod bitrate;
pub mod cli;
pub mod encoder;
pub mod estimator;
pub mod media;
pub mod planner;
mod pool;
pub mod probe;
pub mod profile_db;
pub mod tools;

pub use media::{FrameRate, Resolution};
pub use tools::Toolchain;
