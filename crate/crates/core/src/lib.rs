//! Merging two users' desk workspaces into one shared mixed-reality layout.
//!
//! Pipeline: load a [`workspace::Scenario`], pre-solve hosting of shared
//! screens on spare monitors ([`presolver`]), cut each user's free space into
//! candidate containers ([`voxelizer`]), place the remaining screens by
//! minimizing the weighted [`objectives`] ([`solver`]), assemble the
//! cross-user links ([`mapping`]) and replay pointing gestures on the
//! collaborator's copy ([`retargeting`]).

pub mod cli;
pub mod error;
pub mod gen;
pub mod geometry;
pub mod mapping;
pub mod objectives;
pub mod presolver;
pub mod retargeting;
pub mod solver;
pub mod voxelizer;
pub mod workspace;

pub use error::{Error, Result};
