//! Clutter-aware disperse-and-pick planning for tabletop decluttering.
//!
//! The crate bundles a deterministic top-down 2D simulator ([`simscene`]),
//! a feature-congestion clutter measure ([`clutter`]), depth-based grasp
//! planning ([`grasp`]), push-to-move planning ([`push`]), the push-vs-grasp
//! policy and episode loop ([`policy`]), metrics ([`metrics`]) and a batch
//! experiment harness ([`experiment`]).

pub mod clutter;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grasp;
pub mod metrics;
pub mod image;
pub mod policy;
pub mod push;
pub mod simscene;

pub use error::{Error, Result};
