//! Dream-layer engine: a governed shared pool of de-identified interaction
//! templates with cooling, segmentation, rate limiting and poisoning defenses,
//! plus controlled offline dream generation, bounded policy distillation, and
//! a deterministic simulation harness for the coverage / segmentation /
//! dialogue / poetic experiments.
//!
//! Everything is seeded and virtual-clock driven: identical inputs, config and
//! seed produce byte-identical outputs.

pub mod abstraction;
pub mod acu_pool;
pub mod core_model;
pub mod data;
pub mod distiller;
pub mod dream_engine;
pub mod governance;
pub mod metrics;
pub mod sim_harness;
pub mod taxonomy;

pub use core_model::{
    canonical_decode, canonical_encode, CanonicalError, Episode, InteractionTemplate,
    PartitionKey, Timestamp,
};
