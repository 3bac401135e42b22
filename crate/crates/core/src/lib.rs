//! Pattern discovery over geo-spatiotemporal entity data (traffic incidents
//! and weather conditions).
//!
//! Two analyses share the same cleaned entity set:
//!
//! * **Propagation patterns.** Entities that start close in time and sit at
//!   the same place are linked child-to-parent ([`relations`]), the links
//!   form rooted unordered trees ([`forest`]), and frequent embedded subtrees
//!   are mined per city ([`mining`]). States are then grouped by the patterns
//!   they exhibit ([`regions`]).
//! * **Influential patterns.** Long-lived entities are merged where they
//!   overlap, and the number of entities around them during their lifetime is
//!   compared with matching windows before and after ([`longterm`]).

pub mod config;
pub mod error;
pub mod forest;
pub mod ingest;
pub mod longterm;
pub mod mining;
pub mod model;
pub mod numerics;
pub mod regions;
pub mod relations;

pub use config::PipelineConfig;
pub use error::{Error, Result};
