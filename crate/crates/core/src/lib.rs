//! Hierarchical topometric maps from indoor point clouds.
//!
//! The pipeline runs storey detection on the z-density histogram, rasterizes
//! each storey into an occupancy grid, extracts free-space columns, merges them
//! into volumes joined by passages, groups volumes into regions and optionally
//! splits large regions with a 2D area graph.

pub mod areagraph;
pub mod cloud;
pub mod columns;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod grid;
pub mod passages;
pub mod pipeline;
pub mod regions;
pub mod storey;
pub mod topomap;
pub mod volumes;

mod unionfind;

pub use error::{Error, Result};
