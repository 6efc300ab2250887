//! Topological exploration planning for bounded 3D voxel worlds.
//!
//! The crate is a deterministic headless simulator: a ground-truth voxel
//! world, a ray-cast sensor feeding a belief grid, convex coverage and
//! frontier regions, a sparse topological map over them, and local/global
//! planners that drive a point robot until the reachable space is explored.

pub mod config;
pub mod export;
pub mod geometry;
pub mod knowledge;
pub mod mission;
pub mod planning;
pub mod regions;
pub mod topomap;
pub mod world;
