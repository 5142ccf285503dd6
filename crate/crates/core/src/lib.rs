//! Multi-agent UI prototype engine: wireframe model, knowledge bases,
//! theme and component agents, SVG rendering and evaluation metrics.

pub mod agents;
pub mod backends;
pub mod demo;
pub mod hash;
pub mod knowledge;
pub mod metrics;
pub mod model;
pub mod render;
