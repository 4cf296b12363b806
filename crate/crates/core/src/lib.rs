//! Learned multi-view local shape descriptors.

pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod network;
pub mod pipeline;
pub mod registration;
pub mod render;
pub mod seed;
pub mod synthetic;
pub mod viewselect;
