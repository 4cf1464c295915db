//! Study server, simulator and offline pipeline for selective explanations.

pub mod config;
pub mod engine;
pub mod export;
pub mod http;
pub mod pipeline;
pub mod simulate;
pub mod store;

pub use config::Config;
pub use engine::{Engine, EngineError};
