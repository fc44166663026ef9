pub mod classifier;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod label;
pub mod manifest;
pub mod nn;
pub mod persist;
pub mod pipeline;
pub mod seed;
pub mod text;

pub use error::{Error, Result};
pub use label::{ClassDistribution, ClassLabel};
