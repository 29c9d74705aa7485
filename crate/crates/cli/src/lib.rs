//! Library surface of the experiment runner, split out so integration tests
//! can drive config parsing and report emission directly.

pub mod config;
pub mod experiments;
pub mod report;
