pub mod data;
pub mod error;
pub mod io;
pub mod rng;
pub mod tree;
pub mod resampling;
pub mod forest;
pub mod boosting;
pub mod imputer;
pub mod ampute;
pub mod metrics;
pub mod synthdata;
pub mod benchmark;
pub mod cli;
