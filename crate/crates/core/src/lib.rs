pub mod model;
pub mod perturb;
pub mod metrics;
pub mod segment;
pub mod adapter;
pub mod pipeline;
pub mod cli;
