pub mod error;
pub mod gnn;
pub mod graph;
pub mod knn;
pub mod losses;
pub mod self_expression;
pub mod similarity;
pub mod clustering;
pub mod metrics;
pub mod config;
pub mod model;
pub mod optim;
pub mod checkpoint;
pub mod train;
pub mod artifacts;
