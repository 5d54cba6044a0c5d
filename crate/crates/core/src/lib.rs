pub mod align;
pub mod centroid;
pub mod error;
pub mod gcn;
pub mod harness;
pub mod graph;
pub mod pretrain;
pub mod prompt;
pub mod rng;
pub mod view;
mod textio;
