#![no_std]
extern crate alloc;

pub mod coupling;
pub mod graph;
pub mod operator;
pub mod percolation;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tree;
pub mod walk;
