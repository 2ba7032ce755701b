#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod analysis;
pub mod engine;
pub mod neuron;
pub mod noise;
pub mod synapse;
pub mod topology;
