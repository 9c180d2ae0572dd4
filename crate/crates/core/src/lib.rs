pub mod bootstrap;
pub mod cli;
pub mod dcov;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod simulate;
pub mod sum;
