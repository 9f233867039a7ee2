//! Synthesis and verification of policies for continuing PCTL
//! specifications on finite Markov decision processes.

pub mod cli;
pub mod engine;
pub mod formula;
pub mod frontier;
pub mod model;
pub mod policy;
pub mod reachability;
pub mod verify;
