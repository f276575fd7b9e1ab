//! Simulation and search toolkit for dynamical-decoupling pulse sequences.
//!
//! A qubit coupled to a small spin bath is evolved under piecewise-constant
//! control, each pulse sequence is scored by a trace-norm distance from a
//! pure bath evolution, and good sequences are searched for with a loop that
//! alternates fitting generative sequence models (recurrent networks or
//! n-grams) to the best sequences found so far and sampling new candidates
//! from them.
//!
//! Module map:
//!
//! - [`sequences`]: gate alphabets, Pauli products, decoupling families, file format
//! - [`noise`]: random system–bath Hamiltonians and control generators
//! - [`evolution`]: propagators, scoring, average Hamiltonian
//! - [`models`]: n-gram and recurrent sequence models, training, sampling
//! - [`optimizer`]: the outer data/model loop
//! - [`analysis`]: frequency tables, baselines, replay of known sequences
//! - [`cli`]: the `ddseq` command line and experiment presets
//!
//! Runnable walkthroughs of each capability live under `examples/`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod models;
pub mod noise;
pub mod optimizer;
pub mod rng;
pub mod sequences;

pub use error::{Error, Result};
