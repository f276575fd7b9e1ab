//! Generative sequence models: an n-gram chain and a stacked LSTM, with
//! training, sampling and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod network;
pub mod ngram;
pub mod training;

use rand::Rng;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use network::{LayerSpec, Network};
pub use ngram::NGramModel;
pub use training::{
    sample_architecture, train_model, ArchitectureSpace, Hyperparameters, NetworkModel, TrainOptions, TrainReport,
};

use crate::error::Result;
use crate::evolution::Evaluator;
use crate::sequences::{Alphabet, GateSequence};

/// Scores half sequences (lower is better).
pub trait Scorer: Sync {
    fn score_halves(&self, halves: &[GateSequence]) -> Result<Vec<f64>>;
}

impl Scorer for Evaluator {
    fn score_halves(&self, halves: &[GateSequence]) -> Result<Vec<f64>> {
        self.score_batch(halves)
    }
}

/// Adapts a closure into a [`Scorer`].
pub struct FnScorer<F>(pub F);

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&[GateSequence]) -> Result<Vec<f64>> + Sync,
{
    fn score_halves(&self, halves: &[GateSequence]) -> Result<Vec<f64>> {
        (self.0)(halves)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SequenceModel {
    Network(Box<NetworkModel>),
    NGram(NGramModel),
}

impl SequenceModel {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            SequenceModel::Network(m) => m.alphabet,
            SequenceModel::NGram(m) => m.alphabet(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, half_length: usize, rng: &mut R) -> Result<GateSequence> {
        match self {
            SequenceModel::Network(m) => m.sample(half_length, rng),
            SequenceModel::NGram(m) => m.sample(half_length, rng),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SequenceModel::Network(m) => m.describe(),
            SequenceModel::NGram(m) => format!("{}-gram", m.order()),
        }
    }
}
