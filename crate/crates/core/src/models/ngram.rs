//! Order-n Markov chain estimated by counting.

use std::collections::BTreeMap;

use rand::Rng;

use super::network::sample_categorical;
use crate::error::{Error, Result};
use crate::sequences::{Alphabet, GateSequence};

/// Counts for every context of length `0..order`.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    order: usize,
    alphabet: Alphabet,
    counts: BTreeMap<Vec<u8>, Vec<u64>>,
}

impl NGramModel {
    pub fn fit(data: &[GateSequence], order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("n-gram order must be at least 2, got {order}")));
        }
        let first = data.first().ok_or_else(|| Error::Empty("n-gram training data".into()))?;
        let alphabet = first.alphabet();
        let mut counts: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
        for seq in data {
            if seq.alphabet() != alphabet {
                return Err(Error::Shape("mixed alphabets in n-gram training data".into()));
            }
            let ids: Vec<u8> = seq.ids().collect();
            for t in 0..ids.len() {
                for j in 0..=t.min(order - 1) {
                    let row = counts.entry(ids[t - j..t].to_vec()).or_insert_with(|| vec![0; alphabet.size()]);
                    row[ids[t] as usize] += 1;
                }
            }
        }
        Ok(NGramModel { order, alphabet, counts })
    }

    pub(crate) fn from_counts(order: usize, alphabet: Alphabet, counts: BTreeMap<Vec<u8>, Vec<u64>>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("n-gram order must be at least 2, got {order}")));
        }
        for (ctx, row) in &counts {
            if ctx.len() >= order || row.len() != alphabet.size() || ctx.iter().any(|&g| g as usize >= alphabet.size()) {
                return Err(Error::Shape("n-gram count table does not match order and alphabet".into()));
            }
        }
        Ok(NGramModel { order, alphabet, counts })
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&[u8], &[u64])> {
        self.counts.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Raw counts following exactly `context`, if it was seen.
    pub fn counts(&self, context: &[u8]) -> Option<&[u64]> {
        self.counts.get(context).map(Vec::as_slice)
    }

    /// Next-gate distribution given the history so far, backing off to the
    /// longest seen suffix and finally to uniform.
    pub fn probabilities(&self, history: &[u8]) -> Vec<f64> {
        let max = history.len().min(self.order - 1);
        for len in (0..=max).rev() {
            if let Some(row) = self.counts.get(&history[history.len() - len..]) {
                let total: u64 = row.iter().sum();
                if total > 0 {
                    return row.iter().map(|&c| c as f64 / total as f64).collect();
                }
            }
        }
        vec![1.0 / self.alphabet.size() as f64; self.alphabet.size()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, half_length: usize, rng: &mut R) -> Result<GateSequence> {
        if half_length == 0 {
            return Err(Error::InvalidArgument("half length must be at least 1".into()));
        }
        let mut ids: Vec<u8> = Vec::with_capacity(half_length);
        while ids.len() < half_length {
            let p = self.probabilities(&ids);
            ids.push(sample_categorical(&p, rng) as u8);
        }
        Ok(GateSequence::from_ids(&ids, self.alphabet))
    }
}
