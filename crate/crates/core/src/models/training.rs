//! Network model state, architecture sampling and the early-stopped
//! training loop.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::adam::{AdamConfig, AdamState};
use super::network::{LayerSpec, Network, DEFAULT_TRUNCATION, INIT_SCALE};
use super::Scorer;
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::sequences::{Alphabet, GateSequence};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    pub adam: AdamConfig,
    pub batch_size: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters { adam: AdamConfig::default(), batch_size: 50 }
    }
}

/// A recurrent network together with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub alphabet: Alphabet,
    pub net: Network,
    pub hyper: Hyperparameters,
    pub adam: AdamState,
    pub seed: u64,
    pub epoch: u64,
    pub best_avg_score: f64,
}

impl NetworkModel {
    /// Fresh model with weights uniform in `±0.08`, drawn from `seed`.
    pub fn new(alphabet: Alphabet, specs: &[LayerSpec], hyper: Hyperparameters, seed: u64) -> Result<Self> {
        if hyper.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let net = Network::random(alphabet.size(), specs, INIT_SCALE, &mut rng_from(seed, &[0]))?;
        let adam = AdamState::new(&net.params().iter().map(|(_, _, p)| p.len()).collect::<Vec<_>>());
        Ok(NetworkModel { alphabet, net, hyper, adam, seed, epoch: 0, best_avg_score: f64::INFINITY })
    }

    /// Same architecture and hyperparameters, new weights and cleared optimizer state.
    pub fn reinitialized(&self) -> Result<Self> {
        Self::new(self.alphabet, &self.net.specs(), self.hyper, self.seed)
    }

    pub fn sample<R: Rng + ?Sized>(&self, half_length: usize, rng: &mut R) -> Result<GateSequence> {
        self.net.sample(half_length, self.alphabet, rng)
    }

    pub fn describe(&self) -> String {
        let layers: Vec<String> = self
            .net
            .specs()
            .iter()
            .map(|s| {
                let mut d = s.units.to_string();
                if s.peephole {
                    d.push('p');
                }
                if let Some(k) = s.projection {
                    d.push_str(&format!("/{k}"));
                }
                d
            })
            .collect();
        let a = &self.hyper.adam;
        format!(
            "lstm[{}] lr={} b1={} b2={} eps={:e} batch={}",
            layers.join(","),
            a.step_rate,
            a.beta1,
            a.beta2,
            a.epsilon,
            self.hyper.batch_size
        )
    }

    /// One pass over `data` in shuffled minibatches. Returns the mean batch loss.
    pub fn train_epoch<R: Rng + ?Sized>(&mut self, data: &[GateSequence], truncation: usize, rng: &mut R) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.hyper.batch_size) {
            let batch: Vec<GateSequence> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grads) = self.net.backward(&batch, truncation)?;
            let grad_arrays: Vec<&[f64]> = grads.params().into_iter().map(|(_, _, p)| p).collect();
            self.adam.step(&self.hyper.adam, &mut self.net.params_mut(), &grad_arrays)?;
            if !self.net.is_finite() {
                return Err(Error::NonFinite("weights after update".into()));
            }
            total += loss;
            batches += 1;
        }
        self.epoch += 1;
        Ok(total / batches as f64)
    }
}

/// The set architectures and optimizer constants are drawn from.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpace {
    pub min_layers: usize,
    pub max_layers: usize,
    pub min_units: usize,
    pub max_units: usize,
    pub step_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub peephole_probability: f64,
    pub projection_probability: f64,
}

impl ArchitectureSpace {
    /// Two or three layers of 20 to 200 units.
    pub fn full() -> Self {
        ArchitectureSpace {
            min_layers: 2,
            max_layers: 3,
            min_units: 20,
            max_units: 200,
            step_rates: vec![0.1, 0.01],
            batch_sizes: vec![200, 500, 1000],
            beta1: vec![0.2, 0.7, 0.9],
            beta2: vec![0.9, 0.99, 0.999],
            epsilon: vec![1e-8, 1e-5],
            peephole_probability: 0.5,
            projection_probability: 0.5,
        }
    }

    /// Small networks and batches for training sets of a few hundred sequences.
    pub fn desk() -> Self {
        ArchitectureSpace {
            min_layers: 2,
            max_layers: 2,
            min_units: 16,
            max_units: 32,
            step_rates: vec![0.1, 0.01],
            batch_sizes: vec![10, 25, 50],
            ..Self::full()
        }
    }
}

/// Draws layer sizes (non-increasing with depth), peephole and projection
/// flags, and optimizer constants.
pub fn sample_architecture<R: Rng + ?Sized>(space: &ArchitectureSpace, rng: &mut R) -> Result<(Vec<LayerSpec>, Hyperparameters)> {
    if space.min_layers == 0 || space.min_layers > space.max_layers || space.min_units == 0 || space.min_units > space.max_units {
        return Err(Error::InvalidArgument("empty architecture space".into()));
    }
    let pick = |v: &[f64], rng: &mut R, what: &str| -> Result<f64> {
        v.choose(rng).copied().ok_or_else(|| Error::InvalidArgument(format!("no {what} choices")))
    };
    let n_layers = rng.random_range(space.min_layers..=space.max_layers);
    let mut units: Vec<usize> = (0..n_layers).map(|_| rng.random_range(space.min_units..=space.max_units)).collect();
    units.sort_unstable_by(|a, b| b.cmp(a));
    let specs = units
        .into_iter()
        .map(|h| {
            let peephole = rng.random_bool(space.peephole_probability);
            let projection = (h > 1 && rng.random_bool(space.projection_probability))
                .then(|| rng.random_range((h / 4).max(1)..h));
            LayerSpec { units: h, peephole, projection }
        })
        .collect();
    let adam = AdamConfig {
        step_rate: pick(&space.step_rates, rng, "step rate")?,
        beta1: pick(&space.beta1, rng, "beta1")?,
        beta2: pick(&space.beta2, rng, "beta2")?,
        epsilon: pick(&space.epsilon, rng, "epsilon")?,
    };
    let batch_size = *space
        .batch_sizes
        .choose(rng)
        .ok_or_else(|| Error::InvalidArgument("no batch size choices".into()))?;
    Ok((specs, Hyperparameters { adam, batch_size }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub truncation: usize,
    /// Half-length of the sequences sampled for evaluation.
    pub sample_length: usize,
}

impl TrainOptions {
    pub fn new(epochs: usize, sample_length: usize) -> Self {
        TrainOptions { epochs, eval_every: 5, eval_samples: 200, patience: 4, truncation: DEFAULT_TRUNCATION, sample_length }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub epoch: u64,
    pub loss: f64,
    pub avg_score: f64,
    /// Running minimum of `avg_score`.
    pub best_avg_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub best_avg_score: f64,
    pub history: Vec<EvalPoint>,
    pub epochs_run: usize,
    /// Training hit a non-finite loss or weight; the best earlier snapshot was kept.
    pub diverged: bool,
}

/// Average score of `count` freshly sampled sequences.
pub fn generated_average<S: Scorer + ?Sized>(model: &NetworkModel, scorer: &S, count: usize, length: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from(seed, &[]);
    let samples = (0..count).map(|_| model.sample(length, &mut rng)).collect::<Result<Vec<_>>>()?;
    let scores = scorer.score_halves(&samples)?;
    if scores.is_empty() {
        return Err(Error::Empty("evaluation samples".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Minibatch Adam on the cross-entropy. Every `eval_every` epochs the model
/// generates `eval_samples` sequences and their average score is tracked; the
/// weights with the lowest average are kept and training stops once
/// `patience` evaluations pass without improvement.
pub fn train_model<S: Scorer + ?Sized>(
    model: &mut NetworkModel,
    data: &[GateSequence],
    scorer: &S,
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if opts.eval_every == 0 || opts.eval_samples == 0 {
        return Err(Error::InvalidArgument("evaluation cadence and sample count must be positive".into()));
    }
    let mut shuffle = rng_from(seed, &[1]);
    let mut evals = 0u64;
    let mut evaluate = |m: &NetworkModel| {
        evals += 1;
        generated_average(m, scorer, opts.eval_samples, opts.sample_length, crate::rng::derive_seed(seed, &[2, evals]))
    };

    let initial = evaluate(model)?;
    let mut best = initial;
    let mut snapshot = model.clone();
    let mut history = vec![EvalPoint { epoch: model.epoch, loss: f64::NAN, avg_score: initial, best_avg_score: best }];
    let mut stale = 0;
    let mut diverged = false;
    let mut epochs_run = 0;

    for epoch in 1..=opts.epochs {
        let loss = match model.train_epoch(data, opts.truncation, &mut shuffle) {
            Ok(l) => l,
            Err(Error::NonFinite(what)) => {
                log::warn!("training diverged at epoch {epoch} ({what}); keeping best snapshot");
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        epochs_run = epoch;
        if epoch % opts.eval_every == 0 || epoch == opts.epochs {
            let avg = evaluate(model)?;
            if avg < best {
                best = avg;
                snapshot = model.clone();
                stale = 0;
            } else {
                stale += 1;
            }
            history.push(EvalPoint { epoch: model.epoch, loss, avg_score: avg, best_avg_score: best });
            if stale >= opts.patience {
                break;
            }
        }
    }
    *model = snapshot;
    model.best_avg_score = best;
    Ok(TrainReport { best_avg_score: best, history, epochs_run, diverged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnScorer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn count_x(halves: &[GateSequence]) -> Result<Vec<f64>> {
        Ok(halves
            .iter()
            .map(|s| 1.0 - s.gates().iter().filter(|g| **g == crate::sequences::Gate::X).count() as f64 / s.len() as f64)
            .collect())
    }

    fn tiny(seed: u64, lr: f64) -> NetworkModel {
        let hyper = Hyperparameters { adam: AdamConfig { step_rate: lr, ..Default::default() }, batch_size: 4 };
        NetworkModel::new(Alphabet::Pauli, &[LayerSpec::plain(8), LayerSpec::plain(6)], hyper, seed).unwrap()
    }

    #[test]
    fn architecture_draws_respect_constraints() {
        let space = ArchitectureSpace::full();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (specs, hyper) = sample_architecture(&space, &mut rng).unwrap();
            assert!((2..=3).contains(&specs.len()));
            assert!(specs.iter().all(|s| (20..=200).contains(&s.units)));
            assert!(specs.windows(2).all(|w| w[0].units >= w[1].units));
            assert!(specs.iter().all(|s| s.projection.is_none_or(|k| k < s.units)));
            assert!([0.1, 0.01].contains(&hyper.adam.step_rate));
            assert!([200, 500, 1000].contains(&hyper.batch_size));
        }
        let a = sample_architecture(&space, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_architecture(&space, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let mut model = tiny(1, 0.01);
        let before = model.net.clone();
        let scorer = FnScorer(count_x);
        let data = vec![GateSequence::pauli("XXXX")];
        let report = train_model(&mut model, &data, &scorer, &TrainOptions::new(0, 4), 9).unwrap();
        assert_eq!(model.net, before);
        assert_eq!(report.history.len(), 1);
        assert_eq!(report.best_avg_score, report.history[0].avg_score);
        let again = generated_average(&model, &scorer, 200, 4, crate::rng::derive_seed(9, &[2, 1])).unwrap();
        assert_eq!(again, report.best_avg_score);
    }

    #[test]
    fn overfits_identical_sequences() {
        let mut model = tiny(2, 0.01);
        let data = vec![GateSequence::pauli("XYZXYZXY"); 8];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut loss = f64::INFINITY;
        for _ in 0..200 {
            loss = model.train_epoch(&data, DEFAULT_TRUNCATION, &mut rng).unwrap();
        }
        assert!(model.net.loss(&data).unwrap() < 0.01, "loss {loss}");
    }

    #[test]
    fn history_is_a_running_minimum_and_snapshot_is_best() {
        let mut model = tiny(3, 0.05);
        let scorer = FnScorer(count_x);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<GateSequence> = (0..20)
            .map(|_| {
                let mut s = crate::sequences::random_sequence(6, Alphabet::Pauli, &mut rng).unwrap().symbols();
                s.replace_range(..3, "XXX");
                GateSequence::pauli(&s)
            })
            .collect();
        let opts = TrainOptions { eval_every: 2, eval_samples: 50, ..TrainOptions::new(30, 6) };
        let report = train_model(&mut model, &data, &scorer, &opts, 1).unwrap();
        assert!(report.history.windows(2).all(|w| w[1].best_avg_score <= w[0].best_avg_score));
        assert!(report.best_avg_score < report.history[0].avg_score);
        assert_eq!(model.best_avg_score, report.best_avg_score);
    }

    #[test]
    fn divergence_keeps_the_snapshot() {
        let mut model = tiny(4, 0.01);
        model.net.out_b[0] = f64::NAN;
        let scorer = FnScorer(|h: &[GateSequence]| Ok(vec![0.5; h.len()]));
        let data = vec![GateSequence::pauli("XYXY")];
        let opts = TrainOptions::new(5, 4);
        // Sampling from a NaN network still yields gates; training must report divergence.
        let report = train_model(&mut model, &data, &scorer, &opts, 0).unwrap();
        assert!(report.diverged);
        assert_eq!(report.epochs_run, 0);
    }

    #[test]
    fn scorer_errors_propagate() {
        let mut model = tiny(5, 0.01);
        let scorer = FnScorer(|_: &[GateSequence]| Err(Error::InvalidArgument("boom".into())));
        let data = vec![GateSequence::pauli("XYXY")];
        assert!(train_model(&mut model, &data, &scorer, &TrainOptions::new(3, 4), 0).is_err());
    }
}
