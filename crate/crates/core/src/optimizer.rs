//! The outer search loop: random initial data, a pool of generative models
//! trained on the best sequences, and repeated sample / merge / truncate
//! generations until the average training-set score stops improving.
//!
//! Every random draw comes from a stream keyed by the run seed and a
//! (purpose, generation, model) tuple, so a run is reproducible regardless of
//! thread count, and a resumed run continues exactly where it stopped.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Evaluator;
use crate::models::training::generated_average;
use crate::models::{
    load_model, sample_architecture, save_model, train_model, ArchitectureSpace, NGramModel, NetworkModel, Scorer,
    SequenceModel, TrainOptions,
};
use crate::noise::{GateSet, NoiseInstance};
use crate::rng::{derive_seed, rng_from};
use crate::sequences::{random_sequence, read_sequences, write_scored_sequences, Alphabet, GateSequence, Kind};

// Seed stream tags.
const STREAM_RANDOM_DATA: u64 = 0;
const STREAM_ARCHITECTURE: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_SAMPLE: u64 = 4;
const STREAM_BOOTSTRAP: u64 = 5;
const STREAM_EVAL: u64 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSequence {
    pub sequence: GateSequence,
    pub score: f64,
}

/// Scored half sequences, sorted by ascending score, without duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    entries: Vec<ScoredSequence>,
    pub generation: usize,
    pub source: String,
}

impl Dataset {
    /// Sorts, removes duplicate gate strings and validates the scores.
    pub fn new(mut entries: Vec<ScoredSequence>, generation: usize, source: impl Into<String>) -> Result<Self> {
        if let Some(first) = entries.first() {
            let (alphabet, len) = (first.sequence.alphabet(), first.sequence.len());
            for e in &entries {
                if !(e.score.is_finite() && (0.0..=1.0).contains(&e.score)) {
                    return Err(Error::InvalidArgument(format!("score {} of {} outside [0, 1]", e.score, e.sequence)));
                }
                if e.sequence.alphabet() != alphabet || e.sequence.len() != len || e.sequence.kind() != Kind::Half {
                    return Err(Error::Shape("dataset entries must be half sequences of one alphabet and length".into()));
                }
            }
        }
        entries.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.sequence.gates().cmp(b.sequence.gates())));
        let mut seen = HashSet::with_capacity(entries.len());
        entries.retain(|e| seen.insert(e.sequence.gates().to_vec()));
        Ok(Dataset { entries, generation, source: source.into() })
    }

    /// Scores `sequences` and builds a dataset from them.
    pub fn score<S: Scorer + ?Sized>(
        sequences: Vec<GateSequence>,
        scorer: &S,
        generation: usize,
        source: impl Into<String>,
    ) -> Result<Self> {
        let scores = scorer.score_halves(&sequences)?;
        if scores.len() != sequences.len() {
            return Err(Error::Shape("scorer returned the wrong number of scores".into()));
        }
        let entries = sequences.into_iter().zip(scores).map(|(sequence, score)| ScoredSequence { sequence, score }).collect();
        Self::new(entries, generation, source)
    }

    pub fn entries(&self) -> &[ScoredSequence] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sequences(&self) -> Vec<GateSequence> {
        self.entries.iter().map(|e| e.sequence.clone()).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn average(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.entries.iter().map(|e| e.score).sum::<f64>() / self.len() as f64)
    }

    pub fn min(&self) -> Option<f64> {
        self.entries.first().map(|e| e.score)
    }

    /// Union with `other`; duplicates keep a single entry.
    pub fn merge(&self, other: &Dataset, generation: usize) -> Result<Dataset> {
        let entries = self.entries.iter().chain(&other.entries).cloned().collect();
        Self::new(entries, generation, format!("{}+{}", self.source, other.source))
    }

    /// The `n` lowest-scoring entries.
    pub fn truncate(&self, n: usize) -> Dataset {
        Dataset { entries: self.entries[..n.min(self.len())].to_vec(), generation: self.generation, source: self.source.clone() }
    }

    /// 64-bit FNV-1a over the gate strings and score bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for e in &self.entries {
            e.sequence.ids().for_each(&mut eat);
            e.score.to_bits().to_le_bytes().into_iter().for_each(&mut eat);
        }
        h
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let alphabet = self.entries.first().map_or(Alphabet::Pauli, |e| e.sequence.alphabet());
        let pairs: Vec<(GateSequence, f64)> = self.entries.iter().map(|e| (e.sequence.clone(), e.score)).collect();
        write_scored_sequences(out, alphabet, Kind::Half, &pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomically(path.as_ref(), |w| self.write(w))
    }

    /// Loads a scored sequence file.
    pub fn load(path: impl AsRef<Path>, generation: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let parsed = read_sequences(BufReader::new(file))?;
        if parsed.kind != Kind::Half {
            return Err(Error::Kind(format!("{}: datasets hold half sequences", path.display())));
        }
        if parsed.scores.len() != parsed.sequences.len() {
            return Err(Error::InvalidArgument(format!("{}: dataset file lacks scores", path.display())));
        }
        let entries = parsed.sequences.into_iter().zip(parsed.scores).map(|(sequence, score)| ScoredSequence { sequence, score }).collect();
        Self::new(entries, generation, path.display().to_string())
    }
}

/// Keeps the best `ceil(p% · |data|)` entries and returns their average score.
pub fn keep_best_data(data: &Dataset, percent: f64) -> Result<(Dataset, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset".into()));
    }
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidArgument(format!("keep percentage {percent} outside (0, 100]")));
    }
    let kept = data.truncate(keep_count(data.len(), percent));
    let avg = kept.average().expect("at least one entry kept");
    Ok((kept, avg))
}

fn keep_count(n: usize, percent: f64) -> usize {
    // Round before ceil so that e.g. 10% of 1000 is exactly 100.
    let raw = n as f64 * percent / 100.0;
    (((raw * 1e9).round() / 1e9).ceil() as usize).clamp(1, n)
}

/// Which generative model the loop uses.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Lstm,
    Ngram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Sequences generated per generation (`d`).
    pub data_size: usize,
    /// Percentage of data kept as training set (`p`).
    pub keep_percent: f64,
    /// Models trained for the initial pool (`n`).
    pub initial_models: usize,
    /// Models kept from the pool (`k`).
    pub kept_models: usize,
    pub half_length: usize,
    /// Pulse width `τ_d`.
    pub tau: f64,
    /// `pauli`, or `customN` for `N` random involution gates.
    pub alphabet: Alphabet,
    /// Seed of the random gates for custom alphabets.
    pub gate_seed: u64,
    pub max_generations: usize,
    /// Stop once the relative improvement of the average score over
    /// `window` generations falls below this.
    pub tolerance: f64,
    pub window: usize,
    /// Merge new samples with the previous training set.
    pub reuse_data: bool,
    /// Re-initialise weights before every generation's training.
    pub retrain_from_scratch: bool,
    pub epochs: usize,
    pub eval_every: usize,
    pub eval_samples: usize,
    pub patience: usize,
    pub truncation: usize,
    pub model: ModelChoice,
    pub ngram_order: usize,
    pub architecture: ArchitectureSpace,
    pub seed: u64,
    /// Cap on worker threads; all cores when absent.
    pub threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Preset {
    E1,
    E2,
    E3,
    E4,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Ok(Preset::E1),
            "E2" => Ok(Preset::E2),
            "E3" => Ok(Preset::E3),
            "E4" => Ok(Preset::E4),
            _ => Err(Error::InvalidArgument(format!("unknown preset `{s}` (expected E1..E4)"))),
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let e1 = RunConfig {
            data_size: 10_000,
            keep_percent: 10.0,
            initial_models: 30,
            kept_models: 5,
            half_length: 16,
            tau: 0.002,
            alphabet: Alphabet::Pauli,
            gate_seed: 0,
            max_generations: 30,
            tolerance: 1e-3,
            window: 3,
            reuse_data: true,
            retrain_from_scratch: false,
            epochs: 100,
            eval_every: 5,
            eval_samples: 200,
            patience: 4,
            truncation: 32,
            model: ModelChoice::Lstm,
            ngram_order: 5,
            architecture: ArchitectureSpace::full(),
            seed: 1,
            threads: None,
        };
        match p {
            Preset::E1 => e1,
            Preset::E2 => RunConfig { half_length: 32, tau: 0.004, initial_models: 50, ..e1 },
            Preset::E3 => RunConfig { half_length: 64, tau: 0.004, data_size: 20_000, epochs: 200, max_generations: 100, ..e1 },
            Preset::E4 => RunConfig { alphabet: Alphabet::Custom(10), gate_seed: 4, ..e1 },
        }
    }

    /// Shrinks data, pool and networks to laptop size; physics is untouched.
    pub fn desk_scale(self) -> Self {
        RunConfig {
            data_size: 1_000,
            initial_models: 6,
            kept_models: 2,
            epochs: self.epochs.min(60),
            architecture: ArchitectureSpace::desk(),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.data_size == 0 {
            return fail("data_size must be positive");
        }
        if !(self.keep_percent > 0.0 && self.keep_percent <= 100.0) {
            return fail("keep_percent must lie in (0, 100]");
        }
        if self.kept_models == 0 || self.kept_models > self.initial_models {
            return fail("kept_models must lie in 1..=initial_models");
        }
        if self.half_length == 0 {
            return fail("half_length must be positive");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail("tau must be positive");
        }
        if self.window == 0 {
            return fail("window must be positive");
        }
        if self.eval_every == 0 || self.eval_samples == 0 || self.truncation == 0 {
            return fail("eval_every, eval_samples and truncation must be positive");
        }
        if self.model == ModelChoice::Ngram && self.ngram_order < 2 {
            return fail("ngram_order must be at least 2");
        }
        if self.threads == Some(0) {
            return fail("threads must be positive");
        }
        Ok(())
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            eval_every: self.eval_every,
            eval_samples: self.eval_samples,
            patience: self.patience,
            truncation: self.truncation,
            sample_length: self.half_length,
        }
    }

    /// Size of the training set in data-reuse mode.
    pub fn training_set_size(&self) -> usize {
        keep_count(self.data_size, self.keep_percent)
    }

    pub fn gate_set(&self) -> Result<GateSet> {
        match self.alphabet {
            Alphabet::Pauli => Ok(GateSet::pauli()),
            Alphabet::Custom(n) => GateSet::random_involutions(n as usize, self.gate_seed),
        }
    }
}

/// Statistics of one generation's training set.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    pub avg_score: f64,
    pub min_score: f64,
    pub dataset_size: usize,
    pub dataset_hash: u64,
    /// Average generated score of each pool model (`None`: dropped this generation).
    pub model_avgs: Vec<Option<f64>>,
}

impl GenerationLog {
    fn of(generation: usize, data: &Dataset, model_avgs: Vec<Option<f64>>) -> Self {
        GenerationLog {
            generation,
            avg_score: data.average().unwrap_or(f64::NAN),
            min_score: data.min().unwrap_or(f64::NAN),
            dataset_size: data.len(),
            dataset_hash: data.fingerprint(),
            model_avgs,
        }
    }

    pub fn csv_header(models: usize) -> String {
        let mut h = "generation,avg,min,dataset_size,dataset_hash".to_string();
        for i in 0..models {
            write!(h, ",model_{i}").unwrap();
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!(
            "{},{:e},{:e},{},{:016x}",
            self.generation, self.avg_score, self.min_score, self.dataset_size, self.dataset_hash
        );
        for m in &self.model_avgs {
            match m {
                Some(v) => write!(r, ",{v:e}").unwrap(),
                None => r.push(','),
            }
        }
        r
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let bad = |m: &str| Error::parse(2, format!("{m} in `{line}`"));
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() < 5 {
            return Err(bad("too few columns"));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        Ok(GenerationLog {
            generation: fields[0].parse().map_err(|_| bad("bad generation"))?,
            avg_score: float(fields[1])?,
            min_score: float(fields[2])?,
            dataset_size: fields[3].parse().map_err(|_| bad("bad size"))?,
            dataset_hash: u64::from_str_radix(fields[4], 16).map_err(|_| bad("bad hash"))?,
            model_avgs: fields[5..]
                .iter()
                .map(|s| if s.is_empty() { Ok(None) } else { float(s).map(Some) })
                .collect::<Result<_>>()?,
        })
    }
}

/// A pool model and its latest average generated score.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    /// Position in the initial pool; fixes the model's seed streams.
    pub id: usize,
    pub model: SequenceModel,
    pub avg_score: f64,
}

/// `d` uniform random half sequences, scored and deduplicated.
pub fn generate_random_data<S: Scorer + ?Sized>(cfg: &RunConfig, scorer: &S) -> Result<Dataset> {
    let mut rng = rng_from(cfg.seed, &[STREAM_RANDOM_DATA]);
    let seqs = (0..cfg.data_size)
        .map(|_| random_sequence(cfg.half_length, cfg.alphabet, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Dataset::score(seqs, scorer, 0, "random")
}

fn model_average<S: Scorer + ?Sized>(model: &SequenceModel, cfg: &RunConfig, scorer: &S, seed: u64) -> Result<f64> {
    match model {
        SequenceModel::Network(m) => generated_average(m, scorer, cfg.eval_samples, cfg.half_length, seed),
        SequenceModel::NGram(_) => {
            let mut rng = rng_from(seed, &[]);
            let samples = (0..cfg.eval_samples).map(|_| model.sample(cfg.half_length, &mut rng)).collect::<Result<Vec<_>>>()?;
            let scores = scorer.score_halves(&samples)?;
            Ok(scores.iter().sum::<f64>() / scores.len() as f64)
        }
    }
}

/// Trains (or refits) one model on `data`. Returns `None` if training diverged.
fn fit<S: Scorer + ?Sized>(
    entry: &mut PoolEntry,
    data: &Dataset,
    cfg: &RunConfig,
    scorer: &S,
    generation: usize,
) -> Result<Option<f64>> {
    let train_seed = derive_seed(cfg.seed, &[STREAM_TRAIN, generation as u64, entry.id as u64]);
    let seqs = data.sequences();
    let avg = match &mut entry.model {
        SequenceModel::Network(m) => {
            if cfg.retrain_from_scratch && generation > 0 {
                **m = m.reinitialized()?;
            }
            let report = train_model(m, &seqs, scorer, &cfg.train_options(), train_seed)?;
            if report.diverged {
                log::warn!("model {} diverged in generation {generation}", entry.id);
                return Ok(None);
            }
            report.best_avg_score
        }
        SequenceModel::NGram(m) => {
            *m = NGramModel::fit(&seqs, cfg.ngram_order)?;
            model_average(&entry.model, cfg, scorer, derive_seed(train_seed, &[STREAM_EVAL]))?
        }
    };
    entry.avg_score = avg;
    Ok(Some(avg))
}

fn new_network(cfg: &RunConfig, id: usize, attempt: u64) -> Result<SequenceModel> {
    let mut rng = rng_from(cfg.seed, &[STREAM_ARCHITECTURE, id as u64, attempt]);
    let (specs, hyper) = sample_architecture(&cfg.architecture, &mut rng)?;
    let seed = derive_seed(cfg.seed, &[STREAM_WEIGHTS, id as u64, attempt]);
    Ok(SequenceModel::Network(Box::new(NetworkModel::new(cfg.alphabet, &specs, hyper, seed)?)))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trains `n` freshly sampled architectures on `data` and keeps the `k` with
/// the lowest average generated score. A model that diverges is replaced by a
/// new architecture (up to three attempts) and then dropped.
pub fn train_initial_pool<S: Scorer + ?Sized>(cfg: &RunConfig, data: &Dataset, scorer: &S) -> Result<Vec<PoolEntry>> {
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if cfg.model == ModelChoice::Ngram {
        // Refitting is deterministic, so one n-gram stands in for the whole pool.
        let mut entry = PoolEntry {
            id: 0,
            model: SequenceModel::NGram(NGramModel::fit(&data.sequences(), cfg.ngram_order)?),
            avg_score: f64::INFINITY,
        };
        fit(&mut entry, data, cfg, scorer, 0)?;
        return Ok(vec![entry]);
    }
    const ATTEMPTS: u64 = 3;
    let trained: Vec<Result<Option<PoolEntry>>> = (0..cfg.initial_models)
        .into_par_iter()
        .map(|id| {
            for attempt in 0..ATTEMPTS {
                let mut entry = PoolEntry { id, model: new_network(cfg, id, attempt)?, avg_score: f64::INFINITY };
                if fit(&mut entry, data, cfg, scorer, 0)?.is_some() {
                    log::info!("pool model {id}: {} avg {:.6}", entry.model.describe(), entry.avg_score);
                    return Ok(Some(entry));
                }
            }
            log::warn!("pool model {id} diverged {ATTEMPTS} times; discarded");
            Ok(None)
        })
        .collect();
    let mut pool: Vec<PoolEntry> = trained.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    if pool.is_empty() {
        return Err(Error::NonFinite("every model in the initial pool diverged".into()));
    }
    pool.sort_by(|a, b| a.avg_score.total_cmp(&b.avg_score).then(a.id.cmp(&b.id)));
    pool.truncate(cfg.kept_models);
    Ok(pool)
}

/// Per-model sample counts: `d / k` each, the remainder spread one apiece.
pub fn contributions(total: usize, models: usize) -> Vec<usize> {
    (0..models).map(|j| total / models + usize::from(j < total % models)).collect()
}

/// One loop iteration: retrain every pool model on `data`, let each contribute
/// an equal share of `d` new sequences, and build the next training set.
pub fn generation_step<S: Scorer + ?Sized>(
    cfg: &RunConfig,
    pool: &mut [PoolEntry],
    data: &Dataset,
    scorer: &S,
    generation: usize,
) -> Result<(Dataset, GenerationLog)> {
    if pool.is_empty() {
        return Err(Error::Empty("model pool".into()));
    }
    let avgs: Vec<Option<f64>> = pool
        .par_iter_mut()
        .map(|entry| fit(entry, data, cfg, scorer, generation))
        .collect::<Result<_>>()?;
    let active: Vec<&PoolEntry> = pool.iter().zip(&avgs).filter(|(_, a)| a.is_some()).map(|(e, _)| e).collect();
    if active.is_empty() {
        return Err(Error::NonFinite(format!("every model diverged in generation {generation}")));
    }
    let counts = contributions(cfg.data_size, active.len());
    let mut samples = Vec::with_capacity(cfg.data_size);
    for (entry, &count) in active.iter().zip(&counts) {
        let mut rng = rng_from(cfg.seed, &[STREAM_SAMPLE, generation as u64, entry.id as u64]);
        for _ in 0..count {
            samples.push(entry.model.sample(cfg.half_length, &mut rng)?);
        }
    }
    let fresh = Dataset::score(samples, scorer, generation, format!("gen{generation}"))?;
    let next = if cfg.reuse_data {
        // Fixed-size truncation of the union keeps every previous entry that
        // is still among the best, so average and minimum cannot increase.
        let merged = data.merge(&fresh, generation)?;
        let next = merged.truncate(data.len());
        assert!(next.average() <= data.average() && next.min() <= data.min(), "merge-and-truncate must not worsen the training set");
        next
    } else {
        keep_best_data(&fresh, cfg.keep_percent)?.0
    };
    let mut next = next;
    next.generation = generation;
    let log = GenerationLog::of(generation, &next, avgs);
    Ok((next, log))
}

/// Samples `d` half sequences of `cfg.half_length` from `model` and scores them.
pub fn bootstrap_from_model<S: Scorer + ?Sized>(model: &SequenceModel, cfg: &RunConfig, scorer: &S) -> Result<Dataset> {
    if model.alphabet() != cfg.alphabet {
        return Err(Error::Shape(format!("model alphabet {} differs from run alphabet {}", model.alphabet(), cfg.alphabet)));
    }
    let mut rng = rng_from(cfg.seed, &[STREAM_BOOTSTRAP]);
    let seqs = (0..cfg.data_size).map(|_| model.sample(cfg.half_length, &mut rng)).collect::<Result<Vec<_>>>()?;
    Dataset::score(seqs, scorer, 0, "bootstrap")
}

/// True once the average score improved by less than `tolerance` (relative)
/// over the last `window` generations.
pub fn converged(logs: &[GenerationLog], window: usize, tolerance: f64) -> bool {
    if logs.len() <= window {
        return false;
    }
    let now = logs[logs.len() - 1].avg_score;
    let then = logs[logs.len() - 1 - window].avg_score;
    if then <= 0.0 {
        return true;
    }
    (then - now) / then < tolerance
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Training set after the last generation.
    pub data: Dataset,
    /// The training set the final models were fitted on.
    pub model_training_set: Dataset,
    /// The initial random data before truncation.
    pub initial_data: Dataset,
    pub logs: Vec<GenerationLog>,
    pub models: Vec<PoolEntry>,
}

/// Where and how a run persists its generations.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Start from this data instead of uniform random sequences.
    pub initial_data: Option<Dataset>,
}

/// Runs the loop to convergence or `max_generations` and returns the final
/// training set, per-generation logs and the model pool.
pub fn run(cfg: &RunConfig, noise: &NoiseInstance, opts: &RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    let evaluator = Evaluator::new(noise.clone(), cfg.gate_set()?, cfg.tau)?;
    let cfg = cfg.clone();
    let opts = opts.clone();
    with_threads(cfg.threads, move || run_with(&cfg, &evaluator, noise, &opts))?
}

fn run_with(cfg: &RunConfig, evaluator: &Evaluator, noise: &NoiseInstance, opts: &RunOptions) -> Result<RunResult> {
    let store = opts.out_dir.as_deref().map(RunStore::create).transpose()?;
    if let Some(s) = &store {
        s.write_manifest(cfg, noise)?;
    }
    let initial = match &opts.initial_data {
        Some(d) => d.clone(),
        None => generate_random_data(cfg, evaluator)?,
    };
    if let Some(s) = &store {
        initial.save(s.dir.join("initial_data.txt"))?;
    }
    let (mut data, _) = if cfg.reuse_data {
        let kept = initial.truncate(cfg.training_set_size());
        let avg = kept.average().ok_or_else(|| Error::Empty("initial data".into()))?;
        (kept, avg)
    } else {
        keep_best_data(&initial, cfg.keep_percent)?
    };
    let mut pool = train_initial_pool(cfg, &data, evaluator)?;
    let mut logs = vec![GenerationLog::of(0, &data, pool.iter().map(|e| Some(e.avg_score)).collect())];
    log_generation(&logs[0]);
    if let Some(s) = &store {
        s.save_generation(&data, &logs[0], &pool)?;
    }
    let mut model_training_set = data.clone();
    continue_run(cfg, evaluator, store.as_ref(), &mut data, &mut model_training_set, &mut pool, &mut logs)?;
    Ok(RunResult { data, model_training_set, initial_data: initial, logs, models: pool })
}

fn continue_run(
    cfg: &RunConfig,
    evaluator: &Evaluator,
    store: Option<&RunStore>,
    data: &mut Dataset,
    model_training_set: &mut Dataset,
    pool: &mut [PoolEntry],
    logs: &mut Vec<GenerationLog>,
) -> Result<()> {
    while logs.len() <= cfg.max_generations && !converged(logs, cfg.window, cfg.tolerance) {
        let generation = logs.len();
        let (next, log) = generation_step(cfg, pool, data, evaluator, generation)?;
        log_generation(&log);
        if let Some(s) = store {
            s.save_generation(&next, &log, pool)?;
        }
        *model_training_set = std::mem::replace(data, next);
        logs.push(log);
    }
    Ok(())
}

fn log_generation(log: &GenerationLog) {
    log::info!(
        "generation {}: avg {:.6} min {:.6} ({} sequences)",
        log.generation,
        log.avg_score,
        log.min_score,
        log.dataset_size
    );
}

/// Continues an interrupted run from the last generation whose log was written.
pub fn resume(dir: impl AsRef<Path>) -> Result<RunResult> {
    let store = RunStore { dir: dir.as_ref().to_path_buf() };
    let cfg = store.read_config()?;
    cfg.validate()?;
    let noise = NoiseInstance::load(store.dir.join("noise.txt"))?;
    let evaluator = Evaluator::new(noise, cfg.gate_set()?, cfg.tau)?;
    let mut logs = store.read_logs()?;
    let last = logs.len().checked_sub(1).ok_or_else(|| Error::Empty(format!("{}: no completed generation", store.dir.display())))?;
    let mut data = Dataset::load(store.data_path(last), last)?;
    let mut model_training_set = if last > 0 { Dataset::load(store.data_path(last - 1), last - 1)? } else { data.clone() };
    let initial = Dataset::load(store.dir.join("initial_data.txt"), 0)?;
    let mut pool = Vec::new();
    for (i, _) in logs[0].model_avgs.iter().enumerate() {
        let path = store.model_path(last, i);
        let model = load_model(&path)?;
        let id = store.read_model_id(last, i)?;
        let avg = logs[last].model_avgs.get(i).copied().flatten().unwrap_or(f64::INFINITY);
        pool.push(PoolEntry { id, model, avg_score: avg });
    }
    let threads = cfg.threads;
    with_threads(threads, || {
        continue_run(&cfg, &evaluator, Some(&store), &mut data, &mut model_training_set, &mut pool, &mut logs)
    })??;
    Ok(RunResult { data, model_training_set, initial_data: initial, logs, models: pool })
}

/// Logs of every completed generation in a run directory.
pub fn load_logs(dir: impl AsRef<Path>) -> Result<Vec<GenerationLog>> {
    let store = RunStore { dir: dir.as_ref().to_path_buf() };
    let logs = store.read_logs()?;
    if logs.is_empty() {
        return Err(Error::Empty(format!("{}: no completed generation", store.dir.display())));
    }
    Ok(logs)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    created_unix: u64,
    version: String,
    noise_seed: u64,
    noise_norm: f64,
    config: RunConfig,
}

/// Layout of a run directory.
struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        Ok(RunStore { dir: dir.to_path_buf() })
    }

    fn data_path(&self, g: usize) -> PathBuf {
        self.dir.join(format!("gen_{g}_data.txt"))
    }

    fn log_path(&self, g: usize) -> PathBuf {
        self.dir.join(format!("gen_{g}_log.csv"))
    }

    fn model_path(&self, g: usize, i: usize) -> PathBuf {
        self.dir.join(format!("gen_{g}_model_{i}.ckpt"))
    }

    fn ids_path(&self, g: usize) -> PathBuf {
        self.dir.join(format!("gen_{g}_models.txt"))
    }

    fn write_manifest(&self, cfg: &RunConfig, noise: &NoiseInstance) -> Result<()> {
        noise.save(self.dir.join("noise.txt"))?;
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            created_unix: timestamp,
            version: env!("CARGO_PKG_VERSION").to_string(),
            noise_seed: noise.seed,
            noise_norm: noise.norm2,
            config: cfg.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        let manifest = format!("# ddseq run manifest\n{text}");
        write_atomically(&self.dir.join("manifest.toml"), |w| Ok(w.write_all(manifest.as_bytes())?))
    }

    fn read_config(&self) -> Result<RunConfig> {
        let path = self.dir.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(m.config)
    }

    /// Data, checkpoints and model ids first; the log last marks the generation complete.
    fn save_generation(&self, data: &Dataset, log: &GenerationLog, pool: &[PoolEntry]) -> Result<()> {
        let g = log.generation;
        data.save(self.data_path(g))?;
        let mut ids = String::new();
        for (i, entry) in pool.iter().enumerate() {
            save_model(&entry.model, self.model_path(g, i))?;
            writeln!(ids, "{}", entry.id).unwrap();
        }
        write_atomically(&self.ids_path(g), |w| Ok(w.write_all(ids.as_bytes())?))?;
        let csv = format!("{}\n{}\n", GenerationLog::csv_header(log.model_avgs.len()), log.csv_row());
        write_atomically(&self.log_path(g), |w| Ok(w.write_all(csv.as_bytes())?))
    }

    fn read_log(&self, g: usize) -> Result<GenerationLog> {
        let path = self.log_path(g);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let row = text.lines().nth(1).ok_or_else(|| Error::parse(2, format!("{}: missing row", path.display())))?;
        GenerationLog::parse_csv_row(row)
    }

    fn read_logs(&self) -> Result<Vec<GenerationLog>> {
        let mut logs = Vec::new();
        while self.log_path(logs.len()).exists() {
            logs.push(self.read_log(logs.len())?);
        }
        Ok(logs)
    }

    fn read_model_id(&self, g: usize, i: usize) -> Result<usize> {
        let path = self.ids_path(g);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        text.lines()
            .nth(i)
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::parse(i + 1, format!("{}: bad model id", path.display())))
    }
}

fn write_atomically(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::file(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}
