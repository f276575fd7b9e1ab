//! The `ddseq` command line.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 when input data or
//! configuration is invalid or a computation fails.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    baseline_report, convergence_svg, default_families, replay_best_sequences, subsequence_frequencies, Series,
    BEST_SEQUENCES,
};
use crate::error::{Error, Result};
use crate::evolution::{score, Evaluator};
use crate::models::load_model;
use crate::noise::{generate_noise, GateSet, NoiseInstance, NoiseParams};
use crate::optimizer::{
    bootstrap_from_model, load_logs, resume, run, ModelChoice, Preset, RunConfig, RunOptions, RunResult,
};
use crate::rng::Rng;
use crate::sequences::{read_sequences, Alphabet, Family, GateSequence, Kind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ddseq", version, about = "Simulate, score and search dynamical-decoupling sequences")]
pub struct Cli {
    /// Cap on worker threads for scoring and training.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a random system–bath Hamiltonian and write it to a file.
    GenHamiltonian(GenHamiltonianArgs),
    /// Score the sequences in a sequence file.
    Score(ScoreArgs),
    /// Score the standard decoupling families and random sequences.
    Baselines(BaselinesArgs),
    /// Run the model-driven sequence search.
    Optimize(Box<OptimizeArgs>),
    /// Subsequence frequency tables of a sequence file.
    Analyze(AnalyzeArgs),
    /// Score the stored best sequences next to the family baselines.
    Replay(ReplayArgs),
    /// Convergence chart of one or more run directories.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct GenHamiltonianArgs {
    #[arg(long, default_value_t = 16)]
    pub dim_bath: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Operator 2-norm after rescaling [default: 20.4 for a 16-dim bath, 24.0 for 128].
    #[arg(long)]
    pub target_norm: Option<f64>,
    /// Keep the raw coefficient scale.
    #[arg(long, conflicts_with = "target_norm")]
    pub no_rescale: bool,
    #[arg(long, default_value_t = 1.0)]
    pub coupling_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub coupling_max: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub suppression: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the noise Hamiltonian comes from.
#[derive(Args, Debug, Clone)]
pub struct NoiseArgs {
    /// Noise file written by `gen-hamiltonian`.
    #[arg(long, conflicts_with_all = ["noise_seed", "dim_bath", "zero_noise"])]
    pub noise: Option<PathBuf>,
    /// Seed of a freshly generated default instance.
    #[arg(long, default_value_t = 7)]
    pub noise_seed: u64,
    #[arg(long, default_value_t = 16)]
    pub dim_bath: usize,
    /// Use H0 = 0.
    #[arg(long)]
    pub zero_noise: bool,
}

impl NoiseArgs {
    fn instance(&self) -> Result<NoiseInstance> {
        if let Some(p) = &self.noise {
            return NoiseInstance::load(p);
        }
        if self.zero_noise {
            return NoiseInstance::zero(self.dim_bath);
        }
        generate_noise(&NoiseParams { seed: self.noise_seed, ..NoiseParams::for_bath(self.dim_bath) })
    }
}

#[derive(Args, Debug, Clone)]
pub struct GateArgs {
    /// `pauli` or `customN` (N random involutions).
    #[arg(long, default_value = "pauli")]
    pub gates: Alphabet,
    #[arg(long, default_value_t = 4)]
    pub gate_seed: u64,
}

impl GateArgs {
    fn gate_set(&self) -> Result<GateSet> {
        match self.gates {
            Alphabet::Pauli => Ok(GateSet::pauli()),
            Alphabet::Custom(n) => GateSet::random_involutions(n as usize, self.gate_seed),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Sequence file (half or full, as declared in its header).
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.002)]
    pub tau: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub gates: GateArgs,
}

#[derive(Args, Debug)]
pub struct BaselinesArgs {
    /// Full sequence length.
    #[arg(long, default_value_t = 32)]
    pub length: usize,
    #[arg(long, default_value_t = 0.002)]
    pub tau: f64,
    /// Families to include [default: all that fit the length].
    #[arg(long, value_delimiter = ',')]
    pub families: Vec<Family>,
    /// Uniform random sequences in the reference row.
    #[arg(long, default_value_t = 1000)]
    pub random: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Experiment preset.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<Preset>,
    /// TOML file with `output`, `[noise]` and `[run]` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shrink data, pool and networks to desk size.
    #[arg(long)]
    pub desk_scale: bool,
    /// Build each training set from fresh samples only.
    #[arg(long)]
    pub no_reuse: bool,
    /// Replace the networks by an n-gram of this order.
    #[arg(long)]
    pub ngram: Option<usize>,
    /// Re-initialise network weights every generation.
    #[arg(long)]
    pub from_scratch: bool,
    #[arg(long)]
    pub max_generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed the initial data with samples from this checkpoint.
    #[arg(long)]
    pub bootstrap: Option<PathBuf>,
    /// Continue the run stored in this directory.
    #[arg(long, conflicts_with_all = ["preset", "config", "bootstrap"])]
    pub resume: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Sequence file (e.g. a generation's data file).
    pub input: PathBuf,
    /// Window length, 2 or 3.
    #[arg(long, default_value_t = 2)]
    pub subseq: usize,
    /// Only count windows starting with this gate.
    #[arg(long)]
    pub prefix: Option<char>,
    /// Second sequence file shown in parentheses.
    #[arg(long, conflicts_with = "model")]
    pub compare: Option<PathBuf>,
    /// Checkpoint to sample the comparison sequences from.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// E1, E2, E3 or all.
    #[arg(long, default_value = "all")]
    pub which: String,
    /// Pulse width [default: 0.002 for E1, 0.004 for E2/E3].
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Run directories; each becomes one pair of curves.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Horizontal reference line, e.g. `EDD8=0.00015`.
    #[arg(long)]
    pub reference: Vec<String>,
}

/// Contents of an `optimize --config` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub output: PathBuf,
    pub noise: NoiseSection,
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub dim_bath: usize,
    pub seed: u64,
    pub coupling_min: f64,
    pub coupling_max: f64,
    pub bath_suppression: f64,
    pub target_norm: Option<f64>,
}

impl NoiseSection {
    pub fn params(&self) -> NoiseParams {
        NoiseParams {
            dim_bath: self.dim_bath,
            seed: self.seed,
            coupling_range: (self.coupling_min, self.coupling_max),
            bath_suppression: self.bath_suppression,
            target_norm: self.target_norm,
        }
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(Error::Config("--threads must be positive".into()));
    }
    let go = |out: &mut dyn Write| match cli.command {
        Command::GenHamiltonian(a) => gen_hamiltonian(a, out),
        Command::Score(a) => score_file(a, out),
        Command::Baselines(a) => baselines(a, out),
        Command::Optimize(a) => optimize(*a, threads, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Replay(a) => replay(a, out),
        Command::Plot(a) => plot(a, out),
    };
    match threads {
        None => go(out),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            // The writer is not Send; run on the pool and only hand it back results.
            let mut buf = Vec::new();
            let r = pool.install(|| go(&mut buf));
            out.write_all(&buf)?;
            r
        }
    }
}

fn gen_hamiltonian(a: GenHamiltonianArgs, out: &mut dyn Write) -> Result<()> {
    let defaults = NoiseParams::for_bath(a.dim_bath);
    let params = NoiseParams {
        dim_bath: a.dim_bath,
        seed: a.seed,
        coupling_range: (a.coupling_min, a.coupling_max),
        bath_suppression: a.suppression,
        target_norm: if a.no_rescale { None } else { a.target_norm.or(defaults.target_norm) },
    };
    let noise = generate_noise(&params)?;
    noise.save(&a.out)?;
    writeln!(out, "wrote {} (dim_bath {}, seed {}, norm {:.6})", a.out.display(), noise.dim_b, noise.seed, noise.norm2)?;
    Ok(())
}

fn read_sequence_file(path: &Path) -> Result<crate::sequences::SequenceFile> {
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let parsed = read_sequences(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })?;
    if parsed.sequences.is_empty() {
        return Err(Error::Empty(format!("{} contains no sequences", path.display())));
    }
    Ok(parsed)
}

fn score_file(a: ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let file = read_sequence_file(&a.input)?;
    let gates = a.gates.gate_set()?;
    if gates.alphabet != file.alphabet {
        return Err(Error::Shape(format!("file alphabet {} differs from --gates {}", file.alphabet, gates.alphabet)));
    }
    let noise = a.noise.instance()?;
    let (dim_s, dim_b) = (noise.dim_s, noise.dim_b);
    let evaluator = Evaluator::new(noise, gates, a.tau)?;
    let scores = match file.kind {
        Kind::Half => evaluator.score_batch(&file.sequences)?,
        Kind::Full => file
            .sequences
            .iter()
            .map(|s| score(&evaluator.evolve(s)?.u, dim_s, dim_b))
            .collect::<Result<Vec<_>>>()?,
    };
    writeln!(out, "sequence,score")?;
    for (s, v) in file.sequences.iter().zip(scores) {
        writeln!(out, "{},{v:.11e}", s.symbols())?;
    }
    Ok(())
}

fn baselines(a: BaselinesArgs, out: &mut dyn Write) -> Result<()> {
    let noise = a.noise.instance()?;
    let evaluator = Evaluator::new(noise, GateSet::pauli(), a.tau)?;
    let families = if a.families.is_empty() { default_families(a.length) } else { a.families.clone() };
    let report = baseline_report(&evaluator, a.length, &families, a.random, a.seed)?;
    match a.format {
        Format::Csv => out.write_all(report.to_csv().as_bytes())?,
        Format::Text => out.write_all(report.to_text().as_bytes())?,
    }
    Ok(())
}

/// Builds the run configuration, noise instance and output directory from
/// the optimize flags.
pub fn resolve_optimize(a: &OptimizeArgs, threads: Option<usize>) -> Result<(RunConfig, NoiseInstance, PathBuf)> {
    let (mut cfg, noise, dir) = match &a.config {
        Some(path) => {
            let c = CliConfig::load(path)?;
            let noise = generate_noise(&c.noise.params())?;
            (c.run, noise, a.out.clone().unwrap_or(c.output))
        }
        None => {
            let cfg = RunConfig::preset(a.preset.unwrap_or(Preset::E1));
            let dir = a.out.clone().ok_or_else(|| Error::Config("--out is required without --config".into()))?;
            (cfg, a.noise.instance()?, dir)
        }
    };
    if a.desk_scale {
        cfg = cfg.desk_scale();
    }
    if a.no_reuse {
        cfg.reuse_data = false;
    }
    if let Some(n) = a.ngram {
        cfg.model = ModelChoice::Ngram;
        cfg.ngram_order = n;
    }
    if a.from_scratch {
        cfg.retrain_from_scratch = true;
    }
    if let Some(g) = a.max_generations {
        cfg.max_generations = g;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok((cfg, noise, dir))
}

fn optimize(a: OptimizeArgs, threads: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let (dir, result) = if let Some(dir) = &a.resume {
        (dir.clone(), resume(dir)?)
    } else {
        let (cfg, noise, dir) = resolve_optimize(&a, threads)?;
        let initial_data = match &a.bootstrap {
            Some(ckpt) => {
                let model = load_model(ckpt)?;
                let evaluator = Evaluator::new(noise.clone(), cfg.gate_set()?, cfg.tau)?;
                Some(bootstrap_from_model(&model, &cfg, &evaluator)?)
            }
            None => None,
        };
        let result = run(&cfg, &noise, &RunOptions { out_dir: Some(dir.clone()), initial_data })?;
        (dir, result)
    };
    write_summary(&result, out)?;
    let svg = convergence_svg(&[Series { label: "run", logs: &result.logs }], &[])?;
    fs::write(dir.join("convergence.svg"), svg).map_err(|e| Error::file(dir.join("convergence.svg"), e))?;
    writeln!(out, "results in {}", dir.display())?;
    Ok(())
}

fn write_summary(r: &RunResult, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "generation,avg,min,dataset_size")?;
    for l in &r.logs {
        writeln!(out, "{},{:.6},{:.6},{}", l.generation, l.avg_score, l.min_score, l.dataset_size)?;
    }
    if let Some(best) = r.data.entries().first() {
        writeln!(out, "best {} {:.6e}", best.sequence, best.score)?;
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let file = read_sequence_file(&a.input)?;
    let prefix = a
        .prefix
        .map(|c| file.alphabet.parse_symbol(c).ok_or_else(|| Error::InvalidArgument(format!("`{c}` is not a gate of {}", file.alphabet))))
        .transpose()?;
    let halves = to_halves(&file.sequences, file.kind)?;
    let table = subsequence_frequencies(&halves, a.subseq, prefix)?;
    let other_seqs: Option<Vec<GateSequence>> = match (&a.compare, &a.model) {
        (Some(p), _) => {
            let f = read_sequence_file(p)?;
            Some(to_halves(&f.sequences, f.kind)?)
        }
        (None, Some(p)) => {
            let model = load_model(p)?;
            let len = halves[0].len();
            let mut rng = Rng::seed_from_u64(a.seed);
            Some((0..a.samples).map(|_| model.sample(len, &mut rng)).collect::<Result<_>>()?)
        }
        _ => None,
    };
    let other = other_seqs.map(|s| subsequence_frequencies(&s, a.subseq, prefix)).transpose()?;
    match a.format {
        Format::Text => {
            out.write_all(table.to_text(other.as_ref())?.as_bytes())?;
            writeln!(out, "total {}", table.total)?;
        }
        Format::Csv => out.write_all(table.to_csv().as_bytes())?,
    }
    Ok(())
}

fn to_halves(seqs: &[GateSequence], kind: Kind) -> Result<Vec<GateSequence>> {
    match kind {
        Kind::Half => Ok(seqs.to_vec()),
        Kind::Full => seqs.iter().map(GateSequence::first_half).collect(),
    }
}

fn replay(a: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let which: Vec<&str> = if a.which.eq_ignore_ascii_case("all") {
        BEST_SEQUENCES.iter().map(|(k, _)| *k).collect()
    } else {
        vec![a.which.as_str()]
    };
    let noise = a.noise.instance()?;
    for w in which {
        let tau = a.tau.unwrap_or(if w.eq_ignore_ascii_case("E1") { 0.002 } else { 0.004 });
        let evaluator = Evaluator::new(noise.clone(), GateSet::pauli(), tau)?;
        let rows = replay_best_sequences(&evaluator, &[w])?;
        let full = 2 * rows[0].half.len();
        let report = baseline_report(&evaluator, full, &default_families(full), 0, 0)?;
        writeln!(out, "# {} (length {full}, tau {tau})", rows[0].label)?;
        writeln!(out, "sequences,avg,min,count")?;
        for r in &rows {
            writeln!(out, "best {},{:.6},{:.6},1", r.label, r.score, r.score)?;
        }
        for r in &report.rows {
            writeln!(out, "{},{:.6},{:.6},{}", r.label, r.avg, r.min, r.count)?;
        }
    }
    Ok(())
}

fn plot(a: PlotArgs, out: &mut dyn Write) -> Result<()> {
    let logs = a.runs.iter().map(load_logs).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = a
        .runs
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let series: Vec<Series<'_>> = labels.iter().zip(&logs).map(|(l, g)| Series { label: l, logs: g }).collect();
    let refs = a
        .reference
        .iter()
        .map(|r| {
            let (label, v) = r.split_once('=').ok_or_else(|| Error::InvalidArgument(format!("reference `{r}` is not LABEL=VALUE")))?;
            let v: f64 = v.parse().map_err(|_| Error::InvalidArgument(format!("bad reference value in `{r}`")))?;
            Ok((label, v))
        })
        .collect::<Result<Vec<_>>>()?;
    fs::write(&a.out, convergence_svg(&series, &refs)?).map_err(|e| Error::file(&a.out, e))?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_cli(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = execute(std::iter::once("ddseq").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn missing_out_is_a_usage_error() {
        let (code, _, err) = run_cli(&["gen-hamiltonian", "--dim-bath", "16"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--out"));
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_cli(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let cfg = CliConfig {
            output: "runs/x".into(),
            noise: NoiseSection { dim_bath: 16, seed: 7, coupling_min: 1.0, coupling_max: 3.0, bath_suppression: 1000.0, target_norm: Some(20.4) },
            run: RunConfig::preset(Preset::E1),
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(CliConfig::parse(&text).unwrap(), cfg);
        let bad = text.replacen("dim_bath = 16", "dim_bath = 16\ncolour = 3", 1);
        let e = CliConfig::parse(&bad).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let missing = text.replacen("dim_bath = 16\n", "", 1);
        assert!(CliConfig::parse(&missing).unwrap_err().to_string().contains("dim_bath"));
    }

    #[test]
    fn baselines_on_zero_noise_are_zero() {
        let (code, out, err) = run_cli(&["baselines", "--zero-noise", "--length", "32", "--random", "5"]);
        assert_eq!(code, EXIT_OK, "{err}");
        for line in out.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[1], "0.000000", "{line}");
        }
    }

    #[test]
    fn analyze_empty_file_fails_with_data_code() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.txt");
        fs::write(&p, "#alphabet=pauli kind=half\n").unwrap();
        let (code, _, err) = run_cli(&["analyze", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("no sequences"), "{err}");
    }
}
