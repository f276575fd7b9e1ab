//! Desk-scale sequence search: a few generations of the data/model loop on
//! the default instance, written to a run directory with a convergence chart.
//!
//! `cargo run --release --example optimize_desk -- [lstm|ngram] [generations]`

use ddseq::analysis::{convergence_svg, Series};
use ddseq::noise::{generate_noise, NoiseParams};
use ddseq::optimizer::{run, ModelChoice, Preset, RunConfig, RunOptions};
use ddseq::Result;

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let model = args.next().unwrap_or_else(|| "lstm".into());
    let generations: usize = args.next().map_or(5, |a| a.parse().expect("generations"));

    let mut cfg = RunConfig { max_generations: generations, ..RunConfig::preset(Preset::E1).desk_scale() };
    if model == "ngram" {
        cfg.model = ModelChoice::Ngram;
        cfg.ngram_order = 5;
    }
    let noise = generate_noise(&NoiseParams::default())?;
    let dir = std::env::temp_dir().join(format!("ddseq-desk-{model}"));
    let result = run(&cfg, &noise, &RunOptions { out_dir: Some(dir.clone()), initial_data: None })?;

    println!("random data: avg {:.6} min {:.6}", result.initial_data.average().unwrap(), result.initial_data.min().unwrap());
    for l in &result.logs {
        println!("gen {:>2}: avg {:.6} min {:.6}", l.generation, l.avg_score, l.min_score);
    }
    let best = &result.data.entries()[0];
    println!("best {} {:.3e}", best.sequence, best.score);
    let svg = convergence_svg(&[Series { label: &model, logs: &result.logs }], &[("EDD8", 1.4e-4)])?;
    std::fs::write(dir.join("convergence.svg"), svg)?;
    println!("run written to {}", dir.display());
    Ok(())
}
