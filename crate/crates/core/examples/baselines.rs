//! Baseline table of the decoupling families and random sequences at a
//! given full length and pulse width.
//!
//! `cargo run --release --example baselines -- 64 0.004`

use ddseq::analysis::{baseline_report, default_families};
use ddseq::evolution::Evaluator;
use ddseq::noise::{generate_noise, GateSet, NoiseParams};
use ddseq::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let length: usize = args.next().map_or(32, |a| a.parse().expect("length"));
    let tau: f64 = args.next().map_or(0.002, |a| a.parse().expect("tau"));
    let evaluator = Evaluator::new(generate_noise(&NoiseParams::default())?, GateSet::pauli(), tau)?;
    let report = baseline_report(&evaluator, length, &default_families(length), 1000, 1)?;
    print!("{}", report.to_text());
    Ok(())
}
