//! Print a complete `optimize --config` file for a preset.
//!
//! `cargo run --example run_config -- E2 > e2.toml`

use ddseq::cli::{CliConfig, NoiseSection};
use ddseq::optimizer::{Preset, RunConfig};
use ddseq::Result;

fn main() -> Result<()> {
    let preset: Preset = std::env::args().nth(1).as_deref().unwrap_or("E1").parse()?;
    let run = RunConfig::preset(preset);
    let config = CliConfig {
        output: format!("runs/{preset:?}").to_lowercase().into(),
        noise: NoiseSection {
            dim_bath: 16,
            seed: 7,
            coupling_min: 1.0,
            coupling_max: 3.0,
            bath_suppression: 1000.0,
            target_norm: Some(20.4),
        },
        run,
    };
    print!("{}", toml::to_string(&config).map_err(|e| ddseq::Error::Config(e.to_string()))?);
    Ok(())
}
