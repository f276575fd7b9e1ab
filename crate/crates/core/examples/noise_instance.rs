//! Draw a seeded system–bath Hamiltonian, save it and load it back.
//!
//! `cargo run --example noise_instance -- 128` uses the 7-qubit bath.

use ddseq::noise::{generate_noise, NoiseInstance, NoiseParams};
use ddseq::Result;

fn main() -> Result<()> {
    let dim_bath: usize = std::env::args().nth(1).map_or(16, |a| a.parse().expect("bath dimension"));
    let params = NoiseParams { seed: 7, ..NoiseParams::for_bath(dim_bath) };
    let noise = generate_noise(&params)?;
    println!("dim {} ({}×{}), {} coefficients, ‖H0‖₂ = {:.4}", noise.dim(), noise.dim_s, noise.dim_b, noise.coeffs.len(), noise.norm2);
    for c in noise.coeffs.iter().take(5) {
        println!("  σ{} ⊗ σ{}_{} σ{}_{}: {:+.4}", c.mu, c.alpha, c.i, c.beta, c.j, c.value);
    }

    let dir = std::env::temp_dir().join("ddseq-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("noise_{dim_bath}.txt"));
    noise.save(&path)?;
    let back = NoiseInstance::load(&path)?;
    assert_eq!(back.h0, noise.h0);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
