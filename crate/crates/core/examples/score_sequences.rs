//! Evolve and score sequences on the default instance: a decoupling family
//! against uniform random sequences, plus the zeroth-order average
//! Hamiltonian of XY4.

use ddseq::evolution::{average_hamiltonian_0, system_traceless_part, Evaluator};
use ddseq::noise::{generate_noise, GateSet, NoiseParams};
use ddseq::rng::rng_from;
use ddseq::sequences::{make_family, random_sequence, Alphabet, Family, GateSequence};
use ddseq::Result;

fn main() -> Result<()> {
    let noise = generate_noise(&NoiseParams::default())?;
    let h0 = noise.h0.clone();
    let evaluator = Evaluator::new(noise, GateSet::pauli(), 0.002)?;

    // EDD8 members repeated twice fill a half of 16 gates.
    let edd8: Vec<GateSequence> = make_family(Family::Edd8, None)?.iter().map(|m| m.repeat(2)).collect::<Result<_>>()?;
    let scores = evaluator.score_batch(&edd8)?;
    for (s, v) in edd8.iter().zip(&scores) {
        println!("EDD8 {s}  {v:.6}");
    }

    let mut rng = rng_from(1, &[]);
    let random: Vec<GateSequence> = (0..500).map(|_| random_sequence(16, Alphabet::Pauli, &mut rng)).collect::<Result<_>>()?;
    let r = evaluator.score_batch(&random)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("EDD8 mean {:.6}, random mean {:.6}", mean(&scores), mean(&r));

    let avg = average_hamiltonian_0(&GateSequence::pauli("XYXY"), &GateSet::pauli(), &h0, 16)?;
    println!("XY4: ‖traceless part of H̄⁽⁰⁾‖ = {:.2e}", system_traceless_part(&avg, 2, 16).norm());
    Ok(())
}
