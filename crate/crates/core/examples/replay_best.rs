//! Score the stored best sequences of the three experiments on the default
//! instance.

use ddseq::analysis::replay_best_sequences;
use ddseq::evolution::Evaluator;
use ddseq::noise::{generate_noise, GateSet, NoiseParams};
use ddseq::Result;

fn main() -> Result<()> {
    let noise = generate_noise(&NoiseParams::default())?;
    for (which, tau) in [("E1", 0.002), ("E2", 0.004), ("E3", 0.004)] {
        let evaluator = Evaluator::new(noise.clone(), GateSet::pauli(), tau)?;
        for row in replay_best_sequences(&evaluator, &[which])? {
            println!("{} (half {}): {:.6}", row.label, row.half.len(), row.score);
        }
    }
    Ok(())
}
