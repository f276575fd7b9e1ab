//! Fit an n-gram to a few sequences and sample from it.

use ddseq::models::NGramModel;
use ddseq::rng::rng_from;
use ddseq::sequences::{Alphabet, Gate, GateSequence};
use ddseq::Result;

fn main() -> Result<()> {
    let data: Vec<GateSequence> = ["XYXZ", "XYXY", "XZXY", "YXYX"].iter().map(|s| GateSequence::pauli(s)).collect();
    let model = NGramModel::fit(&data, 3)?;
    for (ctx, counts) in model.contexts() {
        let ctx: String = ctx.iter().map(|&g| Gate::new(g, Alphabet::Pauli).map(|g| Alphabet::Pauli.symbol(g))).collect::<Result<_>>()?;
        println!("{:>3} -> {:?}", if ctx.is_empty() { "-" } else { ctx.as_str() }, counts);
    }
    let mut rng = rng_from(3, &[]);
    for _ in 0..5 {
        println!("{}", model.sample(8, &mut rng)?);
    }
    Ok(())
}
