//! Frequency tables of length-2 and length-3 windows in a set of sequences,
//! compared with samples of an n-gram fitted to them.

use ddseq::analysis::subsequence_frequencies;
use ddseq::models::NGramModel;
use ddseq::rng::rng_from;
use ddseq::sequences::{make_family, Family, Gate, GateSequence};
use ddseq::Result;

fn main() -> Result<()> {
    let data: Vec<GateSequence> = make_family(Family::Edd8, None)?.iter().map(|m| m.repeat(2)).collect::<Result<_>>()?;
    let model = NGramModel::fit(&data, 3)?;
    let mut rng = rng_from(2, &[]);
    let samples: Vec<GateSequence> = (0..10_000).map(|_| model.sample(16, &mut rng)).collect::<Result<_>>()?;

    let pairs = subsequence_frequencies(&data, 2, None)?;
    let pairs_model = subsequence_frequencies(&samples, 2, None)?;
    println!("length 2, data (model):\n{}", pairs.to_text(Some(&pairs_model))?);

    let triples = subsequence_frequencies(&data, 3, Some(Gate::X))?;
    println!("length 3 starting with X:\n{}", triples.to_text(None)?);
    print!("{}", triples.to_csv());
    Ok(())
}
