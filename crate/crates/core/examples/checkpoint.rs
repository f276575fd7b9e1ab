//! Save a network checkpoint and reload it bit-for-bit.

use ddseq::models::{load_model, save_model, Hyperparameters, LayerSpec, NetworkModel, SequenceModel};
use ddseq::rng::rng_from;
use ddseq::sequences::Alphabet;
use ddseq::Result;

fn main() -> Result<()> {
    let net = NetworkModel::new(Alphabet::Pauli, &[LayerSpec::plain(8), LayerSpec::plain(8)], Hyperparameters::default(), 5)?;
    let model = SequenceModel::Network(Box::new(net));
    let path = std::env::temp_dir().join("ddseq-example-model.ckpt");
    save_model(&model, &path)?;
    let back = load_model(&path)?;

    let a = model.sample(16, &mut rng_from(9, &[]))?;
    let b = back.sample(16, &mut rng_from(9, &[]))?;
    assert_eq!(a, b);
    println!("{} -> {}", back.describe(), path.display());
    println!("same sample before and after: {a}");
    Ok(())
}
