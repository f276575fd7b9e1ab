//! Train a small recurrent network on decoupling-like data and watch the
//! average score of its samples fall.

use ddseq::evolution::Evaluator;
use ddseq::models::{train_model, Hyperparameters, LayerSpec, NetworkModel, TrainOptions};
use ddseq::noise::{generate_noise, GateSet, NoiseParams};
use ddseq::sequences::{make_family, Alphabet, Family, GateSequence};
use ddseq::Result;

fn main() -> Result<()> {
    let evaluator = Evaluator::new(generate_noise(&NoiseParams::default())?, GateSet::pauli(), 0.002)?;
    let data: Vec<GateSequence> = make_family(Family::Dd8, None)?
        .into_iter()
        .chain(make_family(Family::Edd8, None)?)
        .map(|m| m.repeat(2))
        .collect::<Result<_>>()?;

    let specs = [
        LayerSpec { units: 24, peephole: true, projection: Some(12) },
        LayerSpec::plain(16),
    ];
    let mut model = NetworkModel::new(Alphabet::Pauli, &specs, Hyperparameters { batch_size: 4, ..Default::default() }, 11)?;
    println!("{}", model.describe());
    let opts = TrainOptions { eval_samples: 100, eval_every: 10, patience: 8, ..TrainOptions::new(400, 16) };
    let report = train_model(&mut model, &data, &evaluator, &opts, 11)?;
    for p in &report.history {
        println!("epoch {:>3}  loss {:>6.4}  sample avg {:.6}", p.epoch, p.loss, p.avg_score);
    }
    println!("best sample average {:.6} after {} epochs", report.best_avg_score, report.epochs_run);
    Ok(())
}
