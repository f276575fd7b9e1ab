use std::collections::{BTreeMap, HashSet};

use ddseq::analysis::subsequence_frequencies;
use ddseq::evolution::{evolve, score, Evaluator};
use ddseq::linalg::{haar_unitary, identity};
use ddseq::models::{LayerSpec, NGramModel, Network};
use ddseq::noise::{generate_noise, GateSet, NoiseInstance, NoiseParams};
use ddseq::optimizer::{contributions, keep_best_data, Dataset, ScoredSequence};
use ddseq::rng::rng_from;
use ddseq::sequences::{Alphabet, GateSequence};
use num_complex::Complex64;
use proptest::prelude::*;

fn pauli_half(max: usize) -> impl Strategy<Value = GateSequence> {
    prop::collection::vec(0u8..4, 1..max).prop_map(|ids| GateSequence::from_ids(&ids, Alphabet::Pauli))
}

fn scored(max: usize) -> impl Strategy<Value = Vec<ScoredSequence>> {
    prop::collection::vec((prop::collection::vec(0u8..4, 3), 0.0..1.0f64), 1..max).prop_map(|v| {
        v.into_iter()
            .map(|(ids, score)| ScoredSequence { sequence: GateSequence::from_ids(&ids, Alphabet::Pauli), score })
            .collect()
    })
}

fn distinct(d: &Dataset) -> bool {
    let set: HashSet<String> = d.entries().iter().map(|e| e.sequence.symbols()).collect();
    set.len() == d.len()
}

#[test]
fn score_is_a_distance_on_a_thousand_unitaries() {
    let mut rng = rng_from(99, &[]);
    for k in 0..1000 {
        let db = [2, 4, 8][k % 3];
        let u = haar_unitary(2 * db, &mut rng);
        let s = score(&u, 2, db).unwrap();
        assert!((-1e-10..=1.0 + 1e-10).contains(&s), "{s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn score_ignores_global_phase(seed in any::<u64>(), phase in 0.0..std::f64::consts::TAU) {
        let u = haar_unitary(8, &mut rng_from(seed, &[]));
        let v = &u * Complex64::from_polar(1.0, phase);
        prop_assert!((score(&u, 2, 4).unwrap() - score(&v, 2, 4).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn palindromes_are_identity_without_noise(half in pauli_half(12), tau in 1e-4..1e-2f64) {
        let noise = NoiseInstance::zero(4).unwrap();
        let u = evolve(&noise, &GateSet::pauli(), &half.symmetrize().unwrap(), tau).unwrap().u;
        let dev = (u - identity(8)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn cached_and_uncached_scores_agree(half in pauli_half(10), seed in 0u64..50) {
        let noise = generate_noise(&NoiseParams { dim_bath: 4, seed, ..NoiseParams::default() }).unwrap();
        let full = half.symmetrize().unwrap();
        let direct = evolve(&noise, &GateSet::pauli(), &full, 0.002).unwrap().u;
        let evaluator = Evaluator::new(noise, GateSet::pauli(), 0.002).unwrap();
        let cached = evaluator.evolve(&full).unwrap().u;
        prop_assert!((direct - cached).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-8);
    }

    #[test]
    fn noise_is_hermitian_and_reproducible(seed in any::<u64>()) {
        let p = NoiseParams { dim_bath: 4, seed, target_norm: Some(5.0), ..NoiseParams::default() };
        let a = generate_noise(&p).unwrap();
        let b = generate_noise(&p).unwrap();
        prop_assert!(ddseq::linalg::hermitian_deviation(&a.h0) < 1e-12);
        let (mut wa, mut wb) = (Vec::new(), Vec::new());
        a.write(&mut wa).unwrap();
        b.write(&mut wb).unwrap();
        prop_assert_eq!(wa, wb);
    }

    #[test]
    fn softmax_outputs_are_distributions(seed in any::<u64>(), inputs in prop::collection::vec(0usize..4, 1..20)) {
        let specs = [LayerSpec { units: 5, peephole: true, projection: Some(3) }, LayerSpec::plain(4)];
        let net = Network::random(4, &specs, 2.0, &mut rng_from(seed, &[])).unwrap();
        for p in net.forward(&inputs).unwrap().distributions {
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_is_inactive_on_short_sequences(seed in any::<u64>(), len in 2usize..33) {
        let specs = [LayerSpec { units: 4, peephole: true, projection: None }, LayerSpec::plain(3)];
        let mut rng = rng_from(seed, &[]);
        let net = Network::random(4, &specs, 0.3, &mut rng).unwrap();
        let seq = ddseq::sequences::random_sequence(len, Alphabet::Pauli, &mut rng).unwrap();
        let (la, ga) = net.backward(std::slice::from_ref(&seq), 32).unwrap();
        let (lb, gb) = net.backward(std::slice::from_ref(&seq), 1000).unwrap();
        prop_assert_eq!(la, lb);
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn network_sampling_is_a_function_of_the_seed(seed in any::<u64>()) {
        let net = Network::random(4, &[LayerSpec::plain(4), LayerSpec::plain(4)], 0.5, &mut rng_from(1, &[])).unwrap();
        let a = net.sample(12, Alphabet::Pauli, &mut rng_from(seed, &[])).unwrap();
        let b = net.sample(12, Alphabet::Pauli, &mut rng_from(seed, &[])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ngram_probabilities_are_exact_frequencies(data in prop::collection::vec(pauli_half(8), 1..6), order in 2usize..4) {
        let model = NGramModel::fit(&data, order).unwrap();
        // Count every (context, next) pair with contexts of the full order.
        let mut table: BTreeMap<Vec<u8>, [u64; 4]> = BTreeMap::new();
        for s in &data {
            let ids: Vec<u8> = s.ids().collect();
            for t in order - 1..ids.len() {
                table.entry(ids[t + 1 - order..t].to_vec()).or_default()[ids[t] as usize] += 1;
            }
        }
        for (ctx, counts) in table {
            let total: u64 = counts.iter().sum();
            let p = model.probabilities(&ctx);
            for g in 0..4 {
                // p·total should be the integer count exactly up to rounding.
                prop_assert!((p[g] * total as f64 - counts[g] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn merged_datasets_have_no_duplicates(a in scored(20), b in scored(20)) {
        let da = Dataset::new(a, 0, "a").unwrap();
        let db = Dataset::new(b, 0, "b").unwrap();
        let m = da.merge(&db, 1).unwrap();
        prop_assert!(distinct(&m));
        prop_assert!(m.scores().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn keeping_the_best_never_worsens(a in scored(30), b in scored(30), p in 5.0..100.0f64) {
        let base = Dataset::new(a, 0, "a").unwrap();
        let (kept, _) = keep_best_data(&base, p).unwrap();
        let next = kept.merge(&Dataset::new(b, 1, "b").unwrap(), 1).unwrap().truncate(kept.len());
        prop_assert!(next.average().unwrap() <= kept.average().unwrap() + 1e-15);
        prop_assert!(next.min().unwrap() <= kept.min().unwrap());
    }

    #[test]
    fn contributions_are_even(total in 0usize..10_000, models in 1usize..40) {
        let c = contributions(total, models);
        prop_assert_eq!(c.len(), models);
        prop_assert_eq!(c.iter().sum::<usize>(), total);
        prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
    }

    #[test]
    fn frequency_tables_ignore_order(data in prop::collection::vec(pauli_half(10), 1..10), len in 2usize..4) {
        let mut shuffled = data.clone();
        shuffled.reverse();
        shuffled.rotate_left(data.len() / 2);
        let a = subsequence_frequencies(&data, len, None).unwrap();
        let b = subsequence_frequencies(&shuffled, len, None).unwrap();
        prop_assert_eq!(a.counts, b.counts);
    }
}
