//! Time evolution under `H0 + H_C(t)` with piecewise-constant control, the
//! trace-norm score and the zeroth-order average Hamiltonian.
//!
//! A full sequence of length `L` is simulated as `L` intervals of width `τ`.
//! Interval `k < L/2` uses `+H_g`, interval `k ≥ L/2` uses `−H_g`, so that the
//! control part alone multiplies out to the identity.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, mul_into, CMatrix};
use crate::noise::{gate_generators, GateGenerator, GateSet, NoiseInstance};
use crate::sequences::{Alphabet, GateSequence, Kind};

/// Radicands down to this value are clamped to zero.
pub const RADICAND_CLAMP: f64 = -1e-12;
/// Radicands below this value mean the propagator was not unitary.
pub const RADICAND_FAIL: f64 = -1e-9;

/// Joint system–bath propagator over a full sequence.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub u: CMatrix,
    pub total_time: f64,
}

/// `exp(-i(H0 + sign·H_g ⊗ I_B)τ)`.
pub fn step_unitary(noise: &NoiseInstance, gen: &GateGenerator, sign: f64) -> Result<CMatrix> {
    if !(gen.tau > 0.0) {
        return Err(Error::InvalidArgument("pulse width must be positive".into()));
    }
    let control = kron(&gen.hamiltonian(sign), &linalg::identity(noise.dim_b));
    let h = &noise.h0 + control;
    linalg::expm_hermitian(&h, gen.tau)
}

/// Precomputed step unitaries for every gate and both control signs.
#[derive(Clone, Debug)]
pub struct StepCache {
    forward: Vec<CMatrix>,
    backward: Vec<CMatrix>,
}

impl StepCache {
    pub fn new(noise: &NoiseInstance, generators: &[GateGenerator]) -> Result<Self> {
        let forward = generators.iter().map(|g| step_unitary(noise, g, 1.0)).collect::<Result<Vec<_>>>()?;
        let backward = generators.iter().map(|g| step_unitary(noise, g, -1.0)).collect::<Result<Vec<_>>>()?;
        Ok(StepCache { forward, backward })
    }

    pub fn len(&self) -> usize {
        self.forward.len() + self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Step unitary for gate `id`; `sign > 0` selects the forward generator.
    pub fn step(&self, id: usize, sign: f64) -> &CMatrix {
        if sign > 0.0 {
            &self.forward[id]
        } else {
            &self.backward[id]
        }
    }
}

/// Noise instance, gate alphabet and pulse width bundled with their step cache.
#[derive(Clone, Debug)]
pub struct Evaluator {
    noise: NoiseInstance,
    gates: GateSet,
    tau: f64,
    cache: StepCache,
}

impl Evaluator {
    pub fn new(noise: NoiseInstance, gates: GateSet, tau: f64) -> Result<Self> {
        let gens = gate_generators(&gates, tau)?;
        let cache = StepCache::new(&noise, &gens)?;
        Ok(Evaluator { noise, gates, tau, cache })
    }

    pub fn noise(&self) -> &NoiseInstance {
        &self.noise
    }

    pub fn gates(&self) -> &GateSet {
        &self.gates
    }

    pub fn alphabet(&self) -> Alphabet {
        self.gates.alphabet
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cache(&self) -> &StepCache {
        &self.cache
    }

    /// Propagator of a full (palindromic) sequence.
    pub fn evolve(&self, full: &GateSequence) -> Result<Propagator> {
        if full.kind() != Kind::Full {
            return Err(Error::Kind("evolve expects a full sequence; symmetrize the half first".into()));
        }
        self.check_alphabet(full)?;
        let ids: Vec<usize> = full.ids().map(usize::from).collect();
        let half = ids.len() / 2;
        let n = self.noise.dim();
        let mut acc = linalg::identity(n);
        let mut tmp = CMatrix::zeros(n, n);
        for (k, &g) in ids.iter().enumerate() {
            let sign = if k < half { 1.0 } else { -1.0 };
            mul_into(self.cache.step(g, sign), &acc, &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
        }
        Ok(Propagator { u: acc, total_time: ids.len() as f64 * self.tau })
    }

    /// Score of a half sequence (symmetrized internally).
    pub fn score_half(&self, half: &GateSequence) -> Result<f64> {
        if half.kind() != Kind::Half {
            return Err(Error::Kind("score_half expects a half sequence".into()));
        }
        self.check_alphabet(half)?;
        let ids: Vec<usize> = half.ids().map(usize::from).collect();
        let mut scratch = Scratch::new(self.noise.dim());
        self.score_ids(&ids, &mut scratch)
    }

    /// Scores every half sequence. Results are in input order and do not
    /// depend on the thread schedule.
    pub fn score_batch(&self, halves: &[GateSequence]) -> Result<Vec<f64>> {
        if let Some(first) = halves.first() {
            if halves.iter().any(|h| h.len() != first.len()) {
                return Err(Error::InvalidArgument("score_batch expects halves of equal length".into()));
            }
        }
        for h in halves {
            if h.kind() != Kind::Half {
                return Err(Error::Kind("score_batch expects half sequences".into()));
            }
            self.check_alphabet(h)?;
        }
        let n = self.noise.dim();
        halves
            .par_iter()
            .map_init(
                || Scratch::new(n),
                |scratch, h| {
                    let ids: Vec<usize> = h.ids().map(usize::from).collect();
                    self.score_ids(&ids, scratch)
                },
            )
            .collect()
    }

    fn check_alphabet(&self, s: &GateSequence) -> Result<()> {
        if s.alphabet() != self.gates.alphabet {
            return Err(Error::InvalidArgument(format!(
                "sequence alphabet {} differs from evaluator alphabet {}",
                s.alphabet(),
                self.gates.alphabet
            )));
        }
        Ok(())
    }

    fn score_ids(&self, half: &[usize], s: &mut Scratch) -> Result<f64> {
        let first = half[0];
        s.acc.copy_from(self.cache.step(first, 1.0));
        for &g in &half[1..] {
            mul_into(self.cache.step(g, 1.0), &s.acc, &mut s.tmp);
            std::mem::swap(&mut s.acc, &mut s.tmp);
        }
        for &g in half.iter().rev() {
            mul_into(self.cache.step(g, -1.0), &s.acc, &mut s.tmp);
            std::mem::swap(&mut s.acc, &mut s.tmp);
        }
        score(&s.acc, self.noise.dim_s, self.noise.dim_b)
    }
}

struct Scratch {
    acc: CMatrix,
    tmp: CMatrix,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { acc: CMatrix::zeros(n, n), tmp: CMatrix::zeros(n, n) }
    }
}

/// Propagator of a full sequence without the step cache: every interval is
/// exponentiated on its own.
pub fn evolve(noise: &NoiseInstance, gates: &GateSet, full: &GateSequence, tau: f64) -> Result<Propagator> {
    if full.kind() != Kind::Full {
        return Err(Error::Kind("evolve expects a full sequence".into()));
    }
    let gens = gate_generators(gates, tau)?;
    let half = full.len() / 2;
    let mut u = linalg::identity(noise.dim());
    for (k, g) in full.gates().iter().enumerate() {
        let sign = if k < half { 1.0 } else { -1.0 };
        let step = step_unitary(noise, &gens[g.index()], sign)?;
        u = linalg::mul(&step, &u);
    }
    Ok(Propagator { u, total_time: full.len() as f64 * tau })
}

/// `D(U, I) = sqrt(1 − ‖Tr_S U‖_tr / (d_S d_B))`.
pub fn score(u: &CMatrix, dim_s: usize, dim_b: usize) -> Result<f64> {
    if u.nrows() != dim_s * dim_b || !u.is_square() {
        return Err(Error::Shape(format!("propagator is {}x{}, expected {}", u.nrows(), u.ncols(), dim_s * dim_b)));
    }
    let reduced = linalg::partial_trace_system(u, dim_s, dim_b);
    let radicand = 1.0 - linalg::trace_norm(&reduced) / (dim_s * dim_b) as f64;
    if radicand < RADICAND_FAIL || !radicand.is_finite() {
        return Err(Error::BrokenUnitary { radicand });
    }
    if radicand < 0.0 {
        debug_assert!(radicand >= RADICAND_FAIL);
        if radicand < RADICAND_CLAMP {
            log::debug!("clamping score radicand {radicand:e}");
        }
        return Ok(0.0);
    }
    Ok(radicand.sqrt())
}

/// Zeroth-order average Hamiltonian for ideal instantaneous pulses:
/// `(1/n) Σ_k (C_k ⊗ I)† H0 (C_k ⊗ I)` with `C_k = P_k ⋯ P_1`.
pub fn average_hamiltonian_0(pulses: &GateSequence, gates: &GateSet, h0: &CMatrix, dim_b: usize) -> Result<CMatrix> {
    if pulses.is_empty() {
        return Err(Error::Empty("pulse list".into()));
    }
    if pulses.alphabet() != gates.alphabet {
        return Err(Error::InvalidArgument("pulse alphabet does not match gate set".into()));
    }
    let id_b = linalg::identity(dim_b);
    let n = h0.nrows();
    let mut cumulative = linalg::identity(2);
    let mut total = CMatrix::zeros(n, n);
    for g in pulses.gates() {
        cumulative = linalg::mul(&gates.unitaries[g.index()], &cumulative);
        let frame = kron(&cumulative, &id_b);
        total += linalg::mul(&linalg::mul(&frame.adjoint(), h0), &frame);
    }
    Ok(total * Complex64::new(1.0 / pulses.len() as f64, 0.0))
}

/// `M − I_S ⊗ Tr_S(M)/d_S`: the part of `M` that acts non-trivially on the system.
pub fn system_traceless_part(m: &CMatrix, dim_s: usize, dim_b: usize) -> CMatrix {
    let reduced = linalg::partial_trace_system(m, dim_s, dim_b) * Complex64::new(1.0 / dim_s as f64, 0.0);
    m - kron(&linalg::identity(dim_s), &reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, haar_unitary, identity, pauli};
    use crate::noise::{generate_noise, NoiseParams};
    use crate::sequences::random_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded() -> NoiseInstance {
        generate_noise(&NoiseParams { dim_bath: 4, seed: 5, ..NoiseParams::default() }).unwrap()
    }

    #[test]
    fn zero_noise_identity_step() {
        let noise = NoiseInstance::zero(4).unwrap();
        let gens = gate_generators(&GateSet::pauli(), 0.01).unwrap();
        let u = step_unitary(&noise, &gens[0], 1.0).unwrap();
        assert!(frobenius_norm(&(u - identity(8))) < 1e-12);
        for sign in [1.0, -1.0] {
            let u = step_unitary(&noise, &gens[1], sign).unwrap();
            let expect = kron(&pauli(1), &identity(4));
            assert!(frobenius_norm(&(u - expect)) < 1e-10);
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&identity(8), 2, 4).unwrap(), 0.0);
        let x = kron(&pauli(1), &identity(4));
        assert!((score(&x, 2, 4).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ub = haar_unitary(4, &mut rng);
        let u = kron(&identity(2), &ub);
        assert!(score(&u, 2, 4).unwrap() < 1e-10);
    }

    #[test]
    fn score_rejects_non_unitary() {
        let m = identity(8) * Complex64::new(2.0, 0.0);
        assert!(matches!(score(&m, 2, 4), Err(Error::BrokenUnitary { .. })));
        assert!(score(&identity(6), 2, 4).is_err());
    }

    #[test]
    fn score_is_global_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = haar_unitary(8, &mut rng);
        let a = score(&u, 2, 4).unwrap();
        let b = score(&(&u * Complex64::from_polar(1.0, 0.7)), 2, 4).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn palindrome_under_zero_noise_is_identity() {
        let ev = Evaluator::new(NoiseInstance::zero(4).unwrap(), GateSet::pauli(), 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let half = random_sequence(6, Alphabet::Pauli, &mut rng).unwrap();
            let p = ev.evolve(&half.symmetrize().unwrap()).unwrap();
            assert!(frobenius_norm(&(p.u - identity(8))) < 1e-9);
            assert_eq!(ev.score_half(&half).unwrap(), 0.0);
        }
        let xx = GateSequence::pauli("X").symmetrize().unwrap();
        assert!(frobenius_norm(&(ev.evolve(&xx).unwrap().u - identity(8))) < 1e-10);
    }

    #[test]
    fn evolve_rejects_half_sequences() {
        let ev = Evaluator::new(seeded(), GateSet::pauli(), 0.01).unwrap();
        assert!(matches!(ev.evolve(&GateSequence::pauli("XY")), Err(Error::Kind(_))));
    }

    #[test]
    fn cached_and_uncached_paths_agree() {
        let noise = seeded();
        let tau = 0.002;
        let ev = Evaluator::new(noise.clone(), GateSet::pauli(), tau).unwrap();
        assert_eq!(ev.cache().len(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..4 {
            let full = random_sequence(5, Alphabet::Pauli, &mut rng).unwrap().symmetrize().unwrap();
            let cached = ev.evolve(&full).unwrap();
            let direct = evolve(&noise, &GateSet::pauli(), &full, tau).unwrap();
            assert!(frobenius_norm(&(cached.u - direct.u)) < 1e-8);
            assert!((cached.total_time - 10.0 * tau).abs() < 1e-15);
        }
    }

    #[test]
    fn half_path_matches_full_path() {
        let ev = Evaluator::new(seeded(), GateSet::pauli(), 0.004).unwrap();
        let half = GateSequence::pauli("XYZIXZ");
        let full = ev.evolve(&half.symmetrize().unwrap()).unwrap();
        let a = score(&full.u, 2, 4).unwrap();
        let b = ev.score_half(&half).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn batch_is_order_preserving() {
        let ev = Evaluator::new(seeded(), GateSet::pauli(), 0.004).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let halves: Vec<_> = (0..12).map(|_| random_sequence(4, Alphabet::Pauli, &mut rng).unwrap()).collect();
        let scores = ev.score_batch(&halves).unwrap();
        let mut rev = halves.clone();
        rev.reverse();
        let mut rscores = ev.score_batch(&rev).unwrap();
        rscores.reverse();
        assert_eq!(scores, rscores);
        for (h, s) in halves.iter().zip(&scores) {
            assert_eq!(ev.score_half(h).unwrap(), *s);
        }
        let mixed = vec![GateSequence::pauli("XY"), GateSequence::pauli("XYZ")];
        assert!(ev.score_batch(&mixed).is_err());
    }

    #[test]
    fn zero_noise_batch_of_identity() {
        let ev = Evaluator::new(NoiseInstance::zero(4).unwrap(), GateSet::pauli(), 0.01).unwrap();
        assert_eq!(ev.score_batch(&[GateSequence::pauli("IIII")]).unwrap(), vec![0.0]);
    }

    #[test]
    fn average_hamiltonian_single_identity_pulse() {
        let noise = seeded();
        let h = average_hamiltonian_0(&GateSequence::pauli("I"), &GateSet::pauli(), &noise.h0, 4).unwrap();
        assert!(frobenius_norm(&(h - &noise.h0)) < 1e-14);
    }

    #[test]
    fn average_hamiltonian_two_x_pulses() {
        let noise = seeded();
        let h = average_hamiltonian_0(&GateSequence::pauli("XX"), &GateSet::pauli(), &noise.h0, 4).unwrap();
        let x = kron(&pauli(1), &identity(4));
        let expect = (&noise.h0 + linalg::mul(&linalg::mul(&x, &noise.h0), &x)) * Complex64::new(0.5, 0.0);
        assert!(frobenius_norm(&(h - expect)) < 1e-12);
    }

    #[test]
    fn xy4_cancels_the_system_coupling() {
        let noise = seeded();
        let h = average_hamiltonian_0(&GateSequence::pauli("XYXY"), &GateSet::pauli(), &noise.h0, 4).unwrap();
        let residue = system_traceless_part(&h, 2, 4);
        assert!(frobenius_norm(&residue) < 1e-12 * noise.norm2);
        // The pure-bath part survives.
        assert!(frobenius_norm(&h) > 0.0);
        assert!(average_hamiltonian_0(
            &GateSequence::from_ids(&[1], Alphabet::Custom(4)),
            &GateSet::pauli(),
            &noise.h0,
            4
        )
        .is_err());
    }
}
