//! Random system–bath Hamiltonians and the piecewise-constant control
//! generators for each gate.
//!
//! The noise Hamiltonian is `H0 = Σ_μ σ^μ ⊗ B_μ` over `μ ∈ {I, X, Y, Z}` on the
//! system qubit, with two-body bath operators
//! `B_μ = Σ_{i≠j} Σ_{α,β ∈ {X,Y,Z}} c^μ_{ijαβ} σ_i^α σ_j^β`.
//! Coupling magnitudes are drawn uniformly from `[a, b]` with random signs;
//! the pure-bath channel `μ = I` is divided by `bath_suppression`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, embed_single, frobenius_norm, kron, pauli, CMatrix};
use crate::sequences::{Alphabet, Gate};

const FILE_MAGIC: &str = "#ddseq-noise v1";

/// Parameters of [`generate_noise`].
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseParams {
    pub dim_bath: usize,
    pub seed: u64,
    /// `[a, b]` range of coupling magnitudes before rescaling.
    pub coupling_range: (f64, f64),
    /// Ratio between system–bath and pure-bath coefficient scales.
    pub bath_suppression: f64,
    /// Rescale `H0` to this operator 2-norm.
    pub target_norm: Option<f64>,
}

impl NoiseParams {
    /// Default parameters for a bath of `dim_bath`, normalised to 20.4 for a
    /// 16-dimensional bath and 24.0 for a 128-dimensional one.
    pub fn for_bath(dim_bath: usize) -> Self {
        let target_norm = match dim_bath {
            16 => Some(20.4),
            128 => Some(24.0),
            _ => None,
        };
        NoiseParams { dim_bath, target_norm, ..Self::default() }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            dim_bath: 16,
            seed: 7,
            coupling_range: (1.0, 3.0),
            bath_suppression: 1000.0,
            target_norm: Some(20.4),
        }
    }
}

/// One term `value · σ^μ ⊗ σ_i^α σ_j^β` of the noise Hamiltonian.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Coefficient {
    pub mu: u8,
    pub i: u8,
    pub j: u8,
    pub alpha: u8,
    pub beta: u8,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseInstance {
    pub dim_s: usize,
    pub dim_b: usize,
    pub seed: u64,
    pub coupling_range: (f64, f64),
    pub bath_suppression: f64,
    pub target_norm: Option<f64>,
    pub coeffs: Vec<Coefficient>,
    pub h0: CMatrix,
    pub norm2: f64,
}

fn bath_qubits(dim_b: usize) -> Result<usize> {
    if dim_b < 2 || !dim_b.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("bath dimension {dim_b} is not a power of two ≥ 2")));
    }
    Ok(dim_b.trailing_zeros() as usize)
}

/// Assembles `Σ_terms value · σ^μ ⊗ σ_i^α σ_j^β`.
fn assemble(coeffs: &[Coefficient], n_qubits: usize) -> CMatrix {
    let dim_b = 1usize << n_qubits;
    let mut bath_ops = vec![CMatrix::zeros(dim_b, dim_b); 4];
    for c in coeffs {
        let a = embed_single(&pauli(c.alpha as usize), c.i as usize, n_qubits);
        let b = embed_single(&pauli(c.beta as usize), c.j as usize, n_qubits);
        let term = linalg::mul(&a, &b) * Complex64::new(c.value, 0.0);
        bath_ops[c.mu as usize] += term;
    }
    let mut h0 = CMatrix::zeros(2 * dim_b, 2 * dim_b);
    for (mu, b) in bath_ops.iter().enumerate() {
        h0 += kron(&pauli(mu), b);
    }
    h0
}

/// Draws a random noise instance; deterministic in `params.seed`.
pub fn generate_noise(params: &NoiseParams) -> Result<NoiseInstance> {
    let n_qubits = bath_qubits(params.dim_bath)?;
    if n_qubits < 2 {
        return Err(Error::InvalidArgument("two-body bath terms need at least two bath qubits".into()));
    }
    let (a, b) = params.coupling_range;
    if !(a > 0.0) || b < a {
        return Err(Error::InvalidArgument(format!("coupling range [{a}, {b}] must satisfy 0 < a ≤ b")));
    }
    if !(params.bath_suppression > 0.0) {
        return Err(Error::InvalidArgument("bath suppression must be positive".into()));
    }
    if let Some(t) = params.target_norm {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument("target norm must be positive".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut coeffs = Vec::new();
    for mu in 0..4u8 {
        for i in 0..n_qubits as u8 {
            for j in 0..n_qubits as u8 {
                if i == j {
                    continue;
                }
                for alpha in 1..4u8 {
                    for beta in 1..4u8 {
                        let mut mag = if a == b { a } else { rng.random_range(a..=b) };
                        if mu == 0 {
                            mag /= params.bath_suppression;
                        }
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        coeffs.push(Coefficient { mu, i, j, alpha, beta, value: sign * mag });
                    }
                }
            }
        }
    }

    let mut h0 = assemble(&coeffs, n_qubits);
    let mut norm2 = linalg::spectral_norm_hermitian(&h0);
    if let Some(target) = params.target_norm {
        let scale = target / norm2;
        for c in &mut coeffs {
            c.value *= scale;
        }
        h0 *= Complex64::new(scale, 0.0);
        norm2 = linalg::spectral_norm_hermitian(&h0);
    }

    Ok(NoiseInstance {
        dim_s: 2,
        dim_b: params.dim_bath,
        seed: params.seed,
        coupling_range: params.coupling_range,
        bath_suppression: params.bath_suppression,
        target_norm: params.target_norm,
        coeffs,
        h0,
        norm2,
    })
}

impl NoiseInstance {
    /// Instance with `H0 = 0`.
    pub fn zero(dim_b: usize) -> Result<Self> {
        bath_qubits(dim_b)?;
        Ok(NoiseInstance {
            dim_s: 2,
            dim_b,
            seed: 0,
            coupling_range: (0.0, 0.0),
            bath_suppression: 1.0,
            target_norm: None,
            coeffs: Vec::new(),
            h0: CMatrix::zeros(2 * dim_b, 2 * dim_b),
            norm2: 0.0,
        })
    }

    /// Wraps an arbitrary Hermitian `H0` on `C² ⊗ C^dim_b`.
    pub fn from_matrix(h0: CMatrix, dim_b: usize) -> Result<Self> {
        bath_qubits(dim_b)?;
        if h0.nrows() != 2 * dim_b {
            return Err(Error::Shape(format!("H0 has {} rows, expected {}", h0.nrows(), 2 * dim_b)));
        }
        linalg::ensure_hermitian(&h0, "H0")?;
        let norm2 = linalg::spectral_norm_hermitian(&h0);
        Ok(NoiseInstance {
            dim_s: 2,
            dim_b,
            seed: 0,
            coupling_range: (0.0, 0.0),
            bath_suppression: 1.0,
            target_norm: None,
            coeffs: Vec::new(),
            h0,
            norm2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_b
    }

    /// Bath operator `B_μ` rebuilt from the stored coefficients.
    pub fn bath_operator(&self, mu: u8) -> CMatrix {
        let n_qubits = self.dim_b.trailing_zeros() as usize;
        let selected: Vec<Coefficient> = self.coeffs.iter().copied().filter(|c| c.mu == mu).collect();
        let full = assemble(&selected, n_qubits);
        // The assembled matrix is σ^μ ⊗ B_μ; read B_μ off the (0, μ-dependent) block.
        let d = self.dim_b;
        let p = pauli(mu as usize);
        let (r, c) = if p[(0, 0)].norm() > 0.5 { (0, 0) } else { (0, 1) };
        let factor = p[(r, c)];
        CMatrix::from_fn(d, d, |a, b| full[(r * d + a, c * d + b)] / factor)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FILE_MAGIC}")?;
        writeln!(out, "dim_s {}", self.dim_s)?;
        writeln!(out, "dim_b {}", self.dim_b)?;
        writeln!(out, "seed {}", self.seed)?;
        writeln!(out, "coupling_range {:e} {:e}", self.coupling_range.0, self.coupling_range.1)?;
        writeln!(out, "bath_suppression {:e}", self.bath_suppression)?;
        match self.target_norm {
            Some(t) => writeln!(out, "target_norm {t:e}")?,
            None => writeln!(out, "target_norm none")?,
        }
        writeln!(out, "norm2 {:e}", self.norm2)?;
        writeln!(out, "coefficients {}", self.coeffs.len())?;
        for c in &self.coeffs {
            writeln!(out, "{} {} {} {} {} {:e}", c.mu, c.i, c.j, c.alpha, c.beta, c.value)?;
        }
        let n = self.dim();
        writeln!(out, "h0 {n}")?;
        for r in 0..n {
            let row: Vec<String> =
                (0..n).map(|c| format!("{:e} {:e}", self.h0[(r, c)].re, self.h0[(r, c)].im)).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::parse(0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let (n, magic) = next("header")?;
        if magic.trim() != FILE_MAGIC {
            return Err(Error::parse(n, "not a noise instance file"));
        }
        fn field<'a>(n: usize, line: &'a str, key: &str) -> Result<Vec<&'a str>> {
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(n, format!("expected `{key}`")));
            }
            Ok(parts.collect())
        }
        fn num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::parse(n, format!("bad number `{s}`")))
        }
        let (n, l) = next("dim_s")?;
        let dim_s: usize = num(n, field(n, &l, "dim_s")?.first().copied().unwrap_or(""))?;
        if dim_s != 2 {
            return Err(Error::parse(n, "only a single system qubit is supported"));
        }
        let (n, l) = next("dim_b")?;
        let dim_b: usize = num(n, field(n, &l, "dim_b")?.first().copied().unwrap_or(""))?;
        bath_qubits(dim_b).map_err(|e| Error::parse(n, e.to_string()))?;
        let (n, l) = next("seed")?;
        let seed: u64 = num(n, field(n, &l, "seed")?.first().copied().unwrap_or(""))?;
        let (n, l) = next("coupling_range")?;
        let cr = field(n, &l, "coupling_range")?;
        if cr.len() != 2 {
            return Err(Error::parse(n, "coupling_range needs two values"));
        }
        let coupling_range = (num(n, cr[0])?, num(n, cr[1])?);
        let (n, l) = next("bath_suppression")?;
        let bath_suppression = num(n, field(n, &l, "bath_suppression")?.first().copied().unwrap_or(""))?;
        let (n, l) = next("target_norm")?;
        let t = field(n, &l, "target_norm")?;
        let target_norm = match t.first().copied() {
            Some("none") => None,
            Some(v) => Some(num(n, v)?),
            None => return Err(Error::parse(n, "missing target_norm value")),
        };
        let (n, l) = next("norm2")?;
        let norm2: f64 = num(n, field(n, &l, "norm2")?.first().copied().unwrap_or(""))?;
        let (n, l) = next("coefficients")?;
        let count: usize = num(n, field(n, &l, "coefficients")?.first().copied().unwrap_or(""))?;
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = next("coefficient")?;
            let p: Vec<&str> = l.split_whitespace().collect();
            if p.len() != 6 {
                return Err(Error::parse(n, "coefficient line needs 6 fields"));
            }
            coeffs.push(Coefficient {
                mu: num(n, p[0])?,
                i: num(n, p[1])?,
                j: num(n, p[2])?,
                alpha: num(n, p[3])?,
                beta: num(n, p[4])?,
                value: num(n, p[5])?,
            });
        }
        let (n, l) = next("h0")?;
        let dim: usize = num(n, field(n, &l, "h0")?.first().copied().unwrap_or(""))?;
        if dim != dim_s * dim_b {
            return Err(Error::parse(n, format!("h0 dimension {dim} does not match {}", dim_s * dim_b)));
        }
        let mut h0 = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            let (n, l) = next("h0 row")?;
            let vals: Vec<&str> = l.split_whitespace().collect();
            if vals.len() != 2 * dim {
                return Err(Error::parse(n, format!("h0 row needs {} numbers", 2 * dim)));
            }
            for c in 0..dim {
                h0[(r, c)] = Complex64::new(num(n, vals[2 * c])?, num(n, vals[2 * c + 1])?);
            }
        }
        linalg::ensure_hermitian(&h0, "stored H0")?;
        Ok(NoiseInstance {
            dim_s,
            dim_b,
            seed,
            coupling_range,
            bath_suppression,
            target_norm,
            coeffs,
            h0,
            norm2,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}

/// The unitaries of a gate alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    pub alphabet: Alphabet,
    pub unitaries: Vec<CMatrix>,
}

impl GateSet {
    pub fn pauli() -> Self {
        GateSet { alphabet: Alphabet::Pauli, unitaries: (0..4).map(pauli).collect() }
    }

    /// `count` random involutions `U† X U`, labelled as a custom alphabet.
    pub fn random_involutions(count: usize, seed: u64) -> Result<Self> {
        let alphabet = Alphabet::custom(count)?;
        Ok(GateSet { alphabet, unitaries: random_involution_gates(count, seed)? })
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }
}

/// Control Hamiltonian for one gate: `exp(-i·H·τ) = g` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct GateGenerator {
    pub gate: Gate,
    pub h: CMatrix,
    pub tau: f64,
}

impl GateGenerator {
    /// `sign · H` (the reversed half of a sequence uses `sign = -1`).
    pub fn hamiltonian(&self, sign: f64) -> CMatrix {
        &self.h * Complex64::new(sign, 0.0)
    }
}

/// `H_g = (π / 2τ)(I − g)` for every Hermitian involution `g`.
pub fn gate_generators(gates: &GateSet, tau: f64) -> Result<Vec<GateGenerator>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("pulse width must be positive, got {tau}")));
    }
    let id2 = linalg::identity(2);
    gates
        .unitaries
        .iter()
        .enumerate()
        .map(|(k, g)| {
            if g.shape() != (2, 2) {
                return Err(Error::Shape("gate unitaries must be 2×2".into()));
            }
            linalg::ensure_hermitian(g, "gate")?;
            let deviation = frobenius_norm(&(linalg::mul(g, g) - &id2));
            if deviation > 1e-10 {
                return Err(Error::NotInvolution { deviation });
            }
            let h = (&id2 - g) * Complex64::new(PI / (2.0 * tau), 0.0);
            Ok(GateGenerator { gate: Gate::new(k as u8, gates.alphabet)?, h, tau })
        })
        .collect()
}

/// `count` gates `U_j† X U_j` with Haar-random `U_j`.
pub fn random_involution_gates(count: usize, seed: u64) -> Result<Vec<CMatrix>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one gate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = pauli(1);
    Ok((0..count)
        .map(|_| {
            let u = linalg::haar_unitary(2, &mut rng);
            let g = linalg::mul(&linalg::mul(&u.adjoint(), &x), &u);
            // Symmetrize away rounding so the Hermitian check is exact.
            (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, expm_hermitian, hermitian_deviation};

    fn small(seed: u64) -> NoiseParams {
        NoiseParams { seed, ..NoiseParams::default() }
    }

    #[test]
    fn default_instance_has_target_norm_and_is_hermitian() {
        let inst = generate_noise(&small(7)).unwrap();
        assert!((inst.norm2 - 20.4).abs() < 1e-9, "{}", inst.norm2);
        assert!(hermitian_deviation(&inst.h0) < 1e-12);
        assert_eq!(inst.h0.nrows(), 32);
        // 4 channels × 12 ordered pairs × 9 Pauli pairs
        assert_eq!(inst.coeffs.len(), 432);
    }

    #[test]
    fn degenerate_range_gives_equal_magnitudes() {
        let p = NoiseParams {
            coupling_range: (0.5, 0.5),
            bath_suppression: 1.0,
            target_norm: None,
            ..NoiseParams::default()
        };
        let inst = generate_noise(&p).unwrap();
        assert!(inst.coeffs.iter().all(|c| (c.value.abs() - 0.5).abs() < 1e-15));
        // Both signs occur.
        assert!(inst.coeffs.iter().any(|c| c.value < 0.0));
        assert!(inst.coeffs.iter().any(|c| c.value > 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad_dim = NoiseParams { dim_bath: 12, ..NoiseParams::default() };
        assert!(generate_noise(&bad_dim).is_err());
        let bad_range = NoiseParams { coupling_range: (0.0, 3.0), ..NoiseParams::default() };
        assert!(generate_noise(&bad_range).is_err());
        let tiny = NoiseParams { dim_bath: 2, ..NoiseParams::default() };
        assert!(generate_noise(&tiny).is_err());
    }

    #[test]
    fn rescaling_preserves_signs() {
        let raw = generate_noise(&NoiseParams { target_norm: None, ..small(3) }).unwrap();
        let scaled = generate_noise(&small(3)).unwrap();
        for (a, b) in raw.coeffs.iter().zip(&scaled.coeffs) {
            assert_eq!(a.value.signum(), b.value.signum());
        }
        assert!(hermitian_deviation(&scaled.h0) < 1e-12);
    }

    #[test]
    fn pure_bath_channel_is_suppressed() {
        let inst = generate_noise(&small(7)).unwrap();
        let bath = linalg::spectral_norm_hermitian(&inst.bath_operator(0));
        for mu in 1..4 {
            let coupling = linalg::spectral_norm_hermitian(&inst.bath_operator(mu));
            let ratio = coupling / bath;
            assert!((500.0..=2000.0).contains(&ratio), "μ={mu} ratio {ratio}");
        }
    }

    #[test]
    fn bath_operators_reassemble_h0() {
        let inst = generate_noise(&small(2)).unwrap();
        let mut h = CMatrix::zeros(32, 32);
        for mu in 0..4u8 {
            h += kron(&pauli(mu as usize), &inst.bath_operator(mu));
        }
        assert!(frobenius_norm(&(h - &inst.h0)) < 1e-10);
    }

    #[test]
    fn file_round_trip_is_exact_and_byte_stable() {
        let inst = generate_noise(&small(11)).unwrap();
        let mut a = Vec::new();
        inst.write(&mut a).unwrap();
        let again = generate_noise(&small(11)).unwrap();
        let mut b = Vec::new();
        again.write(&mut b).unwrap();
        assert_eq!(a, b);
        let loaded = NoiseInstance::read(&a[..]).unwrap();
        assert_eq!(loaded, inst);
    }

    #[test]
    fn loader_rejects_non_hermitian() {
        let mut inst = NoiseInstance::zero(4).unwrap();
        inst.h0[(0, 1)] = Complex64::new(1.0, 0.0);
        let mut buf = Vec::new();
        inst.write(&mut buf).unwrap();
        assert!(matches!(NoiseInstance::read(&buf[..]), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn generator_of_x_reproduces_x() {
        let tau = 0.002;
        let gens = gate_generators(&GateSet::pauli(), tau).unwrap();
        let x = pauli(1);
        let fwd = expm_hermitian(&gens[1].h, tau).unwrap();
        assert!(frobenius_norm(&(fwd - &x)) < 1e-10);
        // Negated generator: exp(+iHτ) = exp(-i(-H)τ).
        let back = expm_hermitian(&gens[1].hamiltonian(-1.0), tau).unwrap();
        assert!(frobenius_norm(&(back - &x)) < 1e-10);
        // Identity gate has the zero generator.
        assert!(frobenius_norm(&gens[0].h) == 0.0);
    }

    #[test]
    fn generators_match_eigen_oracle_for_all_paulis() {
        let tau = 0.004;
        let gens = gate_generators(&GateSet::pauli(), tau).unwrap();
        for (k, g) in gens.iter().enumerate() {
            let (vals, vecs) = eigh(&g.h);
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                2,
                vals.iter().map(|l| Complex64::from_polar(1.0, -l * tau)),
            ));
            let u = linalg::mul(&linalg::mul(&vecs, &d), &vecs.adjoint());
            assert!(frobenius_norm(&(u - pauli(k))) < 1e-10);
        }
    }

    #[test]
    fn generators_reject_non_involutions() {
        let mut set = GateSet::pauli();
        set.unitaries[1] = pauli(1) * Complex64::new(2.0, 0.0);
        assert!(matches!(gate_generators(&set, 0.01), Err(Error::NotInvolution { .. })));
        assert!(gate_generators(&GateSet::pauli(), 0.0).is_err());
    }

    #[test]
    fn random_involutions_square_to_identity() {
        let gates = random_involution_gates(10, 4).unwrap();
        assert_eq!(gates, random_involution_gates(10, 4).unwrap());
        for g in &gates {
            assert!(frobenius_norm(&(linalg::mul(g, g) - linalg::identity(2))) < 1e-12);
            let (vals, _) = eigh(g);
            assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        }
        assert!(random_involution_gates(0, 1).is_err());
    }
}
