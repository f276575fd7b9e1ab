//! Dense complex linear algebra used by the simulator.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex64` (column-major).
//! Eigendecompositions and SVDs go through `nalgebra`; the matrix product used
//! in the scoring hot loop is a hand-written kernel over the raw column slices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used when checking that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// The 2×2 Pauli matrices indexed as I=0, X=1, Y=2, Z=3.
pub fn pauli(index: usize) -> CMatrix {
    let m = match index {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, -I, I, ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("pauli index {index} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &m)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `op` acting on qubit `site` of an `n_qubits` register (qubit 0 is the most
/// significant tensor factor).
pub fn embed_single(op: &CMatrix, site: usize, n_qubits: usize) -> CMatrix {
    let mut out = identity(1);
    for q in 0..n_qubits {
        out = if q == site {
            kron(&out, op)
        } else {
            kron(&out, &identity(2))
        };
    }
    out
}

/// Largest elementwise deviation `|m - m†|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn ensure_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{what} is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { what: what.to_string(), deviation: dev });
    }
    Ok(())
}

/// Real eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = h.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `exp(-i·h·t)` for Hermitian `h`, assembled as `V·diag(e^{-iλt})·V†` so the
/// result is unitary up to rounding.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    ensure_hermitian(h, "generator")?;
    let (values, v) = eigh(h);
    let mut scaled = v.clone();
    for (k, lambda) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for x in scaled.column_mut(k).iter_mut() {
            *x *= phase;
        }
    }
    let mut out = CMatrix::zeros(h.nrows(), h.ncols());
    mul_into(&scaled, &v.adjoint(), &mut out);
    Ok(out)
}

/// Operator 2-norm of a Hermitian matrix (largest |eigenvalue|).
pub fn spectral_norm_hermitian(h: &CMatrix) -> f64 {
    h.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr_S(u)` for `u` acting on `S ⊗ B` with the system as the first factor:
/// `out[a,b] = Σ_s u[(s,a),(s,b)]`.
pub fn partial_trace_system(u: &CMatrix, dim_s: usize, dim_b: usize) -> CMatrix {
    assert_eq!(u.nrows(), dim_s * dim_b);
    let mut out = CMatrix::zeros(dim_b, dim_b);
    for s in 0..dim_s {
        let off = s * dim_b;
        for b in 0..dim_b {
            for a in 0..dim_b {
                out[(a, b)] += u[(off + a, off + b)];
            }
        }
    }
    out
}

/// `out = a·b`. Column-major kernel: each output column is accumulated as a
/// sequence of complex axpys over contiguous columns of `a`.
pub fn mul_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let (n, m) = a.shape();
    let p = b.ncols();
    assert_eq!(m, b.nrows(), "inner dimensions differ");
    assert_eq!(out.shape(), (n, p), "output shape mismatch");
    let a_s = a.as_slice();
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..p {
        let col = &mut o_s[j * n..(j + 1) * n];
        col.fill(ZERO);
        for k in 0..m {
            let s = b_s[j * m + k];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            let a_col = &a_s[k * n..(k + 1) * n];
            for (c, x) in col.iter_mut().zip(a_col) {
                c.re += x.re * s.re - x.im * s.im;
                c.im += x.re * s.im + x.im * s.re;
            }
        }
    }
}

pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), b.ncols());
    mul_into(a, b, &mut out);
    out
}

/// Frobenius distance of `u†u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let g = mul(&u.adjoint(), u);
    frobenius_norm(&(g - identity(u.nrows())))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for x in q.column_mut(k).iter_mut() {
            *x *= ph;
        }
    }
    q
}
