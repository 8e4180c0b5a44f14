//! Dense complex linear algebra and quantum-information primitives.
//!
//! Two-qubit objects use the basis order `|HH⟩, |HV⟩, |VH⟩, |VV⟩`, i.e. the
//! index of `|a b⟩` is `2a + b` with `H = 0`, `V = 1`. All matrices here are at
//! most 8×8, so everything is dense.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues down to this are treated as roundoff of a PSD spectrum.
pub const EIGEN_CLAMP: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `|ψ⟩⟨ψ|` for a (not necessarily normalized) ket.
pub fn projector(ket: &[C64]) -> CMatrix {
    let n = ket.len();
    CMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj())
}

/// Largest entry of `|A − A†|`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(A + A†)/2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues in descending
/// order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    /// `V Λ V†`.
    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|x| x)
    }

    /// `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Fails when `A` deviates from Hermitian by more than 1e-10 in any entry.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let dev = hermitian_deviation(a);
    if dev > 1e-10 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(jacobi_eigh(&hermitize(a)))
}

/// Cyclic complex Jacobi on an already-Hermitian matrix.
///
/// Rotations are skipped for pairs whose coupling is exactly zero, so blocks
/// that are decoupled in the input stay exactly decoupled (exact zero
/// eigenvalues survive).
pub(crate) fn jacobi_eigh(input: &CMatrix) -> HermitianEigen {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = identity(n);
    for i in 0..n {
        a[(i, i)] = c(a[(i, i)].re, 0.0);
    }
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Once the coupling is below rounding of both diagonals the
                // rotation is a no-op in floating point.
                if sweep > 3 && mag < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let ph = phase.conj();
                // U restricted to (p, q).
                let u_pp = c(cs, 0.0);
                let u_pq = c(sn, 0.0);
                let u_qp = -ph * sn;
                let u_qq = ph * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Which tensor factor of a two-qubit object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    First,
    Second,
}

/// A validated 2×2 or 4×4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and positivity
    /// (eigenvalues ≥ −1e-10).
    pub fn new(data: CMatrix) -> Result<Self> {
        let dim = data.nrows();
        if data.ncols() != dim || !(dim == 2 || dim == 4) {
            return Err(Error::DimensionMismatch {
                expected: "2x2 or 4x4".into(),
                found: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        let dev = hermitian_deviation(&data);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = data.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let data = hermitize(&data);
        let min = jacobi_eigh(&data).min();
        if min < -EIGEN_CLAMP {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { data })
    }

    /// Normalized `|ψ⟩⟨ψ|`.
    pub fn pure(ket: &[C64]) -> Result<Self> {
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let ket: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Self::new(projector(&ket))
    }

    /// `I/d`.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(identity(dim) * c(1.0 / dim as f64, 0.0))
    }

    /// Pure qubit state with Bloch angles (polar `theta`, azimuth `phi`).
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let ket = [
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ];
        Self::from_raw(projector(&ket))
    }

    pub fn h() -> Self {
        Self::from_raw(projector(&[c(1., 0.), c(0., 0.)]))
    }

    pub fn v() -> Self {
        Self::from_raw(projector(&[c(0., 0.), c(1., 0.)]))
    }

    pub fn plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_raw(projector(&[c(r, 0.), c(r, 0.)]))
    }

    pub fn minus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_raw(projector(&[c(r, 0.), c(-r, 0.)]))
    }

    /// `(|H⟩ + i|V⟩)/√2`.
    pub fn right() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_raw(projector(&[c(r, 0.), c(0., r)]))
    }

    /// `(|HH⟩ + |VV⟩)/√2`.
    pub fn phi_plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_raw(projector(&[c(r, 0.), c(0., 0.), c(0., 0.), c(r, 0.)]))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        if self.dim() != 2 || other.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: "two qubit states".into(),
                found: format!("{} and {}", self.dim(), other.dim()),
            });
        }
        Ok(Self::from_raw(kron(&self.data, &other.data)))
    }

    /// Wraps a matrix produced by a trusted map; only Hermitian part is kept.
    pub(crate) fn from_raw(data: CMatrix) -> Self {
        Self {
            data: hermitize(&data),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi_eigh(&self.data).eigenvalues
    }
}

/// `‖ρ1 − ρ2‖₁ / 2`.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", rho1.dim(), rho1.dim()),
            found: format!("{}x{}", rho2.dim(), rho2.dim()),
        });
    }
    let diff = hermitize(&(rho1.matrix() - rho2.matrix()));
    let eig = jacobi_eigh(&diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

/// Reduced state of one qubit of a two-qubit state.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4x4".into(),
            found: format!("{}x{}", rho.dim(), rho.dim()),
        });
    }
    Ok(DensityMatrix::from_raw(partial_trace_matrix(
        rho.matrix(),
        keep,
    )))
}

/// Partial trace of any 4×4 matrix on `2 ⊗ 2`.
pub fn partial_trace_matrix(m: &CMatrix, keep: Subsystem) -> CMatrix {
    assert_eq!(m.shape(), (4, 4), "partial trace needs a 2x2 ⊗ 2x2 matrix");
    CMatrix::from_fn(2, 2, |i, j| match keep {
        Subsystem::First => m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)],
        Subsystem::Second => m[(i, j)] + m[(2 + i, 2 + j)],
    })
}

/// Transpose on the second factor of a 4×4 matrix on `2 ⊗ 2`.
///
/// # Panics
///
/// If `m` is not 4×4.
pub fn partial_transpose(m: &CMatrix) -> CMatrix {
    assert_eq!(
        m.shape(),
        (4, 4),
        "partial transpose needs a 2x2 ⊗ 2x2 matrix"
    );
    CMatrix::from_fn(4, 4, |r, col| {
        let (a, b) = (r / 2, r % 2);
        let (ap, bp) = (col / 2, col % 2);
        m[(2 * a + bp, 2 * ap + b)]
    })
}

fn binary_log_entropy(eigenvalues: impl IntoIterator<Item = f64>) -> f64 {
    eigenvalues
        .into_iter()
        .map(|x| x.clamp(0.0, 1.0))
        .filter(|&x| x > 0.0)
        .map(|x| -x * x.log2())
        .sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    binary_log_entropy(rho.eigenvalues())
}

/// Shannon entropy (bits) of `(p, 1 − p)`.
pub fn binary_entropy(p: f64) -> f64 {
    binary_log_entropy([p, 1.0 - p])
}

/// `S(ρ_A) + S(ρ_B) − S(ρ_AB)` in bits.
pub fn mutual_information(rho: &DensityMatrix) -> Result<f64> {
    let a = partial_trace(rho, Subsystem::First)?;
    let b = partial_trace(rho, Subsystem::Second)?;
    Ok(von_neumann_entropy(&a) + von_neumann_entropy(&b) - von_neumann_entropy(rho))
}

/// Wootters concurrence of a two-qubit state.
///
/// The square roots of the eigenvalues of `ρ (Y⊗Y) ρ* (Y⊗Y)` are the
/// singular values of `√ρ (Y⊗Y) √ρ*`, which are taken directly so that small
/// values are not lost to roundoff of the large ones.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4x4".into(),
            found: format!("{}x{}", rho.dim(), rho.dim()),
        });
    }
    let yy = kron(&pauli_y(), &pauli_y());
    let sqrt_rho = jacobi_eigh(rho.matrix()).map_spectrum(|x| x.max(0.0).sqrt());
    let a = &sqrt_rho * yy * sqrt_rho.map(|z| z.conj());
    let mut s: Vec<f64> = a
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| c(x, 0.0)),
        ))
    }

    #[test]
    fn eig_of_pauli_z() {
        let e = hermitian_eig(&pauli_z()).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, -1.0]);
    }

    #[test]
    fn eig_of_half_identity() {
        let e = hermitian_eig(&(identity(2) * c(0.5, 0.0))).unwrap();
        assert_eq!(e.eigenvalues, vec![0.5, 0.5]);
    }

    #[test]
    fn eig_of_x_mixture() {
        // (1 ± 0.6)/2 from the characteristic polynomial.
        let a = (identity(2) + pauli_x() * c(0.6, 0.0)) * c(0.5, 0.0);
        let e = hermitian_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 0.8).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 0.2).abs() < 1e-14);
        assert!(max_abs(&(e.reconstruct() - &a)) < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_keeps_exact_zeros_of_decoupled_block() {
        let k = c(0.3, 0.2);
        let mut m = diag(&[0.5, 0.0, 0.0, 0.5]);
        m[(0, 3)] = k.conj() * 0.5;
        m[(3, 0)] = k * 0.5;
        let e = jacobi_eigh(&m);
        assert_eq!(e.eigenvalues[2], 0.0);
        assert_eq!(e.eigenvalues[3], 0.0);
    }

    #[test]
    fn trace_distance_examples() {
        let h = DensityMatrix::h();
        let v = DensityMatrix::v();
        assert!((trace_distance(&h, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(trace_distance(&h, &h).unwrap(), 0.0);
        // |+⟩⟨+| − I/2 = X/2 ⇒ eigenvalues ±1/2, trace distance 1/2.
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let diff = DensityMatrix::plus().matrix() - mixed.matrix();
        let e = hermitian_eig(&diff).unwrap();
        assert!((e.eigenvalues[0] - 0.5).abs() < 1e-14);
        assert!((e.eigenvalues[1] + 0.5).abs() < 1e-14);
        assert!((trace_distance(&DensityMatrix::plus(), &mixed).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_dim_mismatch() {
        let err = trace_distance(&DensityMatrix::h(), &DensityMatrix::phi_plus());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let half = identity(2) * c(0.5, 0.0);
        let bell = DensityMatrix::phi_plus();
        let red = partial_trace(&bell, Subsystem::First).unwrap();
        assert!(max_abs(&(red.matrix() - &half)) < 1e-15);

        let hv = DensityMatrix::h().tensor(&DensityMatrix::v()).unwrap();
        let red = partial_trace(&hv, Subsystem::Second).unwrap();
        assert!(max_abs(&(red.matrix() - DensityMatrix::v().matrix())) < 1e-15);

        // Direct index contraction: the off-diagonal |HH⟩⟨VV| never survives.
        let mut m = diag(&[0.5, 0.0, 0.0, 0.5]);
        m[(0, 3)] = c(0.25, 0.0);
        m[(3, 0)] = c(0.25, 0.0);
        let dephased = DensityMatrix::new(m).unwrap();
        let red = partial_trace(&dephased, Subsystem::First).unwrap();
        assert!(max_abs(&(red.matrix() - &half)) < 1e-15);
    }

    #[test]
    fn partial_transpose_examples() {
        let d = diag(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(partial_transpose(&d), d);

        let pt = partial_transpose(DensityMatrix::phi_plus().matrix());
        let e = hermitian_eig(&pt).unwrap().eigenvalues;
        for (got, want) in e.iter().zip([0.5, 0.5, 0.5, -0.5]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&DensityMatrix::h()).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((von_neumann_entropy(&mixed) - 1.0).abs() < 1e-14);
        let rho = DensityMatrix::new(diag(&[0.8, 0.2])).unwrap();
        let h = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        assert!((von_neumann_entropy(&rho) - h).abs() < 1e-14);
        assert!((h - 0.721_928_094_887_362_3).abs() < 1e-15);
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&DensityMatrix::phi_plus()).unwrap() - 1.0).abs() < 1e-14);
        let hh = DensityMatrix::h().tensor(&DensityMatrix::h()).unwrap();
        assert!(concurrence(&hh).unwrap().abs() < 1e-14);

        let k = C64::from_polar(0.3, 0.9);
        let mut m = diag(&[0.5, 0.0, 0.0, 0.5]);
        m[(0, 3)] = k.conj() * 0.5;
        m[(3, 0)] = k * 0.5;
        let rho = DensityMatrix::new(m).unwrap();
        assert!((concurrence(&rho).unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn concurrence_near_pure_dephased_bell() {
        for r in [1.0 - 1e-6, 1.0 - 1e-9, 1.0 - 1e-12] {
            let k = C64::from_polar(r, -2.1);
            let mut m = diag(&[0.5, 0.0, 0.0, 0.5]);
            m[(0, 3)] = k.conj() * 0.5;
            m[(3, 0)] = k * 0.5;
            let rho = DensityMatrix::new(m).unwrap();
            assert!((concurrence(&rho).unwrap() - r).abs() < 1e-13, "r = {r}");
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(diag(&[0.6, 0.6])).is_err());
        assert!(DensityMatrix::new(diag(&[1.2, -0.2])).is_err());
        assert!(DensityMatrix::new(diag(&[0.5, 0.5, 0.0])).is_err());
    }
}
