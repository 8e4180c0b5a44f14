//! Dephasing dynamics of the polarization qubit.
//!
//! The evolution variable is the effective path difference `s = Δn·L/λ0`,
//! so a wavelength component `λ` picks up the relative phase `2π·s·λ0/λ`
//! between `|V⟩` and `|H⟩`. Process matrices are expressed in the operator
//! basis `M = (I, X, −iY, Z)`; Choi matrices use the `input ⊗ output` order
//! with unit trace.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    self, c, hermitian_deviation, hermitize, jacobi_eigh, partial_trace_matrix, CMatrix,
    DensityMatrix, Subsystem, C64,
};
use crate::spectra::Spectrum;

/// Birefringence of the quartz plate.
pub const DEFAULT_DELTA_N: f64 = 0.0115;
/// Reference wavelength the path difference is measured in.
pub const DEFAULT_LAMBDA0_NM: f64 = 702.0;

const KAPPA_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub delta_n: f64,
    pub lambda0_nm: f64,
    /// Path difference in units of `lambda0_nm`.
    pub s: f64,
}

impl EvolutionParams {
    pub fn new(delta_n: f64, lambda0_nm: f64, s: f64) -> Result<Self> {
        if !(delta_n > 0.0 && delta_n < 1.0) {
            return Err(Error::Domain(format!("delta_n {delta_n} outside (0, 1)")));
        }
        if !(lambda0_nm > 0.0 && lambda0_nm.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda0 {lambda0_nm} nm must be positive"
            )));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!(
                "path difference s = {s} must be nonnegative"
            )));
        }
        Ok(Self {
            delta_n,
            lambda0_nm,
            s,
        })
    }

    /// Same convention at another path difference.
    pub fn at(&self, s: f64) -> Self {
        Self { s, ..*self }
    }

    /// Plate thickness `L = s·λ0/Δn` in nm.
    pub fn plate_thickness_nm(&self) -> f64 {
        self.s * self.lambda0_nm / self.delta_n
    }
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            delta_n: DEFAULT_DELTA_N,
            lambda0_nm: DEFAULT_LAMBDA0_NM,
            s: 0.0,
        }
    }
}

/// Decoherence factor in closed form.
///
/// Each Gaussian component is integrated exactly against the phase
/// `2π·s·λ0/λ` expanded to second order in `λ − λ_c`:
/// `exp(i g/λ_c) · (1 − 2ibσ²)^{-1/2} · exp(−a²σ²/(2(1 − 2ibσ²)))` with
/// `g = 2π·s·λ0`, `a = g/λ_c²`, `b = g/λ_c³`. The modulus is the familiar
/// `exp(−½(aσ)²)` up to terms of order `(bσ²)²`.
pub fn kappa(spec: &Spectrum, p: &EvolutionParams) -> C64 {
    let g = 2.0 * PI * p.s * p.lambda0_nm;
    spec.components()
        .iter()
        .map(|comp| {
            let lc = comp.center_nm;
            let carrier = C64::from_polar(1.0, g / lc);
            if comp.sigma_nm == 0.0 {
                return carrier * comp.weight;
            }
            let var = comp.sigma_nm * comp.sigma_nm;
            let a = g / (lc * lc);
            let b = g / (lc * lc * lc);
            let z = c(1.0, -2.0 * b * var);
            let envelope = z.powf(-0.5) * (c(-a * a * var / 2.0, 0.0) / z).exp();
            carrier * envelope * comp.weight
        })
        .sum()
}

/// Decoherence factor by adaptive Gauss–Kronrod quadrature of the exact
/// phase over each component's ±8σ window.
pub fn kappa_quadrature(spec: &Spectrum, p: &EvolutionParams) -> C64 {
    let g = 2.0 * PI * p.s * p.lambda0_nm;
    spec.components()
        .iter()
        .map(|comp| {
            if comp.sigma_nm == 0.0 {
                return C64::from_polar(comp.weight, g / comp.center_nm);
            }
            let (lc, sigma) = (comp.center_nm, comp.sigma_nm);
            let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
            let integrand = |lam: f64| {
                let u = (lam - lc) / sigma;
                C64::from_polar(norm * (-0.5 * u * u).exp(), g / lam)
            };
            comp.weight * adaptive_gk15(&integrand, lc - 8.0 * sigma, lc + 8.0 * sigma, 1e-9, 1e-13)
        })
        .sum()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for i in 0..7 {
        let dx = half * GK_NODES[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * GK_WEIGHTS[i];
        if i % 2 == 1 {
            gauss += pair * GAUSS_WEIGHTS[i / 2];
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).norm())
}

fn adaptive_gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> C64 {
    fn recurse(
        f: &impl Fn(f64) -> C64,
        a: f64,
        b: f64,
        whole: (C64, f64),
        tol: f64,
        depth: u32,
    ) -> C64 {
        let (value, err) = whole;
        if err <= tol || depth >= 40 {
            return value;
        }
        let mid = 0.5 * (a + b);
        let left = gk15(f, a, mid);
        let right = gk15(f, mid, b);
        recurse(f, a, mid, left, tol / 2.0, depth + 1)
            + recurse(f, mid, b, right, tol / 2.0, depth + 1)
    }
    let whole = gk15(f, a, b);
    let tol = (rel_tol * whole.0.norm()).max(abs_tol);
    recurse(f, a, b, whole, tol, 0)
}

/// `κ(s)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTrajectory {
    pub s_grid: Vec<f64>,
    pub values: Vec<C64>,
}

impl KappaTrajectory {
    /// Evaluates the closed form in parallel; output order follows `s_grid`.
    pub fn compute(spec: &Spectrum, params: &EvolutionParams, s_grid: Vec<f64>) -> Self {
        let values = s_grid
            .par_iter()
            .map(|&s| kappa(spec, &params.at(s)))
            .collect();
        Self { s_grid, values }
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|k| k.norm()).collect()
    }
}

/// Uniform grid `0, step, 2·step, …` up to `s_max` (inclusive within rounding).
pub fn uniform_grid(s_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("grid step {step} must be positive")));
    }
    if s_max.is_nan() || s_max < step {
        return Err(Error::Domain(format!(
            "s_max {s_max} must be at least the step {step}"
        )));
    }
    let n = (s_max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

/// `(I, X, −iY, Z)`.
pub fn operator_basis() -> [CMatrix; 4] {
    let minus_i_y = qcore::pauli_y() * c(0.0, -1.0);
    [
        qcore::identity(2),
        qcore::pauli_x(),
        minus_i_y,
        qcore::pauli_z(),
    ]
}

/// Columns are the vectorized basis operators, `B[(2i + o), m] = M_m[o, i]`,
/// so that `J = B χ B† / 2` and `B†B = 2·I`.
fn choi_basis() -> CMatrix {
    let basis = operator_basis();
    CMatrix::from_fn(4, 4, |row, m| {
        let (i, o) = (row / 2, row % 2);
        basis[m][(o, i)]
    })
}

/// Channel coefficients `χ_mn` in `ρ ↦ Σ χ_mn M_m ρ M_n†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    entries: CMatrix,
}

impl ProcessMatrix {
    /// Validates Hermiticity, complete positivity and trace preservation.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.shape() != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: "4x4".into(),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let dev = hermitian_deviation(&entries);
        if dev > 1e-12 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let chi = Self {
            entries: hermitize(&entries),
        };
        ChoiMatrix::new(chi.choi_raw())?;
        Ok(chi)
    }

    pub(crate) fn from_raw(entries: CMatrix) -> Self {
        Self {
            entries: hermitize(&entries),
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    fn choi_raw(&self) -> CMatrix {
        let b = choi_basis();
        &b * &self.entries * b.adjoint() * c(0.5, 0.0)
    }

    pub fn to_choi(&self) -> ChoiMatrix {
        ChoiMatrix::from_raw(self.choi_raw())
    }

    pub fn from_choi(choi: &ChoiMatrix) -> Self {
        let b = choi_basis();
        Self::from_raw(b.adjoint() * choi.matrix() * &b * c(0.5, 0.0))
    }

    /// `Σ χ_mn M_m ρ M_n†`.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_raw(self.apply_matrix(rho.matrix()))
    }

    pub(crate) fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let basis = operator_basis();
        let mut out = CMatrix::zeros(2, 2);
        for (m, mm) in basis.iter().enumerate() {
            let left = mm * rho;
            for (n, mn) in basis.iter().enumerate() {
                let coef = self.entries[(m, n)];
                if coef == C64::new(0.0, 0.0) {
                    continue;
                }
                out += &left * mn.adjoint() * coef;
            }
        }
        out
    }

    /// Row-major Liouville matrix: `vec(E(ρ)) = S vec(ρ)`.
    fn transfer_matrix(&self) -> CMatrix {
        let basis = operator_basis();
        let mut s = CMatrix::zeros(4, 4);
        for (m, mm) in basis.iter().enumerate() {
            for (n, mn) in basis.iter().enumerate() {
                let coef = self.entries[(m, n)];
                if coef != C64::new(0.0, 0.0) {
                    s += mm.kronecker(&mn.map(|z| z.conj())) * coef;
                }
            }
        }
        s
    }

    fn from_transfer_matrix(s: &CMatrix) -> Self {
        // J[(i,o),(j,o')] = ⟨o|E(|i⟩⟨j|)|o'⟩ / 2 = S[(o,o'),(i,j)] / 2.
        let choi = CMatrix::from_fn(4, 4, |r, col| {
            let (i, o) = (r / 2, r % 2);
            let (j, op) = (col / 2, col % 2);
            s[(2 * o + op, 2 * i + j)] * 0.5
        });
        Self::from_choi(&ChoiMatrix::from_raw(choi))
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &ProcessMatrix) -> f64 {
        qcore::max_abs(&(&self.entries - &other.entries))
    }
}

/// Unit-trace Choi matrix on `input ⊗ output`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    entries: CMatrix,
}

impl ChoiMatrix {
    /// Validates Hermiticity, PSD (eigenvalues ≥ −1e-10) and
    /// `tr_out J = I/2` (within 1e-10).
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.shape() != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: "4x4".into(),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let dev = hermitian_deviation(&entries);
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let choi = Self::from_raw(entries);
        let min = choi.min_eigenvalue();
        if min < -qcore::EIGEN_CLAMP {
            return Err(Error::InvalidState(format!(
                "Choi matrix has eigenvalue {min:.3e}"
            )));
        }
        let tp = choi.tp_deviation();
        if tp > 1e-10 {
            return Err(Error::InvalidState(format!(
                "map is not trace preserving (deviation {tp:.3e})"
            )));
        }
        Ok(choi)
    }

    pub(crate) fn from_raw(entries: CMatrix) -> Self {
        Self {
            entries: hermitize(&entries),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        jacobi_eigh(&self.entries).min()
    }

    /// Largest entry of `|tr_out J − I/2|`.
    pub fn tp_deviation(&self) -> f64 {
        let marginal = partial_trace_matrix(&self.entries, Subsystem::First);
        qcore::max_abs(&(marginal - qcore::identity(2) * c(0.5, 0.0)))
    }

    /// Channel acting on a qubit state: `E(ρ) = 2·tr_in[(ρᵀ ⊗ I) J]`.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let lifted = rho.matrix().transpose().kronecker(&qcore::identity(2));
        let product = lifted * &self.entries;
        DensityMatrix::from_raw(partial_trace_matrix(&product, Subsystem::Second) * c(2.0, 0.0))
    }
}

/// Process matrix of the pure dephasing channel with decoherence factor `k`:
/// `ρ_01 ↦ k*·ρ_01`, populations untouched.
pub fn process_from_kappa(k: C64) -> Result<ProcessMatrix> {
    if k.norm() > 1.0 + KAPPA_SLACK || !k.norm().is_finite() {
        return Err(Error::Domain(format!("|kappa| = {} exceeds 1", k.norm())));
    }
    let quarter = 0.25;
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = (c(2.0, 0.0) + k + k.conj()) * quarter;
    m[(0, 3)] = (k - k.conj()) * quarter;
    m[(3, 0)] = (k.conj() - k) * quarter;
    m[(3, 3)] = (c(2.0, 0.0) - k - k.conj()) * quarter;
    Ok(ProcessMatrix { entries: m })
}

pub fn apply_process(chi: &ProcessMatrix, rho: &DensityMatrix) -> DensityMatrix {
    chi.apply(rho)
}

/// `chi_b ∘ chi_a` (first `chi_a`, then `chi_b`).
pub fn compose(chi_b: &ProcessMatrix, chi_a: &ProcessMatrix) -> ProcessMatrix {
    let s = chi_b.transfer_matrix() * chi_a.transfer_matrix();
    ProcessMatrix::from_transfer_matrix(&s)
}

pub fn chi_to_choi(chi: &ProcessMatrix) -> ChoiMatrix {
    chi.to_choi()
}

pub fn choi_to_chi(choi: &ChoiMatrix) -> ProcessMatrix {
    ProcessMatrix::from_choi(choi)
}

/// Process matrix of `ρ ↦ U ρ U†`.
pub fn unitary_process(u: &CMatrix) -> ProcessMatrix {
    let basis = operator_basis();
    let coeffs: Vec<C64> = basis
        .iter()
        .map(|m| (m.adjoint() * u).trace() * 0.5)
        .collect();
    ProcessMatrix::from_raw(CMatrix::from_fn(4, 4, |i, j| coeffs[i] * coeffs[j].conj()))
}

/// Environment-level reference: the frequency marginal is discretized into
/// midpoint bins, each bin applies `diag(1, e^{iφ})` to the polarization,
/// and the environment is traced out by summing the bins with their weights.
pub fn simulate_environment(
    spec: &Spectrum,
    p: &EvolutionParams,
    rho0: &DensityMatrix,
    n_samples: usize,
) -> Result<DensityMatrix> {
    if n_samples < 16 {
        return Err(Error::Domain(format!(
            "n_samples = {n_samples} must be at least 16"
        )));
    }
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "2x2".into(),
            found: format!("{}x{}", rho0.dim(), rho0.dim()),
        });
    }
    let g = 2.0 * PI * p.s * p.lambda0_nm;
    let comps = spec.components();
    let per_component = (n_samples / comps.len()).max(8);

    let mut bins: Vec<(f64, f64)> = Vec::with_capacity(n_samples);
    for comp in comps {
        if comp.sigma_nm == 0.0 {
            bins.push((comp.center_nm, comp.weight));
            continue;
        }
        let lo = comp.center_nm - 8.0 * comp.sigma_nm;
        let width = 16.0 * comp.sigma_nm / per_component as f64;
        let mids: Vec<f64> = (0..per_component)
            .map(|b| lo + (b as f64 + 0.5) * width)
            .collect();
        let dens: Vec<f64> = mids
            .iter()
            .map(|&m| {
                let u = (m - comp.center_nm) / comp.sigma_nm;
                (-0.5 * u * u).exp()
            })
            .collect();
        let total: f64 = dens.iter().sum();
        bins.extend(
            mids.into_iter()
                .zip(dens)
                .map(|(m, d)| (m, comp.weight * d / total)),
        );
    }

    let rho = rho0.matrix();
    let mut out = CMatrix::zeros(2, 2);
    for (lam, w) in bins {
        let phase = C64::from_polar(1.0, g / lam);
        let mut u = qcore::identity(2);
        u[(1, 1)] = phase;
        out += &u * rho * u.adjoint() * c(w, 0.0);
    }
    // Each bin is unitary and diagonal, so populations are exactly those of rho0.
    out[(0, 0)] = rho[(0, 0)];
    out[(1, 1)] = rho[(1, 1)];
    Ok(DensityMatrix::from_raw(out))
}

/// Linear-inversion process tomography from the probe states H, V, +, R.
///
/// The off-diagonal matrix units are recovered by linearity:
/// `E(|0⟩⟨1|) = P + iQ`, `E(|1⟩⟨0|) = P − iQ` with
/// `P = E(+) − (E(H) + E(V))/2`, `Q = E(R) − (E(H) + E(V))/2`.
pub fn simulate_tomography<F>(channel: F) -> Result<ProcessMatrix>
where
    F: Fn(&DensityMatrix) -> DensityMatrix,
{
    let out_h = channel(&DensityMatrix::h()).into_matrix();
    let out_v = channel(&DensityMatrix::v()).into_matrix();
    let out_p = channel(&DensityMatrix::plus()).into_matrix();
    let out_r = channel(&DensityMatrix::right()).into_matrix();
    let avg = (&out_h + &out_v) * c(0.5, 0.0);
    let p = &out_p - &avg;
    let q = &out_r - &avg;
    let e01 = &p + &q * c(0.0, 1.0);
    let e10 = &p - &q * c(0.0, 1.0);
    let units = [[out_h, e01], [e10, out_v]];

    let mut choi = CMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            for o in 0..2 {
                for op in 0..2 {
                    choi[(2 * i + o, 2 * j + op)] = units[i][j][(o, op)] * 0.5;
                }
            }
        }
    }
    let choi = ChoiMatrix::from_raw(choi);
    let min = choi.min_eigenvalue();
    if min < -1e-8 {
        return Err(Error::NonPhysicalChannel {
            min_eigenvalue: min,
        });
    }
    Ok(ProcessMatrix::from_choi(&choi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::max_abs;
    use crate::spectra::table1_preset;

    fn params(s: f64) -> EvolutionParams {
        EvolutionParams::default().at(s)
    }

    #[test]
    fn kappa_at_zero_is_one() {
        for id in crate::spectra::PRESET_IDS {
            let spec = table1_preset(id).unwrap();
            let k = kappa(&spec, &params(0.0));
            assert!((k - c(1.0, 0.0)).norm() < 1e-15);
            assert!((kappa_quadrature(&spec, &params(0.0)) - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sharp_line_is_pure_phase() {
        let spec = Spectrum::single(702.672, 0.0).unwrap();
        for s in [0.3, 17.0, 160.0, 499.5] {
            assert!((kappa(&spec, &params(s)).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kappa_single_line_modulus() {
        let spec = table1_preset("6.0").unwrap();
        let k = kappa(&spec, &params(160.0));
        let a = 2.0 * PI * 160.0 * 702.0 * 0.198 / (702.672f64 * 702.672);
        let expected = (-0.5 * a * a).exp();
        assert!((k.norm() - expected).abs() < 1e-7);
        assert!((k.norm() - 0.9607).abs() < 1e-4);
        let q = kappa_quadrature(&spec, &params(160.0));
        assert!((k - q).norm() < 1e-6);
    }

    #[test]
    fn equal_weight_beat_minimum() {
        let spec = Spectrum::from_amplitudes(&[(1.0, 700.6, 0.2), (1.0, 704.3, 0.2)]).unwrap();
        let grid = uniform_grid(200.0, 0.1).unwrap();
        let moduli: Vec<f64> = grid
            .iter()
            .map(|&s| kappa_quadrature(&spec, &params(s)).norm())
            .collect();
        let argmin = (0..moduli.len())
            .min_by(|&i, &j| moduli[i].total_cmp(&moduli[j]))
            .unwrap();
        // Inter-peak phase difference 2π·s·λ0·(1/c1 − 1/c2) equals π here.
        let s_pi = 0.5 / (702.0 * (1.0 / 700.6 - 1.0 / 704.3));
        assert!(
            (grid[argmin] - s_pi).abs() < 1.0,
            "{} vs {}",
            grid[argmin],
            s_pi
        );
    }

    #[test]
    fn process_from_kappa_examples() {
        let id = process_from_kappa(c(1.0, 0.0)).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = c(1.0, 0.0);
        assert_eq!(id.entries(), &want);

        let deph = process_from_kappa(c(0.0, 0.0)).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = c(0.5, 0.0);
        want[(3, 3)] = c(0.5, 0.0);
        assert_eq!(deph.entries(), &want);

        let imag = process_from_kappa(c(0.0, 1.0)).unwrap();
        let e = imag.entries();
        assert_eq!(e[(0, 0)], c(0.5, 0.0));
        assert_eq!(e[(3, 3)], c(0.5, 0.0));
        assert_eq!(e[(0, 3)], c(0.0, 0.5));
        assert_eq!(e[(3, 0)], c(0.0, -0.5));

        assert!(matches!(
            process_from_kappa(c(1.1, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn apply_process_examples() {
        let rho = DensityMatrix::bloch(1.1, 0.4);
        let id = process_from_kappa(c(1.0, 0.0)).unwrap();
        assert!(max_abs(&(id.apply(&rho).matrix() - rho.matrix())) < 1e-15);

        let deph = process_from_kappa(c(0.0, 0.0)).unwrap();
        let out = deph.apply(&DensityMatrix::plus());
        assert!(max_abs(&(out.matrix() - qcore::identity(2) * c(0.5, 0.0))) < 1e-15);

        let half = process_from_kappa(c(0.5, 0.0)).unwrap();
        let out = half.apply(&DensityMatrix::plus());
        assert!((out.get(0, 1).norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dephasing_conjugates_coherence() {
        let k = C64::from_polar(0.7, 1.3);
        let rho = DensityMatrix::plus();
        let out = process_from_kappa(k).unwrap().apply(&rho);
        assert!((out.get(0, 1) - k.conj() * 0.5).norm() < 1e-15);
        assert!((out.get(1, 0) - k * 0.5).norm() < 1e-15);
    }

    #[test]
    fn compose_half_steps_squares_kappa() {
        let spec = table1_preset("8.5").unwrap();
        let kh = kappa(&spec, &params(80.0));
        let half = process_from_kappa(kh).unwrap();
        let composite = compose(&half, &half);
        let squared = process_from_kappa(kh * kh).unwrap();
        assert!(composite.max_abs_diff(&squared) < 1e-12);
    }

    #[test]
    fn compose_with_identity_and_sharp_semigroup() {
        let chi = process_from_kappa(C64::from_polar(0.4, -2.0)).unwrap();
        let id = process_from_kappa(c(1.0, 0.0)).unwrap();
        assert!(compose(&id, &chi).max_abs_diff(&chi) < 1e-15);
        assert!(compose(&chi, &id).max_abs_diff(&chi) < 1e-15);

        let sharp = Spectrum::single(702.672, 0.0).unwrap();
        let full = process_from_kappa(kappa(&sharp, &params(160.0))).unwrap();
        let half = process_from_kappa(kappa(&sharp, &params(80.0))).unwrap();
        assert!(compose(&half, &half).max_abs_diff(&full) < 1e-12);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = unitary_process(&(qcore::pauli_x() * c(0.6, 0.0) + qcore::pauli_z() * c(0.8, 0.0)));
        let b = process_from_kappa(C64::from_polar(0.3, 0.2)).unwrap();
        let rho = DensityMatrix::bloch(0.7, 2.1);
        let seq = b.apply(&a.apply(&rho));
        let comp = compose(&b, &a).apply(&rho);
        assert!(max_abs(&(seq.matrix() - comp.matrix())) < 1e-14);
    }

    #[test]
    fn choi_examples() {
        let id = process_from_kappa(c(1.0, 0.0)).unwrap().to_choi();
        assert!(max_abs(&(id.matrix() - DensityMatrix::phi_plus().matrix())) < 1e-15);

        let deph = process_from_kappa(c(0.0, 0.0)).unwrap().to_choi();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = c(0.5, 0.0);
        want[(3, 3)] = c(0.5, 0.0);
        assert!(max_abs(&(deph.matrix() - want)) < 1e-15);

        let k = C64::from_polar(0.6, 0.5);
        let chi = process_from_kappa(k).unwrap();
        let choi = chi.to_choi();
        assert!((choi.matrix()[(0, 3)] - k.conj() * 0.5).norm() < 1e-15);
        let rho = DensityMatrix::bloch(0.9, -1.0);
        assert!(max_abs(&(choi.apply(&rho).matrix() - chi.apply(&rho).matrix())) < 1e-15);
    }

    #[test]
    fn choi_validation() {
        assert!(ChoiMatrix::new(DensityMatrix::phi_plus().into_matrix()).is_ok());
        let not_tp = DensityMatrix::h()
            .tensor(&DensityMatrix::h())
            .unwrap()
            .into_matrix();
        assert!(ChoiMatrix::new(not_tp).is_err());
    }

    #[test]
    fn simulate_environment_examples() {
        let spec = table1_preset("6.0").unwrap();
        let rho = DensityMatrix::bloch(0.8, 0.3);
        let at0 = simulate_environment(&spec, &params(0.0), &rho, 64).unwrap();
        assert!(max_abs(&(at0.matrix() - rho.matrix())) < 1e-15);

        let diag = DensityMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.3, 0.0),
            c(0.7, 0.0),
        ])))
        .unwrap();
        let out = simulate_environment(&spec, &params(77.0), &diag, 64).unwrap();
        assert_eq!(out.matrix(), diag.matrix());

        let out = simulate_environment(&spec, &params(40.0), &DensityMatrix::plus(), 512).unwrap();
        let k = kappa(&spec, &params(40.0));
        assert!((out.get(0, 1) - k.conj() * 0.5).norm() < 1e-3);
        assert!(simulate_environment(&spec, &params(1.0), &rho, 8).is_err());
    }

    #[test]
    fn tomography_examples() {
        let chi = process_from_kappa(c(0.0, 0.3)).unwrap();
        let rec = simulate_tomography(|r| chi.apply(r)).unwrap();
        assert!(rec.max_abs_diff(&chi) < 1e-12);

        let constant = simulate_tomography(|_| DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        let want = qcore::identity(4) * c(0.25, 0.0);
        assert!(max_abs(&(constant.entries() - want)) < 1e-15);

        let transpose = |r: &DensityMatrix| DensityMatrix::new(r.matrix().transpose()).unwrap();
        assert!(matches!(
            simulate_tomography(transpose),
            Err(Error::NonPhysicalChannel { .. })
        ));
    }

    #[test]
    fn tomography_of_z_rotation_is_rank_one() {
        let angle: f64 = 0.7;
        let mut u = qcore::identity(2);
        u[(0, 0)] = C64::from_polar(1.0, -angle / 2.0);
        u[(1, 1)] = C64::from_polar(1.0, angle / 2.0);
        let rec =
            simulate_tomography(|r| DensityMatrix::new(&u * r.matrix() * u.adjoint()).unwrap())
                .unwrap();
        // Direct Choi of the unitary: (I ⊗ U)|Φ+⟩.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let ket = [u[(0, 0)] * r, c(0.0, 0.0), c(0.0, 0.0), u[(1, 1)] * r];
        let direct = qcore::projector(&ket);
        assert!(max_abs(&(rec.to_choi().matrix() - &direct)) < 1e-12);
        let eig = jacobi_eigh(rec.to_choi().matrix()).eigenvalues;
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!(eig[1..].iter().all(|x| x.abs() < 1e-12));
        assert!(rec.max_abs_diff(&unitary_process(&u)) < 1e-12);
    }

    #[test]
    fn grid_construction() {
        let g = uniform_grid(160.0, 0.1).unwrap();
        assert_eq!(g.len(), 1601);
        assert_eq!(g[0], 0.0);
        assert!((g[1600] - 160.0).abs() < 1e-9);
        assert!(uniform_grid(1.0, 0.0).is_err());
        assert!(uniform_grid(0.05, 0.1).is_err());
    }
}
