//! Non-Markovianity criteria over a family of dephasing channels `χ_s`.
//!
//! Every measure is a positive variation (sum of positive increments) of a
//! scalar trajectory on the uniform grid `0, step, …, s_max`:
//!
//! | measure | trajectory |
//! |---------|------------|
//! | `W_α`, `W_β` | composition `α(χ_s)` / robustness `β(χ_s)` |
//! | BLP | trace distance of an evolved antipodal pure pair, maximized over pairs |
//! | RHP | concurrence of `(χ_s ⊗ id)(Φ+)` |
//! | LFS | mutual information of `(χ_s ⊗ id)(Φ+)` |
//!
//! `N_α`, `N_β` instead compare `χ_s` with the two-leg composite
//! `χ_{(1−f)s} ∘ χ_{f s}` built from the same spectrum.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    compose, kappa, process_from_kappa, uniform_grid, EvolutionParams, ProcessMatrix,
};
use crate::error::{Error, Result};
use crate::qcore::{self, concurrence, hermitian_eig, mutual_information, DensityMatrix, C64};
use crate::quantumness::{self, ClassicalSetFormulation};
use crate::spectra::Spectrum;

/// Sum of positive increments `Σ max(0, x[i+1] − x[i])`.
pub fn positive_variation(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            found: xs.len(),
            required: 2,
        });
    }
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "trajectory contains non-finite value {bad}"
        )));
    }
    Ok(xs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum())
}

/// Dephasing channels `χ_s` of one spectrum on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsFamily {
    spectrum: Spectrum,
    params: EvolutionParams,
    s_max: f64,
    step: f64,
    grid: Vec<f64>,
}

impl DynamicsFamily {
    /// `params.s` is ignored; only the Δn/λ0 convention is used.
    pub fn new(spectrum: Spectrum, params: EvolutionParams, s_max: f64, step: f64) -> Result<Self> {
        let grid = uniform_grid(s_max, step)?;
        Ok(Self {
            spectrum,
            params: params.at(0.0),
            s_max,
            step,
            grid,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn kappa_at(&self, s: f64) -> C64 {
        kappa(&self.spectrum, &self.params.at(s))
    }

    pub fn process_at(&self, s: f64) -> Result<ProcessMatrix> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!(
                "path difference s = {s} must be nonnegative"
            )));
        }
        process_from_kappa(self.kappa_at(s))
    }

    /// `χ_s` for every grid point, in grid order.
    pub fn processes(&self) -> Result<Vec<ProcessMatrix>> {
        self.grid.par_iter().map(|&s| self.process_at(s)).collect()
    }

    pub fn kappa_values(&self) -> Vec<C64> {
        self.grid.par_iter().map(|&s| self.kappa_at(s)).collect()
    }

    /// `(χ_s ⊗ id)(Φ+)`, which is the Choi state up to the order of the factors.
    pub fn evolved_bell_states(&self) -> Result<Vec<DensityMatrix>> {
        self.grid
            .par_iter()
            .map(|&s| {
                let choi = self.process_at(s)?.to_choi();
                DensityMatrix::new(choi.matrix().clone())
            })
            .collect()
    }
}

/// Which quantumness measure a criterion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantumness {
    Alpha,
    Beta,
}

pub fn quantumness_of(
    chi: &ProcessMatrix,
    which: Quantumness,
    formulation: &ClassicalSetFormulation,
) -> Result<f64> {
    match which {
        Quantumness::Alpha => Ok(quantumness::alpha(chi, formulation)?.alpha),
        Quantumness::Beta => Ok(quantumness::beta(chi, formulation)?.beta),
    }
}

pub fn quantumness_trajectory(
    f: &DynamicsFamily,
    which: Quantumness,
    formulation: &ClassicalSetFormulation,
) -> Result<Vec<f64>> {
    f.grid
        .par_iter()
        .map(|&s| quantumness_of(&f.process_at(s)?, which, formulation))
        .collect()
}

/// `(α(χ_s), β(χ_s))` for every grid point.
pub fn quantumness_trajectories(
    f: &DynamicsFamily,
    formulation: &ClassicalSetFormulation,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs: Vec<(f64, f64)> = f
        .grid
        .par_iter()
        .map(|&s| {
            let report = quantumness::quantify(&f.process_at(s)?, formulation)?;
            Ok((report.alpha.alpha, report.beta.beta))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

pub fn hcl_w(
    f: &DynamicsFamily,
    which: Quantumness,
    formulation: &ClassicalSetFormulation,
) -> Result<f64> {
    positive_variation(&quantumness_trajectory(f, which, formulation)?)
}

/// `χ_{(1−f)s} ∘ χ_{f s}` with the environment re-prepared for each leg.
pub fn composite_process(f: &DynamicsFamily, s: f64, t1_fraction: f64) -> Result<ProcessMatrix> {
    if !(t1_fraction > 0.0 && t1_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "t1_fraction {t1_fraction} outside (0, 1)"
        )));
    }
    let first = f.process_at(t1_fraction * s)?;
    let second = f.process_at((1.0 - t1_fraction) * s)?;
    Ok(compose(&second, &first))
}

/// Channels closer than this in every χ entry are treated as the same map.
const SAME_MAP_TOL: f64 = 1e-12;

pub fn hcl_n(
    f: &DynamicsFamily,
    s: f64,
    t1_fraction: f64,
    which: Quantumness,
    formulation: &ClassicalSetFormulation,
) -> Result<f64> {
    let direct = f.process_at(s)?;
    let composite = composite_process(f, s, t1_fraction)?;
    if direct.max_abs_diff(&composite) <= SAME_MAP_TOL {
        return Ok(0.0);
    }
    let a = quantumness_of(&direct, which, formulation)?;
    let b = quantumness_of(&composite, which, formulation)?;
    Ok((a - b).abs())
}

/// Trace norm of the Choi difference between `χ_s` and `χ_{s/2} ∘ χ_{s/2}`.
/// For dephasing channels this is `|κ(s) − κ(s/2)²|`.
pub fn divisibility_gap(f: &DynamicsFamily, s: f64) -> Result<f64> {
    let direct = f.process_at(s)?;
    let half = f.process_at(0.5 * s)?;
    let composite = compose(&half, &half);
    let diff = direct.to_choi().matrix() - composite.to_choi().matrix();
    let eig = hermitian_eig(&qcore::hermitize(&diff))?;
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).sum())
}

pub fn trace_distance_trajectory(
    f: &DynamicsFamily,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<Vec<f64>> {
    f.grid
        .par_iter()
        .map(|&s| {
            let chi = f.process_at(s)?;
            qcore::trace_distance(&chi.apply(rho1), &chi.apply(rho2))
        })
        .collect()
}

pub fn concurrence_trajectory(f: &DynamicsFamily) -> Result<Vec<f64>> {
    f.evolved_bell_states()?
        .par_iter()
        .map(concurrence)
        .collect()
}

pub fn mutual_information_trajectory(f: &DynamicsFamily) -> Result<Vec<f64>> {
    f.evolved_bell_states()?
        .par_iter()
        .map(mutual_information)
        .collect()
}

pub fn rhp(f: &DynamicsFamily) -> Result<f64> {
    positive_variation(&concurrence_trajectory(f)?)
}

pub fn lfs(f: &DynamicsFamily) -> Result<f64> {
    positive_variation(&mutual_information_trajectory(f)?)
}

// ---------------------------------------------------------------------------
// BLP pair search
// ---------------------------------------------------------------------------

/// Antipodal pure pairs `ρ(θ, φ)`, `ρ(π − θ, φ + π)` on an azimuth × polar
/// grid over the upper hemisphere (poles and equator included), followed by
/// Nelder–Mead refinement of the best grid pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlpSearch {
    pub n_azimuth: usize,
    pub n_polar: usize,
    pub refine: bool,
    pub max_evaluations: usize,
}

impl Default for BlpSearch {
    fn default() -> Self {
        Self {
            n_azimuth: 32,
            n_polar: 16,
            refine: true,
            max_evaluations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlpOptimum {
    pub measure: f64,
    /// Bloch angles of the first state of the pair.
    pub theta: f64,
    pub phi: f64,
}

impl BlpOptimum {
    pub fn states(&self) -> (DensityMatrix, DensityMatrix) {
        (
            DensityMatrix::bloch(self.theta, self.phi),
            DensityMatrix::bloch(PI - self.theta, self.phi + PI),
        )
    }
}

type Block = [C64; 4];

/// Images `χ_s(X)`, `χ_s(Y)`, `χ_s(Z)` per grid point; the evolved difference
/// of an antipodal pair with Bloch vector `n` is `Σ n_k χ_s(σ_k)`.
struct PauliImages(Vec<[Block; 3]>);

impl PauliImages {
    fn new(f: &DynamicsFamily) -> Result<Self> {
        let paulis = [qcore::pauli_x(), qcore::pauli_y(), qcore::pauli_z()];
        let images = f
            .processes()?
            .iter()
            .map(|chi| {
                paulis.clone().map(|p| {
                    let m = chi.apply_matrix(&p);
                    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
                })
            })
            .collect();
        Ok(Self(images))
    }

    fn distances(&self, theta: f64, phi: f64) -> Vec<f64> {
        let n = [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ];
        self.0
            .iter()
            .map(|img| {
                let mut d = [C64::new(0.0, 0.0); 4];
                for (k, block) in img.iter().enumerate() {
                    for (dst, z) in d.iter_mut().zip(block) {
                        *dst += z * n[k];
                    }
                }
                0.5 * trace_norm_2x2(&d)
            })
            .collect()
    }

    fn measure(&self, theta: f64, phi: f64) -> f64 {
        let d = self.distances(theta, phi);
        d.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
    }
}

/// Trace norm of a Hermitian `[[a, b], [b*, d]]` stored row-major.
fn trace_norm_2x2(m: &Block) -> f64 {
    let mean = 0.5 * (m[0].re + m[3].re);
    let half_diff = 0.5 * (m[0].re - m[3].re);
    let r = (half_diff * half_diff + m[1].norm_sqr()).sqrt();
    (mean + r).abs() + (mean - r).abs()
}

pub fn blp_search(f: &DynamicsFamily, search: &BlpSearch) -> Result<BlpOptimum> {
    if search.n_azimuth == 0 || search.n_polar < 2 {
        return Err(Error::Domain(format!(
            "BLP grid {}x{} too small (need azimuth >= 1, polar >= 2)",
            search.n_azimuth, search.n_polar
        )));
    }
    let images = PauliImages::new(f)?;
    let candidates: Vec<(f64, f64)> = (0..search.n_polar)
        .flat_map(|j| {
            let theta = 0.5 * PI * j as f64 / (search.n_polar - 1) as f64;
            (0..search.n_azimuth)
                .map(move |k| (theta, 2.0 * PI * k as f64 / search.n_azimuth as f64))
        })
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(t, p)| images.measure(t, p))
        .collect();
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    let (mut theta, mut phi) = candidates[best];
    let mut measure = scores[best];
    if search.refine && measure > 0.0 {
        let scale = [
            0.25 * PI / search.n_polar as f64,
            PI / search.n_azimuth as f64,
        ];
        let (x, fx) = nelder_mead(
            |x| -images.measure(x[0], x[1]),
            [theta, phi],
            scale,
            search.max_evaluations,
        );
        if -fx > measure {
            measure = -fx;
            theta = x[0];
            phi = x[1];
        }
    }
    Ok(BlpOptimum {
        measure,
        theta,
        phi,
    })
}

pub fn blp(f: &DynamicsFamily, search: &BlpSearch) -> Result<f64> {
    Ok(blp_search(f, search)?.measure)
}

fn nelder_mead(
    obj: impl Fn([f64; 2]) -> f64,
    x0: [f64; 2],
    scale: [f64; 2],
    max_evals: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [x0, [x0[0] + scale[0], x0[1]], [x0[0], x0[1] + scale[1]]];
    let mut values = simplex.map(&obj);
    let mut evals = 3;
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    while evals < max_evals {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() <= 1e-14 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = obj(reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = obj(expanded);
            evals += 1;
            (simplex[2], values[2]) = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted = if fr < values[2] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, simplex[2], 0.5)
            };
            let fc = obj(contracted);
            evals += 1;
            if fc < values[2].min(fr) {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = lerp(simplex[0], simplex[i], 0.5);
                    values[i] = obj(simplex[i]);
                }
                evals += 2;
            }
        }
    }
    let best = (0..3)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(0);
    (simplex[best], values[best])
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// A criterion flags non-Markovian dynamics when its measure exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub hcl_w: f64,
    pub hcl_n: f64,
    pub blp: f64,
    pub rhp: f64,
    pub lfs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            hcl_w: 1e-9,
            hcl_n: 0.01,
            blp: 1e-9,
            rhp: 1e-9,
            lfs: 1e-9,
        }
    }
}

/// `true` means non-Markovian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub blp: bool,
    pub rhp: bool,
    pub lfs: bool,
    pub hcl_w: bool,
    pub hcl_n: bool,
}

#[derive(Debug, Clone)]
pub struct CriteriaOptions {
    pub t1_fraction: f64,
    pub thresholds: Thresholds,
    pub blp_search: BlpSearch,
    pub formulation: ClassicalSetFormulation,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        Self {
            t1_fraction: 0.5,
            thresholds: Thresholds::default(),
            blp_search: BlpSearch::default(),
            formulation: ClassicalSetFormulation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub w_alpha: f64,
    pub w_beta: f64,
    pub n_alpha: f64,
    pub n_beta: f64,
    pub n_blp: f64,
    pub n_rhp: f64,
    pub n_lfs: f64,
    pub verdicts: Verdicts,
    pub thresholds: Thresholds,
    pub formulation: String,
    /// Path difference at which `N_α`, `N_β` are evaluated (`s_max`).
    pub s_eval: f64,
    pub t1_fraction: f64,
}

pub fn evaluate(f: &DynamicsFamily, options: &CriteriaOptions) -> Result<CriteriaReport> {
    let formulation = &options.formulation;
    let (alphas, betas) = quantumness_trajectories(f, formulation)?;
    let w_alpha = positive_variation(&alphas)?;
    let w_beta = positive_variation(&betas)?;
    let s = f.s_max;
    let n_alpha = hcl_n(f, s, options.t1_fraction, Quantumness::Alpha, formulation)?;
    let n_beta = hcl_n(f, s, options.t1_fraction, Quantumness::Beta, formulation)?;
    let n_blp = blp(f, &options.blp_search)?;
    let n_rhp = rhp(f)?;
    let n_lfs = lfs(f)?;
    let t = options.thresholds;
    Ok(CriteriaReport {
        w_alpha,
        w_beta,
        n_alpha,
        n_beta,
        n_blp,
        n_rhp,
        n_lfs,
        verdicts: Verdicts {
            blp: n_blp > t.blp,
            rhp: n_rhp > t.rhp,
            lfs: n_lfs > t.lfs,
            hcl_w: w_alpha.max(w_beta) > t.hcl_w,
            hcl_n: n_alpha.max(n_beta) > t.hcl_n,
        },
        thresholds: t,
        formulation: formulation.tag().to_string(),
        s_eval: s,
        t1_fraction: options.t1_fraction,
    })
}
