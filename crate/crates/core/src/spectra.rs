//! Optical spectra: Gaussian mixtures over wavelength, measured samples and
//! the fit that connects them.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points in a measured spectrum.
pub const MIN_SAMPLE_POINTS: usize = 8;

const SIGMA_BOUNDS: (f64, f64) = (0.01, 5.0);
const PEAK_SEPARATION: usize = 5;

/// One Gaussian of the mixture. `weight` is `a_j / Σ a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub center_nm: f64,
    pub sigma_nm: f64,
}

/// Normalized wavelength distribution with one or two Gaussian components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    components: Vec<Component>,
}

impl Spectrum {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() || components.len() > 2 {
            return Err(Error::Domain(format!(
                "a spectrum has 1 or 2 components, got {}",
                components.len()
            )));
        }
        for comp in &components {
            if !(comp.weight > 0.0 && comp.weight <= 1.0) {
                return Err(Error::Domain(format!(
                    "weight {} outside (0, 1]",
                    comp.weight
                )));
            }
            if !(comp.center_nm > 0.0 && comp.center_nm.is_finite()) {
                return Err(Error::Domain(format!(
                    "center {} nm must be positive",
                    comp.center_nm
                )));
            }
            if !(comp.sigma_nm >= 0.0 && comp.sigma_nm.is_finite()) {
                return Err(Error::Domain(format!(
                    "sigma {} nm must be nonnegative",
                    comp.sigma_nm
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        if components.len() == 2 && components[0].center_nm == components[1].center_nm {
            return Err(Error::Domain("component centers must be distinct".into()));
        }
        Ok(Self { components })
    }

    /// Builds weights from unnormalized amplitudes `(a_j, center, sigma)`.
    pub fn from_amplitudes(parts: &[(f64, f64, f64)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Domain("amplitudes must have a positive sum".into()));
        }
        let mut components: Vec<Component> = parts
            .iter()
            .map(|&(a, center_nm, sigma_nm)| Component {
                weight: a / total,
                center_nm,
                sigma_nm,
            })
            .collect();
        // Absorb the last-bit rounding so the weights sum to exactly 1.
        let last = components.len() - 1;
        let head: f64 = components[..last].iter().map(|c| c.weight).sum();
        components[last].weight = 1.0 - head;
        Self::new(components)
    }

    pub fn single(center_nm: f64, sigma_nm: f64) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            center_nm,
            sigma_nm,
        }])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Same shape with every width replaced by `sigma_nm`.
    pub fn with_sigma(&self, sigma_nm: f64) -> Result<Self> {
        Self::new(
            self.components
                .iter()
                .map(|c| Component { sigma_nm, ..*c })
                .collect(),
        )
    }

    /// True when every component is a delta line.
    pub fn is_monochromatic(&self) -> bool {
        self.components.iter().all(|c| c.sigma_nm == 0.0)
    }

    /// Probability density per nm. Delta components contribute nothing.
    pub fn density(&self, wavelength_nm: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.sigma_nm > 0.0)
            .map(|c| c.weight * gaussian(wavelength_nm, c.center_nm, c.sigma_nm))
            .sum()
    }

    /// Noiseless sample of the density on the given wavelengths.
    pub fn sample(&self, wavelengths_nm: &[f64]) -> Result<SpectrumSample> {
        SpectrumSample::new(
            wavelengths_nm
                .iter()
                .map(|&w| SamplePoint {
                    wavelength_nm: w,
                    intensity: self.density(w),
                })
                .collect(),
        )
    }
}

fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let u = (x - center) / sigma;
    (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub wavelength_nm: f64,
    pub intensity: f64,
}

/// Measured spectrum: at least eight points, strictly increasing wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    points: Vec<SamplePoint>,
    /// Set when the input rows were not in wavelength order.
    pub resorted: bool,
}

impl SpectrumSample {
    /// Sorts by wavelength and validates.
    pub fn new(mut points: Vec<SamplePoint>) -> Result<Self> {
        if points.len() < MIN_SAMPLE_POINTS {
            return Err(Error::InsufficientData {
                found: points.len(),
                required: MIN_SAMPLE_POINTS,
            });
        }
        for p in &points {
            if !p.wavelength_nm.is_finite() || !p.intensity.is_finite() {
                return Err(Error::Validation("non-finite value".into()));
            }
            if p.intensity < 0.0 {
                return Err(Error::Validation(format!(
                    "negative intensity {} at {} nm",
                    p.intensity, p.wavelength_nm
                )));
            }
        }
        let resorted = points
            .windows(2)
            .any(|w| w[1].wavelength_nm < w[0].wavelength_nm);
        points.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        if points
            .windows(2)
            .any(|w| w[1].wavelength_nm == w[0].wavelength_nm)
        {
            return Err(Error::Validation("duplicate wavelength".into()));
        }
        Ok(Self { points, resorted })
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.wavelength_nm).collect()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.intensity).collect()
    }

    /// Every intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.points
                .iter()
                .map(|p| SamplePoint {
                    intensity: p.intensity * factor,
                    ..*p
                })
                .collect(),
        )
    }

    /// Writes the `wavelength_nm,intensity` CSV form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,intensity\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.wavelength_nm, p.intensity));
        }
        out
    }
}

/// Parses a `wavelength_nm,intensity` CSV.
pub fn load_spectrum<R: Read>(reader: R) -> Result<SpectrumSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().collect();
    if names != ["wavelength_nm", "intensity"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `wavelength_nm,intensity`, found `{}`",
                names.join(",")
            ),
        });
    }

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {:?}", &record[i]),
            })
        };
        points.push(SamplePoint {
            wavelength_nm: field(0)?,
            intensity: field(1)?,
        });
    }
    SpectrumSample::new(points)
}

pub fn load_spectrum_file(path: impl AsRef<Path>) -> Result<SpectrumSample> {
    let file = std::fs::File::open(path)?;
    load_spectrum(std::io::BufReader::new(file))
}

/// Result of [`fit_mixture`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub spectrum: Spectrum,
    /// Root-mean-square residual in the sample's intensity units.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted amplitudes that collapsed to zero and were removed.
    pub dropped_components: usize,
}

/// Fits a one- or two-Gaussian mixture `Σ a_j N(λ; c_j, σ_j)` with free
/// amplitudes, centers and widths by Levenberg–Marquardt.
///
/// Components of the result are ordered by increasing center.
pub fn fit_mixture(sample: &SpectrumSample, n_components: usize) -> Result<FitReport> {
    if !(1..=2).contains(&n_components) {
        return Err(Error::Domain(format!(
            "n_components must be 1 or 2, got {n_components}"
        )));
    }
    let x = sample.wavelengths();
    let raw = sample.intensities();
    let ymax = raw.iter().cloned().fold(0.0, f64::max);
    let ymin = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    if ymax.is_nan() || ymax <= 0.0 {
        return Err(Error::Fit("sample has no positive intensity".into()));
    }
    if ymax == ymin {
        return Err(Error::Fit("flat sample has no peak to fit".into()));
    }
    // Fitting on intensities scaled to unit maximum keeps every criterion
    // independent of the count-rate scale.
    let y: Vec<f64> = raw.iter().map(|v| v / ymax).collect();
    let bounds = Bounds {
        center: (x[0], x[x.len() - 1]),
        sigma: SIGMA_BOUNDS,
    };
    let init = initial_guess(&x, &y, n_components, &bounds);
    let fit = levenberg_marquardt(&x, &y, init, &bounds)?;

    let mut parts: Vec<(f64, f64, f64)> = fit
        .params
        .chunks(3)
        .map(|p| (p[0] * ymax, p[1], p[2]))
        .collect();
    let before = parts.len();
    parts.retain(|p| p.0 > 0.0);
    let dropped_components = before - parts.len();
    if parts.is_empty() {
        return Err(Error::Fit(
            "every fitted amplitude collapsed to zero".into(),
        ));
    }
    parts.sort_by(|a, b| a.1.total_cmp(&b.1));
    if parts.len() == 2 && parts[0].1 == parts[1].1 {
        // Coincident centers describe a single line.
        let merged = (
            parts[0].0 + parts[1].0,
            parts[0].1,
            parts[0].2.max(parts[1].2),
        );
        parts = vec![merged];
    }
    Ok(FitReport {
        spectrum: Spectrum::from_amplitudes(&parts)?,
        residual_rms: (2.0 * fit.cost / x.len() as f64).sqrt() * ymax,
        iterations: fit.iterations,
        converged: fit.converged,
        dropped_components,
    })
}

struct Bounds {
    center: (f64, f64),
    sigma: (f64, f64),
}

impl Bounds {
    fn project(&self, params: &mut [f64]) {
        for p in params.chunks_mut(3) {
            p[0] = p[0].max(0.0);
            p[1] = p[1].clamp(self.center.0, self.center.1);
            p[2] = p[2].clamp(self.sigma.0, self.sigma.1);
        }
    }
}

/// Peak picking on a 3-point smoothed copy: the two highest local maxima at
/// least five grid points apart, ties going to the lower wavelength.
fn initial_guess(x: &[f64], y: &[f64], n_components: usize, bounds: &Bounds) -> Vec<f64> {
    let n = y.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut peaks: Vec<usize> = (1..n - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]).then(a.cmp(&b)));
    if peaks.is_empty() {
        let argmax = (0..n).fold(0, |best, i| if smooth[i] > smooth[best] { i } else { best });
        peaks.push(argmax);
    }
    let first = peaks[0];
    let second = peaks
        .iter()
        .copied()
        .find(|&p| p.abs_diff(first) >= PEAK_SEPARATION);

    let guess_for = |i: usize| -> [f64; 3] {
        let half = y[i] / 2.0;
        let mut lo = i;
        while lo > 0 && y[lo] > half {
            lo -= 1;
        }
        let mut hi = i;
        while hi < n - 1 && y[hi] > half {
            hi += 1;
        }
        let hwhm = 0.5 * (x[hi] - x[lo]);
        let sigma = (hwhm / (2.0 * 2f64.ln()).sqrt()).clamp(bounds.sigma.0, bounds.sigma.1);
        [y[i] * sigma * (2.0 * PI).sqrt(), x[i], sigma]
    };

    let mut params = guess_for(first).to_vec();
    if n_components == 2 {
        match second {
            Some(j) => params.extend(guess_for(j)),
            None => {
                // Single-peaked data: seed a weak shoulder two widths away.
                let [a, center, sigma] = guess_for(first);
                let shifted = if center + 2.0 * sigma <= bounds.center.1 {
                    center + 2.0 * sigma
                } else {
                    center - 2.0 * sigma
                };
                params.extend([0.05 * a, shifted, sigma]);
            }
        }
    }
    bounds.project(&mut params);
    params
}

fn model_and_jacobian(x: &[f64], params: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = x.len();
    let mut f = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, params.len());
    for (k, p) in params.chunks(3).enumerate() {
        let (a, center, sigma) = (p[0], p[1], p[2]);
        for (i, &xi) in x.iter().enumerate() {
            let u = (xi - center) / sigma;
            let g = gaussian(xi, center, sigma);
            f[i] += a * g;
            jac[(i, 3 * k)] = g;
            jac[(i, 3 * k + 1)] = a * g * u / sigma;
            jac[(i, 3 * k + 2)] = a * g * (u * u - 1.0) / sigma;
        }
    }
    (f, jac)
}

struct LmOutcome {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

const LM_MAX_ITER: usize = 500;

/// Largest cosine between the residual and a Jacobian column; dimensionless,
/// so the test does not depend on the intensity or wavelength scale.
fn scaled_gradient(grad: &DVector<f64>, jtj: &DMatrix<f64>, cost: f64) -> f64 {
    let rnorm = (2.0 * cost).sqrt();
    (0..grad.len())
        .map(|i| {
            let col = jtj[(i, i)].sqrt();
            if col == 0.0 || rnorm == 0.0 {
                0.0
            } else {
                grad[i].abs() / (col * rnorm)
            }
        })
        .fold(0.0, f64::max)
}

/// Box-projected Levenberg–Marquardt with Marquardt (diagonal) scaling and
/// Nielsen's damping update.
fn levenberg_marquardt(x: &[f64], y: &[f64], init: Vec<f64>, bounds: &Bounds) -> Result<LmOutcome> {
    let y = DVector::from_column_slice(y);
    let y_norm_sq = y.norm_squared();
    let mut params = init;
    let (f, mut jac) = model_and_jacobian(x, &params);
    let mut resid = &y - f;
    let mut cost = 0.5 * resid.norm_squared();
    let mut mu = {
        let jtj = jac.transpose() * &jac;
        1e-3 * (0..jtj.nrows()).map(|i| jtj[(i, i)]).fold(0.0, f64::max)
    };
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < LM_MAX_ITER {
        iterations += 1;
        let grad = jac.transpose() * &resid;
        let jtj = jac.transpose() * &jac;
        if cost <= 1e-28 * y_norm_sq || scaled_gradient(&grad, &jtj, cost) < 1e-8 {
            converged = true;
            break;
        }
        let mut lhs = jtj.clone();
        for i in 0..lhs.nrows() {
            lhs[(i, i)] += mu * jtj[(i, i)].max(1e-12);
        }
        let Some(step) = lhs.cholesky().map(|ch| ch.solve(&grad)) else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let mut trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, d)| p + d).collect();
        bounds.project(&mut trial);
        let taken =
            DVector::from_iterator(trial.len(), trial.iter().zip(&params).map(|(t, p)| t - p));
        let (f_new, jac_new) = model_and_jacobian(x, &trial);
        let resid_new = &y - f_new;
        let cost_new = 0.5 * resid_new.norm_squared();
        if cost_new.is_nan() {
            return Err(Error::Fit("cost became NaN".into()));
        }
        let predicted = cost - 0.5 * (&resid - &jac * &taken).norm_squared();
        let gain = if predicted > 0.0 {
            (cost - cost_new) / predicted
        } else {
            -1.0
        };
        if cost_new < cost && gain > 0.0 {
            let rel_decrease = (cost - cost_new) / cost;
            params = trial;
            jac = jac_new;
            resid = resid_new;
            cost = cost_new;
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * gain - 1.0).powi(3));
            nu = 2.0;
            if rel_decrease < 1e-10 {
                converged = true;
                break;
            }
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e20 {
                break;
            }
        }
    }
    Ok(LmOutcome {
        params,
        cost,
        iterations,
        converged,
    })
}

/// Valid preset identifiers, in table order.
pub const PRESET_IDS: [&str; 9] = [
    "1.5", "2.5", "3.5", "4.0", "6.0", "7.5", "8.0", "8.5", "9.0",
];

/// `(θ, c1, c2, a1, a2, σ1, σ2)`; single-line rows carry `None` for the second peak.
#[allow(clippy::type_complexity)]
const TABLE: [(f64, f64, Option<f64>, f64, Option<f64>, f64, Option<f64>); 9] = [
    (
        1.5,
        700.608,
        Some(704.286),
        0.787,
        Some(1.455),
        0.185,
        Some(0.212),
    ),
    (
        2.5,
        700.476,
        Some(704.153),
        0.545,
        Some(1.636),
        0.212,
        Some(0.225),
    ),
    (
        3.5,
        700.238,
        Some(703.836),
        0.182,
        Some(1.787),
        0.172,
        Some(0.225),
    ),
    (
        4.0,
        700.079,
        Some(703.651),
        0.901,
        Some(1.848),
        0.172,
        Some(0.212),
    ),
    (6.0, 702.672, None, 1.848, None, 0.198, None),
    (7.5, 701.720, None, 1.909, None, 0.185, None),
    (
        8.0,
        701.349,
        Some(704.788),
        1.636,
        Some(0.273),
        0.212,
        Some(0.212),
    ),
    (
        8.5,
        701.005,
        Some(704.603),
        1.333,
        Some(0.758),
        0.185,
        Some(0.212),
    ),
    (
        9.0,
        700.635,
        Some(704.286),
        0.667,
        Some(1.545),
        0.185,
        Some(0.212),
    ),
];

/// Spectrum of the fitted Fabry–Pérot transmission at tilt angle `theta`
/// (degrees, as one of [`PRESET_IDS`]).
pub fn table1_preset(theta: &str) -> Result<Spectrum> {
    let unknown = || Error::UnknownPreset {
        requested: theta.to_string(),
        valid: PRESET_IDS.join(", "),
    };
    let value: f64 = theta.trim().parse().map_err(|_| unknown())?;
    let row = TABLE
        .iter()
        .find(|row| (row.0 - value).abs() < 1e-9)
        .ok_or_else(unknown)?;
    let (_, c1, c2, a1, a2, s1, s2) = *row;
    match (c2, a2, s2) {
        (Some(c2), Some(a2), Some(s2)) => Spectrum::from_amplitudes(&[(a1, c1, s1), (a2, c2, s2)]),
        _ => Spectrum::from_amplitudes(&[(a1, c1, s1)]),
    }
}

/// `2·sqrt(2·ln 2)`.
pub fn fwhm_factor() -> f64 {
    2.0 * (2.0 * 2f64.ln()).sqrt()
}

pub fn fwhm_of_sigma(sigma_nm: f64) -> Result<f64> {
    if sigma_nm.is_nan() || sigma_nm < 0.0 {
        return Err(Error::Domain(format!(
            "sigma {sigma_nm} must be nonnegative"
        )));
    }
    Ok(fwhm_factor() * sigma_nm)
}

pub fn sigma_of_fwhm(fwhm_nm: f64) -> Result<f64> {
    if fwhm_nm.is_nan() || fwhm_nm < 0.0 {
        return Err(Error::Domain(format!("FWHM {fwhm_nm} must be nonnegative")));
    }
    Ok(fwhm_nm / fwhm_factor())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn preset_single_line() {
        let s = table1_preset("6.0").unwrap();
        assert_eq!(
            s.components(),
            &[Component {
                weight: 1.0,
                center_nm: 702.672,
                sigma_nm: 0.198
            }]
        );
    }

    #[test]
    fn preset_two_lines() {
        let s = table1_preset("8.5").unwrap();
        let c = s.components();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].center_nm, c[1].center_nm), (701.005, 704.603));
        assert_eq!((c[0].sigma_nm, c[1].sigma_nm), (0.185, 0.212));
        assert!((c[0].weight - 1.333 / 2.091).abs() < 1e-15);
        assert!((c[0].weight - 0.6375).abs() < 5e-5);
        assert!((c[1].weight - 0.3625).abs() < 5e-5);
    }

    #[test]
    fn preset_unknown_lists_valid_values() {
        match table1_preset("5.0") {
            Err(Error::UnknownPreset { valid, .. }) => assert!(valid.contains("8.5")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(table1_preset("abc").is_err());
        assert!(table1_preset("4").is_ok());
    }

    #[test]
    fn fwhm_conversions() {
        assert!((fwhm_of_sigma(0.1093).unwrap() - 0.2574).abs() < 5e-4);
        assert_eq!(fwhm_of_sigma(0.0).unwrap(), 0.0);
        let factor = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
        assert!((fwhm_of_sigma(1.0).unwrap() - factor).abs() < 1e-15);
        assert!((factor - 2.3548).abs() < 1e-4);
        assert!(fwhm_of_sigma(-0.1).is_err());
        assert!(sigma_of_fwhm(-0.1).is_err());
        let s = 0.37;
        assert!((sigma_of_fwhm(fwhm_of_sigma(s).unwrap()).unwrap() - s).abs() < 1e-15);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::single(-1.0, 0.1).is_err());
        assert!(Spectrum::single(700.0, -0.1).is_err());
        let dup = vec![
            Component {
                weight: 0.5,
                center_nm: 700.0,
                sigma_nm: 0.1,
            },
            Component {
                weight: 0.5,
                center_nm: 700.0,
                sigma_nm: 0.2,
            },
        ];
        assert!(Spectrum::new(dup).is_err());
        let bad_sum = vec![
            Component {
                weight: 0.5,
                center_nm: 700.0,
                sigma_nm: 0.1,
            },
            Component {
                weight: 0.6,
                center_nm: 701.0,
                sigma_nm: 0.2,
            },
        ];
        assert!(Spectrum::new(bad_sum).is_err());
    }

    #[test]
    fn load_csv_basic_and_resorted() {
        let mut text = String::from("wavelength_nm,intensity\n");
        for i in (0..100).rev() {
            text.push_str(&format!("{},{}\n", 700.0 + i as f64 * 0.05, i as f64));
        }
        let s = load_spectrum(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.resorted);
        assert!(s
            .points()
            .windows(2)
            .all(|w| w[0].wavelength_nm < w[1].wavelength_nm));
    }

    #[test]
    fn load_csv_reports_line_of_bad_cell() {
        let mut text = String::from("wavelength_nm,intensity\n");
        for i in 0..30 {
            let v = if i == 15 {
                "oops".to_string()
            } else {
                format!("{}", i)
            };
            text.push_str(&format!("{},{}\n", 700.0 + i as f64, v));
        }
        // Header is line 1, so row index 15 sits on line 17.
        match load_spectrum(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_csv_errors() {
        let short = "wavelength_nm,intensity\n1,1\n2,2\n";
        assert!(matches!(
            load_spectrum(short.as_bytes()),
            Err(Error::InsufficientData { found: 2, .. })
        ));
        let mut negative = String::from("wavelength_nm,intensity\n");
        for i in 0..10 {
            negative.push_str(&format!("{},{}\n", i, if i == 3 { -1.0 } else { 1.0 }));
        }
        assert!(matches!(
            load_spectrum(negative.as_bytes()),
            Err(Error::Validation(_))
        ));
        let header = "lambda,counts\n1,1\n";
        assert!(matches!(
            load_spectrum(header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn exact_single_gaussian_fit() {
        let truth = Spectrum::single(702.3, 0.2).unwrap();
        let sample = truth.sample(&grid(701.0, 703.6, 120)).unwrap();
        let fit = fit_mixture(&sample, 1).unwrap();
        assert!(fit.converged);
        assert!(fit.residual_rms < 1e-10, "rms {}", fit.residual_rms);
        let c = fit.spectrum.components()[0];
        assert!((c.center_nm - 702.3).abs() < 1e-8);
        assert!((c.sigma_nm - 0.2).abs() < 1e-8);
    }

    #[test]
    fn flat_sample_does_not_panic() {
        let points = (0..40)
            .map(|i| SamplePoint {
                wavelength_nm: 700.0 + 0.1 * i as f64,
                intensity: 3.0,
            })
            .collect();
        let sample = SpectrumSample::new(points).unwrap();
        match fit_mixture(&sample, 2) {
            Err(Error::Fit(_)) => {}
            Ok(report) => assert!(!report.converged || report.residual_rms.is_finite()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn two_components_on_single_peak_is_allowed() {
        let truth = Spectrum::single(702.0, 0.25).unwrap();
        let sample = truth.sample(&grid(700.5, 703.5, 150)).unwrap();
        let fit = fit_mixture(&sample, 2).unwrap();
        assert!(fit.residual_rms < 1e-4);
        let dominant = fit
            .spectrum
            .components()
            .iter()
            .cloned()
            .fold(None::<Component>, |best, c| match best {
                Some(b) if b.weight >= c.weight => Some(b),
                _ => Some(c),
            })
            .unwrap();
        assert!((dominant.center_nm - 702.0).abs() < 0.05);
    }
}
