//! Least-squares radius-time polynomials and their analytic derivative
//! (front velocity).
//!
//! Fitting runs in a centered and scaled time variable `u = (t - c) / h`
//! over `[-1, 1]` for conditioning; the model evaluates in that basis and
//! converts coefficients to the plain microsecond basis only on export.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("fit error: {0}")]
    Fit(String),
    #[error("domain error: t={t} outside [{lo}, {hi}] us")]
    Domain { t: f64, lo: u64, hi: u64 },
}

/// Fitted radius-over-time polynomial for one (view, angle) series.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusTimeModel {
    degree: usize,
    /// Coefficients in the scaled basis, ascending degree.
    scaled_coeffs: Vec<f64>,
    t_domain: (u64, u64),
    /// RMS of fit residuals, meters.
    pub rms_residual: f64,
    /// False if the fitted radius decreases anywhere on the domain
    /// (checked at 1 us steps). A warning, not an error.
    pub monotone: bool,
}

impl RadiusTimeModel {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Valid evaluation window, microseconds (inclusive).
    pub fn t_domain(&self) -> (u64, u64) {
        self.t_domain
    }

    /// Coefficients in the scaled basis (internal representation).
    pub fn scaled_coeffs(&self) -> &[f64] {
        &self.scaled_coeffs
    }

    /// Builds a model directly from scaled-basis coefficients (used by the
    /// model-file reader). Re-derives the monotonicity flag.
    pub fn from_scaled_coeffs(
        scaled_coeffs: Vec<f64>,
        t_domain: (u64, u64),
        rms_residual: f64,
    ) -> Result<Self, FitError> {
        if scaled_coeffs.is_empty() {
            return Err(FitError::Fit("no coefficients".into()));
        }
        if t_domain.0 >= t_domain.1 {
            return Err(FitError::Fit("empty time domain".into()));
        }
        let mut model = RadiusTimeModel {
            degree: scaled_coeffs.len() - 1,
            scaled_coeffs,
            t_domain,
            rms_residual,
            monotone: true,
        };
        model.monotone = model.check_monotone();
        Ok(model)
    }

    /// Builds a model from plain microsecond-basis coefficients (ascending
    /// degree), e.g. `r(t) = c0 + c1 t + ...` with `r` in meters.
    pub fn from_t_coeffs(coeffs: &[f64], t_domain: (u64, u64)) -> Result<Self, FitError> {
        if coeffs.is_empty() {
            return Err(FitError::Fit("no coefficients".into()));
        }
        let (c, h) = center_scale(t_domain);
        // Substitute t = c + h u by Horner in polynomial arithmetic.
        let mut scaled = vec![0.0];
        for &a in coeffs.iter().rev() {
            scaled = poly_mul_linear(&scaled, c, h);
            scaled[0] += a;
        }
        Self::from_scaled_coeffs(scaled, t_domain, 0.0)
    }

    /// Coefficients converted to the plain microsecond basis, ascending.
    pub fn t_coeffs(&self) -> Vec<f64> {
        let (c, h) = center_scale(self.t_domain);
        // Substitute u = (t - c)/h by Horner in polynomial arithmetic.
        let mut out = vec![0.0];
        for &a in self.scaled_coeffs.iter().rev() {
            out = poly_mul_linear(&out, -c / h, 1.0 / h);
            out[0] += a;
        }
        out
    }

    fn scale(&self) -> (f64, f64) {
        center_scale(self.t_domain)
    }

    fn check_domain(&self, t: f64) -> Result<(), FitError> {
        if t < self.t_domain.0 as f64 || t > self.t_domain.1 as f64 {
            return Err(FitError::Domain {
                t,
                lo: self.t_domain.0,
                hi: self.t_domain.1,
            });
        }
        Ok(())
    }

    /// Fitted radius at `t` microseconds; refuses evaluation off-domain.
    pub fn radius_at(&self, t: f64) -> Result<f64, FitError> {
        self.check_domain(t)?;
        Ok(self.radius_unchecked(t))
    }

    fn radius_unchecked(&self, t: f64) -> f64 {
        let (c, h) = self.scale();
        let u = (t - c) / h;
        horner(&self.scaled_coeffs, u)
    }

    /// Analytic derivative of the fitted radius at `t`, converted to m/s.
    pub fn velocity_at(&self, t: f64) -> Result<f64, FitError> {
        self.check_domain(t)?;
        let (c, h) = self.scale();
        let u = (t - c) / h;
        let deriv: Vec<f64> = self
            .scaled_coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| k as f64 * a)
            .collect();
        let dr_du = horner(&deriv, u);
        // m per scaled unit -> m/us -> m/s.
        Ok(dr_du / h * 1e6)
    }

    /// Earliest domain time at which the fitted radius crosses `r` (meters),
    /// by bisection; `None` when the radius never reaches `r` on the domain.
    pub fn time_at_radius(&self, r: f64) -> Option<f64> {
        let (lo, hi) = (self.t_domain.0 as f64, self.t_domain.1 as f64);
        let r_lo = self.radius_unchecked(lo);
        let r_hi = self.radius_unchecked(hi);
        if r < r_lo.min(r_hi) || r > r_lo.max(r_hi) {
            return None;
        }
        let rising = r_hi >= r_lo;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let v = self.radius_unchecked(mid);
            let below = if rising { v < r } else { v > r };
            if below {
                a = mid;
            } else {
                b = mid;
            }
            if (b - a) < 1e-9 {
                break;
            }
        }
        Some(0.5 * (a + b))
    }

    fn check_monotone(&self) -> bool {
        let (lo, hi) = self.t_domain;
        let mut prev = self.radius_unchecked(lo as f64);
        let mut t = lo;
        while t < hi {
            t += 1;
            let cur = self.radius_unchecked(t as f64);
            if cur < prev - 1e-12 {
                return false;
            }
            prev = cur;
        }
        true
    }
}

fn center_scale(t_domain: (u64, u64)) -> (f64, f64) {
    let lo = t_domain.0 as f64;
    let hi = t_domain.1 as f64;
    (0.5 * (lo + hi), 0.5 * (hi - lo).max(1.0))
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc.mul_add(x, c))
}

/// Multiplies polynomial `p` (ascending coeffs) by the linear factor
/// `(a + b x)`.
fn poly_mul_linear(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &coef) in p.iter().enumerate() {
        out[i] += coef * a;
        out[i + 1] += coef * b;
    }
    // Trim a redundant leading zero so repeated composition stays compact.
    while out.len() > 1 && out.last() == Some(&0.0) {
        out.pop();
    }
    out
}

/// Least-squares polynomial fit of radius (meters) over time (microseconds)
/// for one (view, angle) sample series.
pub fn fit_radius_time(samples: &[(f64, f64)], degree: usize) -> Result<RadiusTimeModel, FitError> {
    if degree < 1 {
        return Err(FitError::Fit("degree must be at least 1".into()));
    }
    if samples.len() < degree + 1 {
        return Err(FitError::Fit(format!(
            "underdetermined: degree {degree} needs {} samples, got {}",
            degree + 1,
            samples.len()
        )));
    }
    let t_lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(t_lo.is_finite() && t_hi.is_finite()) || t_hi <= t_lo {
        return Err(FitError::Fit("time samples do not span an interval".into()));
    }
    let t_domain = (t_lo.floor() as u64, t_hi.ceil() as u64);
    let (c, h) = center_scale(t_domain);

    let n = samples.len();
    let mut v = DMatrix::<f64>::zeros(n, degree + 1);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, &(t, r)) in samples.iter().enumerate() {
        let u = (t - c) / h;
        let mut pow = 1.0;
        for k in 0..=degree {
            v[(i, k)] = pow;
            pow *= u;
        }
        rhs[i] = r;
    }
    let svd = v.clone().svd(true, true);
    let coeffs = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| FitError::Fit(format!("least squares failed: {e}")))?;
    let residual = (&v * &coeffs - &rhs).norm_squared();
    let rms = (residual / n as f64).sqrt();
    RadiusTimeModel::from_scaled_coeffs(coeffs.iter().copied().collect(), t_domain, rms)
}

/// Serialized radius-time model of one (view, angle) series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub view: usize,
    pub alpha_deg: f64,
    pub t_lo_us: u64,
    pub t_hi_us: u64,
    pub degree: usize,
    /// Coefficients in the centered/scaled basis, ascending degree.
    pub scaled_coeffs: Vec<f64>,
    pub rms_residual_m: f64,
    pub monotone: bool,
}

impl ModelEntry {
    pub fn from_model(view: usize, alpha_deg: f64, model: &RadiusTimeModel) -> Self {
        ModelEntry {
            view,
            alpha_deg,
            t_lo_us: model.t_domain().0,
            t_hi_us: model.t_domain().1,
            degree: model.degree(),
            scaled_coeffs: model.scaled_coeffs().to_vec(),
            rms_residual_m: model.rms_residual,
            monotone: model.monotone,
        }
    }

    pub fn to_model(&self) -> Result<RadiusTimeModel, FitError> {
        RadiusTimeModel::from_scaled_coeffs(
            self.scaled_coeffs.clone(),
            (self.t_lo_us, self.t_hi_us),
            self.rms_residual_m,
        )
    }
}

/// The model file: one entry per fitted (view, angle).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsFile {
    #[serde(default)]
    pub models: Vec<ModelEntry>,
}

impl ModelsFile {
    pub fn write(&self, path: &Path) -> Result<(), FitError> {
        let text = toml::to_string(self).map_err(|e| FitError::Fit(format!("model serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| FitError::Fit(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<ModelsFile, FitError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FitError::Fit(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| FitError::Fit(format!("{}: {e}", path.display())))
    }
}
