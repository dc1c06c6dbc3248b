//! Shock physics: Rankine-Hugoniot velocity/overpressure conversion, the
//! scaled-distance overpressure law, TNT charge-equivalence inversion and
//! radius-uncertainty interval propagation.
//!
//! Unit conventions: overpressure from the Mach relation is in kPa, the
//! scaled-distance law yields MPa with the scaled distance in m/kg^(1/3);
//! the two are reconciled inside the velocity chain. The ambient sound
//! speed default of 340 m/s is a derived constant: together with
//! P0 = 101.325 kPa it reproduces the reference velocity table, and it is
//! overridable.

use thiserror::Error;

use crate::geom::{self, ViewGeometry};

#[derive(Debug, Error)]
pub enum BlastError {
    #[error("subsonic: {0}")]
    Subsonic(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

/// Ambient constants for the shock relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlastConstants {
    /// Specific heat ratio of air.
    pub eta: f64,
    /// Ambient pressure, kPa.
    pub p0_kpa: f64,
    /// Ambient sound speed, m/s.
    pub c0: f64,
}

impl Default for BlastConstants {
    fn default() -> Self {
        BlastConstants {
            eta: 1.4,
            p0_kpa: 101.325,
            c0: 340.0,
        }
    }
}

impl BlastConstants {
    pub fn validate(&self) -> Result<(), BlastError> {
        if !(self.eta > 1.0) {
            return Err(BlastError::Domain(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.p0_kpa > 0.0) {
            return Err(BlastError::Domain(format!("P0 must be positive, got {}", self.p0_kpa)));
        }
        if !(self.c0 > 0.0) {
            return Err(BlastError::Domain(format!("c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }
}

/// Overpressure in kPa from the front Mach number via the Rankine-Hugoniot
/// condition: `P = 2 eta / (eta + 1) * (M^2 - 1) * P0`.
pub fn overpressure_from_mach(mach: f64, constants: &BlastConstants) -> Result<f64, BlastError> {
    constants.validate()?;
    if mach < 1.0 {
        return Err(BlastError::Subsonic(format!(
            "Mach {mach} below 1: not a shock"
        )));
    }
    Ok(2.0 * constants.eta / (constants.eta + 1.0) * (mach * mach - 1.0) * constants.p0_kpa)
}

/// Overpressure in MPa from the scaled distance `delta = r / W^(1/3)`:
/// `P = 0.108/delta + 0.114/delta^2 + 1.772/delta^3`.
pub fn overpressure_from_scaled_distance(delta: f64) -> Result<f64, BlastError> {
    if !(delta > 0.0) {
        return Err(BlastError::Domain(format!(
            "scaled distance must be positive, got {delta}"
        )));
    }
    Ok(0.108 / delta + 0.114 / (delta * delta) + 1.772 / (delta * delta * delta))
}

/// Front velocity in m/s at scaled distance `delta`, composing the two
/// overpressure relations: `v = c0 sqrt(1 + P (eta+1) / (2 eta P0))` with
/// the MPa -> kPa conversion folded in.
pub fn velocity_from_scaled_distance(delta: f64, constants: &BlastConstants) -> Result<f64, BlastError> {
    constants.validate()?;
    let p_kpa = overpressure_from_scaled_distance(delta)? * 1e3;
    let m2 = 1.0 + p_kpa * (constants.eta + 1.0) / (2.0 * constants.eta * constants.p0_kpa);
    Ok(constants.c0 * m2.sqrt())
}

/// An inverted charge estimate with its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeEstimate {
    /// TNT-equivalent charge mass, kg.
    pub w_kg: f64,
    /// Scaled distance, m/kg^(1/3).
    pub delta: f64,
    /// Overpressure, MPa.
    pub p_mpa: f64,
    /// Input front velocity, m/s.
    pub v: f64,
    /// Input radius, m.
    pub r: f64,
}

/// Inverts the charge equivalence from one (radius, velocity) observation.
///
/// The overpressure follows from the Mach relation; the cubic
/// `1.772 u^3 + 0.114 u^2 + 0.108 u = P` in `u = 1/delta` is solved by
/// bracketed bisection to 1e-12 relative, and `W = (r u)^3`.
pub fn invert_charge(r: f64, v: f64, constants: &BlastConstants) -> Result<ChargeEstimate, BlastError> {
    constants.validate()?;
    if !(r > 0.0) {
        return Err(BlastError::Domain(format!("radius must be positive, got {r}")));
    }
    if v <= constants.c0 {
        return Err(BlastError::Subsonic(format!(
            "velocity {v} m/s not above ambient sound speed {}",
            constants.c0
        )));
    }
    let mach = v / constants.c0;
    let p_mpa = overpressure_from_mach(mach, constants)? / 1e3;
    let f = |u: f64| 1.772 * u * u * u + 0.114 * u * u + 0.108 * u - p_mpa;
    let (mut lo, mut hi) = (1e-6, 1e3);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(BlastError::Numeric(format!(
            "no bisection bracket for overpressure {p_mpa} MPa"
        )));
    }
    // The cubic is strictly increasing on u > 0, so bisection is safe.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / mid <= 1e-12 {
            break;
        }
    }
    let u = 0.5 * (lo + hi);
    Ok(ChargeEstimate {
        w_kg: (r * u).powi(3),
        delta: 1.0 / u,
        p_mpa,
        v,
        r,
    })
}

/// Per-source error bounds for the radius uncertainty propagation. All
/// entries are magnitudes (non-negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBudget {
    /// Blast-to-camera distance error, m.
    pub eps_zeta: f64,
    /// Focal length error, px.
    pub eps_f: f64,
    /// Principal point errors, px.
    pub eps_xo: f64,
    pub eps_yo: f64,
    /// Front extraction error, px per axis (applied to the event point).
    pub eps_a: f64,
    /// Reprojection error, px per axis (applied to the event point and the
    /// blast image point simultaneously).
    pub eps_pi: f64,
}

impl UncertaintyBudget {
    pub fn validate(&self) -> Result<(), BlastError> {
        let all = [self.eps_zeta, self.eps_f, self.eps_xo, self.eps_yo, self.eps_a, self.eps_pi];
        if all.iter().any(|e| !(*e >= 0.0)) {
            return Err(BlastError::Domain("budget entries must be non-negative".into()));
        }
        Ok(())
    }

    /// The reference bounds used for the uncertainty study: 20 px focal,
    /// 5 px principal point, 2 px extraction, 1 px reprojection, 1 mm range.
    pub fn reference() -> Self {
        UncertaintyBudget {
            eps_zeta: 0.001,
            eps_f: 20.0,
            eps_xo: 5.0,
            eps_yo: 5.0,
            eps_a: 2.0,
            eps_pi: 1.0,
        }
    }
}

/// Radius bounds produced by the corner sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusInterval {
    pub r_lo: f64,
    pub r_hi: f64,
    pub nominal: f64,
    /// Set when a corner pushed the view angle out of `[0, pi/2)` and was
    /// clamped; the interval is then conservative.
    pub conservative: bool,
}

/// Propagates the error budget through the view-angle and radius relations.
///
/// Every perturbation axis (zeta, f, x_o, y_o, both components of the
/// extraction error and both components of the reprojection error) is swept
/// over `{-eps, 0, +eps}`; each corner re-evaluates the view angle from the
/// perturbed pixel quantities and the radius as
/// `(zeta + eps_zeta) * sin(theta + eps_theta)`. The interval is the sweep's
/// min/max. Monotonicity of `sin` on the valid range makes zeta and theta
/// extremes land on corners; the full sweep avoids relying on monotonicity
/// in the pixel variables.
pub fn radius_uncertainty(
    geometry: &ViewGeometry,
    image_point: (f64, f64),
    budget: &UncertaintyBudget,
) -> Result<RadiusInterval, BlastError> {
    budget.validate()?;
    let nominal_theta = geom::view_angle(&geom::ray_lengths(geometry, image_point))
        .map_err(|e| BlastError::Domain(format!("nominal geometry: {e}")))?;
    let nominal = geom::radius_from_event(geometry.zeta, nominal_theta)
        .map_err(|e| BlastError::Domain(format!("nominal geometry: {e}")))?;

    let levels = |eps: f64| -> Vec<f64> {
        if eps == 0.0 {
            vec![0.0]
        } else {
            vec![-eps, 0.0, eps]
        }
    };
    let zeta_lv = levels(budget.eps_zeta);
    let f_lv = levels(budget.eps_f);
    let xo_lv = levels(budget.eps_xo);
    let yo_lv = levels(budget.eps_yo);
    let ax_lv = levels(budget.eps_a);
    let ay_lv = levels(budget.eps_a);
    let px_lv = levels(budget.eps_pi);
    let py_lv = levels(budget.eps_pi);

    let (xo, yo) = geometry.camera.principal;
    let f0 = geometry.camera.f;
    let (xa, ya) = image_point;
    let (xb, yb) = (geometry.blast_image.x, geometry.blast_image.y);

    let mut r_lo = f64::INFINITY;
    let mut r_hi = f64::NEG_INFINITY;
    let mut conservative = false;
    let max_theta = std::f64::consts::FRAC_PI_2 - 1e-12;

    for &df in &f_lv {
        let f = f0 + df;
        for &dxo in &xo_lv {
            for &dyo in &yo_lv {
                for &dax in &ax_lv {
                    for &day in &ay_lv {
                        for &dpx in &px_lv {
                            for &dpy in &py_lv {
                                // Perturbed view-angle inputs: the
                                // reprojection error shifts the event point
                                // and the blast point together.
                                let xo_p = xo + dxo;
                                let yo_p = yo + dyo;
                                let xa_p = xa + dax + dpx;
                                let ya_p = ya + day + dpy;
                                let xb_p = xb + dpx;
                                let yb_p = yb + dpy;
                                let ca = ((xo_p - xa_p).powi(2) + (yo_p - ya_p).powi(2) + f * f).sqrt();
                                let cb = ((xo_p - xb_p).powi(2) + (yo_p - yb_p).powi(2) + f * f).sqrt();
                                let ab = (xa_p - xb_p).hypot(ya_p - yb_p);
                                let cos = ((ca * ca + cb * cb - ab * ab) / (2.0 * cb * ca)).clamp(-1.0, 1.0);
                                let theta_p = cos.acos();
                                let eps_theta = theta_p - nominal_theta;
                                let mut theta = nominal_theta + eps_theta;
                                if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
                                    conservative = true;
                                    theta = theta.clamp(0.0, max_theta);
                                }
                                for &dz in &zeta_lv {
                                    let r = (geometry.zeta + dz) * theta.sin();
                                    r_lo = r_lo.min(r);
                                    r_hi = r_hi.max(r);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(RadiusInterval {
        r_lo,
        r_hi,
        nominal,
        conservative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::CameraModel;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Vector3};

    const C: BlastConstants = BlastConstants {
        eta: 1.4,
        p0_kpa: 101.325,
        c0: 340.0,
    };

    #[test]
    fn mach_relation_reference_points() {
        assert_abs_diff_eq!(overpressure_from_mach(1.0, &C).unwrap(), 0.0, epsilon = 1e-12);
        let p = overpressure_from_mach(398.84 / 340.0, &C).unwrap();
        assert!((p - 44.45).abs() < 0.01, "P = {p} kPa");
        assert!(overpressure_from_mach(0.99, &C).is_err());
        assert!(
            overpressure_from_mach(1.2, &C).unwrap() > overpressure_from_mach(1.1, &C).unwrap()
        );
    }

    #[test]
    fn scaled_distance_law_reference_points() {
        assert_abs_diff_eq!(
            overpressure_from_scaled_distance(1.0).unwrap(),
            1.994,
            epsilon = 1e-12
        );
        let delta = 8.0 / 0.6f64.cbrt();
        let p = overpressure_from_scaled_distance(delta).unwrap();
        assert!((p - 0.014731).abs() < 1e-5, "P = {p} MPa");
        assert!(overpressure_from_scaled_distance(0.0).is_err());
        assert!(overpressure_from_scaled_distance(-1.0).is_err());
        // Monotone decay toward zero.
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let p = overpressure_from_scaled_distance(k as f64).unwrap();
            assert!(p < last && p > 0.0);
            last = p;
        }
    }

    #[test]
    fn velocity_chain_reproduces_reference_table() {
        let w: f64 = 0.6;
        let cbrt = w.cbrt();
        let cases = [(4.0, 398.84), (6.0, 370.76), (8.0, 360.56)];
        for (r, expected) in cases {
            let v = velocity_from_scaled_distance(r / cbrt, &C).unwrap();
            let rel = (v - expected).abs() / expected;
            assert!(rel < 1e-3, "r={r}: v={v}, expected {expected} ({rel:.2e})");
        }
    }

    #[test]
    fn unit_audit_closes_the_kpa_mpa_loop() {
        // Empirical velocities back through the Mach relation must agree
        // with the scaled-distance law at the matching delta.
        let cbrt = 0.6f64.cbrt();
        for r in [4.0, 6.0, 8.0] {
            let delta = r / cbrt;
            let v = velocity_from_scaled_distance(delta, &C).unwrap();
            let p_mach = overpressure_from_mach(v / C.c0, &C).unwrap();
            let p_delta = overpressure_from_scaled_distance(delta).unwrap() * 1e3;
            assert!(
                ((p_mach - p_delta) / p_delta).abs() < 1e-3,
                "r={r}: {p_mach} vs {p_delta}"
            );
        }
    }

    #[test]
    fn charge_inversion_reference_points() {
        let cases = [
            (4.0, 402.03, 657.46),
            (6.0, 373.38, 707.12),
            (8.0, 360.87, 620.48),
        ];
        for (r, v, grams) in cases {
            let est = invert_charge(r, v, &C).unwrap();
            let got = est.w_kg * 1e3;
            let rel = (got - grams).abs() / grams;
            assert!(rel < 5e-3, "r={r} v={v}: {got} g vs {grams} g ({rel:.2e})");
            assert_abs_diff_eq!(est.delta, r / est.w_kg.cbrt(), epsilon = 1e-9);
        }
        assert!(invert_charge(4.0, 300.0, &C).is_err());
        assert!(invert_charge(0.0, 400.0, &C).is_err());
    }

    #[test]
    fn forward_inverse_round_trip() {
        let mut s = 5u64;
        let mut unif = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..300 {
            let w = 0.1 + 99.9 * unif();
            let r = 2.0 + 48.0 * unif();
            let v = velocity_from_scaled_distance(r / w.cbrt(), &C).unwrap();
            let est = invert_charge(r, v, &C).unwrap();
            let rel = ((est.w_kg - w) / w).abs();
            assert!(rel < 1e-6, "w={w} r={r}: rel {rel:.2e}");
        }
    }

    #[test]
    fn monotonicities() {
        // v decreasing in r for fixed W; W increasing in v for fixed r.
        let w: f64 = 0.6;
        let mut last_v = f64::INFINITY;
        for k in 0..40 {
            let r = 2.0 + k as f64 * 0.5;
            let v = velocity_from_scaled_distance(r / w.cbrt(), &C).unwrap();
            assert!(v < last_v);
            last_v = v;
        }
        let mut last_w = 0.0;
        for k in 0..40 {
            let v = 345.0 + k as f64 * 5.0;
            let w = invert_charge(6.0, v, &C).unwrap().w_kg;
            assert!(w > last_w);
            last_w = w;
        }
    }

    fn test_geometry() -> ViewGeometry {
        let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        let c = Vector3::new(-20.0, 0.0, 1.5);
        let t = -(r * c);
        let cam = CameraModel::from_parameters(855.27, (632.04, 355.46), r, t).unwrap();
        ViewGeometry::new(cam, Vector3::new(0.0, 0.0, 1.5)).unwrap()
    }

    #[test]
    fn zero_budget_interval_is_degenerate() {
        let g = test_geometry();
        let a = (g.blast_image.x + 180.0, g.blast_image.y + 40.0);
        let zero = UncertaintyBudget {
            eps_zeta: 0.0,
            eps_f: 0.0,
            eps_xo: 0.0,
            eps_yo: 0.0,
            eps_a: 0.0,
            eps_pi: 0.0,
        };
        let iv = radius_uncertainty(&g, a, &zero).unwrap();
        assert_abs_diff_eq!(iv.r_lo, iv.nominal, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.r_hi, iv.nominal, epsilon = 1e-12);
        assert!(!iv.conservative);
    }

    #[test]
    fn zeta_only_budget_is_linear() {
        let g = test_geometry();
        let a = (g.blast_image.x + 180.0, g.blast_image.y + 40.0);
        let budget = UncertaintyBudget {
            eps_zeta: 0.001,
            eps_f: 0.0,
            eps_xo: 0.0,
            eps_yo: 0.0,
            eps_a: 0.0,
            eps_pi: 0.0,
        };
        let iv = radius_uncertainty(&g, a, &budget).unwrap();
        let theta = geom::view_angle(&geom::ray_lengths(&g, a)).unwrap();
        assert_abs_diff_eq!(iv.r_hi - iv.nominal, 0.001 * theta.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(iv.nominal - iv.r_lo, 0.001 * theta.sin(), epsilon = 1e-12);
    }

    #[test]
    fn interval_width_grows_with_budget() {
        let g = test_geometry();
        let a = (g.blast_image.x + 180.0, g.blast_image.y + 40.0);
        let mut base = UncertaintyBudget::reference();
        let w0 = {
            let iv = radius_uncertainty(&g, a, &base).unwrap();
            iv.r_hi - iv.r_lo
        };
        base.eps_f *= 2.0;
        let w1 = {
            let iv = radius_uncertainty(&g, a, &base).unwrap();
            iv.r_hi - iv.r_lo
        };
        assert!(w1 >= w0);
        base.eps_a *= 3.0;
        let w2 = {
            let iv = radius_uncertainty(&g, a, &base).unwrap();
            iv.r_hi - iv.r_lo
        };
        assert!(w2 >= w1);
    }

    #[test]
    fn containment_of_random_within_budget_perturbations() {
        let g = test_geometry();
        let a = (g.blast_image.x + 180.0, g.blast_image.y + 40.0);
        let budget = UncertaintyBudget::reference();
        let iv = radius_uncertainty(&g, a, &budget).unwrap();
        let mut s = 99u64;
        let mut unif = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..2000 {
            let df = budget.eps_f * unif();
            let dxo = budget.eps_xo * unif();
            let dyo = budget.eps_yo * unif();
            let dax = budget.eps_a * unif();
            let day = budget.eps_a * unif();
            let dpx = budget.eps_pi * unif();
            let dpy = budget.eps_pi * unif();
            let dz = budget.eps_zeta * unif();
            let f = g.camera.f + df;
            let (xo, yo) = (g.camera.principal.0 + dxo, g.camera.principal.1 + dyo);
            let (xa, ya) = (a.0 + dax + dpx, a.1 + day + dpy);
            let (xb, yb) = (g.blast_image.x + dpx, g.blast_image.y + dpy);
            let ca = ((xo - xa).powi(2) + (yo - ya).powi(2) + f * f).sqrt();
            let cb = ((xo - xb).powi(2) + (yo - yb).powi(2) + f * f).sqrt();
            let ab = (xa - xb).hypot(ya - yb);
            let theta = (((ca * ca + cb * cb - ab * ab) / (2.0 * ca * cb)).clamp(-1.0, 1.0)).acos();
            let r = (g.zeta + dz) * theta.sin();
            assert!(
                r >= iv.r_lo - 1e-12 && r <= iv.r_hi + 1e-12,
                "r {r} outside [{}, {}]",
                iv.r_lo,
                iv.r_hi
            );
        }
    }
}
