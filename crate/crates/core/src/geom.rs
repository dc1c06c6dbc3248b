//! Tangent-sphere geometry: physical radius recovery from image-space front
//! events, cross-view image-point solves and 3D reconstruction.
//!
//! The observed silhouette of an expanding shock sphere corresponds to the
//! tangent point of the viewing ray, so with `zeta` the blast-to-camera
//! distance and `theta` the view angle between the blast ray and the event
//! ray, the radius is `r = zeta * sin(theta)`.

use nalgebra::{Matrix3x4, Vector3};
use thiserror::Error;

use crate::calib::CameraModel;
use crate::event::{BlastImagePoint, PolarEvent};

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("out-of-model: {0}")]
    OutOfModel(String),
    #[error("projection error: {0}")]
    Projection(String),
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
    #[error("empty input: {0}")]
    Empty(String),
}

/// One camera's view of the blast: calibration, blast image point and the
/// blast-to-optical-center distance `zeta`.
#[derive(Debug, Clone)]
pub struct ViewGeometry {
    pub camera: CameraModel,
    pub blast_image: BlastImagePoint,
    pub blast_world: Vector3<f64>,
    /// `|blast_world - optical_center|`, meters.
    pub zeta: f64,
}

impl ViewGeometry {
    /// Builds a view geometry; the blast image point comes from projecting
    /// the blast world point through the camera.
    pub fn new(camera: CameraModel, blast_world: Vector3<f64>) -> Result<Self, GeomError> {
        let (x, y) = camera
            .project(&blast_world)
            .ok_or_else(|| GeomError::Geometry("blast center on the principal plane".into()))?;
        let zeta = (blast_world - camera.optical_center).norm();
        Ok(ViewGeometry {
            camera,
            blast_image: BlastImagePoint::new(x, y),
            blast_world,
            zeta,
        })
    }

    /// Uses a measured blast image point instead of the projected one; it
    /// must sit within `tol_px` of the projection.
    pub fn with_measured_blast(
        camera: CameraModel,
        blast_world: Vector3<f64>,
        blast_image: BlastImagePoint,
        tol_px: f64,
    ) -> Result<Self, GeomError> {
        let mut geom = ViewGeometry::new(camera, blast_world)?;
        let dx = geom.blast_image.x - blast_image.x;
        let dy = geom.blast_image.y - blast_image.y;
        let dev = dx.hypot(dy);
        if dev > tol_px {
            return Err(GeomError::Geometry(format!(
                "measured blast image point is {dev:.3} px from the projection (tol {tol_px})"
            )));
        }
        geom.blast_image = blast_image;
        Ok(geom)
    }
}

/// The three ray lengths of the view triangle, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayLengths {
    /// Optical center to the event image point.
    pub ca: f64,
    /// Optical center to the blast image point.
    pub cb: f64,
    /// Event image point to blast image point (in-plane).
    pub ab: f64,
}

/// Lengths of the rays from the optical center through the image plane to
/// the event point `a` and the blast point, plus their in-plane separation.
pub fn ray_lengths(geometry: &ViewGeometry, a: (f64, f64)) -> RayLengths {
    let (xo, yo) = geometry.camera.principal;
    let f = geometry.camera.f;
    let (xb, yb) = (geometry.blast_image.x, geometry.blast_image.y);
    let ca = ((xo - a.0).powi(2) + (yo - a.1).powi(2) + f * f).sqrt();
    let cb = ((xo - xb).powi(2) + (yo - yb).powi(2) + f * f).sqrt();
    let ab = (a.0 - xb).hypot(a.1 - yb);
    RayLengths { ca, cb, ab }
}

/// View angle between the blast ray and the event ray from the cosine rule.
pub fn view_angle(lengths: &RayLengths) -> Result<f64, GeomError> {
    let RayLengths { ca, cb, ab } = *lengths;
    if ca <= 0.0 || cb <= 0.0 {
        return Err(GeomError::Geometry("non-positive ray length".into()));
    }
    let cos = (ca * ca + cb * cb - ab * ab) / (2.0 * cb * ca);
    if cos.abs() > 1.0 + 1e-12 {
        return Err(GeomError::Geometry(format!(
            "inconsistent lengths: |cos| = {} > 1",
            cos.abs()
        )));
    }
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Shock radius from the tangent-point relation `r = zeta * sin(theta)`.
/// Requires `theta < pi/2`: the camera must still be outside the sphere.
pub fn radius_from_event(zeta: f64, theta: f64) -> Result<f64, GeomError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(GeomError::OutOfModel(format!(
            "view angle {theta} rad outside [0, pi/2): front reached the camera"
        )));
    }
    Ok(zeta * theta.sin())
}

/// One per-angle physical radius observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSample {
    pub view: usize,
    /// Propagation angle of the source event, degrees.
    pub alpha: f64,
    /// Original event timestamp, microseconds.
    pub t: u64,
    /// Shock radius, meters.
    pub r: f64,
    /// View angle, radians.
    pub theta: f64,
}

/// Converts accepted polar front events into physical radius samples.
/// Events whose geometry is out of model (front past the camera) are
/// dropped; everything else keeps its original timestamp.
pub fn samples_from_polar(
    geometry: &ViewGeometry,
    view: usize,
    events: &[PolarEvent],
) -> Vec<FrontSample> {
    events
        .iter()
        .filter_map(|e| {
            let a_rad = e.alpha.to_radians();
            let a = (
                geometry.blast_image.x + e.d * a_rad.cos(),
                geometry.blast_image.y + e.d * a_rad.sin(),
            );
            let theta = view_angle(&ray_lengths(geometry, a)).ok()?;
            let r = radius_from_event(geometry.zeta, theta).ok()?;
            Some(FrontSample {
                view,
                alpha: e.alpha,
                t: e.t,
                r,
                theta,
            })
        })
        .collect()
}

/// Solves for the image point at propagation angle `alpha` whose view angle
/// is `theta`.
///
/// The point is parameterized as `A = B + s * (cos alpha, sin alpha)` with
/// `s > 0`; substituting into the cosine-rule constraint yields a quadratic
/// in `s`. The returned root is validated by recomputing the view angle.
pub fn solve_image_point(
    geometry: &ViewGeometry,
    theta: f64,
    alpha_deg: f64,
) -> Result<(f64, f64), GeomError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(GeomError::Projection(format!(
            "view angle {theta} rad outside [0, pi/2)"
        )));
    }
    let b = geometry.blast_image;
    if theta == 0.0 {
        return Ok((b.x, b.y));
    }
    let (xo, yo) = geometry.camera.principal;
    let a_rad = alpha_deg.to_radians();
    let u = (a_rad.cos(), a_rad.sin());
    let bo = (b.x - xo, b.y - yo);
    let cb2 = bo.0 * bo.0 + bo.1 * bo.1 + geometry.camera.f * geometry.camera.f;
    let bu = bo.0 * u.0 + bo.1 * u.1;
    let cos = theta.cos();
    let sin2 = theta.sin() * theta.sin();
    // s^2 (CB^2 cos^2 - (b.u)^2) - 2 s CB^2 (b.u) sin^2 - CB^4 sin^2 = 0
    let qa = cb2 * cos * cos - bu * bu;
    let qb = -2.0 * cb2 * bu * sin2;
    let qc = -cb2 * cb2 * sin2;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(GeomError::Projection(format!(
            "angle {alpha_deg} deg not visible at theta {theta} rad"
        )));
    }
    let sq = disc.sqrt();
    let mut roots = Vec::with_capacity(2);
    if qa.abs() < 1e-300 {
        if qb.abs() > 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        roots.push((-qb + sq) / (2.0 * qa));
        roots.push((-qb - sq) / (2.0 * qa));
    }
    let mut best: Option<((f64, f64), f64)> = None;
    for s in roots {
        if !(s.is_finite() && s > 0.0) {
            continue;
        }
        let a = (b.x + s * u.0, b.y + s * u.1);
        if let Ok(got) = view_angle(&ray_lengths(geometry, a)) {
            let err = (got - theta).abs();
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((a, err));
            }
        }
    }
    match best {
        Some((a, err)) if err <= 1e-9 => Ok(a),
        Some((_, err)) => Err(GeomError::Projection(format!(
            "no root reproduces theta (best residual {err:.3e} rad)"
        ))),
        None => Err(GeomError::Projection(format!(
            "no positive root for alpha {alpha_deg} deg"
        ))),
    }
}

/// A reconstructed 3D front point with its consistency residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedPoint {
    pub world: Vector3<f64>,
    /// `|X - C|^2 - (zeta^2 - r^2)`, m^2; ~0 at the true tangent point.
    pub tangency_residual: f64,
    /// `||X - B| - r|`, m.
    pub sphere_residual: f64,
}

/// Intersects the viewing ray of `image_point` with the shock sphere of
/// radius `r` and returns the intersection closest to tangency.
///
/// The ray is tangent to the sphere for consistent inputs, so the quadratic
/// discriminant is ~0; slightly negative discriminants (within `1e-6` of the
/// scale) collapse to the closest-approach point.
pub fn reconstruct_point(
    geometry: &ViewGeometry,
    r: f64,
    image_point: (f64, f64),
) -> Result<ReconstructedPoint, GeomError> {
    if r >= geometry.zeta {
        return Err(GeomError::OutOfModel(format!(
            "radius {r} m not below zeta {} m",
            geometry.zeta
        )));
    }
    let cam = &geometry.camera;
    // Back-project the pixel: camera-frame direction, then world frame.
    let dir_cam = Vector3::new(
        (image_point.0 - cam.principal.0) / cam.f,
        (image_point.1 - cam.principal.1) / cam.f,
        1.0,
    );
    let dir = (cam.rotation.transpose() * dir_cam).normalize();
    let c = cam.optical_center;
    let g = c - geometry.blast_world;
    let b_half = g.dot(&dir);
    let disc = b_half * b_half - (g.norm_squared() - r * r);
    let tol = 1e-6 * geometry.zeta * geometry.zeta;
    if disc < -tol {
        return Err(GeomError::Reconstruction(format!(
            "viewing ray misses the sphere (discriminant {disc:.3e})"
        )));
    }
    let sq = disc.max(0.0).sqrt();
    // The closest-approach point joins the two intersections as a
    // candidate: at tangency the discriminant is pure cancellation noise
    // and the closest approach is the accurate tangent point.
    let candidates = [-b_half - sq, -b_half + sq, -b_half];
    let target = geometry.zeta * geometry.zeta - r * r;
    let mut best: Option<(Vector3<f64>, f64)> = None;
    for t in candidates {
        if t <= 0.0 {
            continue;
        }
        let x = c + dir * t;
        let tangency = (x - c).norm_squared() - target;
        if best.is_none_or(|(_, res)| tangency.abs() < res.abs()) {
            best = Some((x, tangency));
        }
    }
    let (world, tangency_residual) = best.ok_or_else(|| {
        GeomError::Reconstruction("sphere intersection behind the camera".into())
    })?;
    let sphere_residual = ((world - geometry.blast_world).norm() - r).abs();
    Ok(ReconstructedPoint {
        world,
        tangency_residual,
        sphere_residual,
    })
}

/// Pinhole projection through an arbitrary 3x4 matrix with homogeneous
/// normalization.
pub fn project_point(gamma: &Matrix3x4<f64>, world: &Vector3<f64>) -> Result<(f64, f64), GeomError> {
    let h = gamma * world.push(1.0);
    if h.z.abs() < 1e-12 {
        return Err(GeomError::Projection(
            "point projects to infinity (homogeneous scale ~ 0)".into(),
        ));
    }
    Ok((h.x / h.z, h.y / h.z))
}

/// Population statistics of a velocity (or any) sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation (N divisor).
    pub stddev: f64,
}

/// Mean, median and population standard deviation. Inputs are sorted
/// internally so the reduction order is deterministic.
pub fn aggregate_statistics(values: &[f64]) -> Result<Stats, GeomError> {
    if values.is_empty() {
        return Err(GeomError::Empty("no values to aggregate".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Stats {
        mean,
        median,
        stddev: var.sqrt(),
    })
}
