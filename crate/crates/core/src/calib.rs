//! LED-marker detection from per-pixel trigger statistics and camera
//! calibration from 2D-3D correspondences.
//!
//! The marker detector works on trigger-count matrices accumulated over one
//! flicker cycle: a coarse argmax pick followed by a polarity-balanced
//! centroid refinement. The pose solver is a normalized direct linear
//! transform with an optional (off by default) Gauss-Newton refinement.
//!
//! Conventions fixed by this crate: the rotation maps world to camera
//! coordinates, `C = -R^T * T`, and the projection matrix is synthesized as
//! `K [R | T]` with `K = [[f, 0, cx], [0, f, cy], [0, 0, 1]]` so its third
//! row yields homogeneous scale 1 at unit depth.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::Event;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("detection error: {0}")]
    Detection(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-pixel trigger counts over one flicker window, split by polarity.
#[derive(Debug, Clone)]
pub struct TriggerMatrices {
    pub width: usize,
    pub height: usize,
    /// Accumulation window `[t_start, t_end)` in microseconds.
    pub window: (u64, u64),
    total: Vec<u32>,
    pos: Vec<u32>,
    neg: Vec<u32>,
}

impl TriggerMatrices {
    pub fn d(&self, x: usize, y: usize) -> u32 {
        self.total[y * self.width + x]
    }

    pub fn d_pos(&self, x: usize, y: usize) -> u32 {
        self.pos[y * self.width + x]
    }

    pub fn d_neg(&self, x: usize, y: usize) -> u32 {
        self.neg[y * self.width + x]
    }

    /// Balanced-polarity weight `min(D+, D-)` at one pixel.
    pub fn balanced(&self, x: usize, y: usize) -> u32 {
        self.d_pos(x, y).min(self.d_neg(x, y))
    }
}

/// Counts triggers per pixel and polarity for events inside `window`.
pub fn accumulate_trigger_matrices(
    events: &[Event],
    width: u32,
    height: u32,
    window: (u64, u64),
) -> TriggerMatrices {
    let (w, h) = (width as usize, height as usize);
    let mut m = TriggerMatrices {
        width: w,
        height: h,
        window,
        total: vec![0; w * h],
        pos: vec![0; w * h],
        neg: vec![0; w * h],
    };
    for e in events {
        if e.t < window.0 || e.t >= window.1 {
            continue;
        }
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= w || y >= h {
            continue;
        }
        let idx = y * w + x;
        m.total[idx] += 1;
        if e.p > 0 {
            m.pos[idx] += 1;
        } else {
            m.neg[idx] += 1;
        }
    }
    m
}

/// Coarse marker position: the pixel with the most triggers. Ties break to
/// the smallest `(y, x)` so the pick is reproducible.
pub fn led_coarse(matrices: &TriggerMatrices) -> Result<(u16, u16), CalibError> {
    let mut best = 0u32;
    let mut best_xy: Option<(u16, u16)> = None;
    for y in 0..matrices.height {
        for x in 0..matrices.width {
            let c = matrices.d(x, y);
            if c > best {
                best = c;
                best_xy = Some((x as u16, y as u16));
            }
        }
    }
    best_xy.ok_or_else(|| CalibError::Detection("no triggers in window".into()))
}

/// Sub-pixel refinement: centroid of the `[coarse +/- q]` window weighted by
/// the balanced-polarity count `min(D+, D-)` per pixel.
pub fn led_refine(
    matrices: &TriggerMatrices,
    coarse: (u16, u16),
    q: u16,
) -> Result<(f64, f64), CalibError> {
    let (cx, cy) = (coarse.0 as i64, coarse.1 as i64);
    let q = q as i64;
    if cx - q < 0
        || cy - q < 0
        || cx + q >= matrices.width as i64
        || cy + q >= matrices.height as i64
    {
        return Err(CalibError::Validation(format!(
            "refinement window around ({cx},{cy}) with q={q} leaves the sensor"
        )));
    }
    let mut sum_w = 0u64;
    let mut sum_x = 0.0f64;
    let mut sum_y = 0.0f64;
    for y in (cy - q)..=(cy + q) {
        for x in (cx - q)..=(cx + q) {
            let w = matrices.balanced(x as usize, y as usize) as u64;
            sum_w += w;
            sum_x += w as f64 * x as f64;
            sum_y += w as f64 * y as f64;
        }
    }
    if sum_w == 0 {
        return Err(CalibError::Detection(
            "no balanced-polarity support in refinement window".into(),
        ));
    }
    Ok((sum_x / sum_w as f64, sum_y / sum_w as f64))
}

/// A coarse + refined marker detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedDetection {
    pub coarse: (u16, u16),
    pub refined: (f64, f64),
    /// Total balanced weight supporting the centroid.
    pub support: u64,
}

/// Runs coarse then refined detection in one call.
pub fn detect_led(matrices: &TriggerMatrices, q: u16) -> Result<LedDetection, CalibError> {
    let coarse = led_coarse(matrices)?;
    let refined = led_refine(matrices, coarse, q)?;
    let (cx, cy) = (coarse.0 as i64, coarse.1 as i64);
    let mut support = 0u64;
    for y in (cy - q as i64)..=(cy + q as i64) {
        for x in (cx - q as i64)..=(cx + q as i64) {
            support += matrices.balanced(x as usize, y as usize) as u64;
        }
    }
    Ok(LedDetection { coarse, refined, support })
}

/// Estimates the flicker period from the autocorrelation peak of the
/// per-microsecond event rate. Returns the smallest lag whose score is
/// within 5% of the best, so the fundamental beats its multiples.
pub fn estimate_flicker_period(events: &[Event]) -> Option<u64> {
    if events.len() < 16 {
        return None;
    }
    let t0 = events.iter().map(|e| e.t).min()?;
    let t1 = events.iter().map(|e| e.t).max()?;
    let span = ((t1 - t0) + 1).min(20_000) as usize;
    if span < 8 {
        return None;
    }
    // Polarity-signed rate: the on/off bursts of one cycle then
    // anti-correlate at the half period and the fundamental wins.
    let mut rate = vec![0.0f64; span];
    for e in events {
        let idx = (e.t - t0) as usize;
        if idx < span {
            rate[idx] += f64::from(e.p);
        }
    }
    let mean = rate.iter().sum::<f64>() / span as f64;
    for r in &mut rate {
        *r -= mean;
    }
    let max_lag = (span / 2).min(10_000);
    let mut scores = Vec::with_capacity(max_lag.saturating_sub(1));
    for lag in 2..max_lag {
        let mut s = 0.0;
        for i in 0..span - lag {
            s += rate[i] * rate[i + lag];
        }
        scores.push((lag as u64, s));
    }
    let best = scores.iter().map(|&(_, s)| s).fold(f64::MIN, f64::max);
    if best <= 0.0 {
        return None;
    }
    scores
        .iter()
        .find(|&&(_, s)| s >= 0.95 * best)
        .map(|&(lag, _)| lag)
}

/// One image/world point pair driving the calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub image: (f64, f64),
    pub world: Vector3<f64>,
}

/// Intrinsics, pose and synthesized projection matrix of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    /// Single focal length, pixels.
    pub f: f64,
    /// Principal point `(x_o, y_o)`, pixels.
    pub principal: (f64, f64),
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// Camera translation; `x_cam = R * X + T`.
    pub translation: Vector3<f64>,
    /// Optical center in world coordinates, `C = -R^T * T`.
    pub optical_center: Vector3<f64>,
    /// 3x4 projection matrix `K [R | T]`; its third row gives homogeneous
    /// scale 1 at unit camera depth.
    pub gamma: Matrix3x4<f64>,
    /// RMS reprojection error over the calibration set, pixels.
    pub reproj_error: f64,
}

impl CameraModel {
    /// Builds a model from explicit parameters, validating the rotation.
    pub fn from_parameters(
        f: f64,
        principal: (f64, f64),
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, CalibError> {
        let rtr = rotation.transpose() * rotation;
        let dev = (rtr - Matrix3::identity()).abs().max();
        if dev > 1e-9 {
            return Err(CalibError::Validation(format!(
                "rotation is not orthonormal (deviation {dev:.3e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(CalibError::Validation("rotation has negative determinant".into()));
        }
        let optical_center = -(rotation.transpose() * translation);
        let gamma = synthesize_gamma(f, principal, &rotation, &translation);
        Ok(CameraModel {
            f,
            principal,
            rotation,
            translation,
            optical_center,
            gamma,
            reproj_error: 0.0,
        })
    }

    /// Pinhole projection of a world point; `None` if the point lies on the
    /// principal plane (homogeneous scale ~ 0).
    pub fn project(&self, world: &Vector3<f64>) -> Option<(f64, f64)> {
        let h = self.gamma * world.push(1.0);
        if h.z.abs() < 1e-12 {
            None
        } else {
            Some((h.x / h.z, h.y / h.z))
        }
    }

    /// Unit vector along the principal axis, in world coordinates.
    pub fn principal_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }
}

fn synthesize_gamma(
    f: f64,
    principal: (f64, f64),
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Matrix3x4<f64> {
    let k = Matrix3::new(f, 0.0, principal.0, 0.0, f, principal.1, 0.0, 0.0, 1.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    rt.set_column(3, translation);
    k * rt
}

/// Options for [`estimate_projection`].
#[derive(Debug, Clone, Copy)]
pub struct DltOptions {
    /// Similarity-normalize image and world points before solving.
    pub normalize: bool,
    /// Run a Gauss-Newton reprojection refinement after the linear solve.
    /// Off by default; the linear solution is already deterministic.
    pub refine: bool,
}

impl Default for DltOptions {
    fn default() -> Self {
        DltOptions { normalize: true, refine: false }
    }
}

/// Raw DLT estimate of the projection matrix, scale-normalized so the
/// rotation part of its third row has unit norm.
pub fn dlt_projection(
    correspondences: &[Correspondence],
    normalize: bool,
) -> Result<Matrix3x4<f64>, CalibError> {
    let n = correspondences.len();
    if n < 6 {
        return Err(CalibError::Estimation(format!(
            "need at least 6 correspondences, got {n}"
        )));
    }
    check_not_coplanar(correspondences)?;

    let (t_img, t_world) = if normalize {
        (
            image_normalizer(correspondences),
            world_normalizer(correspondences),
        )
    } else {
        (Matrix3::identity(), Matrix4::identity())
    };

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, c) in correspondences.iter().enumerate() {
        let iw = t_img * Vector3::new(c.image.0, c.image.1, 1.0);
        let (u, v) = (iw.x / iw.z, iw.y / iw.z);
        let ww = t_world * c.world.push(1.0);
        let (xw, yw, zw, w) = (ww.x / ww.w, ww.y / ww.w, ww.z / ww.w, 1.0);
        let r0 = 2 * i;
        let row = [xw, yw, zw, w, 0.0, 0.0, 0.0, 0.0, -u * xw, -u * yw, -u * zw, -u * w];
        for (j, &val) in row.iter().enumerate() {
            a[(r0, j)] = val;
        }
        let row = [0.0, 0.0, 0.0, 0.0, xw, yw, zw, w, -v * xw, -v * yw, -v * zw, -v * w];
        for (j, &val) in row.iter().enumerate() {
            a[(r0 + 1, j)] = val;
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| CalibError::Estimation("SVD failed".into()))?;
    let sig = &svd.singular_values;
    let k = sig.len();
    if k >= 2 && sig[0] > 0.0 && sig[k - 2] / sig[0] < 1e-12 {
        return Err(CalibError::Estimation(
            "rank-deficient system: point configuration is degenerate".into(),
        ));
    }
    let p_vec = v_t.row(k - 1);
    let mut p_norm = Matrix3x4::zeros();
    for r in 0..3 {
        for c in 0..4 {
            p_norm[(r, c)] = p_vec[r * 4 + c];
        }
    }

    // Undo the normalizations: P = T_img^-1 * P~ * T_world.
    let t_img_inv = t_img
        .try_inverse()
        .ok_or_else(|| CalibError::Estimation("image normalizer not invertible".into()))?;
    let mut p = t_img_inv * p_norm * t_world;

    // Fix scale and sign: third-row rotation part gets unit norm, and the
    // camera looks down its +z axis (positive depth for the centroid).
    let r3 = p.fixed_view::<1, 3>(2, 0).transpose();
    let norm = r3.norm();
    if norm < 1e-15 {
        return Err(CalibError::Estimation("degenerate projection matrix".into()));
    }
    p /= norm;
    let centroid = correspondences.iter().fold(Vector3::zeros(), |s, c| s + c.world) / n as f64;
    let depth = (p * centroid.push(1.0)).z;
    if depth < 0.0 {
        p = -p;
    }
    Ok(p)
}

fn check_not_coplanar(correspondences: &[Correspondence]) -> Result<(), CalibError> {
    let n = correspondences.len() as f64;
    let centroid = correspondences
        .iter()
        .fold(Vector3::zeros(), |s, c| s + c.world)
        / n;
    let mut cov = Matrix3::zeros();
    for c in correspondences {
        let d = c.world - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if max <= 0.0 || min / max < 1e-10 {
        return Err(CalibError::Estimation(
            "degenerate configuration: world points are coplanar or collinear".into(),
        ));
    }
    Ok(())
}

fn image_normalizer(correspondences: &[Correspondence]) -> Matrix3<f64> {
    let n = correspondences.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for c in correspondences {
        cx += c.image.0;
        cy += c.image.1;
    }
    cx /= n;
    cy /= n;
    let mut mean_dist = 0.0;
    for c in correspondences {
        mean_dist += ((c.image.0 - cx).powi(2) + (c.image.1 - cy).powi(2)).sqrt();
    }
    mean_dist /= n;
    let s = if mean_dist > 0.0 { (2.0f64).sqrt() / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn world_normalizer(correspondences: &[Correspondence]) -> Matrix4<f64> {
    let n = correspondences.len() as f64;
    let centroid = correspondences
        .iter()
        .fold(Vector3::zeros(), |s, c| s + c.world)
        / n;
    let mut mean_dist = 0.0;
    for c in correspondences {
        mean_dist += (c.world - centroid).norm();
    }
    mean_dist /= n;
    let s = if mean_dist > 0.0 { (3.0f64).sqrt() / mean_dist } else { 1.0 };
    let mut t = Matrix4::identity();
    t[(0, 0)] = s;
    t[(1, 1)] = s;
    t[(2, 2)] = s;
    t[(0, 3)] = -s * centroid.x;
    t[(1, 3)] = -s * centroid.y;
    t[(2, 3)] = -s * centroid.z;
    t
}

/// RQ decomposition of a 3x3 matrix into upper-triangular `K` and rotation
/// `R` via three Givens rotations, with positive-diagonal sign fixing.
fn rq_decompose(m: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let mut k = *m;
    // Zero k[2,1] with a rotation about x.
    let r = k[(2, 1)].hypot(k[(2, 2)]);
    let (c, s) = (k[(2, 2)] / r, -k[(2, 1)] / r);
    let qx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
    k *= qx;
    // Zero k[2,0] with a rotation about y.
    let r = k[(2, 0)].hypot(k[(2, 2)]);
    let (c, s) = (k[(2, 2)] / r, k[(2, 0)] / r);
    let qy = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    k *= qy;
    // Zero k[1,0] with a rotation about z.
    let r = k[(1, 0)].hypot(k[(1, 1)]);
    let (c, s) = (k[(1, 1)] / r, -k[(1, 0)] / r);
    let qz = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    k *= qz;
    let mut rot = (qx * qy * qz).transpose();
    for i in 0..3 {
        if k[(i, i)] < 0.0 {
            for j in 0..3 {
                k[(j, i)] = -k[(j, i)];
                rot[(i, j)] = -rot[(i, j)];
            }
        }
    }
    (k, rot)
}

/// Estimates a full camera model from 2D-3D correspondences.
///
/// Normalized DLT, then decomposition of the linear estimate into a single
/// focal length (mean of both axis estimates), principal point, rotation and
/// translation; the projection matrix is re-synthesized from those cleaned
/// parameters and the RMS reprojection error is measured against it.
pub fn estimate_projection(
    correspondences: &[Correspondence],
    opts: &DltOptions,
) -> Result<CameraModel, CalibError> {
    let p = dlt_projection(correspondences, opts.normalize)?;
    let m = p.fixed_view::<3, 3>(0, 0).into_owned();
    let (mut k, rot) = rq_decompose(&m);
    if k[(2, 2)].abs() < 1e-15 {
        return Err(CalibError::Estimation("degenerate intrinsic matrix".into()));
    }
    k /= k[(2, 2)];
    let f = 0.5 * (k[(0, 0)] + k[(1, 1)]);
    let principal = (k[(0, 2)], k[(1, 2)]);
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| CalibError::Estimation("intrinsic matrix not invertible".into()))?;
    let translation = k_inv * p.column(3).into_owned();

    let mut model = CameraModel::from_parameters(f, principal, rot, translation)?;
    if opts.refine {
        refine_model(&mut model, correspondences);
    }
    model.reproj_error = reprojection_error(&model, correspondences);
    Ok(model)
}

/// Gauss-Newton refinement of `(f, cx, cy, rotation, translation)` against
/// reprojection residuals, with a numeric Jacobian. Small and deterministic.
fn refine_model(model: &mut CameraModel, correspondences: &[Correspondence]) {
    const PARAMS: usize = 9;
    let n = correspondences.len();
    let eval = |params: &[f64; PARAMS], base: &CameraModel| -> Vec<f64> {
        let rot = rotation_update(base, params);
        let f = base.f + params[0];
        let principal = (base.principal.0 + params[1], base.principal.1 + params[2]);
        let t = base.translation + Vector3::new(params[6], params[7], params[8]);
        let gamma = synthesize_gamma(f, principal, &rot, &t);
        let mut res = Vec::with_capacity(2 * n);
        for c in correspondences {
            let h = gamma * c.world.push(1.0);
            if h.z.abs() < 1e-12 {
                res.push(0.0);
                res.push(0.0);
            } else {
                res.push(h.x / h.z - c.image.0);
                res.push(h.y / h.z - c.image.1);
            }
        }
        res
    };
    for _ in 0..15 {
        let zero = [0.0; PARAMS];
        let r0 = eval(&zero, model);
        let mut jac = DMatrix::<f64>::zeros(2 * n, PARAMS);
        for j in 0..PARAMS {
            let h = if j < 3 { 1e-4 } else { 1e-7 };
            let mut plus = zero;
            plus[j] = h;
            let mut minus = zero;
            minus[j] = -h;
            let rp = eval(&plus, model);
            let rm = eval(&minus, model);
            for i in 0..2 * n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_vec(r0.clone());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rhs;
        let Some(step) = jtj.lu().solve(&jtr) else {
            break;
        };
        let params: [f64; PARAMS] = std::array::from_fn(|i| -step[i]);
        let rot = rotation_update(model, &params);
        let t = model.translation + Vector3::new(params[6], params[7], params[8]);
        if let Ok(updated) = CameraModel::from_parameters(
            model.f + params[0],
            (model.principal.0 + params[1], model.principal.1 + params[2]),
            renormalize_rotation(&rot),
            t,
        ) {
            *model = updated;
        } else {
            break;
        }
        if step.amax() < 1e-12 {
            break;
        }
    }
}

fn rotation_update(base: &CameraModel, params: &[f64; 9]) -> Matrix3<f64> {
    let w = Vector3::new(params[3], params[4], params[5]);
    let skew = Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0);
    (Matrix3::identity() + skew) * base.rotation
}

fn renormalize_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * v_t;
    }
    r
}

/// RMS of image-plane residuals of projected world points.
pub fn reprojection_error(model: &CameraModel, correspondences: &[Correspondence]) -> f64 {
    if correspondences.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for c in correspondences {
        match model.project(&c.world) {
            Some((x, y)) => {
                sum += (x - c.image.0).powi(2) + (y - c.image.1).powi(2);
            }
            None => sum += f64::INFINITY,
        }
    }
    (sum / correspondences.len() as f64).sqrt()
}

/// One surveyed marker position: `marker_id, X, Y, Z, period_us`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSpec {
    pub id: String,
    pub world: Vector3<f64>,
    pub period_us: u64,
}

/// Parses the marker config: one `marker_id, X, Y, Z, period_us` line per
/// marker; blank lines and `#` comments allowed.
pub fn parse_markers(text: &str) -> Result<Vec<MarkerSpec>, CalibError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(CalibError::Parse {
                line: line_no,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let fl = |i: usize| -> Result<f64, CalibError> {
            fields[i].parse().map_err(|e| CalibError::Parse {
                line: line_no,
                msg: format!("field {i}: {e}"),
            })
        };
        out.push(MarkerSpec {
            id: fields[0].to_string(),
            world: Vector3::new(fl(1)?, fl(2)?, fl(3)?),
            period_us: fields[4].parse().map_err(|e| CalibError::Parse {
                line: line_no,
                msg: format!("period_us: {e}"),
            })?,
        });
    }
    Ok(out)
}

pub fn read_markers(path: &Path) -> Result<Vec<MarkerSpec>, CalibError> {
    parse_markers(&std::fs::read_to_string(path)?)
}

/// Serialized camera file; one per camera, structured text.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub reproj_error: f64,
}

impl CameraFile {
    pub fn from_model(model: &CameraModel) -> Self {
        let mut r = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                r.push(model.rotation[(i, j)]);
            }
        }
        CameraFile {
            f: model.f,
            cx: model.principal.0,
            cy: model.principal.1,
            r,
            t: model.translation.iter().copied().collect(),
            c: model.optical_center.iter().copied().collect(),
            reproj_error: model.reproj_error,
        }
    }

    pub fn to_model(&self) -> Result<CameraModel, CalibError> {
        if self.r.len() != 9 || self.t.len() != 3 || self.c.len() != 3 {
            return Err(CalibError::Validation(
                "camera file needs R[9], T[3], C[3]".into(),
            ));
        }
        let rotation = Matrix3::from_row_slice(&self.r);
        let translation = Vector3::new(self.t[0], self.t[1], self.t[2]);
        let mut model = CameraModel::from_parameters(self.f, (self.cx, self.cy), rotation, translation)?;
        model.reproj_error = self.reproj_error;
        let stored_c = Vector3::new(self.c[0], self.c[1], self.c[2]);
        if (stored_c - model.optical_center).norm() > 1e-6 {
            return Err(CalibError::Validation(
                "camera file C does not match -R^T * T".into(),
            ));
        }
        Ok(model)
    }
}

pub fn write_camera_file(path: &Path, model: &CameraModel) -> Result<(), CalibError> {
    let file = CameraFile::from_model(model);
    let text = toml::to_string(&file)
        .map_err(|e| CalibError::Validation(format!("camera serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_camera_file(path: &Path) -> Result<CameraModel, CalibError> {
    let text = std::fs::read_to_string(path)?;
    let file: CameraFile = toml::from_str(&text).map_err(|e| CalibError::Parse {
        line: 0,
        msg: format!("camera file: {e}"),
    })?;
    file.to_model()
}
