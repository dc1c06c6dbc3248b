//! Shared pipeline plumbing for the integration suites: a reference rig,
//! and the measurement chain from raw streams to radius-time models.

use std::collections::HashMap;

use evshock::blast::BlastConstants;
use evshock::calib::CameraModel;
use evshock::event::{partition_by_angle, polar_encode, BlastImagePoint, Event, PolarEvent};
use evshock::fit::{fit_radius_time, RadiusTimeModel};
use evshock::front::{extract_all, FrontConfig};
use evshock::geom::{samples_from_polar, FrontSample, ViewGeometry};
use evshock::synth::config::look_at_rotation;
use evshock::synth::{BlastScene, ClutterSpec, EventLabel, SimCamera, SimStream};
use nalgebra::Vector3;

pub const BLAST_WORLD: (f64, f64, f64) = (0.0, 0.0, 1.5);

/// Three cameras with reference-rig-like intrinsics (f ~ 855 px, 1280x720)
/// on a 20 m circle around the blast.
pub fn reference_rig() -> Vec<SimCamera> {
    rig_at(&[180.0, 150.0, 210.0])
}

/// Cameras at the given azimuths on the 20 m circle.
pub fn rig_at(azimuths_deg: &[f64]) -> Vec<SimCamera> {
    azimuths_deg
        .iter()
        .map(|az| {
            let blast = Vector3::new(BLAST_WORLD.0, BLAST_WORLD.1, BLAST_WORLD.2);
            let a = az.to_radians();
            let position = blast + 20.0 * Vector3::new(a.cos(), a.sin(), 0.0);
            let rotation = look_at_rotation(&position, &blast).unwrap();
            let translation = -(rotation * position);
            let model =
                CameraModel::from_parameters(855.27, (640.0, 360.0), rotation, translation)
                    .unwrap();
            SimCamera {
                model,
                width: 1280,
                height: 720,
                xi_us: 1,
                phi: 0.2,
            }
        })
        .collect()
}

pub fn reference_scene(duration_us: u64, clutter: ClutterSpec) -> BlastScene {
    let mut scene = BlastScene::bare(
        0.6,
        Vector3::new(BLAST_WORLD.0, BLAST_WORLD.1, BLAST_WORLD.2),
        duration_us,
    );
    scene.clutter = clutter;
    scene
}

pub fn view_geometry(cam: &SimCamera) -> ViewGeometry {
    ViewGeometry::new(
        cam.model.clone(),
        Vector3::new(BLAST_WORLD.0, BLAST_WORLD.1, BLAST_WORLD.2),
    )
    .unwrap()
}

/// One measured (view, angle) series.
pub struct MeasuredAngle {
    pub view: usize,
    pub alpha_center: f64,
    pub samples: Vec<FrontSample>,
    pub model: RadiusTimeModel,
    /// Accepted polar events for label checks.
    pub accepted: Vec<PolarEvent>,
    /// ROI hull of this angle: (t1, t2, d1, d2).
    pub roi_hull: (f64, f64, f64, f64),
}

/// Full measurement chain for one view: polar encode, partition, extract,
/// convert to radii, fit. Unmeasurable angles and failed fits are skipped.
pub fn measure_view(
    view: usize,
    events: &[Event],
    geometry: &ViewGeometry,
    config: &FrontConfig,
    bin_width_deg: f64,
    degree: usize,
) -> Vec<MeasuredAngle> {
    measure_view_trimmed(view, events, geometry, config, bin_width_deg, degree, (0.0, f64::INFINITY))
}

/// [`measure_view`] with the fit restricted to a radius window, so the
/// steep near-detonation knee does not bleed into the analysis range.
pub fn measure_view_trimmed(
    view: usize,
    events: &[Event],
    geometry: &ViewGeometry,
    config: &FrontConfig,
    bin_width_deg: f64,
    degree: usize,
    fit_r_range: (f64, f64),
) -> Vec<MeasuredAngle> {
    let polar = polar_encode(events, geometry.blast_image);
    let segments = partition_by_angle(&polar, bin_width_deg).unwrap();
    let outcomes = extract_all(&segments, config);
    let mut measured = Vec::new();
    for outcome in outcomes {
        let Ok(ex) = outcome.result else { continue };
        let samples = samples_from_polar(geometry, view, &ex.extraction.s_prime);
        if samples.len() < degree + 1 {
            continue;
        }
        let pairs: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.r >= fit_r_range.0 && s.r <= fit_r_range.1)
            .map(|s| (s.t as f64, s.r))
            .collect();
        if pairs.len() < degree + 1 {
            continue;
        }
        let Ok(model) = fit_radius_time(&pairs, degree) else {
            continue;
        };
        measured.push(MeasuredAngle {
            view,
            alpha_center: 0.5 * (outcome.alpha_lo + outcome.alpha_hi),
            samples,
            model,
            accepted: ex.extraction.s_prime.clone(),
            roi_hull: (ex.band.t1, ex.band.t2, ex.band.d1, ex.band.d2),
        });
    }
    measured
}

/// Ground-truth front velocity at radius `r` for charge `w`.
pub fn truth_velocity(w: f64, r: f64, constants: &BlastConstants) -> f64 {
    evshock::blast::velocity_from_scaled_distance(r / w.cbrt(), constants).unwrap()
}

pub type LabelKey = (u64, i8, u64, u64);

/// Lookup from a polar event back to the simulator label. The key is the
/// deterministic polar encoding of the labeled raw event.
pub fn label_map(stream: &SimStream, blast: BlastImagePoint) -> HashMap<LabelKey, EventLabel> {
    let polar = polar_encode(&stream.events, blast);
    let mut map = HashMap::with_capacity(polar.len());
    for (pe, &label) in polar.iter().zip(stream.labels.iter()) {
        map.insert(polar_key(pe), label);
    }
    map
}

pub fn polar_key(e: &PolarEvent) -> LabelKey {
    (e.t, e.p, e.d.to_bits(), e.alpha.to_bits())
}
