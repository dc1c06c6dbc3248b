pub mod calibrate;
pub mod extract;
pub mod invert;
pub mod measure;
pub mod reconstruct;
pub mod report;
pub mod simulate;

use std::collections::BTreeMap;
use std::path::Path;

use evshock::calib::{read_camera_file, CameraModel};
use evshock::event::BlastImagePoint;
use evshock::fit::{ModelsFile, RadiusTimeModel};
use evshock::geom::ViewGeometry;
use nalgebra::Vector3;

use crate::error::CliError;

pub fn load_camera(path: &Path) -> Result<CameraModel, CliError> {
    read_camera_file(path).map_err(CliError::from)
}

/// Builds the per-view geometry; an explicitly measured blast image point
/// overrides the projected one within a tolerance.
pub fn build_geometry(
    camera: CameraModel,
    blast_world: Vector3<f64>,
    blast_image: Option<(f64, f64)>,
) -> Result<ViewGeometry, CliError> {
    match blast_image {
        Some((x, y)) => ViewGeometry::with_measured_blast(
            camera,
            blast_world,
            BlastImagePoint::new(x, y),
            5.0,
        )
        .map_err(CliError::from),
        None => ViewGeometry::new(camera, blast_world).map_err(CliError::from),
    }
}

/// Loads model files and pairs every entry with its model, keyed by
/// (view, angle-center in millidegrees) for deterministic iteration.
pub fn load_models(paths: &[std::path::PathBuf]) -> Result<BTreeMap<(usize, i64), RadiusTimeModel>, CliError> {
    let mut out = BTreeMap::new();
    for path in paths {
        let file = ModelsFile::read(path)?;
        for entry in file.models {
            let model = entry.to_model()?;
            out.insert((entry.view, (entry.alpha_deg * 1000.0).round() as i64), model);
        }
    }
    if out.is_empty() {
        return Err(CliError::validation("E_MODELS", "no models found in the given files"));
    }
    Ok(out)
}

pub fn alpha_of(key: &(usize, i64)) -> f64 {
    key.1 as f64 / 1000.0
}
