//! Scene configuration (structured text, key = value sections) and the
//! ground-truth file the simulator writes next to its streams.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::blast::BlastConstants;
use crate::calib::CameraModel;
use crate::synth::{
    BlastScene, ClutterSpec, FirelightSpec, GroundTruth, LedMarkerSpec, ProductSpec, SimCamera,
    SynthError,
};

/// Scene file root. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub charge: ChargeSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub clutter: ClutterSection,
    pub cameras: Vec<CameraSection>,
    #[serde(default)]
    pub leds: Vec<LedSection>,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSection {
    pub w_kg: f64,
    pub center: [f64; 3],
    #[serde(default)]
    pub t0_us: u64,
    pub duration_us: u64,
    #[serde(default = "default_true")]
    pub render_front: bool,
    #[serde(default = "default_front_step")]
    pub front_step: f64,
    #[serde(default = "default_front_jitter")]
    pub front_jitter_us: u64,
    #[serde(default = "default_front_width")]
    pub front_width_px: f64,
    #[serde(default = "default_alpha_step")]
    pub front_alpha_step_deg: f64,
}

fn default_true() -> bool {
    true
}
fn default_front_step() -> f64 {
    0.3
}
fn default_front_width() -> f64 {
    1.0
}
fn default_front_jitter() -> u64 {
    10
}
fn default_alpha_step() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub eta: f64,
    pub p0_kpa: f64,
    pub c0: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let c = BlastConstants::default();
        ConstantsSection {
            eta: c.eta,
            p0_kpa: c.p0_kpa,
            c0: c.c0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSection {
    #[serde(default)]
    pub noise_rate_per_px_s: f64,
    #[serde(default)]
    pub firelight: Option<FirelightSection>,
    #[serde(default)]
    pub products: Option<ProductSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirelightSection {
    pub t_start_us: u64,
    pub t_len_us: u64,
    pub intensity: f64,
    pub extent_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSection {
    pub max_radius_px: f64,
    pub growth_tau_us: f64,
    pub rate_per_us: f64,
    pub decay_tau_us: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub width: u32,
    pub height: u32,
    pub f_px: f64,
    pub cx: f64,
    pub cy: f64,
    /// Optical center in world coordinates, m.
    pub position: [f64; 3],
    /// Point the principal axis aims at, m.
    pub look_at: [f64; 3],
    #[serde(default = "default_xi")]
    pub xi_us: u64,
    #[serde(default = "default_phi")]
    pub phi: f64,
}

fn default_xi() -> u64 {
    1
}
fn default_phi() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedSection {
    pub world: [f64; 3],
    pub period_us: u64,
    #[serde(default = "default_duty")]
    pub duty: f64,
    #[serde(default = "default_brightness")]
    pub brightness: f64,
}

fn default_duty() -> f64 {
    0.5
}
fn default_brightness() -> f64 {
    1.0
}

/// Builds a world-to-camera rotation for a camera at `position` aimed at
/// `look_at`, upright for a world with +z up and image y growing downward.
pub fn look_at_rotation(position: &Vector3<f64>, look_at: &Vector3<f64>) -> Result<Matrix3<f64>, SynthError> {
    let forward = look_at - position;
    if forward.norm() < 1e-12 {
        return Err(SynthError::Config("camera position equals its look_at point".into()));
    }
    let z = forward.normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let mut x = z.cross(&up);
    if x.norm() < 1e-9 {
        // Camera looking straight up or down; fall back to world x.
        x = Vector3::new(1.0, 0.0, 0.0);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
}

impl SceneConfig {
    pub fn parse(text: &str) -> Result<SceneConfig, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::Config(format!("scene config: {e}")))
    }

    pub fn read(path: &Path) -> Result<SceneConfig, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))?;
        SceneConfig::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, SynthError> {
        toml::to_string(self).map_err(|e| SynthError::Config(format!("scene serialization: {e}")))
    }

    /// Materializes the scene and camera list.
    pub fn build(&self) -> Result<(BlastScene, Vec<SimCamera>), SynthError> {
        let constants = BlastConstants {
            eta: self.constants.eta,
            p0_kpa: self.constants.p0_kpa,
            c0: self.constants.c0,
        };
        let clutter = ClutterSpec {
            noise_rate_per_px_s: self.clutter.noise_rate_per_px_s,
            firelight: self.clutter.firelight.as_ref().map(|f| FirelightSpec {
                t_start_us: f.t_start_us,
                t_len_us: f.t_len_us,
                intensity: f.intensity,
                extent_px: f.extent_px,
            }),
            products: self.clutter.products.as_ref().map(|p| ProductSpec {
                max_radius_px: p.max_radius_px,
                growth_tau_us: p.growth_tau_us,
                rate_per_us: p.rate_per_us,
                decay_tau_us: p.decay_tau_us,
            }),
        };
        let leds = self
            .leds
            .iter()
            .map(|l| LedMarkerSpec {
                world: Vector3::new(l.world[0], l.world[1], l.world[2]),
                period_us: l.period_us,
                duty: l.duty,
                brightness: l.brightness,
            })
            .collect();
        let scene = BlastScene {
            w_kg: self.charge.w_kg,
            blast_world: Vector3::new(self.charge.center[0], self.charge.center[1], self.charge.center[2]),
            t0_us: self.charge.t0_us,
            duration_us: self.charge.duration_us,
            render_front: self.charge.render_front,
            front_step: self.charge.front_step,
            front_jitter_us: self.charge.front_jitter_us,
            front_width_px: self.charge.front_width_px,
            front_alpha_step_deg: self.charge.front_alpha_step_deg,
            clutter,
            leds,
            constants,
        };
        scene.validate()?;
        let mut cameras = Vec::with_capacity(self.cameras.len());
        for c in &self.cameras {
            let position = Vector3::new(c.position[0], c.position[1], c.position[2]);
            let target = Vector3::new(c.look_at[0], c.look_at[1], c.look_at[2]);
            let rotation = look_at_rotation(&position, &target)?;
            let translation = -(rotation * position);
            let model = CameraModel::from_parameters(c.f_px, (c.cx, c.cy), rotation, translation)
                .map_err(|e| SynthError::Config(format!("camera: {e}")))?;
            let cam = SimCamera {
                model,
                width: c.width,
                height: c.height,
                xi_us: c.xi_us,
                phi: c.phi,
            };
            cam.validate()?;
            cameras.push(cam);
        }
        if cameras.is_empty() {
            return Err(SynthError::Config("scene declares no cameras".into()));
        }
        Ok((scene, cameras))
    }
}

/// Serialized ground truth: per-camera viewing constants and the radius
/// table at 10 us steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub cameras: Vec<TruthCameraSection>,
    pub radius_t_us: Vec<u64>,
    pub radius_m: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthCameraSection {
    pub zeta: f64,
    pub blast_image: [f64; 2],
}

impl GroundTruthFile {
    pub fn from_truth(truth: &GroundTruth) -> Self {
        GroundTruthFile {
            cameras: truth
                .cameras
                .iter()
                .map(|c| TruthCameraSection {
                    zeta: c.zeta,
                    blast_image: [c.blast_image.0, c.blast_image.1],
                })
                .collect(),
            radius_t_us: truth.radius_t_us.clone(),
            radius_m: truth.radius_m.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), SynthError> {
        let text = toml::to_string(self)
            .map_err(|e| SynthError::Config(format!("truth serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<GroundTruthFile, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| SynthError::Config(format!("truth file: {e}")))
    }

    /// Linear interpolation of the truth radius at an absolute time.
    pub fn radius_at(&self, t_us: u64) -> Option<f64> {
        if self.radius_t_us.is_empty() {
            return None;
        }
        if t_us < self.radius_t_us[0] || t_us > *self.radius_t_us.last().unwrap() {
            return None;
        }
        let idx = self.radius_t_us.partition_point(|&t| t <= t_us) - 1;
        if idx + 1 >= self.radius_t_us.len() {
            return Some(self.radius_m[idx]);
        }
        let (t0, t1) = (self.radius_t_us[idx] as f64, self.radius_t_us[idx + 1] as f64);
        let frac = (t_us as f64 - t0) / (t1 - t0);
        Some(self.radius_m[idx] * (1.0 - frac) + self.radius_m[idx + 1] * frac)
    }
}
