//! Ground-truth generator: an expanding shock sphere driven by the
//! velocity law, observed by pinhole event cameras with a threshold trigger
//! model, plus firelight, product-cloud and background-noise clutter and
//! flickering LED markers. Every emitted event carries a label, so the
//! generator doubles as the oracle for end-to-end tests.

pub mod config;

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::blast::{velocity_from_scaled_distance, BlastConstants};
use crate::calib::CameraModel;
use crate::event::{Event, StreamHeader};
use crate::geom::{self, ViewGeometry};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("front passed camera: radius {r} m >= zeta {zeta} m")]
    FrontPassedCamera { r: f64, zeta: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
}

/// Gaussian footprint of an LED marker on the sensor, px.
const LED_BLOB_SIGMA: f64 = 1.5;
/// Pixel reach of the LED footprint.
const LED_BLOB_EXTENT: i64 = 4;
/// Maximum events a single large intensity step may emit at one pixel.
const MAX_EVENTS_PER_STEP: u32 = 6;
/// Re-render the silhouette once it has moved this far, px.
const FRONT_RENDER_STEP_PX: f64 = 0.3;

/// Firelight clutter: a brief global intensity burst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirelightSpec {
    /// Burst start relative to detonation, us.
    pub t_start_us: u64,
    pub t_len_us: u64,
    /// Fraction of covered pixels that trigger during the burst.
    pub intensity: f64,
    /// Radius of the covered disc around the blast image point, px.
    pub extent_px: f64,
}

/// Product-cloud clutter: a slowly decaying textured disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductSpec {
    pub max_radius_px: f64,
    /// Disc growth time constant, us.
    pub growth_tau_us: f64,
    /// Initial event rate over the disc, events per us.
    pub rate_per_us: f64,
    /// Rate decay time constant, us.
    pub decay_tau_us: f64,
}

/// Clutter mix for one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterSpec {
    pub firelight: Option<FirelightSpec>,
    pub products: Option<ProductSpec>,
    /// Homogeneous background noise, events per pixel per second.
    pub noise_rate_per_px_s: f64,
}

impl ClutterSpec {
    pub fn off() -> Self {
        ClutterSpec {
            firelight: None,
            products: None,
            noise_rate_per_px_s: 0.0,
        }
    }
}

impl Default for ClutterSpec {
    fn default() -> Self {
        ClutterSpec {
            firelight: Some(FirelightSpec {
                t_start_us: 200,
                t_len_us: 300,
                intensity: 0.3,
                extent_px: 600.0,
            }),
            products: Some(ProductSpec {
                max_radius_px: 120.0,
                growth_tau_us: 2000.0,
                rate_per_us: 2.0,
                decay_tau_us: 10_000.0,
            }),
            noise_rate_per_px_s: 10.0,
        }
    }
}

/// One flickering LED marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedMarkerSpec {
    pub world: Vector3<f64>,
    pub period_us: u64,
    /// On fraction of each period.
    pub duty: f64,
    /// Log-intensity step at the blob center when toggling.
    pub brightness: f64,
}

/// Scene description: charge, timing, clutter and markers.
#[derive(Debug, Clone)]
pub struct BlastScene {
    pub w_kg: f64,
    pub blast_world: Vector3<f64>,
    /// Detonation time, us.
    pub t0_us: u64,
    pub duration_us: u64,
    pub render_front: bool,
    /// Log-intensity step a front crossing deposits.
    pub front_step: f64,
    /// Half-range of the per-pixel trigger latency jitter on front events,
    /// us. Real pixels do not fire in lockstep; the refractive-index ramp
    /// of the front triggers with tens of microseconds of spread.
    pub front_jitter_us: u64,
    /// Optional widening of the front band; widths above one pixel add a
    /// trailing negative edge.
    pub front_width_px: f64,
    /// Angular sweep step when rasterizing the silhouette, degrees.
    pub front_alpha_step_deg: f64,
    pub clutter: ClutterSpec,
    pub leds: Vec<LedMarkerSpec>,
    pub constants: BlastConstants,
}

impl BlastScene {
    /// A clutter-free scene with the defaults used across the tests.
    pub fn bare(w_kg: f64, blast_world: Vector3<f64>, duration_us: u64) -> Self {
        BlastScene {
            w_kg,
            blast_world,
            t0_us: 0,
            duration_us,
            render_front: true,
            front_step: 0.3,
            front_jitter_us: 10,
            front_width_px: 1.0,
            front_alpha_step_deg: 0.5,
            clutter: ClutterSpec::off(),
            leds: Vec::new(),
            constants: BlastConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.w_kg > 0.0) {
            return Err(SynthError::Config(format!("charge mass must be positive, got {}", self.w_kg)));
        }
        if !(self.front_alpha_step_deg > 0.0) {
            return Err(SynthError::Config("alpha step must be positive".into()));
        }
        if !(self.front_step > 0.0) || !(self.front_width_px >= 1.0) {
            return Err(SynthError::Config("front step and width must be positive".into()));
        }
        if !(self.clutter.noise_rate_per_px_s >= 0.0) {
            return Err(SynthError::Config("noise rate must be non-negative".into()));
        }
        for led in &self.leds {
            if led.period_us < 2 {
                return Err(SynthError::Config(format!(
                    "LED period must be at least 2 us, got {}",
                    led.period_us
                )));
            }
            if !(0.0..=1.0).contains(&led.duty) {
                return Err(SynthError::Config(format!("LED duty {} outside [0, 1]", led.duty)));
            }
        }
        Ok(())
    }
}

/// One simulated event camera.
#[derive(Debug, Clone)]
pub struct SimCamera {
    pub model: CameraModel,
    pub width: u32,
    pub height: u32,
    /// Pixel monitoring interval, us.
    pub xi_us: u64,
    /// Contrast threshold, log-intensity units.
    pub phi: f64,
}

impl SimCamera {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.xi_us < 1 {
            return Err(SynthError::Config("monitoring interval must be at least 1 us".into()));
        }
        if !(self.phi > 0.0) {
            return Err(SynthError::Config("contrast threshold must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::Config("sensor dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Event provenance recorded in the label sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventLabel {
    Front,
    Firelight,
    Product,
    Noise,
    Led,
}

impl EventLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventLabel::Front => "front",
            EventLabel::Firelight => "firelight",
            EventLabel::Product => "product",
            EventLabel::Noise => "noise",
            EventLabel::Led => "led",
        }
    }

    pub fn parse(s: &str) -> Option<EventLabel> {
        match s {
            "front" => Some(EventLabel::Front),
            "firelight" => Some(EventLabel::Firelight),
            "product" => Some(EventLabel::Product),
            "noise" => Some(EventLabel::Noise),
            "led" => Some(EventLabel::Led),
            _ => None,
        }
    }
}

/// Labeled event stream of one camera.
#[derive(Debug, Clone)]
pub struct SimStream {
    pub header: StreamHeader,
    pub events: Vec<Event>,
    /// Label per event, aligned with `events`.
    pub labels: Vec<EventLabel>,
    /// Per-label emission tallies kept while generating.
    pub tallies: Vec<(EventLabel, u64)>,
}

/// Scene truth the measurement pipeline is checked against.
#[derive(Debug, Clone)]
pub struct CameraTruth {
    pub zeta: f64,
    pub blast_image: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Radius table at 10 us steps, absolute microseconds.
    pub radius_t_us: Vec<u64>,
    pub radius_m: Vec<f64>,
    pub cameras: Vec<CameraTruth>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub streams: Vec<SimStream>,
    pub truth: GroundTruth,
}

/// Radius law below which the empirical overpressure formula is not
/// trusted; integration starts here and detonation-to-start time is zero.
pub const DEFAULT_R_INIT_M: f64 = 0.1;

fn drdt(r: f64, w_cbrt: f64, constants: &BlastConstants) -> f64 {
    // m/us; the velocity law is valid for any positive scaled distance.
    velocity_from_scaled_distance(r / w_cbrt, constants)
        .map(|v| v * 1e-6)
        .unwrap_or(0.0)
}

fn rk4_step(r: f64, h: f64, w_cbrt: f64, constants: &BlastConstants) -> f64 {
    let k1 = drdt(r, w_cbrt, constants);
    let k2 = drdt(r + 0.5 * h * k1, w_cbrt, constants);
    let k3 = drdt(r + 0.5 * h * k2, w_cbrt, constants);
    let k4 = drdt(r + h * k3, w_cbrt, constants);
    r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Shock radius a time `t_since_us` after detonation, by fourth-order
/// fixed-step integration (1 us steps) of `dr/dt = v(r; W)` from `r_init`.
pub fn propagate_radius(
    w_kg: f64,
    t_since_us: f64,
    constants: &BlastConstants,
    r_init: f64,
) -> Result<f64, SynthError> {
    propagate_radius_with_step(w_kg, t_since_us, constants, r_init, 1.0)
}

/// [`propagate_radius`] with an explicit step, for refinement checks.
pub fn propagate_radius_with_step(
    w_kg: f64,
    t_since_us: f64,
    constants: &BlastConstants,
    r_init: f64,
    step_us: f64,
) -> Result<f64, SynthError> {
    if !(r_init > 0.0) {
        return Err(SynthError::Config(format!(
            "integration start radius must be positive, got {r_init}"
        )));
    }
    if !(w_kg > 0.0) {
        return Err(SynthError::Config("charge mass must be positive".into()));
    }
    if t_since_us < 0.0 {
        return Err(SynthError::Config("time before detonation".into()));
    }
    let w_cbrt = w_kg.cbrt();
    let mut r = r_init;
    let mut t = 0.0;
    while t + step_us <= t_since_us {
        r = rk4_step(r, step_us, w_cbrt, constants);
        t += step_us;
    }
    let rest = t_since_us - t;
    if rest > 0.0 {
        r = rk4_step(r, rest, w_cbrt, constants);
    }
    Ok(r)
}

/// Precomputed radius trajectory at 1 us resolution.
#[derive(Debug, Clone)]
pub struct RadiusTrack {
    r_us: Vec<f64>,
}

impl RadiusTrack {
    pub fn integrate(
        w_kg: f64,
        duration_us: u64,
        constants: &BlastConstants,
        r_init: f64,
    ) -> Result<Self, SynthError> {
        if !(r_init > 0.0) {
            return Err(SynthError::Config(format!(
                "integration start radius must be positive, got {r_init}"
            )));
        }
        let w_cbrt = w_kg.cbrt();
        let mut r_us = Vec::with_capacity(duration_us as usize + 1);
        let mut r = r_init;
        r_us.push(r);
        for _ in 0..duration_us {
            r = rk4_step(r, 1.0, w_cbrt, constants);
            r_us.push(r);
        }
        Ok(RadiusTrack { r_us })
    }

    /// Radius at `t_since_us` after detonation (linear interpolation,
    /// clamped to the integrated window).
    pub fn radius_at(&self, t_since_us: f64) -> f64 {
        if t_since_us <= 0.0 {
            return self.r_us[0];
        }
        let idx = t_since_us.floor() as usize;
        if idx + 1 >= self.r_us.len() {
            return *self.r_us.last().unwrap();
        }
        let frac = t_since_us - idx as f64;
        self.r_us[idx] * (1.0 - frac) + self.r_us[idx + 1] * frac
    }

    /// First time (us after detonation) the radius reaches `r`, if it does.
    pub fn time_at_radius(&self, r: f64) -> Option<f64> {
        if r < self.r_us[0] || r > *self.r_us.last().unwrap() {
            return None;
        }
        let idx = self.r_us.partition_point(|&v| v < r);
        if idx == 0 {
            return Some(0.0);
        }
        let (a, b) = (self.r_us[idx - 1], self.r_us[idx]);
        let frac = if b > a { (r - a) / (b - a) } else { 0.0 };
        Some((idx - 1) as f64 + frac)
    }
}

/// Forward model of the silhouette: for radius `r` and propagation angle
/// `alpha`, the observed image point and the world tangent point.
pub fn silhouette_image_point(
    geometry: &ViewGeometry,
    r: f64,
    alpha_deg: f64,
) -> Result<((f64, f64), Vector3<f64>), SynthError> {
    if r >= geometry.zeta {
        return Err(SynthError::FrontPassedCamera { r, zeta: geometry.zeta });
    }
    if r <= 0.0 {
        return Ok(((geometry.blast_image.x, geometry.blast_image.y), geometry.blast_world));
    }
    let theta = (r / geometry.zeta).asin();
    let image = geom::solve_image_point(geometry, theta, alpha_deg)
        .map_err(|e| SynthError::Geometry(e.to_string()))?;
    let point = geom::reconstruct_point(geometry, r, image)
        .map_err(|e| SynthError::Geometry(e.to_string()))?;
    Ok((image, point.world))
}

struct Emitter {
    events: Vec<(Event, EventLabel)>,
    tallies: std::collections::HashMap<EventLabel, u64>,
    width: u32,
    height: u32,
    /// Pixel monitoring interval; triggers land on this grid.
    xi_us: u64,
}

impl Emitter {
    fn new(width: u32, height: u32, xi_us: u64) -> Self {
        Emitter {
            events: Vec::new(),
            tallies: std::collections::HashMap::new(),
            width,
            height,
            xi_us: xi_us.max(1),
        }
    }

    fn emit(&mut self, t: u64, x: i64, y: i64, p: i8, label: EventLabel) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        // A pixel is compared against its last sample every xi
        // microseconds, so a change surfaces at the next grid point.
        let t = t.div_ceil(self.xi_us) * self.xi_us;
        self.events.push((
            Event {
                x: x as u16,
                y: y as u16,
                p,
                t,
            },
            label,
        ));
        *self.tallies.entry(label).or_insert(0) += 1;
    }
}

/// Runs the full trigger-model simulation for every camera.
///
/// Per microsecond tick the front silhouette is swept over the propagation
/// angles and rasterized; a pixel fires once when the step crosses it.
/// Firelight covers a disc for a short burst, products fill a growing disc
/// with decaying textured activity, noise is a seeded homogeneous process
/// and LEDs toggle Gaussian blobs by duty cycle. Identical seeds produce
/// bit-identical streams.
pub fn simulate_events(
    scene: &BlastScene,
    cameras: &[SimCamera],
    seed: u64,
) -> Result<SimOutput, SynthError> {
    scene.validate()?;
    for cam in cameras {
        cam.validate()?;
    }
    let track = RadiusTrack::integrate(scene.w_kg, scene.duration_us, &scene.constants, DEFAULT_R_INIT_M)?;

    let mut streams = Vec::with_capacity(cameras.len());
    let mut truth_cams = Vec::with_capacity(cameras.len());

    for (cam_idx, cam) in cameras.iter().enumerate() {
        let geometry = ViewGeometry::new(cam.model.clone(), scene.blast_world)
            .map_err(|e| SynthError::Geometry(e.to_string()))?;
        truth_cams.push(CameraTruth {
            zeta: geometry.zeta,
            blast_image: (geometry.blast_image.x, geometry.blast_image.y),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (cam_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let emitter = simulate_camera(scene, cam, &geometry, &track, &mut rng)?;
        let mut pairs = emitter.events;
        // Deterministic stream order; stable sort keeps generation order on
        // full ties.
        pairs.sort_by(|a, b| {
            a.0.t
                .cmp(&b.0.t)
                .then(a.0.y.cmp(&b.0.y))
                .then(a.0.x.cmp(&b.0.x))
                .then(a.0.p.cmp(&b.0.p))
        });
        let events: Vec<Event> = pairs.iter().map(|(e, _)| *e).collect();
        let labels: Vec<EventLabel> = pairs.iter().map(|(_, l)| *l).collect();
        let mut tallies: Vec<(EventLabel, u64)> = emitter.tallies.into_iter().collect();
        tallies.sort_by_key(|(l, _)| l.as_str());
        streams.push(SimStream {
            header: StreamHeader::for_events(cam.width, cam.height, &events),
            events,
            labels,
            tallies,
        });
    }

    let mut radius_t_us = Vec::new();
    let mut radius_m = Vec::new();
    let mut t = 0u64;
    while t <= scene.duration_us {
        radius_t_us.push(scene.t0_us + t);
        radius_m.push(track.radius_at(t as f64));
        t += 10;
    }
    Ok(SimOutput {
        streams,
        truth: GroundTruth {
            radius_t_us,
            radius_m,
            cameras: truth_cams,
        },
    })
}

fn simulate_camera(
    scene: &BlastScene,
    cam: &SimCamera,
    geometry: &ViewGeometry,
    track: &RadiusTrack,
    rng: &mut ChaCha8Rng,
) -> Result<Emitter, SynthError> {
    let mut emitter = Emitter::new(cam.width, cam.height, cam.xi_us);
    if scene.duration_us == 0 {
        return Ok(emitter);
    }

    // Firelight: one pass over the covered disc, events at random burst
    // ticks. Runs first so the per-camera random stream layout is fixed.
    if let Some(fl) = scene.clutter.firelight {
        let t_end = (fl.t_start_us + fl.t_len_us).min(scene.duration_us);
        if fl.t_start_us < t_end && fl.intensity > 0.0 {
            let (bx, by) = (geometry.blast_image.x, geometry.blast_image.y);
            let x_lo = ((bx - fl.extent_px).floor() as i64).max(0);
            let x_hi = ((bx + fl.extent_px).ceil() as i64).min(cam.width as i64 - 1);
            let y_lo = ((by - fl.extent_px).floor() as i64).max(0);
            let y_hi = ((by + fl.extent_px).ceil() as i64).min(cam.height as i64 - 1);
            let ext2 = fl.extent_px * fl.extent_px;
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let dx = x as f64 - bx;
                    let dy = y as f64 - by;
                    if dx * dx + dy * dy > ext2 {
                        continue;
                    }
                    if rng.random::<f64>() < fl.intensity {
                        let tick = rng.random_range(fl.t_start_us..t_end);
                        let p = if rng.random::<bool>() { 1 } else { -1 };
                        emitter.emit(scene.t0_us + tick, x, y, p, EventLabel::Firelight);
                    }
                }
            }
        }
    }

    // LEDs: deterministic toggle edges with a Gaussian blob footprint.
    for led in &scene.leds {
        let Some((px, py)) = cam.model.project(&led.world) else {
            continue;
        };
        let on_len = (led.duty * led.period_us as f64).round() as u64;
        if on_len == 0 || on_len >= led.period_us {
            continue;
        }
        let mut cycle_start = 0u64;
        while cycle_start < scene.duration_us {
            render_led_blob(&mut emitter, cam, scene.t0_us + cycle_start, px, py, led.brightness, 1);
            let off_t = cycle_start + on_len;
            if off_t < scene.duration_us {
                render_led_blob(&mut emitter, cam, scene.t0_us + off_t, px, py, led.brightness, -1);
            }
            cycle_start += led.period_us;
        }
    }

    // Front, products and noise advance tick by tick.
    let mut front_visited = vec![false; (cam.width * cam.height) as usize];
    let mut exit_visited = vec![false; (cam.width * cam.height) as usize];
    let n_alpha = (360.0 / scene.front_alpha_step_deg).round() as usize;
    let mut last_rendered_r = f64::NEG_INFINITY;
    let mut product_acc = 0.0f64;
    let mut noise_acc = 0.0f64;
    let noise_per_tick =
        scene.clutter.noise_rate_per_px_s * (cam.width as f64 * cam.height as f64) * 1e-6;
    let front_alive = scene.render_front;

    for tick in 0..scene.duration_us {
        let t_abs = scene.t0_us + tick;
        let r = track.radius_at(tick as f64);

        if front_alive && r < geometry.zeta {
            // Worst-case image motion per unit radius bounds when the
            // silhouette must be re-rendered.
            let s = (r / geometry.zeta).min(0.999);
            let dd_dr = cam.model.f / (geometry.zeta * (1.0 - s * s).powf(1.5));
            if (r - last_rendered_r) * dd_dr >= FRONT_RENDER_STEP_PX || last_rendered_r < 0.0 {
                last_rendered_r = r;
                render_front_ring(
                    &mut emitter,
                    cam,
                    geometry,
                    scene,
                    r,
                    t_abs,
                    n_alpha,
                    &mut front_visited,
                    &mut exit_visited,
                    rng,
                );
            }
        }

        if let Some(pr) = scene.clutter.products {
            let disc_r = pr.max_radius_px * (1.0 - (-(tick as f64) / pr.growth_tau_us).exp());
            let rate = pr.rate_per_us * (-(tick as f64) / pr.decay_tau_us).exp();
            product_acc += rate;
            while product_acc >= 1.0 {
                product_acc -= 1.0;
                let rho = disc_r * rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                let x = (geometry.blast_image.x + rho * phi.cos()).round() as i64;
                let y = (geometry.blast_image.y + rho * phi.sin()).round() as i64;
                let p = if rng.random::<bool>() { 1 } else { -1 };
                emitter.emit(t_abs, x, y, p, EventLabel::Product);
            }
        }

        if noise_per_tick > 0.0 {
            noise_acc += noise_per_tick;
            while noise_acc >= 1.0 {
                noise_acc -= 1.0;
                let x = rng.random_range(0..cam.width) as i64;
                let y = rng.random_range(0..cam.height) as i64;
                let p = if rng.random::<bool>() { 1 } else { -1 };
                emitter.emit(t_abs, x, y, p, EventLabel::Noise);
            }
        }
    }
    Ok(emitter)
}

#[allow(clippy::too_many_arguments)]
fn render_front_ring(
    emitter: &mut Emitter,
    cam: &SimCamera,
    geometry: &ViewGeometry,
    scene: &BlastScene,
    r: f64,
    t_abs: u64,
    n_alpha: usize,
    front_visited: &mut [bool],
    exit_visited: &mut [bool],
    rng: &mut ChaCha8Rng,
) {
    let events_per_crossing = ((scene.front_step / cam.phi).floor() as u32)
        .clamp(1, MAX_EVENTS_PER_STEP);
    let (bx, by) = (geometry.blast_image.x, geometry.blast_image.y);
    for k in 0..n_alpha {
        let alpha = k as f64 * scene.front_alpha_step_deg;
        let Ok((image, _)) = silhouette_image_point(geometry, r, alpha) else {
            continue;
        };
        let x = image.0.round() as i64;
        let y = image.1.round() as i64;
        if x < 0 || y < 0 || x >= cam.width as i64 || y >= cam.height as i64 {
            continue;
        }
        let idx = (y as usize) * cam.width as usize + x as usize;
        if !front_visited[idx] {
            front_visited[idx] = true;
            let jitter = if scene.front_jitter_us > 0 {
                rng.random_range(0..=2 * scene.front_jitter_us) as i64 - scene.front_jitter_us as i64
            } else {
                0
            };
            let t_fire = t_abs.saturating_add_signed(jitter);
            for n in 0..events_per_crossing {
                emitter.emit(t_fire + n as u64, x, y, 1, EventLabel::Front);
            }
        }
        // Wider bands drop a trailing negative edge when the band has
        // fully passed a pixel.
        if scene.front_width_px > 1.0 {
            let d = (image.0 - bx).hypot(image.1 - by);
            let d_exit = d - scene.front_width_px;
            if d_exit > 0.0 {
                let scale = d_exit / d;
                let xe = (bx + (image.0 - bx) * scale).round() as i64;
                let ye = (by + (image.1 - by) * scale).round() as i64;
                if xe >= 0 && ye >= 0 && xe < cam.width as i64 && ye < cam.height as i64 {
                    let eidx = (ye as usize) * cam.width as usize + xe as usize;
                    if front_visited[eidx] && !exit_visited[eidx] {
                        exit_visited[eidx] = true;
                        emitter.emit(t_abs, xe, ye, -1, EventLabel::Front);
                    }
                }
            }
        }
    }
}

fn render_led_blob(
    emitter: &mut Emitter,
    cam: &SimCamera,
    t_abs: u64,
    px: f64,
    py: f64,
    brightness: f64,
    polarity: i8,
) {
    let cx = px.round() as i64;
    let cy = py.round() as i64;
    for dy in -LED_BLOB_EXTENT..=LED_BLOB_EXTENT {
        for dx in -LED_BLOB_EXTENT..=LED_BLOB_EXTENT {
            let (x, y) = (cx + dx, cy + dy);
            if x < 0 || y < 0 || x >= cam.width as i64 || y >= cam.height as i64 {
                continue;
            }
            let dist2 = (x as f64 - px).powi(2) + (y as f64 - py).powi(2);
            let delta_l = brightness * (-dist2 / (2.0 * LED_BLOB_SIGMA * LED_BLOB_SIGMA)).exp();
            let n = ((delta_l / cam.phi).floor() as u32).min(MAX_EVENTS_PER_STEP);
            for k in 0..n {
                emitter.emit(t_abs + k as u64, x, y, polarity, EventLabel::Led);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn straight_camera(width: u32, height: u32) -> SimCamera {
        let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        let c = Vector3::new(-20.0, 0.0, 1.5);
        let t = -(r * c);
        let model = CameraModel::from_parameters(
            855.27,
            (width as f64 / 2.0, height as f64 / 2.0),
            r,
            t,
        )
        .unwrap();
        SimCamera {
            model,
            width,
            height,
            xi_us: 1,
            phi: 0.2,
        }
    }

    #[test]
    fn radius_law_matches_reference_velocity() {
        let constants = BlastConstants::default();
        let w_cbrt = 0.6f64.cbrt();
        // dr/dt at r = 6 m equals the 6 m reference velocity.
        let v = drdt(6.0, w_cbrt, &constants) * 1e6;
        assert!((v - 370.76).abs() / 370.76 < 1e-3, "v = {v}");
    }

    #[test]
    fn radius_is_monotone_and_velocity_decays() {
        let constants = BlastConstants::default();
        let track = RadiusTrack::integrate(0.6, 25_000, &constants, DEFAULT_R_INIT_M).unwrap();
        let mut last_r = 0.0;
        let mut last_v = f64::INFINITY;
        for t in (0..25_000).step_by(500) {
            let r = track.radius_at(t as f64);
            assert!(r > last_r);
            last_r = r;
            let v = drdt(r, 0.6f64.cbrt(), &constants) * 1e6;
            assert!(v < last_v);
            assert!(v > constants.c0);
            last_v = v;
        }
    }

    #[test]
    fn step_refinement_converges() {
        let constants = BlastConstants::default();
        let full = propagate_radius_with_step(0.6, 20_000.0, &constants, DEFAULT_R_INIT_M, 1.0).unwrap();
        let half = propagate_radius_with_step(0.6, 20_000.0, &constants, DEFAULT_R_INIT_M, 0.5).unwrap();
        assert!(
            (full - half).abs() < 1e-6,
            "step refinement moved r by {}",
            (full - half).abs()
        );
        assert!(propagate_radius(0.6, 100.0, &constants, 0.0).is_err());
    }

    #[test]
    fn track_time_inverts_radius() {
        let constants = BlastConstants::default();
        let track = RadiusTrack::integrate(0.6, 30_000, &constants, DEFAULT_R_INIT_M).unwrap();
        for r in [1.0, 4.0, 6.0, 8.0] {
            let t = track.time_at_radius(r).unwrap();
            assert_abs_diff_eq!(track.radius_at(t), r, epsilon = 1e-6);
        }
        assert!(track.time_at_radius(0.01).is_none());
        assert!(track.time_at_radius(1e9).is_none());
    }

    #[test]
    fn silhouette_round_trips_through_the_measurement_model() {
        let cam = straight_camera(1280, 720);
        let g = ViewGeometry::new(cam.model.clone(), Vector3::new(0.0, 0.0, 1.5)).unwrap();
        for r in [0.5, 2.0, 5.0, 9.0] {
            for alpha in [0.0, 33.0, 90.0, 181.5, 270.0] {
                let (image, tangent) = silhouette_image_point(&g, r, alpha).unwrap();
                let theta = geom::view_angle(&geom::ray_lengths(&g, image)).unwrap();
                let recovered = geom::radius_from_event(g.zeta, theta).unwrap();
                assert_abs_diff_eq!(recovered, r, epsilon = 1e-9);
                // Tangency identity |X - C|^2 = zeta^2 - r^2.
                let lhs = (tangent - g.camera.optical_center).norm_squared();
                assert_abs_diff_eq!(lhs, g.zeta * g.zeta - r * r, epsilon = 1e-9);
            }
        }
        // r -> 0 collapses to the blast image point.
        let (image, _) = silhouette_image_point(&g, 0.0, 120.0).unwrap();
        assert_abs_diff_eq!(image.0, g.blast_image.x, epsilon = 1e-12);
        assert!(silhouette_image_point(&g, 25.0, 0.0).is_err());
    }

    #[test]
    fn monitoring_interval_quantizes_timestamps() {
        let mut cam = straight_camera(640, 480);
        cam.xi_us = 100;
        let mut scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 4000);
        scene.clutter.noise_rate_per_px_s = 50.0;
        let out = simulate_events(&scene, &[cam], 9).unwrap();
        let stream = &out.streams[0];
        assert!(!stream.events.is_empty());
        assert!(stream.events.iter().all(|e| e.t % 100 == 0));
    }

    #[test]
    fn zero_duration_scene_is_empty() {
        let cam = straight_camera(320, 240);
        let mut scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 0);
        scene.clutter = ClutterSpec::default();
        let out = simulate_events(&scene, &[cam], 7).unwrap();
        assert!(out.streams[0].events.is_empty());
    }

    #[test]
    fn led_only_scene_alternates_polarity_at_the_period() {
        let cam = straight_camera(1280, 720);
        let mut scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 8000);
        scene.render_front = false;
        scene.leds.push(LedMarkerSpec {
            world: Vector3::new(0.0, 2.0, 1.0),
            period_us: 1000,
            duty: 0.5,
            brightness: 1.0,
        });
        let out = simulate_events(&scene, &[cam.clone()], 3).unwrap();
        let stream = &out.streams[0];
        assert!(!stream.events.is_empty());
        assert!(stream.labels.iter().all(|&l| l == EventLabel::Led));
        // Pick the blob center pixel: alternating polarity runs at the
        // half-period.
        let (px, py) = cam.model.project(&Vector3::new(0.0, 2.0, 1.0)).unwrap();
        let (cx, cy) = (px.round() as u16, py.round() as u16);
        let center: Vec<&Event> = stream
            .events
            .iter()
            .filter(|e| e.x == cx && e.y == cy)
            .collect();
        assert!(center.len() > 8);
        let mut on_times: Vec<u64> = center.iter().filter(|e| e.p > 0).map(|e| e.t).collect();
        on_times.sort_unstable();
        on_times.dedup();
        // Burst starts every period.
        let starts: Vec<u64> = on_times
            .iter()
            .copied()
            .filter(|t| !on_times.contains(&t.wrapping_sub(1)))
            .collect();
        for pair in starts.windows(2) {
            assert_eq!(pair[1] - pair[0], 1000);
        }
    }

    #[test]
    fn front_only_scene_hugs_the_silhouette_track() {
        let cam = straight_camera(1280, 720);
        let scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 12_000);
        let out = simulate_events(&scene, &[cam.clone()], 11).unwrap();
        let stream = &out.streams[0];
        assert!(stream.events.len() > 10_000, "got {}", stream.events.len());
        let g = ViewGeometry::new(cam.model.clone(), Vector3::new(0.0, 0.0, 1.5)).unwrap();
        let track = RadiusTrack::integrate(0.6, 12_000, &scene.constants, DEFAULT_R_INIT_M).unwrap();
        let mut within = 0usize;
        for e in &stream.events {
            let r = track.radius_at(e.t as f64);
            let d_expect = {
                let theta = (r / g.zeta).asin();
                // Distance from blast image to silhouette in this geometry
                // is isotropic because the blast sits on the axis.
                g.camera.f * theta.tan()
            };
            let d = (f64::from(e.x) - g.blast_image.x).hypot(f64::from(e.y) - g.blast_image.y);
            if (d - d_expect).abs() <= 1.0 {
                within += 1;
            }
        }
        let frac = within as f64 / stream.events.len() as f64;
        assert!(frac >= 0.99, "only {frac:.4} of events within 1 px");
    }

    #[test]
    fn labels_are_complete_and_tallies_match() {
        let cam = straight_camera(640, 480);
        let mut scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 4000);
        scene.clutter = ClutterSpec::default();
        scene.leds.push(LedMarkerSpec {
            world: Vector3::new(0.0, -2.0, 1.0),
            period_us: 500,
            duty: 0.5,
            brightness: 0.8,
        });
        let out = simulate_events(&scene, &[cam], 21).unwrap();
        let stream = &out.streams[0];
        assert_eq!(stream.events.len(), stream.labels.len());
        let mut counts: std::collections::HashMap<EventLabel, u64> = Default::default();
        for &l in &stream.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        for (label, tally) in &stream.tallies {
            assert_eq!(counts.get(label).copied().unwrap_or(0), *tally, "{label:?}");
        }
        assert_eq!(
            stream.tallies.iter().map(|(_, n)| *n).sum::<u64>(),
            stream.events.len() as u64
        );
    }

    #[test]
    fn same_seed_is_bit_identical_and_seeds_differ() {
        let cam = straight_camera(320, 240);
        let mut scene = BlastScene::bare(0.6, Vector3::new(0.0, 0.0, 1.5), 3000);
        scene.clutter = ClutterSpec::default();
        let a = simulate_events(&scene, &[cam.clone()], 5).unwrap();
        let b = simulate_events(&scene, &[cam.clone()], 5).unwrap();
        assert_eq!(a.streams[0].events, b.streams[0].events);
        assert_eq!(a.streams[0].labels, b.streams[0].labels);
        let c = simulate_events(&scene, &[cam], 6).unwrap();
        assert_ne!(a.streams[0].events, c.streams[0].events);
    }
}
