//! The resolved parameter ledger: every tunable of the pipeline in one
//! structure, loadable from TOML, dumpable, and embedded in reports.
//! Unknown keys are rejected.

use std::path::Path;

use evshock::blast::{BlastConstants, UncertaintyBudget};
use evshock::front::FrontConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Polar encoding and extraction.
    pub kappa: f64,
    pub rho: f64,
    pub tolerance: f64,
    pub density_q: f64,
    pub density_floor: u32,
    pub dist_threshold: f64,
    pub min_separation_frac: f64,
    pub q_start: f64,
    pub q_cap: f64,
    pub plateau_frac: f64,
    pub window_fracs: [f64; 2],
    pub window_half_width_frac: f64,
    pub median_band_px: f64,
    pub min_window_events: usize,
    pub t_marginal_bin_us: u64,
    pub d_marginal_bin_px: f64,
    pub spike_factor: f64,
    pub product_factor: f64,
    pub coherence_abs: u32,
    pub coherence_rel: f64,
    pub laps: usize,
    // Angle binning and fitting.
    pub angle_bin_deg: f64,
    pub degree: usize,
    /// Radius window the polynomial is fitted over, meters.
    pub fit_r_min_m: f64,
    pub fit_r_max_m: f64,
    // Ambient constants.
    pub eta: f64,
    pub p0_kpa: f64,
    pub c0: f64,
    // Radius uncertainty budget.
    pub eps_zeta_m: f64,
    pub eps_f_px: f64,
    pub eps_xo_px: f64,
    pub eps_yo_px: f64,
    pub eps_a_px: f64,
    pub eps_pi_px: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let front = FrontConfig::default();
        let constants = BlastConstants::default();
        let budget = UncertaintyBudget::reference();
        RunConfig {
            kappa: front.kappa,
            rho: front.rho,
            tolerance: front.tolerance,
            density_q: front.density_q,
            density_floor: front.density_floor,
            dist_threshold: front.dist_threshold,
            min_separation_frac: front.min_separation_frac,
            q_start: front.q_start,
            q_cap: front.q_cap,
            plateau_frac: front.plateau_frac,
            window_fracs: [front.window_fracs.0, front.window_fracs.1],
            window_half_width_frac: front.window_half_width_frac,
            median_band_px: front.median_band_px,
            min_window_events: front.min_window_events,
            t_marginal_bin_us: front.t_marginal_bin,
            d_marginal_bin_px: front.d_marginal_bin,
            spike_factor: front.spike_factor,
            product_factor: front.product_factor,
            coherence_abs: front.coherence_abs,
            coherence_rel: front.coherence_rel,
            laps: front.laps,
            angle_bin_deg: 5.0,
            degree: 3,
            fit_r_min_m: 0.0,
            fit_r_max_m: f64::INFINITY,
            eta: constants.eta,
            p0_kpa: constants.p0_kpa,
            c0: constants.c0,
            eps_zeta_m: budget.eps_zeta,
            eps_f_px: budget.eps_f,
            eps_xo_px: budget.eps_xo,
            eps_yo_px: budget.eps_yo,
            eps_a_px: budget.eps_a,
            eps_pi_px: budget.eps_pi,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let config: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::validation("E_CONFIG", format!("{}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::validation("E_CONFIG", format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::validation("E_CONFIG", msg));
        if !(self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(1..=6).contains(&self.degree) {
            return bad(format!("degree must be in 1..=6, got {}", self.degree));
        }
        if !(self.angle_bin_deg > 0.0) || (360.0 / self.angle_bin_deg).fract().abs() > 1e-9 {
            return bad(format!(
                "angle_bin_deg must divide 360 evenly, got {}",
                self.angle_bin_deg
            ));
        }
        if !(self.window_fracs[0] > 0.0
            && self.window_fracs[0] < self.window_fracs[1]
            && self.window_fracs[1] < 1.0)
        {
            return bad(format!("window_fracs must satisfy 0 < a < b < 1, got {:?}", self.window_fracs));
        }
        if !(self.eta > 1.0 && self.p0_kpa > 0.0 && self.c0 > 0.0) {
            return bad("ambient constants out of range".into());
        }
        if [self.eps_zeta_m, self.eps_f_px, self.eps_xo_px, self.eps_yo_px, self.eps_a_px, self.eps_pi_px]
            .iter()
            .any(|e| !(*e >= 0.0))
        {
            return bad("uncertainty budget entries must be non-negative".into());
        }
        if self.laps == 0 {
            return bad("laps must be at least 1".into());
        }
        Ok(())
    }

    pub fn front_config(&self) -> FrontConfig {
        FrontConfig {
            kappa: self.kappa,
            rho: self.rho,
            dist_threshold: self.dist_threshold,
            density_q: self.density_q,
            min_separation_frac: self.min_separation_frac,
            tolerance: self.tolerance,
            q_start: self.q_start,
            q_cap: self.q_cap,
            plateau_frac: self.plateau_frac,
            window_fracs: (self.window_fracs[0], self.window_fracs[1]),
            window_half_width_frac: self.window_half_width_frac,
            median_band_px: self.median_band_px,
            min_window_events: self.min_window_events,
            t_marginal_bin: self.t_marginal_bin_us,
            d_marginal_bin: self.d_marginal_bin_px,
            spike_factor: self.spike_factor,
            product_factor: self.product_factor,
            coherence_abs: self.coherence_abs,
            coherence_rel: self.coherence_rel,
            laps: self.laps,
            density_floor: self.density_floor,
        }
    }

    pub fn constants(&self) -> BlastConstants {
        BlastConstants {
            eta: self.eta,
            p0_kpa: self.p0_kpa,
            c0: self.c0,
        }
    }

    pub fn budget(&self) -> UncertaintyBudget {
        UncertaintyBudget {
            eps_zeta: self.eps_zeta_m,
            eps_f: self.eps_f_px,
            eps_xo: self.eps_xo_px,
            eps_yo: self.eps_yo_px,
            eps_a: self.eps_a_px,
            eps_pi: self.eps_pi_px,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// `--angles start:stop:step` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for AngleRange {
    fn default() -> Self {
        AngleRange { start: 0.0, stop: 360.0, step: 5.0 }
    }
}

impl AngleRange {
    pub fn parse(text: &str) -> Result<AngleRange, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::validation(
                "E_USAGE",
                format!("angles must be start:stop:step, got '{text}'"),
            ));
        }
        let num = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|e| CliError::validation("E_USAGE", format!("angles: {e}")))
        };
        let range = AngleRange {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        if !(range.step > 0.0)
            || !(0.0..=360.0).contains(&range.start)
            || !(0.0..=360.0).contains(&range.stop)
            || range.start >= range.stop
            || (360.0 / range.step).fract().abs() > 1e-9
        {
            return Err(CliError::validation(
                "E_USAGE",
                format!("invalid angle range '{text}': need 0 <= start < stop <= 360 and a step dividing 360"),
            ));
        }
        Ok(range)
    }

    pub fn contains(&self, alpha_lo: f64) -> bool {
        alpha_lo >= self.start - 1e-9 && alpha_lo < self.stop - 1e-9
    }
}

/// `X,Y,Z` world coordinates.
pub fn parse_vec3(text: &str) -> Result<nalgebra::Vector3<f64>, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::validation(
            "E_USAGE",
            format!("expected X,Y,Z, got '{text}'"),
        ));
    }
    let mut vals = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .parse()
            .map_err(|e| CliError::validation("E_USAGE", format!("coordinate {i}: {e}")))?;
    }
    Ok(nalgebra::Vector3::new(vals[0], vals[1], vals[2]))
}
