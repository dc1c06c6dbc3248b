//! `evshock invert`: TNT charge equivalence from a direct radius/velocity
//! pair or from fitted models evaluated at a target distance.

use std::path::PathBuf;

use clap::ValueEnum;
use evshock::blast::invert_charge;
use evshock::geom::aggregate_statistics;

use crate::error::CliError;
use crate::ConfigOpts;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Mean,
    Median,
}

#[derive(clap::Args)]
pub struct Args {
    /// Shock radius in meters (direct mode, with --velocity).
    #[arg(long, requires = "velocity", conflicts_with = "models")]
    radius: Option<f64>,
    /// Front velocity in m/s (direct mode, with --radius).
    #[arg(long, requires = "radius")]
    velocity: Option<f64>,
    /// Model files (model mode, with --distance).
    #[arg(long, value_delimiter = ',')]
    models: Vec<PathBuf>,
    /// Target distance in meters; every model is evaluated at the time its
    /// own radius crosses it.
    #[arg(long, requires = "models")]
    distance: Option<f64>,
    /// Aggregation across (view, angle) series in model mode.
    #[arg(long, value_enum, default_value = "mean")]
    stat: Stat,
    #[command(flatten)]
    config: ConfigOpts,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let Some(config) = args.config.load()? else {
        return Ok(());
    };
    let constants = config.constants();
    let (r, v, series) = match (args.radius, args.velocity) {
        (Some(r), Some(v)) => (r, v, 1usize),
        _ => {
            let Some(distance) = args.distance else {
                return Err(CliError::validation(
                    "E_USAGE",
                    "either --radius/--velocity or --models/--distance is required",
                ));
            };
            let models = super::load_models(&args.models)?;
            let mut velocities = Vec::new();
            for model in models.values() {
                let Some(t) = model.time_at_radius(distance) else {
                    continue;
                };
                if let Ok(v) = model.velocity_at(t) {
                    velocities.push(v);
                }
            }
            if velocities.is_empty() {
                return Err(CliError::numeric(
                    "E_INVERT",
                    format!("no model reaches {distance} m inside its domain"),
                ));
            }
            let stats = aggregate_statistics(&velocities)?;
            let v = match args.stat {
                Stat::Mean => stats.mean,
                Stat::Median => stats.median,
            };
            println!(
                "velocity at {distance} m over {} series: mean {:.2} m/s, median {:.2} m/s, stddev {:.2} m/s",
                velocities.len(),
                stats.mean,
                stats.median,
                stats.stddev
            );
            (distance, v, velocities.len())
        }
    };
    let estimate = invert_charge(r, v, &constants)?;
    println!(
        "r = {:.3} m, v = {:.2} m/s ({} series): P = {:.4} MPa, delta = {:.4} m/kg^(1/3), W = {:.2} g",
        estimate.r,
        estimate.v,
        series,
        estimate.p_mpa,
        estimate.delta,
        estimate.w_kg * 1e3
    );
    Ok(())
}
