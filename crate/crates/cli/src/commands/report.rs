//! `evshock report`: plot-ready series, SVG figures and the per-distance
//! charge report, with the resolved parameter ledger embedded.

use std::fmt::Write as _;
use std::path::PathBuf;

use evshock::blast::{invert_charge, overpressure_from_mach, radius_uncertainty, velocity_from_scaled_distance};
use evshock::geom::{aggregate_statistics, solve_image_point};

use crate::error::CliError;
use crate::runconfig::parse_vec3;
use crate::svg;
use crate::ConfigOpts;

#[derive(clap::Args)]
pub struct Args {
    /// Model files (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    /// Camera files; index must match the view indices in the models.
    #[arg(long, value_delimiter = ',', required = true)]
    cameras: Vec<PathBuf>,
    /// Blast center world coordinates `X,Y,Z` (meters).
    #[arg(long)]
    blast_world: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Distances for the charge table, meters.
    #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
    distances: Vec<f64>,
    /// Reference charge mass for the empirical comparison bars, kg.
    #[arg(long)]
    charge_kg: Option<f64>,
    /// Sampling step for the series, microseconds.
    #[arg(long, default_value_t = 200)]
    every_us: u64,
    #[command(flatten)]
    config: ConfigOpts,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let Some(config) = args.config.load()? else {
        return Ok(());
    };
    let constants = config.constants();
    let blast_world = parse_vec3(&args.blast_world)?;
    let mut geometries = Vec::new();
    for path in &args.cameras {
        let camera = super::load_camera(path)?;
        geometries.push(super::build_geometry(camera, blast_world, None)?);
    }
    let models = super::load_models(&args.models)?;
    std::fs::create_dir_all(&args.out)?;

    // Radius and velocity series per (view, angle).
    let mut radius_csv = String::from("view,alpha_deg,t_us,r_m\n");
    let mut velocity_csv = String::from("view,alpha_deg,t_us,v_mps\n");
    let mut radius_series = Vec::new();
    let mut velocity_series = Vec::new();
    for (key, model) in &models {
        let alpha = super::alpha_of(key);
        let label = format!("view {} @ {:.1} deg", key.0, alpha);
        let mut rs = Vec::new();
        let mut vs = Vec::new();
        let (t_lo, t_hi) = model.t_domain();
        let mut t = t_lo;
        while t <= t_hi {
            let r = model.radius_at(t as f64)?;
            let v = model.velocity_at(t as f64)?;
            let _ = writeln!(radius_csv, "{},{},{},{}", key.0, alpha, t, r);
            let _ = writeln!(velocity_csv, "{},{},{},{}", key.0, alpha, t, v);
            rs.push((t as f64 * 1e-3, r));
            vs.push((t as f64 * 1e-3, v));
            t += args.every_us.max(1);
        }
        radius_series.push(svg::Series { label: label.clone(), points: rs });
        velocity_series.push(svg::Series { label, points: vs });
    }
    std::fs::write(args.out.join("radius_series.csv"), &radius_csv)?;
    std::fs::write(args.out.join("velocity_series.csv"), &velocity_csv)?;
    std::fs::write(
        args.out.join("radius_vs_time.svg"),
        svg::line_plot("Shock radius over time", "t (ms)", "r (m)", &radius_series),
    )?;
    std::fs::write(
        args.out.join("velocity_vs_time.svg"),
        svg::line_plot("Front velocity over time", "t (ms)", "v (m/s)", &velocity_series),
    )?;

    // Per-distance statistics, bars and the charge table.
    let mut bars_csv = String::from("distance_m,mean_mps,median_mps,stddev_mps,n_series,empirical_mps\n");
    let mut categories = Vec::new();
    let mut mean_bars = Vec::new();
    let mut median_bars = Vec::new();
    let mut empirical_bars = Vec::new();
    let mut report = String::new();
    let _ = writeln!(report, "# charge report");
    let _ = writeln!(report, "# velocity statistics are population statistics over (view, angle) series");
    for &distance in &args.distances {
        let mut velocities = Vec::new();
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for (key, model) in &models {
            let Some(t) = model.time_at_radius(distance) else { continue };
            let Ok(v) = model.velocity_at(t) else { continue };
            velocities.push(v);
            // Radius interval from the configured budget at this view's
            // geometry and this angle's image point.
            if let Some(geometry) = geometries.get(key.0) {
                if distance < geometry.zeta {
                    let theta = (distance / geometry.zeta).asin();
                    if let Ok(image) = solve_image_point(geometry, theta, super::alpha_of(key)) {
                        if let Ok(iv) = radius_uncertainty(geometry, image, &config.budget()) {
                            intervals.push((iv.r_lo, iv.r_hi));
                        }
                    }
                }
            }
        }
        if velocities.is_empty() {
            let _ = writeln!(report, "[{distance} m] no series reaches this distance");
            continue;
        }
        let stats = aggregate_statistics(&velocities)?;
        let empirical = args
            .charge_kg
            .map(|w| velocity_from_scaled_distance(distance / w.cbrt(), &constants))
            .transpose()?;
        let _ = writeln!(
            bars_csv,
            "{distance},{},{},{},{},{}",
            stats.mean,
            stats.median,
            stats.stddev,
            velocities.len(),
            empirical.map_or(String::new(), |v| v.to_string())
        );
        categories.push(format!("{distance} m"));
        mean_bars.push(stats.mean);
        median_bars.push(stats.median);
        if let Some(e) = empirical {
            empirical_bars.push(e);
        }

        let estimate = invert_charge(distance, stats.mean, &constants)?;
        let p_kpa = overpressure_from_mach(stats.mean / constants.c0, &constants)?;
        let (r_lo, r_hi) = intervals.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), &(a, b)| (lo.min(a), hi.max(b)),
        );
        let _ = writeln!(report, "[{distance} m]");
        let _ = writeln!(report, "series = {}", velocities.len());
        let _ = writeln!(
            report,
            "v_mean = {:.2} m/s, v_median = {:.2} m/s, v_stddev = {:.2} m/s",
            stats.mean, stats.median, stats.stddev
        );
        let _ = writeln!(report, "P = {:.3} kPa ({:.6} MPa)", p_kpa, estimate.p_mpa);
        let _ = writeln!(report, "W = {:.2} g (delta = {:.4} m/kg^(1/3))", estimate.w_kg * 1e3, estimate.delta);
        if intervals.is_empty() {
            let _ = writeln!(report, "radius_interval = unavailable");
        } else {
            let _ = writeln!(report, "radius_interval = [{r_lo:.4}, {r_hi:.4}] m over {} views", intervals.len());
        }
    }
    std::fs::write(args.out.join("velocity_at_distance.csv"), &bars_csv)?;
    let mut bar_series = vec![
        ("ours mean".to_string(), mean_bars),
        ("ours median".to_string(), median_bars),
    ];
    if empirical_bars.len() == categories.len() && !empirical_bars.is_empty() {
        bar_series.push(("empirical".to_string(), empirical_bars));
    }
    std::fs::write(
        args.out.join("velocity_bars.svg"),
        svg::bar_plot(
            "Front velocity at reference distances",
            "distance",
            "v (m/s)",
            &categories,
            &bar_series,
        ),
    )?;
    std::fs::write(args.out.join("charge_report.txt"), &report)?;

    // The full resolved parameter ledger rides along with every report.
    std::fs::write(args.out.join("parameters.toml"), config.to_toml())?;
    println!("report written to {}", args.out.display());
    Ok(())
}
