//! `evshock measure`: extracted fronts to physical radii and fitted
//! radius-time models.

use std::collections::BTreeMap;
use std::path::PathBuf;

use evshock::event::PolarEvent;
use evshock::fit::{fit_radius_time, ModelEntry, ModelsFile};
use evshock::geom::samples_from_polar;
use evshock::io::{read_fronts, write_radii, RadiusRow};

use crate::error::CliError;
use crate::runconfig::parse_vec3;
use crate::ConfigOpts;

#[derive(clap::Args)]
pub struct Args {
    /// Fronts CSV from `extract`.
    #[arg(long)]
    fronts: PathBuf,
    /// Calibrated camera file for the view the fronts came from.
    #[arg(long)]
    camera: PathBuf,
    /// Blast center world coordinates `X,Y,Z` (meters).
    #[arg(long)]
    blast_world: String,
    /// Output radius samples CSV.
    #[arg(long)]
    out_radii: PathBuf,
    /// Output model file (TOML).
    #[arg(long)]
    out_models: PathBuf,
    #[command(flatten)]
    config: ConfigOpts,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let Some(config) = args.config.load()? else {
        return Ok(());
    };
    let camera = super::load_camera(&args.camera)?;
    let geometry = super::build_geometry(camera, parse_vec3(&args.blast_world)?, None)?;
    let rows = read_fronts(&args.fronts)?;
    if rows.is_empty() {
        return Err(CliError::numeric("E_MEASURE", "fronts file holds no events"));
    }

    // Group rows per (view, angle bin); each event keeps its own alpha.
    let bin = config.angle_bin_deg;
    let n_bins = (360.0 / bin).round() as i64;
    let mut groups: BTreeMap<(usize, i64), Vec<PolarEvent>> = BTreeMap::new();
    for row in &rows {
        let k = ((row.alpha_deg / bin) as i64).min(n_bins - 1);
        groups.entry((row.view, k)).or_default().push(PolarEvent {
            d: row.d_px,
            alpha: row.alpha_deg,
            p: 1,
            t: row.t_us,
        });
    }

    let mut radius_rows = Vec::new();
    let mut models = ModelsFile::default();
    let mut skipped = 0usize;
    for ((view, k), events) in groups {
        let samples = samples_from_polar(&geometry, view, &events);
        for s in &samples {
            radius_rows.push(RadiusRow {
                view: s.view,
                alpha_deg: s.alpha,
                t_us: s.t,
                r_m: s.r,
                theta_rad: s.theta,
            });
        }
        let pairs: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.r >= config.fit_r_min_m && s.r <= config.fit_r_max_m)
            .map(|s| (s.t as f64, s.r))
            .collect();
        if pairs.len() < config.degree + 1 {
            skipped += 1;
            continue;
        }
        match fit_radius_time(&pairs, config.degree) {
            Ok(model) => {
                if !model.monotone {
                    eprintln!("warning: non-monotone fit for view {view}, angle bin {k}");
                }
                let alpha_center = (k as f64 + 0.5) * bin;
                models.models.push(ModelEntry::from_model(view, alpha_center, &model));
            }
            Err(_) => skipped += 1,
        }
    }
    if models.models.is_empty() {
        return Err(CliError::numeric("E_MEASURE", "no angle produced a usable fit"));
    }
    radius_rows.sort_by(|a, b| {
        (a.view, a.t_us)
            .cmp(&(b.view, b.t_us))
            .then(a.alpha_deg.partial_cmp(&b.alpha_deg).unwrap_or(std::cmp::Ordering::Equal))
    });
    write_radii(&args.out_radii, &radius_rows)?;
    models.write(&args.out_models)?;
    println!(
        "{} radius samples, {} fitted models ({} groups skipped) -> {}, {}",
        radius_rows.len(),
        models.models.len(),
        skipped,
        args.out_radii.display(),
        args.out_models.display()
    );
    Ok(())
}
