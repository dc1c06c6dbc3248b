//! `evshock reconstruct`: sample the fitted models on a common time grid
//! and intersect each view's tangent rays with the shock sphere.

use std::path::PathBuf;

use evshock::geom::{reconstruct_point, solve_image_point};
use evshock::io::{write_cloud, CloudRow};

use crate::error::CliError;
use crate::runconfig::parse_vec3;

#[derive(clap::Args)]
pub struct Args {
    /// Model files, one per view (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    /// Camera files; index must match the view indices in the models.
    #[arg(long, value_delimiter = ',', required = true)]
    cameras: Vec<PathBuf>,
    /// Blast center world coordinates `X,Y,Z` (meters).
    #[arg(long)]
    blast_world: String,
    /// Time grid step, microseconds.
    #[arg(long, default_value_t = 1000)]
    every_us: u64,
    /// Output cloud CSV.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let blast_world = parse_vec3(&args.blast_world)?;
    let mut geometries = Vec::with_capacity(args.cameras.len());
    for path in &args.cameras {
        let camera = super::load_camera(path)?;
        geometries.push(super::build_geometry(camera, blast_world, None)?);
    }
    let models = super::load_models(&args.models)?;

    let mut rows: Vec<CloudRow> = Vec::new();
    let mut out_of_model = 0usize;
    for (key, model) in &models {
        let (view, _) = *key;
        let alpha = super::alpha_of(key);
        let Some(geometry) = geometries.get(view) else {
            return Err(CliError::validation(
                "E_USAGE",
                format!("model for view {view} but only {} cameras given", geometries.len()),
            ));
        };
        let (t_lo, t_hi) = model.t_domain();
        let mut t = t_lo.div_ceil(args.every_us) * args.every_us;
        while t <= t_hi {
            let r = model.radius_at(t as f64)?;
            if r <= 0.0 || r >= geometry.zeta {
                out_of_model += 1;
                t += args.every_us;
                continue;
            }
            let theta = (r / geometry.zeta).asin();
            match solve_image_point(geometry, theta, alpha)
                .and_then(|image| reconstruct_point(geometry, r, image))
            {
                Ok(point) => rows.push(CloudRow {
                    t_us: t,
                    view,
                    alpha_deg: alpha,
                    x: point.world.x,
                    y: point.world.y,
                    z: point.world.z,
                    tangency_residual: point.tangency_residual,
                    sphere_residual: point.sphere_residual,
                }),
                Err(_) => out_of_model += 1,
            }
            t += args.every_us;
        }
    }
    if rows.is_empty() {
        return Err(CliError::numeric("E_RECONSTRUCT", "no reconstructable points on the grid"));
    }
    rows.sort_by(|a, b| {
        (a.t_us, a.view)
            .cmp(&(b.t_us, b.view))
            .then(a.alpha_deg.partial_cmp(&b.alpha_deg).unwrap_or(std::cmp::Ordering::Equal))
    });
    write_cloud(&args.out, &rows)?;
    println!(
        "{} cloud points ({out_of_model} grid points out of model) -> {}",
        rows.len(),
        args.out.display()
    );
    Ok(())
}
