//! `evshock calibrate`: LED detection per marker file, then the projection
//! solve over the resulting 2D-3D correspondences.

use std::path::PathBuf;

use evshock::calib::{
    accumulate_trigger_matrices, detect_led, estimate_flicker_period, estimate_projection,
    read_markers, write_camera_file, Correspondence, DltOptions,
};
use evshock::io::{read_events, EventFormat};

use crate::error::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory with one stream per marker: `marker_<id>.csv` or `.evs`.
    #[arg(long)]
    events_dir: PathBuf,
    /// Marker config: `marker_id, X, Y, Z, period_us` lines.
    #[arg(long)]
    markers: PathBuf,
    /// Sensor width in pixels.
    #[arg(long)]
    width: u32,
    /// Sensor height in pixels.
    #[arg(long)]
    height: u32,
    /// Output camera file (TOML).
    #[arg(long)]
    out: PathBuf,
    /// Refinement window half-size, px.
    #[arg(long, default_value_t = 5)]
    q: u16,
    /// Estimate each marker's flicker period from the event-rate
    /// autocorrelation instead of trusting the marker file.
    #[arg(long)]
    auto_period: bool,
    /// Run the optional nonlinear refinement after the linear solve.
    #[arg(long)]
    refine: bool,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let markers = read_markers(&args.markers)?;
    if markers.len() < 6 {
        return Err(CliError::validation(
            "E_MARKERS",
            format!("need at least 6 markers for calibration, got {}", markers.len()),
        ));
    }
    let mut correspondences = Vec::with_capacity(markers.len());
    for marker in &markers {
        let stream_path = ["csv", "evs"]
            .iter()
            .map(|ext| args.events_dir.join(format!("marker_{}.{ext}", marker.id)))
            .find(|p| p.exists())
            .ok_or_else(|| {
                CliError::validation(
                    "E_MARKERS",
                    format!("no stream for marker '{}' in {}", marker.id, args.events_dir.display()),
                )
            })?;
        let stream = read_events(&stream_path, EventFormat::from_path(&stream_path))?;
        if stream.unordered_input {
            eprintln!("warning: {} was not time-sorted", stream_path.display());
        }
        let period = if args.auto_period {
            estimate_flicker_period(&stream.events).ok_or_else(|| {
                CliError::numeric(
                    "E_PERIOD",
                    format!("could not estimate the flicker period for marker '{}'", marker.id),
                )
            })?
        } else {
            marker.period_us
        };
        let window = (stream.header.t_min, stream.header.t_min + period);
        let matrices = accumulate_trigger_matrices(&stream.events, args.width, args.height, window);
        let detection = detect_led(&matrices, args.q)?;
        println!(
            "marker {}: period {period} us, image ({:.3}, {:.3}), support {}",
            marker.id, detection.refined.0, detection.refined.1, detection.support
        );
        correspondences.push(Correspondence {
            image: detection.refined,
            world: marker.world,
        });
    }
    let opts = DltOptions {
        normalize: true,
        refine: args.refine,
    };
    let model = estimate_projection(&correspondences, &opts)?;
    write_camera_file(&args.out, &model)?;
    println!(
        "camera written to {}: f {:.2} px, principal ({:.2}, {:.2}), reprojection RMS {:.4} px",
        args.out.display(),
        model.f,
        model.principal.0,
        model.principal.1,
        model.reproj_error
    );
    Ok(())
}
