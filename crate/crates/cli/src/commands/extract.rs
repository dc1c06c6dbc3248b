//! `evshock extract`: polar encode, partition by angle and run the
//! adaptive-band slope search; writes the fronts CSV and the extraction
//! trace.

use std::io::Write as _;
use std::path::PathBuf;

use evshock::event::{partition_by_angle_par, polar_encode_par};
use evshock::front::extract_all;
use evshock::io::{read_events, write_fronts, EventFormat, FrontRow};

use crate::error::CliError;
use crate::runconfig::{parse_vec3, AngleRange};
use crate::ConfigOpts;

#[derive(clap::Args)]
pub struct Args {
    /// Event stream (.csv or binary).
    #[arg(long)]
    events: PathBuf,
    /// Calibrated camera file.
    #[arg(long)]
    camera: PathBuf,
    /// Blast center world coordinates `X,Y,Z` (meters).
    #[arg(long)]
    blast_world: String,
    /// Measured blast image point `x,y` (pixels); projected when omitted.
    #[arg(long)]
    blast_image: Option<String>,
    /// View index recorded in the fronts file.
    #[arg(long, default_value_t = 0)]
    view: usize,
    /// Angles to process, `start:stop:step` degrees.
    #[arg(long, default_value = "0:360:5")]
    angles: String,
    /// Output fronts CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional extraction trace (structured text).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Worker threads for encoding/partitioning.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    config: ConfigOpts,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let Some(config) = args.config.load()? else {
        return Ok(());
    };
    let angles = AngleRange::parse(&args.angles)?;
    let blast_world = parse_vec3(&args.blast_world)?;
    let blast_image = match &args.blast_image {
        Some(text) => {
            let v: Vec<&str> = text.split(',').collect();
            if v.len() != 2 {
                return Err(CliError::validation("E_USAGE", "blast-image must be x,y"));
            }
            Some((
                v[0].trim().parse().map_err(|e| CliError::validation("E_USAGE", format!("blast-image: {e}")))?,
                v[1].trim().parse().map_err(|e| CliError::validation("E_USAGE", format!("blast-image: {e}")))?,
            ))
        }
        None => None,
    };

    let camera = super::load_camera(&args.camera)?;
    let geometry = super::build_geometry(camera, blast_world, blast_image)?;
    let stream = read_events(&args.events, EventFormat::from_path(&args.events))?;
    if stream.unordered_input {
        eprintln!("warning: {} was not time-sorted; a stable sort was applied", args.events.display());
    }

    let polar = polar_encode_par(&stream.events, geometry.blast_image, args.workers.max(1));
    let segments = partition_by_angle_par(&polar, angles.step, args.workers.max(1))?;
    let front_config = config.front_config();
    let outcomes = extract_all(&segments, &front_config);

    let mut rows: Vec<FrontRow> = Vec::new();
    let mut trace_text = String::new();
    let mut measurable = 0usize;
    for outcome in &outcomes {
        if !angles.contains(outcome.alpha_lo) {
            continue;
        }
        match &outcome.result {
            Ok(ex) => {
                measurable += 1;
                for e in &ex.extraction.s_prime {
                    rows.push(FrontRow {
                        view: args.view,
                        alpha_deg: e.alpha,
                        t_us: e.t,
                        d_px: e.d,
                    });
                }
                if args.trace.is_some() {
                    trace_text.push_str(&format!(
                        "[angle {:.1}..{:.1}]\nband: t1={} d1={:.3} t2={} d2={:.3} q_prime={:.3} epsilon={:.4} accepted={}\n",
                        outcome.alpha_lo,
                        outcome.alpha_hi,
                        ex.band.t1,
                        ex.band.d1,
                        ex.band.t2,
                        ex.band.d2,
                        ex.band.q_prime,
                        ex.band.epsilon,
                        ex.extraction.s_prime.len(),
                    ));
                    for u in &ex.extraction.trace {
                        trace_text.push_str(&format!(
                            "update set={:?} reference=({},{:.3}) k_tau={:.6} benchmark=({},{:.3})\n",
                            u.set, u.reference.t, u.reference.d, u.k_tau, u.benchmark.t, u.benchmark.d
                        ));
                    }
                }
            }
            Err(e) => {
                if args.trace.is_some() {
                    trace_text.push_str(&format!(
                        "[angle {:.1}..{:.1}]\nunmeasurable: {e}\n",
                        outcome.alpha_lo, outcome.alpha_hi
                    ));
                }
            }
        }
    }
    write_fronts(&args.out, &rows)?;
    if let Some(trace_path) = &args.trace {
        let mut f = std::fs::File::create(trace_path)?;
        f.write_all(trace_text.as_bytes())?;
    }
    println!(
        "extracted {} front events over {measurable} measurable angles -> {}",
        rows.len(),
        args.out.display()
    );
    Ok(())
}
