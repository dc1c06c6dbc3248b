//! `evshock simulate`: run the synthetic generator and write per-camera
//! streams, the label sidecar, ground truth and the true camera files.

use std::path::PathBuf;

use clap::ValueEnum;
use evshock::calib::write_camera_file;
use evshock::io::{self, LabelRow};
use evshock::synth::config::{GroundTruthFile, SceneConfig};
use evshock::synth::simulate_events;

use crate::error::CliError;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StreamFormat {
    Binary,
    Csv,
}

#[derive(clap::Args)]
pub struct Args {
    /// Scene description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Event stream encoding.
    #[arg(long, value_enum, default_value = "binary")]
    format: StreamFormat,
    /// Print the parsed scene back and exit.
    #[arg(long)]
    dump_config: bool,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let scene_config = SceneConfig::read(&args.config)?;
    if args.dump_config {
        print!("{}", scene_config.to_toml()?);
        return Ok(());
    }
    let (scene, cameras) = scene_config.build()?;
    let out = simulate_events(&scene, &cameras, scene_config.seed)?;

    std::fs::create_dir_all(&args.out)?;
    let cam_dir = args.out.join("cameras");
    std::fs::create_dir_all(&cam_dir)?;

    let mut labels = Vec::new();
    for (idx, (stream, cam)) in out.streams.iter().zip(&cameras).enumerate() {
        let path = match args.format {
            StreamFormat::Binary => {
                let p = args.out.join(format!("cam{idx}.evs"));
                io::write_events_binary(&p, cam.width, cam.height, &stream.events)?;
                p
            }
            StreamFormat::Csv => {
                let p = args.out.join(format!("cam{idx}.csv"));
                io::write_events_csv(&p, &stream.events)?;
                p
            }
        };
        write_camera_file(&cam_dir.join(format!("cam{idx}.toml")), &cam.model)?;
        for (e, label) in stream.events.iter().zip(&stream.labels) {
            labels.push(LabelRow {
                cam: idx,
                t_us: e.t,
                x: e.x,
                y: e.y,
                label: label.as_str().to_string(),
            });
        }
        println!(
            "cam{idx}: {} events -> {} (t {} .. {} us)",
            stream.events.len(),
            path.display(),
            stream.header.t_min,
            stream.header.t_max
        );
    }
    io::write_labels(&args.out.join("labels.csv"), &labels)?;
    GroundTruthFile::from_truth(&out.truth).write(&args.out.join("truth.toml"))?;
    println!("truth table and labels written to {}", args.out.display());
    Ok(())
}
