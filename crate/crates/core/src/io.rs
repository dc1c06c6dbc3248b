//! File formats: event streams (CSV and binary) and the pipeline tables
//! exchanged between stages.
//!
//! Event CSV: header line `t,x,y,p`; integer microseconds, integer pixels,
//! polarity in {-1, 1}.
//!
//! Event binary: magic `EVS1`, then little-endian `u32 width`, `u32 height`,
//! `u64 count`, then `count` records of `(u64 t, u16 x, u16 y, i8 p)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::event::{Event, EventError, StreamHeader};

const BINARY_MAGIC: &[u8; 4] = b"EVS1";

/// On-disk encoding of an event stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Binary,
}

impl EventFormat {
    /// Picks a format from a file extension (`.csv` vs anything else).
    pub fn from_path(path: &Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => EventFormat::Csv,
            _ => EventFormat::Binary,
        }
    }
}

/// A parsed stream. `unordered_input` records that the file was not
/// time-sorted and a stable sort was applied.
#[derive(Debug, Clone)]
pub struct LoadedStream {
    pub header: StreamHeader,
    pub events: Vec<Event>,
    pub unordered_input: bool,
}

/// Reads an event stream, returning events in non-decreasing `t`.
///
/// An empty file (or header-only CSV) yields an empty stream, not an error.
pub fn read_events(path: &Path, format: EventFormat) -> Result<LoadedStream, EventError> {
    match format {
        EventFormat::Csv => read_events_csv(path),
        EventFormat::Binary => read_events_binary(path),
    }
}

fn validate_polarity(p: i64, line: usize) -> Result<i8, EventError> {
    if p == 1 || p == -1 {
        Ok(p as i8)
    } else {
        Err(EventError::Validation(format!(
            "polarity {p} outside {{-1, 1}} at line {line}"
        )))
    }
}

fn read_events_csv(path: &Path) -> Result<LoadedStream, EventError> {
    let file = File::open(path)?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut events: Vec<Event> = Vec::new();
    let mut line_buf = String::new();
    let mut line_no = 0usize;
    let mut max_x = 0u16;
    let mut max_y = 0u16;
    loop {
        line_buf.clear();
        let n = reader.read_line(&mut line_buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = line_buf.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            continue;
        }
        if line_no == 1 {
            if line != "t,x,y,p" {
                return Err(EventError::Parse {
                    line: 1,
                    msg: format!("expected header 't,x,y,p', got '{line}'"),
                });
            }
            continue;
        }
        let mut fields = line.split(',');
        let parse_int = |s: Option<&str>, name: &str| -> Result<i64, EventError> {
            s.ok_or_else(|| EventError::Parse {
                line: line_no,
                msg: format!("missing field '{name}'"),
            })?
            .trim()
            .parse::<i64>()
            .map_err(|e| EventError::Parse {
                line: line_no,
                msg: format!("field '{name}': {e}"),
            })
        };
        let t = parse_int(fields.next(), "t")?;
        let x = parse_int(fields.next(), "x")?;
        let y = parse_int(fields.next(), "y")?;
        let p = parse_int(fields.next(), "p")?;
        if fields.next().is_some() {
            return Err(EventError::Parse {
                line: line_no,
                msg: "too many fields".into(),
            });
        }
        if t < 0 || x < 0 || y < 0 || x > u16::MAX as i64 || y > u16::MAX as i64 {
            return Err(EventError::Parse {
                line: line_no,
                msg: format!("coordinates out of range: t={t} x={x} y={y}"),
            });
        }
        let p = validate_polarity(p, line_no)?;
        let (x, y) = (x as u16, y as u16);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
        events.push(Event { x, y, p, t: t as u64 });
    }
    let unordered = sort_if_needed(&mut events);
    let (width, height) = if events.is_empty() {
        (0, 0)
    } else {
        (u32::from(max_x) + 1, u32::from(max_y) + 1)
    };
    Ok(LoadedStream {
        header: StreamHeader::for_events(width, height, &events),
        events,
        unordered_input: unordered,
    })
}

fn read_events_binary(path: &Path) -> Result<LoadedStream, EventError> {
    let file = File::open(path)?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut head = [0u8; 20];
    if let Err(e) = reader.read_exact(&mut head) {
        // A zero-length file is an empty stream; a short header is malformed.
        let len = std::fs::metadata(path)?.len();
        if len == 0 {
            return Ok(LoadedStream {
                header: StreamHeader::default(),
                events: Vec::new(),
                unordered_input: false,
            });
        }
        return Err(EventError::Parse {
            line: 0,
            msg: format!("truncated binary header: {e}"),
        });
    }
    if &head[0..4] != BINARY_MAGIC {
        return Err(EventError::Parse {
            line: 0,
            msg: "bad magic, expected EVS1".into(),
        });
    }
    let width = u32::from_le_bytes(head[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(head[12..20].try_into().unwrap());
    let mut events = Vec::with_capacity(count.min(1 << 28) as usize);
    let mut rec = [0u8; 13];
    for i in 0..count {
        reader.read_exact(&mut rec).map_err(|e| EventError::Parse {
            line: 0,
            msg: format!("truncated at record {i} of {count}: {e}"),
        })?;
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = validate_polarity(rec[12] as i8 as i64, i as usize + 1)?;
        if u32::from(x) >= width || u32::from(y) >= height {
            return Err(EventError::Validation(format!(
                "record {i}: pixel ({x},{y}) outside declared {width}x{height}"
            )));
        }
        events.push(Event { x, y, p, t });
    }
    let unordered = sort_if_needed(&mut events);
    Ok(LoadedStream {
        header: StreamHeader::for_events(width, height, &events),
        events,
        unordered_input: unordered,
    })
}

fn sort_if_needed(events: &mut [Event]) -> bool {
    let sorted = events.windows(2).all(|w| w[0].t <= w[1].t);
    if !sorted {
        events.sort_by_key(|e| e.t); // stable: equal timestamps keep file order
    }
    !sorted
}

/// Writes an event stream as CSV (`t,x,y,p`).
pub fn write_events_csv(path: &Path, events: &[Event]) -> Result<(), EventError> {
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    writeln!(w, "t,x,y,p")?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an event stream in the fixed-width binary format.
pub fn write_events_binary(path: &Path, width: u32, height: u32, events: &[Event]) -> Result<(), EventError> {
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&width.to_le_bytes())?;
    w.write_all(&height.to_le_bytes())?;
    w.write_all(&(events.len() as u64).to_le_bytes())?;
    for e in events {
        w.write_all(&e.t.to_le_bytes())?;
        w.write_all(&e.x.to_le_bytes())?;
        w.write_all(&e.y.to_le_bytes())?;
        w.write_all(&(e.p as u8).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// One accepted front event, as stored in the fronts CSV
/// (`view,alpha_deg,t_us,d_px`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontRow {
    pub view: usize,
    pub alpha_deg: f64,
    pub t_us: u64,
    pub d_px: f64,
}

pub fn write_fronts(path: &Path, rows: &[FrontRow]) -> Result<(), EventError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "view,alpha_deg,t_us,d_px")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.view, r.alpha_deg, r.t_us, r.d_px)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fronts(path: &Path) -> Result<Vec<FrontRow>, EventError> {
    let rows = read_table(path, "view,alpha_deg,t_us,d_px")?;
    rows.into_iter()
        .map(|(line, f)| {
            Ok(FrontRow {
                view: parse_field(&f, 0, line)?,
                alpha_deg: parse_field(&f, 1, line)?,
                t_us: parse_field(&f, 2, line)?,
                d_px: parse_field(&f, 3, line)?,
            })
        })
        .collect()
}

/// One physical-radius sample (`view,alpha_deg,t_us,r_m,theta_rad`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusRow {
    pub view: usize,
    pub alpha_deg: f64,
    pub t_us: u64,
    pub r_m: f64,
    pub theta_rad: f64,
}

pub fn write_radii(path: &Path, rows: &[RadiusRow]) -> Result<(), EventError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "view,alpha_deg,t_us,r_m,theta_rad")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.view, r.alpha_deg, r.t_us, r.r_m, r.theta_rad)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_radii(path: &Path) -> Result<Vec<RadiusRow>, EventError> {
    let rows = read_table(path, "view,alpha_deg,t_us,r_m,theta_rad")?;
    rows.into_iter()
        .map(|(line, f)| {
            Ok(RadiusRow {
                view: parse_field(&f, 0, line)?,
                alpha_deg: parse_field(&f, 1, line)?,
                t_us: parse_field(&f, 2, line)?,
                r_m: parse_field(&f, 3, line)?,
                theta_rad: parse_field(&f, 4, line)?,
            })
        })
        .collect()
}

/// One reconstructed 3D front point
/// (`t_us,view,alpha_deg,X,Y,Z,tangency_residual,sphere_residual`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudRow {
    pub t_us: u64,
    pub view: usize,
    pub alpha_deg: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub tangency_residual: f64,
    pub sphere_residual: f64,
}

pub fn write_cloud(path: &Path, rows: &[CloudRow]) -> Result<(), EventError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t_us,view,alpha_deg,X,Y,Z,tangency_residual,sphere_residual")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t_us, r.view, r.alpha_deg, r.x, r.y, r.z, r.tangency_residual, r.sphere_residual
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud(path: &Path) -> Result<Vec<CloudRow>, EventError> {
    let rows = read_table(path, "t_us,view,alpha_deg,X,Y,Z,tangency_residual,sphere_residual")?;
    rows.into_iter()
        .map(|(line, f)| {
            Ok(CloudRow {
                t_us: parse_field(&f, 0, line)?,
                view: parse_field(&f, 1, line)?,
                alpha_deg: parse_field(&f, 2, line)?,
                x: parse_field(&f, 3, line)?,
                y: parse_field(&f, 4, line)?,
                z: parse_field(&f, 5, line)?,
                tangency_residual: parse_field(&f, 6, line)?,
                sphere_residual: parse_field(&f, 7, line)?,
            })
        })
        .collect()
}

/// One row of the simulator label sidecar (`cam,t_us,x,y,label`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub cam: usize,
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub label: String,
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<(), EventError> {
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    writeln!(w, "cam,t_us,x,y,label")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.cam, r.t_us, r.x, r.y, r.label)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>, EventError> {
    let rows = read_table(path, "cam,t_us,x,y,label")?;
    rows.into_iter()
        .map(|(line, f)| {
            Ok(LabelRow {
                cam: parse_field(&f, 0, line)?,
                t_us: parse_field(&f, 1, line)?,
                x: parse_field(&f, 2, line)?,
                y: parse_field(&f, 3, line)?,
                label: f
                    .get(4)
                    .ok_or_else(|| EventError::Parse {
                        line,
                        msg: "missing label".into(),
                    })?
                    .clone(),
            })
        })
        .collect()
}

fn read_table(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>, EventError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    let expected = header.split(',').count();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != header {
                return Err(EventError::Parse {
                    line: 1,
                    msg: format!("expected header '{header}', got '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != expected {
            return Err(EventError::Parse {
                line: line_no,
                msg: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        rows.push((line_no, fields));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(fields: &[String], idx: usize, line: usize) -> Result<T, EventError>
where
    T::Err: std::fmt::Display,
{
    fields[idx].parse::<T>().map_err(|e| EventError::Parse {
        line,
        msg: format!("field {idx}: {e}"),
    })
}
