//! Event-stream data model: sensor events, blast-centered polar encoding,
//! angle partitioning and distance-over-time histograms.
//!
//! All values here are immutable after construction and safe to share across
//! workers. Operations are pure; the `*_par` variants produce bit-identical
//! output to their serial counterparts for any worker count.

use rayon::prelude::*;
use thiserror::Error;

/// Errors raised by the event data model and its file formats.
#[derive(Debug, Error)]
pub enum EventError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One sensor activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Pixel column.
    pub x: u16,
    /// Pixel row (grows downward).
    pub y: u16,
    /// Polarity, exactly -1 or +1.
    pub p: i8,
    /// Timestamp in microseconds.
    pub t: u64,
}

/// Stream-level metadata. For formats that do not declare sensor dimensions
/// the reader infers them from the pixel extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub t_min: u64,
    pub t_max: u64,
    pub count: u64,
}

impl StreamHeader {
    /// Header describing `events` exactly, with declared sensor dimensions.
    pub fn for_events(width: u32, height: u32, events: &[Event]) -> Self {
        let t_min = events.iter().map(|e| e.t).min().unwrap_or(0);
        let t_max = events.iter().map(|e| e.t).max().unwrap_or(0);
        StreamHeader {
            width,
            height,
            t_min,
            t_max,
            count: events.len() as u64,
        }
    }
}

/// An event re-encoded around the blast image point. The timestamp is the
/// source event's timestamp, never re-quantized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarEvent {
    /// Radial distance from the blast center, pixels.
    pub d: f64,
    /// Propagation angle in degrees, in `[0, 360)`. Measured in raw image
    /// coordinates (pixel y grows downward, no flip).
    pub alpha: f64,
    pub p: i8,
    /// Microseconds, identical to the originating event.
    pub t: u64,
}

/// Image coordinates of the blast center (sub-pixel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlastImagePoint {
    pub x: f64,
    pub y: f64,
}

impl BlastImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        BlastImagePoint { x, y }
    }
}

/// Events of one propagation-angle bin, time-sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSegment {
    /// Inclusive lower angle bound, degrees.
    pub alpha_lo: f64,
    /// Exclusive upper angle bound, degrees.
    pub alpha_hi: f64,
    /// Member events sorted by `t`, ties broken by `(d, original index)`.
    pub events: Vec<PolarEvent>,
}

impl AngleSegment {
    /// Center angle of the bin, degrees.
    pub fn alpha_center(&self) -> f64 {
        0.5 * (self.alpha_lo + self.alpha_hi)
    }
}

/// Two-dimensional distance-over-time histogram of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DtHistogram {
    /// Microseconds per time bin.
    pub t_bin: u64,
    /// Pixels per distance bin.
    pub d_bin: f64,
    /// Time origin (smallest event timestamp).
    pub t0: u64,
    /// Distance origin (smallest event distance).
    pub d0: f64,
    pub n_t: usize,
    pub n_d: usize,
    counts: Vec<u32>,
}

impl DtHistogram {
    /// Count in time bin `ti`, distance bin `di`.
    pub fn count(&self, ti: usize, di: usize) -> u32 {
        self.counts[ti * self.n_d + di]
    }

    /// Sum of all cells.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Largest cell count within distance column `di` (over all time bins).
    pub fn column_peak(&self, di: usize) -> u32 {
        (0..self.n_t).map(|ti| self.count(ti, di)).max().unwrap_or(0)
    }

    /// Lower distance edge of column `di`.
    pub fn d_edge(&self, di: usize) -> f64 {
        self.d0 + di as f64 * self.d_bin
    }
}

/// Re-encodes events into polar coordinates with the blast center as pole.
///
/// `d` is the Euclidean pixel distance to the blast point. `alpha` recovers
/// the full circle: `acos((x-x_b)/d)` when `y-y_b >= 0`, otherwise
/// `360 - acos((x-x_b)/d)`. Events exactly on the blast pixel get `alpha = 0`
/// by convention; they are irrelevant in practice because fronts live far
/// from the center. Timestamps and polarities pass through unchanged.
pub fn polar_encode(events: &[Event], blast: BlastImagePoint) -> Vec<PolarEvent> {
    events.iter().map(|e| encode_one(e, blast)).collect()
}

/// Data-parallel [`polar_encode`]; bit-identical output for any `workers`.
pub fn polar_encode_par(events: &[Event], blast: BlastImagePoint, workers: usize) -> Vec<PolarEvent> {
    if workers <= 1 {
        return polar_encode(events, blast);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(|| events.par_iter().map(|e| encode_one(e, blast)).collect())
}

fn encode_one(e: &Event, blast: BlastImagePoint) -> PolarEvent {
    let dx = f64::from(e.x) - blast.x;
    let dy = f64::from(e.y) - blast.y;
    let d = dx.hypot(dy);
    let alpha = if d == 0.0 {
        0.0
    } else {
        let raw = (dx / d).clamp(-1.0, 1.0).acos().to_degrees();
        let a = if dy >= 0.0 { raw } else { 360.0 - raw };
        if a >= 360.0 {
            0.0
        } else {
            a
        }
    };
    PolarEvent {
        d,
        alpha,
        p: e.p,
        t: e.t,
    }
}

fn segment_count(bin_width: f64) -> Result<usize, EventError> {
    if !(bin_width > 0.0) {
        return Err(EventError::Config(format!(
            "angle bin width must be positive, got {bin_width}"
        )));
    }
    let n = 360.0 / bin_width;
    if (n - n.round()).abs() > 1e-9 {
        return Err(EventError::Config(format!(
            "angle bin width {bin_width} does not divide 360 evenly"
        )));
    }
    Ok(n.round() as usize)
}

/// Partitions polar events into `360/bin_width` half-open angle bins
/// `[k*bin_width, (k+1)*bin_width)`. Every event lands in exactly one
/// segment; each segment comes out time-sorted.
pub fn partition_by_angle(events: &[PolarEvent], bin_width: f64) -> Result<Vec<AngleSegment>, EventError> {
    let n = segment_count(bin_width)?;
    let mut segments = empty_segments(n, bin_width);
    for e in events {
        segments[bin_index(e.alpha, bin_width, n)].events.push(*e);
    }
    for seg in &mut segments {
        sort_segment(&mut seg.events);
    }
    Ok(segments)
}

/// Data-parallel [`partition_by_angle`]; output is order-deterministic and
/// identical to the serial result for any worker count.
pub fn partition_by_angle_par(
    events: &[PolarEvent],
    bin_width: f64,
    workers: usize,
) -> Result<Vec<AngleSegment>, EventError> {
    if workers <= 1 {
        return partition_by_angle(events, bin_width);
    }
    let n = segment_count(bin_width)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    let chunk = events.len().div_ceil(workers).max(1);
    let partials: Vec<Vec<Vec<PolarEvent>>> = pool.install(|| {
        events
            .par_chunks(chunk)
            .map(|part| {
                let mut local: Vec<Vec<PolarEvent>> = vec![Vec::new(); n];
                for e in part {
                    local[bin_index(e.alpha, bin_width, n)].push(*e);
                }
                local
            })
            .collect()
    });
    let mut segments = empty_segments(n, bin_width);
    // Merging in chunk order reproduces the serial input order exactly.
    for local in partials {
        for (seg, mut events) in segments.iter_mut().zip(local) {
            seg.events.append(&mut events);
        }
    }
    for seg in &mut segments {
        sort_segment(&mut seg.events);
    }
    Ok(segments)
}

fn empty_segments(n: usize, bin_width: f64) -> Vec<AngleSegment> {
    (0..n)
        .map(|i| AngleSegment {
            alpha_lo: i as f64 * bin_width,
            alpha_hi: (i + 1) as f64 * bin_width,
            events: Vec::new(),
        })
        .collect()
}

fn bin_index(alpha: f64, bin_width: f64, n: usize) -> usize {
    ((alpha / bin_width) as usize).min(n - 1)
}

fn sort_segment(events: &mut [PolarEvent]) {
    // Stable sort: (t, d) ties keep input order.
    events.sort_by(|a, b| {
        a.t.cmp(&b.t)
            .then(a.d.partial_cmp(&b.d).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Bins one segment into a distance-over-time grid. The cell total equals the
/// segment event count.
pub fn dt_histogram(segment: &AngleSegment, t_bin: u64, d_bin: f64) -> Result<DtHistogram, EventError> {
    if t_bin == 0 {
        return Err(EventError::Config("t_bin must be positive".into()));
    }
    if !(d_bin > 0.0) {
        return Err(EventError::Config(format!(
            "d_bin must be positive, got {d_bin}"
        )));
    }
    if segment.events.is_empty() {
        return Ok(DtHistogram {
            t_bin,
            d_bin,
            t0: 0,
            d0: 0.0,
            n_t: 0,
            n_d: 0,
            counts: Vec::new(),
        });
    }
    let t0 = segment.events.iter().map(|e| e.t).min().unwrap();
    let t_max = segment.events.iter().map(|e| e.t).max().unwrap();
    let d0 = segment.events.iter().map(|e| e.d).fold(f64::INFINITY, f64::min);
    let d_max = segment.events.iter().map(|e| e.d).fold(0.0_f64, f64::max);
    let n_t = ((t_max - t0) / t_bin) as usize + 1;
    let n_d = (((d_max - d0) / d_bin) as usize).min(usize::MAX - 1) + 1;
    let mut counts = vec![0u32; n_t * n_d];
    for e in &segment.events {
        let ti = ((e.t - t0) / t_bin) as usize;
        let di = (((e.d - d0) / d_bin) as usize).min(n_d - 1);
        counts[ti * n_d + di] += 1;
    }
    Ok(DtHistogram {
        t_bin,
        d_bin,
        t0,
        d0,
        n_t,
        n_d,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ev(x: u16, y: u16, p: i8, t: u64) -> Event {
        Event { x, y, p, t }
    }

    #[test]
    fn polar_encode_axis_cases() {
        let blast = BlastImagePoint::new(100.0, 100.0);
        let right = polar_encode(&[ev(103, 100, 1, 7)], blast);
        assert_abs_diff_eq!(right[0].d, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(right[0].alpha, 0.0, epsilon = 1e-12);
        assert_eq!(right[0].t, 7);

        let left = polar_encode(&[ev(97, 100, -1, 9)], blast);
        assert_abs_diff_eq!(left[0].d, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(left[0].alpha, 180.0, epsilon = 1e-12);
    }

    #[test]
    fn polar_encode_345_triangle() {
        let blast = BlastImagePoint::new(100.0, 100.0);
        let p = polar_encode(&[ev(103, 104, 1, 0)], blast);
        assert_abs_diff_eq!(p[0].d, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0].alpha, 53.13010235415598, epsilon = 1e-9);
    }

    #[test]
    fn polar_encode_lower_half_plane_and_center() {
        let blast = BlastImagePoint::new(100.0, 100.0);
        // y above the center row (smaller y) maps to the (180, 360) range.
        let p = polar_encode(&[ev(103, 96, 1, 0)], blast);
        assert_abs_diff_eq!(p[0].alpha, 360.0 - 53.13010235415598, epsilon = 1e-9);

        let c = polar_encode(&[ev(100, 100, 1, 0)], blast);
        assert_eq!(c[0].d, 0.0);
        assert_eq!(c[0].alpha, 0.0);
    }

    #[test]
    fn polar_round_trip_reproduces_pixels() {
        let blast = BlastImagePoint::new(640.25, 360.75);
        let events: Vec<Event> = (0..2000)
            .map(|i| ev((i * 7919 % 1280) as u16, (i * million_mix() % 720) as u16, 1, i as u64))
            .collect();
        for (e, p) in events.iter().zip(polar_encode(&events, blast)) {
            let a = p.alpha.to_radians();
            let x = blast.x + p.d * a.cos();
            let y = blast.y + p.d * a.sin();
            assert_abs_diff_eq!(x, f64::from(e.x), epsilon = 1e-9);
            assert_abs_diff_eq!(y, f64::from(e.y), epsilon = 1e-9);
        }
    }

    fn million_mix() -> usize {
        104729
    }

    #[test]
    fn partition_basic_and_boundary() {
        let blast = BlastImagePoint::new(0.0, 0.0);
        let events = vec![ev(10, 0, 1, 0), ev(0, 10, 1, 1), ev(100, 0, -1, 2)];
        let mut polar = polar_encode(&events, blast);
        // Force an exact-boundary alpha.
        polar[2].alpha = 90.0;
        let segs = partition_by_angle(&polar, 90.0).unwrap();
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[0].events.len(), 1); // alpha 0
        assert_eq!(segs[1].events.len(), 2); // alpha 90 (two of them now)
        assert_eq!(segs[2].events.len(), 0);
        assert_eq!(segs[3].events.len(), 0);
        assert_eq!(segs[1].alpha_lo, 90.0);
    }

    #[test]
    fn partition_rejects_bad_bin_width() {
        assert!(partition_by_angle(&[], 0.0).is_err());
        assert!(partition_by_angle(&[], -5.0).is_err());
        assert!(partition_by_angle(&[], 7.0).is_err());
        assert!(partition_by_angle(&[], 0.5).is_ok());
    }

    #[test]
    fn partition_matches_bruteforce_binning() {
        // Independent oracle: per-segment counts from a naive re-binning pass.
        let mut events = Vec::new();
        let mut s = 12345u64;
        for i in 0..100_000u64 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let alpha = (s >> 11) as f64 / (1u64 << 53) as f64 * 360.0;
            events.push(PolarEvent {
                d: (i % 500) as f64,
                alpha,
                p: 1,
                t: i,
            });
        }
        let segs = partition_by_angle(&events, 5.0).unwrap();
        let mut oracle = vec![0usize; 72];
        for e in &events {
            let mut k = (e.alpha / 5.0).floor() as usize;
            if k >= 72 {
                k = 71;
            }
            oracle[k] += 1;
        }
        let got: Vec<usize> = segs.iter().map(|s| s.events.len()).collect();
        assert_eq!(got, oracle);
        assert_eq!(got.iter().sum::<usize>(), events.len());
        for seg in &segs {
            assert!(seg.events.windows(2).all(|w| w[0].t <= w[1].t));
            assert!(seg
                .events
                .iter()
                .all(|e| e.alpha >= seg.alpha_lo && e.alpha < seg.alpha_hi));
        }
    }

    #[test]
    fn partition_par_is_bit_identical() {
        let mut events = Vec::new();
        let mut s = 99u64;
        for i in 0..50_000u64 {
            s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            events.push(PolarEvent {
                d: (s % 1000) as f64 / 3.0,
                alpha: (s % 3600) as f64 / 10.0,
                p: if s % 2 == 0 { 1 } else { -1 },
                t: i / 3,
            });
        }
        let serial = partition_by_angle(&events, 5.0).unwrap();
        for workers in [1, 4, 8] {
            let par = partition_by_angle_par(&events, 5.0, workers).unwrap();
            assert_eq!(serial, par, "workers={workers}");
        }
        let enc_in: Vec<Event> = (0..50_000)
            .map(|i| ev((i % 1280) as u16, (i % 720) as u16, 1, i as u64))
            .collect();
        let blast = BlastImagePoint::new(640.0, 360.0);
        let serial_enc = polar_encode(&enc_in, blast);
        for workers in [4, 8] {
            assert_eq!(serial_enc, polar_encode_par(&enc_in, blast, workers));
        }
    }

    #[test]
    fn histogram_single_and_pair() {
        let seg = AngleSegment {
            alpha_lo: 0.0,
            alpha_hi: 5.0,
            events: vec![PolarEvent {
                d: 10.0,
                alpha: 2.0,
                p: 1,
                t: 100,
            }],
        };
        let h = dt_histogram(&seg, 10, 2.0).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.count(0, 0), 1);

        let seg2 = AngleSegment {
            alpha_lo: 0.0,
            alpha_hi: 5.0,
            events: vec![
                PolarEvent { d: 10.0, alpha: 2.0, p: 1, t: 100 },
                PolarEvent { d: 10.5, alpha: 2.0, p: -1, t: 104 },
            ],
        };
        let h2 = dt_histogram(&seg2, 10, 2.0).unwrap();
        assert_eq!(h2.count(0, 0), 2);
        assert_eq!(h2.total(), 2);
    }

    #[test]
    fn histogram_matches_naive_double_loop() {
        let mut events = Vec::new();
        let mut s = 7u64;
        for _ in 0..5000 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            events.push(PolarEvent {
                d: (s % 4000) as f64 / 10.0,
                alpha: 1.0,
                p: 1,
                t: (s >> 13) % 20_000,
            });
        }
        let mut seg = AngleSegment { alpha_lo: 0.0, alpha_hi: 5.0, events };
        sort_segment(&mut seg.events);
        let h = dt_histogram(&seg, 100, 5.0).unwrap();
        for ti in 0..h.n_t {
            for di in 0..h.n_d {
                let t_lo = h.t0 + ti as u64 * h.t_bin;
                let t_hi = t_lo + h.t_bin;
                let d_lo = h.d0 + di as f64 * h.d_bin;
                let d_hi = d_lo + h.d_bin;
                let naive = seg
                    .events
                    .iter()
                    .filter(|e| {
                        let last_d = di == h.n_d - 1;
                        e.t >= t_lo
                            && e.t < t_hi
                            && e.d >= d_lo
                            && (e.d < d_hi || (last_d && e.d <= d_hi))
                    })
                    .count() as u32;
                assert_eq!(h.count(ti, di), naive, "cell ({ti},{di})");
            }
        }
        assert_eq!(h.total(), seg.events.len() as u64);
    }

    #[test]
    fn timestamp_multiset_is_invariant() {
        let blast = BlastImagePoint::new(12.5, 9.5);
        let events: Vec<Event> = (0..1000)
            .map(|i| ev((i % 60) as u16, (i % 40) as u16, if i % 2 == 0 { 1 } else { -1 }, (i * 13 % 777) as u64))
            .collect();
        let mut before: Vec<u64> = events.iter().map(|e| e.t).collect();
        let polar = polar_encode(&events, blast);
        let mut after: Vec<u64> = polar.iter().map(|e| e.t).collect();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);

        let segs = partition_by_angle(&polar, 45.0).unwrap();
        let mut seg_ts: Vec<u64> = segs.iter().flat_map(|s| s.events.iter().map(|e| e.t)).collect();
        seg_ts.sort_unstable();
        assert_eq!(before, seg_ts);
    }
}
