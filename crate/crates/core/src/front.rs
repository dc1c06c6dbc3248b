//! Per-angle shock-front event extraction: reference-point seeding from
//! clutter-suppressed marginals, adaptive ROI banding, density seeding and
//! the slope-iterative search, preserving original microsecond timestamps.
//!
//! Geometry in (t, d) space mixes microseconds and pixels; every Euclidean
//! distance, cosine or slope here first scales time by `kappa` (px per us)
//! so the operations are dimensionally coherent.

use thiserror::Error;

use crate::event::{dt_histogram, AngleSegment, PolarEvent};

#[derive(Debug, Clone, Error)]
pub enum FrontError {
    #[error("seeding error: {0}")]
    Seeding(String),
    #[error("undefined slope: events share timestamp {0}")]
    UndefinedSlope(u64),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Adaptive ROI parameters for one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBand {
    /// Early reference point (us, px).
    pub t1: f64,
    pub d1: f64,
    /// Late reference point (us, px).
    pub t2: f64,
    pub d2: f64,
    /// Band width below the reference line, px.
    pub q_prime: f64,
    /// Iterative correction offset, px.
    pub epsilon: f64,
    /// Tolerance threshold for the offset update, px.
    pub tolerance: f64,
    /// Time-to-pixel scale applied before geometric operations, px per us.
    pub kappa: f64,
}

impl RoiBand {
    /// Reference line evaluated at time `t` (px).
    pub fn line_at(&self, t: f64) -> f64 {
        self.d1 + (t - self.t1) * (self.d2 - self.d1) / (self.t2 - self.t1)
    }

    /// Slope of the reference line in kappa-scaled space (px per px).
    pub fn scaled_slope(&self) -> f64 {
        (self.d2 - self.d1) / (self.kappa * (self.t2 - self.t1))
    }

    /// Signed perpendicular distance from an event to the reference line in
    /// kappa-scaled space, px: positive below the line (smaller `d`),
    /// negative above. The sign makes the offset update a re-centering
    /// rule: events crowding the band's upper bound drive the offset up.
    pub fn distance_to_line(&self, e: &PolarEvent) -> f64 {
        let (x1, y1) = (self.kappa * self.t1, self.d1);
        let (x2, y2) = (self.kappa * self.t2, self.d2);
        let (ex, ey) = (self.kappa * e.t as f64, e.d);
        let (dx, dy) = (x2 - x1, y2 - y1);
        let len = dx.hypot(dy);
        ((ex - x1) * dy - (ey - y1) * dx) / len
    }

    fn contains(&self, e: &PolarEvent) -> bool {
        let t = e.t as f64;
        if t < self.t1 || t > self.t2 || e.d < self.d1 || e.d > self.d2 {
            return false;
        }
        let line = self.line_at(t);
        e.d >= line - self.q_prime + self.epsilon && e.d <= line + self.epsilon
    }
}

/// Candidate events inside the band, time-sorted.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub events: Vec<PolarEvent>,
    pub band: RoiBand,
}

/// The two density-selected seed events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedPair {
    /// Highest-density event.
    pub e_m: PolarEvent,
    /// Highest-density event at least the separation away in time.
    pub e_n: PolarEvent,
    pub sigma_m: u32,
    pub sigma_n: u32,
    /// Earlier seed timestamp.
    pub t_lo: u64,
    /// Later seed timestamp.
    pub t_hi: u64,
}

impl SeedPair {
    /// Seed with the smaller timestamp (the `e'` of the search).
    pub fn early(&self) -> PolarEvent {
        if self.e_m.t <= self.e_n.t {
            self.e_m
        } else {
            self.e_n
        }
    }

    /// Seed with the larger timestamp (the `e''` of the search).
    pub fn late(&self) -> PolarEvent {
        if self.e_m.t <= self.e_n.t {
            self.e_n
        } else {
            self.e_m
        }
    }
}

/// Which traversal a trace entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSet {
    Early,
    Middle,
    Late,
}

/// One reference/benchmark update during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceUpdate {
    pub set: SearchSet,
    pub reference: PolarEvent,
    pub k_tau: f64,
    pub benchmark: PolarEvent,
}

/// Slope bookkeeping for one accepted event: its slope feature and the
/// reference slope it was tested against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeRecord {
    pub k_s: f64,
    pub k_tau: f64,
}

/// Result of the slope-iterative search for one angle.
#[derive(Debug, Clone, Default)]
pub struct FrontExtraction {
    /// Accepted events, time-sorted, original timestamps.
    pub s_prime: Vec<PolarEvent>,
    /// Per-accepted-event slope records, aligned with `s_prime`.
    pub slopes: Vec<SlopeRecord>,
    /// Reference/benchmark updates, per traversal, in traversal order.
    pub trace: Vec<TraceUpdate>,
}

/// Extraction parameters. Defaults: kappa 0.01 px/us, slope tolerance 0.15,
/// benchmark spacing 20 px, density window 3 px, seed separation 10% of the
/// ROI time span, offset tolerance 1.5 px, band growth from 2 px capped at
/// 40 px with a 2% plateau, monitoring windows at 30% and 80% of the
/// coherent radial extent, two laps of the circular angle chain.
#[derive(Debug, Clone)]
pub struct FrontConfig {
    pub kappa: f64,
    pub rho: f64,
    pub dist_threshold: f64,
    pub density_q: f64,
    pub min_separation_frac: f64,
    pub tolerance: f64,
    pub q_start: f64,
    pub q_cap: f64,
    pub plateau_frac: f64,
    /// Radial placement of the two monitoring windows, as fractions of the
    /// coherent radial extent.
    pub window_fracs: (f64, f64),
    /// Window half-width as a fraction of the radial extent.
    pub window_half_width_frac: f64,
    /// Band around the median distance when picking the anchor event, px.
    pub median_band_px: f64,
    /// Minimum events a monitoring window must hold after suppression.
    pub min_window_events: usize,
    /// Marginal-histogram bins for clutter suppression.
    pub t_marginal_bin: u64,
    pub d_marginal_bin: f64,
    /// A time bin counts as a firelight burst above `spike_factor x median`.
    pub spike_factor: f64,
    /// A low-distance bin counts as product cloud above
    /// `product_factor x median` of the positive bins.
    pub product_factor: f64,
    /// A distance column is part of the coherent front support when its
    /// peak time-bin count reaches `max(coherence_abs,
    /// coherence_rel x best column peak)`.
    pub coherence_abs: u32,
    pub coherence_rel: f64,
    /// Laps of the circular angle chain. The offset starts at zero, so the
    /// band converges onto the front only after some angles; a second lap
    /// re-visits the early angles with the converged offset.
    pub laps: usize,
    /// Candidates below this density never enter the search. Front events
    /// sit in dense along-curve neighborhoods while stray noise is
    /// isolated; feeding isolated events to the slope chain lets one of
    /// them be crowned as a benchmark and pivot the reference line off the
    /// front.
    pub density_floor: u32,
}

impl Default for FrontConfig {
    fn default() -> Self {
        FrontConfig {
            kappa: 0.01,
            rho: 0.15,
            dist_threshold: 20.0,
            density_q: 3.0,
            min_separation_frac: 0.1,
            tolerance: 1.5,
            q_start: 2.0,
            q_cap: 40.0,
            plateau_frac: 0.02,
            window_fracs: (0.3, 0.8),
            window_half_width_frac: 0.05,
            median_band_px: 4.0,
            min_window_events: 8,
            t_marginal_bin: 100,
            d_marginal_bin: 4.0,
            spike_factor: 6.0,
            product_factor: 8.0,
            coherence_abs: 4,
            coherence_rel: 0.15,
            laps: 2,
            density_floor: 3,
        }
    }
}

fn median_u64(sorted: &[u64]) -> u64 {
    sorted[sorted.len() / 2]
}

fn median_f64(sorted: &[f64]) -> f64 {
    sorted[sorted.len() / 2]
}

/// Firelight burst windows: time bins whose count spikes far above the
/// segment median. Returns half-open `[lo, hi)` microsecond ranges.
type Anchors = ((f64, f64), (f64, f64));

fn firelight_bursts(segment: &AngleSegment, config: &FrontConfig) -> Vec<(u64, u64)> {
    if segment.events.len() < 4 {
        return Vec::new();
    }
    let t0 = segment.events.first().map(|e| e.t).unwrap_or(0);
    let t1 = segment.events.last().map(|e| e.t).unwrap_or(0);
    let bins = ((t1 - t0) / config.t_marginal_bin) as usize + 1;
    let mut counts = vec![0u32; bins];
    for e in &segment.events {
        counts[((e.t - t0) / config.t_marginal_bin) as usize] += 1;
    }
    let mut sorted: Vec<u64> = counts.iter().map(|&c| u64::from(c)).collect();
    sorted.sort_unstable();
    let threshold = (config.spike_factor * median_u64(&sorted).max(1) as f64).ceil() as u64;
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        if u64::from(c) > threshold {
            let lo = t0 + i as u64 * config.t_marginal_bin;
            let hi = lo + config.t_marginal_bin;
            match out.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
    }
    out
}

/// Product-cloud radius: the upper edge of the initial contiguous run of
/// over-dense low-distance bins.
fn product_radius(events: &[PolarEvent], config: &FrontConfig) -> f64 {
    if events.len() < 4 {
        return 0.0;
    }
    let d_max = events.iter().map(|e| e.d).fold(0.0f64, f64::max);
    let bins = (d_max / config.d_marginal_bin) as usize + 1;
    let mut counts = vec![0u32; bins];
    for e in events {
        counts[(e.d / config.d_marginal_bin) as usize] += 1;
    }
    let mut positive: Vec<u64> = counts.iter().filter(|&&c| c > 0).map(|&c| u64::from(c)).collect();
    if positive.is_empty() {
        return 0.0;
    }
    positive.sort_unstable();
    let threshold = config.product_factor * median_u64(&positive) as f64;
    let mut radius = 0.0;
    for (i, &c) in counts.iter().enumerate().take(bins.clamp(1, 3)) {
        if f64::from(c) > threshold {
            radius = (i + 1) as f64 * config.d_marginal_bin;
        } else if i as f64 * config.d_marginal_bin >= radius {
            break;
        }
    }
    if radius > 0.0 {
        // Extend through the contiguous dense run.
        let mut i = (radius / config.d_marginal_bin) as usize;
        while i < bins && f64::from(counts[i]) > threshold {
            radius = (i + 1) as f64 * config.d_marginal_bin;
            i += 1;
        }
    }
    radius
}

/// Radial extent of the temporally coherent support: distance columns whose
/// peak time-bin count clears the coherence threshold. Uniform noise spreads
/// over all time bins and stays below it; the front concentrates.
fn coherent_extent(events: &[PolarEvent], config: &FrontConfig) -> Option<(f64, f64)> {
    if events.is_empty() {
        return None;
    }
    let seg = AngleSegment {
        alpha_lo: 0.0,
        alpha_hi: 360.0,
        events: events.to_vec(),
    };
    let hist = dt_histogram(&seg, config.t_marginal_bin, config.d_marginal_bin).ok()?;
    if hist.n_d == 0 {
        return None;
    }
    let peaks: Vec<u32> = (0..hist.n_d).map(|di| hist.column_peak(di)).collect();
    let best = *peaks.iter().max().unwrap();
    let threshold = (config.coherence_abs).max((config.coherence_rel * best as f64).ceil() as u32);
    let qualifying: Vec<usize> = peaks
        .iter()
        .enumerate()
        .filter_map(|(di, &p)| (p >= threshold).then_some(di))
        .collect();
    if qualifying.is_empty() {
        return None;
    }
    // The front support is contiguous; an isolated qualifying column is a
    // coincidence (a few noise events sharing one cell). Keep the longest
    // run, tolerating gaps of up to two columns.
    let mut best_run = (qualifying[0], qualifying[0]);
    let mut run_start = qualifying[0];
    let mut prev = qualifying[0];
    for &di in &qualifying[1..] {
        if di - prev > 3 {
            if prev - run_start > best_run.1 - best_run.0 {
                best_run = (run_start, prev);
            }
            run_start = di;
        }
        prev = di;
    }
    if prev - run_start > best_run.1 - best_run.0 {
        best_run = (run_start, prev);
    }
    Some((
        hist.d_edge(best_run.0),
        hist.d_edge(best_run.1) + config.d_marginal_bin,
    ))
}

/// Picks the two (t, d) anchor points of the reference line from two
/// annular monitoring windows.
///
/// Clutter is suppressed first (firelight time bursts and the product-cloud
/// radius, both estimated from marginal histograms); the windows sit at the
/// configured fractions of the temporally coherent radial extent; within a
/// window the anchor is the event with median time among those within the
/// median-distance band.
pub fn select_reference_points(
    segment: &AngleSegment,
    config: &FrontConfig,
) -> Result<Anchors, FrontError> {
    if segment.events.is_empty() {
        return Err(FrontError::Seeding("empty segment".into()));
    }
    let bursts = firelight_bursts(segment, config);
    let after_burst: Vec<PolarEvent> = segment
        .events
        .iter()
        .filter(|e| !bursts.iter().any(|&(lo, hi)| e.t >= lo && e.t < hi))
        .copied()
        .collect();
    let product_r = product_radius(&after_burst, config);
    let cleaned: Vec<PolarEvent> = after_burst.into_iter().filter(|e| e.d >= product_r).collect();
    let (ext_lo, ext_hi) = coherent_extent(&cleaned, config).ok_or_else(|| {
        FrontError::Seeding("no coherent radial support after clutter suppression".into())
    })?;
    let span = ext_hi - ext_lo;
    if span <= 0.0 {
        return Err(FrontError::Seeding("degenerate radial extent".into()));
    }
    let half = (config.window_half_width_frac * span).max(1.5 * config.d_marginal_bin);

    let mut anchors = Vec::with_capacity(2);
    for frac in [config.window_fracs.0, config.window_fracs.1] {
        let center = ext_lo + frac * span;
        let (w_lo, w_hi) = (center - half, center + half);
        let mut members: Vec<PolarEvent> = cleaned
            .iter()
            .filter(|e| e.d >= w_lo && e.d <= w_hi)
            .copied()
            .collect();
        if members.len() < config.min_window_events {
            return Err(FrontError::Seeding(format!(
                "monitoring window [{w_lo:.1}, {w_hi:.1}] px holds {} events (need {})",
                members.len(),
                config.min_window_events
            )));
        }
        let mut ds: Vec<f64> = members.iter().map(|e| e.d).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med_d = median_f64(&ds);
        members.retain(|e| (e.d - med_d).abs() <= config.median_band_px);
        members.sort_by(|a, b| {
            a.t.cmp(&b.t)
                .then(a.d.partial_cmp(&b.d).unwrap_or(std::cmp::Ordering::Equal))
        });
        let anchor = members[members.len() / 2];
        anchors.push((anchor.t as f64, anchor.d));
    }
    let (a1, a2) = (anchors[0], anchors[1]);
    if a1.0 >= a2.0 {
        return Err(FrontError::Seeding(format!(
            "anchors not time-ordered: t1={} t2={}",
            a1.0, a2.0
        )));
    }
    if a1.1 > a2.1 {
        return Err(FrontError::Seeding(format!(
            "anchors not radially ordered: d1={} d2={}",
            a1.1, a2.1
        )));
    }
    Ok((a1, a2))
}

/// Grows the band width from `q_start` upward until one more step adds
/// fewer than `plateau_frac` of the current membership, or the hard cap is
/// reached. A membership-holding band then gets the tolerance margin
/// `T / cos(atan(slope))` on top of the plateau width: the offset update
/// needs exactly that much slack to re-center the band without dropping
/// its deepest members.
pub fn expand_search_radius(
    segment: &AngleSegment,
    anchors: Anchors,
    epsilon: f64,
    config: &FrontConfig,
) -> f64 {
    let ((t1, d1), (t2, d2)) = anchors;
    // Depth of each event below line + epsilon; membership at width w is
    // depth in [0, w].
    let mut depths: Vec<f64> = segment
        .events
        .iter()
        .filter(|e| {
            let t = e.t as f64;
            t >= t1 && t <= t2 && e.d >= d1 && e.d <= d2
        })
        .filter_map(|e| {
            let t = e.t as f64;
            let line = d1 + (t - t1) * (d2 - d1) / (t2 - t1);
            let depth = line + epsilon - e.d;
            (depth >= 0.0).then_some(depth)
        })
        .collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count_at = |w: f64| depths.partition_point(|&depth| depth <= w);

    let slope = (d2 - d1) / (config.kappa * (t2 - t1));
    let margin = config.tolerance * (1.0 + slope * slope).sqrt();
    // The reference line is anchored on front events, so the band must at
    // least reach back down to the line (depth = epsilon) before
    // membership statistics mean anything.
    let min_width = (epsilon.max(0.0) + config.q_start).min(config.q_cap);
    let mut width = config.q_start;
    while width < config.q_cap {
        let cur = count_at(width);
        let next = count_at(width + 1.0);
        let gained = next - cur;
        if width >= min_width && (gained as f64) < config.plateau_frac * cur.max(1) as f64 {
            if cur == 0 {
                return width;
            }
            return (width + margin).min(config.q_cap);
        }
        width += 1.0;
    }
    config.q_cap
}

/// Selects exactly the events satisfying the three band inequalities:
/// `t1 <= t <= t2`, `d1 <= d <= d2` and
/// `line(t) - q' + eps <= d <= line(t) + eps`.
pub fn extract_roi(segment: &AngleSegment, band: &RoiBand) -> CandidateSet {
    CandidateSet {
        events: filter_roi_events(&segment.events, band),
        band: *band,
    }
}

/// Band filter over a raw event slice (order-preserving).
pub fn filter_roi_events(events: &[PolarEvent], band: &RoiBand) -> Vec<PolarEvent> {
    events.iter().filter(|e| band.contains(e)).copied().collect()
}

/// Data-parallel [`filter_roi_events`]; bit-identical for any worker count.
pub fn filter_roi_events_par(events: &[PolarEvent], band: &RoiBand, workers: usize) -> Vec<PolarEvent> {
    if workers <= 1 {
        return filter_roi_events(events, band);
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    let chunk = events.len().div_ceil(workers).max(1);
    pool.install(|| {
        let parts: Vec<Vec<PolarEvent>> = events
            .par_chunks(chunk)
            .map(|part| part.iter().filter(|e| band.contains(e)).copied().collect())
            .collect();
        let mut out = Vec::with_capacity(parts.iter().map(Vec::len).sum());
        for mut p in parts {
            out.append(&mut p);
        }
        out
    })
}

/// Offset for the next angle. When the extraction crowds the band's upper
/// bound (shallowest accepted depth within `tolerance` of the line) and the
/// band is wide enough to re-center with margin, the offset moves so the
/// shallowest event sits `tolerance` below the upper bound; otherwise the
/// previous offset carries over.
///
/// Depths are the signed perpendicular distances of [`RoiBand::distance_to_line`].
pub fn update_epsilon(s_prime: &[PolarEvent], band: &RoiBand) -> f64 {
    if s_prime.is_empty() {
        return band.epsilon;
    }
    let mut min_d = f64::INFINITY;
    let mut max_d = f64::NEG_INFINITY;
    for e in s_prime {
        let dist = band.distance_to_line(e);
        min_d = min_d.min(dist);
        max_d = max_d.max(dist);
    }
    let cos = 1.0 / (1.0 + band.scaled_slope().powi(2)).sqrt();
    if min_d <= band.tolerance && band.tolerance <= band.q_prime * cos - max_d {
        // The anchors sit on the front, so a band that no longer straddles
        // the reference line has lost it; cap the offset at the band width.
        ((band.tolerance - min_d) / cos).min(band.q_prime)
    } else {
        band.epsilon
    }
}

/// Event density: number of candidates inside the square window of
/// half-size `q` (px, kappa-scaled time) centered on `e`, itself included.
///
/// `candidates` must be time-sorted.
pub fn event_density(candidates: &[PolarEvent], e: &PolarEvent, q: f64, kappa: f64) -> u32 {
    let t_reach = q / kappa;
    let t_lo = e.t as f64 - t_reach;
    let t_hi = e.t as f64 + t_reach;
    let start = candidates.partition_point(|c| (c.t as f64) < t_lo);
    let mut count = 0u32;
    for c in &candidates[start..] {
        if c.t as f64 > t_hi {
            break;
        }
        if (c.d - e.d).abs() <= q {
            count += 1;
        }
    }
    count
}

/// Drops candidates whose density is below `floor` (order-preserving).
pub fn density_filter(events: &[PolarEvent], q: f64, kappa: f64, floor: u32) -> Vec<PolarEvent> {
    if floor <= 1 {
        return events.to_vec();
    }
    events
        .iter()
        .filter(|e| event_density(events, e, q, kappa) >= floor)
        .copied()
        .collect()
}

fn densities(candidates: &[PolarEvent], q: f64, kappa: f64) -> Vec<u32> {
    candidates
        .iter()
        .map(|e| event_density(candidates, e, q, kappa))
        .collect()
}

/// Picks the two highest-density events separated by at least
/// `min_separation` microseconds. Ties break to the earlier timestamp, then
/// the smaller distance.
pub fn seed_pair(
    candidates: &CandidateSet,
    q: f64,
    min_separation: u64,
    kappa: f64,
) -> Result<SeedPair, FrontError> {
    let events = &candidates.events;
    if events.len() < 2 {
        return Err(FrontError::Seeding(format!(
            "need at least 2 candidates, got {}",
            events.len()
        )));
    }
    let sigma = densities(events, q, kappa);
    let better = |i: usize, j: usize| -> bool {
        // Is i a better pick than j?
        sigma[i] > sigma[j]
            || (sigma[i] == sigma[j]
                && (events[i].t < events[j].t
                    || (events[i].t == events[j].t && events[i].d < events[j].d)))
    };
    let mut m = 0;
    for i in 1..events.len() {
        if better(i, m) {
            m = i;
        }
    }
    let mut n: Option<usize> = None;
    for i in 0..events.len() {
        if events[i].t.abs_diff(events[m].t) < min_separation {
            continue;
        }
        if n.is_none_or(|cur| better(i, cur)) {
            n = Some(i);
        }
    }
    let n = n.ok_or_else(|| {
        FrontError::Seeding(format!(
            "no candidate at least {min_separation} us away from the densest event"
        ))
    })?;
    let (e_m, e_n) = (events[m], events[n]);
    Ok(SeedPair {
        e_m,
        e_n,
        sigma_m: sigma[m],
        sigma_n: sigma[n],
        t_lo: e_m.t.min(e_n.t),
        t_hi: e_m.t.max(e_n.t),
    })
}

/// Splits candidates at the seed timestamps: strictly before `t_lo`,
/// the closed middle `[t_lo, t_hi]`, and strictly after `t_hi`. Boundary
/// events land in the middle set only, so the three sets partition the
/// input.
pub fn partition_sets(
    candidates: &CandidateSet,
    t_lo: u64,
    t_hi: u64,
) -> (Vec<PolarEvent>, Vec<PolarEvent>, Vec<PolarEvent>) {
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    let mut s3 = Vec::new();
    for e in &candidates.events {
        if e.t < t_lo {
            s1.push(*e);
        } else if e.t <= t_hi {
            s2.push(*e);
        } else {
            s3.push(*e);
        }
    }
    (s1, s2, s3)
}

/// Slope feature of `e` against a reference event, px per kappa-scaled
/// time unit.
pub fn slope(e: &PolarEvent, reference: &PolarEvent, kappa: f64) -> Result<f64, FrontError> {
    if e.t == reference.t {
        return Err(FrontError::UndefinedSlope(e.t));
    }
    Ok((e.d - reference.d) / (kappa * (e.t as f64 - reference.t as f64)))
}

fn scaled_distance(a: &PolarEvent, b: &PolarEvent, kappa: f64) -> f64 {
    (kappa * (a.t as f64 - b.t as f64)).hypot(a.d - b.d)
}

/// The slope-iterative search over the three candidate sets.
///
/// Middle events are tested against the seed slope with the farther seed as
/// reference. The early set walks time-descending from the late seed, the
/// late set time-ascending from the early seed; both update the reference
/// slope whenever the kappa-scaled distance to the current benchmark event
/// exceeds `dist_threshold`. Output is time-sorted with original
/// timestamps; the trace records the initial state and every update.
pub fn extract_front(
    candidates: &CandidateSet,
    seeds: &SeedPair,
    rho: f64,
    dist_threshold: f64,
    kappa: f64,
) -> FrontExtraction {
    let mut out = FrontExtraction::default();
    if candidates.events.is_empty() {
        return out;
    }
    let early_seed = seeds.early();
    let late_seed = seeds.late();
    let k0 = match slope(&late_seed, &early_seed, kappa) {
        Ok(k) => k,
        Err(_) => return out,
    };
    let (s1, s2, s3) = partition_sets(candidates, seeds.t_lo, seeds.t_hi);

    let mut accepted: Vec<(PolarEvent, SlopeRecord)> = Vec::new();

    // Middle set: fixed seed slope, farther seed as reference.
    out.trace.push(TraceUpdate {
        set: SearchSet::Middle,
        reference: late_seed,
        k_tau: k0,
        benchmark: early_seed,
    });
    for e in &s2 {
        let d_early = scaled_distance(e, &early_seed, kappa);
        let d_late = scaled_distance(e, &late_seed, kappa);
        let reference = if d_early >= d_late { early_seed } else { late_seed };
        let Ok(k_s) = slope(e, &reference, kappa) else {
            continue;
        };
        if (k_s - k0).abs() <= rho {
            accepted.push((*e, SlopeRecord { k_s, k_tau: k0 }));
        }
    }

    // Early set: descending time from the late seed; benchmark starts at
    // the early seed.
    let run = |set: SearchSet,
                   events: Vec<PolarEvent>,
                   init_ref: PolarEvent,
                   init_bench: PolarEvent,
                   accepted: &mut Vec<(PolarEvent, SlopeRecord)>,
                   trace: &mut Vec<TraceUpdate>| {
        let mut reference = init_ref;
        let mut benchmark = init_bench;
        let mut k_tau = k0;
        trace.push(TraceUpdate {
            set,
            reference,
            k_tau,
            benchmark,
        });
        // Events of one timestamp are simultaneous; the traversal order
        // within a tick is ours to fix. Visiting them by slope agreement
        // keeps stray in-band clutter from being crowned as the next
        // benchmark and pivoting the reference line off the front.
        let mut idx = 0;
        let mut tick: Vec<(f64, PolarEvent)> = Vec::new();
        while idx < events.len() {
            let t = events[idx].t;
            tick.clear();
            while idx < events.len() && events[idx].t == t {
                let e = events[idx];
                idx += 1;
                if let Ok(k_s) = slope(&e, &reference, kappa) {
                    tick.push(((k_s - k_tau).abs(), e));
                }
            }
            tick.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            for &(_, e) in tick.iter() {
                let Ok(k_s) = slope(&e, &reference, kappa) else {
                    continue;
                };
                if (k_s - k_tau).abs() > rho {
                    continue;
                }
                let record = SlopeRecord { k_s, k_tau };
                if scaled_distance(&e, &benchmark, kappa) > dist_threshold {
                    if let Ok(k_new) = slope(&e, &benchmark, kappa) {
                        k_tau = k_new;
                        reference = benchmark;
                        benchmark = e;
                        trace.push(TraceUpdate {
                            set,
                            reference,
                            k_tau,
                            benchmark,
                        });
                    }
                }
                accepted.push((e, record));
            }
        }
    };

    let mut s1_desc = s1;
    s1_desc.reverse();
    run(
        SearchSet::Early,
        s1_desc,
        late_seed,
        early_seed,
        &mut accepted,
        &mut out.trace,
    );
    run(
        SearchSet::Late,
        s3,
        early_seed,
        late_seed,
        &mut accepted,
        &mut out.trace,
    );

    accepted.sort_by(|a, b| {
        a.0.t
            .cmp(&b.0.t)
            .then(a.0.d.partial_cmp(&b.0.d).unwrap_or(std::cmp::Ordering::Equal))
    });
    out.s_prime = accepted.iter().map(|(e, _)| *e).collect();
    out.slopes = accepted.iter().map(|(_, s)| *s).collect();
    out
}

/// Per-angle outcome of the full extraction chain.
#[derive(Debug, Clone)]
pub struct AngleOutcome {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub result: Result<AngleExtraction, FrontError>,
}

/// Band and search result for one measurable angle.
#[derive(Debug, Clone)]
pub struct AngleExtraction {
    pub band: RoiBand,
    pub seeds: SeedPair,
    pub extraction: FrontExtraction,
}

/// Runs the whole per-angle chain over all segments in ascending angle
/// order, carrying the adaptive offset forward. The propagation angle is
/// circular, so the chain wraps around and the reported extraction per
/// angle comes from the final lap. Angles that cannot be seeded are
/// reported, not fatal; they leave the offset untouched.
pub fn extract_all(segments: &[AngleSegment], config: &FrontConfig) -> Vec<AngleOutcome> {
    let mut epsilon = 0.0f64;
    let mut out = Vec::new();
    for _ in 0..config.laps.max(1) {
        let mut lap = Vec::with_capacity(segments.len());
        for segment in segments {
            let result = extract_angle(segment, epsilon, config);
            if let Ok(ex) = &result {
                epsilon = update_epsilon(&ex.extraction.s_prime, &ex.band);
            }
            lap.push(AngleOutcome {
                alpha_lo: segment.alpha_lo,
                alpha_hi: segment.alpha_hi,
                result,
            });
        }
        out = lap;
    }
    out
}

/// One angle of the chain with an explicit starting offset.
pub fn extract_angle(
    segment: &AngleSegment,
    epsilon: f64,
    config: &FrontConfig,
) -> Result<AngleExtraction, FrontError> {
    let anchors = select_reference_points(segment, config)?;
    let q_prime = expand_search_radius(segment, anchors, epsilon, config);
    let band = RoiBand {
        t1: anchors.0 .0,
        d1: anchors.0 .1,
        t2: anchors.1 .0,
        d2: anchors.1 .1,
        q_prime,
        epsilon,
        tolerance: config.tolerance,
        kappa: config.kappa,
    };
    let roi = extract_roi(segment, &band);
    // Isolated in-band clutter would otherwise compete with the front for
    // benchmark updates inside the search.
    let candidates = CandidateSet {
        events: density_filter(&roi.events, config.density_q, config.kappa, config.density_floor),
        band,
    };
    if candidates.events.len() < 2 {
        return Err(FrontError::Seeding(format!(
            "only {} dense events inside the band",
            candidates.events.len()
        )));
    }
    let span = (band.t2 - band.t1).max(1.0);
    let min_separation = (config.min_separation_frac * span).max(1.0) as u64;
    let seeds = seed_pair(&candidates, config.density_q, min_separation, config.kappa)?;
    let extraction = extract_front(&candidates, &seeds, config.rho, config.dist_threshold, config.kappa);
    Ok(AngleExtraction {
        band,
        seeds,
        extraction,
    })
}
