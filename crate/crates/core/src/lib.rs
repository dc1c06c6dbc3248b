//! Measurement of shock-wave motion fields from asynchronous event-camera
//! streams.
//!
//! The pipeline runs from raw event streams to physical quantities:
//!
//! 1. [`event`] — event data model, file I/O lives in [`io`]; blast-centered
//!    polar encoding, angle partitioning and d-t histograms.
//! 2. [`calib`] — LED-marker detection and camera calibration (normalized
//!    DLT with pose decomposition).
//! 3. [`front`] — per-angle shock-front extraction: adaptive ROI banding
//!    and the slope-iterative search, at native microsecond resolution.
//! 4. [`geom`] — tangent-sphere geometry turning image-space fronts into
//!    physical radii, plus cross-view solves and 3D reconstruction;
//!    [`fit`] holds the radius-time polynomials and velocities.
//! 5. [`blast`] — shock relations: overpressure, velocity laws, TNT
//!    charge-equivalence inversion and radius uncertainty propagation.
//! 6. [`synth`] — a physics-driven synthetic event generator that serves
//!    as ground truth for the whole chain.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blast;
pub mod calib;
pub mod event;
pub mod fit;
pub mod front;
pub mod geom;
pub mod io;
pub mod synth;

pub use blast::{BlastConstants, ChargeEstimate, RadiusInterval, UncertaintyBudget};
pub use calib::{CameraModel, Correspondence, LedDetection, TriggerMatrices};
pub use event::{AngleSegment, BlastImagePoint, DtHistogram, Event, PolarEvent, StreamHeader};
pub use fit::RadiusTimeModel;
pub use front::{CandidateSet, FrontConfig, FrontExtraction, RoiBand, SeedPair};
pub use geom::{FrontSample, ReconstructedPoint, ViewGeometry};
pub use synth::{BlastScene, ClutterSpec, EventLabel, LedMarkerSpec, SimCamera};
