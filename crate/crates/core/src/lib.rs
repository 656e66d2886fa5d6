//! Turn multi-observer eye-gaze recordings into point labels for object
//! detection, and measure how good those labels are.
//!
//! The crate is organized around the data flow of a labeling experiment:
//!
//! * [`gaze`] parses gaze and display logs and projects screen samples back
//!   into image coordinates, undoing the rotation/flip the image was shown with.
//! * [`consensus`] pools the gaze of a group of observers into a density map,
//!   keeps only regions the group agrees on, and emits their centroids.
//! * [`heuristic`] is the color baseline: brown-pigment blobs become labels.
//! * [`detect`] is a sliding-window localization pipeline over a pluggable
//!   patch classifier, plus a two-round trainer with hard-negative mining.
//! * [`eval`] matches predicted points to ground truth and computes
//!   precision/recall/F1, PR curves and group-size sweeps.
//! * [`synth`] generates deterministic synthetic slides and observer gaze.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`exec::Execution`].

pub mod components;
pub mod consensus;
pub mod detect;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gaze;
pub mod heuristic;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
pub use gaze::{DisplayRecord, Flip, GazePoint, GazeSequence, ImagePoint, ImageSize, Rotation};
