//! Robust fuzzy c-means clustering built on M-estimation.
//!
//! The engine runs one alternating IRLS loop that covers the whole model
//! family: plain fuzzy c-means, robust reweighted variants with seven
//! M-estimator weight functions, kernel-induced distances (linear,
//! polynomial, RBF, sigmoid), and two spatial membership penalties for
//! image segmentation. A small experiment harness (preprocessing, noise
//! injection, 3x3 filters, label alignment, gamma auto-tuning) and a CLI
//! sit on top.
//!
//! Entry points:
//! - [`engine::run`] — fit one model on a [`model::Dataset`].
//! - [`tuning::tune_gamma`] — pick the penalty factor by cross-validation.
//! - [`eval`] — preprocessing, noise models, filters, accuracy scoring.
//! - [`io`] — CSV / PGM loading, the synthetic test image, result files.
//!
//! ```
//! use mfcm::{engine, eval, io, model::ModelConfig};
//!
//! let image = io::synth_two_class_image();
//! let truth = image.labels().unwrap().to_vec();
//! let result = engine::run(&image, &ModelConfig::new(2), engine::Init::Random).unwrap();
//! let (_, accuracy) = eval::assign_and_align(&result.final_state.memberships, &truth).unwrap();
//! assert_eq!(accuracy, 100.0);
//! ```

pub mod engine;
pub mod eval;
pub mod io;
pub mod kernel;
pub mod model;
pub mod params;
pub mod spatial;
pub mod tuning;
pub mod weights;

pub use engine::{run, Init, RunResult};
pub use model::{
    Dataset, DistanceKind, KernelKind, MembershipMatrix, ModelConfig, PenaltyVariant, Topology,
    WeightKind,
};
