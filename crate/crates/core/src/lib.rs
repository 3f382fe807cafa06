//! Automatic segmentation and labeling of surface-EMG recordings.
//!
//! A depth camera tracks the arm while EMG is recorded. The elbow angle trace
//! is smoothed with singular spectrum analysis, scanned against a single
//! repetition of the motion with a sliding dynamic-time-warping window, and
//! the repetitions it finds are cut out of the synchronized EMG channels and
//! labeled. A feature/LDA/SVM stage then checks that the labels are learnable.
//!
//! Module map:
//!
//! - [`dsp`]: Butterworth band-pass, notch, and SSA smoothing.
//! - [`kinematics`]: joint angles from skeleton joint positions.
//! - [`ingest`]: recording files, angle datagrams, stream merging, synthetic data.
//! - [`matching`]: DTW, moving-window scan, recursive minima, segment extraction.
//! - [`features`]: per-channel EMG features, log normalization, LDA ranking.
//! - [`folds`]: seeded stratified k-fold assignment and train/eval split.
//! - [`classify`]: RBF-kernel SVM, cross-validation, train/eval split.
//! - [`pipeline`]: configuration, end-to-end runs, live mode, plot data.

pub mod classify;
pub mod dsp;
pub mod error;
pub mod features;
pub mod folds;
pub mod ingest;
pub mod kinematics;
pub mod matching;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result};
pub use series::TimeSeries;
