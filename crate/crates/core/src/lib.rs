//! Fingerprint liveness detection from block-level ridge-valley quality
//! features.
//!
//! The pipeline runs in five stages, each with a plain-text artifact so any
//! single stage can be checked in isolation:
//!
//! 1. [`ingest`] loads grayscale images and builds labeled dataset manifests.
//! 2. [`blocks`] + [`features`] turn an image into a 13-slot [`features::QualityVector`].
//! 3. [`select`] picks a feature subset with sequential floating forward selection.
//! 4. [`forest`] trains a random forest on the selected subset.
//! 5. [`eval`] computes Ferrlive / Ferrfake / ACE, threshold sweeps and EER.
//!
//! [`synth`] generates stripe patterns with known ridge and valley widths and is
//! used as ground truth throughout the test suite. [`pipeline`] wires the
//! stages together for the command-line front end.
//!
//! Data-parallel loops (blocks of an image, images of a manifest, trees of a
//! forest, candidate subsets of a selection step) go through [`exec::Exec`],
//! which uses rayon when the `parallel` feature is enabled and falls back to
//! plain iteration otherwise. Results never depend on the execution mode.

pub mod blocks;
pub mod eval;
pub mod exec;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod pipeline;
pub mod rng;
pub mod select;
pub mod synth;

pub use exec::Exec;
pub use ingest::{IntensityGrid, Label, Material, Split};
