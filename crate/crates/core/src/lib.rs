//! Human-activity recognition from sparse mmWave radar point clouds.
//!
//! The pipeline: per-frame point clouds are cleaned up ([`pointcloud`]),
//! turned into graphs with a configurable topology — the interesting ones
//! put a virtual center node in the middle of the cloud ([`graph`]) — and
//! classified by a small graph-convolution + Bi-LSTM network trained with
//! plain batch-size-1 Adam ([`model`]). Everything is f64 and seeded; runs
//! are reproducible bit for bit.
//!
//! [`nn`] holds the from-scratch differentiable layers, [`data`] the JSONL
//! dataset format plus a synthetic generator, and [`bench`] the scaling
//! harness that checks construction cost empirically.

pub mod bench;
pub mod data;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pointcloud;
