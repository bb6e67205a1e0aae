//! File formats, synthetic workloads and experiment drivers for
//! [`texsplat_core`].
//!
//! - [`io`]: binary PLY point clouds, JSON cameras, P6 images, CSV reports
//!   and access traces.
//! - [`synth`]: seeded key-value arrays and Gaussian scenes.
//! - [`costfit`]: pointer-chase traces for fitting the cache latency model.
//! - [`bench`]: the drivers behind the `texsplat` binary.

pub mod bench;
pub mod costfit;
pub mod io;
pub mod synth;
