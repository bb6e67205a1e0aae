//! Texture-cache-aware Gaussian splatting on a simulated 2.5D texture memory.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//!
//! - [`texture`]: 2D grids of 4-lane texels with traced reads and writes.
//! - [`cache`]: a fully associative LRU cache over square texel blocks, the
//!   cross-block stride histogram and a least-squares latency model.
//! - [`texsort`]: the bitonic key-value sort that re-lays its data at every
//!   step so compare partners are texture neighbours, plus the GPUTeraSort
//!   quad-layout baseline used for comparison.
//! - [`gs`]: the tile-based forward splatting pipeline with packed parameter
//!   textures, 32-bit key normalization and a scalar reference renderer.
//!
//! IO, file formats and the command-line harness live in the `texsplat` crate.

#![no_std]
// `!(a > b)` is used deliberately so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cache;
pub mod dispatch;
mod error;
pub mod gs;
pub mod math;
pub mod texsort;
pub mod texture;

pub use error::{Error, Result};
