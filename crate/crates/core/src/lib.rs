//! Exact, desk-scale machinery for noisy permutation channels.
//!
//! A length-`n` string over a `q`-ary alphabet that passes through a uniform
//! random permutation followed by a memoryless channel only retains its
//! *composition* (the histogram of symbol counts). This crate provides the
//! pieces needed to study that induced composition-to-composition channel
//! numerically and exactly:
//!
//! - [`compositions`]: the lattice of compositions, ranking, and distances;
//! - [`lattice_dist`]: finitely supported distributions on the lattice,
//!   total variation, convolution, and M-type predicates;
//! - [`multinomial`]: multinomial pmfs in log space plus numerical bound
//!   checks (KL upper bound, peak, tail, successive differences);
//! - [`channel`]: the memoryless channel, the induced composition kernel via
//!   multinomial convolution, Monte Carlo sampling, and a brute-force oracle;
//! - [`cells`]: cubic cell partitions of the lattice and a Gray-like ordering
//!   of the nonempty cells;
//! - [`quantizer`]: deterministic two-stage quantization of lattice
//!   distributions to exact M-type distributions;
//! - [`idcode`]: identification-code construction and exact/Monte Carlo error
//!   evaluation, with packing and total-variation converse bounds;
//! - [`verify`]: numerical verification sweeps for the shift and transfer
//!   inequalities and the resolvability collision mechanism.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes through
//! [`libm`] so results do not depend on the host libm.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cells;
pub mod channel;
pub mod compositions;
mod error;
pub mod idcode;
pub mod lattice_dist;
mod math;
pub mod multinomial;
pub mod quantizer;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};

/// Default cap on the number of lattice points a single operation may
/// enumerate or materialize.
pub const DEFAULT_LATTICE_CAP: u64 = 10_000_000;
