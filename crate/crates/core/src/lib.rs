//! Time-frequency tile calculus on periodic grids.
//!
//! The crate builds the objects behind modulated maximal estimates for
//! pseudo-differential operators with homogeneous symbols: dyadic tiles and
//! trees, wave packets, model sum operators, phase-decomposition
//! multipliers, Cotlar-type comparison estimates and the density/size tree
//! selection. Everything lives on the torus `[0, 2^p)^n` (n = 1 or 2) sampled
//! with spacing `2^-q`, so every Fourier identity is exact up to roundoff.

pub mod cotlar;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod modelop;
pub mod phase;
pub mod quadrature;
pub mod random;
pub mod symbol;
pub mod treeselect;
pub mod wavepacket;

pub use error::{Error, Result};
pub use field::{Field, SpectralField};
pub use geometry::{Cube, DyadicCube, Tile, Tree};
pub use grid::GridSpec;
pub use num_complex::Complex64;
