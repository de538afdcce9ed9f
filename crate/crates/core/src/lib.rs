//! Numerical core for surface-smectic computations in the Landau-de Gennes model.
//!
//! The crate is `no_std` (it needs `alloc` only) and contains every algorithm of
//! the toolkit: the half-plane magnetic spectral function `zeta`, the reduced
//! half-space Ginzburg-Landau minimization giving the surface energy density
//! `E(b, nu)`, triangle-mesh surface geometry, director optimization over
//! `SO(3)`, and a coupled Landau-de Gennes descent flow on 3D grids.
//!
//! File formats, caching, parallel sweeps and the command line live in the
//! `smectic` companion crate.
#![no_std]
// `num_traits::Float` supplies float math on toolchains whose `core` lacks it
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod director;
pub mod eigen;
pub mod error;
pub mod geom;
pub mod halfplane;
pub mod halfspace;
pub mod interp;
pub mod ldg;
pub mod mesh;
pub mod ncg;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Seeded deterministic generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate-wide RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
