//! Classical and quantum dynamics of electrons riding a travelling optical
//! lattice (the ponderomotive beat potential of two colinear laser waves).
//!
//! The crate is organised around one potential description,
//! [`beatwave::PotentialParams`], shared by four solver families:
//!
//! * [`classical`] — closed-form single-particle trajectories in the
//!   co-moving frame, built on the Jacobi elliptic routines in [`elliptic`];
//! * [`ensemble`] — deterministic Monte-Carlo populations of those
//!   trajectories, reduced to spectral/positional density grids;
//! * [`qm_parabolic`] and [`qm_bloch`] — quantum evolution of wavepackets in
//!   the harmonic well limit and in the full periodic lattice;
//! * [`tracer`] — a relativistic particle pusher driven by explicit paraxial
//!   pulse fields, for validating the idealised models against finite pulses.
//!
//! The library core is `no_std`-compatible (`alloc` required); file IO,
//! configuration and the command line live in the companion `pondero-cli`
//! crate. With the default `rayon` feature the ensemble and tracer drivers
//! fan out over particles; results are bitwise independent of the worker
//! count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod fft;
mod ode;
mod par;
mod quadrature;
mod tridiag;

pub mod beatwave;
pub mod classical;
pub mod elliptic;
pub mod ensemble;
pub mod qm_bloch;
pub mod qm_parabolic;
pub mod tracer;

pub use error::{Error, Result};
