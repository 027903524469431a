//! Control synthesis and simulation for maneuverable nonholonomic wheeled
//! vehicles.
//!
//! The crate turns a smooth planar curve into a stabilizing feedback for a
//! family of kinematic vehicle models (Chaplygin sled, automobile, truck
//! with trailers):
//!
//! - [`jet`] — nestable forward-mode dual numbers, the numeric substrate for
//!   every derivative taken in the crate.
//! - [`models`] — the vehicle catalog, constraint residuals, and trailer
//!   geometry reconstruction.
//! - [`maneuver`] — maneuverability checks, chained-form transforms, and the
//!   maneuvering operator lifting a planar curve to a feasible state/input
//!   reference.
//! - [`backstepping`] — the recursive Lyapunov controller and the assembled
//!   feedback law.
//! - [`sim`] — fixed-step closed-loop integration, trace recording, and
//!   diagnostics.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live
//! in the companion `nonholo-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backstepping;
pub mod jet;
pub mod maneuver;
pub mod models;
mod rng;
pub mod sim;

/// Largest supported shape dimension `n`.
///
/// The backstepping recursion and the reference-jet chain are composed at
/// compile time, one nesting level per shape coordinate; builders reject
/// models beyond this depth.
pub const MAX_SHAPE_DIM: usize = 6;
