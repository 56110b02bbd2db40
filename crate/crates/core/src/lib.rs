//! Simulation of spatially entangled photon pairs from type-I down-conversion
//! in one or two BBO crystals.
//!
//! The pipeline runs from crystal dispersion ([`dispersion`]) through the
//! phase-matched momentum amplitude ([`phasematch`]) to sampled fields and
//! their distributions ([`fields`]), entropic entanglement bounds
//! ([`entanglement`]) and a synthetic camera measurement ([`coincidence`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coincidence;
pub mod dispersion;
pub mod entanglement;
pub mod error;
pub mod fields;
pub mod phasematch;

pub use dispersion::{
    collinear_angle, Polarization, PumpAnisotropy, SellmeierModel, TransverseMomentum, TypeIKinematics,
};
pub use error::{Error, Result};
pub use phasematch::{CrystalKind, CrystalSetup, PumpSpec, SpdcSource};
