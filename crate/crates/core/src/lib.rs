//! Numerical toolkit for nonlinear potential theory on Carnot groups.
//!
//! The crate provides exact arithmetic on stratified nilpotent Lie groups in
//! exponential coordinates (truncated BCH product, dilations, homogeneous
//! gauge and its quasi-metric), lattice point clouds with Christ-type dyadic
//! cube families, truncated Wolff and Riesz potentials of atomic and grid
//! measures, the discrete functionals that control potential energies over a
//! cube family, dual-formulation capacity estimates, and the monotone
//! fixed-point machinery for quasilinear equations with power source terms
//! and measure data.

pub mod capacity;
pub mod dyadic;
pub mod experiments;
pub mod group;
pub mod io;
pub mod lane_emden;
pub mod measure;
pub mod spatial;
pub mod wolff;

pub use group::{builtin, make_group, BuiltinGroup, GPoint, GroupError, GroupSpec, StrataSpec};
