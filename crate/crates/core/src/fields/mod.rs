//! Discretized two-photon fields: momentum grids, propagation, transforms to
//! position space and the reductions built on them.

pub mod amplitude;
pub mod distribution;
pub mod fft;
pub mod grid;
pub mod slices;

pub use amplitude::{build_amplitude, memory_estimate, AmplitudeOptions, Basis, BiphotonAmplitude4};
pub use distribution::{
    argmax, averaged_joint_x, conditional_on_idler, conditional_position, count_local_maxima, momentum_pdf,
    pearson, position_pdf, radial_profile, singles, Axis, Distribution,
};
pub use grid::{ExtentPolicy, LineGrid, MomentumGrid4};
pub use slices::{averaged_joints, AveragedJoints, PairQuadrature, TransverseAxis};
