//! Nine-level NV-N14 spin pair: level structure, density matrix, pulses,
//! and the optical pumping channel.

mod optics;
mod pulse;
mod state;
mod system;

pub use optics::{apply_optical_channel, effective_flip_probability, OpticalParams};
pub use pulse::{
    apply_finite_pulse, apply_ideal_pulse, DriveSpec, SelectivityMode, SelectivityWarning,
};
pub use state::{initial_state, DensityMatrix, InitialState, DIM};
pub use system::{Channel, Level, SpinSystem, Transition};
