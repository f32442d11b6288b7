//! Randomized benchmarking of the CZ gate: circuit construction, shot
//! simulation, decay fits and the multi-round driver.

pub mod fit;
pub mod rb;
pub mod rounds;
pub mod sequence;

pub use fit::{fidelity_from_decay, fit_decay, AsymptoteMode, DecayFit, DecayPoint};
pub use rb::{analyze, post_select_loss, run_rb, NoiseModel, RbConfig, RbPoint, RbResult, RbRun, RbSetup, ShotRecord};
pub use rounds::{run_rounds, MotionSetup, RoundPolicy, RoundRecord, RscStage};
pub use sequence::{build_sequence, sample_haar_rotation, GlobalRotation, RbSequence};
