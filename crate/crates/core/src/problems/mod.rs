//! Ground-truth environments.
//!
//! [`LinearConstraintProblem`] is the fixed-arm linear problem with a reward
//! and a constraint metric; [`TranscodeProblem`] simulates choosing an upload
//! quality under a reliability constraint.

mod synthetic;
mod transcode;

pub use synthetic::{
    generate_synthetic, select_baseline, LinearConstraintProblem, ProblemDocument, SyntheticConfig, BASELINE_POOL,
    BASELINE_RANK,
};
pub use transcode::{
    Quality, RewardShape, TranscodeConfig, TranscodeContext, TranscodeDocument, TranscodeOutcome, TranscodeProblem, ALPHA_BOUND,
    OFFSET_BOUNDS,
};
