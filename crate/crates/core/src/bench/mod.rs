//! Evaluation metrics, synthetic data and experiment harnesses.

pub mod ablation;
pub mod metrics;
pub mod synth;

pub use ablation::{ablate, throughput, AblationMode, AblationRow};
pub use metrics::{evaluate, EvalReport};
pub use synth::{generate, Boundary, Layout, Occlusion, SynthSequence, SynthSpec};
