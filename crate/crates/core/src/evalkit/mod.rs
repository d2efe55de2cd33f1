//! Evaluation harness: synthetic data, an L1 logistic-regression probe,
//! noise sweeps and runtime profiling.

pub mod baseline;
pub mod logreg;
pub mod metrics;
pub mod profile;
pub mod protocol;
pub mod robustness;
pub mod synth;

pub use baseline::PcaModel;
pub use logreg::{l1_logreg_fit, L1LogRegModel, ScaledClassifier, SolverOptions};
pub use metrics::{accuracy, adjusted_rand_index};
pub use profile::{profile_runtime, AxisTiming, RuntimeReport};
pub use protocol::{run_eval, EvalConfig, EvalRun, ModelReport, Split};
pub use robustness::{noise_robustness, NoiseScale, NoiseTable};
pub use synth::{gen_blocks, gen_synthetic, BlockData, BlockSpec, SynthSpec};
