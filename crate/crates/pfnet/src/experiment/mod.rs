//! Experiment orchestration: configuration, training, checkpoints, the
//! throughput benchmark, and the CLI.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod train;

pub use bench::{run_bench, BenchConfig, BenchReport};
pub use checkpoint::Checkpoint;
pub use cli::run_command;
pub use config::{DataConfig, ExperimentConfig, FilterConfig, VerificationConfig};
pub use train::{evaluate, load_corpus, train_loop, RunRecord, TrainOutput};
