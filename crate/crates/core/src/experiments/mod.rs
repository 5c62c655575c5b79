//! Scenario engine and the experiments built on it.

mod bias;
mod config;
mod error;
mod logs;
mod naive;
mod scenario;
mod verify;

pub use bias::{
    bias_experiment, closed_form_bias, BiasMode, BiasReport, BiasRow, MIN_BIAS_TRIALS, TARGET_BIT,
};
pub use config::{
    ContractKind, ContractSection, CustomerConfig, MinerConfig, OutputPaths, OwnerConfig,
    ProducerConfig, ScenarioConfig,
};
pub use error::{ConfigError, ExperimentError};
pub use logs::{parse_jsonl, to_jsonl, LogParseError};
pub use naive::{naive_combine_demo, naive_expected_bias, NaiveReport};
pub use scenario::{run_scenario, ScenarioOutput, ScenarioSummary, Simulation, Tx};
pub use verify::{
    mutate_pulse, stalled_producers, verify_log, verify_log_text, Verdict, Violation,
    MUTABLE_FIELDS,
};
