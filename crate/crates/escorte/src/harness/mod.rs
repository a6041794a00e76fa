//! Dataset IO, evaluation metrics, the inference-latency model, wall-clock
//! benchmarking, and the plumbing behind the `escorte` command-line tool.

pub mod cli;
mod config;
mod controlsim;
mod evaluate;
mod latency;
mod metrics;
mod seqfile;

pub use config::{
    load_kv_file, parse_action_config, parse_reid_config, parse_scenario, ConfigError,
    ScenarioFile,
};
pub use controlsim::{control_sim_sequence, save_command_log, CommandLogLine};
pub use evaluate::{
    action_sequences, evaluate_joint, reid_domains, EvalOptions, EvalReport, WindowEncoding,
};
pub use latency::{inference_time, measure_latency, LatencyInputs, LatencyMeasurement};
pub use metrics::{average_precision, confusion_matrix, mean_ap, MetricsError};
pub use seqfile::{
    fmt_f64, load_corpus, load_sequence, save_corpus, save_sequence, FormatError, LoadedSequence,
    MANIFEST_NAME,
};
