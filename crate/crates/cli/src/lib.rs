//! Command implementations behind the `gazeval` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_eval, cmd_features, cmd_ingest_validate, cmd_stats, cmd_synth, load_labels, load_trials, EvalArgs};
pub use config::{Overrides, RunConfig};

/// Short tag for the error prefix, taken from the innermost library error.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gazeval_core::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

/// The whole error chain on one line.
pub fn error_line(err: &anyhow::Error) -> String {
    let msg = err
        .chain()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(": ");
    format!("error[{}]: {}", error_kind(err), msg.replace(['\n', '\r'], " "))
}
