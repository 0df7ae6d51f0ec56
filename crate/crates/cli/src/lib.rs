//! Library side of the `gkm` command: run configuration, golden-table
//! verification and sheaf descriptor loading.

pub mod config;
pub mod golden;
pub mod output;
pub mod sheaf_file;

/// Exit status for malformed input or arguments.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for a failed computation or verification.
pub const EXIT_FAILURE: u8 = 1;

/// An error carrying the exit status it should produce.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILURE, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Sets the global rayon pool size; `GKM_WORKERS` wins over the flag.
pub fn configure_workers(flag: Option<usize>) -> Result<usize, CliError> {
    let env = match std::env::var("GKM_WORKERS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| CliError::usage(format!("GKM_WORKERS must be a positive integer, got {v:?}")))?),
        Err(_) => None,
    };
    let n = env.or(flag).unwrap_or(0);
    if env == Some(0) || flag == Some(0) && env.is_none() {
        return Err(CliError::usage("worker count must be positive"));
    }
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
