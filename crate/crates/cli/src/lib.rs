//! Command-line front end for `vecdep`: CSV ingestion, group configuration,
//! subcommands and output emission.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric degeneracy.

pub mod args;
pub mod commands;
pub mod io;

use std::fmt;

use args::{Cli, Command};

/// Version tag carried by every JSON document the CLI emits.
pub const SCHEMA: &str = "vecdep/1";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Invalid flag values or combinations.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Unreadable or malformed input data.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for DataError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<vecdep::Error>() {
            return match e {
                _ if e.is_numeric() => EXIT_NUMERIC,
                vecdep::Error::UnsupportedOrder { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

/// Size the global thread pool from `VECDEP_THREADS` when it is set.
pub fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("VECDEP_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            UsageError(format!(
                "VECDEP_THREADS must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(a) => {
            let (csv, groups) = commands::simulate(a)?;
            if let Some(p) = &a.groups_out {
                io::emit(&io::to_json(&groups)?, Some(p))?;
            }
            io::emit(&csv, a.output.as_deref())
        }
        Command::Collapse(a) => io::emit(&commands::collapse(a)?, a.output.as_deref()),
        Command::Measure(a) => io::emit(&commands::measure(a)?, a.output.as_deref()),
        Command::Assess(a) => io::emit(&commands::assess(a)?, a.output.as_deref()),
        Command::Kendall(a) => io::emit(&commands::kendall(a)?, a.output.as_deref()),
        Command::Rolling(a) => io::emit(&commands::rolling(a)?, a.output.as_deref()),
    }
}
