use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::commands::CliError;

/// Common wrapper around every JSON report. Identical configuration produces
/// byte-identical output except for the `timestamp` field.
#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    pub seed: u64,
    pub timestamp: u64,
    pub config: serde_json::Value,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(
        command: &str,
        operator: Option<String>,
        seed: u64,
        config: serde_json::Value,
        result: T,
    ) -> Self {
        Self {
            schema: 1,
            tool: "proxatlas",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            operator,
            seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            result,
        }
    }
}

/// Pretty JSON to the path (atomically: temp file + rename) or stdout.
pub fn emit_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("serialization failed: {e}")))?;
    text.push('\n');
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => write_atomic(path, text.as_bytes()),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(format!(".tmp-{}", std::process::id()));
        path.with_file_name(name)
    };
    let write = |p: &Path| -> std::io::Result<()> {
        let mut f = std::fs::File::create(p)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    write(&tmp)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            CliError::data(format!("cannot write {}: {e}", path.display()))
        })
}
