use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Reads inputs and writes outputs for one command, remembering input
/// digests for the provenance record.
#[derive(Default)]
pub struct Context {
    pub inputs: Vec<InputDigest>,
    pub result: Value,
    stdin_used: bool,
}

impl Context {
    /// Read a file, or standard input for `-`.
    pub fn load(&mut self, path: &str) -> Result<Vec<u8>, Failure> {
        let mut bytes = Vec::new();
        if path == "-" {
            if self.stdin_used {
                return Err(Failure::usage("standard input can only be read once"));
            }
            self.stdin_used = true;
            std::io::stdin()
                .read_to_end(&mut bytes)
                .map_err(|e| Failure::io(path, e))?;
        } else {
            bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
        }
        self.inputs.push(InputDigest {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    /// Write to a file, or standard output when `path` is absent or `-`.
    pub fn emit(&self, path: Option<&str>, bytes: &[u8]) -> Result<(), Failure> {
        match path {
            None | Some("-") => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| Failure::io("<stdout>", e))
            }
            Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::io(p, e)),
        }
    }
}

/// Append one JSON line describing the run to `path`.
pub fn append_provenance(
    path: &Path,
    command: &str,
    options: &Value,
    ctx: &Context,
    exit_code: i32,
) -> std::io::Result<()> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let record = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "options": options,
        "inputs": ctx.inputs,
        "result": ctx.result,
        "exit_code": exit_code,
        "unix_time": timestamp,
    });
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(
        file,
        "{}",
        serde_json::to_string(&record).expect("serialisable")
    )
}
