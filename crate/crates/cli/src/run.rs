//! Plumbing shared by all subcommands: error classes, input resolution,
//! atomic outputs and run manifests.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Relative input paths that do not exist are looked up here.
pub const DATA_DIR_ENV: &str = "PREDICTABILITY_DATA_DIR";

pub const STDIO: &str = "-";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}", located(.file, .message))]
    Data { file: Option<String>, message: String },

    #[error("{}", located(.file, .message))]
    Numeric { file: Option<String>, message: String },
}

fn located(file: &Option<String>, message: &str) -> String {
    match file {
        Some(f) => format!("{f}: {message}"),
        None => message.to_string(),
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<&'a str>,
    message: String,
}

impl CliError {
    pub fn data(file: impl fmt::Display, message: impl Into<String>) -> Self {
        CliError::Data { file: Some(file.to_string()), message: message.into() }
    }

    /// Classifies a library error raised while processing `file`.
    pub fn core(file: impl fmt::Display, e: predictability::Error) -> Self {
        let file = Some(file.to_string());
        if e.is_numeric() {
            CliError::Numeric { file, message: e.to_string() }
        } else {
            CliError::Data { file, message: e.to_string() }
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Numeric { .. } => 4,
        }
    }

    /// Single-line JSON for the error stream.
    pub fn to_json_line(&self) -> String {
        let (error, file) = match self {
            CliError::Usage(_) => ("usage", None),
            CliError::Data { file, .. } => ("data", file.as_deref()),
            CliError::Numeric { file, .. } => ("numeric", file.as_deref()),
        };
        let line = ErrorLine { error, file, message: self.to_string().replace('\n', " ") };
        serde_json::to_string(&line).expect("error line serializes")
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn display_path(path: &Path) -> String {
    if path.as_os_str() == STDIO {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == STDIO)
}

/// Resolves a relative input against the data directory when it is not
/// found relative to the working directory.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() || path.as_os_str() == STDIO {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command_line: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    parameters: &'a Value,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    wall_time_s: f64,
}

/// One invocation: records what was read and written and emits the
/// manifest next to the first file output.
pub struct Run {
    argv: Vec<String>,
    parameters: Value,
    seed: Option<u64>,
    jobs: Option<usize>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    manifest: Option<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(argv: Vec<String>, parameters: Value, jobs: Option<usize>) -> Self {
        Self {
            argv,
            parameters,
            seed: None,
            jobs,
            inputs: Vec::new(),
            outputs: Vec::new(),
            manifest: None,
            started: Instant::now(),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Reads a file, or stdin for `-`, and records its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let resolved = resolve_input(path);
        let name = display_path(&resolved);
        let bytes = if resolved.as_os_str() == STDIO {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::data(&name, e.to_string()))?;
            buf
        } else {
            std::fs::read(&resolved).map_err(|e| CliError::data(&name, e.to_string()))?
        };
        self.record_input(name, &bytes);
        Ok(bytes)
    }

    pub fn record_input(&mut self, path: String, bytes: &[u8]) {
        self.inputs.push(FileDigest { path, sha256: sha256_hex(bytes) });
    }

    /// File name of the manifest that a file output at `out` refers to.
    fn manifest_for(&mut self, out: &Path) -> PathBuf {
        self.manifest
            .get_or_insert_with(|| {
                let mut name = out.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            })
            .clone()
    }

    /// Writes to stdout, or atomically to a file.
    pub fn write(&mut self, out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
        if is_stdio(out) {
            let mut stdout = std::io::stdout().lock();
            return stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::data("<stdout>", e.to_string()));
        }
        let out = out.expect("file output");
        self.manifest_for(out);
        write_atomic(out, bytes)?;
        self.outputs.push(FileDigest { path: out.display().to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes a JSON document. File outputs carry a `manifest` field naming
    /// the run manifest.
    pub fn write_json<T: Serialize>(&mut self, out: Option<&Path>, doc: &T) -> CliResult<()> {
        let mut value = serde_json::to_value(doc).map_err(|e| CliError::Numeric {
            file: None,
            message: e.to_string(),
        })?;
        // Non-finite floats serialize as null; outputs never hold nulls otherwise.
        if let Some(field) = first_null(&value, "") {
            return Err(CliError::Numeric { file: None, message: format!("non-finite value at {field}") });
        }
        if !is_stdio(out) {
            let manifest = self.manifest_for(out.expect("file output"));
            let name = manifest.file_name().unwrap_or(manifest.as_os_str()).to_string_lossy().into_owned();
            if let Value::Object(map) = &mut value {
                map.insert("manifest".into(), Value::String(name));
            }
        }
        let mut text = serde_json::to_string_pretty(&value).expect("JSON value serializes");
        text.push('\n');
        self.write(out, text.as_bytes())
    }

    /// Maps `f` over `items` on the worker pool. Results keep input order
    /// and the first failure in that order is reported.
    pub fn par_map<T, R, F>(&self, items: &[T], f: F) -> CliResult<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> CliResult<R> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        let results: Vec<CliResult<R>> = pool.install(|| items.par_iter().map(f).collect());
        results.into_iter().collect()
    }

    pub fn finish(self) -> CliResult<()> {
        let Some(path) = &self.manifest else {
            return Ok(());
        };
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command_line: &self.argv,
            seed: self.seed,
            parameters: &self.parameters,
            inputs: &self.inputs,
            outputs: &self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

fn first_null(v: &Value, at: &str) -> Option<String> {
    match v {
        Value::Null => Some(if at.is_empty() { "/".into() } else { at.to_string() }),
        Value::Array(items) => items.iter().enumerate().find_map(|(i, x)| first_null(x, &format!("{at}/{i}"))),
        Value::Object(map) => map.iter().find_map(|(k, x)| first_null(x, &format!("{at}/{k}"))),
        _ => None,
    }
}

/// Temp file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.display().to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::data(&name, e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| CliError::data(&name, e.to_string()))?;
    tmp.persist(path).map_err(|e| CliError::data(&name, e.error.to_string()))?;
    Ok(())
}

/// `<output>.json`, the sidecar next to a file output.
pub fn sidecar_path(out: Option<&Path>) -> Option<PathBuf> {
    if is_stdio(out) {
        return None;
    }
    let mut name = out.expect("file output").as_os_str().to_owned();
    name.push(".json");
    Some(PathBuf::from(name))
}
