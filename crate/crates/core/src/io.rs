//! Artifact plumbing: versioned CSV tables, run manifests, and a
//! sectioned `key = value` configuration format with line-precise
//! diagnostics.
//!
//! Every number is written with Rust's shortest round-trip float
//! formatting, so identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Version stamped into every CSV header. Readers reject anything else.
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: unsupported csv version {found} (this build reads v{CSV_VERSION})")]
    Version { path: PathBuf, found: String },
    #[error("config key [{section}] {key} is not set and has no default")]
    MissingKey { section: String, key: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

/// An in-memory numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    /// Row-major values; every row has `columns.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Serializes to the versioned CSV format.
    pub fn to_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# csv-version: {CSV_VERSION}");
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_string()).map_err(|e| file_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(path, 1, "empty file, expected a csv-version header"))?;
        let found = header
            .strip_prefix("# csv-version:")
            .map(str::trim)
            .ok_or_else(|| parse_err(path, 1, "missing `# csv-version:` header"))?;
        if found != CSV_VERSION.to_string() {
            return Err(IoError::Version { path: path.to_path_buf(), found: found.to_string() });
        }
        let (_, names) = lines
            .next()
            .ok_or_else(|| parse_err(path, 2, "missing column-name line"))?;
        let columns: Vec<String> = names.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        parse_err(path, i + 1, format!("cannot parse `{}` as a number", cell.trim()))
                    })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != columns.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("expected {} cells, found {}", columns.len(), row.len()),
                ));
            }
            rows.push(row);
        }
        Ok(CsvTable { columns, rows })
    }
}

// ---------------------------------------------------------------------------
// Configuration files: `[section]` headers and `key = value` lines
// ---------------------------------------------------------------------------

/// Parsed configuration. Keys live under sections; lines before any
/// section header belong to the implicit section `""`.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<(String, String), String>,
    /// Every (section, key, value) consulted through the typed getters,
    /// including defaults that were not present in the file. Echoed into
    /// the run manifest for reproducibility.
    consulted: std::cell::RefCell<BTreeMap<(String, String), String>>,
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(path, i + 1, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                parse_err(path, i + 1, "expected `key = value` or `[section]`")
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(parse_err(path, i + 1, "empty key"));
            }
            let prior =
                values.insert((section.clone(), key.to_string()), value.trim().to_string());
            if prior.is_some() {
                return Err(parse_err(path, i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Config { values, consulted: Default::default() })
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        Self::parse(&text, path)
    }

    fn note(&self, section: &str, key: &str, value: &str) {
        self.consulted
            .borrow_mut()
            .insert((section.to_string(), key.to_string()), value.to_string());
    }

    pub fn get_str(&self, section: &str, key: &str, default: &str) -> String {
        let v = self
            .values
            .get(&(section.to_string(), key.to_string()))
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.note(section, key, &v);
        v
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64, IoError> {
        let raw = self.get_str(section, key, &format!("{default:e}"));
        raw.parse().map_err(|_| IoError::MissingKey {
            section: section.to_string(),
            key: format!("{key} (cannot parse `{raw}` as a number)"),
        })
    }

    pub fn get_u64(&self, section: &str, key: &str, default: u64) -> Result<u64, IoError> {
        let raw = self.get_str(section, key, &default.to_string());
        raw.parse().map_err(|_| IoError::MissingKey {
            section: section.to_string(),
            key: format!("{key} (cannot parse `{raw}` as an integer)"),
        })
    }

    /// Every setting consulted so far, as `section.key = value` lines in
    /// sorted order (defaults included).
    pub fn echo(&self) -> Vec<String> {
        self.consulted
            .borrow()
            .iter()
            .map(|((s, k), v)| {
                if s.is_empty() {
                    format!("{k} = {v}")
                } else {
                    format!("{s}.{k} = {v}")
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

/// Record of one CLI run: the command, every configuration value that
/// influenced it (defaults echoed), the seed, the tool version, wall
/// time, and the files written.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_echo: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub elapsed_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            config_echo: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "elapsed_seconds = {:.3}", self.elapsed_seconds);
        for line in &self.config_echo {
            let _ = writeln!(out, "config.{line}");
        }
        for path in &self.outputs {
            let _ = writeln!(out, "output = {}", path.display());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_string()).map_err(|e| file_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_version_gate() {
        let mut table = CsvTable::new(&["r", "value"]);
        table.push(vec![0.5, 1.0 / 3.0]);
        table.push(vec![1.5, -2.75e-13]);
        let text = table.to_string();
        let back = CsvTable::parse(&text, Path::new("mem")).unwrap();
        assert_eq!(back, table);
        // Shortest round-trip formatting reproduces the bits exactly.
        assert_eq!(back.rows[0][1], 1.0 / 3.0);

        let stale = text.replace("csv-version: 1", "csv-version: 7");
        let err = CsvTable::parse(&stale, Path::new("mem")).unwrap_err();
        assert!(matches!(err, IoError::Version { .. }));

        let headless = text.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(CsvTable::parse(&headless, Path::new("mem")).is_err());
    }

    #[test]
    fn csv_rejects_ragged_rows_and_garbage() {
        let text = "# csv-version: 1\na,b\n1.0,2.0\n3.0\n";
        let err = CsvTable::parse(text, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("mem:4"));

        let text = "# csv-version: 1\na,b\n1.0,zebra\n";
        let err = CsvTable::parse(text, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("zebra"));
    }

    #[test]
    fn config_sections_defaults_and_echo() {
        let text = "\
# comment line
top = 3
[grid]
h = 0.05   # trailing comment
nodes = 1201
[run]
label = bump
";
        let cfg = Config::parse(text, Path::new("mem")).unwrap();
        assert_eq!(cfg.get_f64("", "top", 0.0).unwrap(), 3.0);
        assert_eq!(cfg.get_f64("grid", "h", 0.1).unwrap(), 0.05);
        assert_eq!(cfg.get_u64("grid", "nodes", 0).unwrap(), 1201);
        assert_eq!(cfg.get_str("run", "label", "x"), "bump");
        // Defaults are consulted and echoed even when absent from the file.
        assert_eq!(cfg.get_f64("run", "t_final", 40.0).unwrap(), 40.0);
        let echo = cfg.echo();
        assert!(echo.iter().any(|l| l == "run.t_final = 4e1"));
        assert!(echo.iter().any(|l| l == "grid.h = 0.05"));
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let err = Config::parse("[grid\nh = 1", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().starts_with("cfg:1:"));
        let err = Config::parse("h = 1\nh = 2", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().starts_with("cfg:2:"));
        let err = Config::parse("just words", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().contains("key = value"));
        let err = Config::parse("= 5", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().contains("empty key"));
    }

    #[test]
    fn manifest_lists_outputs() {
        let mut m = RunManifest::new("harmonic --n 1", 7);
        m.config_echo.push("grid.h = 0.05".to_string());
        m.record_output("out/q1.csv");
        let text = m.to_string();
        assert!(text.contains("command = harmonic --n 1"));
        assert!(text.contains("seed = 7"));
        assert!(text.contains("config.grid.h = 0.05"));
        assert!(text.contains("output = out/q1.csv"));
    }
}
