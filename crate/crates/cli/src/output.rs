use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Format;

/// Failure of a subcommand before any output is committed.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(berhu::Error),
    Io(String),
}

impl CliError {
    pub fn is_usage(&self) -> bool {
        matches!(self, CliError::Usage(_))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<berhu::Error> for CliError {
    fn from(e: berhu::Error) -> Self {
        match e {
            berhu::Error::Parameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Envelope of every machine-readable report.
#[derive(Debug, Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
    pub result: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Document<'a, C, R> {
    pub fn new(command: &'static str, config: &'a C, seeds: Vec<u64>, notes: Vec<String>, result: &'a R) -> Self {
        Self {
            tool: "berhu",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds,
            notes,
            result,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))
    }
}

/// Files produced by a run, committed together at the end.
pub struct Bundle {
    pub json: String,
    pub text: String,
    pub extra: Vec<(&'static str, String)>,
}

impl Bundle {
    /// Writes every file into `dir` (staged then renamed), or prints to
    /// standard output when no directory is given.
    pub fn emit(self, dir: Option<&Path>, format: Format) -> CliResult<()> {
        let Some(dir) = dir else {
            match format {
                Format::Text => print!("{}", self.text),
                Format::Json => print!("{}", self.json),
            }
            return Ok(());
        };
        let created = !dir.exists();
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let mut files = vec![("report.json", self.json), ("report.txt", self.text)];
        files.extend(self.extra);
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let fail = |staged: &[(PathBuf, PathBuf)], msg: String| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
            if created {
                let _ = fs::remove_dir(dir);
            }
            CliError::Io(msg)
        };
        for (name, body) in files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, body) {
                return Err(fail(&staged, format!("cannot write {}: {e}", tmp.display())));
            }
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dest) in &staged {
            if let Err(e) = fs::rename(tmp, dest) {
                return Err(fail(&staged, format!("cannot write {}: {e}", dest.display())));
            }
        }
        Ok(())
    }
}

/// Fixed-width text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate() {
            width[k] = width[k].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            if k == 0 {
                s.push_str(&format!("{:<w$}", c, w = width[k]));
            } else {
                s.push_str(&format!("  {:>w$}", c, w = width[k]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

/// Plain CSV from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
