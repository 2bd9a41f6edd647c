//! Deterministic file output: CSV tables with shortest round-trip floats,
//! per-file metadata sidecars and a hashed manifest per output directory.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
const LOCK_NAME: &str = ".lock";

pub fn version() -> String {
    match option_env!("DRIVEN_LATTICE_GIT") {
        Some(g) if !g.is_empty() => format!("v{}-{}", env!("CARGO_PKG_VERSION"), g),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Shortest decimal string that parses back to the same `f64`. Plain
/// notation in [1e-5, 1e16), exponent notation outside.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::U(u) => u.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}
impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::U(x as usize)
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::S(String::new()), Cell::F)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let file = File::create(path)?;
    write_csv_to(std::io::BufWriter::new(file), header, rows)
}

pub fn write_csv_to<W, I>(sink: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<Cell>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(header).map_err(csv_err)?;
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!("row {i} has {} fields, header has {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headed numeric CSV; returns the columns named in `wanted`.
pub fn read_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h.trim() == *w)
                .ok_or_else(|| Error::InvalidInput(format!("{}: missing column '{w}'", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); wanted.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{}: row {}: '{field}' is not a number", path.display(), line + 1))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub status: String,
    pub files: Vec<FileEntry>,
    pub assertions: Vec<Assertion>,
}

impl Manifest {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Sidecar written next to each output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub file: String,
    pub version: String,
    pub command: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub config: Value,
    pub details: Value,
}

pub fn sha256_hex(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// An output directory owned by one run. Creation takes a lock file that
/// [`RunOutput::finish`] releases; a second run on the same directory fails.
pub struct RunOutput {
    dir: PathBuf,
    command: String,
    config: Value,
    started: Instant,
    files: Vec<String>,
    assertions: Vec<Assertion>,
}

impl RunOutput {
    pub fn create(dir: &Path, command: &str, config: Value) -> Result<RunOutput> {
        fs::create_dir_all(dir)?;
        let lock = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => writeln!(f, "{}", std::process::id())?,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Validation {
                    invariant: "one run per output directory".into(),
                    message: format!("{} is locked by another run (remove {} if stale)", dir.display(), lock.display()),
                })
            }
            Err(e) => return Err(e.into()),
        }
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            started: Instant::now(),
            files: Vec::new(),
            assertions: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    fn meta(&self, file: &str, details: Value) -> Meta {
        Meta {
            file: file.to_string(),
            version: version(),
            command: self.command.clone(),
            threads: rayon::current_num_threads(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            config: self.config.clone(),
            details,
        }
    }

    /// Writes `name` plus its `<stem>.meta.json` sidecar.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I, details: Value) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let path = self.dir.join(name);
        write_csv(&path, header, rows)?;
        self.register(name);
        let stem = name.strip_suffix(".csv").unwrap_or(name);
        let meta = self.meta(name, details);
        self.json(&format!("{stem}.meta.json"), &meta)?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text)?;
        self.register(name);
        Ok(path)
    }

    /// Run-level sidecar (`meta.json`) describing every file of the run.
    pub fn run_meta(&mut self, details: Value) -> Result<PathBuf> {
        let meta = self.meta("*", details);
        self.json("meta.json", &meta)
    }

    pub fn assert(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail: detail.into() });
    }

    /// Hashes every registered file, writes the manifest and releases the
    /// lock. Runs on both success and assertion failure.
    pub fn finish(self) -> Result<Manifest> {
        let mut names = self.files.clone();
        names.sort();
        let files = names
            .iter()
            .map(|n| {
                let (sha256, bytes) = sha256_hex(&self.dir.join(n))?;
                Ok(FileEntry { path: n.clone(), sha256, bytes })
            })
            .collect::<Result<Vec<_>>>()?;
        let passed = self.assertions.iter().all(|a| a.passed);
        let manifest = Manifest {
            version: version(),
            command: self.command.clone(),
            status: if passed { "ok" } else { "assertions_failed" }.into(),
            files,
            assertions: self.assertions.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        File::create(self.dir.join(MANIFEST_NAME))?.write_all(text.as_bytes())?;
        fs::remove_file(self.dir.join(LOCK_NAME))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(4.0), "4");
        assert_eq!(fmt_f64(-2.5), "-2.5");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_f64(1.5e20), "1.5e20");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    proptest! {
        #[test]
        fn float_formatting_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = fmt_f64(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(dir.path(), "test", json!({})).unwrap();
        out.csv(
            "t.csv",
            &["x", "label", "n"],
            vec![vec![Cell::F(0.1), "a,b".into(), Cell::U(3)], vec![Cell::F(1e-9), "c".into(), Cell::U(4)]],
            json!({"k": 1}),
        )
        .unwrap();
        out.assert("ok", true, "");
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "x,label,n\n0.1,\"a,b\",3\n1e-9,c,4\n");
        let cols = read_columns(&dir.path().join("t.csv"), &["n", "x"]).unwrap();
        assert_eq!(cols, vec![vec![3.0, 4.0], vec![0.1, 1e-9]]);
        assert!(read_columns(&dir.path().join("t.csv"), &["y"]).is_err());

        let m = out.finish().unwrap();
        assert!(m.all_passed());
        assert_eq!(m.status, "ok");
        let names: Vec<_> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, vec!["t.csv", "t.meta.json"]);
        let (h, n) = sha256_hex(&dir.path().join("t.csv")).unwrap();
        assert_eq!(m.files[0].sha256, h);
        assert_eq!(m.files[0].bytes, n);
        assert!(dir.path().join(MANIFEST_NAME).exists());
        assert!(!dir.path().join(LOCK_NAME).exists());
    }

    #[test]
    fn directory_is_owned_by_one_run() {
        let dir = tempfile::tempdir().unwrap();
        let first = RunOutput::create(dir.path(), "a", json!({})).unwrap();
        assert!(matches!(RunOutput::create(dir.path(), "b", json!({})), Err(Error::Validation { .. })));
        first.finish().unwrap();
        RunOutput::create(dir.path(), "c", json!({})).unwrap().finish().unwrap();
    }

    #[test]
    fn failed_assertions_still_write_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(dir.path(), "x", json!({})).unwrap();
        out.assert("fails", false, "reason");
        let m = out.finish().unwrap();
        assert!(!m.all_passed());
        let back: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn row_width_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_csv(&dir.path().join("x.csv"), &["a", "b"], vec![vec![Cell::F(1.0)]]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
