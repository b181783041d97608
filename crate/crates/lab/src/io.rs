//! Plain-text file formats and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use zagff_core::graph::{Graph, GraphError};
use zagff_core::sampler::Field;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

/// Edge list with a `# n=<N> d=<d> seed=<seed>` header and one `u v` per line.
pub fn edge_list(g: &Graph) -> String {
    let mut s = format!("# n={} d={} seed={}\n", g.n(), g.degree(), g.seed());
    for (u, v) in g.edges() {
        let _ = writeln!(s, "{u} {v}");
    }
    s
}

pub fn read_edge_list(path: &Path) -> Result<Graph, IoError> {
    let text = fs::read_to_string(path).map_err(fs_err(path))?;
    let bad = |line: usize, message: &str| IoError::Format { path: path.to_path_buf(), line, message: message.to_string() };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let mut n = None;
    let mut d = None;
    let mut seed = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("d", v)) => d = v.parse::<usize>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            _ => return Err(bad(1, "malformed header")),
        }
    }
    let (n, d, seed) = match (n, d, seed) {
        (Some(n), Some(d), Some(s)) => (n, d, s),
        _ => return Err(bad(1, "header needs n, d and seed")),
    };
    let mut edges = Vec::new();
    for (i, line) in lines {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(i + 1, "expected `u v`"));
        };
        match (a.parse(), b.parse()) {
            (Ok(u), Ok(v)) => edges.push((u, v)),
            _ => return Err(bad(i + 1, "vertex ids must be integers")),
        }
    }
    Graph::from_edges(n, d, seed, &edges).map_err(|source| IoError::Graph { path: path.to_path_buf(), source })
}

/// `vertex,value` rows.
pub fn field_csv(f: &Field) -> String {
    let mut s = String::from("vertex,value\n");
    for (x, v) in f.values.iter().enumerate() {
        let _ = writeln!(s, "{x},{v}");
    }
    s
}

#[derive(Debug, Serialize)]
pub struct FieldSidecar {
    pub provenance: &'static str,
    pub seed: u64,
    pub t: Option<f64>,
    pub k_max: Option<usize>,
    pub n: usize,
}

pub fn field_sidecar(f: &Field) -> FieldSidecar {
    FieldSidecar { provenance: f.provenance.as_str(), seed: f.seed, t: f.t, k_max: f.k_max, n: f.len() }
}

/// `i,j,value` rows for the upper triangle including the diagonal.
pub fn covariance_csv(n: usize, entry: impl Fn(usize, usize) -> f64) -> String {
    let mut s = String::from("i,j,value\n");
    for i in 0..n {
        for j in i..n {
            let _ = writeln!(s, "{i},{j},{}", entry(i, j));
        }
    }
    s
}

/// CSV with a header row; every row is pre-formatted.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<str>,
{
    let mut s = String::with_capacity(64);
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r.as_ref());
        s.push('\n');
    }
    s
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// One compact JSON object per line.
pub fn json_lines<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("serialisable"));
        s.push('\n');
    }
    s
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects the data files of one run in an output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(root).map_err(fs_err(root))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), IoError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(fs_err(&path))?;
        self.files.push(FileEntry { path: name.to_string(), bytes: contents.len(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }
}
