//! Plain-text dataset directories.
//!
//! * `edges.tsv`: one `u<TAB>v` pair per line, 0-based, each undirected edge
//!   once.
//! * `features.csv`: `n` rows of `d` comma-separated reals.
//! * `labels.csv`: `n` rows, one class index per row.
//! * `splits.json`: `{"train": [...], "val": [...], "test": [...]}`.
//!
//! The node count is the number of feature rows. Errors name the file and
//! the 1-based line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rhgcn_core::{Matrix, NodeDataset, SparseGraph, Splits};

use crate::error::CliError;

pub const EDGES: &str = "edges.tsv";
pub const FEATURES: &str = "features.csv";
pub const LABELS: &str = "labels.csv";
pub const SPLITS: &str = "splits.json";

fn reader(dir: &Path, name: &str, delimiter: u8) -> Result<csv::Reader<File>, CliError> {
    let path = dir.join(name);
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).delimiter(delimiter).flexible(true).from_reader(file))
}

/// Reads every record as trimmed fields with its line number.
fn records(dir: &Path, name: &str, delimiter: u8) -> Result<Vec<(u64, Vec<String>)>, CliError> {
    let mut rdr = reader(dir, name, delimiter)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Format(format!("{name} line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(name: &str, line: u64, s: &str, what: &str) -> Result<T, CliError> {
    s.parse().map_err(|_| CliError::Format(format!("{name} line {line}: cannot read {s:?} as {what}")))
}

pub fn load_dataset(dir: &Path) -> Result<NodeDataset, CliError> {
    let feature_rows = records(dir, FEATURES, b',')?;
    let n = feature_rows.len();
    if n == 0 {
        return Err(CliError::Format(format!("{FEATURES} has no rows")));
    }
    let d = feature_rows[0].1.len();
    let mut values = Vec::with_capacity(n * d);
    for (line, row) in &feature_rows {
        if row.len() != d {
            return Err(CliError::Format(format!("{FEATURES} line {line}: {} values, expected {d}", row.len())));
        }
        for s in row {
            let v: f64 = field(FEATURES, *line, s, "a real number")?;
            if !v.is_finite() {
                return Err(CliError::Format(format!("{FEATURES} line {line}: non-finite value {s:?}")));
            }
            values.push(v);
        }
    }
    let features = Matrix::from_vec(n, d, values)?;

    let label_rows = records(dir, LABELS, b',')?;
    if label_rows.len() != n {
        return Err(CliError::Format(format!("{LABELS} has {} rows, {FEATURES} has {n}", label_rows.len())));
    }
    let mut labels = Vec::with_capacity(n);
    for (line, row) in &label_rows {
        if row.len() != 1 {
            return Err(CliError::Format(format!("{LABELS} line {line}: expected one class index")));
        }
        labels.push(field::<usize>(LABELS, *line, &row[0], "a class index")?);
    }

    let mut edges = Vec::new();
    for (line, row) in records(dir, EDGES, b'\t')? {
        if row.len() != 2 {
            return Err(CliError::Format(format!(
                "{EDGES} line {line}: expected `u<TAB>v`, found {} fields",
                row.len()
            )));
        }
        let u: usize = field(EDGES, line, &row[0], "a node id")?;
        let v: usize = field(EDGES, line, &row[1], "a node id")?;
        if u >= n || v >= n {
            return Err(CliError::Format(format!("{EDGES} line {line}: node id out of range for {n} nodes")));
        }
        edges.push((u, v));
    }
    let graph = SparseGraph::new(n, &edges)?;

    let path = dir.join(SPLITS);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    #[derive(serde::Deserialize)]
    struct RawSplits {
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    }
    let raw: RawSplits =
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{SPLITS} line {}: {e}", e.line())))?;
    let splits = Splits { train: raw.train, val: raw.val, test: raw.test };
    NodeDataset::new(graph, features, labels, splits).map_err(|e| CliError::Format(format!("{}: {e}", dir.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(&path, e))
}

/// Writes `data` in the directory format; values round-trip exactly.
pub fn write_dataset(dir: &Path, data: &NodeDataset) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let io = |name: &str| {
        let path = dir.join(name);
        move |e: std::io::Error| CliError::io(&path, e)
    };
    let mut w = create(dir, EDGES)?;
    for &(u, v) in data.graph.edges() {
        writeln!(w, "{u}\t{v}").map_err(io(EDGES))?;
    }
    w.flush().map_err(io(EDGES))?;

    let mut w = create(dir, FEATURES)?;
    for row in data.features.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io(FEATURES))?;
    }
    w.flush().map_err(io(FEATURES))?;

    let mut w = create(dir, LABELS)?;
    for l in &data.labels {
        writeln!(w, "{l}").map_err(io(LABELS))?;
    }
    w.flush().map_err(io(LABELS))?;

    let s = &data.splits;
    let json = serde_json::json!({ "train": s.train, "val": s.val, "test": s.test });
    let mut w = create(dir, SPLITS)?;
    writeln!(w, "{json}").map_err(io(SPLITS))?;
    w.flush().map_err(io(SPLITS))
}
