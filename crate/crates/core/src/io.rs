//! Text formats: edge lists, dense CSV matrices, latent position CSV and
//! versioned JSON envelopes.
//!
//! Edge lists hold one `i j` (binary undirected) or `i j w` (weighted
//! directed) record per line with 0-based vertex indices. Lines starting with
//! `#` are comments; a `# n=<count>` comment fixes the vertex count so that
//! trailing isolated vertices survive a round trip, and `# kind=...` forces
//! the graph kind.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyKind, AdjacencyMatrix, LatentPositionMatrix};

/// Version tag carried by every JSON document the crate writes.
pub const SCHEMA_VERSION: &str = "1.0";

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn kind_name(kind: AdjacencyKind) -> &'static str {
    match kind {
        AdjacencyKind::BinaryUndirected => "binary-undirected",
        AdjacencyKind::WeightedDirected => "weighted-directed",
    }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{tok}' is not a vertex index")))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{tok}' is not a number")))
}

pub fn parse_edge_list(text: &str) -> Result<AdjacencyMatrix> {
    let mut declared_n: Option<usize> = None;
    let mut declared_kind: Option<AdjacencyKind> = None;
    let mut records: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(comment) = s.strip_prefix('#') {
            let c = comment.trim();
            if let Some(v) = c.strip_prefix("n=") {
                declared_n = Some(parse_usize(v.trim(), line)?);
            } else if let Some(v) = c.strip_prefix("kind=") {
                declared_kind = Some(match v.trim() {
                    "binary-undirected" => AdjacencyKind::BinaryUndirected,
                    "weighted-directed" => AdjacencyKind::WeightedDirected,
                    other => return Err(Error::Parse(format!("line {line}: unknown graph kind '{other}'"))),
                });
            }
            continue;
        }
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks.len() {
            2 => records.push((parse_usize(toks[0], line)?, parse_usize(toks[1], line)?, None)),
            3 => records.push((
                parse_usize(toks[0], line)?,
                parse_usize(toks[1], line)?,
                Some(parse_f64(toks[2], line)?),
            )),
            c => return Err(Error::Parse(format!("line {line}: expected 2 or 3 fields, found {c}"))),
        }
    }
    let max_index = records.iter().map(|r| r.0.max(r.1) + 1).max().unwrap_or(0);
    let n = match declared_n {
        Some(n) if n < max_index => {
            return Err(Error::validation(format!(
                "declared n={n} but an edge uses vertex {}",
                max_index - 1
            )))
        }
        Some(n) => n,
        None => max_index,
    };
    let weighted = records.iter().any(|r| r.2.is_some());
    let kind = declared_kind.unwrap_or(if weighted {
        AdjacencyKind::WeightedDirected
    } else {
        AdjacencyKind::BinaryUndirected
    });
    match kind {
        AdjacencyKind::BinaryUndirected => {
            let mut edges = Vec::with_capacity(records.len());
            for (i, j, w) in records {
                match w {
                    None => edges.push((i, j)),
                    Some(w) if w == 1.0 => edges.push((i, j)),
                    Some(0.0) => {}
                    Some(w) => {
                        return Err(Error::validation(format!(
                            "edge ({i}, {j}) has weight {w} in a binary graph"
                        )))
                    }
                }
            }
            AdjacencyMatrix::from_edges(n, &edges)
        }
        AdjacencyKind::WeightedDirected => {
            let mut entries = vec![0.0; n * n];
            for (i, j, w) in records {
                entries[i * n + j] = w.unwrap_or(1.0);
            }
            AdjacencyMatrix::from_weighted(n, entries)
        }
    }
}

pub fn format_edge_list(a: &AdjacencyMatrix) -> String {
    let mut out = format!("# n={}\n# kind={}\n", a.n(), kind_name(a.kind()));
    for (i, j, w) in a.edges() {
        match a.kind() {
            AdjacencyKind::BinaryUndirected => writeln!(out, "{i} {j}"),
            AdjacencyKind::WeightedDirected => writeln!(out, "{i} {j} {w}"),
        }
        .expect("writing to a string");
    }
    out
}

/// Numeric CSV rows, skipping `#` comments and a non-numeric header line.
pub fn parse_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut first_data = true;
    for (k, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if first_data => {}
            Err(_) => return Err(Error::Parse(format!("line {}: non-numeric field", k + 1))),
        }
        first_data = false;
    }
    Ok(rows)
}

/// Dense adjacency from CSV: a symmetric 0/1 matrix is read as a binary
/// undirected graph, anything else as weighted directed.
pub fn parse_dense_csv(text: &str) -> Result<AdjacencyMatrix> {
    let rows = parse_numeric_csv(text)?;
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::validation(format!("row {i} has {} fields, expected {n}", r.len())));
    }
    let entries: Vec<f64> = rows.concat();
    let binary = entries.iter().all(|&v| v == 0.0 || v == 1.0);
    let symmetric = (0..n).all(|i| (0..i).all(|j| entries[i * n + j] == entries[j * n + i]));
    if binary && symmetric {
        AdjacencyMatrix::from_binary_dense(n, &entries)
    } else {
        AdjacencyMatrix::from_weighted(n, entries)
    }
}

pub fn format_dense_csv(a: &AdjacencyMatrix) -> String {
    let n = a.n();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}", a.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads a graph: `.csv` files as dense matrices, anything else as an edge
/// list.
pub fn read_graph(path: &Path) -> Result<AdjacencyMatrix> {
    let text = read_text(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let parsed = if is_csv { parse_dense_csv(&text) } else { parse_edge_list(&text) };
    parsed.map_err(|e| e.context(&path.display().to_string()))
}

pub fn parse_latent_csv(text: &str) -> Result<LatentPositionMatrix> {
    LatentPositionMatrix::from_rows(&parse_numeric_csv(text)?)
}

/// CSV of a row matrix with an optional header and `#` comment lines.
pub fn format_rows_csv(rows: impl IntoIterator<Item = Vec<f64>>, header: Option<&[&str]>, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}").expect("writing to a string");
        }
    }
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn format_latent_csv(x: &LatentPositionMatrix, comments: &[String]) -> String {
    let header: Vec<String> = (1..=x.d()).map(|k| format!("x{k}")).collect();
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    format_rows_csv(x.rows().map(<[f64]>::to_vec), Some(&refs), comments)
}

/// `{"schema_version", "command", "config", "result"}` envelope.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub result: &'a R,
}

pub fn to_json<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    serde_json::to_string_pretty(&env)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Parse(format!("json serialization failed: {e}")))
}
