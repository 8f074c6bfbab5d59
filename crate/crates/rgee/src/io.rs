//! Text formats: whitespace edge lists, one-label-per-line files, and CSV
//! exports.
//!
//! Edge-list files hold one `src dst [weight]` triple per line; the weight
//! defaults to 1. Lines starting with `#` are comments, except that the
//! header comments `# n=<count>` and `# undirected` are honored when they
//! appear before any data. Writing a graph and re-loading it reproduces the
//! graph exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{LabelVector, SparseGraph};

/// How to interpret an edge-list file.
#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeListFormat {
    /// Vertex ids in the file start at 1 instead of 0.
    pub one_based: bool,
    /// Explicit vertex count; overrides any `# n=` header. When neither is
    /// present, n is one past the largest index seen.
    pub declared_n: Option<usize>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Load an edge list. Duplicate edges collapse by summing weights and
/// self-loops are dropped.
pub fn load_edge_list(path: impl AsRef<Path>, fmt: EdgeListFormat) -> Result<SparseGraph> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);

    let mut header_n: Option<usize> = None;
    let mut undirected = false;
    let mut seen_data = false;
    let mut max_index: Option<u64> = None;
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if !seen_data {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("n=") {
                    header_n = Some(v.trim().parse().map_err(|_| {
                        parse_err(path, lineno, format!("invalid vertex count {v:?}"))
                    })?);
                } else if rest == "undirected" {
                    undirected = true;
                }
            }
            continue;
        }
        seen_data = true;

        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected `src dst [weight]`, got {trimmed:?}"),
            ));
        }
        let mut idx = [0u64; 2];
        for (slot, tok) in idx.iter_mut().zip(&tokens) {
            let raw: u64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid vertex id {tok:?}")))?;
            *slot = if fmt.one_based {
                raw.checked_sub(1).ok_or_else(|| {
                    parse_err(path, lineno, "vertex id 0 in a 1-based file".to_string())
                })?
            } else {
                raw
            };
        }
        let w: f64 = match tokens.get(2) {
            Some(tok) => tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid weight {tok:?}")))?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(parse_err(path, lineno, format!("invalid weight {w}")));
        }
        max_index = Some(max_index.unwrap_or(0).max(idx[0]).max(idx[1]));
        if idx[0] != idx[1] {
            triples.push((idx[0] as u32, idx[1] as u32, w));
        }
    }

    let n = fmt
        .declared_n
        .or(header_n)
        .unwrap_or_else(|| max_index.map_or(0, |m| m as usize + 1));
    if let Some(m) = max_index {
        if m as usize >= n {
            return Err(Error::Bounds {
                what: "vertex",
                index: m as usize,
                size: n,
            });
        }
    }
    if undirected {
        SparseGraph::undirected(n, &triples)
    } else {
        SparseGraph::directed(n, &triples)
    }
}

/// Write an edge list that `load_edge_list` reproduces exactly. Undirected
/// graphs emit each edge once with `src < dst`; binary graphs omit the
/// weight column.
pub fn save_edge_list(g: &SparseGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# n={}", g.n())?;
    if g.is_undirected() {
        writeln!(out, "# undirected")?;
    }
    let binary = g.entries().all(|(_, _, w)| w == 1.0);
    for (i, j, w) in g.entries() {
        if g.is_undirected() && i > j {
            continue;
        }
        if binary {
            writeln!(out, "{i} {j}")?;
        } else {
            writeln!(out, "{i} {j} {w}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Load labels: one integer per line (0 = unknown), `#` comments allowed.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let y: u32 = trimmed
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("invalid label {trimmed:?}")))?;
        labels.push(y);
    }
    Ok(LabelVector::new(labels))
}

pub fn save_labels(y: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for &l in y.labels() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

/// CSV export: `src,dst,weight` with a header row.
pub fn save_graph_csv(g: &SparseGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "src,dst,weight")?;
    for (i, j, w) in g.entries() {
        if g.is_undirected() && i > j {
            continue;
        }
        writeln!(out, "{i},{j},{w}")?;
    }
    out.flush()?;
    Ok(())
}

/// CSV export: `vertex,label` with a header row.
pub fn save_labels_csv(y: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "vertex,label")?;
    for (v, &l) in y.labels().iter().enumerate() {
        writeln!(out, "{v},{l}")?;
    }
    out.flush()?;
    Ok(())
}
