//! One-hot graph encoder embedding: a column-normalized one-hot projection
//! built from the labels, applied to the adjacency by sparse multiplication.
//!
//! `Z(i,k)` is the (weight) sum of vertex i's edges into class k divided by
//! the class count `n_k`, so the whole embedding costs `O(nK + s)`. Vertices
//! with unknown labels contribute nothing to the projection but still
//! receive embedding rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelVector, SparseGraph};

/// A contiguous group of embedding columns and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBlock {
    pub offset: usize,
    pub width: usize,
    pub tag: String,
}

/// Dense row-major n x d embedding. Columns arrive in blocks, one per
/// embedding pass, and concatenation only ever appends blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    d: usize,
    values: Vec<f64>,
    column_blocks: Vec<ColumnBlock>,
}

impl Embedding {
    pub fn zeros(n: usize, d: usize, tag: impl Into<String>) -> Self {
        Embedding {
            n,
            d,
            values: vec![0.0; n * d],
            column_blocks: vec![ColumnBlock {
                offset: 0,
                width: d,
                tag: tag.into(),
            }],
        }
    }

    pub fn from_values(n: usize, d: usize, values: Vec<f64>, tag: impl Into<String>) -> Self {
        assert_eq!(values.len(), n * d);
        Embedding {
            n,
            d,
            values,
            column_blocks: vec![ColumnBlock {
                offset: 0,
                width: d,
                tag: tag.into(),
            }],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.d + k]
    }

    pub(crate) fn set(&mut self, i: usize, k: usize, v: f64) {
        self.values[i * self.d + k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_blocks(&self) -> &[ColumnBlock] {
        &self.column_blocks
    }

    /// Column-concatenate `other` onto `self` (same vertex count); the
    /// appended blocks keep their tags with shifted offsets.
    pub fn hconcat(&self, other: &Embedding) -> Result<Embedding> {
        if self.n != other.n {
            return Err(Error::shape(format!(
                "cannot concatenate embeddings with {} and {} rows",
                self.n, other.n
            )));
        }
        let d = self.d + other.d;
        let mut values = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
        }
        let mut column_blocks = self.column_blocks.clone();
        for b in &other.column_blocks {
            column_blocks.push(ColumnBlock {
                offset: b.offset + self.d,
                width: b.width,
                tag: b.tag.clone(),
            });
        }
        Ok(Embedding {
            n: self.n,
            d,
            values,
            column_blocks,
        })
    }

    /// Row subset in the given order (fold selection).
    pub fn select_rows(&self, idx: &[usize]) -> Embedding {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Embedding {
            n: idx.len(),
            d: self.d,
            values,
            column_blocks: self.column_blocks.clone(),
        }
    }

    /// Prefix every block tag, e.g. with the graph of origin.
    pub fn prefix_tags(&mut self, prefix: &str) {
        for b in &mut self.column_blocks {
            b.tag = format!("{prefix}{}", b.tag);
        }
    }

    /// Rename the tag of a single-block embedding.
    pub fn retag(&mut self, tag: impl Into<String>) {
        assert_eq!(self.column_blocks.len(), 1, "retag expects a single block");
        self.column_blocks[0].tag = tag.into();
    }

    /// One CSV row of embedding values per vertex (no header).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for i in 0..self.n {
            let row = self.row(i);
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON sidecar describing the column blocks.
    pub fn write_blocks_json(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            schema_version: u32,
            n: usize,
            d: usize,
            blocks: &'a [ColumnBlock],
        }
        let sidecar = Sidecar {
            schema_version: 1,
            n: self.n,
            d: self.d,
            blocks: &self.column_blocks,
        };
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &sidecar)
            .map_err(|e| Error::params(format!("json write failed: {e}")))?;
        out.flush()?;
        Ok(())
    }
}

/// The column-normalized one-hot projection: `W(i,k) = 1/n_k` when
/// `Y(i) = k`, zero otherwise. Rows of unknown-label vertices are zero.
#[derive(Debug, Clone)]
pub struct OneHotWeights {
    labels: Vec<u32>,
    /// 1/n_k for k = 1..=K.
    col_scale: Vec<f64>,
}

impl OneHotWeights {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.col_scale.len()
    }

    /// W(i, k) with k zero-based.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        if self.labels[i] == k as u32 + 1 {
            self.col_scale[k]
        } else {
            0.0
        }
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.col_scale[k]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.k()).map(|k| self.entry(i, k)).collect())
            .collect()
    }
}

/// Build the normalized one-hot projection. Every class `1..=K` must have
/// at least one labelled vertex; compact the labels first otherwise.
pub fn one_hot_weights(y: &LabelVector) -> Result<OneHotWeights> {
    let k = y.num_classes();
    if k == 0 {
        return Err(Error::DegenerateModel(
            "no known labels: the projection would be empty".into(),
        ));
    }
    let counts = y.class_counts();
    let mut col_scale = Vec::with_capacity(k as usize);
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::DegenerateClass {
                class: idx as u32 + 1,
            });
        }
        col_scale.push(1.0 / c as f64);
    }
    Ok(OneHotWeights {
        labels: y.labels().to_vec(),
        col_scale,
    })
}

/// The graph encoder embedding `Z = A W` computed sparsely: for each edge
/// (i, j) with known label `Y(j) = k`, add `w(i,j)/n_k` to `Z(i,k)`.
pub fn gee_embed(g: &SparseGraph, y: &LabelVector) -> Result<Embedding> {
    if y.len() != g.n() {
        return Err(Error::shape(format!(
            "labels have length {} but the graph has {} vertices",
            y.len(),
            g.n()
        )));
    }
    let w = one_hot_weights(y)?;
    let k = w.k();
    let mut z = Embedding::zeros(g.n(), k, "gee");
    for i in 0..g.n() {
        let (cols, ws) = g.row(i);
        let out = &mut z.values[i * k..(i + 1) * k];
        match ws {
            Some(ws) => {
                for (&j, &wij) in cols.iter().zip(ws) {
                    let yj = w.labels[j as usize];
                    if yj > 0 {
                        out[(yj - 1) as usize] += wij * w.col_scale[(yj - 1) as usize];
                    }
                }
            }
            None => {
                for &j in cols {
                    let yj = w.labels[j as usize];
                    if yj > 0 {
                        out[(yj - 1) as usize] += w.col_scale[(yj - 1) as usize];
                    }
                }
            }
        }
    }
    Ok(z)
}
