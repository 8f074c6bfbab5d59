//! Iterative refinement of the encoder embedding: discriminant
//! self-training followed by latent community recovery.
//!
//! One pass (`gee_lda`) embeds the graph with the current labels, fits the
//! discriminant model, scores every vertex, and relabels each known-label
//! vertex to its argmax class; the mismatch vector flags vertices whose new
//! label disagrees with their input label. The driver (`refine`) repeats
//! passes while each one keeps resolving enough previously-mismatched
//! vertices, first with plain self-training, then moving persistently
//! mismatched vertices into fresh classes. Accepted passes concatenate
//! their score embeddings column-wise and append their labels to the
//! history, so the output keeps every stage of the refinement.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{gee_embed, Embedding};
use crate::error::{Error, Result};
use crate::graph::{LabelVector, SparseGraph};
use crate::lda::{fit_lda, lda_transform};

/// Loop caps and stopping thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Max self-training passes.
    pub gamma_y: usize,
    /// Max latent-community passes.
    pub gamma_k: usize,
    /// Fractional stop threshold in [0, 1].
    pub epsilon: f64,
    /// Absolute stop threshold.
    pub epsilon_n: usize,
    /// Use the classical half-quadratic discriminant rule inside passes
    /// instead of the default unscaled one.
    pub classic_lda_half: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            gamma_y: 5,
            gamma_k: 5,
            epsilon: 0.3,
            epsilon_n: 5,
            classic_lda_half: false,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::params(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// 0/1 flags for vertices whose self-trained label disagreed with their
/// input label. Set only where the input label was known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MismatchVector {
    delta: Vec<u8>,
}

impl MismatchVector {
    pub fn new(delta: Vec<u8>) -> Self {
        debug_assert!(delta.iter().all(|&d| d <= 1));
        MismatchVector { delta }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.delta[i] == 1
    }

    pub fn count(&self) -> usize {
        self.delta.iter().map(|&d| d as usize).sum()
    }

    /// Elementwise product with another mismatch vector.
    pub fn and(&self, other: &MismatchVector) -> MismatchVector {
        assert_eq!(self.len(), other.len());
        MismatchVector {
            delta: self
                .delta
                .iter()
                .zip(&other.delta)
                .map(|(&a, &b)| a & b)
                .collect(),
        }
    }

    pub fn and_count(&self, other: &MismatchVector) -> usize {
        assert_eq!(self.len(), other.len());
        self.delta
            .iter()
            .zip(&other.delta)
            .map(|(&a, &b)| (a & b) as usize)
            .sum()
    }
}

/// One self-training pass: embed, transform, argmax-relabel.
///
/// Unknown-label vertices keep label 0 and are never flagged. Argmax ties
/// break toward the smallest class index.
pub fn gee_lda(
    g: &SparseGraph,
    y: &LabelVector,
    classic_lda_half: bool,
) -> Result<(Embedding, LabelVector, MismatchVector)> {
    let z = gee_embed(g, y)?;
    let model = fit_lda(&z, y)?;
    let scores = lda_transform(&z, &model, classic_lda_half)?;

    let k = scores.d();
    let mut labels = Vec::with_capacity(scores.n());
    let mut delta = Vec::with_capacity(scores.n());
    for i in 0..scores.n() {
        if y.get(i) == 0 {
            labels.push(0);
            delta.push(0);
            continue;
        }
        let row = scores.row(i);
        let mut best = 0usize;
        for c in 1..k {
            if row[c] > row[best] {
                best = c;
            }
        }
        let label = best as u32 + 1;
        delta.push(u8::from(label != y.get(i)));
        labels.push(label);
    }
    Ok((scores, LabelVector::new(labels), MismatchVector::new(delta)))
}

/// Stopping rule: stop when the pass failed to resolve enough of the
/// previously mismatched vertices, i.e. when
///
/// `sum(d1) - max(sum(d1) * epsilon, epsilon_n) < sum(d1 .* d2)`.
pub fn stop_check(d1: &MismatchVector, d2: &MismatchVector, cfg: &RefineConfig) -> bool {
    let s1 = d1.count() as f64;
    let s12 = d1.and_count(d2) as f64;
    s1 - (s1 * cfg.epsilon).max(cfg.epsilon_n as f64) < s12
}

/// Move flagged vertices into fresh classes by adding `k_current` to their
/// label, then renumber classes to consecutive `1..=K'`. Returns the new
/// labels and the renumbering map over the raw (pre-renumber) label space.
pub fn latent_relabel(
    y1: &LabelVector,
    delta: &MismatchVector,
    k_current: u32,
) -> (LabelVector, Vec<u32>) {
    assert_eq!(y1.len(), delta.len());
    let raw: Vec<u32> = y1
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if delta.is_set(i) {
                debug_assert!(l > 0, "mismatch flag on an unknown-label vertex");
                l + k_current
            } else {
                l
            }
        })
        .collect();
    LabelVector::new(raw).compact()
}

/// Why a refinement loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The stopping rule fired.
    CriterionMet,
    /// The iteration cap was reached.
    IterationCap,
    /// A pass left fewer than two classes to fit.
    DegenerateLabels,
}

/// Stop reason per loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopReasons {
    pub self_training: StopReason,
    pub latent: StopReason,
}

/// A class renumbering applied while accepting a pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactionRecord {
    /// 1-based index of the accepted pass the renumbering belongs to.
    pub pass: usize,
    /// `map[k-1]` is the new label of old class `k`; 0 = class removed.
    pub map: Vec<u32>,
}

/// Output of the full refinement.
#[derive(Debug, Clone)]
pub struct RefineResult {
    /// All accepted passes' score embeddings, column-concatenated.
    pub embedding: Embedding,
    /// Input labels first, then the labels of each accepted pass
    /// (renumbered to consecutive classes; see `compaction_maps`).
    pub label_history: Vec<LabelVector>,
    /// Active mismatch count after each accepted pass.
    pub mismatch_history: Vec<usize>,
    /// Distinct nonzero classes in the final labels.
    pub final_k: u32,
    pub stop_reasons: StopReasons,
    /// For each final class: was it created by latent relabeling?
    pub class_is_new: Vec<bool>,
    pub compaction_maps: Vec<CompactionRecord>,
    /// Configuration the run used.
    pub config: RefineConfig,
}

impl RefineResult {
    /// Labels after the last accepted pass.
    pub fn final_labels(&self) -> &LabelVector {
        self.label_history.last().expect("history is never empty")
    }

    /// Number of accepted passes (embedding blocks).
    pub fn num_passes(&self) -> usize {
        self.embedding.column_blocks().len()
    }
}

/// Mutable loop state; `accept` folds one pass into it.
struct RefineState {
    embedding: Embedding,
    history: Vec<LabelVector>,
    mismatch_history: Vec<usize>,
    y1: LabelVector,
    d1: MismatchVector,
    /// Per-class flag, aligned with `y1`'s (consecutive) classes.
    is_new: Vec<bool>,
    pass: usize,
    records: Vec<CompactionRecord>,
}

impl RefineState {
    /// Compact `y`, permute the per-class flags to the new numbering, and
    /// record the map when it renumbered anything.
    fn commit_labels(&mut self, y: LabelVector, is_new: &[bool]) -> (LabelVector, Vec<bool>) {
        let (compacted, map) = y.compact();
        let mut flags = vec![false; compacted.num_classes() as usize];
        for (old, &new) in map.iter().enumerate() {
            if new > 0 {
                flags[(new - 1) as usize] = is_new.get(old).copied().unwrap_or(false);
            }
        }
        if !is_identity(&map) {
            self.records.push(CompactionRecord {
                pass: self.pass,
                map,
            });
        }
        (compacted, flags)
    }

    fn accept(
        &mut self,
        mut z2: Embedding,
        y2: LabelVector,
        d2: &MismatchVector,
        is_new_for_pass: Vec<bool>,
        phase: &str,
    ) -> Result<()> {
        self.pass += 1;
        z2.retag(format!("pass{}:{}", self.pass, phase));
        let (committed, flags) = self.commit_labels(y2, &is_new_for_pass);
        self.embedding = self.embedding.hconcat(&z2)?;
        self.y1 = committed;
        self.is_new = flags;
        self.history.push(self.y1.clone());
        self.d1 = self.d1.and(d2);
        self.mismatch_history.push(self.d1.count());
        Ok(())
    }
}

fn is_identity(map: &[u32]) -> bool {
    map.iter().enumerate().all(|(i, &m)| m == i as u32 + 1)
}

/// Full refinement: an initial pass, then self-training and latent
/// community loops guarded by the stopping rule. Deterministic.
pub fn refine(g: &SparseGraph, y: &LabelVector, cfg: &RefineConfig) -> Result<RefineResult> {
    cfg.validate()?;

    let (mut z1, y_first, d_first) = gee_lda(g, y, cfg.classic_lda_half)?;
    z1.retag("pass1:init");
    let d_count = d_first.count();
    let mut state = RefineState {
        embedding: z1,
        history: vec![y.clone()],
        mismatch_history: vec![d_count],
        y1: LabelVector::new(vec![]),
        d1: d_first,
        is_new: vec![],
        pass: 1,
        records: Vec::new(),
    };
    let (committed, flags) = state.commit_labels(y_first, &[]);
    state.y1 = committed;
    state.is_new = flags;
    state.history.push(state.y1.clone());

    // Self-training: re-embed with the self-trained labels.
    let mut self_reason = StopReason::IterationCap;
    for _ in 0..cfg.gamma_y {
        let (z2, y2, d2) = match gee_lda(g, &state.y1, cfg.classic_lda_half) {
            Ok(t) => t,
            Err(Error::DegenerateModel(_)) | Err(Error::DegenerateClass { .. }) => {
                self_reason = StopReason::DegenerateLabels;
                break;
            }
            Err(e) => return Err(e),
        };
        if stop_check(&state.d1, &d2, cfg) {
            self_reason = StopReason::CriterionMet;
            break;
        }
        let carry = state.is_new.clone();
        state.accept(z2, y2, &d2, carry, "self")?;
    }

    // Latent recovery: move persistently mismatched vertices into fresh
    // classes before each pass. A rejected pass leaves the labels as they
    // were, so its relabeling is discarded along with it.
    let mut latent_reason = StopReason::IterationCap;
    for _ in 0..cfg.gamma_k {
        let k_cur = state.y1.num_classes();
        let (y_rel, relabel_map) = latent_relabel(&state.y1, &state.d1, k_cur);
        let mut is_new_rel = vec![false; y_rel.num_classes() as usize];
        for (old, &new) in relabel_map.iter().enumerate() {
            if new > 0 {
                is_new_rel[(new - 1) as usize] = old as u32 >= k_cur || state.is_new[old];
            }
        }
        let (z2, y2, d2) = match gee_lda(g, &y_rel, cfg.classic_lda_half) {
            Ok(t) => t,
            Err(Error::DegenerateModel(_)) | Err(Error::DegenerateClass { .. }) => {
                latent_reason = StopReason::DegenerateLabels;
                break;
            }
            Err(e) => return Err(e),
        };
        if stop_check(&state.d1, &d2, cfg) {
            latent_reason = StopReason::CriterionMet;
            break;
        }
        if !is_identity(&relabel_map) {
            state.records.push(CompactionRecord {
                pass: state.pass + 1,
                map: relabel_map,
            });
        }
        state.accept(z2, y2, &d2, is_new_rel, "latent")?;
    }

    let final_k = state.y1.num_classes();
    Ok(RefineResult {
        embedding: state.embedding,
        label_history: state.history,
        mismatch_history: state.mismatch_history,
        final_k,
        stop_reasons: StopReasons {
            self_training: self_reason,
            latent: latent_reason,
        },
        class_is_new: state.is_new,
        compaction_maps: state.records,
        config: cfg.clone(),
    })
}

#[derive(Serialize)]
struct RefineMetadata<'a> {
    schema_version: u32,
    n: usize,
    input_k: u32,
    final_k: u32,
    passes: usize,
    mismatch_history: &'a [usize],
    stop_reasons: StopReasons,
    compaction_maps: &'a [CompactionRecord],
    class_is_new: &'a [bool],
    config: &'a RefineConfig,
    blocks: &'a [crate::embed::ColumnBlock],
}

impl RefineResult {
    /// Write `embedding.csv`, `embedding_blocks.json`, `label_history.csv`,
    /// and `metadata.json` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.embedding.write_csv(dir.join("embedding.csv"))?;
        self.embedding
            .write_blocks_json(dir.join("embedding_blocks.json"))?;

        let mut out = BufWriter::new(File::create(dir.join("label_history.csv"))?);
        write!(out, "input")?;
        for p in 1..self.label_history.len() {
            write!(out, ",pass{p}")?;
        }
        writeln!(out)?;
        let n = self.label_history[0].len();
        for i in 0..n {
            for (c, col) in self.label_history.iter().enumerate() {
                if c > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{}", col.get(i))?;
            }
            writeln!(out)?;
        }
        out.flush()?;

        let meta = RefineMetadata {
            schema_version: 1,
            n,
            input_k: self.label_history[0].num_classes(),
            final_k: self.final_k,
            passes: self.num_passes(),
            mismatch_history: &self.mismatch_history,
            stop_reasons: self.stop_reasons,
            compaction_maps: &self.compaction_maps,
            class_is_new: &self.class_is_new,
            config: &self.config,
            blocks: self.embedding.column_blocks(),
        };
        let mut out = BufWriter::new(File::create(dir.join("metadata.json"))?);
        serde_json::to_writer_pretty(&mut out, &meta)
            .map_err(|e| Error::params(format!("json write failed: {e}")))?;
        out.flush()?;
        Ok(())
    }
}
