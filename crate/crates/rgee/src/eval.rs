//! Evaluation harness: discriminant classification, stratified k-fold
//! cross-validation with test labels zeroed before embedding, latent
//! community recovery scoring, multiplex embedding, and the runtime
//! scaling benchmark.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{gee_embed, Embedding};
use crate::error::{Error, Result};
use crate::graph::{Dataset, LabelVector, SparseGraph};
use crate::lda::{fit_lda, lda_transform};
use crate::refine::{refine, RefineConfig};
use crate::sbm::{builtin_model, merge_labels, sample_sbm, BuiltinModel};

/// Embedding method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Encoder embedding with observed labels.
    Gee,
    /// Refined encoder embedding with observed labels.
    Rgee,
    /// Encoder embedding with the latent ground-truth labels.
    Gee0,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gee" => Ok(Method::Gee),
            "rgee" => Ok(Method::Rgee),
            "gee0" => Ok(Method::Gee0),
            other => Err(Error::params(format!(
                "unknown method {other:?}; expected gee, rgee, or gee0"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Gee => write!(f, "gee"),
            Method::Rgee => write!(f, "rgee"),
            Method::Gee0 => write!(f, "gee0"),
        }
    }
}

/// Deterministic per-task seed derivation (splitmix64 of base ^ index).
pub fn derive_seed(base: u64, idx: u64) -> u64 {
    let mut z = base ^ (idx.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train a discriminant model on the training rows and predict argmax
/// classes for the test rows. Uses the classical half-quadratic rule by
/// default (`classic = true`).
pub fn lda_classify(
    train_z: &Embedding,
    train_y: &LabelVector,
    test_z: &Embedding,
    classic: bool,
) -> Result<LabelVector> {
    if train_z.d() != test_z.d() {
        return Err(Error::shape(format!(
            "train embedding has {} columns, test has {}",
            train_z.d(),
            test_z.d()
        )));
    }
    let model = fit_lda(train_z, train_y)?;
    let scores = lda_transform(test_z, &model, classic)?;
    let k = scores.d();
    let labels = (0..scores.n())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0usize;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best as u32 + 1
        })
        .collect();
    Ok(LabelVector::new(labels))
}

/// Stratified fold assignment: labelled vertices of each class are
/// shuffled and dealt round-robin, so per-fold class counts differ from
/// the ideal split by at most one vertex. Unknown-label vertices get
/// `u32::MAX` (never in any fold).
pub fn stratified_folds(y: &LabelVector, folds: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut assignment = vec![u32::MAX; y.len()];
    for class in 1..=y.num_classes() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y.get(i) == class).collect();
        members.shuffle(rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = (pos % folds) as u32;
        }
    }
    assignment
}

/// Cross-validation settings; `seeds` must hold one entry per replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSpec {
    pub method: Method,
    pub folds: usize,
    pub replicates: usize,
    pub seeds: Vec<u64>,
    pub refine: RefineConfig,
    /// Classifier scoring rule (classical half-quadratic by default).
    pub classic_classifier: bool,
}

impl CvSpec {
    pub fn new(method: Method, folds: usize, replicates: usize, base_seed: u64) -> Self {
        CvSpec {
            method,
            folds,
            replicates,
            seeds: (0..replicates as u64)
                .map(|r| derive_seed(base_seed, r))
                .collect(),
            refine: RefineConfig::default(),
            classic_classifier: true,
        }
    }
}

/// Cross-validation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub method: Method,
    pub folds: usize,
    pub replicates: usize,
    pub seeds: Vec<u64>,
    /// `per_fold_errors[replicate][fold]`
    pub per_fold_errors: Vec<Vec<f64>>,
    pub per_replicate_means: Vec<f64>,
    pub mean_error: f64,
    /// Sample standard deviation across replicate means (0 for a single
    /// replicate).
    pub std_dev: f64,
}

fn fold_error(d: &Dataset, spec: &CvSpec, assignment: &[u32], fold: u32) -> Result<f64> {
    let g = &d.graph;
    let y = &d.observed;
    let test_idx: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == fold).collect();
    let train_idx: Vec<usize> = (0..y.len())
        .filter(|&i| assignment[i] != u32::MAX && assignment[i] != fold)
        .collect();

    let zeroed = y.with_zeroed(&test_idx);
    let base = match spec.method {
        Method::Gee => gee_embed(g, &zeroed)?,
        Method::Rgee => refine(g, &zeroed, &spec.refine)?.embedding,
        Method::Gee0 => {
            let latent = d
                .latent
                .as_ref()
                .ok_or_else(|| Error::params("gee0 needs latent labels".to_string()))?;
            gee_embed(g, &latent.with_zeroed(&test_idx))?
        }
    };

    let train_z = base.select_rows(&train_idx);
    let test_z = base.select_rows(&test_idx);
    let train_y = LabelVector::new(train_idx.iter().map(|&i| y.get(i)).collect());
    let pred = lda_classify(&train_z, &train_y, &test_z, spec.classic_classifier)?;

    let wrong = test_idx
        .iter()
        .enumerate()
        .filter(|&(t, &i)| pred.get(t) != y.get(i))
        .count();
    Ok(wrong as f64 / test_idx.len().max(1) as f64)
}

/// Every observed class must appear in each fold's training portion.
fn assignment_is_trainable(y: &LabelVector, assignment: &[u32], folds: usize) -> bool {
    let k = y.num_classes() as usize;
    for fold in 0..folds as u32 {
        let mut seen = vec![false; k];
        for i in 0..y.len() {
            if assignment[i] != u32::MAX && assignment[i] != fold {
                seen[(y.get(i) - 1) as usize] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
    }
    true
}

/// Stratified k-fold cross-validation. Test-fold labels are zeroed before
/// the embedding is computed; the classifier is always trained against the
/// observed labels of the training rows. A replicate whose fold split
/// leaves a class absent from some training portion is re-drawn once.
pub fn kfold_cv(d: &Dataset, spec: &CvSpec) -> Result<CvReport> {
    if spec.folds < 2 {
        return Err(Error::params("need at least 2 folds".to_string()));
    }
    if spec.seeds.len() != spec.replicates {
        return Err(Error::params(format!(
            "{} seeds for {} replicates",
            spec.seeds.len(),
            spec.replicates
        )));
    }
    if d.observed.num_classes() < 2 {
        return Err(Error::DegenerateModel(
            "cross-validation needs at least 2 observed classes".into(),
        ));
    }

    let mut per_fold_errors = Vec::with_capacity(spec.replicates);
    for &seed in &spec.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = stratified_folds(&d.observed, spec.folds, &mut rng);
        if !assignment_is_trainable(&d.observed, &assignment, spec.folds) {
            assignment = stratified_folds(&d.observed, spec.folds, &mut rng);
            if !assignment_is_trainable(&d.observed, &assignment, spec.folds) {
                return Err(Error::DegenerateModel(format!(
                    "replicate seed {seed}: a class is missing from a training fold even after a redraw"
                )));
            }
        }
        let errors: Result<Vec<f64>> = (0..spec.folds as u32)
            .into_par_iter()
            .map(|fold| fold_error(d, spec, &assignment, fold))
            .collect();
        per_fold_errors.push(errors?);
    }

    let per_replicate_means: Vec<f64> = per_fold_errors
        .iter()
        .map(|e| e.iter().sum::<f64>() / e.len() as f64)
        .collect();
    let mean_error = per_replicate_means.iter().sum::<f64>() / per_replicate_means.len() as f64;
    let std_dev = if per_replicate_means.len() > 1 {
        let var = per_replicate_means
            .iter()
            .map(|m| (m - mean_error) * (m - mean_error))
            .sum::<f64>()
            / (per_replicate_means.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };

    Ok(CvReport {
        schema_version: 1,
        method: spec.method,
        folds: spec.folds,
        replicates: spec.replicates,
        seeds: spec.seeds.clone(),
        per_fold_errors,
        per_replicate_means,
        mean_error,
        std_dev,
    })
}

/// Cross-validation over freshly generated graphs: each replicate draws
/// its own graph from the model (seeded by the replicate seed) and runs a
/// single fold split on it. Matches the simulation protocol where graphs
/// are regenerated per replicate.
pub fn kfold_cv_regenerate(
    model: BuiltinModel,
    n: usize,
    spec: &CvSpec,
) -> Result<CvReport> {
    if spec.seeds.len() != spec.replicates {
        return Err(Error::params(format!(
            "{} seeds for {} replicates",
            spec.seeds.len(),
            spec.replicates
        )));
    }
    let (params, merge) = builtin_model(model);
    let mut per_fold_errors = Vec::with_capacity(spec.replicates);
    for &seed in &spec.seeds {
        let (g, latent) = sample_sbm(&params, n, seed)?;
        let observed = merge_labels(&latent, &merge)?;
        let d = Dataset::new(g, observed, Some(latent))?;
        let one = CvSpec {
            replicates: 1,
            seeds: vec![derive_seed(seed, 0x0f01d5)],
            ..spec.clone()
        };
        let report = kfold_cv(&d, &one)?;
        per_fold_errors.push(report.per_fold_errors.into_iter().next().unwrap());
    }

    let per_replicate_means: Vec<f64> = per_fold_errors
        .iter()
        .map(|e| e.iter().sum::<f64>() / e.len() as f64)
        .collect();
    let mean_error = per_replicate_means.iter().sum::<f64>() / per_replicate_means.len() as f64;
    let std_dev = if per_replicate_means.len() > 1 {
        let var = per_replicate_means
            .iter()
            .map(|m| (m - mean_error) * (m - mean_error))
            .sum::<f64>()
            / (per_replicate_means.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    Ok(CvReport {
        schema_version: 1,
        method: spec.method,
        folds: spec.folds,
        replicates: spec.replicates,
        seeds: spec.seeds.clone(),
        per_fold_errors,
        per_replicate_means,
        mean_error,
        std_dev,
    })
}

impl CvReport {
    /// Long-form CSV with `# key=value` metadata comments.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# schema=cv_report/{}", self.schema_version)?;
        writeln!(
            out,
            "# method={} folds={} replicates={}",
            self.method, self.folds, self.replicates
        )?;
        writeln!(
            out,
            "# seeds={}",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        writeln!(out, "# mean_error={}", self.mean_error)?;
        writeln!(out, "# std_dev={}", self.std_dev)?;
        writeln!(out, "replicate,fold,error")?;
        for (r, errors) in self.per_fold_errors.iter().enumerate() {
            for (f, e) in errors.iter().enumerate() {
                writeln!(out, "{r},{f},{e}")?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::params(format!("json write failed: {e}")))?;
        out.flush()?;
        Ok(())
    }
}

/// Latent-community recovery quality.
///
/// `precision` is over the discovered set D (vertices whose final class
/// was created by relabeling): the fraction whose latent class matches
/// their class's majority latent class. `recall` is over the hidden set H
/// (vertices whose latent class is non-modal within their observed
/// class): the fraction that was discovered and correctly mapped. Either
/// is `None` ("undefined") when its reference set is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub schema_version: u32,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// (new class, its majority latent class)
    pub community_map: Vec<(u32, u32)>,
    pub discovered: usize,
    pub hidden: usize,
}

pub fn latent_recovery(
    refine_out: &crate::refine::RefineResult,
    observed: &LabelVector,
    latent: &LabelVector,
) -> Result<RecoveryScore> {
    let finals = refine_out.final_labels();
    let n = finals.len();
    if observed.len() != n || latent.len() != n {
        return Err(Error::shape(format!(
            "label lengths differ: final {n}, observed {}, latent {}",
            observed.len(),
            latent.len()
        )));
    }
    let k0 = latent.num_classes() as usize;
    let final_space = finals.num_classes() as usize;

    // majority latent class per refined class (ties break to the smaller)
    let mut counts = vec![vec![0usize; k0]; final_space];
    for i in 0..n {
        let f = finals.get(i);
        if f > 0 && latent.get(i) > 0 {
            counts[(f - 1) as usize][(latent.get(i) - 1) as usize] += 1;
        }
    }
    let majority = |cnt: &[usize]| -> u32 {
        let mut best = 0usize;
        for k in 1..cnt.len() {
            if cnt[k] > cnt[best] {
                best = k;
            }
        }
        best as u32 + 1
    };
    let mut community_map = Vec::new();
    let mut class_major = vec![0u32; final_space];
    for c in 0..final_space {
        class_major[c] = majority(&counts[c]);
        let is_new = refine_out.class_is_new.get(c).copied().unwrap_or(false);
        if is_new && counts[c].iter().sum::<usize>() > 0 {
            community_map.push((c as u32 + 1, class_major[c]));
        }
    }

    // modal latent class within each observed class
    let k_obs = observed.num_classes() as usize;
    let mut obs_counts = vec![vec![0usize; k0]; k_obs];
    for i in 0..n {
        let o = observed.get(i);
        if o > 0 && latent.get(i) > 0 {
            obs_counts[(o - 1) as usize][(latent.get(i) - 1) as usize] += 1;
        }
    }
    let obs_mode: Vec<u32> = obs_counts.iter().map(|c| majority(c)).collect();

    let (mut d_total, mut d_correct, mut h_total, mut hd_correct) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        let f = finals.get(i);
        let o = observed.get(i);
        if o == 0 || latent.get(i) == 0 {
            continue;
        }
        let hidden = latent.get(i) != obs_mode[(o - 1) as usize];
        if hidden {
            h_total += 1;
        }
        let is_new = f > 0
            && refine_out
                .class_is_new
                .get((f - 1) as usize)
                .copied()
                .unwrap_or(false);
        if is_new {
            d_total += 1;
            if latent.get(i) == class_major[(f - 1) as usize] {
                d_correct += 1;
                if hidden {
                    hd_correct += 1;
                }
            }
        }
    }

    Ok(RecoveryScore {
        schema_version: 1,
        precision: (d_total > 0).then(|| d_correct as f64 / d_total as f64),
        recall: (h_total > 0).then(|| hd_correct as f64 / h_total as f64),
        community_map,
        discovered: d_total,
        hidden: h_total,
    })
}

impl RecoveryScore {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# schema=recovery/{}", self.schema_version)?;
        writeln!(out, "metric,value")?;
        let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| x.to_string());
        writeln!(out, "precision,{}", fmt(self.precision))?;
        writeln!(out, "recall,{}", fmt(self.recall))?;
        writeln!(out, "discovered,{}", self.discovered)?;
        writeln!(out, "hidden,{}", self.hidden)?;
        for (c, l) in &self.community_map {
            writeln!(out, "community_map,{c}:{l}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::params(format!("json write failed: {e}")))?;
        out.flush()?;
        Ok(())
    }
}

/// Embed each graph independently (same vertex set, same labels) and
/// concatenate the columns; block tags record the graph of origin.
pub fn multiplex_embed(
    graphs: &[&SparseGraph],
    y: &LabelVector,
    method: Method,
    cfg: &RefineConfig,
) -> Result<Embedding> {
    if graphs.is_empty() {
        return Err(Error::params("need at least one graph".to_string()));
    }
    let n = graphs[0].n();
    for g in graphs {
        if g.n() != n {
            return Err(Error::shape(format!(
                "multiplex graphs must share the vertex set: {} vs {n}",
                g.n()
            )));
        }
    }
    let mut combined: Option<Embedding> = None;
    for (m, g) in graphs.iter().enumerate() {
        let mut z = match method {
            Method::Gee | Method::Gee0 => gee_embed(g, y)?,
            Method::Rgee => refine(g, y, cfg)?.embedding,
        };
        z.prefix_tags(&format!("graph{m}:"));
        combined = Some(match combined {
            None => z,
            Some(acc) => acc.hconcat(&z)?,
        });
    }
    Ok(combined.unwrap())
}

/// One row of the scaling benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    pub gee_seconds: f64,
    pub rgee_seconds: f64,
}

fn median_secs(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples[samples.len() / 2]
}

/// Wall-clock scaling of the plain and refined embeddings on a built-in
/// model. Per size: one graph, `runs` timed runs each, medians reported.
/// Embeddings run single-threaded.
pub fn bench_scaling(
    model: BuiltinModel,
    n_list: &[usize],
    seed: u64,
    runs: usize,
    cfg: &RefineConfig,
) -> Result<Vec<BenchRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::params("sizes must be strictly increasing".to_string()));
    }
    let runs = runs.max(1);
    let (params, merge) = builtin_model(model);
    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let (g, latent) = sample_sbm(&params, n, derive_seed(seed, idx as u64))?;
        let observed = merge_labels(&latent, &merge)?;

        let mut gee_times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            let z = gee_embed(&g, &observed)?;
            gee_times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(z.values().len());
        }
        let mut rgee_times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            let r = refine(&g, &observed, cfg)?;
            rgee_times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(r.embedding.values().len());
        }
        rows.push(BenchRow {
            n,
            edges: g.num_edges(),
            gee_seconds: median_secs(gee_times),
            rgee_seconds: median_secs(rgee_times),
        });
    }
    Ok(rows)
}

/// `n,edges,gee_seconds,rgee_seconds` CSV.
pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "n,edges,gee_seconds,rgee_seconds")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, r.edges, r.gee_seconds, r.rgee_seconds)?;
    }
    out.flush()?;
    Ok(())
}
