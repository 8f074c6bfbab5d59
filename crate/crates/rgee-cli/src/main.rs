//! Command-line front end: simulation, refinement, cross-validation,
//! latent-community recovery, and the scaling benchmark, with
//! manifest-driven reproducible outputs.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rgee::error::Error;
use rgee::eval::{
    bench_scaling, kfold_cv, kfold_cv_regenerate, latent_recovery, write_bench_csv, CvSpec, Method,
};
use rgee::graph::{remove_singletons, Dataset};
use rgee::io::{load_edge_list, load_labels, save_edge_list, save_labels, EdgeListFormat};
use rgee::refine::{refine, RefineConfig};
use rgee::sbm::{merge_labels, sample_sbm, BuiltinModel, ModelSpec};
use rgee::Result;

#[derive(Parser)]
#[command(
    name = "rgee",
    version,
    about = "Refined graph encoder embedding toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for all files written by a run.
    #[arg(long, global = true, env = "RGEE_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads for fold-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Serialize)]
struct RefineArgs {
    /// Max self-training passes.
    #[arg(long, default_value_t = 5)]
    gamma_y: usize,
    /// Max latent-community passes.
    #[arg(long, default_value_t = 5)]
    gamma_k: usize,
    /// Fractional stop threshold in [0, 1].
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    /// Absolute stop threshold.
    #[arg(long, default_value_t = 5)]
    epsilon_n: usize,
    /// Use the classical half-quadratic discriminant rule inside passes.
    #[arg(long)]
    classic_lda_half: bool,
}

impl RefineArgs {
    fn config(&self) -> RefineConfig {
        RefineConfig {
            gamma_y: self.gamma_y,
            gamma_k: self.gamma_k,
            epsilon: self.epsilon,
            epsilon_n: self.epsilon_n,
            classic_lda_half: self.classic_lda_half,
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct GraphInputArgs {
    /// Edge-list file (`src dst [weight]` per line).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Label file (one integer per line, 0 = unknown).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Latent ground-truth label file.
    #[arg(long)]
    latent: Option<PathBuf>,
    /// Vertex ids in the files start at 1.
    #[arg(long)]
    one_based: bool,
    /// Symmetrize the graph (max weight of the two directions).
    #[arg(long)]
    symmetrize: bool,
    /// Remove zero-degree vertices before processing.
    #[arg(long)]
    drop_singletons: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a graph from a block model and write it with its labels.
    Simulate {
        /// Built-in model id (sim1, sim2, sim3).
        #[arg(long)]
        model: Option<String>,
        /// JSON model spec (block, prior, degree, merge).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Refine labels on a graph and write the concatenated embedding.
    Refine {
        #[command(flatten)]
        input: GraphInputArgs,
        #[command(flatten)]
        refine: RefineArgs,
    },
    /// K-fold cross-validation of an embedding method.
    Cv {
        /// Built-in model id; a fresh graph is drawn per replicate.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        input: GraphInputArgs,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 30)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        #[command(flatten)]
        refine: RefineArgs,
    },
    /// Refine and score latent-community recovery against ground truth.
    Recover {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        input: GraphInputArgs,
        #[arg(long, default_value = "json")]
        format: String,
        #[command(flatten)]
        refine: RefineArgs,
    },
    /// Time the plain and refined embeddings over increasing sizes.
    Bench {
        #[arg(long)]
        model: String,
        /// Comma-separated increasing vertex counts.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Timed runs per size (median reported).
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[command(flatten)]
        refine: RefineArgs,
    },
}

#[derive(Serialize)]
struct Manifest<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    spec: T,
    outputs: Vec<String>,
}

fn write_manifest<T: Serialize>(dir: &Path, manifest: &Manifest<T>) -> Result<()> {
    let file = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), manifest)
        .map_err(|e| Error::Params(format!("manifest write failed: {e}")))?;
    Ok(())
}

fn resolve_model(model: &Option<String>, params: &Option<PathBuf>) -> Result<ModelSpec> {
    match (model, params) {
        (Some(id), None) => {
            let id: BuiltinModel = id.parse()?;
            Ok(ModelSpec::builtin(id))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Params(format!("invalid model spec {path:?}: {e}")))
        }
        _ => Err(Error::Params(
            "give exactly one of --model or --params".to_string(),
        )),
    }
}

/// Load a dataset from files, applying the requested preprocessing.
/// Returns the dataset and, when singletons were dropped, the kept
/// original indices.
fn load_dataset(input: &GraphInputArgs) -> Result<(Dataset, Option<Vec<u32>>)> {
    let graph_path = input
        .graph
        .as_ref()
        .ok_or_else(|| Error::Params("--graph is required for file input".to_string()))?;
    let labels_path = input
        .labels
        .as_ref()
        .ok_or_else(|| Error::Params("--labels is required for file input".to_string()))?;
    let fmt = EdgeListFormat {
        one_based: input.one_based,
        declared_n: None,
    };
    let mut graph = load_edge_list(graph_path, fmt)?;
    if input.symmetrize {
        graph = graph.to_undirected();
    }
    let observed = load_labels(labels_path)?;
    let latent = input.latent.as_ref().map(load_labels).transpose()?;
    let d = Dataset::new(graph, observed, latent)?;
    if input.drop_singletons {
        let (d, remap) = remove_singletons(&d);
        Ok((d, Some(remap.new_to_old)))
    } else {
        Ok((d, None))
    }
}

fn dataset_from_model(spec: &ModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    let (params, merge) = spec.clone().into_parts()?;
    let (graph, latent) = sample_sbm(&params, n, seed)?;
    let observed = merge_labels(&latent, &merge)?;
    Dataset::new(graph, observed, Some(latent))
}

fn parse_format(format: &str) -> Result<bool> {
    match format {
        "csv" => Ok(false),
        "json" => Ok(true),
        other => Err(Error::Params(format!(
            "unknown format {other:?}; expected csv or json"
        ))),
    }
}

fn cmd_simulate(
    out: &Path,
    model: &Option<String>,
    params: &Option<PathBuf>,
    n: usize,
    seed: u64,
) -> Result<()> {
    let spec = resolve_model(model, params)?;
    let (p, merge) = spec.clone().into_parts()?;
    let (graph, latent) = sample_sbm(&p, n, seed)?;
    let observed = merge_labels(&latent, &merge)?;

    std::fs::create_dir_all(out)?;
    save_edge_list(&graph, out.join("graph.edges"))?;
    save_labels(&latent, out.join("latent.labels"))?;
    save_labels(&observed, out.join("observed.labels"))?;

    #[derive(Serialize)]
    struct Spec<'a> {
        model: &'a ModelSpec,
        n: usize,
        seed: u64,
    }
    write_manifest(
        out,
        &Manifest {
            schema_version: 1,
            command: "simulate",
            spec: Spec {
                model: &spec,
                n,
                seed,
            },
            outputs: vec![
                "graph.edges".into(),
                "latent.labels".into(),
                "observed.labels".into(),
            ],
        },
    )
}

fn cmd_refine(out: &Path, input: &GraphInputArgs, args: &RefineArgs) -> Result<()> {
    let (d, kept) = load_dataset(input)?;
    let cfg = args.config();
    let result = refine(&d.graph, &d.observed, &cfg)?;
    std::fs::create_dir_all(out)?;
    result.write_files(out)?;
    let mut outputs = vec![
        "embedding.csv".into(),
        "embedding_blocks.json".into(),
        "label_history.csv".into(),
        "metadata.json".into(),
    ];
    if let Some(kept) = kept {
        let file = std::fs::File::create(out.join("kept_vertices.json"))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &kept)
            .map_err(|e| Error::Params(format!("remap write failed: {e}")))?;
        outputs.push("kept_vertices.json".into());
    }

    #[derive(Serialize)]
    struct Spec<'a> {
        input: &'a GraphInputArgs,
        config: RefineConfig,
        final_k: u32,
        passes: usize,
    }
    write_manifest(
        out,
        &Manifest {
            schema_version: 1,
            command: "refine",
            spec: Spec {
                input,
                config: cfg,
                final_k: result.final_k,
                passes: result.num_passes(),
            },
            outputs,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_cv(
    out: &Path,
    model: &Option<String>,
    n: Option<usize>,
    input: &GraphInputArgs,
    method: &str,
    folds: usize,
    replicates: usize,
    seed: u64,
    format: &str,
    args: &RefineArgs,
) -> Result<()> {
    let json = parse_format(format)?;
    let method: Method = method.parse()?;
    let mut spec = CvSpec::new(method, folds, replicates, seed);
    spec.refine = args.config();

    let report = if let Some(id) = model {
        let n = n.ok_or_else(|| Error::Params("--n is required with --model".to_string()))?;
        let id: BuiltinModel = id.parse()?;
        kfold_cv_regenerate(id, n, &spec)?
    } else {
        let (d, _) = load_dataset(input)?;
        kfold_cv(&d, &spec)?
    };

    std::fs::create_dir_all(out)?;
    let file = if json { "cv_report.json" } else { "cv_report.csv" };
    if json {
        report.write_json(out.join(file))?;
    } else {
        report.write_csv(out.join(file))?;
    }

    #[derive(Serialize)]
    struct Spec<'a> {
        model: &'a Option<String>,
        n: Option<usize>,
        input: &'a GraphInputArgs,
        cv: &'a CvSpec,
        base_seed: u64,
        mean_error: f64,
        std_dev: f64,
    }
    write_manifest(
        out,
        &Manifest {
            schema_version: 1,
            command: "cv",
            spec: Spec {
                model,
                n,
                input,
                cv: &spec,
                base_seed: seed,
                mean_error: report.mean_error,
                std_dev: report.std_dev,
            },
            outputs: vec![file.into()],
        },
    )
}

fn cmd_recover(
    out: &Path,
    model: &Option<String>,
    n: Option<usize>,
    seed: u64,
    input: &GraphInputArgs,
    format: &str,
    args: &RefineArgs,
) -> Result<()> {
    let json = parse_format(format)?;
    let d = if let Some(id) = model {
        let n = n.ok_or_else(|| Error::Params("--n is required with --model".to_string()))?;
        let id: BuiltinModel = id.parse()?;
        dataset_from_model(&ModelSpec::builtin(id), n, seed)?
    } else {
        load_dataset(input)?.0
    };
    let latent = d
        .latent
        .clone()
        .ok_or_else(|| Error::Params("recovery needs latent labels".to_string()))?;
    let cfg = args.config();
    let result = refine(&d.graph, &d.observed, &cfg)?;
    let score = latent_recovery(&result, &d.observed, &latent)?;

    std::fs::create_dir_all(out)?;
    let file = if json { "recovery.json" } else { "recovery.csv" };
    if json {
        score.write_json(out.join(file))?;
    } else {
        score.write_csv(out.join(file))?;
    }

    #[derive(Serialize)]
    struct Spec<'a> {
        model: &'a Option<String>,
        n: Option<usize>,
        seed: u64,
        config: RefineConfig,
        precision: Option<f64>,
        recall: Option<f64>,
        discovered: usize,
    }
    write_manifest(
        out,
        &Manifest {
            schema_version: 1,
            command: "recover",
            spec: Spec {
                model,
                n,
                seed,
                config: cfg,
                precision: score.precision,
                recall: score.recall,
                discovered: score.discovered,
            },
            outputs: vec![file.into()],
        },
    )
}

fn cmd_bench(
    out: &Path,
    model: &str,
    n_list: &[usize],
    seed: u64,
    runs: usize,
    args: &RefineArgs,
) -> Result<()> {
    let model: BuiltinModel = model.parse()?;
    let rows = bench_scaling(model, n_list, seed, runs, &args.config())?;
    std::fs::create_dir_all(out)?;
    write_bench_csv(&rows, out.join("bench.csv"))?;

    #[derive(Serialize)]
    struct Spec<'a> {
        model: BuiltinModel,
        n: &'a [usize],
        seed: u64,
        runs: usize,
        config: RefineConfig,
    }
    write_manifest(
        out,
        &Manifest {
            schema_version: 1,
            command: "bench",
            spec: Spec {
                model,
                n: n_list,
                seed,
                runs,
                config: args.config(),
            },
            outputs: vec!["bench.csv".into()],
        },
    )
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Params(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate {
            model,
            params,
            n,
            seed,
        } => cmd_simulate(&cli.out, model, params, *n, *seed),
        Command::Refine { input, refine } => cmd_refine(&cli.out, input, refine),
        Command::Cv {
            model,
            n,
            input,
            method,
            folds,
            replicates,
            seed,
            format,
            refine,
        } => cmd_cv(
            &cli.out, model, *n, input, method, *folds, *replicates, *seed, format, refine,
        ),
        Command::Recover {
            model,
            n,
            seed,
            input,
            format,
            refine,
        } => cmd_recover(&cli.out, model, *n, *seed, input, format, refine),
        Command::Bench {
            model,
            n,
            seed,
            runs,
            refine,
        } => cmd_bench(&cli.out, model, n, *seed, *runs, refine),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e @ Error::Params(_)) => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(3);
        }
    }
}
