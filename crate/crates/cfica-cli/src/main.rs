//! Command-line front end: bootstrap a model from the first CSV chunk,
//! ingest later chunks incrementally across invocations, evaluate purity,
//! and sweep the initial cluster count.

mod dataset;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cfica::engine::DriftMode;
use cfica::{
    load_snapshot, purity, save_snapshot, HyperParams, IngestReport, KMeansConfig, Model,
    PointStore,
};
use dataset::{load_chunk, DatasetSpec, LabelColumn};

#[derive(Parser)]
#[command(name = "cfica", version, about = "Incremental cluster-feature clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CsvOpts {
    /// Label column: header name, 0-based index, or "none"
    #[arg(long, default_value = "none")]
    label_col: String,
    /// Comma-separated feature columns (names or indices); default: all
    /// non-label columns
    #[arg(long, default_value = "")]
    feature_cols: String,
    /// Field delimiter
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Treat the first row as data, not a header
    #[arg(long)]
    no_header: bool,
}

impl CsvOpts {
    fn to_spec(&self) -> Result<DatasetSpec> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be an ASCII character");
        }
        Ok(DatasetSpec {
            label_col: LabelColumn::parse(&self.label_col),
            feature_cols: self
                .feature_cols
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
        })
    }
}

#[derive(Args, Clone)]
struct ParamOpts {
    /// Initial number of clusters (k-means order and merge pressure)
    #[arg(long)]
    k: usize,
    /// Size of the farthest-point list per cluster
    #[arg(long, default_value_t = 5)]
    p: usize,
    /// Assignment threshold on the inverse proximity estimate
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Merge gate on centroid distance
    #[arg(long, default_value_t = 4.0)]
    theta: f64,
    /// Drift threshold on relative mean deviation
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Random seed for the initial k-means
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// When to run the drift check
    #[arg(long, default_value = "per-point", value_parser = parse_drift_mode)]
    drift_mode: DriftMode,
}

fn parse_drift_mode(s: &str) -> Result<DriftMode, String> {
    DriftMode::parse(s).ok_or_else(|| format!("'{s}' is not per-point or per-chunk"))
}

impl ParamOpts {
    fn hyper(&self) -> HyperParams {
        HyperParams {
            k: self.k,
            p: self.p,
            lambda: self.lambda,
            theta: self.theta,
            delta: self.delta,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the first chunk with k-means and write the initial state file
    Bootstrap {
        /// CSV file with the first chunk
        chunk: PathBuf,
        #[command(flatten)]
        params: ParamOpts,
        #[command(flatten)]
        csv: CsvOpts,
        /// Where to write the state file
        #[arg(long)]
        state_out: PathBuf,
    },
    /// Ingest one more chunk into an existing state
    Ingest {
        /// CSV file with the next chunk
        chunk: PathBuf,
        #[arg(long)]
        state_in: PathBuf,
        #[arg(long)]
        state_out: PathBuf,
        #[command(flatten)]
        csv: CsvOpts,
    },
    /// Print the purity report for a state file
    Eval {
        #[arg(long)]
        state_in: PathBuf,
    },
    /// Run the full chunked pipeline for each k in a range
    Sweep {
        /// CSV chunk files in arrival order (first one bootstraps)
        chunks: Vec<PathBuf>,
        #[arg(long)]
        k_min: usize,
        #[arg(long)]
        k_max: usize,
        #[command(flatten)]
        params: SweepParamOpts,
        #[command(flatten)]
        csv: CsvOpts,
        /// Directory for per-k state files
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Sweep takes the same knobs as bootstrap minus k itself.
#[derive(Args, Clone)]
struct SweepParamOpts {
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, default_value_t = 4.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "per-point", value_parser = parse_drift_mode)]
    drift_mode: DriftMode,
}

impl SweepParamOpts {
    fn with_k(&self, k: usize) -> ParamOpts {
        ParamOpts {
            k,
            p: self.p,
            lambda: self.lambda,
            theta: self.theta,
            delta: self.delta,
            seed: self.seed,
            drift_mode: self.drift_mode,
        }
    }
}

fn print_report(report: &IngestReport) {
    println!("points_processed={}", report.points_processed);
    println!("assigned_existing={}", report.assigned_existing);
    println!("singletons_created={}", report.singletons_created);
    println!("merges_performed={}", report.merges_performed);
    println!("refreshes_performed={}", report.refreshes_performed);
    println!("final_cluster_count={}", report.final_cluster_count);
}

fn cmd_bootstrap(
    chunk: &Path,
    params: &ParamOpts,
    csv: &CsvOpts,
    state_out: &Path,
) -> Result<()> {
    let spec = csv.to_spec()?;
    let loaded = load_chunk(chunk, &spec, 0)?;
    if loaded.dropped_rows > 0 {
        println!("dropped_rows={}", loaded.dropped_rows);
    }
    if loaded.points.len() < params.k {
        bail!(
            "chunk has {} usable rows but k = {}",
            loaded.points.len(),
            params.k
        );
    }
    let mut store = PointStore::new(loaded.points[0].features.dim());
    let kconfig = KMeansConfig::new(params.k, params.seed);
    let model = Model::bootstrap(
        &loaded.points,
        params.hyper(),
        params.drift_mode,
        &kconfig,
        &mut store,
    )?;
    save_snapshot(state_out, &model, &store)?;
    println!("clusters={}", model.active_count());
    for cf in model.clusters() {
        println!(
            "cluster.{}.size={} cluster.{}.variance={}",
            cf.cluster_id(),
            cf.n(),
            cf.cluster_id(),
            cf.variance()?
        );
    }
    println!("total_points={}", model.total_points());
    Ok(())
}

fn cmd_ingest(chunk: &Path, state_in: &Path, state_out: &Path, csv: &CsvOpts) -> Result<()> {
    let (mut model, mut store) = load_snapshot(state_in)?;
    let spec = csv.to_spec()?;
    let loaded = load_chunk(chunk, &spec, store.next_point_id())?;
    if loaded.dropped_rows > 0 {
        println!("dropped_rows={}", loaded.dropped_rows);
    }
    if let Some(p) = loaded.points.first() {
        if p.features.dim() != model.dimension() {
            bail!(
                "dimension mismatch: state expects {}, chunk has {}",
                model.dimension(),
                p.features.dim()
            );
        }
    }
    let report = model.ingest_chunk(&loaded.points, &mut store)?;
    save_snapshot(state_out, &model, &store)?;
    print_report(&report);
    println!("generation={}", model.generation());
    println!("total_points={}", model.total_points());
    Ok(())
}

fn cmd_eval(state_in: &Path) -> Result<()> {
    let (_, store) = load_snapshot(state_in)?;
    let report = purity(&store.assignments(), &store.labels())?;
    print!("{}", report.text_table());
    print!("{}", report.key_value_lines());
    Ok(())
}

/// One full bootstrap + ingest pipeline; returns (purity, cluster count).
fn run_pipeline(
    chunks: &[PathBuf],
    params: &ParamOpts,
    spec: &DatasetSpec,
    state_path: &Path,
) -> Result<(f64, usize)> {
    let loaded = load_chunk(&chunks[0], spec, 0)?;
    if loaded.points.len() < params.k {
        bail!(
            "first chunk has {} usable rows but k = {}",
            loaded.points.len(),
            params.k
        );
    }
    let mut store = PointStore::new(loaded.points[0].features.dim());
    let kconfig = KMeansConfig::new(params.k, params.seed);
    let mut model = Model::bootstrap(
        &loaded.points,
        params.hyper(),
        params.drift_mode,
        &kconfig,
        &mut store,
    )?;
    for chunk in &chunks[1..] {
        let loaded = load_chunk(chunk, spec, store.next_point_id())?;
        model.ingest_chunk(&loaded.points, &mut store)?;
    }
    save_snapshot(state_path, &model, &store)?;
    let report = purity(&store.assignments(), &store.labels())?;
    Ok((report.purity, model.active_count()))
}

fn cmd_sweep(
    chunks: &[PathBuf],
    k_min: usize,
    k_max: usize,
    params: &SweepParamOpts,
    csv: &CsvOpts,
    out_dir: &Path,
) -> Result<()> {
    if chunks.is_empty() {
        bail!("sweep needs at least one chunk file");
    }
    if k_min == 0 || k_min > k_max {
        bail!("invalid k range {k_min}..{k_max}");
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let spec = csv.to_spec()?;

    let results: Vec<(usize, Result<(f64, usize)>)> = (k_min..=k_max)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|k| {
            let state_path = out_dir.join(format!("k{k}.state"));
            (
                *k,
                run_pipeline(chunks, &params.with_k(*k), &spec, &state_path),
            )
        })
        .collect();

    println!("{:>4}  {:>10}  {:>14}", "k", "purity", "cluster_count");
    let mut failures = 0usize;
    for (k, res) in &results {
        match res {
            Ok((purity, count)) => println!("{k:>4}  {purity:>10.6}  {count:>14}"),
            Err(e) => {
                failures += 1;
                println!("{k:>4}  failed: {e:#}");
            }
        }
    }
    if failures == results.len() {
        bail!("every k in the sweep failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Bootstrap {
            chunk,
            params,
            csv,
            state_out,
        } => cmd_bootstrap(chunk, params, csv, state_out),
        Command::Ingest {
            chunk,
            state_in,
            state_out,
            csv,
        } => cmd_ingest(chunk, state_in, state_out, csv),
        Command::Eval { state_in } => cmd_eval(state_in),
        Command::Sweep {
            chunks,
            k_min,
            k_max,
            params,
            csv,
            out_dir,
        } => cmd_sweep(chunks, *k_min, *k_max, params, csv, out_dir),
    }
}
