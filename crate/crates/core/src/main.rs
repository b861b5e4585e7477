use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bart_mh::config::ConfigFile;
use bart_mh::data::{self, Dataset, Scaling, ScaledData};
use bart_mh::diagnostics::{self, AcceptanceRow};
use bart_mh::error::{Error, Result};
use bart_mh::model;
use bart_mh::proposals::{ProposalKind, ProposalOutcome};
use bart_mh::sampler::{self, ChainResult, OutcomeRecord, RunConfig};
use bart_mh::structural::enumerate_merges;
use bart_mh::tree::{to_canonical, CutpointGrid, SplitRule};
use bart_mh::Tree;

/// Bayesian additive regression trees with perturb, change-of-variable and
/// rotation proposals.
#[derive(Parser)]
#[command(name = "bart-mh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Benchmark {
    /// Friedman function, 10 covariates of which 5 are active
    Friedman,
    /// Three-region piecewise-constant function with confounded x1 and x3
    Wu,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark dataset and write it as CSV
    Generate {
        #[arg(long, value_enum)]
        benchmark: Benchmark,
        /// Number of rows (Friedman only; the Wu design has 300)
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Noise variance (Wu default 0.25, Friedman default 0.1)
        #[arg(long)]
        sigma2: Option<f64>,
        /// Total covariates for Friedman, at least 5
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler and write draws, intervals and diagnostics
    Fit {
        /// Training CSV: covariates, response, optional `truth`
        #[arg(long)]
        data: PathBuf,
        /// TOML run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Held-out points to predict during the run
        #[arg(long)]
        points: Option<PathBuf>,
        /// Credible level for the written intervals
        #[arg(long, default_value_t = 0.9)]
        level: f64,
        /// Independent chains, written to `chain-<k>` subdirectories
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Credible intervals at new points from a fitted run
    Predict {
        /// Directory written by `fit`
        #[arg(long)]
        fit: PathBuf,
        /// CSV of covariates; a `truth` column is carried through
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        level: f64,
        /// Output intervals CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Write traces, tree census and acceptance summary of a fitted run
    Diagnose {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List every tree whose cuts along (var, cut) give the two trees
    OracleMerge {
        /// Left tree in canonical form, e.g. "(1:4:[] [])"
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Zero-based variable of the imposed rule
        #[arg(long)]
        var: usize,
        /// Grid index of the imposed cutpoint
        #[arg(long)]
        cut: usize,
    },
}

/// Written to `model.json` in each fit directory.
#[derive(Serialize, Deserialize)]
struct FitRecord {
    n: usize,
    d: usize,
    names: Vec<String>,
    n_v: usize,
    chain: usize,
    config: RunConfig,
    scaling: Scaling,
    kept_draws: usize,
    level: f64,
    train_coverage: Option<f64>,
    heldout_coverage: Option<f64>,
    acceptance: Vec<AcceptanceRow>,
}

fn file_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::File { path: path.display().to_string(), msg: e.to_string() }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(file_err(path))
}

fn generate(benchmark: Benchmark, n: usize, sigma2: Option<f64>, d: usize, seed: u64, out: &Path) -> Result<()> {
    let ds = match benchmark {
        Benchmark::Friedman => data::gen_friedman(n, sigma2.unwrap_or(0.1), seed, d)?,
        Benchmark::Wu => data::gen_wu_synthetic_with(seed, sigma2.unwrap_or(0.25)),
    };
    data::write_csv(&ds, out)
}

struct FitInputs {
    ds: Dataset,
    scaled: ScaledData<f64>,
    config: RunConfig,
    n_v: usize,
    heldout: Option<(Vec<Vec<f64>>, Option<Vec<f64>>)>,
}

fn prepare_fit(data_path: &Path, config: Option<&Path>, seed: Option<u64>, points: Option<&Path>) -> Result<FitInputs> {
    let file = match config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ds = data::load_csv(data_path)?;
    for j in Scaling::fit(&ds).constant_columns() {
        eprintln!("warning: covariate {} is constant", ds.names[j]);
    }
    let n_v = file.n_v();
    let scaled: ScaledData<f64> = data::scale_dataset(&ds, n_v)?;
    let mut cfg = file.resolve(model::naive_sigma2(&scaled.y))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.record_forest = true;
    cfg.validate(ds.d())?;
    let heldout = points.map(|p| data::load_points(p, ds.d())).transpose()?;
    Ok(FitInputs { ds, scaled, config: cfg, n_v, heldout })
}

fn fit(inputs: &FitInputs, level: f64, chains: usize, out: &Path) -> Result<()> {
    if chains == 0 {
        return Err(Error::Config("--chains must be at least 1".into()));
    }
    let FitInputs { ds, scaled, config, .. } = inputs;
    let mut raw_points: Vec<Vec<f64>> = ds.x.clone();
    if let Some((xs, _)) = &inputs.heldout {
        raw_points.extend(xs.iter().cloned());
    }
    let points = scaled.bin_points(&raw_points);
    let results = sampler::run_replicated(config, scaled, &points, chains)?;
    for (k, r) in results.iter().enumerate() {
        let dir = if chains == 1 { out.to_path_buf() } else { out.join(format!("chain-{k}")) };
        create_dir(&dir)?;
        write_fit(inputs, r, k, level, &dir)?;
    }
    Ok(())
}

fn write_fit(inputs: &FitInputs, r: &ChainResult<f64>, chain: usize, level: f64, dir: &Path) -> Result<()> {
    let n = inputs.ds.n();
    let kept = r.predictions.len();
    let mut train_coverage = None;
    let mut heldout_coverage = None;
    if kept >= 20 {
        let train: Vec<Vec<f64>> = r.predictions.iter().map(|p| p[..n].to_vec()).collect();
        let rows = diagnostics::interval_table(&train, level, inputs.ds.truth.as_deref())?;
        train_coverage = diagnostics::table_coverage(&rows);
        diagnostics::write_intervals(&rows, &dir.join("train_intervals.csv"))?;
        if let Some((_, truth)) = &inputs.heldout {
            let held: Vec<Vec<f64>> = r.predictions.iter().map(|p| p[n..].to_vec()).collect();
            let rows = diagnostics::interval_table(&held, level, truth.as_deref())?;
            heldout_coverage = diagnostics::table_coverage(&rows);
            diagnostics::write_intervals(&rows, &dir.join("intervals.csv"))?;
        }
    } else {
        eprintln!("note: {kept} kept draws, intervals need at least 20; none written");
    }

    let acceptance = diagnostics::acceptance_summary(&r.outcomes, r.burnin);
    let mut config = inputs.config.clone();
    config.seed = r.seed;
    let record = FitRecord {
        n,
        d: inputs.ds.d(),
        names: inputs.ds.names.clone(),
        n_v: inputs.n_v,
        chain,
        config,
        scaling: inputs.scaled.scaling.clone(),
        kept_draws: kept,
        level,
        train_coverage,
        heldout_coverage,
        acceptance: acceptance.clone(),
    };
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    fs::write(dir.join("model.json"), json + "\n").map_err(file_err(&dir.join("model.json")))?;

    let forest_path = dir.join("forest.txt");
    let mut w = BufWriter::new(fs::File::create(&forest_path).map_err(file_err(&forest_path))?);
    for draw in &r.forests {
        writeln!(w, "{}", draw.join("\t"))?;
    }
    w.flush()?;

    let sigma_path = dir.join("sigma2.csv");
    let mut w = BufWriter::new(fs::File::create(&sigma_path).map_err(file_err(&sigma_path))?);
    writeln!(w, "draw,sigma2")?;
    for (i, s) in r.sigma2.iter().enumerate() {
        writeln!(w, "{i},{s:?}")?;
    }
    w.flush()?;

    diagnostics::write_traces(&r.outcomes, &dir.join("traces.csv"))?;
    diagnostics::write_census(&diagnostics::tree_census(&r.trees), &dir.join("census.csv"))?;
    diagnostics::write_acceptance(&acceptance, &dir.join("acceptance.csv"))?;
    Ok(())
}

fn read_record(fit_dir: &Path) -> Result<FitRecord> {
    let path = fit_dir.join("model.json");
    let text = fs::read_to_string(&path).map_err(file_err(&path))?;
    serde_json::from_str(&text).map_err(|e| Error::File { path: path.display().to_string(), msg: e.to_string() })
}

/// Kept ensembles from `forest.txt`, one list of trees per draw.
fn read_forest(fit_dir: &Path) -> Result<Vec<Vec<Tree>>> {
    let path = fit_dir.join("forest.txt");
    let f = fs::File::open(&path).map_err(file_err(&path))?;
    BufReader::new(f)
        .lines()
        .map(|line| {
            let line = line.map_err(file_err(&path))?;
            line.split('\t').map(Tree::parse).collect()
        })
        .collect()
}

fn predict(fit_dir: &Path, points: &Path, level: f64, out: &Path) -> Result<()> {
    let rec = read_record(fit_dir)?;
    let forest = read_forest(fit_dir)?;
    let (xs, truth) = data::load_points(points, rec.d)?;
    let grid = CutpointGrid::uniform(rec.d, rec.n_v)?;
    let bins: Vec<Vec<u16>> = xs
        .iter()
        .map(|row| rec.scaling.scale_x(row).iter().enumerate().map(|(j, &v)| grid.bin(j, v)).collect())
        .collect();
    let predictions: Vec<Vec<f64>> = forest
        .iter()
        .map(|trees| {
            bins.iter()
                .map(|b| {
                    let g: f64 = trees.iter().map(|t| t.leaf_values()[t.route_binned(b)]).sum();
                    rec.scaling.unscale_y(g)
                })
                .collect()
        })
        .collect();
    let rows = diagnostics::interval_table(&predictions, level, truth.as_deref())?;
    diagnostics::write_intervals(&rows, out)?;
    if let Some(c) = diagnostics::table_coverage(&rows) {
        println!("coverage {c:.4} at level {level}");
    }
    Ok(())
}

fn read_traces(fit_dir: &Path) -> Result<Vec<OutcomeRecord>> {
    let path = fit_dir.join("traces.csv");
    let shown = path.display().to_string();
    let mut r = csv::Reader::from_path(&path).map_err(|e| Error::File { path: shown.clone(), msg: e.to_string() })?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let bad = |col: usize, msg: String| Error::Csv { path: shown.clone(), row, col, msg };
        let rec = rec.map_err(|e| bad(0, e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(rec.len(), "expected 5 fields".into()));
        }
        let int = |c: usize| rec[c].parse::<usize>().map_err(|_| bad(c + 1, format!("not an integer: {:?}", &rec[c])));
        let kind = ProposalKind::from_name(&rec[2]).ok_or_else(|| bad(3, format!("unknown kind {:?}", &rec[2])))?;
        let delta = if rec[4].is_empty() {
            None
        } else {
            Some(rec[4].parse::<f64>().map_err(|_| bad(5, format!("not a number: {:?}", &rec[4])))?)
        };
        out.push(OutcomeRecord {
            iter: int(0)?,
            tree: int(1)?,
            outcome: ProposalOutcome {
                kind,
                accepted: int(3)? == 1,
                delta_log_il: delta,
                log_prior_ratio: None,
                log_proposal_ratio: None,
                rejection: None,
                node: None,
            },
        });
    }
    Ok(out)
}

fn diagnose(fit_dir: &Path, out: &Path) -> Result<()> {
    let rec = read_record(fit_dir)?;
    let outcomes = read_traces(fit_dir)?;
    let structures: Vec<Vec<String>> =
        read_forest(fit_dir)?.iter().map(|trees| trees.iter().map(Tree::structure_key).collect()).collect();
    create_dir(out)?;
    diagnostics::write_traces(&outcomes, &out.join("traces.csv"))?;
    let census = diagnostics::tree_census(&structures);
    diagnostics::write_census(&census, &out.join("census.csv"))?;
    let summary = diagnostics::acceptance_summary(&outcomes, rec.config.burnin);
    diagnostics::write_acceptance(&summary, &out.join("acceptance.csv"))?;
    println!("kind proposed accepted rate (after {} burn-in iterations)", rec.config.burnin);
    for row in &summary {
        let rate = row.rate.map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
        println!("{} {} {} {}", row.kind, row.proposed, row.accepted, rate);
    }
    println!("distinct structures {}", census.len());
    Ok(())
}

fn oracle_merge(left: &str, right: &str, var: usize, cut: usize) -> Result<()> {
    let l = Tree::parse(left)?;
    let r = Tree::parse(right)?;
    let set = enumerate_merges(l.root(), r.root(), SplitRule::new(var, cut));
    // stripped input leaves are echoed stripped
    let with_mu = !(left.contains("[]") || right.contains("[]"));
    let show = |t| to_canonical(t, with_mu);
    println!("trivial {}", show(&set.trivial));
    for t in &set.nontrivial {
        println!("nontrivial {}", show(t));
    }
    for t in &set.retaining {
        println!("retaining {}", show(t));
    }
    println!("count {}", set.count().0);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { benchmark, n, sigma2, d, seed, out } => generate(benchmark, n, sigma2, d, seed, &out),
        Command::Fit { data, config, seed, points, level, chains, out } => {
            let inputs = prepare_fit(&data, config.as_deref(), seed, points.as_deref())?;
            fit(&inputs, level, chains, &out)
        }
        Command::Predict { fit, points, level, out } => predict(&fit, &points, level, &out),
        Command::Diagnose { fit, out } => diagnose(&fit, &out),
        Command::OracleMerge { left, right, var, cut } => oracle_merge(&left, &right, var, cut),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
