use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use leakest::estimators::{forward_estimate, smoothed_final, EstimateTrace};
use leakest::io::load_dataset;
use leakest::measures::{nn_lower_bound, LeakageReport};
use leakest::{split, Dataset64, EstimatorKind, Metric, NeighborIndex};
use log::info;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::output::{emit, ensure_dir, mean_std};
use crate::{config_error, streams, Common};

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Training examples (`secret,x1,...,xd` per line).
    #[arg(long)]
    train: PathBuf,
    /// Hold-out examples; without it the training file is split.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Fraction of the training file used for training when splitting.
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    /// Comma-separated estimators: frequentist, nn, knn-ln, knn-log10.
    #[arg(long, value_delimiter = ',', default_value = "frequentist,nn,knn-ln,knn-log10")]
    estimators: Vec<String>,
    /// Treat every coordinate as lying on a circle of this period.
    #[arg(long)]
    ring: Option<f64>,
    /// Repeat with this many derived seeds and report mean and standard deviation.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Serialize)]
struct EstimatorSummary {
    estimator: EstimatorKind,
    applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std: Option<f64>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Selected {
    estimator: EstimatorKind,
    estimate: f64,
    std: f64,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    train_size: usize,
    eval_size: usize,
    n_secrets: usize,
    metric: String,
    seeds: u64,
    estimators: Vec<EstimatorSummary>,
    selected: Selected,
    random_guessing: f64,
    leakage: Option<LeakageReport>,
    nn_lower_bound: Option<f64>,
}

fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorKind>> {
    let mut kinds = Vec::new();
    for name in names {
        let kind: EstimatorKind = name
            .trim()
            .parse()
            .map_err(|e: leakest::Error| config_error(e.to_string()))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(config_error("no estimator selected"));
    }
    Ok(kinds)
}

/// The frequentist rule only uses observations seen in training. When no
/// evaluation observation was, it degenerates to guessing the prior mode and
/// is reported as not applicable.
fn frequentist_applicable(train: &Dataset64, eval: &Dataset64, metric: Metric) -> Result<bool> {
    let index = NeighborIndex::from_dataset(train, metric)?;
    Ok(eval.iter().any(|e| index.counts_at(e.observation).is_some()))
}

fn shuffled(data: &Dataset64, seed: u64, run: u64) -> Dataset64 {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut streams::rng(seed, "shuffle", run));
    data.select(&order)
}

fn write_trace(dir: &Path, trace: &EstimateTrace, kind: EstimatorKind) -> Result<()> {
    let path = dir.join(format!("{}.csv", kind.name()));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

pub fn run(args: &EstimateArgs, common: &Common) -> Result<()> {
    let kinds = parse_estimators(&args.estimators)?;
    if args.seeds == 0 {
        return Err(config_error("--seeds must be at least 1"));
    }
    if args.eval.is_none() && !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(config_error("--train-fraction must lie strictly between 0 and 1"));
    }
    let metric = match args.ring {
        Some(p) => Metric::ring(p).map_err(|e| config_error(e.to_string()))?,
        None => Metric::Euclidean,
    };
    let data: Dataset64 = load_dataset(&args.train).with_context(|| format!("reading {}", args.train.display()))?;
    let fixed_eval: Option<Dataset64> = match &args.eval {
        Some(p) => Some(load_dataset(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if let Some(e) = &fixed_eval {
        if e.dim() != data.dim() {
            anyhow::bail!(
                "training data has dimension {} but evaluation data {}",
                data.dim(),
                e.dim()
            );
        }
    }
    if data.is_empty() {
        anyhow::bail!("training data is empty");
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let mut smoothed: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let mut applicable = vec![true; kinds.len()];
    let mut sizes = (0, 0);
    let mut n_secrets = 0;
    let mut rpi = Vec::new();
    for run in 0..args.seeds {
        let (train, eval) = match &fixed_eval {
            // A single run keeps the file order; repeated runs reshuffle it.
            Some(e) if args.seeds == 1 => (data.clone(), e.clone()),
            Some(e) => (shuffled(&data, common.seed, run), e.clone()),
            None => split(&data, args.train_fraction, streams::seed(common.seed, "split", run))?,
        };
        if eval.is_empty() {
            anyhow::bail!("evaluation set is empty");
        }
        sizes = (train.len(), eval.len());
        n_secrets = train.secret_bound().max(eval.secret_bound());
        let mut counts = vec![0usize; n_secrets];
        for &s in train.secrets() {
            counts[s] += 1;
        }
        rpi.push(1.0 - *counts.iter().max().unwrap() as f64 / train.len() as f64);

        let run_dir = match &common.out_dir {
            Some(d) if args.seeds == 1 => Some(ensure_dir(d)?),
            Some(d) => Some(ensure_dir(&d.join(format!("seed-{run}")))?),
            None => None,
        };
        for (i, &kind) in kinds.iter().enumerate() {
            if kind == EstimatorKind::Frequentist && !frequentist_applicable(&train, &eval, metric)? {
                info!("run {run}: frequentist not applicable, no evaluation observation occurs in training");
                applicable[i] = false;
                continue;
            }
            let trace = forward_estimate(&train, &eval, kind, metric)?;
            let (n, last) = trace.last().expect("nonempty training");
            info!("run {run}: {kind} estimate {last:.6} after {n} examples");
            values[i].push(last);
            smoothed[i].push(smoothed_final(&trace).expect("nonempty trace"));
            if let Some(dir) = &run_dir {
                write_trace(dir, &trace, kind)?;
            }
        }
    }

    let estimators: Vec<EstimatorSummary> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            // Applicability can differ between runs; any inapplicable run
            // marks the estimator as such.
            let ok = applicable[i] && values[i].len() as u64 == args.seeds;
            let (mean, std) = if ok { mean_std(&values[i]) } else { (f64::NAN, f64::NAN) };
            EstimatorSummary {
                estimator: kind,
                applicable: ok,
                mean: ok.then_some(mean),
                std: ok.then_some(std),
                values: if ok { values[i].clone() } else { Vec::new() },
            }
        })
        .collect();

    let best = estimators
        .iter()
        .enumerate()
        .filter(|(_, e)| e.applicable)
        .min_by(|(a, _), (b, _)| mean_std(&smoothed[*a]).0.total_cmp(&mean_std(&smoothed[*b]).0))
        .map(|(i, _)| i)
        .ok_or_else(|| config_error("none of the requested estimators applies to this data"))?;
    let selected = Selected {
        estimator: kinds[best],
        estimate: estimators[best].mean.unwrap(),
        std: estimators[best].std.unwrap(),
    };
    let random_guessing = mean_std(&rpi).0;
    let leakage = LeakageReport::from_risks(random_guessing, selected.estimate).ok();
    let nn_bound = estimators
        .iter()
        .find(|e| e.estimator == EstimatorKind::Nn && e.applicable)
        .and_then(|e| nn_lower_bound(e.mean.unwrap(), n_secrets.max(2)).ok());

    let summary = Summary {
        command: "estimate",
        train_size: sizes.0,
        eval_size: sizes.1,
        n_secrets,
        metric: match metric {
            Metric::Euclidean => "euclidean".into(),
            Metric::Ring { period } => format!("ring:{period}"),
        },
        seeds: args.seeds,
        estimators,
        selected,
        random_guessing,
        leakage,
        nn_lower_bound: nn_bound,
    };
    emit(&summary, common.out_dir.as_deref())
}
