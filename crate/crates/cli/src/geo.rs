use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use leakest::geo::{
    blahut_arimoto_grid, effective_support, epsilon_per_meter, make_gowalla_grids, planar_geometric,
    prior_from_checkins, read_checkins, sf_checkins, utility, BlahutArimotoOptions, PlanarLaplacian,
};
use leakest::io::{save_channel, save_dataset};
use leakest::measures::random_guessing_error;
use leakest::{sample, LeakageReport, Prior};
use log::info;
use serde::Serialize;

use crate::output::{emit, ensure_dir};
use crate::{config_error, streams, Common};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mechanism {
    Geometric,
    Laplacian,
    BlahutArimoto,
}

#[derive(Args, Debug)]
pub struct GeoArgs {
    #[arg(value_enum)]
    mechanism: Mechanism,
    /// Privacy factor per 100 m.
    #[arg(long)]
    nu: f64,
    /// Check-in CSV (`lat,lon` per line) defining the prior; a synthetic
    /// San Francisco prior is used without it.
    #[arg(long)]
    checkins: Option<PathBuf>,
    /// Number of synthetic check-ins drawn when no file is given.
    #[arg(long, default_value_t = 300_000)]
    synthetic_checkins: usize,
    /// Draw this many examples from the mechanism into dataset.csv.
    #[arg(long)]
    samples: Option<usize>,
    /// Write the full channel matrix (large: 400 x 115 600 entries).
    #[arg(long)]
    write_channel: bool,
    /// Blahut-Arimoto inverse temperature per meter; defaults to ln(nu)/100.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Serialize)]
struct BaInfo {
    beta: f64,
    iterations: usize,
    converged: bool,
    effective_support: usize,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    mechanism: &'static str,
    nu: f64,
    n_secrets: usize,
    /// Present for the mechanisms with a finite channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    leakage: Option<LeakageReport>,
    random_guessing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    utility_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blahut_arimoto: Option<BaInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

pub fn run(args: &GeoArgs, common: &Common) -> Result<()> {
    epsilon_per_meter(args.nu).map_err(|e| config_error(e.to_string()))?;
    if (args.samples.is_some() || args.write_channel) && common.out_dir.is_none() {
        return Err(config_error("--samples and --write-channel need --out-dir"));
    }
    if args.mechanism == Mechanism::Laplacian && args.write_channel {
        return Err(config_error(
            "the Laplacian mechanism has a continuous output and no channel matrix",
        ));
    }
    let (input, output) = make_gowalla_grids();
    let checkins = match &args.checkins {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_checkins(file).with_context(|| format!("reading {}", path.display()))?
        }
        None => sf_checkins(
            &input,
            args.synthetic_checkins,
            streams::seed(common.seed, "checkins", 0),
        )
        .map_err(|e| config_error(e.to_string()))?,
    };
    let built = prior_from_checkins::<f64>(&checkins, &input)?;
    info!(
        "prior from {} check-ins ({} outside the grid)",
        checkins.len(),
        built.discarded
    );
    let prior: Prior<f64> = built.prior;
    let random_guessing = random_guessing_error(&prior);
    let out_dir = common.out_dir.as_deref().map(ensure_dir).transpose()?;

    let mut summary = Summary {
        command: "geo",
        mechanism: match args.mechanism {
            Mechanism::Geometric => "geometric",
            Mechanism::Laplacian => "laplacian",
            Mechanism::BlahutArimoto => "blahut-arimoto",
        },
        nu: args.nu,
        n_secrets: input.len(),
        leakage: None,
        random_guessing,
        utility_m: None,
        blahut_arimoto: None,
        samples: args.samples,
    };

    let system = match args.mechanism {
        Mechanism::Laplacian => {
            if let (Some(n), Some(dir)) = (args.samples, &out_dir) {
                let mech = PlanarLaplacian::new(args.nu, &input, &output)?;
                let mut rng = streams::rng(common.seed, "laplacian", 0);
                let data = mech.sample_dataset(&prior, n, &mut rng)?;
                save_dataset(&data, dir.join("dataset.csv")).context("writing dataset")?;
            }
            None
        }
        Mechanism::Geometric => Some(planar_geometric(prior.clone(), args.nu, &input, &output)?),
        Mechanism::BlahutArimoto => {
            let beta = args.beta.unwrap_or(args.nu.ln() / 100.0);
            let options = BlahutArimotoOptions {
                max_iters: args.max_iters,
                tol: args.tol,
            };
            let result = blahut_arimoto_grid(&prior, &input, &output, beta, options)?;
            summary.blahut_arimoto = Some(BaInfo {
                beta,
                iterations: result.iterations,
                converged: result.converged,
                effective_support: effective_support(&result.system, 1e-6),
            });
            Some(result.system)
        }
    };

    if let Some(system) = system {
        let report = LeakageReport::exact(&system)?;
        info!("R* = {:.6}, R^pi = {:.6}", report.bayes_risk, report.random_guessing);
        summary.leakage = Some(report);
        summary.utility_m = Some(utility(&system, &input.centers())?);
        if let Some(dir) = &out_dir {
            if args.write_channel {
                save_channel(&system, dir.join("channel.txt")).context("writing channel")?;
            }
            if let Some(n) = args.samples {
                let data = sample(&system, n, streams::seed(common.seed, "sample", 0))?;
                save_dataset(&data, dir.join("dataset.csv")).context("writing dataset")?;
            }
        }
    }
    emit(&summary, common.out_dir.as_deref())
}
