use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use leakest::io::{save_channel, save_dataset};
use leakest::synth::{self, GeometricSpec, SpikySpec};
use leakest::{sample, LeakageReport, System64};
use log::info;
use serde::Serialize;

use crate::output::{emit, ensure_dir};
use crate::{config_error, streams, Common};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(subcommand)]
    system: SystemKind,
    /// Also draw this many examples from the system.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Clone, Copy)]
struct Size {
    #[arg(long)]
    secrets: usize,
    #[arg(long)]
    objects: usize,
}

#[derive(Subcommand, Debug)]
enum SystemKind {
    /// Truncated geometric channel with privacy parameter nu.
    Geometric {
        #[command(flatten)]
        size: Size,
        #[arg(long)]
        nu: f64,
    },
    /// Even mixture of the geometric channel and a copy shifted by 2 sigma secrets.
    Multimodal {
        #[command(flatten)]
        size: Size,
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 5)]
        sigma: usize,
        /// Mixture weights `w1,w2`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.5])]
        weights: Vec<f64>,
    },
    /// Two secrets on alternating objects of a ring of q objects.
    Spiky {
        #[arg(long)]
        q: usize,
    },
    /// Rows drawn uniformly from the simplex.
    Random {
        #[command(flatten)]
        size: Size,
    },
    /// Every row uniform: no leakage.
    Uniform {
        #[command(flatten)]
        size: Size,
    },
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    system: &'static str,
    n_secrets: usize,
    n_objects: usize,
    /// Ring period to pass to `estimate --ring`, for ring-topology systems.
    #[serde(skip_serializing_if = "Option::is_none")]
    ring_period: Option<f64>,
    leakage: LeakageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

fn build(kind: &SystemKind, seed: u64) -> Result<(&'static str, System64, Option<f64>)> {
    let config = |e: leakest::Error| config_error(e.to_string());
    Ok(match kind {
        SystemKind::Geometric { size, nu } => (
            "geometric",
            synth::geometric_system(&GeometricSpec::new(size.secrets, size.objects, *nu)).map_err(config)?,
            None,
        ),
        SystemKind::Multimodal {
            size,
            nu,
            sigma,
            weights,
        } => (
            "multimodal",
            synth::multimodal_system(
                &GeometricSpec::new(size.secrets, size.objects, *nu),
                *sigma,
                (weights[0], weights[1]),
            )
            .map_err(config)?,
            None,
        ),
        SystemKind::Spiky { q } => {
            let spec = SpikySpec::new(*q).map_err(config)?;
            ("spiky", synth::spiky_system(&spec).map_err(config)?, Some(*q as f64))
        }
        SystemKind::Random { size } => (
            "random",
            synth::random_system(size.secrets, size.objects, streams::seed(seed, "random-system", 0))
                .map_err(config)?,
            None,
        ),
        SystemKind::Uniform { size } => (
            "uniform",
            synth::uniform_system(size.secrets, size.objects).map_err(config)?,
            None,
        ),
    })
}

pub fn run(args: &SynthArgs, common: &Common) -> Result<()> {
    let (name, system, ring_period) = build(&args.system, common.seed)?;
    let leakage = LeakageReport::exact(&system)?;
    info!(
        "{name}: R* = {:.6}, R^pi = {:.6}",
        leakage.bayes_risk, leakage.random_guessing
    );
    if let Some(dir) = &common.out_dir {
        let dir = ensure_dir(dir)?;
        save_channel(&system, dir.join("channel.txt")).context("writing channel")?;
        if let Some(n) = args.samples {
            let data = sample(&system, n, streams::seed(common.seed, "sample", 0))?;
            save_dataset(&data, dir.join("dataset.csv")).context("writing dataset")?;
        }
    } else if args.samples.is_some() {
        return Err(config_error("--samples needs --out-dir"));
    }
    let summary = Summary {
        command: "synth",
        system: name,
        n_secrets: system.n_secrets(),
        n_objects: system.n_objects(),
        ring_period,
        leakage,
        samples: args.samples,
    };
    emit(&summary, common.out_dir.as_deref())
}
