use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use leakest::estimators::{delta_convergence, ConvergenceMode, EstimateTrace};
use leakest::EstimatorKind;

use crate::output::ensure_dir;
use crate::{config_error, Common};

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Relative,
    Absolute,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    /// Trace CSVs named `<estimator>.csv`, or directories containing them.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Bayes risk the traces should approach.
    #[arg(long)]
    target: f64,
    /// Comma-separated convergence thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01,0.005")]
    delta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Relative)]
    mode: Mode,
}

fn trace_files(paths: &[PathBuf]) -> Result<Vec<(EstimatorKind, PathBuf)>> {
    let mut found = Vec::new();
    for path in paths {
        if path.is_dir() {
            for kind in EstimatorKind::ALL {
                let p = path.join(format!("{}.csv", kind.name()));
                if p.is_file() {
                    found.push((kind, p));
                }
            }
        } else {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let kind: EstimatorKind = stem
                .parse()
                .map_err(|_| config_error(format!("{}: file name does not name an estimator", path.display())))?;
            found.push((kind, path.clone()));
        }
    }
    if found.is_empty() {
        return Err(config_error("no trace files found"));
    }
    Ok(found)
}

fn load(kind: EstimatorKind, path: &Path) -> Result<EstimateTrace> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    EstimateTrace::read_csv(kind, BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// One row per delta, one column per trace; "X" marks a trace that never
/// converges.
fn table(
    traces: &[(EstimatorKind, EstimateTrace)],
    target: f64,
    deltas: &[f64],
    mode: ConvergenceMode,
) -> Result<String> {
    let mut out = String::from("delta");
    for (kind, _) in traces {
        out.push(',');
        out.push_str(kind.name());
    }
    out.push('\n');
    for &delta in deltas {
        out.push_str(&delta.to_string());
        for (_, trace) in traces {
            let cell = delta_convergence(trace, target, delta, mode).map_err(|e| config_error(e.to_string()))?;
            out.push(',');
            out.push_str(&cell.map_or_else(|| "X".to_string(), |n| n.to_string()));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn run(args: &ConvergenceArgs, common: &Common) -> Result<()> {
    if args.delta.iter().any(|&d| !(d > 0.0)) {
        return Err(config_error("every delta must be positive"));
    }
    let mode = match args.mode {
        Mode::Relative => ConvergenceMode::Relative,
        Mode::Absolute => ConvergenceMode::Absolute,
    };
    let traces = trace_files(&args.traces)?
        .into_iter()
        .map(|(kind, path)| Ok((kind, load(kind, &path)?)))
        .collect::<Result<Vec<_>>>()?;
    let text = table(&traces, args.target, &args.delta, mode)?;
    if let Some(dir) = &common.out_dir {
        let path = ensure_dir(dir)?.join("convergence.csv");
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}
