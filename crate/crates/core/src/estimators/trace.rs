use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EstimatorKind;
use crate::error::{Error, Result};

/// Estimates of one rule as a function of the training-set size.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTrace {
    pub kind: EstimatorKind,
    points: Vec<(usize, f64)>,
}

impl EstimateTrace {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimateTrace {
            kind,
            points: Vec::new(),
        }
    }

    pub fn from_points(kind: EstimatorKind, points: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut t = EstimateTrace::new(kind);
        for (n, e) in points {
            t.push(n, e)?;
        }
        Ok(t)
    }

    /// Appends a point; `n` must exceed the last one and the estimate must
    /// lie in `[0, 1]`.
    pub fn push(&mut self, n: usize, estimate: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if n <= last {
                return Err(Error::InvalidArgument(format!(
                    "trace sizes must increase: {n} after {last}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&estimate) {
            return Err(Error::InvalidArgument(format!("estimate {estimate} is not in [0, 1]")));
        }
        self.points.push((n, estimate));
        Ok(())
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<(usize, f64)> {
        self.points.last().copied()
    }

    /// Estimate recorded at exactly `n`.
    pub fn at(&self, n: usize) -> Option<f64> {
        self.points
            .binary_search_by_key(&n, |&(m, _)| m)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// `n,estimate` header then one row per point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::from("n,estimate\n");
        for &(n, e) in &self.points {
            writeln!(buf, "{n},{e}").unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: Read>(kind: EstimatorKind, input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "n" || &headers[1] != "estimate" {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `n,estimate`".into(),
            });
        }
        let mut t = EstimateTrace::new(kind);
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("bad {what}"),
            };
            let n: usize = record[0].parse().map_err(|_| bad("size"))?;
            let e: f64 = record[1].parse().map_err(|_| bad("estimate"))?;
            t.push(n, e).map_err(|err| Error::Parse {
                line,
                message: err.to_string(),
            })?;
        }
        Ok(t)
    }
}

/// How the distance to the target is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceMode {
    /// `|e − t| / t < δ`
    Relative,
    /// `|e − t| < δ`
    Absolute,
}

/// Smallest `n` from which every later point of `trace` stays within `delta`
/// of `target`; `None` when the last point is outside.
pub fn delta_convergence(
    trace: &EstimateTrace,
    target: f64,
    delta: f64,
    mode: ConvergenceMode,
) -> Result<Option<usize>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if mode == ConvergenceMode::Relative && !(target > 0.0) {
        return Err(Error::InvalidArgument(
            "relative convergence needs a positive target".into(),
        ));
    }
    let inside = |e: f64| match mode {
        ConvergenceMode::Relative => (e - target).abs() / target < delta,
        ConvergenceMode::Absolute => (e - target).abs() < delta,
    };
    let mut first = None;
    for &(n, e) in trace.points().iter().rev() {
        if !inside(e) {
            break;
        }
        first = Some(n);
    }
    Ok(first)
}

/// Number of tail points averaged by [`select_estimate`] for a trace
/// ending at `final_n`.
pub fn smoothing_window(final_n: usize) -> usize {
    (final_n / 100).max(1)
}

/// Mean of the last [`smoothing_window`] points.
pub fn smoothed_final(trace: &EstimateTrace) -> Option<f64> {
    let (final_n, _) = trace.last()?;
    let w = smoothing_window(final_n).min(trace.len());
    let tail = &trace.points()[trace.len() - w..];
    Some(tail.iter().map(|&(_, e)| e).sum::<f64>() / w as f64)
}

/// The rule with the smallest smoothed final estimate. Estimates approach
/// the Bayes risk from above, so the smallest is the most converged; ties
/// go to the earlier trace.
pub fn select_estimate(traces: &[EstimateTrace]) -> Result<(EstimatorKind, f64)> {
    let mut best: Option<(EstimatorKind, f64)> = None;
    let mut final_n = None;
    for t in traces {
        let (n, _) = t.last().ok_or(Error::Empty("trace"))?;
        match final_n {
            None => final_n = Some(n),
            Some(m) if m != n => {
                return Err(Error::InvalidArgument(format!(
                    "traces end at different sizes ({m} and {n})"
                )))
            }
            _ => {}
        }
        let v = smoothed_final(t).unwrap();
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((t.kind, v));
        }
    }
    best.ok_or(Error::Empty("trace list"))
}
