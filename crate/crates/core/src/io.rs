//! Text formats for datasets and channels.
//!
//! Dataset CSV: one example per line, `secret,x1,...,xd`, no header.
//! Channel file: a `rows cols` line, one whitespace-separated row per secret,
//! then optionally a `prior:` line and an `objects:` line. The objects line
//! holds the observation dimension followed by the flattened coordinates of
//! every column; without it columns sit at their index.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::system::{ChannelMatrix, ObjectValues, Prior, System};

pub fn write_dataset<T: Real, W: Write>(dataset: &Dataset<T>, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let mut line = String::new();
    for ex in dataset.iter() {
        line.clear();
        write!(line, "{}", ex.secret).unwrap();
        for x in ex.observation {
            write!(line, ",{x}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset<T: Real>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, File::create(path)?)
}

/// Reads a dataset CSV. The dimension is taken from the first record.
pub fn read_dataset<T: Real, R: Read>(input: R) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out: Option<Dataset<T>> = None;
    let mut obs: Vec<T> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected a secret and at least one coordinate".into(),
            });
        }
        let secret: usize = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad secret id {:?}", &record[0]),
        })?;
        obs.clear();
        for field in record.iter().skip(1) {
            let x: T = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad coordinate {field:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite coordinate {field:?}"),
                });
            }
            obs.push(x);
        }
        let d = out.get_or_insert(Dataset::new(obs.len())?);
        d.push(secret, &obs).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    out.ok_or(Error::Empty("dataset file"))
}

pub fn load_dataset<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut d: Dataset<T> = read_dataset(File::open(path)?)?;
    d.metadata.source = path.display().to_string();
    Ok(d)
}

/// Writes the channel, prior and object coordinates of `system`.
pub fn write_channel<T: Real, W: Write>(system: &System<T>, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let ch = system.channel();
    writeln!(out, "{} {}", ch.n_secrets(), ch.n_objects())?;
    let mut line = String::new();
    for s in 0..ch.n_secrets() {
        join_into(&mut line, ch.row(s));
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    join_into(&mut line, system.prior().probs());
    writeln!(out, "prior: {line}")?;
    let objects = system.objects();
    if *objects != ObjectValues::indices(ch.n_objects()) {
        join_into(&mut line, objects.coords());
        writeln!(out, "objects: {} {line}", objects.dim())?;
    }
    out.flush()?;
    Ok(())
}

fn join_into<T: Real>(line: &mut String, values: &[T]) {
    line.clear();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        write!(line, "{v}").unwrap();
    }
}

pub fn save_channel<T: Real>(system: &System<T>, path: impl AsRef<Path>) -> Result<()> {
    write_channel(system, File::create(path)?)
}

/// Parses a channel file. A missing prior line means a uniform prior.
pub fn read_channel<T: Real, R: Read>(input: R) -> Result<System<T>> {
    let reader = BufReader::new(input);
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let (line_no, header) = lines.next().ok_or(Error::Empty("channel file"))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(line_no, "header must be `rows cols`"))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(line_no, "header must be `rows cols`"));
    };

    let mut data = Vec::with_capacity(rows * cols);
    for s in 0..rows {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(line_no + s + 1, "missing channel row"))?;
        let row = parse_floats::<T>(&line?, line_no)?;
        if row.len() != cols {
            return Err(parse_err(
                line_no,
                &format!("row has {} entries, expected {cols}", row.len()),
            ));
        }
        data.extend(row);
    }
    let channel = ChannelMatrix::new_unchecked(rows, cols, data)?;

    let mut prior = None;
    let mut objects = None;
    for (line_no, line) in lines {
        let line = line?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("prior:") {
            let p = parse_floats::<T>(rest, line_no)?;
            prior = Some(Prior::new(p)?);
        } else if let Some(rest) = line.strip_prefix("objects:") {
            let mut it = rest.split_whitespace();
            let dim: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(line_no, "objects line must start with the dimension"))?;
            let coords = parse_floats::<T>(&it.collect::<Vec<_>>().join(" "), line_no)?;
            objects = Some(ObjectValues::new(dim, coords)?);
        } else {
            return Err(parse_err(line_no, "unexpected trailing line"));
        }
    }
    let prior = match prior {
        Some(p) => p,
        None => Prior::uniform(rows)?,
    };
    let objects = objects.unwrap_or_else(|| ObjectValues::indices(cols));
    let system = System::with_objects(prior, channel, objects)?;
    system.check()?;
    Ok(system)
}

pub fn load_channel<T: Real>(path: impl AsRef<Path>) -> Result<System<T>> {
    read_channel(File::open(path)?)
}

fn parse_floats<T: Real>(s: &str, line: usize) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| parse_err(line, &format!("bad number {t:?}")))
        })
        .collect()
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let mut d = Dataset::<f64>::new(2).unwrap();
        d.push(0, &[0.1, -3.0]).unwrap();
        d.push(7, &[1e-300, 123456.789]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "0,0.1,-3\n7,0.000".to_string() + &"0".repeat(296) + "1,123456.789\n"
        );
        let back: Dataset<f64> = read_dataset(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn dataset_errors_carry_line() {
        let r = read_dataset::<f64, _>("0,1\n1,x\n".as_bytes());
        assert!(matches!(r, Err(Error::Parse { line: 2, .. })));
        let r = read_dataset::<f64, _>("0,1\n1,2,3\n".as_bytes());
        assert!(matches!(r, Err(Error::Parse { line: 2, .. })));
        let r = read_dataset::<f64, _>("-1,1\n".as_bytes());
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn channel_round_trip() {
        let ch = ChannelMatrix::from_rows(vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        let objects = ObjectValues::new(2, vec![0.0, 1.0, 5.0, 5.5]).unwrap();
        let sys = System::with_objects(Prior::new(vec![0.4, 0.6]).unwrap(), ch, objects).unwrap();
        let mut buf = Vec::new();
        write_channel(&sys, &mut buf).unwrap();
        let back: System<f64> = read_channel(&buf[..]).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn channel_without_prior_is_uniform() {
        let sys: System<f64> = read_channel("2 2\n1 0\n0.5 0.5\n".as_bytes()).unwrap();
        assert_eq!(sys.prior().probs(), &[0.5, 0.5]);
        assert_eq!(sys.objects().coords(), &[0.0, 1.0]);
    }

    #[test]
    fn channel_rejects_non_stochastic_rows() {
        let r = read_channel::<f64, _>("1 2\n0.5 0.6\n".as_bytes());
        assert!(matches!(r, Err(Error::InvalidSystem(_))));
        let r = read_channel::<f64, _>("2 2\n1 0\n".as_bytes());
        assert!(matches!(r, Err(Error::Parse { .. })));
    }
}
