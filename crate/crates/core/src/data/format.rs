//! Plain-text (`.ldl`) and CSV dataset files.
//!
//! `.ldl` layout:
//!
//! ```text
//! <m> <C>
//! #labels: name_1 ... name_C        (optional)
//! x_1 ... x_m | d_1 ... d_C         (one line per sample)
//! ```
//!
//! CSV layout: a header row, then `m` feature columns followed by `C`
//! probability columns. Probability columns are the ones whose header starts
//! with `label:`; the rest of the header becomes the label name.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::data::{Dataset, LabelDistribution, Sample, SIMPLEX_TOLERANCE};
use crate::error::{DataError, Error, Result};

/// Targets whose sum is off by more than the simplex tolerance but within
/// this distance of 1 are renormalized on load;
/// anything further off is rejected.
pub const SUM_REPAIR_TOLERANCE: f64 = 1e-6;

const LABEL_PREFIX: &str = "label:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Ldl,
    Csv,
}

impl DatasetFormat {
    /// Guesses from the file extension, defaulting to `.ldl`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Ldl,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ldl" => Ok(DatasetFormat::Ldl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let file = File::open(path)?;
    match format {
        DatasetFormat::Ldl => read_ldl(BufReader::new(file)),
        DatasetFormat::Csv => read_csv(file),
    }
}

/// Writes with 17 significant digits so that loading gives back the same
/// bits.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>, format: DatasetFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        DatasetFormat::Ldl => write_ldl(dataset, &mut out)?,
        DatasetFormat::Csv => write_csv(dataset, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn read_ldl<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader
        .lines()
        .map(|l| l.map_err(Error::from))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));

    let header = lines
        .next()
        .ok_or_else(|| DataError::MalformedHeader("missing header line".into()))??;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| DataError::MalformedHeader(format!("expected \"<m> <C>\", got {header:?}")))
    };
    if dims.len() != 2 {
        return Err(DataError::MalformedHeader(format!("expected \"<m> <C>\", got {header:?}")).into());
    }
    let feature_dim = parse_dim(dims[0])?;
    let label_count = parse_dim(dims[1])?;
    if feature_dim == 0 || label_count == 0 {
        return Err(DataError::MalformedHeader("dimensions must be positive".into()).into());
    }

    let mut label_names = None;
    let mut samples = Vec::new();
    let mut row = 0;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if let Some(names) = trimmed.strip_prefix("#labels:") {
            if row > 0 || label_names.is_some() {
                return Err(DataError::MalformedHeader("#labels line must follow the header".into()).into());
            }
            let names: Vec<String> = names.split_whitespace().map(str::to_owned).collect();
            if names.len() != label_count {
                return Err(DataError::MalformedHeader(format!(
                    "expected {label_count} label names, found {}",
                    names.len()
                ))
                .into());
            }
            label_names = Some(names);
            continue;
        }
        row += 1;
        samples.push(parse_ldl_row(trimmed, row, feature_dim, label_count)?);
    }
    if samples.is_empty() {
        return Err(DataError::Empty.into());
    }
    Dataset::new(samples, label_names)
}

fn parse_ldl_row(line: &str, row: usize, feature_dim: usize, label_count: usize) -> Result<Sample> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let expected = feature_dim + label_count + 1;
    let bar = tokens.iter().position(|t| *t == "|");
    let bar = match bar {
        Some(pos) if pos == feature_dim && tokens.len() == expected => pos,
        _ => {
            return Err(DataError::RowArity {
                row,
                expected,
                found: tokens.len(),
            }
            .into())
        }
    };
    let values = tokens[..bar]
        .iter()
        .chain(&tokens[bar + 1..])
        .map(|t| {
            t.parse::<f64>().map_err(|_| DataError::Parse {
                row,
                token: (*t).to_owned(),
            })
        })
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    build_sample(values, row, feature_dim)
}

/// Splits `values` into features and target and applies the validation
/// and repair rules shared by both file formats.
fn build_sample(values: Vec<f64>, row: usize, feature_dim: usize) -> Result<Sample> {
    if let Some(column) = values.iter().position(|v| !v.is_finite()) {
        return Err(DataError::NonFinite { row, column: column + 1 }.into());
    }
    let (features, probs) = values.split_at(feature_dim);
    if let Some((label, &value)) = probs.iter().enumerate().find(|(_, p)| **p < 0.0) {
        return Err(DataError::NegativeProbability { row, label: label + 1, value }.into());
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() >= SUM_REPAIR_TOLERANCE {
        return Err(DataError::DistributionSum { row, sum }.into());
    }
    // Rows already on the simplex are kept verbatim so saved files reload
    // bit for bit.
    let probs: Vec<f64> = if (sum - 1.0).abs() <= SIMPLEX_TOLERANCE {
        probs.to_vec()
    } else {
        probs.iter().map(|p| p / sum).collect()
    };
    let target = LabelDistribution::new(probs).map_err(|_| DataError::DistributionSum { row, sum })?;
    Ok(Sample::new(features.to_vec(), target))
}

fn write_ldl<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    writeln!(out, "{} {}", dataset.feature_dim(), dataset.label_count())?;
    if let Some(names) = dataset.label_names() {
        writeln!(out, "#labels: {}", names.join(" "))?;
    }
    for sample in dataset.samples() {
        let features: Vec<String> = sample.features.iter().map(|v| fmt17(*v)).collect();
        let probs: Vec<String> = sample.target.as_slice().iter().map(|v| fmt17(*v)).collect();
        writeln!(out, "{} | {}", features.join(" "), probs.join(" "))?;
    }
    Ok(())
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let csv_err = |e: csv::Error| Error::from(DataError::Csv(e.to_string()));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let first_label = headers
        .iter()
        .position(|h| h.starts_with(LABEL_PREFIX))
        .ok_or_else(|| DataError::MalformedHeader(format!("no {LABEL_PREFIX:?} columns in csv header")))?;
    if !headers.iter().skip(first_label).all(|h| h.starts_with(LABEL_PREFIX)) {
        return Err(DataError::MalformedHeader("label columns must come last".into()).into());
    }
    if first_label == 0 {
        return Err(DataError::MalformedHeader("csv header has no feature columns".into()).into());
    }
    let feature_dim = first_label;
    let names: Vec<String> = headers
        .iter()
        .skip(first_label)
        .map(|h| h[LABEL_PREFIX.len()..].to_owned())
        .collect();
    let label_names = if names.iter().all(|n| !n.is_empty()) {
        Some(names)
    } else {
        None
    };

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => DataError::RowArity {
                row,
                expected: headers.len(),
                found: *len as usize,
            }
            .into(),
            _ => csv_err(e),
        })?;
        let values = record
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| DataError::Parse {
                    row,
                    token: t.to_owned(),
                })
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        samples.push(build_sample(values, row, feature_dim)?);
    }
    if samples.is_empty() {
        return Err(DataError::Empty.into());
    }
    Dataset::new(samples, label_names)
}

fn write_csv<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::from(DataError::Csv(e.to_string()));
    let mut header: Vec<String> = (0..dataset.feature_dim()).map(|j| format!("x{j}")).collect();
    match dataset.label_names() {
        Some(names) => header.extend(names.iter().map(|n| format!("{LABEL_PREFIX}{n}"))),
        None => header.extend((0..dataset.label_count()).map(|c| format!("{LABEL_PREFIX}y{c}"))),
    }
    wtr.write_record(&header).map_err(csv_err)?;
    for sample in dataset.samples() {
        let record: Vec<String> = sample
            .features
            .iter()
            .chain(sample.target.as_slice())
            .map(|v| fmt17(*v))
            .collect();
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
