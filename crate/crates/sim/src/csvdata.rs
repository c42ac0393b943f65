//! Datasets as CSV: one row per sample, the label then the flattened values.

use std::io::{BufRead, Write};

use sfedca_core::data::Dataset;
use sfedca_core::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Dataset(#[from] sfedca_core::Error),
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    for (x, y) in dataset.view().iter() {
        write!(out, "{y}")?;
        for v in x.values() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Reads rows written by [`write_dataset`]. The class count is one more
/// than the largest label, at least 2.
pub fn read_dataset<R: BufRead>(input: R, name: &str) -> Result<Dataset, CsvError> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| CsvError::Parse { line: i + 1, msg };
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default().trim();
        let label: usize = label.parse().map_err(|_| err(format!("bad label {label:?}")))?;
        let values = fields
            .map(|f| f.trim().parse::<f64>().map_err(|_| err(format!("bad value {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(err("row has no values".into()));
        }
        samples.push(Tensor::from_vec(values));
        labels.push(label);
    }
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Ok(Dataset::new(samples, labels, classes, name.to_string())?)
}
