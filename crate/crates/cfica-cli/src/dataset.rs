//! CSV chunk loading: column selection, label extraction, missing-value row
//! drops, and NaN/Inf rejection.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cfica::{Point, PointId};

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelColumn {
    None,
    Index(usize),
    Name(String),
}

impl LabelColumn {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("none") {
            LabelColumn::None
        } else if let Ok(i) = s.parse::<usize>() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub label_col: LabelColumn,
    /// Selected feature columns (indices or header names). Empty means all
    /// columns except the label column.
    pub feature_cols: Vec<String>,
    pub delimiter: u8,
    pub has_header: bool,
}

#[derive(Debug)]
pub struct LoadedChunk {
    pub points: Vec<Point>,
    pub dropped_rows: usize,
}

fn resolve_column(sel: &str, headers: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
    if let Ok(i) = sel.parse::<usize>() {
        if i >= width {
            bail!("column index {i} out of range (row width {width})");
        }
        return Ok(i);
    }
    let Some(headers) = headers else {
        bail!("column '{sel}' given by name but the file has no header row");
    };
    headers
        .iter()
        .position(|h| h == sel)
        .with_context(|| format!("no column named '{sel}' in header"))
}

/// Reads one chunk. Point ids are assigned sequentially from `first_id` in
/// row order. Rows with empty feature fields are dropped and counted; any
/// non-empty field that fails to parse as a finite number is an error naming
/// the line.
pub fn load_chunk(path: &Path, spec: &DatasetSpec, first_id: u64) -> Result<LoadedChunk> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .delimiter(spec.delimiter)
        .flexible(false)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = if spec.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };

    let mut points = Vec::new();
    let mut dropped_rows = 0usize;
    let mut next_id = first_id;
    let mut feature_idx: Option<Vec<usize>> = None;
    let mut label_idx: Option<Option<usize>> = None;

    for record in reader.records() {
        let record = record.with_context(|| format!("malformed CSV in {}", path.display()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let width = record.len();

        let label_i = match &label_idx {
            Some(i) => *i,
            None => {
                let resolved = match &spec.label_col {
                    LabelColumn::None => None,
                    LabelColumn::Index(i) => Some(resolve_column(&i.to_string(), headers.as_ref(), width)?),
                    LabelColumn::Name(n) => Some(resolve_column(n, headers.as_ref(), width)?),
                };
                label_idx = Some(resolved);
                resolved
            }
        };
        let feat_is = match &feature_idx {
            Some(v) => v.clone(),
            None => {
                let resolved: Vec<usize> = if spec.feature_cols.is_empty() {
                    (0..width).filter(|i| Some(*i) != label_i).collect()
                } else {
                    spec.feature_cols
                        .iter()
                        .map(|sel| resolve_column(sel, headers.as_ref(), width))
                        .collect::<Result<_>>()?
                };
                if resolved.is_empty() {
                    bail!("no feature columns selected");
                }
                feature_idx = Some(resolved.clone());
                resolved
            }
        };

        let mut features = Vec::with_capacity(feat_is.len());
        let mut missing = false;
        for i in &feat_is {
            let field = record
                .get(*i)
                .with_context(|| format!("{}:{line}: row has no column {i}", path.display()))?
                .trim();
            if field.is_empty() {
                missing = true;
                break;
            }
            let v: f64 = field.parse().with_context(|| {
                format!("{}:{line}: cannot parse '{field}' as a number", path.display())
            })?;
            if !v.is_finite() {
                bail!("{}:{line}: non-finite feature value '{field}'", path.display());
            }
            features.push(v);
        }
        if missing {
            dropped_rows += 1;
            continue;
        }

        let label = match label_i {
            Some(i) => {
                let field = record
                    .get(i)
                    .with_context(|| format!("{}:{line}: row has no label column {i}", path.display()))?
                    .trim();
                if field.is_empty() {
                    None
                } else {
                    Some(field.to_string())
                }
            }
            None => None,
        };

        points.push(Point::new(PointId(next_id), features, label));
        next_id += 1;
    }

    Ok(LoadedChunk {
        points,
        dropped_rows,
    })
}
