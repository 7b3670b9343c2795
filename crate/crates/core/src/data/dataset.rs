use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Real feature rows with integer class labels in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    feature_names: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse::<usize>()
            .map(LabelColumn::Index)
            .unwrap_or_else(|_| LabelColumn::Name(s.to_string())))
    }
}

impl TabularDataset {
    /// `num_classes` defaults to `max label + 1`.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {d} features, found {}", row.len()),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("non-finite value {v}"),
                });
            }
        }
        let inferred = labels.iter().max().map_or(0, |m| m + 1);
        let num_classes = num_classes.unwrap_or(inferred);
        if inferred > num_classes {
            return Err(Error::Range(format!(
                "label {} not below class count {num_classes}",
                inferred - 1
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} names for {} features",
                names.len(),
                self.dim()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    /// Rows at `indices`, keeping the class count.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            Some(self.num_classes),
        )?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Per-feature means.
    pub fn means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim())
            .map(|j| self.features.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }

    /// Writes features then a trailing `label` column, with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let mut header: Vec<String> = match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.dim()).map(|j| format!("f{j}")).collect(),
        };
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_label(cell: &str, row: usize) -> Result<usize> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        msg: format!("label `{cell}` is not numeric"),
    })?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Parse {
            row,
            msg: format!("label `{cell}` is not a non-negative integer"),
        });
    }
    Ok(v as usize)
}

/// Reads a numeric CSV. A first row containing any non-numeric cell is taken
/// as the header. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: &Path, label_column: &LabelColumn) -> Result<TabularDataset> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: &LabelColumn) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((i + 1, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::EmptyDataset);
    };
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let header = has_header.then(|| first.clone());
    let width = first.len();
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Parse {
                row: 1,
                msg: format!("label column {i} beyond {width} columns"),
            })
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Parse {
                row: 1,
                msg: format!("no label column named `{name}`"),
            })?,
    };
    let body = &records[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut features = Vec::with_capacity(body.len());
    let mut labels = Vec::with_capacity(body.len());
    for (row, cells) in body {
        if cells.len() != width {
            return Err(Error::Parse {
                row: *row,
                msg: format!("expected {width} cells, found {}", cells.len()),
            });
        }
        let mut values = Vec::with_capacity(width - 1);
        for (j, cell) in cells.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: *row,
                msg: format!("cell `{cell}` in column {j} is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: *row,
                    msg: format!("cell `{cell}` in column {j} is not finite"),
                });
            }
            values.push(v);
        }
        features.push(values);
        labels.push(parse_label(&cells[label_idx], *row)?);
    }
    let ds = TabularDataset::new(features, labels, None)?;
    match header {
        Some(mut h) => {
            h.remove(label_idx);
            ds.with_feature_names(h)
        }
        None => Ok(ds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_file() {
        let ds = parse_csv("a,b,y\n1,2,0\n3,4,1\n5,6,1\n", &"y".parse().unwrap()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.feature_names().unwrap(), ["a", "b"]);
    }

    #[test]
    fn headerless_with_index() {
        let ds = parse_csv("0,1.5,2.5\n1,3.5,4.5\n", &LabelColumn::Index(0)).unwrap();
        assert_eq!(ds.labels(), [0, 1]);
        assert_eq!(ds.features()[1], [3.5, 4.5]);
    }

    #[test]
    fn nan_names_row() {
        let err = parse_csv("a,y\n1,0\nNaN,1\n", &"y".parse().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(
            parse_csv("a,b,y\n", &"y".parse().unwrap()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn ragged_and_non_numeric() {
        assert!(matches!(
            parse_csv("1,2,0\n3,1\n", &LabelColumn::Index(2)),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse_csv("a,y\n1,0\nx,1\n", &"y".parse().unwrap()),
            Err(Error::Parse { row: 3, .. })
        ));
        assert!(matches!(
            parse_csv("a,y\n1,0\n", &"label".parse().unwrap()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ds = TabularDataset::new(vec![vec![0.1, -2.0], vec![1e-300, 3.0]], vec![1, 0], None)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.write_csv(&path).unwrap();
        let back = load_csv(&path, &"label".parse().unwrap()).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.labels(), ds.labels());
    }
}
