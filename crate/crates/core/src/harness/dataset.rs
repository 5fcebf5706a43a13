//! Dataset ingestion. Every feature is min-max scaled into
//! `[-FEATURE_BOUND, FEATURE_BOUND]`; labels become indices `0..classes`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_BOUND: f64 = 0.2;

const IRIS_CSV: &str = include_str!("../../data/iris.csv");
const BREAST_CANCER_CSV: &str = include_str!("../../data/breast_cancer.csv");
const MNIST_CSV: &str = include_str!("../../data/mnist_1k.csv");

/// Per-feature range observed before scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Original label text of each class index.
    pub class_names: Vec<String>,
    pub normalization: Normalization,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Builds a dataset from raw rows, scaling every column.
    pub fn from_raw(name: &str, raw: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Dataset(format!("{name}: no samples")));
        }
        let n = raw[0].len();
        if n == 0 {
            return Err(Error::Dataset(format!("{name}: no feature columns")));
        }
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for row in &raw {
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        let features = raw
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let span = max[k] - min[k];
                        if span > 0.0 {
                            (2.0 * (v - min[k]) / span - 1.0) * FEATURE_BOUND
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let (labels, class_names) = index_labels(&labels);
        Ok(Dataset {
            name: name.to_string(),
            features,
            labels,
            classes: class_names.len(),
            class_names,
            normalization: Normalization {
                min,
                max,
                bound: FEATURE_BOUND,
            },
        })
    }

    /// Parses CSV text: a header line, numeric feature columns, label last.
    pub fn from_csv<R: Read>(name: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header_len = rdr
            .headers()
            .map_err(|e| Error::Dataset(format!("{name}: {e}")))?
            .len();
        if header_len < 2 {
            return Err(Error::Dataset(format!("{name}: need at least one feature and a label column")));
        }
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Dataset(format!("{name}: {e}")))?;
            if rec.len() != header_len {
                return Err(Error::Dataset(format!(
                    "{name}: row {} has {} fields, expected {header_len}",
                    line + 2,
                    rec.len()
                )));
            }
            let row = rec
                .iter()
                .take(header_len - 1)
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Dataset(format!("{name}: row {}: bad value '{f}'", line + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let label = rec[header_len - 1].to_string();
            if label.is_empty() {
                return Err(Error::Dataset(format!("{name}: row {}: missing label", line + 2)));
            }
            raw.push(row);
            labels.push(label);
        }
        Self::from_raw(name, raw, labels)
    }

    /// Shuffles samples in place with a seeded generator.
    pub fn shuffle(&mut self, seed: u64) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.features = order.iter().map(|&i| self.features[i].clone()).collect();
        self.labels = order.iter().map(|&i| self.labels[i]).collect();
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            class_names: self.class_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Stratified split; each class contributes `round(test_fraction · count)`
    /// samples to the test set. A fraction of zero trains and tests on
    /// everything.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidParameter(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        if test_fraction == 0.0 {
            return Ok((self.clone(), self.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for c in 0..self.classes {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            idx.shuffle(&mut rng);
            let k = (test_fraction * idx.len() as f64).round() as usize;
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
        if train.is_empty() || test.is_empty() {
            return Err(Error::Dataset(format!("{}: split left an empty partition", self.name)));
        }
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Numeric labels sort numerically, others lexically.
fn index_labels(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric = labels.iter().all(|l| l.parse::<f64>().is_ok());
    let mut names: Vec<String> = labels.to_vec();
    if numeric {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    } else {
        names.sort();
    }
    names.dedup_by(|a, b| {
        if numeric {
            a.parse::<f64>().unwrap() == b.parse::<f64>().unwrap()
        } else {
            a == b
        }
    });
    let map: BTreeMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let idx = labels
        .iter()
        .map(|l| {
            map.get(l).copied().unwrap_or_else(|| {
                let v = l.parse::<f64>().unwrap();
                names.iter().position(|n| n.parse::<f64>().unwrap() == v).unwrap()
            })
        })
        .collect();
    (idx, names)
}

pub const BUILTINS: [&str; 4] = ["xor", "iris", "breast_cancer", "mnist"];

fn builtin(name: &str) -> Option<Result<Dataset>> {
    match name {
        "xor" => Some(Dataset::from_raw(
            "xor",
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            ["0", "1", "1", "0"].iter().map(|s| s.to_string()).collect(),
        )),
        "iris" => Some(Dataset::from_csv("iris", IRIS_CSV.as_bytes())),
        "breast_cancer" | "bcw" | "breast-cancer" => {
            Some(Dataset::from_csv("breast_cancer", BREAST_CANCER_CSV.as_bytes()))
        }
        // 1000-image subset, 100 per digit.
        "mnist" | "mnist_1k" => Some(Dataset::from_csv("mnist", MNIST_CSV.as_bytes())),
        _ => None,
    }
}

/// Loads a builtin by name or a CSV file by path. Builtins keep their
/// canonical order; use [`Dataset::shuffle`] or [`Dataset::split`] for a
/// seeded order.
pub fn load_dataset(source: &str) -> Result<Dataset> {
    if let Some(ds) = builtin(source) {
        return ds;
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::Unknown {
            kind: "dataset",
            name: source.to_string(),
        });
    }
    let file = std::fs::File::open(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    Dataset::from_csv(name, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_builtin() {
        let d = load_dataset("xor").unwrap();
        assert_eq!((d.len(), d.n_features(), d.classes), (4, 2, 2));
        assert_eq!(d.labels, vec![0, 1, 1, 0]);
        assert_eq!(d.features[1], vec![-0.2, 0.2]);
    }

    #[test]
    fn iris_builtin() {
        let d = load_dataset("iris").unwrap();
        assert_eq!((d.len(), d.n_features(), d.classes), (150, 4, 3));
        for row in &d.features {
            for &v in row {
                assert!((-FEATURE_BOUND..=FEATURE_BOUND).contains(&v));
            }
        }
    }

    #[test]
    fn breast_cancer_builtin() {
        let d = load_dataset("breast_cancer").unwrap();
        assert_eq!((d.len(), d.n_features(), d.classes), (569, 30, 2));
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 212);
    }

    #[test]
    fn malformed_inputs() {
        assert!(Dataset::from_csv("e", "".as_bytes()).is_err());
        assert!(Dataset::from_csv("h", "a,label\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("n", "a,label\nfoo,1\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("m", "a,b,label\n1,,0\n".as_bytes()).is_err());
        assert!(load_dataset("no-such-builtin").is_err());
    }

    #[test]
    fn text_labels_and_constant_columns() {
        let d = Dataset::from_csv("t", "a,b,label\n1,5,cat\n3,5,dog\n2,5,cat\n".as_bytes()).unwrap();
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.class_names, vec!["cat", "dog"]);
        assert_eq!(d.features[1], vec![0.2, 0.0]);
    }

    #[test]
    fn stratified_split() {
        let d = load_dataset("iris").unwrap();
        let (train, test) = d.split(0.3, 7).unwrap();
        assert_eq!((train.len(), test.len()), (105, 45));
        for c in 0..3 {
            assert_eq!(test.labels.iter().filter(|&&l| l == c).count(), 15);
        }
        let (a, _) = d.split(0.3, 7).unwrap();
        assert_eq!(a, train);
        let (b, _) = d.split(0.3, 8).unwrap();
        assert_ne!(b.labels, train.labels);
    }
}
