//! Labeled feature-vector datasets: the universal input of the pipeline.
//!
//! Two on-disk formats:
//! - CSV with header `label,f0,f1,...`, one sample per row, class names
//!   collected in first-appearance order.
//! - Packed binary: magic "SPKD1", little-endian u32 counts
//!   (samples, d, c), length-prefixed UTF-8 class names, u32 labels,
//!   then samples x d f64 feature values, row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, gaussian, rng_from_seed};

pub const BINARY_MAGIC: &[u8; 5] = b"SPKD1";

/// On-disk dataset encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Binary,
}

impl DataFormat {
    /// Picks the format from a file extension (`.csv` vs anything else).
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Binary,
        }
    }
}

/// Labeled d-dimensional feature vectors with class names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub provenance: String,
}

impl FeatureDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        provenance: String,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("dataset needs at least one sample".into()));
        }
        if labels.len() != features.rows() {
            return Err(Error::Data(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Data(format!(
                "label index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sample indices belonging to class `c`, in dataset order.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding the given samples (class table unchanged).
    pub fn subset(&self, indices: &[usize]) -> Result<FeatureDataset> {
        if indices.is_empty() {
            return Err(Error::Data("subset of zero samples".into()));
        }
        let mut features = Matrix::zeros(indices.len(), self.dim());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Data(format!("subset index {i} out of range")));
            }
            features.row_mut(r).copy_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        FeatureDataset::new(
            features,
            labels,
            self.class_names.clone(),
            format!("{}#subset", self.provenance),
        )
    }
}

/// Loads a dataset from disk.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<FeatureDataset> {
    match format {
        DataFormat::Csv => load_csv(path),
        DataFormat::Binary => load_binary(path),
    }
}

/// Writes a dataset to disk.
pub fn save_dataset(dataset: &FeatureDataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Csv => save_csv(dataset, path),
        DataFormat::Binary => save_binary(dataset, path),
    }
}

fn load_csv(path: &Path) -> Result<FeatureDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    let head_fields: Vec<&str> = header.split(',').collect();
    if head_fields.first() != Some(&"label") {
        return Err(Error::Parse(format!(
            "{}:1: header must start with 'label', got {:?}",
            path.display(),
            head_fields.first().unwrap_or(&"")
        )));
    }
    let d = head_fields.len() - 1;
    if d == 0 {
        return Err(Error::Parse(format!(
            "{}:1: header declares no feature columns",
            path.display()
        )));
    }
    for (i, f) in head_fields.iter().skip(1).enumerate() {
        let expected = format!("f{i}");
        if *f != expected {
            return Err(Error::Parse(format!(
                "{}:1: expected column '{expected}', got '{f}'",
                path.display()
            )));
        }
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut samples = 0usize;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or("");
        if name.is_empty() {
            return Err(Error::Parse(format!(
                "{}:{}: empty label",
                path.display(),
                lineno + 1
            )));
        }
        let label = match class_names.iter().position(|c| c == name) {
            Some(i) => i,
            None => {
                class_names.push(name.to_string());
                class_names.len() - 1
            }
        };
        labels.push(label);
        let mut count = 0usize;
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: bad float '{field}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "{}:{}: non-finite value",
                    path.display(),
                    lineno + 1
                )));
            }
            values.push(v);
            count += 1;
        }
        if count != d {
            return Err(Error::Parse(format!(
                "{}:{}: expected {d} features, got {count}",
                path.display(),
                lineno + 1
            )));
        }
        samples += 1;
    }
    let features = Matrix::new(samples, d, values)?;
    FeatureDataset::new(features, labels, class_names, path.display().to_string())
}

fn save_csv(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let mut out = String::from("label");
    for i in 0..dataset.dim() {
        write!(out, ",f{i}").unwrap();
    }
    out.push('\n');
    for r in 0..dataset.len() {
        out.push_str(&dataset.class_names[dataset.labels[r]]);
        for v in dataset.features.row(r) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: String,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Parse(format!(
                "{}: truncated at offset {}",
                self.path, self.offset
            )));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let b = self.take(len)?;
        String::from_utf8(b.to_vec()).map_err(|_| {
            Error::Parse(format!(
                "{}: invalid UTF-8 near offset {}",
                self.path, self.offset
            ))
        })
    }
}

fn load_binary(path: &Path) -> Result<FeatureDataset> {
    let bytes = fs::read(path)?;
    let mut r = ByteReader {
        bytes: &bytes,
        offset: 0,
        path: path.display().to_string(),
    };
    let magic = r.take(BINARY_MAGIC.len())?;
    if magic != BINARY_MAGIC {
        return Err(Error::Parse(format!(
            "{}: unknown magic {:?}",
            path.display(),
            magic
        )));
    }
    let samples = r.u32()? as usize;
    let d = r.u32()? as usize;
    let c = r.u32()? as usize;
    let mut class_names = Vec::with_capacity(c);
    for _ in 0..c {
        class_names.push(r.string()?);
    }
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        labels.push(r.u32()? as usize);
    }
    let mut values = Vec::with_capacity(samples * d);
    for _ in 0..samples * d {
        values.push(r.f64()?);
    }
    if r.offset != bytes.len() {
        return Err(Error::Parse(format!(
            "{}: {} trailing bytes",
            path.display(),
            bytes.len() - r.offset
        )));
    }
    let features = Matrix::new(samples, d, values)?;
    FeatureDataset::new(features, labels, class_names, path.display().to_string())
}

fn save_binary(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(dataset.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.class_count() as u32).to_le_bytes());
    for name in &dataset.class_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for &l in &dataset.labels {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for v in dataset.features.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Synthetic Gaussian-cluster dataset for desk-scale verification.
///
/// Class `i` is N(separation * u_i, I) with seeded random orthonormal
/// directions u_i. Samples are interleaved across classes so prefixes
/// stay roughly stratified.
pub fn generate_synthetic(
    c: usize,
    per_class: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if c < 2 {
        return Err(Error::Parameter(format!("need at least 2 classes, got {c}")));
    }
    if per_class < 1 {
        return Err(Error::Parameter("per_class must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::Parameter(format!("need dimension >= 2, got {d}")));
    }
    if separation < 0.0 {
        return Err(Error::Parameter("separation must be nonnegative".into()));
    }
    if c > d {
        return Err(Error::Parameter(format!(
            "cannot place {c} orthonormal class means in {d} dimensions"
        )));
    }

    // orthonormal class directions via Gram-Schmidt on Gaussian draws
    let mut dir_rng = rng_from_seed(derive_seed(seed, 0x11));
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(c);
    while dirs.len() < c {
        let mut v: Vec<f64> = (0..d).map(|_| gaussian(&mut dir_rng)).collect();
        for u in &dirs {
            let proj = crate::linalg::dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let nrm = crate::linalg::norm2(&v);
        if nrm < 1e-8 {
            continue; // essentially colinear draw, try again
        }
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        dirs.push(v);
    }

    let n = c * per_class;
    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut rng = rng_from_seed(derive_seed(seed, 0x12));
    let mut row = 0usize;
    for s in 0..per_class {
        for class in 0..c {
            let _ = s;
            let out = features.row_mut(row);
            for (j, o) in out.iter_mut().enumerate() {
                *o = separation * dirs[class][j] + gaussian(&mut rng);
            }
            labels.push(class);
            row += 1;
        }
    }
    let class_names = (0..c).map(|i| format!("class{i}")).collect();
    FeatureDataset::new(
        features,
        labels,
        class_names,
        format!("synthetic(c={c},per_class={per_class},d={d},sep={separation},seed={seed})"),
    )
}

/// Stratified single split helper used by tests and the benchmark:
/// shuffles within each class and puts `test_fraction` at the end.
pub fn stratified_split(
    dataset: &FeatureDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Parameter(format!(
            "test fraction {test_fraction} out of (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut rng = rng_from_seed(derive_seed(seed, 0x51));
    for class in 0..dataset.class_count() {
        let mut idx = dataset.class_indices(class);
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.clamp(1, idx.len().saturating_sub(1).max(1));
        for (i, sample) in idx.into_iter().enumerate() {
            if i < n_test {
                test.push(sample);
            } else {
                train.push(sample);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Builds an in-memory dataset with the given per-class sample counts
/// and dimension, features drawn N(0,1). Used by tests and benchmarks.
pub fn random_dataset_with_counts(counts: &[usize], d: usize, seed: u64) -> Result<FeatureDataset> {
    let total: usize = counts.iter().sum();
    let mut rng = rng_from_seed(seed);
    let mut features = Matrix::zeros(total, d);
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for v in features.row_mut(row).iter_mut() {
                *v = gaussian(&mut rng);
            }
            labels.push(class);
            row += 1;
        }
    }
    let class_names = (0..counts.len()).map(|i| format!("class{i}")).collect();
    FeatureDataset::new(features, labels, class_names, format!("random(seed={seed})"))
}
