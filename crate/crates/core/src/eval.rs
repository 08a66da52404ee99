//! Stratified cross-validation, class balancing, per-class metrics,
//! and the end-to-end experiment harness.
//!
//! Per fold: standardizer and PCA are fitted on the training fold only,
//! the training fold is balanced by seeded resampling with feature
//! jitter, dictionaries and models are fitted from the balanced pool,
//! and the untouched test fold is classified. Folds are independent and
//! may run in parallel; results merge in fold order so thread count
//! never changes the report.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dictionary::{
    build_dictionary_selection, proxy, Dictionary, ProxyMode, ProxyPlane,
};
use crate::error::{Error, Result};
use crate::linalg::{
    pca_apply, pca_apply_batch, pca_fit, standardize_fit, Matrix, ProjectionMatrix, Standardizer,
};
use crate::network::{
    build_csen1, build_csen2, build_mlp, build_reconnet_baseline, plane_tensor, train,
    NetworkModel, Tensor,
};
use crate::pipeline::config::{ExperimentConfig, Method};
use crate::pipeline::dataset::{stratified_split, FeatureDataset};
use crate::rng::{derive_seed, gaussian, rng_from_seed};
use crate::sparse::{crc_classify, knn_classify, src_classify, ClassDecision, KnnMetric, SrcParams};

/// Train/test index lists for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A full k-fold plan over a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldIndices>,
}

/// Stratified k-fold assignment: seeded shuffle within each class, then
/// round-robin over folds, so per-class test shares differ by at most
/// one sample across folds.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = rng_from_seed(derive_seed(seed, 0x61));
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in 0..class_count {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} samples, needs at least {k} for {k}-fold",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (pos, sample) in idx.into_iter().enumerate() {
            test_sets[pos % k].push(sample);
        }
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = all
                .iter()
                .copied()
                .filter(|i| test.binary_search(i).is_err())
                .collect();
            FoldIndices { train, test }
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

/// Upsamples every class to the majority-class count by seeded
/// resampling with replacement plus Gaussian feature jitter of scale
/// `jitter_sigma` times the per-feature std. Original samples are kept
/// verbatim as the prefix of the result.
pub fn balance_training_set(
    train: &FeatureDataset,
    seed: u64,
    jitter_sigma: f64,
) -> Result<FeatureDataset> {
    if jitter_sigma < 0.0 {
        return Err(Error::Parameter("jitter_sigma must be nonnegative".into()));
    }
    let counts = train.class_counts();
    let majority = *counts.iter().max().unwrap();
    let extra: usize = counts.iter().map(|c| majority - c).sum();
    let d = train.dim();

    // per-feature population std of the training pool
    let std = standardize_fit(&train.features)?;
    let mut rng = rng_from_seed(derive_seed(seed, 0x62));
    let mut features = Matrix::zeros(train.len() + extra, d);
    let mut labels = Vec::with_capacity(train.len() + extra);
    for r in 0..train.len() {
        features.row_mut(r).copy_from_slice(train.features.row(r));
        labels.push(train.labels[r]);
    }
    let mut row = train.len();
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::Data(format!(
                "class '{}' has no training samples",
                train.class_names[class]
            )));
        }
        let pool = train.class_indices(class);
        for _ in count..majority {
            let pick = pool[rng.gen_range(0..pool.len())];
            let src = train.features.row(pick).to_vec();
            let out = features.row_mut(row);
            for (j, o) in out.iter_mut().enumerate() {
                *o = src[j]
                    + if jitter_sigma > 0.0 {
                        jitter_sigma * std.std()[j] * gaussian(&mut rng)
                    } else {
                        0.0
                    };
            }
            labels.push(class);
            row += 1;
        }
    }
    FeatureDataset::new(
        features,
        labels,
        train.class_names.clone(),
        format!("{}#balanced", train.provenance),
    )
}

/// Confusion counts: rows actual, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            class_names,
            counts: vec![0; c * c],
        }
    }

    /// Builds from explicit row-major counts.
    pub fn from_counts(class_names: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        let c = class_names.len();
        if counts.len() != c * c {
            return Err(Error::Data(format!(
                "confusion matrix needs {c}x{c} counts, got {}",
                counts.len()
            )));
        }
        Ok(Self {
            class_names,
            counts,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        let c = self.class_count();
        self.counts[actual * c + predicted] += 1;
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.class_count() + predicted]
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        let c = self.class_count();
        self.counts[actual * c..(actual + 1) * c].iter().sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.class_count())
            .map(|a| self.get(a, predicted))
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count()).map(|i| self.get(i, i)).sum()
    }

    /// Adds another matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        debug_assert_eq!(self.class_names, other.class_names);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// One-vs-rest metrics for a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Per-class and overall metrics of a confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub overall_accuracy: f64,
}

/// One-vs-rest accuracy/sensitivity/specificity per class plus overall
/// accuracy (trace/total). Vacuous denominators count as perfect.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("confusion matrix has no counts".into()));
    }
    let mut per_class = Vec::with_capacity(cm.class_count());
    for i in 0..cm.class_count() {
        let tp = cm.get(i, i);
        let fn_ = cm.row_sum(i) - tp;
        let fp = cm.col_sum(i) - tp;
        let tn = total - tp - fn_ - fp;
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        per_class.push(ClassMetrics {
            accuracy: ratio(tp + tn, total),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        });
    }
    Ok(MetricsReport {
        per_class,
        overall_accuracy: cm.trace() as f64 / total as f64,
    })
}

fn mean_metrics(reports: &[MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let c = reports[0].per_class.len();
    let mut per_class = vec![
        ClassMetrics {
            accuracy: 0.0,
            sensitivity: 0.0,
            specificity: 0.0,
        };
        c
    ];
    let mut overall = 0.0;
    for r in reports {
        overall += r.overall_accuracy;
        for (acc, m) in per_class.iter_mut().zip(&r.per_class) {
            acc.accuracy += m.accuracy;
            acc.sensitivity += m.sensitivity;
            acc.specificity += m.specificity;
        }
    }
    for m in per_class.iter_mut() {
        m.accuracy /= n;
        m.sensitivity /= n;
        m.specificity /= n;
    }
    MetricsReport {
        per_class,
        overall_accuracy: overall / n,
    }
}

/// The classifier state behind a fitted method.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedClassifier {
    Crc {
        dictionary: Dictionary,
    },
    Src {
        dictionary: Dictionary,
        params: SrcParams,
    },
    Knn {
        train: Matrix,
        labels: Vec<usize>,
        k: usize,
        metric: KnnMetric,
    },
    ProxyNetwork {
        dictionary: Dictionary,
        model: NetworkModel,
        mode: ProxyMode,
        plane_scale: bool,
    },
    Mlp {
        model: NetworkModel,
    },
}

/// Everything needed to classify a raw feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedMethod {
    pub method: Method,
    pub class_names: Vec<String>,
    pub standardizer: Standardizer,
    pub projection: Option<ProjectionMatrix>,
    pub classifier: FittedClassifier,
    /// Per-epoch mean training loss for network methods.
    pub training_log: Vec<f64>,
}

fn scale_plane(plane: &mut ProxyPlane) {
    let max = plane
        .flat
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max > 0.0 {
        for v in plane.flat.iter_mut() {
            *v /= max;
        }
        for v in plane.plane.data_mut().iter_mut() {
            *v /= max;
        }
    }
}

impl FittedMethod {
    /// Classifies one raw feature vector (standardize, project, decide).
    pub fn classify(&self, features: &[f64]) -> Result<ClassDecision> {
        let s = self.standardizer.apply_row(features)?;
        let y = match &self.projection {
            Some(p) => pca_apply(p, &s)?,
            None => s,
        };
        match &self.classifier {
            FittedClassifier::Crc { dictionary } => crc_classify(dictionary, &y),
            FittedClassifier::Src { dictionary, params } => src_classify(dictionary, &y, params),
            FittedClassifier::Knn {
                train,
                labels,
                k,
                metric,
            } => knn_classify(train, labels, self.class_names.len(), &y, *k, *metric),
            FittedClassifier::ProxyNetwork {
                dictionary,
                model,
                mode,
                plane_scale,
            } => {
                let mut plane = proxy(dictionary, &y, *mode)?;
                if *plane_scale {
                    scale_plane(&mut plane);
                }
                model.predict_plane(&plane)
            }
            FittedClassifier::Mlp { model } => {
                model.predict(&Tensor::from_flat(y))
            }
        }
    }
}

/// Fits one method on a training dataset. This function sees only the
/// training fold, which is what keeps every preprocessing stage
/// leakage-free by construction.
pub fn fit_method(
    train_set: &FeatureDataset,
    method: Method,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<FittedMethod> {
    config.validate()?;
    let c = train_set.class_count();
    let d = train_set.dim();
    let standardizer = standardize_fit(&train_set.features)?;
    let standardized = FeatureDataset::new(
        standardizer.apply(&train_set.features)?,
        train_set.labels.clone(),
        train_set.class_names.clone(),
        format!("{}#standardized", train_set.provenance),
    )?;

    // PCA on the (unbalanced) training fold; the MLP consumes raw
    // standardized features instead.
    let projection = if method == Method::Mlp {
        None
    } else {
        let m = config.reduced_dim(d).min(standardized.len()).min(d);
        Some(pca_fit(&standardized.features, m)?)
    };

    let balanced = balance_training_set(&standardized, derive_seed(seed, 0x71), config.jitter_sigma)?;

    let mut training_log = Vec::new();
    let classifier = match method {
        Method::Crc | Method::Src => {
            let per_class = *balanced.class_counts().iter().min().unwrap();
            let projection = projection.as_ref().unwrap();
            let (dictionary, _) = build_dictionary_selection(
                &balanced,
                per_class,
                projection,
                config.lambda,
                derive_seed(seed, 0x72),
            )?;
            if method == Method::Crc {
                FittedClassifier::Crc { dictionary }
            } else {
                FittedClassifier::Src {
                    dictionary,
                    params: SrcParams {
                        lambda_l1: config.l1_weight,
                        max_iter: config.l1_max_iter,
                        tol: config.l1_tol,
                        ..SrcParams::default()
                    },
                }
            }
        }
        Method::Knn => {
            let projection = projection.as_ref().unwrap();
            if config.knn_k > balanced.len() {
                return Err(Error::Parameter(format!(
                    "knn_k {} exceeds training size {}",
                    config.knn_k,
                    balanced.len()
                )));
            }
            FittedClassifier::Knn {
                train: pca_apply_batch(projection, &balanced.features)?,
                labels: balanced.labels.clone(),
                k: config.knn_k,
                metric: config.knn_metric,
            }
        }
        Method::Mlp => {
            let mut model = build_mlp(d, &config.mlp_hidden, c)?;
            model.init_weights(derive_seed(seed, 0x73));
            let data: Vec<(Tensor, usize)> = (0..balanced.len())
                .map(|r| {
                    (
                        Tensor::from_flat(balanced.features.row(r).to_vec()),
                        balanced.labels[r],
                    )
                })
                .collect();
            let cfg = config.train_config(method, derive_seed(seed, 0x74));
            training_log = train(&mut model, &data, &cfg)?;
            FittedClassifier::Mlp { model }
        }
        Method::Csen1 | Method::Csen2 | Method::Reconnet => {
            let projection_ref = projection.as_ref().unwrap();
            let (dictionary, chosen) = build_dictionary_selection(
                &balanced,
                config.atoms_per_class,
                projection_ref,
                config.lambda,
                derive_seed(seed, 0x72),
            )?;
            let chosen_set: std::collections::HashSet<usize> = chosen.into_iter().collect();
            let rest: Vec<usize> = (0..balanced.len())
                .filter(|i| !chosen_set.contains(i))
                .collect();
            if rest.is_empty() {
                return Err(Error::Data(
                    "every balanced sample became a dictionary atom; lower atoms_per_class to \
                     leave training data for the network"
                        .into(),
                ));
            }
            let mut model = match method {
                Method::Csen1 => build_csen1(&dictionary.layout)?,
                Method::Csen2 => build_csen2(&dictionary.layout)?,
                _ => build_reconnet_baseline(&dictionary.layout)?,
            };
            model.init_weights(derive_seed(seed, 0x73));
            let mut data = Vec::with_capacity(rest.len());
            for &i in &rest {
                let y = pca_apply(projection_ref, balanced.features.row(i))?;
                let mut plane = proxy(&dictionary, &y, config.proxy_mode)?;
                if config.plane_scale {
                    scale_plane(&mut plane);
                }
                data.push((plane_tensor(&plane), balanced.labels[i]));
            }
            let cfg = config.train_config(method, derive_seed(seed, 0x74));
            training_log = train(&mut model, &data, &cfg)?;
            FittedClassifier::ProxyNetwork {
                dictionary,
                model,
                mode: config.proxy_mode,
                plane_scale: config.plane_scale,
            }
        }
    };

    Ok(FittedMethod {
        method,
        class_names: train_set.class_names.clone(),
        standardizer,
        projection,
        classifier,
        training_log,
    })
}

/// Result of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Cross-validated evaluation of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: Method,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub k_folds: usize,
    pub folds: Vec<FoldOutcome>,
    pub cumulative: ConfusionMatrix,
    /// Metrics of the cumulative confusion matrix.
    pub cumulative_metrics: MetricsReport,
    /// Per-fold metrics averaged (labelled separately in reports).
    pub fold_mean_metrics: MetricsReport,
}

impl EvaluationReport {
    /// Assembles a report from per-fold confusion matrices, deriving
    /// per-fold metrics, the cumulative matrix, and both summary
    /// metric sets.
    pub fn from_fold_confusions(
        method: Method,
        class_names: Vec<String>,
        seed: u64,
        confusions: Vec<ConfusionMatrix>,
    ) -> Result<Self> {
        if confusions.is_empty() {
            return Err(Error::Data("report needs at least one fold".into()));
        }
        let mut cumulative = ConfusionMatrix::new(class_names.clone());
        let mut folds = Vec::with_capacity(confusions.len());
        for (fold, confusion) in confusions.into_iter().enumerate() {
            cumulative.merge(&confusion);
            let metrics = compute_metrics(&confusion)?;
            folds.push(FoldOutcome {
                fold,
                confusion,
                metrics,
            });
        }
        let cumulative_metrics = compute_metrics(&cumulative)?;
        let fold_metrics: Vec<MetricsReport> = folds.iter().map(|f| f.metrics.clone()).collect();
        Ok(Self {
            method,
            class_names,
            seed,
            k_folds: folds.len(),
            folds,
            cumulative,
            cumulative_metrics,
            fold_mean_metrics: mean_metrics(&fold_metrics),
        })
    }
}

/// Adds fold context to an error without changing its kind (the kind
/// drives CLI exit codes).
fn with_fold_context(e: Error, context: &str) -> Error {
    match e {
        Error::Dimension(m) => Error::Dimension(format!("{context}: {m}")),
        Error::Data(m) => Error::Data(format!("{context}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{context}: {m}")),
        Error::Parameter(m) => Error::Parameter(format!("{context}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{context}: {m}")),
        Error::Persistence(m) => Error::Persistence(format!("{context}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{context}: {m}")),
        Error::Training { epoch, message } => Error::Training {
            epoch,
            message: format!("{context}: {message}"),
        },
        Error::Io(e) => Error::Io(e),
    }
}

fn run_fold(
    dataset: &FeatureDataset,
    indices: &FoldIndices,
    fold: usize,
    method: Method,
    config: &ExperimentConfig,
) -> Result<FoldOutcome> {
    let train_set = dataset.subset(&indices.train)?;
    let fitted = fit_method(
        &train_set,
        method,
        config,
        derive_seed(config.seed, 1000 + fold as u64),
    )
    .map_err(|e| with_fold_context(e, &format!("fold {fold}")))?;
    let mut confusion = ConfusionMatrix::new(dataset.class_names.clone());
    for &i in &indices.test {
        let decision = fitted
            .classify(dataset.features.row(i))
            .map_err(|e| with_fold_context(e, &format!("fold {fold}, sample {i}")))?;
        confusion.record(dataset.labels[i], decision.class_index);
    }
    let metrics = compute_metrics(&confusion)?;
    Ok(FoldOutcome {
        fold,
        confusion,
        metrics,
    })
}

/// Runs the full cross-validated pipeline for one method.
pub fn run_experiment(
    dataset: &FeatureDataset,
    method: Method,
    config: &ExperimentConfig,
) -> Result<EvaluationReport> {
    config.validate()?;
    let plan = stratified_kfold(&dataset.labels, config.k_folds, config.seed)?;
    let slots: Mutex<Vec<Option<Result<FoldOutcome>>>> =
        Mutex::new((0..plan.k).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.threads.min(plan.k).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let fold = next.fetch_add(1, Ordering::SeqCst);
                if fold >= plan.k {
                    break;
                }
                let outcome = run_fold(dataset, &plan.folds[fold], fold, method, config);
                slots.lock().unwrap()[fold] = Some(outcome);
            });
        }
    });

    let mut confusions = Vec::with_capacity(plan.k);
    for slot in slots.into_inner().unwrap() {
        confusions.push(slot.expect("fold never ran")?.confusion);
    }
    EvaluationReport::from_fold_confusions(
        method,
        dataset.class_names.clone(),
        config.seed,
        confusions,
    )
}

/// Wall-clock inference totals of one method on a benchmark split.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkEntry {
    pub method: Method,
    pub seconds: f64,
    pub samples: usize,
}

/// Per-method timing report.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub entries: Vec<BenchmarkEntry>,
}

/// Fits each method on a stratified 80/20 split, then times
/// classification of up to `queries` test samples, single-threaded.
/// One warm-up classification per method is excluded from the totals;
/// training and dictionary construction are not measured.
pub fn benchmark_inference(
    dataset: &FeatureDataset,
    methods: &[Method],
    config: &ExperimentConfig,
    queries: usize,
) -> Result<BenchmarkReport> {
    let (train_idx, test_idx) = stratified_split(dataset, 0.2, config.seed)?;
    let train_set = dataset.subset(&train_idx)?;
    let picked: Vec<usize> = test_idx.into_iter().take(queries).collect();

    let mut entries = Vec::with_capacity(methods.len());
    for &method in methods {
        let fitted = fit_method(&train_set, method, config, derive_seed(config.seed, 0x90))?;
        if picked.is_empty() {
            entries.push(BenchmarkEntry {
                method,
                seconds: 0.0,
                samples: 0,
            });
            continue;
        }
        // warm-up, untimed
        fitted.classify(dataset.features.row(picked[0]))?;
        let start = Instant::now();
        for &i in &picked {
            fitted.classify(dataset.features.row(i))?;
        }
        entries.push(BenchmarkEntry {
            method,
            seconds: start.elapsed().as_secs_f64(),
            samples: picked.len(),
        });
    }
    Ok(BenchmarkReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::dataset::{generate_synthetic, random_dataset_with_counts};
    use rand::Rng;

    #[test]
    fn paper_fold_counts() {
        let counts = [2760usize, 1485, 1579, 462];
        let ds = random_dataset_with_counts(&counts, 4, 1).unwrap();
        let plan = stratified_kfold(&ds.labels, 5, 3).unwrap();
        let expected_test = [552usize, 297, 316, 92];
        let expected_train = [2208usize, 1188, 1263, 370];
        for fold in &plan.folds {
            let sub_test = ds.subset(&fold.test).unwrap();
            let sub_train = ds.subset(&fold.train).unwrap();
            for (class, (&et, &etr)) in expected_test.iter().zip(&expected_train).enumerate() {
                let t = sub_test.class_counts()[class];
                let tr = sub_train.class_counts()[class];
                assert!(
                    (t as i64 - et as i64).abs() <= 1,
                    "class {class}: test {t} vs {et}"
                );
                assert!(
                    (tr as i64 - etr as i64).abs() <= 1,
                    "class {class}: train {tr} vs {etr}"
                );
            }
        }
    }

    #[test]
    fn folds_partition_the_dataset() {
        let ds = random_dataset_with_counts(&[17, 23, 11], 3, 5).unwrap();
        let plan = stratified_kfold(&ds.labels, 4, 9).unwrap();
        let mut seen = vec![false; ds.len()];
        for fold in &plan.folds {
            for &i in &fold.test {
                assert!(!seen[i], "sample {i} in two test folds");
                seen[i] = true;
            }
            // train = complement
            let test_set: std::collections::HashSet<_> = fold.test.iter().collect();
            assert_eq!(fold.train.len() + fold.test.len(), ds.len());
            assert!(fold.train.iter().all(|i| !test_set.contains(i)));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn two_fold_on_two_per_class() {
        let ds = random_dataset_with_counts(&[2, 2, 2], 3, 2).unwrap();
        let plan = stratified_kfold(&ds.labels, 2, 1).unwrap();
        for fold in &plan.folds {
            let sub = ds.subset(&fold.test).unwrap();
            assert_eq!(sub.class_counts(), vec![1, 1, 1]);
        }
    }

    #[test]
    fn kfold_rejects_small_classes() {
        let ds = random_dataset_with_counts(&[5, 2], 3, 2).unwrap();
        assert!(matches!(
            stratified_kfold(&ds.labels, 3, 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn kfold_deterministic() {
        let ds = random_dataset_with_counts(&[30, 20], 3, 7).unwrap();
        let a = stratified_kfold(&ds.labels, 5, 11).unwrap();
        let b = stratified_kfold(&ds.labels, 5, 11).unwrap();
        assert_eq!(a, b);
        let c = stratified_kfold(&ds.labels, 5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn balancing_reaches_paper_totals() {
        let ds = random_dataset_with_counts(&[2208, 1188, 1263, 370], 8, 3).unwrap();
        let balanced = balance_training_set(&ds, 1, 0.05).unwrap();
        assert_eq!(balanced.class_counts(), vec![2208, 2208, 2208, 2208]);
        assert_eq!(balanced.len(), 8832);
    }

    #[test]
    fn balancing_preserves_originals_as_prefix() {
        let ds = random_dataset_with_counts(&[10, 4], 5, 9).unwrap();
        let balanced = balance_training_set(&ds, 2, 0.05).unwrap();
        for r in 0..ds.len() {
            assert_eq!(balanced.features.row(r), ds.features.row(r));
            assert_eq!(balanced.labels[r], ds.labels[r]);
        }
        assert_eq!(balanced.len(), 20);
    }

    #[test]
    fn balanced_input_is_returned_verbatim() {
        let ds = random_dataset_with_counts(&[6, 6], 4, 4).unwrap();
        let balanced = balance_training_set(&ds, 3, 0.0).unwrap();
        assert_eq!(balanced.features, ds.features);
        assert_eq!(balanced.labels, ds.labels);
    }

    #[test]
    fn zero_jitter_duplicates_are_exact_copies() {
        let ds = random_dataset_with_counts(&[8, 3], 4, 6).unwrap();
        let balanced = balance_training_set(&ds, 5, 0.0).unwrap();
        let originals: Vec<&[f64]> = (0..ds.len()).map(|r| ds.features.row(r)).collect();
        for r in ds.len()..balanced.len() {
            let row = balanced.features.row(r);
            assert!(
                originals.iter().any(|o| *o == row),
                "row {r} is not an exact copy"
            );
        }
    }

    fn paper_csen2_matrix() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec![
                "Bacterial".into(),
                "Viral".into(),
                "Normal".into(),
                "Covid-19".into(),
            ],
            vec![
                1818, 636, 180, 126, //
                338, 959, 127, 61, //
                15, 71, 1428, 65, //
                0, 3, 4, 455,
            ],
        )
        .unwrap()
    }

    #[test]
    fn metrics_reproduce_reference_table() {
        let cm = paper_csen2_matrix();
        let report = compute_metrics(&cm).unwrap();
        let sens = [0.659, 0.646, 0.904, 0.985];
        let spec = [0.900, 0.852, 0.934, 0.957];
        let acc = [0.794, 0.803, 0.927, 0.959];
        for (i, m) in report.per_class.iter().enumerate() {
            assert!(
                (m.sensitivity - sens[i]).abs() < 5e-4,
                "class {i} sensitivity {}",
                m.sensitivity
            );
            assert!(
                (m.specificity - spec[i]).abs() < 5e-4,
                "class {i} specificity {}",
                m.specificity
            );
            assert!(
                (m.accuracy - acc[i]).abs() < 5e-4,
                "class {i} accuracy {}",
                m.accuracy
            );
        }
        // covid sensitivity exactly 455/462
        assert!((report.per_class[3].sensitivity - 455.0 / 462.0).abs() < 1e-12);
    }

    #[test]
    fn identity_confusion_matrix_is_perfect() {
        let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
        for i in 0..3 {
            for _ in 0..5 {
                cm.record(i, i);
            }
        }
        let report = compute_metrics(&cm).unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
        for m in &report.per_class {
            assert_eq!(m.accuracy, 1.0);
            assert_eq!(m.sensitivity, 1.0);
            assert_eq!(m.specificity, 1.0);
        }
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let cm = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        assert!(matches!(compute_metrics(&cm), Err(Error::Data(_))));
    }

    #[test]
    fn sensitivity_times_row_sum_is_integral() {
        let mut rng = crate::rng::rng_from_seed(2);
        for _ in 0..20 {
            let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
            for _ in 0..200 {
                let a = (rng.gen::<f64>() * 3.0) as usize % 3;
                let p = (rng.gen::<f64>() * 3.0) as usize % 3;
                cm.record(a, p);
            }
            let report = compute_metrics(&cm).unwrap();
            for (i, m) in report.per_class.iter().enumerate() {
                let row = cm.row_sum(i);
                let tp = m.sensitivity * row as f64;
                assert!((tp - tp.round()).abs() < 1e-9);
            }
        }
    }

    fn desk_config(method: Method) -> ExperimentConfig {
        ExperimentConfig {
            method,
            atoms_per_class: 16,
            csen_epochs: 10,
            k_folds: 5,
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn crc_experiment_on_separable_clusters() {
        let ds = generate_synthetic(4, 60, 32, 6.0, 11).unwrap();
        let report = run_experiment(&ds, Method::Crc, &desk_config(Method::Crc)).unwrap();
        assert!(
            report.cumulative_metrics.overall_accuracy >= 0.95,
            "accuracy {}",
            report.cumulative_metrics.overall_accuracy
        );
        // cumulative row sums equal the full class counts
        for (class, &count) in ds.class_counts().iter().enumerate() {
            assert_eq!(report.cumulative.row_sum(class), count as u64);
        }
        assert_eq!(report.folds.len(), 5);
    }

    #[test]
    fn experiment_matches_direct_classifier_calls() {
        // orchestration transparency: fold 0 of a crc run equals fitting
        // on the fold's training set and calling classify directly
        let ds = generate_synthetic(3, 40, 16, 6.0, 13).unwrap();
        let config = desk_config(Method::Crc);
        let report = run_experiment(&ds, Method::Crc, &config).unwrap();
        let plan = stratified_kfold(&ds.labels, config.k_folds, config.seed).unwrap();
        let train_set = ds.subset(&plan.folds[0].train).unwrap();
        let fitted = fit_method(
            &train_set,
            Method::Crc,
            &config,
            derive_seed(config.seed, 1000),
        )
        .unwrap();
        let mut cm = ConfusionMatrix::new(ds.class_names.clone());
        for &i in &plan.folds[0].test {
            let d = fitted.classify(ds.features.row(i)).unwrap();
            cm.record(ds.labels[i], d.class_index);
        }
        assert_eq!(report.folds[0].confusion, cm);
    }

    #[test]
    fn threads_do_not_change_the_report() {
        let ds = generate_synthetic(3, 30, 16, 6.0, 17).unwrap();
        let mut config = desk_config(Method::Knn);
        let single = run_experiment(&ds, Method::Knn, &config).unwrap();
        config.threads = 4;
        let parallel = run_experiment(&ds, Method::Knn, &config).unwrap();
        assert_eq!(single, parallel);
    }

    #[test]
    fn fit_never_touches_test_rows() {
        // two datasets identical on the training fold, scrambled on the
        // test fold, must produce identical fitted models
        let ds_a = generate_synthetic(3, 30, 16, 6.0, 19).unwrap();
        let plan = stratified_kfold(&ds_a.labels, 5, 3).unwrap();
        let mut ds_b = ds_a.clone();
        let mut rng = crate::rng::rng_from_seed(99);
        for &i in &plan.folds[0].test {
            for v in ds_b.features.row_mut(i).iter_mut() {
                *v = rng.gen::<f64>() * 100.0 - 50.0;
            }
        }
        let config = desk_config(Method::Crc);
        let train_a = ds_a.subset(&plan.folds[0].train).unwrap();
        let train_b = ds_b.subset(&plan.folds[0].train).unwrap();
        let fit_a = fit_method(&train_a, Method::Crc, &config, 42).unwrap();
        let fit_b = fit_method(&train_b, Method::Crc, &config, 42).unwrap();
        assert_eq!(fit_a, fit_b);
    }

    #[test]
    fn benchmark_reports_counts_and_empty_split() {
        let ds = generate_synthetic(3, 40, 16, 6.0, 23).unwrap();
        let config = desk_config(Method::Crc);
        let report =
            benchmark_inference(&ds, &[Method::Crc, Method::Knn], &config, 10).unwrap();
        assert_eq!(report.entries.len(), 2);
        for e in &report.entries {
            assert_eq!(e.samples, 10);
            assert!(e.seconds >= 0.0);
        }
        let empty = benchmark_inference(&ds, &[Method::Crc], &config, 0).unwrap();
        assert_eq!(empty.entries[0].samples, 0);
        assert_eq!(empty.entries[0].seconds, 0.0);
    }
}
