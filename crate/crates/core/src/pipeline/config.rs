//! Experiment configuration: defaults, config-file parsing, and the
//! method enum shared across the pipeline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dictionary::ProxyMode;
use crate::error::{Error, Result};
use crate::network::{TrainConfig, MLP_DEFAULT_HIDDEN};
use crate::sparse::KnnMetric;

/// A classification method the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Csen1,
    Csen2,
    Reconnet,
    Mlp,
    Crc,
    Src,
    Knn,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Csen1,
        Method::Csen2,
        Method::Reconnet,
        Method::Mlp,
        Method::Crc,
        Method::Src,
        Method::Knn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Csen1 => "csen1",
            Method::Csen2 => "csen2",
            Method::Reconnet => "reconnet",
            Method::Mlp => "mlp",
            Method::Crc => "crc",
            Method::Src => "src",
            Method::Knn => "knn",
        }
    }

    /// Does this method train a network on proxy planes?
    pub fn is_proxy_network(&self) -> bool {
        matches!(self, Method::Csen1 | Method::Csen2 | Method::Reconnet)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csen1" => Ok(Method::Csen1),
            "csen2" => Ok(Method::Csen2),
            "reconnet" => Ok(Method::Reconnet),
            "mlp" => Ok(Method::Mlp),
            "crc" => Ok(Method::Crc),
            "src" => Ok(Method::Src),
            "knn" => Ok(Method::Knn),
            other => Err(Error::Parameter(format!(
                "unknown method '{other}' (expected csen1|csen2|reconnet|mlp|crc|src|knn)"
            ))),
        }
    }
}

/// Everything a cross-validated run needs. Defaults follow the
/// reference experimental setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Compression ratio m/d for the PCA stage.
    pub pca_cr: f64,
    /// Dictionary atoms per class for the proxy-network methods.
    pub atoms_per_class: usize,
    /// Ridge weight for the denoiser and CRC.
    pub lambda: f64,
    pub proxy_mode: ProxyMode,
    pub k_folds: usize,
    pub seed: u64,
    /// Class-balancing jitter scale (fraction of per-feature std).
    pub jitter_sigma: f64,
    /// Fold-level parallelism cap.
    pub threads: usize,
    /// Optional per-plane max-abs scaling before the network.
    pub plane_scale: bool,
    pub csen_learning_rate: f64,
    pub csen_epochs: usize,
    pub mlp_learning_rate: f64,
    pub mlp_epochs: usize,
    pub mlp_hidden: Vec<usize>,
    pub batch_size: usize,
    pub knn_k: usize,
    pub knn_metric: KnnMetric,
    pub l1_weight: Option<f64>,
    pub l1_max_iter: usize,
    pub l1_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Csen1,
            pca_cr: 0.5,
            atoms_per_class: 625,
            lambda: 2e-12,
            proxy_mode: ProxyMode::Ridge,
            k_folds: 5,
            seed: 1,
            jitter_sigma: 0.05,
            threads: 1,
            plane_scale: false,
            csen_learning_rate: 1e-3,
            csen_epochs: 15,
            mlp_learning_rate: 1e-4,
            mlp_epochs: 50,
            mlp_hidden: MLP_DEFAULT_HIDDEN.to_vec(),
            batch_size: 32,
            knn_k: 5,
            knn_metric: KnnMetric::Euclidean,
            l1_weight: None,
            l1_max_iter: 500,
            l1_tol: 1e-8,
        }
    }
}

impl ExperimentConfig {
    /// Reduced dimension for a given feature dimension.
    pub fn reduced_dim(&self, d: usize) -> usize {
        ((d as f64) * self.pca_cr).round().max(1.0) as usize
    }

    /// Optimizer settings for the given method.
    pub fn train_config(&self, method: Method, seed: u64) -> TrainConfig {
        let (lr, epochs) = match method {
            Method::Mlp => (self.mlp_learning_rate, self.mlp_epochs),
            _ => (self.csen_learning_rate, self.csen_epochs),
        };
        TrainConfig {
            learning_rate: lr,
            epochs,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pca_cr > 0.0 && self.pca_cr <= 1.0) {
            return Err(Error::Parameter(format!(
                "pca_cr must be in (0, 1], got {}",
                self.pca_cr
            )));
        }
        if self.lambda <= 0.0 {
            return Err(Error::Parameter("lambda must be positive".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Parameter("k_folds must be at least 2".into()));
        }
        if self.atoms_per_class == 0 {
            return Err(Error::Parameter("atoms_per_class must be positive".into()));
        }
        if self.jitter_sigma < 0.0 {
            return Err(Error::Parameter("jitter_sigma must be nonnegative".into()));
        }
        if self.threads == 0 {
            return Err(Error::Parameter("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Parse(format!("config key '{key}': bad {what} '{value}'"));
        match key {
            "method" => self.method = value.parse()?,
            "pca_cr" => self.pca_cr = value.parse().map_err(|_| bad("float"))?,
            "atoms_per_class" => {
                self.atoms_per_class = value.parse().map_err(|_| bad("integer"))?
            }
            "lambda" => self.lambda = value.parse().map_err(|_| bad("float"))?,
            "proxy_mode" => {
                self.proxy_mode = match value {
                    "ridge" => ProxyMode::Ridge,
                    "correlation" => ProxyMode::Correlation,
                    _ => return Err(bad("proxy mode (ridge|correlation)")),
                }
            }
            "k_folds" => self.k_folds = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "jitter_sigma" => self.jitter_sigma = value.parse().map_err(|_| bad("float"))?,
            "threads" => self.threads = value.parse().map_err(|_| bad("integer"))?,
            "plane_scale" => self.plane_scale = value.parse().map_err(|_| bad("bool"))?,
            "csen_learning_rate" => {
                self.csen_learning_rate = value.parse().map_err(|_| bad("float"))?
            }
            "csen_epochs" => self.csen_epochs = value.parse().map_err(|_| bad("integer"))?,
            "mlp_learning_rate" => {
                self.mlp_learning_rate = value.parse().map_err(|_| bad("float"))?
            }
            "mlp_epochs" => self.mlp_epochs = value.parse().map_err(|_| bad("integer"))?,
            "mlp_hidden" => {
                let widths: std::result::Result<Vec<usize>, _> =
                    value.split(':').map(|w| w.trim().parse()).collect();
                self.mlp_hidden = widths.map_err(|_| bad("width list like 512:256:128:64"))?;
            }
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad("integer"))?,
            "knn_k" => self.knn_k = value.parse().map_err(|_| bad("integer"))?,
            "knn_metric" => {
                self.knn_metric = match value {
                    "euclidean" => KnnMetric::Euclidean,
                    "cityblock" => KnnMetric::Cityblock,
                    "cosine" => KnnMetric::Cosine,
                    _ => return Err(bad("metric (euclidean|cityblock|cosine)")),
                }
            }
            "l1_weight" => {
                self.l1_weight = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("float or 'auto'"))?)
                }
            }
            "l1_max_iter" => self.l1_max_iter = value.parse().map_err(|_| bad("integer"))?,
            "l1_tol" => self.l1_tol = value.parse().map_err(|_| bad("float"))?,
            other => {
                return Err(Error::Parse(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }
}

/// Parses a flat `key = value` config file on top of the defaults.
/// Blank lines and `#` comments are skipped; unknown keys fail.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut config = ExperimentConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "{}:{}: expected 'key = value'",
                path.display(),
                lineno + 1
            ))
        })?;
        config
            .set(key.trim(), value.trim())
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.pca_cr, 0.5);
        assert_eq!(c.atoms_per_class, 625);
        assert_eq!(c.lambda, 2e-12);
        assert_eq!(c.proxy_mode, ProxyMode::Ridge);
        assert_eq!(c.k_folds, 5);
        assert_eq!(c.csen_learning_rate, 1e-3);
        assert_eq!(c.csen_epochs, 15);
        assert_eq!(c.mlp_learning_rate, 1e-4);
        assert_eq!(c.mlp_epochs, 50);
        assert_eq!(c.mlp_hidden, vec![512, 256, 128, 64]);
        assert_eq!(c.batch_size, 32);
        assert!(!c.plane_scale);
        let tc = c.train_config(Method::Csen1, 0);
        assert_eq!(tc.learning_rate, 1e-3);
        assert_eq!(tc.epochs, 15);
        assert_eq!(tc.beta1, 0.9);
        assert_eq!(tc.beta2, 0.999);
        let tm = c.train_config(Method::Mlp, 0);
        assert_eq!(tm.learning_rate, 1e-4);
        assert_eq!(tm.epochs, 50);
    }

    #[test]
    fn reduced_dim_is_half_at_default_cr() {
        let c = ExperimentConfig::default();
        assert_eq!(c.reduced_dim(1024), 512);
        assert_eq!(c.reduced_dim(64), 32);
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(
            &path,
            "# experiment\nmethod = csen2\natoms_per_class = 25\nseed = 7\nknn_metric = cosine\nmlp_hidden = 32:16\n",
        )
        .unwrap();
        let c = load_config(&path).unwrap();
        assert_eq!(c.method, Method::Csen2);
        assert_eq!(c.atoms_per_class, 25);
        assert_eq!(c.seed, 7);
        assert_eq!(c.knn_metric, KnnMetric::Cosine);
        assert_eq!(c.mlp_hidden, vec![32, 16]);
        // untouched keys keep defaults
        assert_eq!(c.pca_cr, 0.5);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "atoms_per_clas = 25\n").unwrap();
        match load_config(&path) {
            Err(Error::Parse(msg)) => assert!(msg.contains("unknown config key")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }
}
