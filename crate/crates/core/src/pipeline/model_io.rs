//! Versioned binary model container.
//!
//! Layout: magic "CSENM", u16 version, method tag, class names,
//! standardizer, optional projection, the method-specific classifier
//! payload, and the training log. All numeric tensors are little-endian
//! f64. Loading validates magic, version, and every shape before any
//! structure is built, so a corrupt file never yields a partial model.

use std::fs;
use std::path::Path;

use crate::dictionary::{build_layout, Dictionary, ProxyMode};
use crate::error::{Error, Result};
use crate::eval::{FittedClassifier, FittedMethod};
use crate::linalg::{Matrix, ProjectionMatrix, Standardizer};
use crate::network::{Head, LayerSpec, NetworkModel};
use crate::pipeline::config::Method;
use crate::sparse::{KnnMetric, ResidualMode, SrcParams};

const MAGIC: &[u8; 5] = b"CSENM";
const VERSION: u16 = 1;

/// A persisted model: format version plus the fitted method.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub version: u16,
    pub fitted: FittedMethod,
}

impl ModelArtifact {
    pub fn new(fitted: FittedMethod) -> Self {
        Self {
            version: VERSION,
            fitted,
        }
    }

    /// Human-readable structure summary for the `inspect` subcommand.
    pub fn describe(&self) -> String {
        let f = &self.fitted;
        let mut out = String::new();
        out.push_str(&format!("method: {}\n", f.method));
        out.push_str(&format!("format version: {}\n", self.version));
        out.push_str(&format!(
            "classes ({}): {}\n",
            f.class_names.len(),
            f.class_names.join(", ")
        ));
        out.push_str(&format!("feature dimension: {}\n", f.standardizer.dim()));
        if let Some(p) = &f.projection {
            out.push_str(&format!("projection: {}x{}\n", p.m(), p.d()));
        }
        let dict = match &f.classifier {
            FittedClassifier::Crc { dictionary } => Some(dictionary),
            FittedClassifier::Src { dictionary, .. } => Some(dictionary),
            FittedClassifier::ProxyNetwork { dictionary, .. } => Some(dictionary),
            _ => None,
        };
        if let Some(d) = dict {
            out.push_str(&format!(
                "dictionary: Phi {}x{}, D {}x{}, B {}x{}, plane {}x{}, lambda {:e}\n",
                d.phi.rows(),
                d.phi.cols(),
                d.d.rows(),
                d.d.cols(),
                d.b.rows(),
                d.b.cols(),
                d.layout.plane_rows,
                d.layout.plane_cols,
                d.lambda
            ));
        }
        let network = match &f.classifier {
            FittedClassifier::ProxyNetwork { model, .. } => Some(model),
            FittedClassifier::Mlp { model } => Some(model),
            _ => None,
        };
        if let Some(model) = network {
            out.push_str(&format!(
                "network parameters: {}\n",
                model.param_count()
            ));
            for (i, spec) in model.specs.iter().enumerate() {
                out.push_str(&format!("  layer {i}: {spec:?} ({} params)\n", spec.param_count()));
            }
        }
        if let FittedClassifier::Knn { train, k, metric, .. } = &f.classifier {
            out.push_str(&format!(
                "knn: k={k}, metric={metric:?}, train {}x{}\n",
                train.rows(),
                train.cols()
            ));
        }
        if !f.training_log.is_empty() {
            out.push_str(&format!(
                "training epochs: {} (final loss {:.6})\n",
                f.training_log.len(),
                f.training_log.last().unwrap()
            ));
        }
        out
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len());
        for v in vs {
            self.f64(*v);
        }
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn matrix(&mut self, m: &Matrix) {
        self.u32(m.rows());
        self.u32(m.cols());
        for v in m.data() {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Persistence(format!(
                "model file truncated at offset {}",
                self.offset
            )));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let len = self.u32()?;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()?;
        let b = self.take(len)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| Error::Persistence("invalid UTF-8 in model file".into()))
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Matrix::new(rows, cols, data)
            .map_err(|e| Error::Persistence(format!("bad matrix shape: {e}")))
    }
}

fn method_tag(m: Method) -> u8 {
    match m {
        Method::Crc => 0,
        Method::Src => 1,
        Method::Knn => 2,
        Method::Mlp => 3,
        Method::Csen1 => 4,
        Method::Csen2 => 5,
        Method::Reconnet => 6,
    }
}

fn tag_method(t: u8) -> Result<Method> {
    Ok(match t {
        0 => Method::Crc,
        1 => Method::Src,
        2 => Method::Knn,
        3 => Method::Mlp,
        4 => Method::Csen1,
        5 => Method::Csen2,
        6 => Method::Reconnet,
        other => {
            return Err(Error::Persistence(format!(
                "unknown method tag {other}"
            )))
        }
    })
}

fn write_dictionary(w: &mut Writer, d: &Dictionary) {
    w.u32(d.layout.class_count);
    w.u32(d.layout.atoms_per_class);
    w.f64(d.lambda);
    w.matrix(&d.phi);
    w.matrix(&d.d);
    w.matrix(&d.b);
}

fn read_dictionary(r: &mut Reader, class_names: &[String]) -> Result<Dictionary> {
    let c = r.u32()?;
    let apc = r.u32()?;
    let lambda = r.f64()?;
    if c != class_names.len() {
        return Err(Error::Persistence(format!(
            "dictionary declares {c} classes, header has {}",
            class_names.len()
        )));
    }
    let layout =
        build_layout(c, apc).map_err(|e| Error::Persistence(format!("bad layout: {e}")))?;
    let phi = r.matrix()?;
    let d = r.matrix()?;
    let b = r.matrix()?;
    let n = layout.atom_count();
    if phi.cols() != n || d.cols() != n || b.rows() != n || b.cols() != d.rows() {
        return Err(Error::Persistence(
            "dictionary tensor shapes are inconsistent with the layout".into(),
        ));
    }
    Ok(Dictionary {
        phi,
        d,
        b,
        layout,
        lambda,
        class_names: class_names.to_vec(),
    })
}

fn write_network(w: &mut Writer, model: &NetworkModel) {
    w.u32(model.specs.len());
    for spec in &model.specs {
        match *spec {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => {
                w.u8(0);
                w.u32(in_channels);
                w.u32(out_channels);
                w.u32(kernel);
            }
            LayerSpec::TransposedConv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                w.u8(1);
                w.u32(in_channels);
                w.u32(out_channels);
                w.u32(kernel);
                w.u32(stride);
            }
            LayerSpec::MaxPool2d { size } => {
                w.u8(2);
                w.u32(size);
            }
            LayerSpec::Relu => w.u8(3),
            LayerSpec::Dense { input, output } => {
                w.u8(4);
                w.u32(input);
                w.u32(output);
            }
        }
    }
    match &model.head {
        Head::ClassAvgPool(layout) => {
            w.u8(0);
            w.u32(layout.class_count);
            w.u32(layout.atoms_per_class);
        }
        Head::Direct => w.u8(1),
    }
    let (c, h, wd) = model.input_shape();
    w.u32(c);
    w.u32(h);
    w.u32(wd);
    w.u32(model.class_count());
    w.f64s(&model.parameters_flat());
}

fn read_network(r: &mut Reader) -> Result<NetworkModel> {
    let layer_count = r.u32()?;
    let mut specs = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let spec = match r.u8()? {
            0 => LayerSpec::Conv2d {
                in_channels: r.u32()?,
                out_channels: r.u32()?,
                kernel: r.u32()?,
            },
            1 => LayerSpec::TransposedConv2d {
                in_channels: r.u32()?,
                out_channels: r.u32()?,
                kernel: r.u32()?,
                stride: r.u32()?,
            },
            2 => LayerSpec::MaxPool2d { size: r.u32()? },
            3 => LayerSpec::Relu,
            4 => LayerSpec::Dense {
                input: r.u32()?,
                output: r.u32()?,
            },
            other => {
                return Err(Error::Persistence(format!(
                    "unknown layer tag {other}"
                )))
            }
        };
        specs.push(spec);
    }
    let head = match r.u8()? {
        0 => {
            let c = r.u32()?;
            let apc = r.u32()?;
            Head::ClassAvgPool(
                build_layout(c, apc)
                    .map_err(|e| Error::Persistence(format!("bad head layout: {e}")))?,
            )
        }
        1 => Head::Direct,
        other => {
            return Err(Error::Persistence(format!("unknown head tag {other}")))
        }
    };
    let input_shape = (r.u32()?, r.u32()?, r.u32()?);
    let class_count = r.u32()?;
    let params = r.f64s()?;
    let mut model = NetworkModel::new(specs, head, input_shape, class_count)
        .map_err(|e| Error::Persistence(format!("invalid network structure: {e}")))?;
    model
        .set_parameters_flat(&params)
        .map_err(|e| Error::Persistence(format!("parameter table mismatch: {e}")))?;
    Ok(model)
}

/// Serializes a model artifact to `path`.
pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let f = &artifact.fitted;
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u16(artifact.version);
    w.u8(method_tag(f.method));
    w.u32(f.class_names.len());
    for name in &f.class_names {
        w.string(name);
    }
    w.u32(f.standardizer.dim());
    for v in f.standardizer.mean() {
        w.f64(*v);
    }
    for v in f.standardizer.std() {
        w.f64(*v);
    }
    match &f.projection {
        Some(p) => {
            w.u8(1);
            w.matrix(p.matrix());
            w.f64s(p.mean());
        }
        None => w.u8(0),
    }
    match &f.classifier {
        FittedClassifier::Crc { dictionary } => {
            write_dictionary(&mut w, dictionary);
        }
        FittedClassifier::Src { dictionary, params } => {
            write_dictionary(&mut w, dictionary);
            match params.lambda_l1 {
                Some(v) => {
                    w.u8(1);
                    w.f64(v);
                }
                None => w.u8(0),
            }
            w.u32(params.max_iter);
            w.f64(params.tol);
            w.u8(match params.residual_mode {
                ResidualMode::Plain => 0,
                ResidualMode::Normalized => 1,
            });
        }
        FittedClassifier::Knn {
            train,
            labels,
            k,
            metric,
        } => {
            w.u32(*k);
            w.u8(match metric {
                KnnMetric::Euclidean => 0,
                KnnMetric::Cityblock => 1,
                KnnMetric::Cosine => 2,
            });
            w.matrix(train);
            w.u32(labels.len());
            for &l in labels {
                w.u32(l);
            }
        }
        FittedClassifier::ProxyNetwork {
            dictionary,
            model,
            mode,
            plane_scale,
        } => {
            write_dictionary(&mut w, dictionary);
            w.u8(match mode {
                ProxyMode::Ridge => 0,
                ProxyMode::Correlation => 1,
            });
            w.u8(u8::from(*plane_scale));
            write_network(&mut w, model);
        }
        FittedClassifier::Mlp { model } => {
            write_network(&mut w, model);
        }
    }
    w.f64s(&f.training_log);
    fs::write(path, w.buf)?;
    Ok(())
}

/// Loads a model artifact, rejecting bad magic, versions, or shapes.
pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        offset: 0,
    };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::Persistence(format!(
            "{}: not a model file (bad magic)",
            path.display()
        )));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Persistence(format!(
            "unsupported model version {version} (expected {VERSION})"
        )));
    }
    let method = tag_method(r.u8()?)?;
    let class_count = r.u32()?;
    let mut class_names = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        class_names.push(r.string()?);
    }
    let dim = r.u32()?;
    let mut mean = Vec::with_capacity(dim);
    for _ in 0..dim {
        mean.push(r.f64()?);
    }
    let mut std = Vec::with_capacity(dim);
    for _ in 0..dim {
        std.push(r.f64()?);
    }
    let standardizer = Standardizer::new(mean, std)
        .map_err(|e| Error::Persistence(format!("bad standardizer: {e}")))?;
    let projection = if r.u8()? == 1 {
        let a = r.matrix()?;
        let mean = r.f64s()?;
        Some(
            ProjectionMatrix::new(a, mean)
                .map_err(|e| Error::Persistence(format!("bad projection: {e}")))?,
        )
    } else {
        None
    };
    let classifier = match method {
        Method::Crc => FittedClassifier::Crc {
            dictionary: read_dictionary(&mut r, &class_names)?,
        },
        Method::Src => {
            let dictionary = read_dictionary(&mut r, &class_names)?;
            let lambda_l1 = if r.u8()? == 1 { Some(r.f64()?) } else { None };
            let max_iter = r.u32()?;
            let tol = r.f64()?;
            let residual_mode = match r.u8()? {
                0 => ResidualMode::Plain,
                1 => ResidualMode::Normalized,
                other => {
                    return Err(Error::Persistence(format!(
                        "unknown residual mode {other}"
                    )))
                }
            };
            FittedClassifier::Src {
                dictionary,
                params: SrcParams {
                    lambda_l1,
                    max_iter,
                    tol,
                    residual_mode,
                },
            }
        }
        Method::Knn => {
            let k = r.u32()?;
            let metric = match r.u8()? {
                0 => KnnMetric::Euclidean,
                1 => KnnMetric::Cityblock,
                2 => KnnMetric::Cosine,
                other => {
                    return Err(Error::Persistence(format!(
                        "unknown metric tag {other}"
                    )))
                }
            };
            let train = r.matrix()?;
            let label_count = r.u32()?;
            if label_count != train.rows() {
                return Err(Error::Persistence(format!(
                    "knn labels ({label_count}) do not match training rows ({})",
                    train.rows()
                )));
            }
            let mut labels = Vec::with_capacity(label_count);
            for _ in 0..label_count {
                labels.push(r.u32()?);
            }
            FittedClassifier::Knn {
                train,
                labels,
                k,
                metric,
            }
        }
        Method::Mlp => FittedClassifier::Mlp {
            model: read_network(&mut r)?,
        },
        Method::Csen1 | Method::Csen2 | Method::Reconnet => {
            let dictionary = read_dictionary(&mut r, &class_names)?;
            let mode = match r.u8()? {
                0 => ProxyMode::Ridge,
                1 => ProxyMode::Correlation,
                other => {
                    return Err(Error::Persistence(format!(
                        "unknown proxy mode {other}"
                    )))
                }
            };
            let plane_scale = r.u8()? != 0;
            FittedClassifier::ProxyNetwork {
                dictionary,
                model: read_network(&mut r)?,
                mode,
                plane_scale,
            }
        }
    };
    let training_log = r.f64s()?;
    if r.offset != bytes.len() {
        return Err(Error::Persistence(format!(
            "{} trailing bytes after model payload",
            bytes.len() - r.offset
        )));
    }
    Ok(ModelArtifact {
        version,
        fitted: FittedMethod {
            method,
            class_names,
            standardizer,
            projection,
            classifier,
            training_log,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::fit_method;
    use crate::pipeline::config::ExperimentConfig;
    use crate::pipeline::dataset::generate_synthetic;

    fn desk_config() -> ExperimentConfig {
        ExperimentConfig {
            atoms_per_class: 9,
            csen_epochs: 2,
            mlp_epochs: 2,
            mlp_hidden: vec![16, 8],
            ..ExperimentConfig::default()
        }
    }

    fn roundtrip(method: Method) {
        let ds = generate_synthetic(3, 30, 16, 6.0, 7).unwrap();
        let fitted = fit_method(&ds, method, &desk_config(), 11).unwrap();
        let artifact = ModelArtifact::new(fitted);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&artifact, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, artifact);
        // probe predictions match exactly
        for i in 0..10 {
            let a = artifact.fitted.classify(ds.features.row(i)).unwrap();
            let b = loaded.fitted.classify(ds.features.row(i)).unwrap();
            assert_eq!(a.class_index, b.class_index);
            assert_eq!(a.scores, b.scores);
        }
    }

    #[test]
    fn roundtrip_all_methods() {
        for method in Method::ALL {
            roundtrip(method);
        }
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let ds = generate_synthetic(3, 20, 12, 6.0, 3).unwrap();
        let fitted = fit_method(&ds, Method::Crc, &desk_config(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&ModelArtifact::new(fitted), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Persistence(_))));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let ds = generate_synthetic(3, 20, 12, 6.0, 3).unwrap();
        let fitted = fit_method(&ds, Method::Knn, &desk_config(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&ModelArtifact::new(fitted), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Persistence(_))));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let ds = generate_synthetic(3, 20, 12, 6.0, 3).unwrap();
        let fitted = fit_method(&ds, Method::Crc, &desk_config(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&ModelArtifact::new(fitted), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[5] = 9; // version low byte
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Persistence(_))));
    }

    #[test]
    fn csen1_artifact_stores_expected_parameter_count() {
        let ds = generate_synthetic(4, 640, 16, 6.0, 5).unwrap();
        let config = ExperimentConfig {
            atoms_per_class: 625,
            csen_epochs: 0,
            ..ExperimentConfig::default()
        };
        let fitted = fit_method(&ds, Method::Csen1, &config, 2).unwrap();
        match &fitted.classifier {
            FittedClassifier::ProxyNetwork { model, dictionary, .. } => {
                assert_eq!(model.param_count(), 11_089);
                assert_eq!(dictionary.d.cols(), 2500);
            }
            other => panic!("unexpected classifier {other:?}"),
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("csen1.bin");
        save_model(&ModelArtifact::new(fitted), &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let described = loaded.describe();
        assert!(described.contains("11089"), "describe output:\n{described}");
    }
}
