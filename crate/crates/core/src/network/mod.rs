//! Compact convolutional network engine: layer specs, parameter
//! storage, forward/backward passes, the class-block average-pooling
//! head, and the CSEN1 / CSEN2 / ReconNet / MLP builders.

pub mod layers;
pub mod train;

use rand::Rng;

use crate::dictionary::{ClassLayout, ProxyPlane};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sparse::ClassDecision;
pub use layers::Tensor;
pub use train::{adam_step, train, AdamState, TrainConfig};

/// One layer of the fixed layer set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// Same-padding convolution (odd kernel), preserves H x W.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    /// Stride-2 transposed convolution, exactly doubles H x W.
    TransposedConv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    /// size x size max pooling with matching stride; divides H x W.
    MaxPool2d { size: usize },
    Relu,
    /// Fully connected over the flattened input.
    Dense { input: usize, output: usize },
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            }
            | LayerSpec::TransposedConv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => kernel * kernel * in_channels * out_channels,
            LayerSpec::Dense { input, output } => input * output,
            _ => 0,
        }
    }

    pub fn bias_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { out_channels, .. }
            | LayerSpec::TransposedConv2d { out_channels, .. } => out_channels,
            LayerSpec::Dense { output, .. } => output,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            }
            | LayerSpec::TransposedConv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            LayerSpec::Dense { input, .. } => input,
            _ => 0,
        }
    }

    /// Output shape for a given input shape, or a dimension error.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => {
                if c != in_channels {
                    return Err(Error::Dimension(format!(
                        "conv expects {in_channels} channels, got {c}"
                    )));
                }
                if kernel % 2 == 0 {
                    return Err(Error::Dimension(format!(
                        "same-padding conv needs an odd kernel, got {kernel}"
                    )));
                }
                Ok((out_channels, h, w))
            }
            LayerSpec::TransposedConv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if c != in_channels {
                    return Err(Error::Dimension(format!(
                        "transposed conv expects {in_channels} channels, got {c}"
                    )));
                }
                if stride != 2 || kernel % 2 == 0 {
                    return Err(Error::Dimension(
                        "transposed conv supports odd kernels with stride 2".into(),
                    ));
                }
                Ok((out_channels, h * stride, w * stride))
            }
            LayerSpec::MaxPool2d { size } => {
                if size == 0 || h % size != 0 || w % size != 0 {
                    return Err(Error::Dimension(format!(
                        "maxpool {size}x{size} cannot tile {h}x{w}"
                    )));
                }
                Ok((c, h / size, w / size))
            }
            LayerSpec::Relu => Ok(input),
            LayerSpec::Dense { input: in_d, output } => {
                if c * h * w != in_d {
                    return Err(Error::Dimension(format!(
                        "dense expects {in_d} inputs, got {c}x{h}x{w}"
                    )));
                }
                Ok((output, 1, 1))
            }
        }
    }
}

/// Weights and biases of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn zeros(spec: &LayerSpec) -> Self {
        Self {
            weights: vec![0.0; spec.weight_count()],
            bias: vec![0.0; spec.bias_count()],
        }
    }
}

/// Output head mapping the final tensor to class scores.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Averages the final 1-channel map over each class block (dead
    /// cells excluded). Linear, and invariant to permutations inside a
    /// block.
    ClassAvgPool(ClassLayout),
    /// The final tensor already is the score vector.
    Direct,
}

/// A network: ordered layer specs, their parameters, and a head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<LayerParams>,
    pub head: Head,
    input_shape: (usize, usize, usize),
    class_count: usize,
}

impl NetworkModel {
    /// Assembles a model with zero-initialized parameters, validating
    /// the whole shape chain at construction.
    pub fn new(
        specs: Vec<LayerSpec>,
        head: Head,
        input_shape: (usize, usize, usize),
        class_count: usize,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        let params = specs.iter().map(LayerParams::zeros).collect();
        let model = Self {
            specs,
            params,
            head,
            input_shape,
            class_count,
        };
        let shapes = model.shape_trace()?;
        let final_shape = *shapes.last().unwrap();
        match &model.head {
            Head::ClassAvgPool(layout) => {
                if final_shape != (1, layout.plane_rows, layout.plane_cols) {
                    return Err(Error::Dimension(format!(
                        "head expects a 1x{}x{} map, network produces {}x{}x{}",
                        layout.plane_rows,
                        layout.plane_cols,
                        final_shape.0,
                        final_shape.1,
                        final_shape.2
                    )));
                }
                if layout.class_count != class_count {
                    return Err(Error::Dimension("layout class count mismatch".into()));
                }
            }
            Head::Direct => {
                if final_shape != (class_count, 1, 1) {
                    return Err(Error::Dimension(format!(
                        "direct head expects {class_count} scores, network produces {}x{}x{}",
                        final_shape.0, final_shape.1, final_shape.2
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Shapes along the stack, input first, final map last.
    pub fn shape_trace(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut shapes = vec![self.input_shape];
        let mut cur = self.input_shape;
        for spec in &self.specs {
            cur = spec.output_shape(cur)?;
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Total trainable parameters.
    pub fn param_count(&self) -> usize {
        self.specs.iter().map(LayerSpec::param_count).sum()
    }

    /// Seeded fan-in-scaled uniform init (bound sqrt(6/fan_in)); biases
    /// stay zero.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for (spec, params) in self.specs.iter().zip(self.params.iter_mut()) {
            let fan_in = spec.fan_in();
            if fan_in == 0 {
                continue;
            }
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in params.weights.iter_mut() {
                *w = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
            }
            for b in params.bias.iter_mut() {
                *b = 0.0;
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::Dimension(format!(
                "network expects input {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    /// Runs the stack, caching every activation (input first). The
    /// cached maxpool winners ride along for the backward pass.
    fn forward_cached(&self, input: &Tensor) -> Result<(Vec<Tensor>, Vec<Vec<usize>>)> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        let mut pool_winners: Vec<Vec<usize>> = vec![Vec::new(); self.specs.len()];
        acts.push(input.clone());
        for (i, spec) in self.specs.iter().enumerate() {
            let x = acts.last().unwrap();
            let out = match *spec {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                } => layers::conv2d_forward(
                    x,
                    &self.params[i].weights,
                    &self.params[i].bias,
                    in_channels,
                    out_channels,
                    kernel,
                ),
                LayerSpec::TransposedConv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                } => layers::tconv2d_forward(
                    x,
                    &self.params[i].weights,
                    &self.params[i].bias,
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                ),
                LayerSpec::MaxPool2d { size } => {
                    let (out, winners) = layers::maxpool_forward(x, size);
                    pool_winners[i] = winners;
                    out
                }
                LayerSpec::Relu => layers::relu_forward(x),
                LayerSpec::Dense { input, output } => layers::dense_forward(
                    x,
                    &self.params[i].weights,
                    &self.params[i].bias,
                    input,
                    output,
                ),
            };
            acts.push(out);
        }
        Ok((acts, pool_winners))
    }

    fn head_forward(&self, final_map: &Tensor) -> Vec<f64> {
        match &self.head {
            Head::ClassAvgPool(layout) => {
                let mut scores = vec![0.0; layout.class_count];
                for atom in 0..layout.atom_count() {
                    let (r, c) = layout.atom_cell(atom);
                    scores[layout.atom_class(atom)] += final_map.at(0, r, c);
                }
                for s in scores.iter_mut() {
                    *s /= layout.atoms_per_class as f64;
                }
                scores
            }
            Head::Direct => final_map.data.clone(),
        }
    }

    fn head_backward(&self, final_shape: (usize, usize, usize), dscores: &[f64]) -> Tensor {
        match &self.head {
            Head::ClassAvgPool(layout) => {
                let mut grad = Tensor::zeros(final_shape.0, final_shape.1, final_shape.2);
                let inv = 1.0 / layout.atoms_per_class as f64;
                for atom in 0..layout.atom_count() {
                    let (r, c) = layout.atom_cell(atom);
                    *grad.at_mut(0, r, c) = dscores[layout.atom_class(atom)] * inv;
                }
                grad
            }
            Head::Direct => {
                let mut grad = Tensor::zeros(final_shape.0, final_shape.1, final_shape.2);
                grad.data.copy_from_slice(dscores);
                grad
            }
        }
    }

    /// Class scores for an input tensor (softmax lives in the loss).
    pub fn forward(&self, input: &Tensor) -> Result<Vec<f64>> {
        let (acts, _) = self.forward_cached(input)?;
        Ok(self.head_forward(acts.last().unwrap()))
    }

    /// Class scores for a proxy plane.
    pub fn forward_plane(&self, plane: &ProxyPlane) -> Result<Vec<f64>> {
        self.forward(&plane_tensor(plane))
    }

    /// Softmax cross-entropy loss of one sample.
    pub fn loss(&self, input: &Tensor, target: usize) -> Result<f64> {
        let scores = self.forward(input)?;
        Ok(train::softmax_cross_entropy(&scores, target).0)
    }

    /// Loss and parameter gradients of one sample (full backprop).
    pub fn gradients(&self, input: &Tensor, target: usize) -> Result<(f64, Vec<LayerParams>)> {
        if target >= self.class_count {
            return Err(Error::Parameter(format!(
                "target class {target} out of range {}",
                self.class_count
            )));
        }
        let (acts, pool_winners) = self.forward_cached(input)?;
        let scores = self.head_forward(acts.last().unwrap());
        let (loss, dscores) = train::softmax_cross_entropy(&scores, target);
        let mut grad = self.head_backward(acts.last().unwrap().shape(), &dscores);

        let mut grads: Vec<LayerParams> = self.specs.iter().map(LayerParams::zeros).collect();
        for (i, spec) in self.specs.iter().enumerate().rev() {
            let x = &acts[i];
            match *spec {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let (dw, db, din) = layers::conv2d_backward(
                        x,
                        &self.params[i].weights,
                        &grad,
                        in_channels,
                        out_channels,
                        kernel,
                    );
                    grads[i].weights = dw;
                    grads[i].bias = db;
                    grad = din;
                }
                LayerSpec::TransposedConv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                } => {
                    let (dw, db, din) = layers::tconv2d_backward(
                        x,
                        &self.params[i].weights,
                        &grad,
                        in_channels,
                        out_channels,
                        kernel,
                        stride,
                    );
                    grads[i].weights = dw;
                    grads[i].bias = db;
                    grad = din;
                }
                LayerSpec::MaxPool2d { .. } => {
                    grad = layers::maxpool_backward(x.shape(), &pool_winners[i], &grad);
                }
                LayerSpec::Relu => {
                    grad = layers::relu_backward(x, &grad);
                }
                LayerSpec::Dense { input, output } => {
                    let (dw, db, din) = layers::dense_backward(
                        x,
                        &self.params[i].weights,
                        &grad,
                        input,
                        output,
                    );
                    grads[i].weights = dw;
                    grads[i].bias = db;
                    grad = din;
                }
            }
        }
        Ok((loss, grads))
    }

    /// Argmax decision over the forward scores, ties to the lowest
    /// class index.
    pub fn predict(&self, input: &Tensor) -> Result<ClassDecision> {
        Ok(ClassDecision::from_scores(self.forward(input)?))
    }

    /// [`NetworkModel::predict`] for a proxy plane.
    pub fn predict_plane(&self, plane: &ProxyPlane) -> Result<ClassDecision> {
        self.predict(&plane_tensor(plane))
    }

    /// Distance of this forward pass from the nearest activation
    /// switch: the smallest |pre-ReLU value| and the smallest gap
    /// between a pooling winner and its runner-up. Finite-difference
    /// checks are only meaningful where this margin dwarfs the step.
    pub fn smoothness_margin(&self, input: &Tensor) -> Result<f64> {
        let (acts, _) = self.forward_cached(input)?;
        let mut margin = f64::INFINITY;
        for (i, spec) in self.specs.iter().enumerate() {
            match spec {
                LayerSpec::Relu => {
                    for &v in &acts[i].data {
                        margin = margin.min(v.abs());
                    }
                }
                LayerSpec::MaxPool2d { size } => {
                    let x = &acts[i];
                    for c in 0..x.channels {
                        for y in 0..x.height / size {
                            for xx in 0..x.width / size {
                                let mut best = f64::NEG_INFINITY;
                                let mut second = f64::NEG_INFINITY;
                                for dy in 0..*size {
                                    for dx in 0..*size {
                                        let v = x.at(c, y * size + dy, xx * size + dx);
                                        if v > best {
                                            second = best;
                                            best = v;
                                        } else if v > second {
                                            second = v;
                                        }
                                    }
                                }
                                margin = margin.min(best - second);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(margin)
    }

    /// Per-atom support probabilities: logistic squashing of the final
    /// pre-head map, flattened in atom order. Needs a spatial head.
    pub fn support_probability_map(&self, plane: &ProxyPlane) -> Result<Vec<f64>> {
        let layout = match &self.head {
            Head::ClassAvgPool(layout) => layout.clone(),
            Head::Direct => {
                return Err(Error::Unsupported(
                    "support map needs a model with a spatial final map".into(),
                ))
            }
        };
        let (acts, _) = self.forward_cached(&plane_tensor(plane))?;
        let final_map = acts.last().unwrap();
        let mut p = Vec::with_capacity(layout.atom_count());
        for atom in 0..layout.atom_count() {
            let (r, c) = layout.atom_cell(atom);
            let v = final_map.at(0, r, c);
            p.push(1.0 / (1.0 + (-v).exp()));
        }
        Ok(p)
    }

    /// All parameters flattened layer by layer (weights then bias).
    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in &self.params {
            out.extend_from_slice(&p.weights);
            out.extend_from_slice(&p.bias);
        }
        out
    }

    /// Restores parameters from [`NetworkModel::parameters_flat`] order.
    pub fn set_parameters_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for p in self.params.iter_mut() {
            let nw = p.weights.len();
            p.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = p.bias.len();
            p.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }
}

/// Proxy plane as a 1-channel input tensor.
pub fn plane_tensor(plane: &ProxyPlane) -> Tensor {
    Tensor::from_vec(
        1,
        plane.plane.rows(),
        plane.plane.cols(),
        plane.plane.data().to_vec(),
    )
}

/// CSEN1: conv(1->48, 3x3) ReLU, conv(48->24, 3x3) ReLU, conv(24->1,
/// 3x3), class-average-pool head. 11,089 parameters.
pub fn build_csen1(layout: &ClassLayout) -> Result<NetworkModel> {
    let specs = vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 48,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::Conv2d {
            in_channels: 48,
            out_channels: 24,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::Conv2d {
            in_channels: 24,
            out_channels: 1,
            kernel: 3,
        },
    ];
    NetworkModel::new(
        specs,
        Head::ClassAvgPool(layout.clone()),
        (1, layout.plane_rows, layout.plane_cols),
        layout.class_count,
    )
}

/// CSEN2: CSEN1 plus max-pooling and a transposed-convolution stage
/// that restores the plane size. 16,297 parameters. Needs even plane
/// dims.
pub fn build_csen2(layout: &ClassLayout) -> Result<NetworkModel> {
    if layout.plane_rows % 2 != 0 || layout.plane_cols % 2 != 0 {
        return Err(Error::Dimension(format!(
            "csen2 needs even plane dims, layout is {}x{}",
            layout.plane_rows, layout.plane_cols
        )));
    }
    let specs = vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 48,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2 },
        LayerSpec::Conv2d {
            in_channels: 48,
            out_channels: 24,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::TransposedConv2d {
            in_channels: 24,
            out_channels: 24,
            kernel: 3,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Conv2d {
            in_channels: 24,
            out_channels: 1,
            kernel: 3,
        },
    ];
    NetworkModel::new(
        specs,
        Head::ClassAvgPool(layout.clone()),
        (1, layout.plane_rows, layout.plane_cols),
        layout.class_count,
    )
}

/// The deeper fully convolutional baseline (the dense front layer is
/// replaced by the denoiser upstream, so it consumes the same proxy
/// planes). 22,914 parameters.
pub fn build_reconnet_baseline(layout: &ClassLayout) -> Result<NetworkModel> {
    let block = |last: bool| {
        let mut v = vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 64,
                kernel: 11,
            },
            LayerSpec::Relu,
            LayerSpec::Conv2d {
                in_channels: 64,
                out_channels: 32,
                kernel: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Conv2d {
                in_channels: 32,
                out_channels: 1,
                kernel: 7,
            },
        ];
        if !last {
            v.push(LayerSpec::Relu);
        }
        v
    };
    let mut specs = block(false);
    specs.extend(block(true));
    NetworkModel::new(
        specs,
        Head::ClassAvgPool(layout.clone()),
        (1, layout.plane_rows, layout.plane_cols),
        layout.class_count,
    )
}

/// MLP over flat feature vectors: ReLU hidden stack, direct score head.
pub fn build_mlp(input_dim: usize, hidden: &[usize], c: usize) -> Result<NetworkModel> {
    if hidden.iter().any(|&w| w == 0) || input_dim == 0 || c == 0 {
        return Err(Error::Parameter("mlp widths must be positive".into()));
    }
    let mut specs = Vec::new();
    let mut prev = input_dim;
    for &width in hidden {
        specs.push(LayerSpec::Dense {
            input: prev,
            output: width,
        });
        specs.push(LayerSpec::Relu);
        prev = width;
    }
    specs.push(LayerSpec::Dense {
        input: prev,
        output: c,
    });
    NetworkModel::new(specs, Head::Direct, (input_dim, 1, 1), c)
}

/// Default MLP hidden widths.
pub const MLP_DEFAULT_HIDDEN: [usize; 4] = [512, 256, 128, 64];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::build_layout;

    #[test]
    fn csen1_parameter_count_matches_table() {
        let layout = build_layout(4, 625).unwrap();
        let model = build_csen1(&layout).unwrap();
        assert_eq!(model.param_count(), 11_089);
        // per-layer breakdown
        let counts: Vec<usize> = model
            .specs
            .iter()
            .map(LayerSpec::param_count)
            .filter(|&c| c > 0)
            .collect();
        assert_eq!(counts, vec![480, 10_392, 217]);
    }

    #[test]
    fn csen2_parameter_count_matches_table() {
        let layout = build_layout(4, 625).unwrap();
        let model = build_csen2(&layout).unwrap();
        assert_eq!(model.param_count(), 16_297);
        let counts: Vec<usize> = model
            .specs
            .iter()
            .map(LayerSpec::param_count)
            .filter(|&c| c > 0)
            .collect();
        assert_eq!(counts, vec![480, 10_392, 5_208, 217]);
    }

    #[test]
    fn csen2_shape_trace_halves_then_doubles() {
        let layout = build_layout(4, 625).unwrap();
        let model = build_csen2(&layout).unwrap();
        let shapes = model.shape_trace().unwrap();
        assert_eq!(shapes.first().unwrap(), &(1, 50, 50));
        assert!(shapes.contains(&(48, 25, 25)));
        assert!(shapes.contains(&(24, 50, 50)));
        assert_eq!(shapes.last().unwrap(), &(1, 50, 50));
    }

    #[test]
    fn csen2_rejects_odd_planes() {
        let layout = build_layout(2, 9).unwrap(); // 3x3 blocks -> 3x6 plane
        assert!(matches!(build_csen2(&layout), Err(Error::Dimension(_))));
    }

    #[test]
    fn reconnet_parameter_count_matches_table() {
        let layout = build_layout(4, 625).unwrap();
        let model = build_reconnet_baseline(&layout).unwrap();
        assert_eq!(model.param_count(), 22_914);
        let counts: Vec<usize> = model
            .specs
            .iter()
            .map(LayerSpec::param_count)
            .filter(|&c| c > 0)
            .collect();
        assert_eq!(counts, vec![7_808, 2_080, 1_569, 7_808, 2_080, 1_569]);
    }

    #[test]
    fn mlp_default_parameter_count() {
        let model = build_mlp(1024, &MLP_DEFAULT_HIDDEN, 4).unwrap();
        assert_eq!(model.param_count(), 697_540);
    }

    #[test]
    fn mlp_single_hidden_width_formula() {
        let c = 3;
        let input = 10;
        let model = build_mlp(input, &[1], c).unwrap();
        assert_eq!(model.param_count(), input + 1 + c + c);
        let scores = model
            .forward(&Tensor::from_flat(vec![0.5; input]))
            .unwrap();
        assert_eq!(scores.len(), c);
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let layout = build_layout(4, 4).unwrap();
        let model = build_csen1(&layout).unwrap();
        let input = Tensor::from_vec(
            1,
            layout.plane_rows,
            layout.plane_cols,
            (0..layout.plane_rows * layout.plane_cols)
                .map(|i| i as f64)
                .collect(),
        );
        let scores = model.forward(&input).unwrap();
        assert_eq!(scores, vec![0.0; 4]);
    }

    #[test]
    fn identity_kernel_head_returns_block_means() {
        // one conv layer with a centered identity kernel: scores are the
        // per-block means of the input plane
        let layout = build_layout(2, 4).unwrap(); // 2x2 blocks, plane 2x4
        let specs = vec![LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
        }];
        let mut model = NetworkModel::new(
            specs,
            Head::ClassAvgPool(layout.clone()),
            (1, 2, 4),
            2,
        )
        .unwrap();
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        model.params[0].weights = w;
        let input = Tensor::from_vec(1, 2, 4, vec![1.0, 2.0, 10.0, 20.0, 3.0, 4.0, 30.0, 40.0]);
        let scores = model.forward(&input).unwrap();
        assert_eq!(scores, vec![2.5, 25.0]);
    }

    #[test]
    fn scores_count_equals_classes() {
        let layout = build_layout(3, 6).unwrap();
        let mut model = build_csen1(&layout).unwrap();
        model.init_weights(1);
        let input = Tensor::zeros(1, layout.plane_rows, layout.plane_cols);
        assert_eq!(model.forward(&input).unwrap().len(), 3);
    }

    #[test]
    fn csen1_on_full_plane_gives_four_scores() {
        let layout = build_layout(4, 625).unwrap();
        let mut model = build_csen1(&layout).unwrap();
        model.init_weights(8);
        let mut rng = rng_from_seed(9);
        let input = Tensor::from_vec(
            1,
            50,
            50,
            (0..2500).map(|_| rng.gen::<f64>()).collect(),
        );
        assert_eq!(model.forward(&input).unwrap().len(), 4);
    }

    #[test]
    fn dead_cells_do_not_influence_loss_or_gradients() {
        // layout with a dead block and dead in-block cells
        let layout = build_layout(3, 6).unwrap();
        let mut model = NetworkModel::new(
            vec![LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 1,
                kernel: 1,
            }],
            Head::ClassAvgPool(layout.clone()),
            (1, layout.plane_rows, layout.plane_cols),
            3,
        )
        .unwrap();
        model.params[0].weights[0] = 1.3;
        let mut rng = rng_from_seed(11);
        let mut base = Tensor::zeros(1, layout.plane_rows, layout.plane_cols);
        for v in base.data.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let mut poked = base.clone();
        for r in 0..layout.plane_rows {
            for c in 0..layout.plane_cols {
                if layout.cell_atom(r, c).is_none() {
                    *poked.at_mut(0, r, c) += 42.0;
                }
            }
        }
        assert_ne!(base.data, poked.data);
        let (loss_a, grads_a) = model.gradients(&base, 1).unwrap();
        let (loss_b, grads_b) = model.gradients(&poked, 1).unwrap();
        assert_eq!(loss_a, loss_b);
        assert_eq!(grads_a, grads_b);
    }

    #[test]
    fn zero_final_map_gives_half_probabilities() {
        use crate::dictionary::{plane_from_flat, ProxyPlane};
        let layout = build_layout(2, 4).unwrap();
        let model = build_csen1(&layout).unwrap(); // zero weights
        let flat = vec![1.0; layout.atom_count()];
        let plane = plane_from_flat(&flat, &layout).unwrap();
        let probs = model
            .support_probability_map(&ProxyPlane { plane, flat })
            .unwrap();
        assert_eq!(probs, vec![0.5; layout.atom_count()]);
    }

    #[test]
    fn support_map_unsupported_for_mlp() {
        use crate::dictionary::{plane_from_flat, ProxyPlane};
        let layout = build_layout(2, 4).unwrap();
        let model = build_mlp(8, &[4], 2).unwrap();
        let flat = vec![0.0; 8];
        let plane = plane_from_flat(&flat, &layout).unwrap();
        assert!(matches!(
            model.support_probability_map(&ProxyPlane { plane, flat }),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let layout = build_layout(4, 625).unwrap();
        let model = build_csen1(&layout).unwrap();
        let bad = Tensor::zeros(1, 10, 10);
        assert!(matches!(model.forward(&bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn head_is_linear() {
        let layout = build_layout(3, 5).unwrap();
        let model = NetworkModel::new(
            vec![LayerSpec::Relu],
            Head::ClassAvgPool(layout.clone()),
            (1, layout.plane_rows, layout.plane_cols),
            3,
        )
        .unwrap();
        let n = layout.plane_rows * layout.plane_cols;
        let mut rng = rng_from_seed(4);
        let m1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let m2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let (alpha, beta) = (0.3, 1.7);
        let t1 = Tensor::from_vec(1, layout.plane_rows, layout.plane_cols, m1.clone());
        let t2 = Tensor::from_vec(1, layout.plane_rows, layout.plane_cols, m2.clone());
        let combo = Tensor::from_vec(
            1,
            layout.plane_rows,
            layout.plane_cols,
            m1.iter().zip(&m2).map(|(a, b)| alpha * a + beta * b).collect(),
        );
        // bypass relu nonlinearity by keeping everything nonnegative
        let s1 = model.head_forward(&t1);
        let s2 = model.head_forward(&t2);
        let sc = model.head_forward(&combo);
        for i in 0..3 {
            assert!((sc[i] - (alpha * s1[i] + beta * s2[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn block_permutation_leaves_score_unchanged() {
        let layout = build_layout(2, 4).unwrap();
        let model = NetworkModel::new(
            vec![LayerSpec::Relu],
            Head::ClassAvgPool(layout.clone()),
            (1, layout.plane_rows, layout.plane_cols),
            2,
        )
        .unwrap();
        let base = Tensor::from_vec(1, 2, 4, vec![1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
        // swap two cells inside class 0's block (cols 0..2)
        let permuted = Tensor::from_vec(1, 2, 4, vec![2.0, 1.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
        let s0 = model.head_forward(&base);
        let s1 = model.head_forward(&permuted);
        assert_eq!(s0, s1);
    }

    #[test]
    fn parameters_flat_roundtrip() {
        let layout = build_layout(2, 4).unwrap();
        let mut model = build_csen1(&layout).unwrap();
        model.init_weights(9);
        let flat = model.parameters_flat();
        assert_eq!(flat.len(), model.param_count());
        let mut other = build_csen1(&layout).unwrap();
        other.set_parameters_flat(&flat).unwrap();
        assert_eq!(other.params, model.params);
        assert!(other.set_parameters_flat(&flat[1..]).is_err());
    }
}
