//! Tensors and per-layer forward/backward kernels.
//!
//! Plain nested loops over (channel, row, col) storage; weight layouts
//! are documented per kernel. Everything is f64.

/// Channel-major 3-D tensor: `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    /// Flat vector as a 1-D tensor.
    pub fn from_flat(data: Vec<f64>) -> Self {
        let len = data.len();
        Self {
            channels: len,
            height: 1,
            width: 1,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }
}

/// Overlap of an output row with the input row shifted by `off = k_tap - p`:
/// output positions x where x + off lies in [0, len). Returns (x0, x1).
#[inline]
fn shift_range(len: usize, off: isize) -> (usize, usize) {
    let x0 = if off < 0 { (-off) as usize } else { 0 };
    let x1 = if off > 0 {
        len.saturating_sub(off as usize)
    } else {
        len
    };
    (x0, x1.max(x0))
}

/// Same-padding 2-D convolution.
///
/// Weights: `w[((oc * in_c + ic) * k + ky) * k + kx]`, odd k, pad (k-1)/2.
/// Implemented as shift-and-accumulate over contiguous rows: one slice
/// pass per (oc, ic, ky, kx) tap.
pub fn conv2d_forward(
    input: &Tensor,
    w: &[f64],
    b: &[f64],
    in_c: usize,
    out_c: usize,
    k: usize,
) -> Tensor {
    let (h, wd) = (input.height, input.width);
    let p = ((k - 1) / 2) as isize;
    let mut out = Tensor::zeros(out_c, h, wd);
    for oc in 0..out_c {
        out.data[oc * h * wd..(oc + 1) * h * wd].fill(b[oc]);
        for ic in 0..in_c {
            for ky in 0..k {
                let oy = ky as isize - p;
                let (y0, y1) = shift_range(h, oy);
                for kx in 0..k {
                    let tap = w[((oc * in_c + ic) * k + ky) * k + kx];
                    if tap == 0.0 {
                        continue;
                    }
                    let ox = kx as isize - p;
                    let (x0, x1) = shift_range(wd, ox);
                    if x1 <= x0 {
                        continue;
                    }
                    for y in y0..y1 {
                        let iy = (y as isize + oy) as usize;
                        let in_row =
                            &input.data[(ic * h + iy) * wd + ((x0 as isize + ox) as usize)..];
                        let out_row = &mut out.data[(oc * h + y) * wd + x0..(oc * h + y) * wd + x1];
                        for (o, &v) in out_row.iter_mut().zip(in_row) {
                            *o += tap * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of the same-padding convolution, same slice strategy.
pub fn conv2d_backward(
    input: &Tensor,
    w: &[f64],
    grad_out: &Tensor,
    in_c: usize,
    out_c: usize,
    k: usize,
) -> (Vec<f64>, Vec<f64>, Tensor) {
    let (h, wd) = (input.height, input.width);
    let p = ((k - 1) / 2) as isize;
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_c];
    let mut din = Tensor::zeros(in_c, h, wd);
    for oc in 0..out_c {
        db[oc] = grad_out.data[oc * h * wd..(oc + 1) * h * wd].iter().sum();
        for ic in 0..in_c {
            for ky in 0..k {
                let oy = ky as isize - p;
                let (y0, y1) = shift_range(h, oy);
                for kx in 0..k {
                    let widx = ((oc * in_c + ic) * k + ky) * k + kx;
                    let tap = w[widx];
                    let ox = kx as isize - p;
                    let (x0, x1) = shift_range(wd, ox);
                    if x1 <= x0 {
                        continue;
                    }
                    let mut dw_acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + oy) as usize;
                        let ibase = (ic * h + iy) * wd + ((x0 as isize + ox) as usize);
                        let obase = (oc * h + y) * wd + x0;
                        let in_row = &input.data[ibase..ibase + (x1 - x0)];
                        let g_row = &grad_out.data[obase..obase + (x1 - x0)];
                        for (&g, &v) in g_row.iter().zip(in_row) {
                            dw_acc += g * v;
                        }
                        if tap != 0.0 {
                            let din_row = &mut din.data[ibase..ibase + (x1 - x0)];
                            for (d, &g) in din_row.iter_mut().zip(g_row) {
                                *d += tap * g;
                            }
                        }
                    }
                    dw[widx] = dw_acc;
                }
            }
        }
    }
    (dw, db, din)
}

/// Transposed convolution with stride 2 that exactly doubles spatial
/// dims (odd k, pad (k-1)/2, implicit output padding 1).
///
/// Weights: `w[((oc * in_c + ic) * k + ky) * k + kx]`.
pub fn tconv2d_forward(
    input: &Tensor,
    w: &[f64],
    b: &[f64],
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
) -> Tensor {
    let (h, wd) = (input.height, input.width);
    let (oh, ow) = (h * stride, wd * stride);
    let p = (k - 1) / 2;
    let mut out = Tensor::zeros(out_c, oh, ow);
    for oc in 0..out_c {
        for v in out.data[oc * oh * ow..(oc + 1) * oh * ow].iter_mut() {
            *v = b[oc];
        }
    }
    for ic in 0..in_c {
        for iy in 0..h {
            for ix in 0..wd {
                let v = input.at(ic, iy, ix);
                if v == 0.0 {
                    continue;
                }
                for oc in 0..out_c {
                    let wbase = (oc * in_c + ic) * k * k;
                    for ky in 0..k {
                        let oy = stride * iy + ky;
                        if oy < p || oy - p >= oh {
                            continue;
                        }
                        let oy = oy - p;
                        for kx in 0..k {
                            let ox = stride * ix + kx;
                            if ox < p || ox - p >= ow {
                                continue;
                            }
                            *out.at_mut(oc, oy, ox - p) += w[wbase + ky * k + kx] * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of the transposed convolution.
pub fn tconv2d_backward(
    input: &Tensor,
    w: &[f64],
    grad_out: &Tensor,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
) -> (Vec<f64>, Vec<f64>, Tensor) {
    let (h, wd) = (input.height, input.width);
    let (oh, ow) = (grad_out.height, grad_out.width);
    let p = (k - 1) / 2;
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_c];
    let mut din = Tensor::zeros(in_c, h, wd);
    for oc in 0..out_c {
        db[oc] = grad_out.data[oc * oh * ow..(oc + 1) * oh * ow].iter().sum();
    }
    for ic in 0..in_c {
        for iy in 0..h {
            for ix in 0..wd {
                let v = input.at(ic, iy, ix);
                let mut acc = 0.0;
                for oc in 0..out_c {
                    let wbase = (oc * in_c + ic) * k * k;
                    for ky in 0..k {
                        let oy = stride * iy + ky;
                        if oy < p || oy - p >= oh {
                            continue;
                        }
                        let oy = oy - p;
                        for kx in 0..k {
                            let ox = stride * ix + kx;
                            if ox < p || ox - p >= ow {
                                continue;
                            }
                            let g = grad_out.at(oc, oy, ox - p);
                            dw[wbase + ky * k + kx] += g * v;
                            acc += g * w[wbase + ky * k + kx];
                        }
                    }
                }
                *din.at_mut(ic, iy, ix) = acc;
            }
        }
    }
    (dw, db, din)
}

/// 2x2 (or size x size) max pooling with matching stride. Returns the
/// pooled tensor and the flat input index of each winner (first maximum
/// in scan order, so ties are deterministic).
pub fn maxpool_forward(input: &Tensor, size: usize) -> (Tensor, Vec<usize>) {
    let (c, h, w) = input.shape();
    let (oh, ow) = (h / size, w / size);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut argmax = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for dy in 0..size {
                    for dx in 0..size {
                        let iy = y * size + dy;
                        let ix = x * size + dx;
                        let v = input.at(ch, iy, ix);
                        if v > best {
                            best = v;
                            best_idx = (ch * h + iy) * w + ix;
                        }
                    }
                }
                *out.at_mut(ch, y, x) = best;
                argmax[(ch * oh + y) * ow + x] = best_idx;
            }
        }
    }
    (out, argmax)
}

/// Routes pooled gradients back to the winning input cells.
pub fn maxpool_backward(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    grad_out: &Tensor,
) -> Tensor {
    let mut din = Tensor::zeros(input_shape.0, input_shape.1, input_shape.2);
    for (g, &idx) in grad_out.data.iter().zip(argmax) {
        din.data[idx] += g;
    }
    din
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut din = grad_out.clone();
    for (g, &x) in din.data.iter_mut().zip(&input.data) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    din
}

/// Fully connected layer over the flattened input.
///
/// Weights: `w[o * in_d + i]`.
pub fn dense_forward(input: &Tensor, w: &[f64], b: &[f64], in_d: usize, out_d: usize) -> Tensor {
    let mut out = vec![0.0; out_d];
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &w[o * in_d..(o + 1) * in_d];
        *out_v = b[o] + row.iter().zip(&input.data).map(|(a, b)| a * b).sum::<f64>();
    }
    Tensor::from_flat(out)
}

pub fn dense_backward(
    input: &Tensor,
    w: &[f64],
    grad_out: &Tensor,
    in_d: usize,
    out_d: usize,
) -> (Vec<f64>, Vec<f64>, Tensor) {
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_d];
    let mut din = vec![0.0; in_d];
    for o in 0..out_d {
        let g = grad_out.data[o];
        db[o] = g;
        if g == 0.0 {
            continue;
        }
        let wrow = &w[o * in_d..(o + 1) * in_d];
        let dwrow = &mut dw[o * in_d..(o + 1) * in_d];
        for i in 0..in_d {
            dwrow[i] += g * input.data[i];
            din[i] += g * wrow[i];
        }
    }
    let mut din_t = Tensor::zeros(input.channels, input.height, input.width);
    din_t.data.copy_from_slice(&din);
    (dw, db, din_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_convolution_is_identity() {
        let input = Tensor::from_vec(1, 3, 3, (1..=9).map(f64::from).collect());
        let mut w = vec![0.0; 9];
        w[4] = 1.0; // center tap
        let out = conv2d_forward(&input, &w, &[0.0], 1, 1, 3);
        assert_eq!(out.data, input.data);
    }

    #[test]
    fn convolution_edges_use_zero_padding() {
        let input = Tensor::from_vec(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let w = vec![1.0; 9]; // box filter
        let out = conv2d_forward(&input, &w, &[0.0], 1, 1, 3);
        // every output is the sum of in-bounds neighbors
        assert_eq!(out.data, vec![10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn tconv_doubles_dimensions() {
        let input = Tensor::zeros(2, 5, 7);
        let w = vec![0.1; 2 * 3 * 3 * 3];
        let b = vec![0.0; 3];
        let out = tconv2d_forward(&input, &w, &b, 2, 3, 3, 2);
        assert_eq!(out.shape(), (3, 10, 14));
    }

    #[test]
    fn tconv_single_pixel_spreads_kernel() {
        // one input pixel at (0,0); k=3 s=2 p=1 lands taps at output (0..2, 0..2) minus pad
        let mut input = Tensor::zeros(1, 2, 2);
        *input.at_mut(0, 0, 0) = 1.0;
        let w: Vec<f64> = (1..=9).map(f64::from).collect();
        let out = tconv2d_forward(&input, &w, &[0.0], 1, 1, 3, 2);
        assert_eq!(out.shape(), (1, 4, 4));
        // oy = 2*0 + ky - 1, ox likewise: taps (ky,kx) in 1..3 land at (ky-1, kx-1)
        assert_eq!(out.at(0, 0, 0), 5.0); // center tap w[1][1]
        assert_eq!(out.at(0, 0, 1), 6.0);
        assert_eq!(out.at(0, 1, 0), 8.0);
        assert_eq!(out.at(0, 1, 1), 9.0);
        assert_eq!(out.at(0, 2, 2), 0.0);
    }

    #[test]
    fn maxpool_picks_first_maximum() {
        let input = Tensor::from_vec(1, 2, 2, vec![3.0, 3.0, 1.0, 2.0]);
        let (out, argmax) = maxpool_forward(&input, 2);
        assert_eq!(out.data, vec![3.0]);
        assert_eq!(argmax, vec![0]); // first of the tied maxima
        let grad = Tensor::from_vec(1, 1, 1, vec![1.5]);
        let din = maxpool_backward((1, 2, 2), &argmax, &grad);
        assert_eq!(din.data, vec![1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_clamps_and_gates() {
        let input = Tensor::from_flat(vec![-1.0, 0.0, 2.0]);
        let out = relu_forward(&input);
        assert_eq!(out.data, vec![0.0, 0.0, 2.0]);
        let grad = Tensor::from_flat(vec![1.0, 1.0, 1.0]);
        let din = relu_backward(&input, &grad);
        assert_eq!(din.data, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn dense_forward_backward_tiny() {
        let input = Tensor::from_flat(vec![1.0, 2.0]);
        let w = vec![0.5, -1.0, 2.0, 0.0];
        let b = vec![0.1, -0.1];
        let out = dense_forward(&input, &w, &b, 2, 2);
        assert!((out.data[0] - (-1.4)).abs() < 1e-12);
        assert!((out.data[1] - 1.9).abs() < 1e-12);
        let grad = Tensor::from_flat(vec![1.0, 0.0]);
        let (dw, db, din) = dense_backward(&input, &w, &grad, 2, 2);
        assert_eq!(dw, vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(db, vec![1.0, 0.0]);
        assert_eq!(din.data, vec![0.5, -1.0]);
    }
}
