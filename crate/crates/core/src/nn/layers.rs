use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Architecture description of one layer. Convolutions are cross-correlations
/// with zero padding; weights are `[out, in, (kd,) kh, kw]`, biases `[out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d { in_channels: usize, out_channels: usize, kernel: [usize; 2], stride: [usize; 2], padding: [usize; 2] },
    Conv3d { in_channels: usize, out_channels: usize, kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3] },
    Relu,
    /// `[N, C, ...] -> [N, C]`
    GlobalAvgPool,
    Linear { in_features: usize, out_features: usize },
}

impl LayerSpec {
    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel: [kernel; 2],
            stride: [stride; 2],
            padding: [padding; 2],
        }
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                vec![vec![out_channels, in_channels, kernel[0], kernel[1]], vec![out_channels]]
            }
            LayerSpec::Conv3d { in_channels, out_channels, kernel, .. } => {
                vec![vec![out_channels, in_channels, kernel[0], kernel[1], kernel[2]], vec![out_channels]]
            }
            LayerSpec::Linear { in_features, out_features } => vec![vec![out_features, in_features], vec![out_features]],
            LayerSpec::Relu | LayerSpec::GlobalAvgPool => vec![],
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel[0] * kernel[1],
            LayerSpec::Conv3d { in_channels, kernel, .. } => in_channels * kernel.iter().product::<usize>(),
            LayerSpec::Linear { in_features, .. } => in_features,
            _ => 1,
        }
    }

    fn conv_geom(&self) -> Option<ConvGeom> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => Some(ConvGeom {
                in_c: in_channels,
                out_c: out_channels,
                k: [1, kernel[0], kernel[1]],
                s: [1, stride[0], stride[1]],
                p: [0, padding[0], padding[1]],
            }),
            LayerSpec::Conv3d { in_channels, out_channels, kernel, stride, padding } => Some(ConvGeom {
                in_c: in_channels,
                out_c: out_channels,
                k: kernel,
                s: stride,
                p: padding,
            }),
            _ => None,
        }
    }

    /// Output shape for an input shape, or a shape error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || Error::ShapeMismatch(format!("{self:?} cannot take input {input:?}"));
        match *self {
            LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. } => {
                let g = self.conv_geom().expect("conv");
                let is3d = matches!(self, LayerSpec::Conv3d { .. });
                let want = if is3d { 5 } else { 4 };
                if input.len() != want || input[1] != g.in_c {
                    return Err(bad());
                }
                let dims = if is3d { [input[2], input[3], input[4]] } else { [1, input[2], input[3]] };
                let o = g.out_dims(dims).ok_or_else(bad)?;
                Ok(if is3d { vec![input[0], g.out_c, o[0], o[1], o[2]] } else { vec![input[0], g.out_c, o[1], o[2]] })
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::GlobalAvgPool => {
                if input.len() < 3 {
                    return Err(bad());
                }
                Ok(vec![input[0], input[1]])
            }
            LayerSpec::Linear { in_features, out_features } => {
                if input.len() != 2 || input[1] != in_features {
                    return Err(bad());
                }
                Ok(vec![input[0], out_features])
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    in_c: usize,
    out_c: usize,
    k: [usize; 3],
    s: [usize; 3],
    p: [usize; 3],
}

impl ConvGeom {
    fn out_dims(&self, d: [usize; 3]) -> Option<[usize; 3]> {
        let mut o = [0; 3];
        for i in 0..3 {
            let padded = d[i] + 2 * self.p[i];
            if padded < self.k[i] || self.s[i] == 0 {
                return None;
            }
            o[i] = (padded - self.k[i]) / self.s[i] + 1;
        }
        Some(o)
    }

    fn rows(&self) -> usize {
        self.in_c * self.k.iter().product::<usize>()
    }

    /// Output index range along one axis for kernel offset `k` such that the
    /// sampled input coordinate lies inside `[0, len)`.
    fn valid(&self, axis: usize, k: usize, len: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.s[axis] as isize, self.p[axis] as isize);
        let off = k as isize - p;
        // o*s + off >= 0  and  o*s + off < len
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let hi = if (len as isize) - off <= 0 { 0 } else { ((len as isize - off) + s - 1) / s };
        let lo = (lo.max(0) as usize).min(out);
        (lo, (hi as usize).clamp(lo, out))
    }

    /// Unfolds one sample `[C, D, H, W]` into `[C*kd*kh*kw, od*oh*ow]`.
    fn im2col<T: Scalar>(&self, x: &[T], d: [usize; 3], o: [usize; 3], col: &mut [T]) {
        let p_total = o[0] * o[1] * o[2];
        col.fill(T::zero());
        let mut r = 0;
        for c in 0..self.in_c {
            let xc = &x[c * d[0] * d[1] * d[2]..];
            for kz in 0..self.k[0] {
                let (z0, z1) = self.valid(0, kz, d[0], o[0]);
                for ky in 0..self.k[1] {
                    let (y0, y1) = self.valid(1, ky, d[1], o[1]);
                    for kx in 0..self.k[2] {
                        let (x0, x1) = self.valid(2, kx, d[2], o[2]);
                        let row = &mut col[r * p_total..(r + 1) * p_total];
                        for oz in z0..z1 {
                            let iz = oz * self.s[0] + kz - self.p[0];
                            for oy in y0..y1 {
                                let iy = oy * self.s[1] + ky - self.p[1];
                                let src = &xc[(iz * d[1] + iy) * d[2]..];
                                let dst = &mut row[(oz * o[1] + oy) * o[2]..];
                                if self.s[2] == 1 {
                                    let ix0 = x0 + kx - self.p[2];
                                    dst[x0..x1].copy_from_slice(&src[ix0..ix0 + (x1 - x0)]);
                                } else {
                                    for ox in x0..x1 {
                                        dst[ox] = src[ox * self.s[2] + kx - self.p[2]];
                                    }
                                }
                            }
                        }
                        r += 1;
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatters columns back, accumulating.
    fn col2im<T: Scalar>(&self, col: &[T], d: [usize; 3], o: [usize; 3], dx: &mut [T]) {
        let p_total = o[0] * o[1] * o[2];
        let mut r = 0;
        for c in 0..self.in_c {
            let xc = &mut dx[c * d[0] * d[1] * d[2]..];
            for kz in 0..self.k[0] {
                let (z0, z1) = self.valid(0, kz, d[0], o[0]);
                for ky in 0..self.k[1] {
                    let (y0, y1) = self.valid(1, ky, d[1], o[1]);
                    for kx in 0..self.k[2] {
                        let (x0, x1) = self.valid(2, kx, d[2], o[2]);
                        let row = &col[r * p_total..(r + 1) * p_total];
                        for oz in z0..z1 {
                            let iz = oz * self.s[0] + kz - self.p[0];
                            for oy in y0..y1 {
                                let iy = oy * self.s[1] + ky - self.p[1];
                                let dst = &mut xc[(iz * d[1] + iy) * d[2]..];
                                let src = &row[(oz * o[1] + oy) * o[2]..];
                                for ox in x0..x1 {
                                    let ix = ox * self.s[2] + kx - self.p[2];
                                    dst[ix] = dst[ix] + src[ox];
                                }
                            }
                        }
                        r += 1;
                    }
                }
            }
        }
    }
}

/// Spatial dims of a conv input viewed as 3-D (`[N, C, H, W]` gets depth 1).
fn conv_dims(shape: &[usize]) -> [usize; 3] {
    if shape.len() == 5 {
        [shape[2], shape[3], shape[4]]
    } else {
        [1, shape[2], shape[3]]
    }
}

fn conv_forward<T: Scalar>(spec: &LayerSpec, x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let g = spec.conv_geom().expect("conv layer");
    let out_shape = spec.output_shape(x.shape())?;
    let n = x.shape()[0];
    let d = conv_dims(x.shape());
    let o = g.out_dims(d).expect("validated");
    let (rows, p) = (g.rows(), o.iter().product::<usize>());
    let in_per = x.len() / n.max(1);
    let mut out = Tensor::zeros(out_shape);
    let mut col = vec![T::zero(); rows * p];
    let out_per = g.out_c * p;
    for i in 0..n {
        g.im2col(&x.data()[i * in_per..(i + 1) * in_per], d, o, &mut col);
        let y = &mut out.data_mut()[i * out_per..(i + 1) * out_per];
        for (oc, chunk) in y.chunks_mut(p).enumerate() {
            chunk.fill(b.data()[oc]);
        }
        T::gemm(g.out_c, rows, p, T::one(), w.data(), rows as isize, 1, &col, p as isize, 1, T::one(), y, p as isize, 1);
    }
    Ok(out)
}

fn conv_backward<T: Scalar>(
    spec: &LayerSpec,
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> (Option<Tensor<T>>, Vec<Tensor<T>>) {
    let g = spec.conv_geom().expect("conv layer");
    let n = x.shape()[0];
    let d = conv_dims(x.shape());
    let o = g.out_dims(d).expect("validated");
    let (rows, p) = (g.rows(), o.iter().product::<usize>());
    let in_per = x.len() / n.max(1);
    let out_per = g.out_c * p;
    let mut dw = Tensor::zeros(w.shape().to_vec());
    let mut db_acc = vec![0.0f64; g.out_c];
    let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape().to_vec()));
    let mut col = vec![T::zero(); rows * p];
    let mut dcol = vec![T::zero(); if need_input_grad { rows * p } else { 0 }];
    for i in 0..n {
        let gy = &grad_out.data()[i * out_per..(i + 1) * out_per];
        for (oc, chunk) in gy.chunks(p).enumerate() {
            db_acc[oc] += chunk.iter().map(|v| v.as_f64()).sum::<f64>();
        }
        g.im2col(&x.data()[i * in_per..(i + 1) * in_per], d, o, &mut col);
        // dW += gy * col^T
        T::gemm(g.out_c, p, rows, T::one(), gy, p as isize, 1, &col, 1, p as isize, T::one(), dw.data_mut(), rows as isize, 1);
        if let Some(dx) = dx.as_mut() {
            // dcol = W^T * gy
            T::gemm(rows, g.out_c, p, T::one(), w.data(), 1, rows as isize, gy, p as isize, 1, T::zero(), &mut dcol, p as isize, 1);
            g.col2im(&dcol, d, o, &mut dx.data_mut()[i * in_per..(i + 1) * in_per]);
        }
    }
    let db = Tensor::new(vec![g.out_c], db_acc.into_iter().map(T::from_f64).collect()).expect("bias shape");
    (dx, vec![dw, db])
}

/// A layer with its parameters (weights then bias; none for parameter-free layers).
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T = f32> {
    spec: LayerSpec,
    params: Vec<Tensor<T>>,
}

impl<T: Scalar> Layer<T> {
    /// He-uniform weights, zero biases.
    pub fn init(spec: LayerSpec, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / spec.fan_in() as f64).sqrt();
        let params = spec
            .param_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                let mut t = Tensor::zeros(shape);
                if i == 0 {
                    for v in t.data_mut() {
                        *v = T::from_f64(rng.random_range(-limit..limit));
                    }
                }
                t
            })
            .collect();
        Layer { spec, params }
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        Layer { spec, params: spec.param_shapes().into_iter().map(Tensor::zeros).collect() }
    }

    pub fn with_params(spec: LayerSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape()) {
            return Err(Error::ShapeMismatch(format!("parameters do not fit {spec:?}")));
        }
        Ok(Layer { spec, params })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        Layer { spec: self.spec, params: self.params.iter().map(Tensor::cast).collect() }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.spec.output_shape(x.shape())?;
        match self.spec {
            LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. } => conv_forward(&self.spec, x, &self.params[0], &self.params[1]),
            LayerSpec::Relu => Ok(x.map(|v| if v > T::zero() { v } else { T::zero() })),
            LayerSpec::GlobalAvgPool => {
                let (n, c) = (out_shape[0], out_shape[1]);
                let per = x.len() / (n * c).max(1);
                let data = x
                    .data()
                    .chunks(per)
                    .map(|ch| T::from_f64(ch.iter().map(|v| v.as_f64()).sum::<f64>() / per as f64))
                    .collect();
                Tensor::new(out_shape, data)
            }
            LayerSpec::Linear { in_features, out_features } => {
                let n = x.shape()[0];
                let mut out = Tensor::zeros(out_shape);
                for (i, row) in out.data_mut().chunks_mut(out_features).enumerate() {
                    row.copy_from_slice(self.params[1].data());
                    let xi = &x.data()[i * in_features..(i + 1) * in_features];
                    T::gemm(out_features, in_features, 1, T::one(), self.params[0].data(), in_features as isize, 1, xi, 1, 1, T::one(), row, 1, 1);
                }
                debug_assert_eq!(out.len(), n * out_features);
                Ok(out)
            }
        }
    }

    /// Gradients given the layer's input `x` (or, for ReLU, its output, which
    /// carries the same sign mask) and the gradient of its output.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> Result<(Option<Tensor<T>>, Vec<Tensor<T>>)> {
        let out_shape = self.spec.output_shape(x.shape())?;
        if grad_out.shape() != out_shape.as_slice() {
            return Err(Error::ShapeMismatch(format!("gradient {:?} for output {:?}", grad_out.shape(), out_shape)));
        }
        Ok(match self.spec {
            LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. } => {
                conv_backward(&self.spec, x, &self.params[0], grad_out, need_input_grad)
            }
            LayerSpec::Relu => {
                let mut g = grad_out.clone();
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
                    if xv <= T::zero() {
                        *gv = T::zero();
                    }
                }
                (Some(g), vec![])
            }
            LayerSpec::GlobalAvgPool => {
                let per = x.len() / grad_out.len().max(1);
                let scale = T::from_f64(1.0 / per as f64);
                let mut dx = Tensor::zeros(x.shape().to_vec());
                for (chunk, &gv) in dx.data_mut().chunks_mut(per).zip(grad_out.data()) {
                    chunk.fill(gv * scale);
                }
                (Some(dx), vec![])
            }
            LayerSpec::Linear { in_features, out_features } => {
                let n = x.shape()[0];
                let w = &self.params[0];
                let mut dw = Tensor::zeros(w.shape().to_vec());
                // dW = G^T X, db = sum_n G, dX = G W
                T::gemm(out_features, n, in_features, T::one(), grad_out.data(), 1, out_features as isize, x.data(), in_features as isize, 1, T::zero(), dw.data_mut(), in_features as isize, 1);
                let db: Vec<T> = (0..out_features)
                    .map(|j| T::from_f64((0..n).map(|i| grad_out.data()[i * out_features + j].as_f64()).sum()))
                    .collect();
                let dx = need_input_grad.then(|| {
                    let mut dx = Tensor::zeros(x.shape().to_vec());
                    T::gemm(n, out_features, in_features, T::one(), grad_out.data(), out_features as isize, 1, w.data(), in_features as isize, 1, T::zero(), dx.data_mut(), in_features as isize, 1);
                    dx
                });
                (dx, vec![dw, Tensor::new(vec![out_features], db)?])
            }
        })
    }
}

/// Standalone convolution, `[N, C, H, W]` (2-D) or `[N, C, D, H, W]` (3-D)
/// depending on the weight rank.
pub fn conv(x: &Tensor<f32>, w: &Tensor<f32>, b: &Tensor<f32>, stride: &[usize], padding: &[usize]) -> Result<Tensor<f32>> {
    let ws = w.shape();
    let spec = match (ws.len(), stride.len(), padding.len()) {
        (4, 2, 2) => LayerSpec::Conv2d {
            in_channels: ws[1],
            out_channels: ws[0],
            kernel: [ws[2], ws[3]],
            stride: [stride[0], stride[1]],
            padding: [padding[0], padding[1]],
        },
        (5, 3, 3) => LayerSpec::Conv3d {
            in_channels: ws[1],
            out_channels: ws[0],
            kernel: [ws[2], ws[3], ws[4]],
            stride: [stride[0], stride[1], stride[2]],
            padding: [padding[0], padding[1], padding[2]],
        },
        _ => return Err(Error::ShapeMismatch(format!("weights {ws:?} with stride {stride:?}, padding {padding:?}"))),
    };
    Layer::with_params(spec, vec![w.clone(), b.clone()])?.forward(x)
}
