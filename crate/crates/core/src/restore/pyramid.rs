//! Laplacian pyramid over `[.., H, W]` tensors and the pyramid L1 training
//! loss, with an exact adjoint for its gradient.
//!
//! Reduction blurs with the binomial kernel [1 4 6 4 1]/16 (edge samples
//! repeated) and keeps even samples. Expansion interpolates the coarse grid
//! with the matching polyphase filters, so constants pass through unchanged.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Default number of pyramid levels.
pub const DEFAULT_LEVELS: usize = 3;

const PIXEL_WEIGHT: f64 = 1.0;
const PYRAMID_WEIGHT: f64 = 10.0;

/// Sparse 1-D linear map: for every output sample, `(input index, weight)`.
#[derive(Clone, Debug)]
struct Op1d {
    in_len: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Op1d {
    fn reduce(n: usize) -> Self {
        const W: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let rows = (0..n / 2)
            .map(|j| {
                W.iter()
                    .enumerate()
                    .map(|(t, &w)| ((2 * j as isize + t as isize - 2).clamp(0, n as isize - 1) as usize, w))
                    .collect()
            })
            .collect();
        Op1d { in_len: n, rows }
    }

    fn expand(m: usize) -> Self {
        let at = |j: isize| j.clamp(0, m as isize - 1) as usize;
        let mut rows = Vec::with_capacity(2 * m);
        for j in 0..m as isize {
            rows.push(vec![(at(j - 1), 1.0 / 8.0), (at(j), 6.0 / 8.0), (at(j + 1), 1.0 / 8.0)]);
            rows.push(vec![(at(j), 0.5), (at(j + 1), 0.5)]);
        }
        Op1d { in_len: m, rows }
    }

    fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.in_len];
        for (o, row) in self.rows.iter().enumerate() {
            for &(i, w) in row {
                rows[i].push((o, w));
            }
        }
        Op1d { in_len: self.rows.len(), rows }
    }

    fn out_len(&self) -> usize {
        self.rows.len()
    }
}

/// `(A_y ⊗ A_x) x` over every `[h, w]` image in `x`.
fn apply(x: &[f64], h: usize, w: usize, ox: &Op1d, oy: &Op1d) -> Vec<f64> {
    debug_assert_eq!((ox.in_len, oy.in_len), (w, h));
    let (w2, h2) = (ox.out_len(), oy.out_len());
    let images = x.len() / (h * w);
    let mut out = vec![0.0; images * h2 * w2];
    let mut tmp = vec![0.0; h * w2];
    for (src, dst) in x.chunks_exact(h * w).zip(out.chunks_exact_mut(h2 * w2)) {
        for r in 0..h {
            let row = &src[r * w..][..w];
            for (c, taps) in ox.rows.iter().enumerate() {
                tmp[r * w2 + c] = taps.iter().map(|&(i, k)| k * row[i]).sum();
            }
        }
        for (r, taps) in oy.rows.iter().enumerate() {
            let d = &mut dst[r * w2..][..w2];
            for &(i, k) in taps {
                for (dv, &tv) in d.iter_mut().zip(&tmp[i * w2..][..w2]) {
                    *dv += k * tv;
                }
            }
        }
    }
    out
}

/// Precomputed operators for one image size and level count.
struct Plan {
    levels: usize,
    dims: Vec<(usize, usize)>,
    reduce: Vec<(Op1d, Op1d)>,
    expand: Vec<(Op1d, Op1d)>,
}

impl Plan {
    fn new(shape: &[usize], levels: usize) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::ShapeMismatch(format!("pyramid needs [.., H, W], got {shape:?}")));
        }
        if levels == 0 {
            return Err(Error::ShapeMismatch("pyramid needs at least one level".into()));
        }
        let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let div = 1usize << (levels - 1);
        if h == 0 || w == 0 || h % div != 0 || w % div != 0 {
            return Err(Error::ShapeMismatch(format!("{w}x{h} is not divisible by {div} for {levels} levels")));
        }
        let dims: Vec<_> = (0..levels).map(|s| (h >> s, w >> s)).collect();
        let reduce = dims[..levels - 1].iter().map(|&(h, w)| (Op1d::reduce(w), Op1d::reduce(h))).collect();
        let expand = dims[1..].iter().map(|&(h, w)| (Op1d::expand(w), Op1d::expand(h))).collect();
        Ok(Plan { levels, dims, reduce, expand })
    }

    fn level_shape(shape: &[usize], (h, w): (usize, usize)) -> Vec<usize> {
        let mut s = shape.to_vec();
        let n = s.len();
        s[n - 2] = h;
        s[n - 1] = w;
        s
    }

    fn analyze(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.levels);
        let mut g = x.to_vec();
        for s in 0..self.levels - 1 {
            let (h, w) = self.dims[s];
            let (rx, ry) = &self.reduce[s];
            let (ex, ey) = &self.expand[s];
            let next = apply(&g, h, w, rx, ry);
            let up = apply(&next, h / 2, w / 2, ex, ey);
            out.push(g.iter().zip(&up).map(|(a, b)| a - b).collect());
            g = next;
        }
        out.push(g);
        out
    }

    /// Adjoint of [`Self::analyze`]: maps per-level gradients to the image.
    fn analyze_adjoint(&self, mut grads: Vec<Vec<f64>>) -> Vec<f64> {
        let mut dg = grads.pop().expect("at least one level");
        for s in (0..self.levels - 1).rev() {
            let (h, w) = self.dims[s];
            let (rx, ry) = &self.reduce[s];
            let (ex, ey) = &self.expand[s];
            let gl = &grads[s];
            let eu = apply(gl, h, w, &ex.transpose(), &ey.transpose());
            // through L = g - E R g and g_next = R g
            let through: Vec<f64> = eu.iter().zip(&dg).map(|(a, b)| b - a).collect();
            let back = apply(&through, h / 2, w / 2, &rx.transpose(), &ry.transpose());
            dg = gl.iter().zip(&back).map(|(a, b)| a + b).collect();
        }
        dg
    }
}

/// Band-pass levels `1..S-1` followed by the coarsest Gaussian level.
pub fn laplacian_pyramid(image: &Tensor<f64>, levels: usize) -> Result<Vec<Tensor<f64>>> {
    let plan = Plan::new(image.shape(), levels)?;
    plan.analyze(image.data())
        .into_iter()
        .zip(&plan.dims)
        .map(|(d, &dims)| Tensor::new(Plan::level_shape(image.shape(), dims), d))
        .collect()
}

/// Inverse of [`laplacian_pyramid`].
pub fn collapse_pyramid(levels: &[Tensor<f64>]) -> Result<Tensor<f64>> {
    let coarse = levels.last().ok_or_else(|| Error::ShapeMismatch("empty pyramid".into()))?;
    let mut g = coarse.clone();
    for band in levels[..levels.len() - 1].iter().rev() {
        let s = band.shape();
        let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
        if g.shape() != Plan::level_shape(s, (h / 2, w / 2)) {
            return Err(Error::ShapeMismatch(format!("pyramid level {:?} under {s:?}", g.shape())));
        }
        let up = apply(g.data(), h / 2, w / 2, &Op1d::expand(w / 2), &Op1d::expand(h / 2));
        let data = band.data().iter().zip(&up).map(|(a, b)| a + b).collect();
        g = Tensor::new(s.to_vec(), data)?;
    }
    Ok(g)
}

fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

fn check_pair(out: &Tensor<f64>, gt: &Tensor<f64>) -> Result<()> {
    if out.shape() != gt.shape() {
        return Err(Error::ShapeMismatch(format!("restoration loss on {:?} vs {:?}", out.shape(), gt.shape())));
    }
    Ok(())
}

/// `10 · Σ_s 2^(s-1) · mean|L_s(out) - L_s(gt)| + mean|out - gt|`, with
/// `s = 1..=levels`. Leading axes are treated as a batch of images.
pub fn restoration_loss(out: &Tensor<f64>, gt: &Tensor<f64>, levels: usize) -> Result<f64> {
    restoration_loss_grad(out, gt, levels).map(|(l, _)| l)
}

/// Loss and its (sub)gradient with respect to `out`.
pub fn restoration_loss_grad(out: &Tensor<f64>, gt: &Tensor<f64>, levels: usize) -> Result<(f64, Tensor<f64>)> {
    check_pair(out, gt)?;
    let plan = Plan::new(out.shape(), levels)?;
    // The pyramid is linear, so analysing the difference is enough.
    let diff: Vec<f64> = out.data().iter().zip(gt.data()).map(|(a, b)| a - b).collect();
    let bands = plan.analyze(&diff);
    let mut loss = PIXEL_WEIGHT * mean_abs(&diff);
    let mut band_grads = Vec::with_capacity(levels);
    for (s, band) in bands.iter().enumerate() {
        let w = PYRAMID_WEIGHT * f64::from(1u32 << s);
        loss += w * mean_abs(band);
        let k = w / band.len() as f64;
        band_grads.push(band.iter().map(|&v| k * sign(v)).collect());
    }
    let k = PIXEL_WEIGHT / diff.len() as f64;
    let grad = plan.analyze_adjoint(band_grads).into_iter().zip(&diff).map(|(g, &d)| g + k * sign(d)).collect();
    Ok((loss, Tensor::new(out.shape().to_vec(), grad)?))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
