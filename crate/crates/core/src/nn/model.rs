use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, LayerSpec};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Per-layer parameter gradients, shaped like [`Model::layers`] params.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    pub per_layer: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Gradients {
            per_layer: model
                .layers
                .iter()
                .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect())
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.per_layer.len() != other.per_layer.len() {
            return Err(Error::ShapeMismatch("gradient layer count".into()));
        }
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            if a.len() != b.len() {
                return Err(Error::ShapeMismatch("gradient parameter count".into()));
            }
            for (x, y) in a.iter_mut().zip(b) {
                x.add_assign(y)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        let s = T::from_f64(s);
        for t in self.per_layer.iter_mut().flatten() {
            for v in t.data_mut() {
                *v = *v * s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.per_layer.iter().flatten().all(|t| t.data().iter().all(|v| v.is_zero()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct AdamState<T> {
    step: u64,
    m: Vec<Vec<Tensor<T>>>,
    v: Vec<Vec<Tensor<T>>>,
}

/// Sequential network, optionally with a global residual connection
/// (`y = f(x) + x`).
#[derive(Clone, Debug)]
pub struct Model<T = f32> {
    layers: Vec<Layer<T>>,
    residual: bool,
    adam: AdamState<T>,
    // Inputs of each layer from the last training forward pass. ReLU inputs
    // are not kept; their outputs carry the same mask.
    tape: Option<Vec<Option<Tensor<T>>>>,
}

impl<T: Scalar> PartialEq for Model<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.residual == other.residual
    }
}

fn validate(specs: &[LayerSpec], residual: bool) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::ShapeMismatch("model has no layers".into()));
    }
    // Track channel/feature width through the stack.
    let mut width: Option<usize> = None;
    // Unknown until the first layer that cares.
    let mut flat: Option<bool> = None;
    let mut first_in = None;
    for s in specs {
        let (input, output) = match *s {
            LayerSpec::Conv2d { in_channels, out_channels, .. } | LayerSpec::Conv3d { in_channels, out_channels, .. } => {
                if flat == Some(true) {
                    return Err(Error::ShapeMismatch("convolution after pooling".into()));
                }
                flat = Some(false);
                (Some(in_channels), Some(out_channels))
            }
            LayerSpec::Linear { in_features, out_features } => {
                if flat == Some(false) {
                    return Err(Error::ShapeMismatch("linear layer needs pooled input".into()));
                }
                flat = Some(true);
                (Some(in_features), Some(out_features))
            }
            LayerSpec::GlobalAvgPool => {
                flat = Some(true);
                (None, width)
            }
            LayerSpec::Relu => (None, width),
        };
        if let (Some(i), Some(w)) = (input, width) {
            if i != w {
                return Err(Error::ShapeMismatch(format!("{s:?} expects width {i}, previous layer gives {w}")));
            }
        }
        if first_in.is_none() {
            first_in = input;
        }
        width = output.or(width);
    }
    if residual && (flat == Some(true) || first_in != width) {
        return Err(Error::ShapeMismatch("residual model must map its input shape to itself".into()));
    }
    Ok(())
}

impl<T: Scalar> Model<T> {
    /// Builds a model with He-uniform weights drawn from `seed`.
    pub fn new(specs: &[LayerSpec], residual: bool, seed: u64) -> Result<Self> {
        validate(specs, residual)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs.iter().map(|&s| Layer::init(s, &mut rng)).collect();
        Ok(Self::assemble(layers, residual))
    }

    pub fn from_layers(layers: Vec<Layer<T>>, residual: bool) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| *l.spec()).collect();
        validate(&specs, residual)?;
        Ok(Self::assemble(layers, residual))
    }

    fn assemble(layers: Vec<Layer<T>>, residual: bool) -> Self {
        let zeros: Vec<Vec<Tensor<T>>> =
            layers.iter().map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect()).collect();
        Model { layers, residual, adam: AdamState { step: 0, m: zeros.clone(), v: zeros }, tape: None }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| *l.spec()).collect()
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(Tensor::len).sum()
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    /// Same architecture and weights in another precision. Optimizer state is reset.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model::assemble(self.layers.iter().map(Layer::cast).collect(), self.residual)
    }

    /// Inference pass; records nothing.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        if self.residual {
            h.add_assign(x)?;
        }
        Ok(h)
    }

    /// Forward pass that records activations for one following [`Self::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Vec::with_capacity(self.layers.len() + 1);
        let mut h = x.clone();
        for l in &self.layers {
            let next = l.forward(&h)?;
            tape.push(if matches!(l.spec(), LayerSpec::Relu) { None } else { Some(h) });
            h = next;
        }
        // The final output doubles as the mask source for a trailing ReLU.
        tape.push(Some(h.clone()));
        if self.residual {
            h.add_assign(x)?;
        }
        self.tape = Some(tape);
        Ok(h)
    }

    /// Backpropagates `grad_out` through the recorded pass.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Gradients<T>> {
        self.backward_impl(grad_out, false).map(|(g, _)| g)
    }

    /// Like [`Self::backward`] but also returns the gradient w.r.t. the input.
    pub fn backward_with_input(&mut self, grad_out: &Tensor<T>) -> Result<(Gradients<T>, Tensor<T>)> {
        let (g, dx) = self.backward_impl(grad_out, true)?;
        Ok((g, dx.expect("input gradient requested")))
    }

    fn backward_impl(&mut self, grad_out: &Tensor<T>, want_input: bool) -> Result<(Gradients<T>, Option<Tensor<T>>)> {
        let mut tape = self.tape.take().ok_or(Error::BackwardWithoutForward)?;
        let mut per_layer = vec![Vec::new(); self.layers.len()];
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let need = i > 0 || want_input;
            let (dx, dp) = match layer.spec() {
                LayerSpec::Relu => {
                    // Consecutive ReLUs share one mask, so the next recorded tensor works.
                    let out = tape[i + 1..].iter().find_map(Option::as_ref).expect("relu output recorded");
                    layer.backward(out, &g, true)?
                }
                _ => {
                    let input = tape[i].take().expect("layer input recorded");
                    let r = layer.backward(&input, &g, need)?;
                    tape[i] = Some(input);
                    r
                }
            };
            per_layer[i] = dp;
            match dx {
                Some(dx) => g = dx,
                None => break,
            }
        }
        let dx = want_input.then(|| {
            if self.residual {
                let mut d = g;
                d.add_assign(grad_out).expect("residual shapes validated");
                d
            } else {
                g
            }
        });
        Ok((Gradients { per_layer }, dx))
    }

    /// Bias-corrected ADAM with default moments.
    pub fn adam_step(&mut self, grads: &Gradients<T>, lr: f64) -> Result<()> {
        self.adam_step_with(grads, lr, AdamConfig::default())
    }

    pub fn adam_step_with(&mut self, grads: &Gradients<T>, lr: f64, cfg: AdamConfig) -> Result<()> {
        if grads.per_layer.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("gradient layer count".into()));
        }
        for (l, g) in self.layers.iter().zip(&grads.per_layer) {
            if l.params().len() != g.len() || l.params().iter().zip(g).any(|(p, q)| p.shape() != q.shape()) {
                return Err(Error::ShapeMismatch(format!("gradients do not fit {:?}", l.spec())));
            }
        }
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (pi, p) in layer.params_mut().iter_mut().enumerate() {
                let g = grads.per_layer[li][pi].data();
                let m = self.adam.m[li][pi].data_mut();
                let v = self.adam.v[li][pi].data_mut();
                for (j, w) in p.data_mut().iter_mut().enumerate() {
                    let gj = g[j].as_f64();
                    let mj = cfg.beta1 * m[j].as_f64() + (1.0 - cfg.beta1) * gj;
                    let vj = cfg.beta2 * v[j].as_f64() + (1.0 - cfg.beta2) * gj * gj;
                    m[j] = T::from_f64(mj);
                    v[j] = T::from_f64(vj);
                    let update = lr * (mj / c1) / ((vj / c2).sqrt() + cfg.eps);
                    *w = T::from_f64(w.as_f64() - update);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear1() -> Model<f64> {
        let spec = LayerSpec::Linear { in_features: 1, out_features: 1 };
        let layer = Layer::with_params(
            spec,
            vec![Tensor::new(vec![1, 1], vec![0.5]).unwrap(), Tensor::new(vec![1], vec![0.0]).unwrap()],
        )
        .unwrap();
        Model::from_layers(vec![layer], false).unwrap()
    }

    #[test]
    fn backward_needs_forward() {
        let mut m = linear1();
        let g = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(matches!(m.backward(&g), Err(Error::BackwardWithoutForward)));
        m.forward_train(&Tensor::new(vec![1, 1], vec![2.0]).unwrap()).unwrap();
        assert!(m.backward(&g).is_ok());
        assert!(matches!(m.backward(&g), Err(Error::BackwardWithoutForward)));
    }

    #[test]
    fn squared_loss_closed_form() {
        // loss = (w x - y)^2, dL/dw = 2 x (w x - y)
        let mut m = linear1();
        let (x, y) = (3.0, 1.0);
        let out = m.forward_train(&Tensor::new(vec![1, 1], vec![x]).unwrap()).unwrap();
        let r = out.data()[0] - y;
        let g = m.backward(&Tensor::new(vec![1, 1], vec![2.0 * r]).unwrap()).unwrap();
        assert!((g.per_layer[0][0].data()[0] - 2.0 * x * (0.5 * x - y)).abs() < 1e-12);
        assert!((g.per_layer[0][1].data()[0] - 2.0 * r).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gradient_gives_zero_gradients() {
        let specs = [LayerSpec::conv2d(1, 4, 3, 1, 1), LayerSpec::Relu, LayerSpec::conv2d(4, 1, 3, 1, 1)];
        let mut m = Model::<f32>::new(&specs, true, 9).unwrap();
        let x = Tensor::filled(vec![2, 1, 6, 6], 0.3);
        let y = m.forward_train(&x).unwrap();
        let g = m.backward(&Tensor::zeros(y.shape().to_vec())).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn chain_validation() {
        assert!(Model::<f32>::new(&[LayerSpec::conv2d(1, 4, 3, 1, 1), LayerSpec::conv2d(3, 1, 3, 1, 1)], false, 0).is_err());
        assert!(Model::<f32>::new(&[LayerSpec::conv2d(1, 4, 3, 1, 1)], true, 0).is_err());
        assert!(Model::<f32>::new(&[LayerSpec::conv2d(1, 4, 3, 1, 1), LayerSpec::Linear { in_features: 4, out_features: 2 }], false, 0).is_err());
        let ok = [
            LayerSpec::conv2d(1, 4, 3, 1, 1),
            LayerSpec::Relu,
            LayerSpec::GlobalAvgPool,
            LayerSpec::Linear { in_features: 4, out_features: 2 },
        ];
        assert!(Model::<f32>::new(&ok, false, 0).is_ok());
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut m = linear1();
        let before = m.clone();
        m.adam_step(&Gradients::zeros_like(&m), 0.1).unwrap();
        assert_eq!(m, before);
        assert_eq!(m.adam_steps(), 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut m = linear1();
        let mut g = Gradients::zeros_like(&m);
        g.per_layer[0][0].data_mut()[0] = 37.0;
        g.per_layer[0][1].data_mut()[0] = -0.002;
        m.adam_step(&g, 0.01).unwrap();
        let w = m.layers()[0].params()[0].data()[0];
        let b = m.layers()[0].params()[1].data()[0];
        assert!((w - (0.5 - 0.01)).abs() < 1e-6);
        assert!((b - 0.01).abs() < 1e-5);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        // f(b) = (b - 1)^2 through the bias of a zero-weight linear layer.
        let mut m = linear1();
        m.layers_mut()[0].params_mut()[0].data_mut()[0] = 0.0;
        for _ in 0..100 {
            let mut g = Gradients::zeros_like(&m);
            let b = m.layers()[0].params()[1].data()[0];
            g.per_layer[0][1].data_mut()[0] = 2.0 * (b - 1.0);
            m.adam_step(&g, 0.1).unwrap();
        }
        let b = m.layers()[0].params()[1].data()[0];
        assert!((b - 1.0).abs() < 1e-2, "b = {b}");
    }

    #[test]
    fn adam_rejects_misshaped_gradients() {
        let mut m = linear1();
        let g = Gradients { per_layer: vec![vec![Tensor::zeros(vec![2, 1]), Tensor::zeros(vec![1])]] };
        assert!(matches!(m.adam_step(&g, 0.1), Err(Error::ShapeMismatch(_))));
    }
}
