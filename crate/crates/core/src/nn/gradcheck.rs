//! Central finite-difference checks of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::Model;
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradCheck {
    /// Worst relative error over all parameters.
    pub max_param_error: f64,
    /// Worst relative error over the input.
    pub max_input_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.max_param_error.max(self.max_input_error)
    }
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps near-zero gradients
/// from turning rounding noise into large relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Checks backprop through `model` for the scalar loss `sum(r * f(x))` with a
/// fixed random projection `r`.
pub fn check_model_gradients(model: &Model<f64>, x: &Tensor<f64>, eps: f64, seed: u64) -> Result<GradCheck> {
    let mut m = model.clone();
    let out_shape = m.forward(x)?.shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = out_shape.iter().product();
    let r = Tensor::new(out_shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let loss = |m: &Model<f64>, x: &Tensor<f64>| -> Result<f64> {
        Ok(m.forward(x)?.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
    };

    m.forward_train(x)?;
    let (grads, dx) = m.backward_with_input(&r)?;
    let mut report = GradCheck::default();

    for li in 0..m.layers().len() {
        for pi in 0..m.layers()[li].params().len() {
            for j in 0..m.layers()[li].params()[pi].len() {
                let orig = m.layers()[li].params()[pi].data()[j];
                m.layers_mut()[li].params_mut()[pi].data_mut()[j] = orig + eps;
                let up = loss(&m, x)?;
                m.layers_mut()[li].params_mut()[pi].data_mut()[j] = orig - eps;
                let down = loss(&m, x)?;
                m.layers_mut()[li].params_mut()[pi].data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let e = relative_error(grads.per_layer[li][pi].data()[j], numeric);
                report.max_param_error = report.max_param_error.max(e);
                report.checked += 1;
            }
        }
    }
    let mut xp = x.clone();
    for j in 0..x.len() {
        let orig = xp.data()[j];
        xp.data_mut()[j] = orig + eps;
        let up = loss(&m, &xp)?;
        xp.data_mut()[j] = orig - eps;
        let down = loss(&m, &xp)?;
        xp.data_mut()[j] = orig;
        let e = relative_error(dx.data()[j], (up - down) / (2.0 * eps));
        report.max_input_error = report.max_input_error.max(e);
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    fn input(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn check(specs: &[LayerSpec], residual: bool, shape: Vec<usize>) {
        let m = Model::<f64>::new(specs, residual, 5).unwrap();
        // Non-zero biases so the bias path is exercised through ReLUs too.
        let mut m = m;
        for l in m.layers_mut() {
            if let Some(b) = l.params_mut().get_mut(1) {
                for (i, v) in b.data_mut().iter_mut().enumerate() {
                    *v = 0.05 * (i as f64 + 1.0);
                }
            }
        }
        let r = check_model_gradients(&m, &input(shape, 8), 1e-4, 2).unwrap();
        assert!(r.max_error() < 1e-3, "{specs:?}: {r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn conv2d() {
        check(&[LayerSpec::conv2d(2, 3, 3, 1, 1)], false, vec![2, 2, 5, 6]);
        check(&[LayerSpec::conv2d(2, 3, 3, 2, 0)], false, vec![1, 2, 7, 7]);
    }

    #[test]
    fn conv3d() {
        let spec = LayerSpec::Conv3d { in_channels: 2, out_channels: 2, kernel: [3; 3], stride: [1, 2, 2], padding: [1; 3] };
        check(&[spec], false, vec![2, 2, 3, 5, 5]);
    }

    #[test]
    fn relu_pool_linear() {
        check(&[LayerSpec::conv2d(1, 3, 3, 1, 1), LayerSpec::Relu], false, vec![1, 1, 4, 4]);
        check(&[LayerSpec::conv2d(1, 3, 3, 1, 1), LayerSpec::GlobalAvgPool], false, vec![2, 1, 4, 4]);
        check(&[LayerSpec::Linear { in_features: 4, out_features: 3 }], false, vec![3, 4]);
    }

    #[test]
    fn residual_stack() {
        let specs = [LayerSpec::conv2d(1, 4, 3, 1, 1), LayerSpec::Relu, LayerSpec::conv2d(4, 1, 3, 1, 1)];
        check(&specs, true, vec![2, 1, 6, 6]);
    }
}
