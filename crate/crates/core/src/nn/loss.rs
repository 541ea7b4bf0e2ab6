use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-wise softmax of `[N, C]` logits.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
    let c = classes(logits)?;
    Ok(logits.data().chunks(c).map(|row| softmax(&row.iter().map(|v| v.as_f64()).collect::<Vec<_>>())).collect())
}

fn classes<T: Scalar>(logits: &Tensor<T>) -> Result<usize> {
    match logits.shape() {
        [_, c] if *c > 0 => Ok(*c),
        s => Err(Error::ShapeMismatch(format!("expected [N, C] logits, got {s:?}"))),
    }
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let c = classes(logits)?;
    let n = logits.shape()[0];
    if labels.len() != n || labels.iter().any(|&l| l >= c) {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} rows of {c} classes", labels.len())));
    }
    let probs = softmax_rows(logits)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * c);
    for (p, &y) in probs.iter().zip(labels) {
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        for (k, &pk) in p.iter().enumerate() {
            let g = pk - if k == y { 1.0 } else { 0.0 };
            grad.push(T::from_f64(g / n as f64));
        }
    }
    Ok((loss / n as f64, Tensor::new(vec![n, c], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_uniform() {
        assert!(softmax(&[3.0; 5]).iter().all(|p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn large_logits_stable() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300 + 1e-12);
    }

    #[test]
    fn simplex_and_reference_values() {
        // Reference values computed with 50-digit arithmetic.
        let z = [0.3, -1.2, 2.5, 0.0, 1.1];
        let p = softmax(&z);
        let want = [
            0.075_674_432_437_771_25,
            0.016_885_248_228_981_43,
            0.682_962_774_312_900_9,
            0.056_060_998_389_648_57,
            0.16841654663069793,
        ];
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits = Tensor::<f64>::new(vec![2, 3], vec![0.1, 0.2, -0.3, 2.0, -1.0, 0.5]).unwrap();
        let labels = [2, 0];
        let (loss, grad) = cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-6;
        for i in 0..6 {
            let mut a = logits.clone();
            a.data_mut()[i] += eps;
            let mut b = logits.clone();
            b.data_mut()[i] -= eps;
            let num = (cross_entropy(&a, &labels).unwrap().0 - cross_entropy(&b, &labels).unwrap().0) / (2.0 * eps);
            assert!((num - grad.data()[i]).abs() < 1e-8);
        }
        assert!(loss > 0.0);
        assert!(cross_entropy(&logits, &[3, 0]).is_err());
    }
}
