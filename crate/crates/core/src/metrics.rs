//! Recovery and classification metrics.

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::tensor::{dot, fro_norm, Tensor3};

/// Peak signal-to-noise ratio in dB, with the peak range taken from `truth`.
/// Returns `f64::INFINITY` for an exact recovery.
pub fn psnr(recovered: &Tensor3, truth: &Tensor3) -> Result<f64> {
    recovered.check_same_dims(truth)?;
    let (lo, hi) = range(truth);
    if hi == lo {
        return Err(Error::Degenerate("PSNR of a constant ground truth".into()));
    }
    let err = fro_norm(&Tensor3::diff(recovered, truth)).powi(2);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = truth.len() as f64;
    Ok(10.0 * (n * (hi - lo).powi(2) / err).log10())
}

/// Mean over frontal slices of the single-window SSIM, computed from global
/// slice statistics. `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2` with `L` the range of `truth`.
pub fn ssim(recovered: &Tensor3, truth: &Tensor3) -> Result<f64> {
    recovered.check_same_dims(truth)?;
    let (lo, hi) = range(truth);
    let l = hi - lo;
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let mut total = 0.0;
    for k in 0..truth.n3() {
        let x = truth.slice(k);
        let y = recovered.slice(k);
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
            cxy += (a - mx) * (b - my);
        }
        if vx == 0.0 {
            return Err(Error::Degenerate(format!(
                "ground-truth slice {k} is constant"
            )));
        }
        let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
        total +=
            (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / truth.n3() as f64)
}

/// `||x - truth||_F / ||truth||_F`.
pub fn relative_error(x: &Tensor3, truth: &Tensor3) -> Result<f64> {
    x.check_same_dims(truth)?;
    let t = fro_norm(truth);
    if t == 0.0 {
        return Err(Error::Degenerate(
            "relative error against a zero tensor".into(),
        ));
    }
    Ok(fro_norm(&Tensor3::diff(x, truth)) / t)
}

fn range(x: &Tensor3) -> (f64, f64) {
    x.as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Predicted probabilities and hard labels for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
}

/// `p_j = sigmoid(<Z_j, x_hat>)`, label 1 iff `p_j > 0.5`.
pub fn predict(x_hat: &Tensor3, samples: &[Tensor3]) -> Result<Prediction> {
    let mut probabilities = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for z in samples {
        z.check_same_dims(x_hat)?;
        let p = sigmoid(dot(z.as_slice(), x_hat.as_slice()));
        probabilities.push(p);
        labels.push(u8::from(p > 0.5));
    }
    Ok(Prediction {
        probabilities,
        labels,
    })
}

/// `1 - (1/m) sum_j |y_pred_j - y_j|`.
pub fn test_accuracy(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Degenerate("accuracy over an empty test set".into()));
    }
    let wrong: usize = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(1.0 - wrong as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;

    #[test]
    fn psnr_cases() {
        let t = random_tensor((4, 4, 2), 1);
        assert_eq!(psnr(&t, &t).unwrap(), f64::INFINITY);

        // range 1, residual 0.1 everywhere
        let truth = Tensor3::from_fn(
            (5, 4, 2),
            |i, j, _| if i == 0 && j == 0 { 1.0 } else { 0.0 },
        );
        let rec = truth.map(|v| v + 0.1);
        assert!((psnr(&rec, &truth).unwrap() - 20.0).abs() < 1e-12);
        let rec2 = truth.map(|v| v + 0.2);
        let drop = psnr(&rec, &truth).unwrap() - psnr(&rec2, &truth).unwrap();
        assert!((drop - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((drop - 6.0206).abs() < 1e-4);

        assert!(matches!(
            psnr(&t, &Tensor3::filled((4, 4, 2), 3.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ssim_cases() {
        let t = random_tensor((6, 5, 3), 2);
        assert!((ssim(&t, &t).unwrap() - 1.0).abs() < 1e-15);

        // zero-mean slices, negated
        let mut z = random_tensor((4, 4, 2), 3);
        for k in 0..2 {
            let mean = z.slice(k).iter().sum::<f64>() / 16.0;
            z.slice_mut(k).iter_mut().for_each(|v| *v -= mean);
        }
        assert!(ssim(&z.scale(-1.0), &z).unwrap() < 0.1);

        let flat = Tensor3::from_fn((2, 2, 2), |i, _, k| if k == 0 { i as f64 } else { 1.0 });
        assert!(ssim(&flat, &flat).is_err());
    }

    #[test]
    fn ssim_hand_instance() {
        // slice 0: x = (0,1,2,3) pattern, y = x + 0.5 ; slice 1: x = (3,2,1,0)-ish, y = 0.5 x
        let truth =
            Tensor3::from_vec((2, 2, 2), vec![0.0, 1.0, 2.0, 3.0, 3.0, 1.0, 2.0, 0.0]).unwrap();
        let rec =
            Tensor3::from_vec((2, 2, 2), vec![0.5, 1.5, 2.5, 3.5, 1.5, 0.5, 1.0, 0.0]).unwrap();
        let c1 = 0.03f64.powi(2);
        let c2 = 0.09f64.powi(2);
        // slice 0: mx = 1.5, my = 2.0, vx = vy = cxy = 1.25
        let s0 =
            (2.0 * 1.5 * 2.0 + c1) * (2.0 * 1.25 + c2) / ((1.5f64.powi(2) + 4.0 + c1) * (2.5 + c2));
        // slice 1: mx = 1.5, my = 0.75, vx = 1.25, vy = 0.3125, cxy = 0.625
        let s1 = (2.0 * 1.5 * 0.75 + c1) * (2.0 * 0.625 + c2)
            / ((2.25 + 0.5625 + c1) * (1.25 + 0.3125 + c2));
        assert!((ssim(&rec, &truth).unwrap() - (s0 + s1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_and_accuracy() {
        let samples: Vec<Tensor3> = (0..4).map(|s| random_tensor((2, 2, 1), s)).collect();
        let p = predict(&Tensor3::zeros((2, 2, 1)), &samples).unwrap();
        assert!(p.probabilities.iter().all(|&q| q == 0.5));
        assert!(p.labels.iter().all(|&y| y == 0));

        let x = samples[0].scale(100.0);
        let p = predict(&x, &samples[..1]).unwrap();
        assert_eq!(p.labels, vec![1]);
        let u = dot(samples[1].as_slice(), x.as_slice());
        let p = predict(&x, &samples[1..2]).unwrap();
        assert!((p.probabilities[0] - 1.0 / (1.0 + (-u).exp())).abs() < 1e-12);

        assert_eq!(test_accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(test_accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(test_accuracy(&[1, 0, 1, 1], &[1, 1, 0, 1]).unwrap(), 0.5);
        assert!(test_accuracy(&[1], &[1, 0]).is_err());
    }
}
