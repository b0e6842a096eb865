use crate::error::Result;
use crate::tensor::Tensor;

/// Binary haze mask of `hazy` against the clean prediction.
///
/// For each batch item, `μ` is the mean of `hazy − prediction` over all
/// pixels and channels. A pixel is marked (on every channel) when any of its
/// channels differs by strictly more than `μ`.
pub fn compute_haze_mask(hazy: &Tensor, prediction: &Tensor) -> Result<Tensor> {
    hazy.expect_same_shape(prediction, "haze mask")?;
    let s = hazy.shape();
    let per_item = s.c * s.plane();
    let mut mask = Tensor::zeros(s);
    for n in 0..s.n {
        let range = n * per_item..(n + 1) * per_item;
        let diff: Vec<f64> = hazy.data()[range.clone()]
            .iter()
            .zip(&prediction.data()[range])
            .map(|(&a, &b)| a as f64 - b as f64)
            .collect();
        let mu = diff.iter().sum::<f64>() / per_item as f64;
        for p in 0..s.plane() {
            if (0..s.c).any(|c| diff[c * s.plane() + p] > mu) {
                for c in 0..s.c {
                    mask.data_mut()[n * per_item + c * s.plane() + p] = 1.0;
                }
            }
        }
    }
    Ok(mask)
}

/// Fraction of marked pixels.
pub fn mask_coverage(mask: &Tensor) -> f64 {
    mask.mean()
}
