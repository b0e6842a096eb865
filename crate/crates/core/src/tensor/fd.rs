use super::Tensor;

/// Central finite-difference gradient of a scalar function.
///
/// Each element is perturbed by `±h` in turn; the estimate for that element
/// is `(f(x + h·e) − f(x − h·e)) / 2h`, using the step that was actually
/// representable in `f32`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, h: f32) -> Tensor
where
    F: FnMut(&Tensor) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = x.data()[i];
        let plus = orig + h;
        let minus = orig - h;
        probe.data_mut()[i] = plus;
        let fp = f(&probe);
        probe.data_mut()[i] = minus;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = ((fp - fm) / (plus as f64 - minus as f64)) as f32;
    }
    out
}
