use rand::Rng;
use rand_distr::StandardNormal;

use super::Tensor;

/// Normal samples with standard deviation `std`, redrawn until they fall
/// within two standard deviations of zero.
pub fn truncated_normal<R: Rng + ?Sized>(shape: &[usize], std: f32, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let z: f32 = rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                break z * std;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape product")
}
