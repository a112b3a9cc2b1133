//! Minimal dense-prediction network toolkit.
//!
//! Hand-rolled f64 convolution layers with explicit forward/backward passes.
//! Keeping the arithmetic in-crate buys three things the rest of the build
//! depends on: bit-reproducible training given a seed, per-parameter access
//! for finite-difference verification, and a self-describing checkpoint
//! format.

pub mod checkpoint;
pub mod conv;
pub mod optim;
pub mod params;
pub mod unet;

pub use checkpoint::Checkpoint;
pub use conv::{Conv2d, ConvTranspose2d};
pub use optim::{Adam, SgdMomentum};
pub use params::{GradBuffer, ParamId, ParamStore};
pub use unet::{UNet, UNetCache};

use ndarray::Array3;

/// Rectified linear unit.
pub fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient through ReLU given the forward *output* (its sign equals the
/// input's where nonzero).
pub fn relu_backward(y: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &o| {
        if o <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Leaky ReLU with slope `alpha` on the negative side.
pub fn leaky_relu(x: &Array3<f64>, alpha: f64) -> Array3<f64> {
    x.mapv(|v| if v > 0.0 { v } else { alpha * v })
}

/// Gradient through leaky ReLU given the forward output.
pub fn leaky_relu_backward(y: &Array3<f64>, dy: &Array3<f64>, alpha: f64) -> Array3<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &o| {
        if o <= 0.0 {
            *d *= alpha;
        }
    });
    dx
}

/// Elementwise logistic squashing.
pub fn sigmoid(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| 1.0 / (1.0 + (-v).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn relu_roundtrip() {
        let x = array![[[-1.0, 2.0], [0.0, -3.0]]];
        let y = relu(&x);
        assert_eq!(y, array![[[0.0, 2.0], [0.0, 0.0]]]);
        let dy = Array3::from_elem((1, 2, 2), 1.0);
        let dx = relu_backward(&y, &dy);
        assert_eq!(dx, array![[[0.0, 1.0], [0.0, 0.0]]]);
    }

    #[test]
    fn sigmoid_bounds() {
        let x = array![[[-1e6, 0.0, 1e6]]];
        let y = sigmoid(&x);
        assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((y[[0, 0, 1]] - 0.5).abs() < 1e-15);
    }
}
