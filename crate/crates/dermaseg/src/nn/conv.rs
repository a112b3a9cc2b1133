//! Convolution and transposed convolution with explicit backward passes.
//!
//! Forward paths lower to matrix multiplication through im2col; backward
//! recomputes the column matrix from the cached layer input rather than
//! storing it.

use ndarray::{Array1, Array2, Array3, Array4, ArrayView4, Axis, Ix1, Ix4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::{GradBuffer, ParamId, ParamStore};

/// 2-d convolution, square kernel, symmetric zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    /// Registers fan-in-scaled random weights (He initialization) and small
    /// uniform biases under `name.w` / `name.b`. Biases are drawn rather
    /// than zeroed so that dead input positions do not leave pre-activations
    /// sitting exactly on the ReLU kink.
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let w = Array4::from_shape_fn((out_ch, in_ch, kernel, kernel), |_| {
            let n: f64 = rng.sample(StandardNormal);
            n * std
        });
        let bound = 1.0 / fan_in.sqrt();
        let b = Array1::from_shape_fn(out_ch, |_| rng.gen_range(-bound..bound));
        Conv2d {
            w: ps.register(format!("{name}.w"), w.into_dyn()),
            b: ps.register(format!("{name}.b"), b.into_dyn()),
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    /// `x` is (in_ch, H, W); output is (out_ch, H', W').
    pub fn forward(&self, ps: &ParamStore, x: &Array3<f64>) -> Array3<f64> {
        let (_, h, w) = x.dim();
        let (ho, wo) = self.out_size(h, w);
        let cols = im2col(x, self.kernel, self.stride, self.pad);
        let wv = self.weight_view(ps);
        let w_mat = wv
            .to_shape((self.out_ch, self.in_ch * self.kernel * self.kernel))
            .expect("contiguous weights");
        let mut y = w_mat.dot(&cols);
        let b = ps.value(self.b).view().into_dimensionality::<Ix1>().unwrap();
        for (mut row, &bias) in y.outer_iter_mut().zip(b.iter()) {
            row += bias;
        }
        y.into_shape_with_order((self.out_ch, ho, wo)).unwrap()
    }

    /// Backpropagates `dy` through the layer. Parameter gradients accumulate
    /// into `grads` when provided; pass `None` for a data-only pass.
    pub fn backward(
        &self,
        ps: &ParamStore,
        x: &Array3<f64>,
        dy: &Array3<f64>,
        grads: Option<&mut GradBuffer>,
    ) -> Array3<f64> {
        let (_, h, w) = x.dim();
        let (co, ho, wo) = dy.dim();
        debug_assert_eq!(co, self.out_ch);
        let dy_mat = dy
            .view()
            .into_shape_with_order((co, ho * wo))
            .expect("contiguous dy");
        let wv = self.weight_view(ps);
        let w_mat = wv
            .to_shape((self.out_ch, self.in_ch * self.kernel * self.kernel))
            .expect("contiguous weights");

        if let Some(gb) = grads {
            let cols = im2col(x, self.kernel, self.stride, self.pad);
            let dw = dy_mat.dot(&cols.t());
            gb.add_to(
                self.w,
                &dw.into_shape_with_order((self.out_ch, self.in_ch, self.kernel, self.kernel))
                    .unwrap()
                    .into_dyn(),
            );
            gb.add_to(self.b, &dy_mat.sum_axis(Axis(1)).into_dyn());
        }

        let dcols = w_mat.t().dot(&dy_mat);
        col2im(&dcols, (self.in_ch, h, w), self.kernel, self.stride, self.pad)
    }

    fn weight_view<'a>(&self, ps: &'a ParamStore) -> ArrayView4<'a, f64> {
        ps.value(self.w).view().into_dimensionality::<Ix4>().unwrap()
    }
}

/// Transposed convolution with a 2x2 kernel and stride 2: doubles the
/// spatial resolution, each output pixel fed by exactly one input pixel.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_ch: usize,
    pub out_ch: usize,
}

impl ConvTranspose2d {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let std = (2.0 / in_ch as f64).sqrt();
        let w = Array4::from_shape_fn((in_ch, out_ch, 2, 2), |_| {
            let n: f64 = rng.sample(StandardNormal);
            n * std
        });
        let bound = 1.0 / ((in_ch * 4) as f64).sqrt();
        let b = Array1::from_shape_fn(out_ch, |_| rng.gen_range(-bound..bound));
        ConvTranspose2d {
            w: ps.register(format!("{name}.w"), w.into_dyn()),
            b: ps.register(format!("{name}.b"), b.into_dyn()),
            in_ch,
            out_ch,
        }
    }

    /// `x` is (in_ch, H, W); output is (out_ch, 2H, 2W).
    pub fn forward(&self, ps: &ParamStore, x: &Array3<f64>) -> Array3<f64> {
        let (ci, h, w) = x.dim();
        debug_assert_eq!(ci, self.in_ch);
        let x_mat = x.view().into_shape_with_order((ci, h * w)).expect("contiguous input");
        let wv = ps.value(self.w).view().into_dimensionality::<Ix4>().unwrap();
        let w_mat = wv.to_shape((ci, self.out_ch * 4)).expect("contiguous weights");
        // (out_ch*4, H*W): rows ordered (o, a, b)
        let y_cols = w_mat.t().dot(&x_mat);
        let b = ps.value(self.b).view().into_dimensionality::<Ix1>().unwrap();

        let mut y = Array3::zeros((self.out_ch, 2 * h, 2 * w));
        for o in 0..self.out_ch {
            let bias = b[o];
            for a in 0..2 {
                for bb in 0..2 {
                    let row = y_cols.row(o * 4 + a * 2 + bb);
                    let src = row.as_slice().expect("row contiguous");
                    for i in 0..h {
                        for j in 0..w {
                            y[[o, 2 * i + a, 2 * j + bb]] = src[i * w + j] + bias;
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        x: &Array3<f64>,
        dy: &Array3<f64>,
        grads: Option<&mut GradBuffer>,
    ) -> Array3<f64> {
        let (ci, h, w) = x.dim();
        let (co, hy, wy) = dy.dim();
        debug_assert_eq!((co, hy, wy), (self.out_ch, 2 * h, 2 * w));

        // Gather dy into the (o, a, b) x (i, j) column layout of forward.
        let mut dy_cols = Array2::zeros((co * 4, h * w));
        for o in 0..co {
            for a in 0..2 {
                for bb in 0..2 {
                    let mut row = dy_cols.row_mut(o * 4 + a * 2 + bb);
                    let dst = row.as_slice_mut().expect("row contiguous");
                    for i in 0..h {
                        for j in 0..w {
                            dst[i * w + j] = dy[[o, 2 * i + a, 2 * j + bb]];
                        }
                    }
                }
            }
        }

        let x_mat = x.view().into_shape_with_order((ci, h * w)).expect("contiguous input");
        if let Some(gb) = grads {
            let dw = x_mat.dot(&dy_cols.t()); // (ci, co*4)
            gb.add_to(
                self.w,
                &dw.into_shape_with_order((ci, co, 2, 2)).unwrap().into_dyn(),
            );
            let db = dy.sum_axis(Axis(2)).sum_axis(Axis(1));
            gb.add_to(self.b, &db.into_dyn());
        }

        let wv = ps.value(self.w).view().into_dimensionality::<Ix4>().unwrap();
        let w_mat = wv.to_shape((ci, self.out_ch * 4)).expect("contiguous weights");
        let dx = w_mat.dot(&dy_cols); // (ci, H*W)
        dx.into_shape_with_order((ci, h, w)).unwrap()
    }
}

/// Lowers (C, H, W) to a (C*k*k, H'*W') column matrix.
fn im2col(x: &Array3<f64>, k: usize, stride: usize, pad: usize) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut cols = Array2::zeros((c * k * k, ho * wo));
    let xs = x.as_slice().expect("contiguous input");
    for ci in 0..c {
        let plane = &xs[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let mut row = cols.row_mut(ci * k * k + ki * k + kj);
                let dst = row.as_slice_mut().expect("row contiguous");
                for oi in 0..ho {
                    let si = (oi * stride + ki) as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let base = si as usize * w;
                    for oj in 0..wo {
                        let sj = (oj * stride + kj) as isize - pad as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        dst[oi * wo + oj] = plane[base + sj as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back onto the input grid.
fn col2im(
    cols: &Array2<f64>,
    shape: (usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
) -> Array3<f64> {
    let (c, h, w) = shape;
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut x = Array3::zeros((c, h, w));
    let xs = x.as_slice_mut().expect("contiguous output");
    for ci in 0..c {
        let plane = &mut xs[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = cols.row(ci * k * k + ki * k + kj);
                let src = row.as_slice().expect("row contiguous");
                for oi in 0..ho {
                    let si = (oi * stride + ki) as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let base = si as usize * w;
                    for oj in 0..wo {
                        let sj = (oj * stride + kj) as isize - pad as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        plane[base + sj as usize] += src[oi * wo + oj];
                    }
                }
            }
        }
    }
    x
}
