//! Skip-connected encoder-decoder backbone.
//!
//! One stem convolution, `depth` stride-2 encoder stages doubling channels,
//! a symmetric decoder of 2x2/stride-2 transposed convolutions with skip
//! concatenation, and a 1x1 head emitting logits. The caller applies the
//! output squashing, so the same backbone serves the segmenter (1 channel)
//! and the generator (3 channels).

use ndarray::{s, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::{Conv2d, ConvTranspose2d};
use super::params::{GradBuffer, ParamStore};
use super::{relu, relu_backward};

#[derive(Debug, Clone)]
pub struct UNet {
    pub stem: Conv2d,
    pub down: Vec<Conv2d>,
    pub up: Vec<UpBlock>,
    pub head: Conv2d,
    pub depth: usize,
    /// Inverted-dropout rate applied to decoder outputs; 0 disables.
    pub dropout_rate: f64,
}

#[derive(Debug, Clone)]
pub struct UpBlock {
    pub upsample: ConvTranspose2d,
    pub fuse: Conv2d,
}

/// Forward activations retained for the backward pass.
pub struct UNetCache {
    x: Array3<f64>,
    /// Post-ReLU encoder activations, `acts[0]` = stem output,
    /// `acts[depth]` = bottleneck.
    acts: Vec<Array3<f64>>,
    ups: Vec<UpStageCache>,
}

struct UpStageCache {
    input: Array3<f64>,
    t: Array3<f64>,
    concat: Array3<f64>,
    /// Post-ReLU, post-dropout stage output.
    out: Array3<f64>,
    dropout_mask: Option<Array3<f64>>,
}

impl UNet {
    pub fn new(
        ps: &mut ParamStore,
        prefix: &str,
        in_ch: usize,
        out_ch: usize,
        base_channels: usize,
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let stem = Conv2d::new(ps, &format!("{prefix}.stem"), in_ch, base_channels, 3, 1, 1, rng);
        let mut down = Vec::with_capacity(depth);
        for i in 0..depth {
            let c = base_channels << i;
            down.push(Conv2d::new(ps, &format!("{prefix}.down{i}"), c, 2 * c, 3, 2, 1, rng));
        }
        let mut up = Vec::with_capacity(depth);
        for s in 0..depth {
            let c = base_channels << (depth - s);
            let upsample =
                ConvTranspose2d::new(ps, &format!("{prefix}.up{s}.upsample"), c, c / 2, rng);
            let fuse = Conv2d::new(ps, &format!("{prefix}.up{s}.fuse"), c, c / 2, 3, 1, 1, rng);
            up.push(UpBlock { upsample, fuse });
        }
        let head = Conv2d::new(ps, &format!("{prefix}.head"), base_channels, out_ch, 1, 1, 0, rng);
        UNet { stem, down, up, head, depth, dropout_rate: 0.0 }
    }

    /// True when `depth` stride-2 stages divide the resolution evenly.
    pub fn resolution_ok(height: usize, width: usize, depth: usize) -> bool {
        let f = 1usize << depth;
        height % f == 0 && width % f == 0 && height / f >= 1 && width / f >= 1
    }

    /// Runs the network on a (in_ch, H, W) input, returning (out_ch, H, W)
    /// logits plus the cache for [`UNet::backward`]. `dropout_rng` must be
    /// `Some` for stochastic decoder dropout to take effect.
    pub fn forward(
        &self,
        ps: &ParamStore,
        x: &Array3<f64>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> (Array3<f64>, UNetCache) {
        let (_, h, w) = x.dim();
        assert!(
            Self::resolution_ok(h, w, self.depth),
            "input {h}x{w} not divisible by 2^{}",
            self.depth
        );
        let mut acts = Vec::with_capacity(self.depth + 1);
        acts.push(relu(&self.stem.forward(ps, x)));
        for i in 0..self.depth {
            let a = relu(&self.down[i].forward(ps, &acts[i]));
            acts.push(a);
        }

        let mut u = acts[self.depth].clone();
        let mut ups = Vec::with_capacity(self.depth);
        for (stage, block) in self.up.iter().enumerate() {
            let skip = &acts[self.depth - 1 - stage];
            let input = u;
            let t = relu(&block.upsample.forward(ps, &input));
            let concat = ndarray::concatenate(Axis(0), &[t.view(), skip.view()])
                .expect("matched skip resolution");
            let mut out = relu(&block.fuse.forward(ps, &concat));
            let dropout_mask = match dropout_rng.as_deref_mut() {
                Some(rng) if self.dropout_rate > 0.0 => {
                    let keep = 1.0 - self.dropout_rate;
                    let mask = Array3::from_shape_fn(out.dim(), |_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out *= &mask;
                    Some(mask)
                }
                _ => None,
            };
            ups.push(UpStageCache { input, t, concat, out: out.clone(), dropout_mask });
            u = out;
        }

        let logits = self.head.forward(ps, &u);
        (logits, UNetCache { x: x.clone(), acts, ups })
    }

    /// Backpropagates `dlogits`, accumulating parameter gradients into
    /// `grads` (pass `None` for data-only), and returns the input gradient.
    pub fn backward(
        &self,
        ps: &ParamStore,
        cache: &UNetCache,
        dlogits: &Array3<f64>,
        mut grads: Option<&mut GradBuffer>,
    ) -> Array3<f64> {
        let head_input =
            cache.ups.last().map(|s| &s.out).unwrap_or(&cache.acts[self.depth]);
        let mut du = self.head.backward(ps, head_input, dlogits, grads.as_deref_mut());

        let mut skip_grads: Vec<Option<Array3<f64>>> = (0..self.depth).map(|_| None).collect();
        for stage in (0..self.up.len()).rev() {
            let st = &cache.ups[stage];
            let block = &self.up[stage];
            if let Some(mask) = &st.dropout_mask {
                du *= mask;
            }
            let dfuse = relu_backward(&st.out, &du);
            let dconcat = block.fuse.backward(ps, &st.concat, &dfuse, grads.as_deref_mut());
            let t_ch = block.upsample.out_ch;
            let dt = dconcat.slice(s![..t_ch, .., ..]).to_owned();
            let dskip = dconcat.slice(s![t_ch.., .., ..]).to_owned();
            skip_grads[self.depth - 1 - stage] = Some(dskip);
            let dt = relu_backward(&st.t, &dt);
            du = block.upsample.backward(ps, &st.input, &dt, grads.as_deref_mut());
        }

        let mut da = du; // gradient w.r.t. acts[depth]
        for i in (0..self.depth).rev() {
            let dz = relu_backward(&cache.acts[i + 1], &da);
            let mut dprev = self.down[i].backward(ps, &cache.acts[i], &dz, grads.as_deref_mut());
            if let Some(sg) = skip_grads[i].take() {
                dprev += &sg;
            }
            da = dprev;
        }
        let dz = relu_backward(&cache.acts[0], &da);
        self.stem.backward(ps, &cache.x, &dz, grads)
    }

    /// Spatial size of the deepest activation for an (H, W) input.
    pub fn bottleneck_size(&self, h: usize, w: usize) -> (usize, usize) {
        (h >> self.depth, w >> self.depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;

    fn build(depth: usize, base: usize, in_ch: usize, out_ch: usize, seed: u64) -> (ParamStore, UNet) {
        let mut ps = ParamStore::new();
        let mut rng = rng_from(seed);
        let net = UNet::new(&mut ps, "net", in_ch, out_ch, base, depth, &mut rng);
        (ps, net)
    }

    #[test]
    fn output_shape_matches_input_resolution() {
        let (ps, net) = build(2, 4, 3, 1, 0);
        let x = Array3::from_elem((3, 16, 16), 0.3);
        let (y, _) = net.forward(&ps, &x, None);
        assert_eq!(y.dim(), (1, 16, 16));
    }

    #[test]
    fn bottleneck_follows_stride_arithmetic() {
        // depth d halves the resolution d times: 16 / 2^3 = 2.
        let (ps, net) = build(3, 2, 3, 1, 1);
        assert_eq!(net.bottleneck_size(16, 16), (2, 2));
        let x = Array3::from_elem((3, 16, 16), 0.5);
        let (_, cache) = net.forward(&ps, &x, None);
        assert_eq!(cache.acts[3].dim(), (2 << 3, 2, 2));
    }

    #[test]
    fn equal_seeds_build_identical_parameters() {
        let (ps_a, _) = build(2, 4, 3, 1, 9);
        let (ps_b, _) = build(2, 4, 3, 1, 9);
        for ((na, va), (nb, vb)) in ps_a.iter().zip(ps_b.iter()) {
            assert_eq!(na, nb);
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn rejects_indivisible_resolution() {
        assert!(!UNet::resolution_ok(10, 10, 2));
        assert!(UNet::resolution_ok(12, 12, 2));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut ps, net) = build(1, 2, 2, 1, 4);
        let mut rng = rng_from(5);
        let x = Array3::from_shape_fn((2, 4, 4), |_| rng.gen::<f64>());

        // Loss: 0.5 * sum(logits^2).
        let (y, cache) = net.forward(&ps, &x, None);
        let mut gb = GradBuffer::zeros_like(&ps);
        net.backward(&ps, &cache, &y, Some(&mut gb));

        let h = 1e-5;
        for i in 0..ps.flat_len() {
            let orig = ps.get_flat(i);
            ps.set_flat(i, orig + h);
            let lp = 0.5 * net.forward(&ps, &x, None).0.iter().map(|v| v * v).sum::<f64>();
            ps.set_flat(i, orig - h);
            let lm = 0.5 * net.forward(&ps, &x, None).0.iter().map(|v| v * v).sum::<f64>();
            ps.set_flat(i, orig);
            let num = (lp - lm) / (2.0 * h);
            let ana = gb.get_flat(i);
            assert!(
                (num - ana).abs() / (num.abs() + ana.abs()).max(1e-8) < 1e-4,
                "param {i}: numeric {num}, analytic {ana}"
            );
        }
    }

    #[test]
    fn dropout_masks_are_seed_deterministic() {
        let (ps, mut net) = build(1, 2, 1, 1, 6);
        net.dropout_rate = 0.5;
        let x = Array3::from_elem((1, 4, 4), 0.7);
        let (a, _) = net.forward(&ps, &x, Some(&mut rng_from(33)));
        let (b, _) = net.forward(&ps, &x, Some(&mut rng_from(33)));
        let (c, _) = net.forward(&ps, &x, Some(&mut rng_from(34)));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
