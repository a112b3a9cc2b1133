//! Pair-preserving geometric transforms and the baseline augmentation.

use ndarray::{s, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ImageSample;
use crate::error::{Error, Result};

/// Resamples a pair to a new size: bilinear for the image, nearest-neighbor
/// for the mask so binarity is preserved. Identity resizes are bit-exact.
pub fn resize_pair(sample: &ImageSample, size: (usize, usize)) -> Result<ImageSample> {
    let (th, tw) = size;
    if th == 0 || tw == 0 {
        return Err(Error::InvalidArgument(format!("non-positive target size {th}x{tw}")));
    }
    let (sh, sw) = sample.mask.dim();
    let scale_y = sh as f64 / th as f64;
    let scale_x = sw as f64 / tw as f64;

    let mut image = Array3::zeros((th, tw, 3));
    for ty in 0..th {
        let (y0, y1, fy) = bilinear_coords(ty, scale_y, sh);
        for tx in 0..tw {
            let (x0, x1, fx) = bilinear_coords(tx, scale_x, sw);
            for c in 0..3 {
                let v00 = sample.image[[y0, x0, c]];
                let v01 = sample.image[[y0, x1, c]];
                let v10 = sample.image[[y1, x0, c]];
                let v11 = sample.image[[y1, x1, c]];
                let top = v00 * (1.0 - fx) + v01 * fx;
                let bottom = v10 * (1.0 - fx) + v11 * fx;
                image[[ty, tx, c]] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }

    let mut mask = Array2::zeros((th, tw));
    for ty in 0..th {
        let sy = nearest_coord(ty, scale_y, sh);
        for tx in 0..tw {
            let sx = nearest_coord(tx, scale_x, sw);
            mask[[ty, tx]] = sample.mask[[sy, sx]];
        }
    }

    Ok(ImageSample {
        id: sample.id.clone(),
        image,
        mask,
        origin: sample.origin,
        difficulty: sample.difficulty,
    })
}

/// Pixel-center convention: source coordinate (t + 0.5) * scale - 0.5.
fn bilinear_coords(t: usize, scale: f64, src_len: usize) -> (usize, usize, f64) {
    let pos = ((t as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - i0 as f64)
}

fn nearest_coord(t: usize, scale: f64, src_len: usize) -> usize {
    (((t as f64 + 0.5) * scale).floor() as usize).min(src_len - 1)
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Output size of the random crop; must not exceed the input size.
    pub crop: (usize, usize),
    /// Probability of a horizontal flip, and independently of a vertical one.
    pub flip_prob: f64,
    /// Color jitter amplitude: per-channel gain in [1-a, 1+a] plus a global
    /// brightness offset in [-a/2, a/2].
    pub jitter: f64,
}

/// Random crop + flips applied identically to image and mask, color jitter
/// applied to the image only. With crop = input size, flip_prob = 0 and
/// jitter = 0 this is the identity.
pub fn baseline_augment(
    sample: &ImageSample,
    rng: &mut ChaCha8Rng,
    config: &AugmentConfig,
) -> Result<ImageSample> {
    let (h, w) = sample.mask.dim();
    let (ch, cw) = config.crop;
    if ch > h || cw > w {
        return Err(Error::InvalidArgument(format!(
            "crop {ch}x{cw} exceeds input {h}x{w}"
        )));
    }

    let top = rng.gen_range(0..=h - ch);
    let left = rng.gen_range(0..=w - cw);
    let mut image = sample.image.slice(s![top..top + ch, left..left + cw, ..]).to_owned();
    let mut mask = sample.mask.slice(s![top..top + ch, left..left + cw]).to_owned();

    if rng.gen::<f64>() < config.flip_prob {
        image.invert_axis(ndarray::Axis(1));
        mask.invert_axis(ndarray::Axis(1));
    }
    if rng.gen::<f64>() < config.flip_prob {
        image.invert_axis(ndarray::Axis(0));
        mask.invert_axis(ndarray::Axis(0));
    }

    if config.jitter > 0.0 {
        let a = config.jitter;
        let gains = [
            1.0 + rng.gen_range(-a..=a),
            1.0 + rng.gen_range(-a..=a),
            1.0 + rng.gen_range(-a..=a),
        ];
        let offset = rng.gen_range(-a / 2.0..=a / 2.0);
        for ((_, _, c), v) in image.indexed_iter_mut() {
            *v = (*v * gains[c] + offset).clamp(0.0, 1.0);
        }
    }

    Ok(ImageSample {
        id: sample.id.clone(),
        image,
        mask,
        origin: sample.origin,
        difficulty: sample.difficulty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Difficulty, Origin};
    use crate::seeds::rng_from;

    fn sample_4x4() -> ImageSample {
        let image = Array3::from_shape_fn((4, 4, 3), |(y, x, c)| {
            (y as f64 * 0.2 + x as f64 * 0.05 + c as f64 * 0.01).min(1.0)
        });
        // Checkerboard: 1 where (y + x) even.
        let mask = Array2::from_shape_fn((4, 4), |(y, x)| u8::from((y + x) % 2 == 0));
        ImageSample {
            id: "t".into(),
            image,
            mask,
            origin: Origin::Real,
            difficulty: Difficulty::Unknown,
        }
    }

    #[test]
    fn identity_resize_is_bit_exact() {
        let s = sample_4x4();
        let r = resize_pair(&s, (4, 4)).unwrap();
        assert_eq!(r.mask, s.mask);
        assert_eq!(r.image, s.image);
    }

    #[test]
    fn resized_mask_stays_binary() {
        let s = sample_4x4();
        for size in [(2, 2), (3, 5), (8, 8), (1, 1)] {
            let r = resize_pair(&s, size).unwrap();
            assert!(r.mask.iter().all(|&v| v <= 1));
            assert_eq!(r.mask.dim(), size);
            assert!(r.image.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn checkerboard_downsample_hits_nearest_indices() {
        // 4 -> 2 with pixel centers: target 0 maps to floor(0.5 * 2) = 1,
        // target 1 maps to floor(1.5 * 2) = 3. The checkerboard values at
        // source rows/cols {1, 3} are m[1][1]=1, m[1][3]=1, m[3][1]=1,
        // m[3][3]=1, so the 2x2 result is all ones.
        let s = sample_4x4();
        let r = resize_pair(&s, (2, 2)).unwrap();
        assert_eq!(r.mask, Array2::from_elem((2, 2), 1));
    }

    #[test]
    fn resize_rejects_zero_size() {
        let s = sample_4x4();
        assert!(resize_pair(&s, (0, 4)).is_err());
    }

    #[test]
    fn augment_identity_config_is_identity() {
        let s = sample_4x4();
        let cfg = AugmentConfig { crop: (4, 4), flip_prob: 0.0, jitter: 0.0 };
        let out = baseline_augment(&s, &mut rng_from(5), &cfg).unwrap();
        assert_eq!(out.image, s.image);
        assert_eq!(out.mask, s.mask);
    }

    #[test]
    fn augment_output_matches_crop_size() {
        let s = sample_4x4();
        let cfg = AugmentConfig { crop: (2, 3), flip_prob: 0.5, jitter: 0.1 };
        for seed in 0..8 {
            let out = baseline_augment(&s, &mut rng_from(seed), &cfg).unwrap();
            assert_eq!(out.mask.dim(), (2, 3));
            assert_eq!(out.image.dim(), (2, 3, 3));
            assert!(out.mask.iter().all(|&v| v <= 1));
        }
    }

    #[test]
    fn flip_twice_restores_sample() {
        // flip_prob = 1 flips both axes every call; two calls undo it.
        let s = sample_4x4();
        let cfg = AugmentConfig { crop: (4, 4), flip_prob: 1.0, jitter: 0.0 };
        let once = baseline_augment(&s, &mut rng_from(1), &cfg).unwrap();
        assert_ne!(once.mask, s.mask);
        let twice = baseline_augment(&once, &mut rng_from(2), &cfg).unwrap();
        assert_eq!(twice.mask, s.mask);
        assert_eq!(twice.image, s.image);
    }

    #[test]
    fn geometric_transforms_keep_pairs_aligned() {
        // Mark one pixel in both image and mask; they must land together.
        let mut s = sample_4x4();
        s.mask.fill(0);
        s.mask[[0, 1]] = 1;
        for c in 0..3 {
            s.image[[0, 1, c]] = 1.0;
        }
        let cfg = AugmentConfig { crop: (4, 4), flip_prob: 1.0, jitter: 0.0 };
        let out = baseline_augment(&s, &mut rng_from(3), &cfg).unwrap();
        let (my, mx) = out
            .mask
            .indexed_iter()
            .find(|(_, &v)| v == 1)
            .map(|(idx, _)| idx)
            .unwrap();
        assert_eq!(out.image[[my, mx, 0]], 1.0);
    }

    #[test]
    fn augment_rejects_oversized_crop() {
        let s = sample_4x4();
        let cfg = AugmentConfig { crop: (5, 4), flip_prob: 0.0, jitter: 0.0 };
        assert!(baseline_augment(&s, &mut rng_from(0), &cfg).is_err());
    }
}
