//! Image and mask file IO.
//!
//! Pixels are stored 8-bit on disk and converted to reals in [0, 1] at
//! load. Masks hold exactly {0, 255}, 255 meaning lesion.

use std::path::Path;

use image::{GrayImage, RgbImage};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

pub fn load_image_rgb(path: &Path) -> Result<Array3<f64>> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
        f64::from(img.get_pixel(x as u32, y as u32)[c]) / 255.0
    }))
}

pub fn save_image_rgb(path: &Path, image: &Array3<f64>) -> Result<()> {
    let (h, w, c) = image.dim();
    if c != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 channels, got {c}")));
    }
    let mut out = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                quantize(image[[y, x, 0]]),
                quantize(image[[y, x, 1]]),
                quantize(image[[y, x, 2]]),
            ];
            out.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    out.save(path).map_err(|e| Error::image(path, e))
}

pub fn load_mask(path: &Path) -> Result<Array2<u8>> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?.to_luma8();
    let (w, h) = img.dimensions();
    let mut mask = Array2::zeros((h as usize, w as usize));
    for y in 0..h {
        for x in 0..w {
            let v = img.get_pixel(x, y)[0];
            mask[[y as usize, x as usize]] = match v {
                0 => 0,
                255 => 1,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: mask pixel ({x},{y}) = {other}, expected 0 or 255",
                        path.display()
                    )))
                }
            };
        }
    }
    Ok(mask)
}

pub fn save_mask(path: &Path, mask: &Array2<u8>) -> Result<()> {
    let (h, w) = mask.dim();
    let mut out = GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v = mask[[y, x]];
            debug_assert!(v <= 1);
            out.put_pixel(x as u32, y as u32, image::Luma([v * 255]));
        }
    }
    out.save(path).map_err(|e| Error::image(path, e))
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.png");
        let img = Array3::from_shape_fn((5, 7, 3), |(y, x, c)| {
            ((y * 31 + x * 7 + c * 3) % 256) as f64 / 255.0
        });
        save_image_rgb(&path, &img).unwrap();
        let back = load_image_rgb(&path).unwrap();
        assert_eq!(back.dim(), (5, 7, 3));
        for (a, b) in img.iter().zip(back.iter()) {
            assert!((a - b).abs() < 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn mask_rejects_gray_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mut img = GrayImage::new(2, 2);
        img.put_pixel(0, 0, image::Luma([128]));
        img.save(&path).unwrap();
        assert!(load_mask(&path).is_err());
    }

    #[test]
    fn mask_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mut mask = Array2::zeros((3, 3));
        mask[[0, 2]] = 1;
        mask[[2, 1]] = 1;
        save_mask(&path, &mask).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }
}
