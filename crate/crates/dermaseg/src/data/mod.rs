//! Dataset representation and loading.
//!
//! A manifest is a UTF-8 text file, one tab-separated record per line:
//! `id  image_path  mask_path  split  origin  difficulty`, with `#` comment
//! lines ignored. Paths resolve relative to the manifest's directory. Masks
//! on disk are single-channel images with values {0, 255} (255 = lesion);
//! images are 3-channel. In memory, images are (H, W, 3) reals in [0, 1]
//! and masks are (H, W) arrays over {0, 1}.

mod io;
mod synth;
mod transform;

pub use io::{load_image_rgb, load_mask, save_image_rgb, save_mask};
pub use synth::gen_synthetic_corpus;
pub use transform::{baseline_augment, resize_pair, AugmentConfig};

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeds::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    TrainVal,
    TestVal,
    Unsplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Real,
    SyntheticSimple,
    SyntheticComplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Unknown,
    Simple,
    Complex,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:path => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $($variant => $text),+ };
                f.write_str(s)
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    )),
                }
            }
        }
    };
}

str_enum!(Split {
    Split::Train => "train",
    Split::TrainVal => "train-val",
    Split::TestVal => "test-val",
    Split::Unsplit => "unsplit",
});

str_enum!(Origin {
    Origin::Real => "real",
    Origin::SyntheticSimple => "synthetic-simple",
    Origin::SyntheticComplex => "synthetic-complex",
});

str_enum!(Difficulty {
    Difficulty::Unknown => "unknown",
    Difficulty::Simple => "simple",
    Difficulty::Complex => "complex",
});

/// One manifest line: an image/mask pair by reference to stored files.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub id: String,
    pub image_path: String,
    pub mask_path: String,
    pub split: Split,
    pub origin: Origin,
    pub difficulty: Difficulty,
}

impl SampleRecord {
    /// Decodes the referenced files into a validated [`ImageSample`].
    pub fn load(&self, root: &Path) -> Result<ImageSample> {
        let image = load_image_rgb(&root.join(&self.image_path))?;
        let mask = load_mask(&root.join(&self.mask_path))?;
        let sample = ImageSample {
            id: self.id.clone(),
            image,
            mask,
            origin: self.origin,
            difficulty: self.difficulty,
        };
        sample.validate()?;
        Ok(sample)
    }
}

/// A loaded image/mask pair.
#[derive(Debug, Clone)]
pub struct ImageSample {
    pub id: String,
    /// (H, W, 3), values in [0, 1].
    pub image: Array3<f64>,
    /// (H, W), values in {0, 1}.
    pub mask: Array2<u8>,
    pub origin: Origin,
    pub difficulty: Difficulty,
}

impl ImageSample {
    pub fn height(&self) -> usize {
        self.mask.dim().0
    }

    pub fn width(&self) -> usize {
        self.mask.dim().1
    }

    pub fn validate(&self) -> Result<()> {
        let (ih, iw, ic) = self.image.dim();
        let (mh, mw) = self.mask.dim();
        if (ih, iw) != (mh, mw) || ic != 3 {
            return Err(Error::ShapeMismatch(format!(
                "sample {:?}: image {}x{}x{} vs mask {}x{}",
                self.id, ih, iw, ic, mh, mw
            )));
        }
        if self.mask.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "sample {:?}: mask contains values outside {{0,1}}",
                self.id
            )));
        }
        if self.image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(format!(
                "sample {:?}: image values outside [0,1]",
                self.id
            )));
        }
        Ok(())
    }
}

/// Ordered collection of sample records plus provenance.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub samples: Vec<SampleRecord>,
    /// Seed used for any stochastic construction of this manifest.
    pub seed: u64,
    /// Directory record paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|r| r.id.as_str())
    }

    /// Parses and fully validates a manifest: unique ids, referenced files
    /// present and decoding to valid samples.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let mut samples = Vec::new();
        let mut seen = HashSet::new();
        let mut seed = 0u64;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                // Provenance comment written by `save`.
                if let Some(s) = comment.trim().strip_prefix("seed=") {
                    seed = s.trim().parse().unwrap_or(0);
                }
                continue;
            }
            let record = parse_record(line).map_err(|msg| Error::Manifest {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg,
            })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            samples.push(record);
        }

        let manifest = DatasetManifest { samples, seed, root };
        // Decode every referenced pair; report the first failure in record
        // order.
        let results: Vec<Result<()>> = manifest
            .samples
            .par_iter()
            .map(|r| r.load(&manifest.root).map(drop))
            .collect();
        for res in results {
            res?;
        }
        Ok(manifest)
    }

    /// Writes the tab-separated manifest, recording the seed as a comment.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("# id\timage_path\tmask_path\tsplit\torigin\tdifficulty\n");
        out.push_str(&format!("# seed={}\n", self.seed));
        for r in &self.samples {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.id, r.image_path, r.mask_path, r.split, r.origin, r.difficulty
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Loads every sample into memory, optionally resizing pairs to a
    /// working resolution.
    pub fn load_samples(&self, resize_to: Option<(usize, usize)>) -> Result<Vec<ImageSample>> {
        let results: Vec<Result<ImageSample>> = self
            .samples
            .par_iter()
            .map(|r| {
                let sample = r.load(&self.root)?;
                match resize_to {
                    Some(size) if (sample.height(), sample.width()) != size => {
                        resize_pair(&sample, size)
                    }
                    _ => Ok(sample),
                }
            })
            .collect();
        results.into_iter().collect()
    }
}

fn parse_record(line: &str) -> std::result::Result<SampleRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 tab-separated fields, got {}", fields.len()));
    }
    if fields[0].is_empty() {
        return Err("empty id".into());
    }
    Ok(SampleRecord {
        id: fields[0].to_string(),
        image_path: fields[1].to_string(),
        mask_path: fields[2].to_string(),
        split: fields[3].parse()?,
        origin: fields[4].parse()?,
        difficulty: fields[5].parse()?,
    })
}

/// Uniform seeded split into (train, validation) with exactly `n_val`
/// validation samples. Record order is preserved within each side.
pub fn split_train_val(
    manifest: &DatasetManifest,
    n_val: usize,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if n_val > manifest.len() {
        return Err(Error::InvalidArgument(format!(
            "n_val {} exceeds manifest size {}",
            n_val,
            manifest.len()
        )));
    }
    let mut indices: Vec<usize> = (0..manifest.len()).collect();
    indices.shuffle(&mut rng_from(seed));
    let val_set: HashSet<usize> = indices[..n_val].iter().copied().collect();

    let mut train = Vec::with_capacity(manifest.len() - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (i, r) in manifest.samples.iter().enumerate() {
        let mut r = r.clone();
        if val_set.contains(&i) {
            r.split = Split::TrainVal;
            val.push(r);
        } else {
            r.split = Split::Train;
            train.push(r);
        }
    }
    Ok((
        DatasetManifest { samples: train, seed, root: manifest.root.clone() },
        DatasetManifest { samples: val, seed, root: manifest.root.clone() },
    ))
}
