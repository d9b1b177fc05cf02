//! Dataset ingestion, preprocessing and augmentation.
//!
//! Handles the two on-disk formats (IDX and CIFAR-10 binary batches), the
//! mean-centering / zero-padding pipeline, deterministic nested subsampling,
//! and per-sample augmentation. Pixel bytes are decoded to `[0, 1]` by
//! division by 255; mean subtraction happens on top of that and no variance
//! rescaling is ever applied, so a perturbation budget of 36/255 keeps its
//! meaning.

use crate::numerics::{Matrix, RandomSource};
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic number: expected {expected:#010x}, got {got:#010x}")]
    MagicMismatch { expected: u32, got: u32 },
    #[error("truncated stream: needed {needed} more bytes for {what}")]
    Truncated { what: &'static str, needed: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("CIFAR batch length {0} is not a multiple of 3073")]
    BadRecordLength(usize),
    #[error("CIFAR label byte {0} out of range (must be < 10)")]
    BadLabel(u8),
    #[error("dataset is empty")]
    Empty,
    #[error("image shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("subsample size {n} out of range 1..={max}")]
    SubsampleOutOfRange { n: usize, max: usize },
    #[error("label {label} outside class range {classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid augmentation config: {0}")]
    BadAugmentConfig(String),
    #[error("cache format error: {0}")]
    BadCache(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Flat feature matrix with integer labels and image-shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// (channels, height, width); `channels*height*width == features.cols()`
    /// whenever the data is image-backed.
    pub image_shape: (usize, usize, usize),
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        image_shape: (usize, usize, usize),
        class_count: usize,
    ) -> Result<Self, DataError> {
        if features.rows() == 0 {
            return Err(DataError::Empty);
        }
        if features.rows() != labels.len() {
            return Err(DataError::CountMismatch { images: features.rows(), labels: labels.len() });
        }
        for &l in &labels {
            if l >= class_count {
                return Err(DataError::LabelOutOfRange { label: l, classes: class_count });
            }
        }
        Ok(Self { features, labels, image_shape, class_count })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.features.row(i), self.labels[i])
    }

    /// Widens the declared class count (e.g. to 10 for a digit subset whose
    /// largest label happens to be smaller).
    pub fn with_class_count(mut self, class_count: usize) -> Result<Self, DataError> {
        if let Some(&max) = self.labels.iter().max() {
            if max >= class_count {
                return Err(DataError::LabelOutOfRange { label: max, classes: class_count });
            }
        }
        self.class_count = class_count;
        Ok(self)
    }
}

fn read_u32_be(bytes: &[u8], pos: &mut usize, what: &'static str) -> Result<u32, DataError> {
    if bytes.len() < *pos + 4 {
        return Err(DataError::Truncated { what, needed: *pos + 4 - bytes.len() });
    }
    let v = u32::from_be_bytes([bytes[*pos], bytes[*pos + 1], bytes[*pos + 2], bytes[*pos + 3]]);
    *pos += 4;
    Ok(v)
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Parses an IDX image/label pair (the MNIST container format).
///
/// Pixels are scaled to `[0, 1]`; the class count is taken as
/// `max label + 1` (use [`LabeledDataset::with_class_count`] to widen).
pub fn load_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset, DataError> {
    if image_bytes.starts_with(&[0x1f, 0x8b]) || label_bytes.starts_with(&[0x1f, 0x8b]) {
        return Err(DataError::BadCache(
            "input looks gzip-compressed; decompress the IDX files first".into(),
        ));
    }
    let mut pos = 0usize;
    let magic = read_u32_be(image_bytes, &mut pos, "image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::MagicMismatch { expected: IDX_IMAGE_MAGIC, got: magic });
    }
    let n = read_u32_be(image_bytes, &mut pos, "image count")? as usize;
    let rows = read_u32_be(image_bytes, &mut pos, "image rows")? as usize;
    let cols = read_u32_be(image_bytes, &mut pos, "image cols")? as usize;
    let pixel_count = n * rows * cols;
    if image_bytes.len() < pos + pixel_count {
        return Err(DataError::Truncated {
            what: "image pixels",
            needed: pos + pixel_count - image_bytes.len(),
        });
    }

    let mut lpos = 0usize;
    let lmagic = read_u32_be(label_bytes, &mut lpos, "label magic")?;
    if lmagic != IDX_LABEL_MAGIC {
        return Err(DataError::MagicMismatch { expected: IDX_LABEL_MAGIC, got: lmagic });
    }
    let ln = read_u32_be(label_bytes, &mut lpos, "label count")? as usize;
    if ln != n {
        return Err(DataError::CountMismatch { images: n, labels: ln });
    }
    if label_bytes.len() < lpos + ln {
        return Err(DataError::Truncated { what: "labels", needed: lpos + ln - label_bytes.len() });
    }
    if n == 0 {
        return Err(DataError::Empty);
    }

    let features: Vec<f64> = image_bytes[pos..pos + pixel_count]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = label_bytes[lpos..lpos + ln].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().unwrap() + 1;
    LabeledDataset::new(
        Matrix::from_vec(n, rows * cols, features).expect("counts checked above"),
        labels,
        (1, rows, cols),
        class_count,
    )
}

const CIFAR_RECORD: usize = 3073;

/// Parses one or more CIFAR-10 binary batches (3073-byte records: one label
/// byte followed by the R, G, B planes).
pub fn load_cifar10_binary<'a, I>(batches: I) -> Result<LabeledDataset, DataError>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for batch in batches {
        if batch.len() % CIFAR_RECORD != 0 {
            return Err(DataError::BadRecordLength(batch.len()));
        }
        for record in batch.chunks_exact(CIFAR_RECORD) {
            let label = record[0];
            if label >= 10 {
                return Err(DataError::BadLabel(label));
            }
            labels.push(label as usize);
            features.extend(record[1..].iter().map(|&b| f64::from(b) / 255.0));
        }
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let n = labels.len();
    LabeledDataset::new(
        Matrix::from_vec(n, 3072, features).expect("record layout is fixed"),
        labels,
        (3, 32, 32),
        10,
    )
}

/// Output of [`preprocess_center`].
#[derive(Debug, Clone)]
pub struct Centered {
    pub train: LabeledDataset,
    pub applied: Vec<LabeledDataset>,
    /// One mean per channel, computed on the training set only.
    pub channel_means: Vec<f64>,
}

/// Subtracts the per-channel training mean from the training set and from
/// every dataset in `apply_to`. No variance rescaling.
pub fn preprocess_center(
    train: &LabeledDataset,
    apply_to: &[&LabeledDataset],
) -> Result<Centered, DataError> {
    let shape = train.image_shape;
    let (channels, h, w) = shape;
    let plane = h * w;
    if channels * plane != train.dim() {
        return Err(DataError::ShapeMismatch { expected: shape, got: (1, 1, train.dim()) });
    }
    for ds in apply_to {
        if ds.image_shape != shape {
            return Err(DataError::ShapeMismatch { expected: shape, got: ds.image_shape });
        }
    }

    let mut means = vec![0.0f64; channels];
    for i in 0..train.len() {
        let row = train.features.row(i);
        for (c, m) in means.iter_mut().enumerate() {
            *m += row[c * plane..(c + 1) * plane].iter().sum::<f64>();
        }
    }
    let denom = (train.len() * plane) as f64;
    for m in &mut means {
        *m /= denom;
    }

    let subtract = |ds: &LabeledDataset| {
        let mut out = ds.clone();
        for i in 0..out.len() {
            let row = out.features.row_mut(i);
            for (c, &m) in means.iter().enumerate() {
                for v in &mut row[c * plane..(c + 1) * plane] {
                    *v -= m;
                }
            }
        }
        out
    };

    Ok(Centered {
        train: subtract(train),
        applied: apply_to.iter().map(|ds| subtract(ds)).collect(),
        channel_means: means,
    })
}

/// Zero-pads 28x28 single-channel images to 32x32 with the original content
/// at offset (2, 2). Expects already-centered input.
pub fn pad_mnist_to_32(ds: &LabeledDataset) -> Result<LabeledDataset, DataError> {
    if ds.image_shape != (1, 28, 28) {
        return Err(DataError::ShapeMismatch { expected: (1, 28, 28), got: ds.image_shape });
    }
    let mut features = Matrix::zeros(ds.len(), 32 * 32);
    for i in 0..ds.len() {
        let src = ds.features.row(i);
        let dst = features.row_mut(i);
        for r in 0..28 {
            let drow = (r + 2) * 32 + 2;
            dst[drow..drow + 28].copy_from_slice(&src[r * 28..(r + 1) * 28]);
        }
    }
    LabeledDataset::new(features, ds.labels.clone(), (1, 32, 32), ds.class_count)
}

/// Uniform subsample of `n` points without replacement.
///
/// Implemented as the prefix of a seeded permutation, so for a fixed seed
/// `subsample(ds, m, s)` selects a subset of `subsample(ds, n, s)` whenever
/// `m <= n`; scaling curves then compare nested training sets.
pub fn subsample(ds: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset, DataError> {
    if n == 0 || n > ds.len() {
        return Err(DataError::SubsampleOutOfRange { n, max: ds.len() });
    }
    let idx = subsample_indices(ds.len(), n, seed);
    Ok(select(ds, &idx))
}

/// The index prefix used by [`subsample`]; exposed so harnesses can reuse
/// one permutation across curve points.
pub fn subsample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = RandomSource::new(seed).split("subsample");
    let mut perm = rng.permutation(total);
    perm.truncate(n);
    perm
}

/// Extracts the given rows into a new dataset.
pub fn select(ds: &LabeledDataset, indices: &[usize]) -> LabeledDataset {
    let mut features = Matrix::zeros(indices.len(), ds.dim());
    let mut labels = Vec::with_capacity(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        features.row_mut(row).copy_from_slice(ds.features.row(i));
        labels.push(ds.labels[i]);
    }
    LabeledDataset {
        features,
        labels,
        image_shape: ds.image_shape,
        class_count: ds.class_count,
    }
}

/// Augmentation switches: random crop after zero padding, horizontal flip,
/// and erasing a random patch to zero.
#[derive(Debug, Clone)]
pub struct AugmentConfig {
    pub crop_padding: usize,
    pub horizontal_flip: bool,
    /// Inclusive patch side-length range for random erasing; `None` disables.
    pub random_erase: Option<(usize, usize)>,
}

impl AugmentConfig {
    /// Everything off; `augment` becomes the identity map.
    pub fn none() -> Self {
        Self { crop_padding: 0, horizontal_flip: false, random_erase: None }
    }

    /// Crop-only default used for digits: padding 4, no flip, no erase.
    pub fn crop_only() -> Self {
        Self { crop_padding: 4, horizontal_flip: false, random_erase: None }
    }

    pub fn validate_for(&self, image_shape: (usize, usize, usize)) -> Result<(), DataError> {
        let (_, h, w) = image_shape;
        if let Some((lo, hi)) = self.random_erase {
            if lo == 0 || lo > hi {
                return Err(DataError::BadAugmentConfig(format!(
                    "erase patch range {lo}..={hi} is empty"
                )));
            }
            if hi > h || hi > w {
                return Err(DataError::BadAugmentConfig(format!(
                    "erase patch {hi} does not fit inside {h}x{w}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.crop_padding == 0 && !self.horizontal_flip && self.random_erase.is_none()
    }
}

/// Zero-pad by `padding` on every side, then take the window of the original
/// size whose top-left corner sits at `(dy, dx)` in the padded image.
/// `(padding, padding)` reproduces the input exactly.
pub fn crop_with_offset(
    x: &[f64],
    shape: (usize, usize, usize),
    padding: usize,
    dy: usize,
    dx: usize,
) -> Vec<f64> {
    let (channels, h, w) = shape;
    debug_assert!(dy <= 2 * padding && dx <= 2 * padding);
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for r in 0..h {
            // source row in original coordinates: r + dy - padding
            let src_r = r as isize + dy as isize - padding as isize;
            if src_r < 0 || src_r >= h as isize {
                continue;
            }
            for col in 0..w {
                let src_c = col as isize + dx as isize - padding as isize;
                if src_c < 0 || src_c >= w as isize {
                    continue;
                }
                out[c * h * w + r * w + col] = x[c * h * w + src_r as usize * w + src_c as usize];
            }
        }
    }
    out
}

/// Mirrors an image along its width.
pub fn flip_horizontal(x: &[f64], shape: (usize, usize, usize)) -> Vec<f64> {
    let (channels, h, w) = shape;
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for r in 0..h {
            for col in 0..w {
                out[c * h * w + r * w + col] = x[c * h * w + r * w + (w - 1 - col)];
            }
        }
    }
    out
}

/// Applies the configured augmentations to one image. Pure given the rng
/// sub-stream; shape and label are never changed.
pub fn augment(
    x: &[f64],
    shape: (usize, usize, usize),
    cfg: &AugmentConfig,
    rng: &mut RandomSource,
) -> Vec<f64> {
    let (channels, h, w) = shape;
    debug_assert_eq!(x.len(), channels * h * w);
    let mut img = x.to_vec();
    if cfg.crop_padding > 0 {
        let dy = rng.below(2 * cfg.crop_padding as u64 + 1) as usize;
        let dx = rng.below(2 * cfg.crop_padding as u64 + 1) as usize;
        img = crop_with_offset(&img, shape, cfg.crop_padding, dy, dx);
    }
    if cfg.horizontal_flip && rng.coin() {
        img = flip_horizontal(&img, shape);
    }
    if let Some((lo, hi)) = cfg.random_erase {
        let hi = hi.min(h).min(w);
        let lo = lo.min(hi);
        let side = (lo as u64 + rng.below((hi - lo) as u64 + 1)) as usize;
        let top = rng.below((h - side) as u64 + 1) as usize;
        let left = rng.below((w - side) as u64 + 1) as usize;
        for c in 0..channels {
            for r in top..top + side {
                for col in left..left + side {
                    img[c * h * w + r * w + col] = 0.0;
                }
            }
        }
    }
    img
}

const CACHE_MAGIC: &[u8; 5] = b"LBDS1";

/// Serializes a dataset to the internal cache format: magic "LBDS1", then
/// n/c/h/w/K as little-endian u64, the feature block as little-endian f64,
/// and the label block as little-endian u64.
pub fn write_cache(ds: &LabeledDataset) -> Vec<u8> {
    let (c, h, w) = ds.image_shape;
    let mut out = Vec::with_capacity(5 + 5 * 8 + ds.features.data().len() * 8 + ds.len() * 8);
    out.extend_from_slice(CACHE_MAGIC);
    for v in [ds.len() as u64, c as u64, h as u64, w as u64, ds.class_count as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &f in ds.features.data() {
        out.extend_from_slice(&f.to_le_bytes());
    }
    for &l in &ds.labels {
        out.extend_from_slice(&(l as u64).to_le_bytes());
    }
    out
}

/// Reads a dataset back from the cache format. Bit-exact round trip.
pub fn read_cache(mut bytes: &[u8]) -> Result<LabeledDataset, DataError> {
    let mut magic = [0u8; 5];
    bytes.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(DataError::BadCache("bad magic".into()));
    }
    let mut u64_buf = [0u8; 8];
    let mut next_u64 = |bytes: &mut &[u8]| -> Result<u64, DataError> {
        bytes.read_exact(&mut u64_buf)?;
        Ok(u64::from_le_bytes(u64_buf))
    };
    let n = next_u64(&mut bytes)? as usize;
    let c = next_u64(&mut bytes)? as usize;
    let h = next_u64(&mut bytes)? as usize;
    let w = next_u64(&mut bytes)? as usize;
    let k = next_u64(&mut bytes)? as usize;
    let dim = c * h * w;
    let mut features = Vec::with_capacity(n * dim);
    let mut f64_buf = [0u8; 8];
    for _ in 0..n * dim {
        bytes.read_exact(&mut f64_buf)?;
        features.push(f64::from_le_bytes(f64_buf));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        bytes.read_exact(&mut u64_buf)?;
        labels.push(u64::from_le_bytes(u64_buf) as usize);
    }
    LabeledDataset::new(
        Matrix::from_vec(n, dim, features).map_err(|e| DataError::BadCache(e.to_string()))?,
        labels,
        (c, h, w),
        k,
    )
}
