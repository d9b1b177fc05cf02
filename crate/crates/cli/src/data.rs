//! Dataset resolution for the experiment commands.
//!
//! `--data` accepts `mnist` (centered 28x28), `mnist32` (centered then
//! zero-padded to 32x32), `cifar10` (centered), `toy` (a built-in synthetic
//! two-class problem that needs no files), or `cache:PATH` pairs written by
//! `pca --emit`. File roots resolve from `--data-root`, then the
//! LIPBENCH_DATA environment variable, then `./data`.

use crate::config::{usage, CliError};
use lipbench::datasets::{
    load_cifar10_binary, load_idx, pad_mnist_to_32, preprocess_center, read_cache, LabeledDataset,
};
use lipbench::numerics::{Matrix, RandomSource};
use std::path::{Path, PathBuf};

pub struct TrainTest {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Channel means subtracted during preprocessing (empty for toy/cache).
    pub channel_means: Vec<f64>,
}

pub fn data_root(flag_value: &str) -> PathBuf {
    if !flag_value.is_empty() {
        return PathBuf::from(flag_value);
    }
    if let Ok(env_root) = std::env::var("LIPBENCH_DATA") {
        if !env_root.is_empty() {
            return PathBuf::from(env_root);
        }
    }
    PathBuf::from("data")
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_mnist_raw(root: &Path) -> Result<(LabeledDataset, LabeledDataset), CliError> {
    let train = load_idx(
        &read_file(&root.join("train-images-idx3-ubyte"))?,
        &read_file(&root.join("train-labels-idx1-ubyte"))?,
    )
    .map_err(usage)?
    .with_class_count(10)
    .map_err(usage)?;
    let test = load_idx(
        &read_file(&root.join("t10k-images-idx3-ubyte"))?,
        &read_file(&root.join("t10k-labels-idx1-ubyte"))?,
    )
    .map_err(usage)?
    .with_class_count(10)
    .map_err(usage)?;
    Ok((train, test))
}

fn load_cifar10(root: &Path) -> Result<(LabeledDataset, LabeledDataset), CliError> {
    let dir = root.join("cifar-10-batches-bin");
    let mut batches = Vec::new();
    for i in 1..=5 {
        batches.push(read_file(&dir.join(format!("data_batch_{i}.bin")))?);
    }
    let train =
        load_cifar10_binary(batches.iter().map(Vec::as_slice)).map_err(usage)?;
    let test_bytes = read_file(&dir.join("test_batch.bin"))?;
    let test = load_cifar10_binary([test_bytes.as_slice()]).map_err(usage)?;
    Ok((train, test))
}

/// Built-in synthetic two-class image problem (8x8, fixed internal seed) so
/// every command can run without external files.
pub fn toy_dataset(n_train: usize, n_test: usize) -> TrainTest {
    let make = |n: usize, seed: u64| {
        let mut rng = RandomSource::new(seed);
        let dim = 64;
        let mut features = Matrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2;
            let sign = if label == 0 { -1.0 } else { 1.0 };
            let row = features.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                // class-dependent checkerboard plus noise strong enough
                // that small training sets do not saturate
                let pattern = if (j / 8 + j % 8) % 2 == 0 { 0.15 } else { -0.15 };
                *v = sign * pattern + 0.5 * rng.normal();
            }
            labels.push(label);
        }
        LabeledDataset::new(features, labels, (1, 8, 8), 2).unwrap()
    };
    TrainTest {
        train: make(n_train, 0xBEEF),
        test: make(n_test, 0xFEED),
        channel_means: Vec::new(),
    }
}

/// Loads and preprocesses the named dataset.
pub fn load_named(name: &str, root_flag: &str) -> Result<TrainTest, CliError> {
    let root = data_root(root_flag);
    match name {
        "toy" => Ok(toy_dataset(4096, 1024)),
        "mnist" | "mnist32" => {
            let (train, test) = load_mnist_raw(&root)?;
            let centered = preprocess_center(&train, &[&test]).map_err(usage)?;
            let (mut train, mut test) =
                (centered.train, centered.applied.into_iter().next().expect("one applied set"));
            if name == "mnist32" {
                train = pad_mnist_to_32(&train).map_err(usage)?;
                test = pad_mnist_to_32(&test).map_err(usage)?;
            }
            Ok(TrainTest { train, test, channel_means: centered.channel_means })
        }
        "cifar10" => {
            let (train, test) = load_cifar10(&root)?;
            let centered = preprocess_center(&train, &[&test]).map_err(usage)?;
            Ok(TrainTest {
                train: centered.train,
                test: centered.applied.into_iter().next().expect("one applied set"),
                channel_means: centered.channel_means,
            })
        }
        other => {
            if let Some(spec) = other.strip_prefix("cache:") {
                let (train_path, test_path) = spec.split_once(',').ok_or_else(|| {
                    usage("cache data spec must be cache:TRAIN_PATH,TEST_PATH")
                })?;
                let train = read_cache(&read_file(Path::new(train_path))?).map_err(usage)?;
                let test = read_cache(&read_file(Path::new(test_path))?).map_err(usage)?;
                Ok(TrainTest { train, test, channel_means: Vec::new() })
            } else {
                Err(usage(format!(
                    "unknown dataset {other:?}; expected toy, mnist, mnist32, cifar10 or cache:TRAIN,TEST"
                )))
            }
        }
    }
}
