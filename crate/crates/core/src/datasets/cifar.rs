//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! the R, G and B planes, each 32x32 row-major.

use std::path::Path;

use crate::qconv::ImageTensor;
use crate::rng::Rng;

use super::{bilinear_resize, DatasetError, DatasetPair, LabeledDataset, Sample, Split};

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * PLANE;
const OUT_SIDE: usize = 10;

/// Label byte -> class name.
pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

/// Order in which classes are added for the n-class tasks.
pub const CIFAR_CLASS_ORDER: [&str; 10] = [
    "frog",
    "ship",
    "automobile",
    "truck",
    "airplane",
    "bird",
    "cat",
    "horse",
    "dog",
    "deer",
];

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

fn read_records(path: &Path) -> Result<Vec<u8>, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(DatasetError::Format(format!(
            "{} is {} bytes, not a whole number of {CIFAR_RECORD_BYTES}-byte records",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes)
}

fn decode(record: &[u8]) -> ImageTensor {
    let planes = &record[1..];
    ImageTensor::from_fn(SIDE, SIDE, 3, |l, w, c| {
        planes[c * PLANE + l * SIDE + w] as f32 / 255.0
    })
    .expect("bytes scale into [0, 1]")
}

/// First `per_class` images of each wanted class, in file order.
fn select(
    files: &[&Path],
    classes: &[usize],
    per_class: usize,
) -> Result<Vec<Sample>, DatasetError> {
    let mut picked: Vec<Vec<ImageTensor>> = vec![Vec::new(); classes.len()];
    'files: for path in files {
        let bytes = read_records(path)?;
        for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
            let label = record[0] as usize;
            if label >= CIFAR10_CLASSES.len() {
                return Err(DatasetError::Format(format!(
                    "label byte {label} in {}",
                    path.display()
                )));
            }
            if let Some(k) = classes.iter().position(|&c| c == label) {
                if picked[k].len() < per_class {
                    picked[k].push(decode(record));
                }
            }
            if picked.iter().all(|p| p.len() == per_class) {
                break 'files;
            }
        }
    }
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for (k, imgs) in picked.into_iter().enumerate() {
        if imgs.len() < per_class {
            return Err(DatasetError::NotEnoughSamples {
                class: CIFAR10_CLASSES[classes[k]].to_string(),
                available: imgs.len(),
                requested: per_class,
            });
        }
        out.extend(imgs.into_iter().map(|img| (img, k)));
    }
    Ok(out)
}

fn finish(mut samples: Vec<Sample>, rng: &mut Rng) -> Result<Vec<Sample>, DatasetError> {
    rng.shuffle(&mut samples);
    samples
        .into_iter()
        .map(|(img, label)| Ok((bilinear_resize(&img, OUT_SIDE, OUT_SIDE)?, label)))
        .collect()
}

/// Loads the named classes (labels follow the order of `class_names`),
/// keeping the first `per_class_train` / `per_class_test` images of each
/// class, shuffling each split with `seed`, then downsizing to 10x10x3.
pub fn load_cifar10(
    dir: &Path,
    class_names: &[&str],
    per_class_train: usize,
    per_class_test: usize,
    seed: u64,
) -> Result<DatasetPair, DatasetError> {
    let classes = class_names
        .iter()
        .map(|name| {
            CIFAR10_CLASSES
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| DatasetError::UnknownClass(name.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let train_paths: Vec<_> = TRAIN_FILES.iter().map(|f| dir.join(f)).collect();
    let train_refs: Vec<&Path> = train_paths.iter().map(|p| p.as_path()).collect();
    let test_path = dir.join(TEST_FILE);

    let train = select(&train_refs, &classes, per_class_train)?;
    let test = select(&[test_path.as_path()], &classes, per_class_test)?;
    let names: Vec<String> = class_names.iter().map(|s| s.to_string()).collect();
    Ok(DatasetPair {
        train: LabeledDataset::new(
            finish(train, &mut Rng::with_stream(seed, 0))?,
            names.clone(),
            Split::Train,
        ),
        test: LabeledDataset::new(
            finish(test, &mut Rng::with_stream(seed, 1))?,
            names,
            Split::Test,
        ),
    })
}
