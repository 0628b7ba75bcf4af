//! Labeled image datasets: synthetic generators, the CIFAR-10 binary
//! loader and the on-disk tensor format.

mod cifar;
mod resize;
mod synthetic;
mod tensor_file;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::qconv::{ImageTensor, QconvError};

pub use cifar::{load_cifar10, CIFAR10_CLASSES, CIFAR_CLASS_ORDER, CIFAR_RECORD_BYTES};
pub use resize::bilinear_resize;
pub use synthetic::{
    gen_high_channel, gen_noisy_colors, gen_noisy_shapes, shape_mask, Design, BASE_COLORS,
    NOISY_COLORS,
};
pub use tensor_file::{
    load_dataset, read_dataset, read_sections, save_dataset, write_dataset, write_sections,
    Section, SectionData, SECTION_MAGIC, TENSOR_MAGIC,
};

pub type Sample = (ImageTensor, usize);

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has only {available} samples, {requested} requested")]
    NotEnoughSamples {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error(transparent)]
    Image(#[from] QconvError),
}

impl DatasetError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>, split: Split) -> Self {
        LabeledDataset {
            samples,
            class_names,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for (_, label) in &self.samples {
            counts[*label] += 1;
        }
        counts
    }

    /// Keeps classes `0..classes` and, if given, the first `per_class`
    /// samples of each kept class (in stored order).
    pub fn restrict(&self, classes: usize, per_class: Option<usize>) -> Result<Self, DatasetError> {
        let classes = classes.min(self.num_classes());
        let mut seen = vec![0usize; classes];
        let mut samples = Vec::new();
        for (img, label) in &self.samples {
            if *label < classes && per_class.is_none_or(|n| seen[*label] < n) {
                seen[*label] += 1;
                samples.push((img.clone(), *label));
            }
        }
        if let Some(n) = per_class {
            if let Some(k) = seen.iter().position(|&s| s < n) {
                return Err(DatasetError::NotEnoughSamples {
                    class: self.class_names[k].clone(),
                    available: seen[k],
                    requested: n,
                });
            }
        }
        Ok(LabeledDataset::new(
            samples,
            self.class_names[..classes].to_vec(),
            self.split,
        ))
    }

    /// `(len, width, channels)` of the first sample.
    pub fn dims(&self) -> Option<(usize, usize, usize)> {
        self.samples
            .first()
            .map(|(img, _)| (img.len(), img.width(), img.channels()))
    }
}

/// Train and test halves of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    NoisyColors,
    NoisyShapes,
    HighChannel,
    Cifar,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::NoisyColors => "noisy-colors",
            DatasetKind::NoisyShapes => "noisy-shapes",
            DatasetKind::HighChannel => "high-channel",
            DatasetKind::Cifar => "cifar",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noisy-colors" => Ok(DatasetKind::NoisyColors),
            "noisy-shapes" => Ok(DatasetKind::NoisyShapes),
            "high-channel" => Ok(DatasetKind::HighChannel),
            "cifar" => Ok(DatasetKind::Cifar),
            other => Err(format!("unknown dataset `{other}`")),
        }
    }
}
