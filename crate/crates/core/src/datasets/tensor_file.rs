//! Tensor dataset files.
//!
//! Layout: magic `QMC1`, then little-endian u32 `num_samples`, `L`, `W`,
//! `C`, `num_classes`; then per sample a little-endian u16 label followed by
//! `L*W*C` little-endian f32 values, row-major with channels last.
//!
//! Sectioned files (model parameters) use magic `QMCS`, a little-endian
//! u32 section count, then an index of `(u16 name length, name, u8 kind,
//! u64 byte length)` entries, then the section payloads in index order.
//! Kind 0 holds little-endian f64 values, kind 1 UTF-8 text.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::qconv::ImageTensor;

use super::{DatasetError, LabeledDataset, Sample, Split};

pub const TENSOR_MAGIC: [u8; 4] = *b"QMC1";
pub const SECTION_MAGIC: [u8; 4] = *b"QMCS";

#[derive(Debug, Clone, PartialEq)]
pub enum SectionData {
    F64(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub data: SectionData,
}

impl Section {
    pub fn values(name: &str, values: Vec<f64>) -> Self {
        Section {
            name: name.to_string(),
            data: SectionData::F64(values),
        }
    }

    pub fn text(name: &str, text: String) -> Self {
        Section {
            name: name.to_string(),
            data: SectionData::Text(text),
        }
    }
}

fn format_err(what: &str) -> impl Fn(std::io::Error) -> DatasetError + '_ {
    move |e| DatasetError::Format(format!("{what}: {e}"))
}

pub fn write_sections(out: &mut impl Write, sections: &[Section]) -> Result<(), DatasetError> {
    let io = format_err("write failed");
    out.write_all(&SECTION_MAGIC).map_err(&io)?;
    let count = u32::try_from(sections.len())
        .map_err(|_| DatasetError::Format("too many sections".into()))?;
    out.write_all(&count.to_le_bytes()).map_err(&io)?;
    let payloads: Vec<(u8, Vec<u8>)> = sections
        .iter()
        .map(|s| match &s.data {
            SectionData::F64(v) => (0, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            SectionData::Text(t) => (1, t.as_bytes().to_vec()),
        })
        .collect();
    for (s, (kind, bytes)) in sections.iter().zip(&payloads) {
        let name_len = u16::try_from(s.name.len())
            .map_err(|_| DatasetError::Format("section name too long".into()))?;
        out.write_all(&name_len.to_le_bytes()).map_err(&io)?;
        out.write_all(s.name.as_bytes()).map_err(&io)?;
        out.write_all(&[*kind]).map_err(&io)?;
        out.write_all(&(bytes.len() as u64).to_le_bytes())
            .map_err(&io)?;
    }
    for (_, bytes) in &payloads {
        out.write_all(bytes).map_err(&io)?;
    }
    Ok(())
}

pub fn read_sections(input: &mut impl Read) -> Result<Vec<Section>, DatasetError> {
    let io = format_err("truncated section file");
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(&io)?;
    if magic != SECTION_MAGIC {
        return Err(DatasetError::Format(format!("bad magic {magic:?}")));
    }
    let count = read_u32(input)? as usize;
    let mut index = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let mut b2 = [0u8; 2];
        input.read_exact(&mut b2).map_err(&io)?;
        let mut name = vec![0u8; u16::from_le_bytes(b2) as usize];
        input.read_exact(&mut name).map_err(&io)?;
        let name = String::from_utf8(name)
            .map_err(|_| DatasetError::Format("section name is not UTF-8".into()))?;
        let mut kind = [0u8; 1];
        input.read_exact(&mut kind).map_err(&io)?;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8).map_err(&io)?;
        index.push((name, kind[0], u64::from_le_bytes(b8) as usize));
    }
    let mut sections = Vec::with_capacity(index.len());
    for (name, kind, len) in index {
        let mut bytes = vec![0u8; len];
        input.read_exact(&mut bytes).map_err(&io)?;
        let data = match kind {
            0 if len % 8 == 0 => SectionData::F64(
                bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect(),
            ),
            1 => SectionData::Text(
                String::from_utf8(bytes)
                    .map_err(|_| DatasetError::Format(format!("section `{name}` is not UTF-8")))?,
            ),
            _ => {
                return Err(DatasetError::Format(format!(
                    "section `{name}` has bad kind or length"
                )))
            }
        };
        sections.push(Section { name, data });
    }
    Ok(sections)
}

pub fn write_dataset(out: &mut impl Write, data: &LabeledDataset) -> Result<(), DatasetError> {
    let (l, w, c) = data.dims().unwrap_or((0, 0, 0));
    if data
        .samples
        .iter()
        .any(|(img, _)| (img.len(), img.width(), img.channels()) != (l, w, c))
    {
        return Err(DatasetError::Format("samples have mixed dimensions".into()));
    }
    let io = |e| DatasetError::Format(format!("write failed: {e}"));
    out.write_all(&TENSOR_MAGIC).map_err(io)?;
    for v in [data.len(), l, w, c, data.num_classes()] {
        let v = u32::try_from(v)
            .map_err(|_| DatasetError::Format("header field exceeds u32".into()))?;
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for (img, label) in &data.samples {
        let label =
            u16::try_from(*label).map_err(|_| DatasetError::Format("label exceeds u16".into()))?;
        out.write_all(&label.to_le_bytes()).map_err(io)?;
        let mut buf = Vec::with_capacity(img.data().len() * 4);
        for v in img.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32, DatasetError> {
    let mut b = [0u8; 4];
    input
        .read_exact(&mut b)
        .map_err(|e| DatasetError::Format(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a dataset; class names are not stored, so they come back as
/// `class0`, `class1`, ...
pub fn read_dataset(input: &mut impl Read, split: Split) -> Result<LabeledDataset, DatasetError> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|e| DatasetError::Format(format!("missing magic: {e}")))?;
    if magic != TENSOR_MAGIC {
        return Err(DatasetError::Format(format!("bad magic {magic:?}")));
    }
    let n = read_u32(input)? as usize;
    let l = read_u32(input)? as usize;
    let w = read_u32(input)? as usize;
    let c = read_u32(input)? as usize;
    let classes = read_u32(input)? as usize;
    let per = l * w * c;
    let mut samples: Vec<Sample> = Vec::with_capacity(n);
    let mut buf = vec![0u8; per * 4];
    for k in 0..n {
        let mut lb = [0u8; 2];
        input
            .read_exact(&mut lb)
            .map_err(|e| DatasetError::Format(format!("truncated sample {k}: {e}")))?;
        let label = u16::from_le_bytes(lb) as usize;
        if label >= classes {
            return Err(DatasetError::Format(format!(
                "sample {k} label {label} >= {classes} classes"
            )));
        }
        input
            .read_exact(&mut buf)
            .map_err(|e| DatasetError::Format(format!("truncated sample {k}: {e}")))?;
        let data = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        samples.push((ImageTensor::new(l, w, c, data)?, label));
    }
    let names = (0..classes).map(|i| format!("class{i}")).collect();
    Ok(LabeledDataset::new(samples, names, split))
}

pub fn save_dataset(path: &Path, data: &LabeledDataset) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_dataset(&mut out, data)?;
    out.flush().map_err(|e| DatasetError::io(path, e))
}

pub fn load_dataset(path: &Path, split: Split) -> Result<LabeledDataset, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_dataset(&mut BufReader::new(file), split)
}
