use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::ImageTensor;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        images: Vec<ImageTensor>,
        labels: Vec<usize>,
        classes: usize,
        split: Split,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::shape(
                format!("{} labels", images.len()),
                labels.len(),
            ));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Range {
                index: i,
                value: l as f64,
                lo: 0.0,
                hi: (classes.max(1) - 1) as f64,
            });
        }
        if let Some(first) = images.first() {
            let dims = (first.channels(), first.height(), first.width());
            if images
                .iter()
                .any(|im| (im.channels(), im.height(), im.width()) != dims)
            {
                return Err(Error::param("images", "all images must share one shape"));
            }
        }
        Ok(Self {
            images,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// First `n` samples.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            split: self.split,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Two classes of `size × size` images: a bright blob in the upper-left
/// or the lower-right quadrant, plus uniform noise.
pub fn synthetic_blobs(count: usize, size: usize, seed: u64) -> Result<Dataset> {
    if size < 4 {
        return Err(Error::param("size", "must be at least 4"));
    }
    let mut rng = seed::rng(seed);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % 2;
        let half = size / 2;
        let mut px = vec![0.0; size * size];
        for y in 0..size {
            for x in 0..size {
                let inside = if label == 0 {
                    y < half && x < half
                } else {
                    y >= half && x >= half
                };
                let base = if inside { 0.7 } else { 0.1 };
                px[y * size + x] = (base + rng.random_range(-0.1..0.1f64)).clamp(0.0, 1.0);
            }
        }
        images.push(ImageTensor::new(1, size, size, px)?);
        labels.push(label);
    }
    Dataset::new(images, labels, 2, Split::Train)
}

/// Unsigned-byte IDX array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let head = std::io::Cursor::new(magic[..n].to_vec());
    let chained = head.chain(file);
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(GzDecoder::new(chained)))
    } else {
        Ok(Box::new(chained))
    }
}

pub fn read_idx<R: Read>(mut input: R) -> Result<IdxArray> {
    let mut header = [0u8; 4];
    input.read_exact(&mut header)?;
    if header[0] != 0 || header[1] != 0 {
        return Err(Error::Idx("bad magic".into()));
    }
    if header[2] != 0x08 {
        return Err(Error::Idx(format!(
            "unsupported element type 0x{:02x}",
            header[2]
        )));
    }
    let ndims = header[3] as usize;
    if ndims == 0 {
        return Err(Error::Idx("zero dimensions".into()));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let mut d = [0u8; 4];
        input.read_exact(&mut d)?;
        dims.push(u32::from_be_bytes(d) as usize);
    }
    let total: usize = dims.iter().product();
    let mut data = vec![0u8; total];
    input
        .read_exact(&mut data)
        .map_err(|e| Error::Idx(format!("payload shorter than {total} bytes: {e}")))?;
    Ok(IdxArray { dims, data })
}

pub fn write_idx<W: Write>(mut out: W, array: &IdxArray) -> Result<()> {
    if array.dims.iter().product::<usize>() != array.data.len() {
        return Err(Error::Idx("dims do not match payload".into()));
    }
    out.write_all(&[0, 0, 0x08, array.dims.len() as u8])?;
    for &d in &array.dims {
        out.write_all(&(d as u32).to_be_bytes())?;
    }
    out.write_all(&array.data)?;
    Ok(())
}

pub fn read_idx_file(path: &Path) -> Result<IdxArray> {
    read_idx(open_maybe_gz(path)?)
}

/// Writes gzip-compressed when the path ends in `.gz`.
pub fn write_idx_file(path: &Path, array: &IdxArray) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = GzEncoder::new(file, Compression::default());
        write_idx(&mut gz, array)?;
        gz.finish()?.flush()?;
    } else {
        let mut file = file;
        write_idx(&mut file, array)?;
        file.flush()?;
    }
    Ok(())
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [format!("{stem}.gz"), stem.to_string()] {
        let p = dir.join(name);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::MissingFixture(dir.join(stem)))
}

/// Loads MNIST-format images and labels from `dir`, plain or gzipped.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = read_idx_file(&find(dir, &format!("{prefix}-images-idx3-ubyte"))?)?;
    let labels = read_idx_file(&find(dir, &format!("{prefix}-labels-idx1-ubyte"))?)?;
    if images.dims.len() != 3 || labels.dims.len() != 1 {
        return Err(Error::Idx("expected 3-D images and 1-D labels".into()));
    }
    let (n, h, w) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims[0] != n {
        return Err(Error::Idx(format!(
            "{n} images but {} labels",
            labels.dims[0]
        )));
    }
    let imgs = images
        .data
        .chunks(h * w)
        .map(|px| ImageTensor::from_u8(h, w, px))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        imgs,
        labels.data.iter().map(|&l| l as usize).collect(),
        10,
        split,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_round_trip_is_bit_exact() {
        let arr = IdxArray {
            dims: vec![2, 2, 3],
            data: (0..12).collect(),
        };
        let mut buf = Vec::new();
        write_idx(&mut buf, &arr).unwrap();
        assert_eq!(&buf[..4], &[0, 0, 8, 3]);
        assert_eq!(&buf[4..8], &[0, 0, 0, 2]);
        assert_eq!(read_idx(buf.as_slice()).unwrap(), arr);
    }

    #[test]
    fn gz_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let arr = IdxArray {
            dims: vec![5],
            data: vec![9, 8, 7, 6, 5],
        };
        for name in ["a.idx", "a.idx.gz"] {
            let p = dir.path().join(name);
            write_idx_file(&p, &arr).unwrap();
            assert_eq!(read_idx_file(&p).unwrap(), arr);
        }
    }

    #[test]
    fn truncated_and_bad_magic() {
        assert!(read_idx([1u8, 0, 8, 1, 0, 0, 0, 1, 5].as_slice()).is_err());
        assert!(read_idx([0u8, 0, 8, 1, 0, 0, 0, 3, 5].as_slice()).is_err());
    }

    #[test]
    fn dataset_validation() {
        let img = ImageTensor::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(Dataset::new(vec![img.clone()], vec![3], 2, Split::Test).is_err());
        assert!(Dataset::new(vec![img], vec![], 2, Split::Test).is_err());
        let blobs = synthetic_blobs(10, 8, 0).unwrap();
        assert_eq!(blobs.class_counts(), vec![5, 5]);
    }
}
