//! Model container: `OCNN` magic, u32 version, u32 header length, a JSON
//! header describing the layers, then every weight as little-endian f64
//! (per layer: kernels in order, then biases).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Activation, LayerSpec};
use super::tensor::Kernel2d;
use super::toy::ToyCnn;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OCNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerHeader {
    out_channels: usize,
    in_channels: usize,
    kernel_size: usize,
    activation: Activation,
    normalize: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: String,
    input_size: usize,
    classes: usize,
    layers: Vec<LayerHeader>,
    parameter_count: usize,
}

fn params(layer: &LayerSpec) -> usize {
    layer.kernels.len() * layer.kernel_size * layer.kernel_size + layer.bias.len()
}

pub fn write_model<W: Write>(mut out: W, model: &ToyCnn) -> Result<()> {
    let layers = [&model.conv, &model.classifier];
    let header = Header {
        architecture: "toy_cnn".into(),
        input_size: model.input_size,
        classes: model.classes,
        layers: layers
            .iter()
            .map(|l| LayerHeader {
                out_channels: l.out_channels,
                in_channels: l.in_channels,
                kernel_size: l.kernel_size,
                activation: l.activation,
                normalize: l.normalize,
            })
            .collect(),
        parameter_count: layers.iter().map(|l| params(l)).sum(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for l in layers {
        for k in &l.kernels {
            for w in k.weights() {
                out.write_all(&w.to_le_bytes())?;
            }
        }
        for b in &l.bias {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::ModelFormat("payload truncated".into()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_model<R: Read>(mut input: R) -> Result<ToyCnn> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(Error::ModelFormat("not a model container".into()));
    }
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    input.read_exact(&mut word)?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.architecture != "toy_cnn" || header.layers.len() != 2 {
        return Err(Error::ModelFormat(format!(
            "unknown architecture {}",
            header.architecture
        )));
    }
    let mut layers = Vec::with_capacity(2);
    for lh in &header.layers {
        let kk = lh.kernel_size * lh.kernel_size;
        let kernels = (0..lh.out_channels * lh.in_channels)
            .map(|_| Kernel2d::new(lh.kernel_size, read_f64s(&mut input, kk)?))
            .collect::<Result<Vec<_>>>()?;
        let bias = read_f64s(&mut input, lh.out_channels)?;
        let mut layer = LayerSpec::new(
            lh.out_channels,
            lh.in_channels,
            kernels,
            bias,
            lh.activation,
        )?;
        layer.normalize = lh.normalize;
        layers.push(layer);
    }
    let classifier = layers.pop().unwrap();
    let conv = layers.pop().unwrap();
    if params(&conv) + params(&classifier) != header.parameter_count {
        return Err(Error::ModelFormat("parameter count mismatch".into()));
    }
    Ok(ToyCnn {
        input_size: header.input_size,
        classes: header.classes,
        conv,
        classifier,
    })
}

pub fn save_model(path: &Path, model: &ToyCnn) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ToyCnn> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
