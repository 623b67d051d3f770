use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Kernel2d;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedKernel {
    pub name: String,
    pub weights: Kernel2d,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    kernels: Vec<NamedKernel>,
}

const STANDARD: &str = include_str!("../../data/kernels.json");

pub fn parse_kernel_fixture(text: &str) -> Result<Vec<NamedKernel>> {
    let file: KernelFile = serde_json::from_str(text)?;
    if file.kernels.is_empty() {
        return Err(Error::Validation {
            path: "kernels".into(),
            message: "fixture lists no kernels".into(),
        });
    }
    Ok(file.kernels)
}

pub fn load_kernel_fixture(path: &Path) -> Result<Vec<NamedKernel>> {
    parse_kernel_fixture(&std::fs::read_to_string(path)?)
}

/// The ten image kernels shipped with the crate: identity, box and
/// Gaussian blur, sharpen, Sobel and Prewitt in x and y, Laplacian, emboss.
pub fn standard_kernels() -> Vec<NamedKernel> {
    parse_kernel_fixture(STANDARD).expect("bundled kernel fixture is valid")
}
