use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed 1D convolution kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kernel(Vec<f64>);

impl Kernel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("kernel", "needs at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("kernel", "weights must be finite"));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }
}

/// Nonnegative halves of a kernel, carried on separate FSRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitKernel {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl SplitKernel {
    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn positive_sum(&self) -> f64 {
        self.positive.iter().sum()
    }

    pub fn negative_sum(&self) -> f64 {
        self.negative.iter().sum()
    }

    pub fn recombine(&self) -> Vec<f64> {
        self.positive
            .iter()
            .zip(&self.negative)
            .map(|(p, n)| p - n)
            .collect()
    }
}

pub fn split_kernel(kernel: &Kernel) -> SplitKernel {
    SplitKernel {
        positive: kernel
            .0
            .iter()
            .map(|&w| if w > 0.0 { w } else { 0.0 })
            .collect(),
        negative: kernel
            .0
            .iter()
            .map(|&w| if w < 0.0 { -w } else { 0.0 })
            .collect(),
    }
}

/// Scales a kernel so its largest magnitude is 1. Multiply outputs by the
/// returned scale to undo it.
pub fn normalize_kernel(kernel: &Kernel) -> Result<(Kernel, f64)> {
    let scale = kernel.max_abs();
    if scale == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    Ok((Kernel(kernel.0.iter().map(|w| w / scale).collect()), scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_mixed_signs() {
        let s = split_kernel(&Kernel::new(vec![0.3, -0.5, 0.9]).unwrap());
        assert_eq!(s.positive, vec![0.3, 0.0, 0.9]);
        assert_eq!(s.negative, vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn split_nonnegative_has_empty_negative() {
        let s = split_kernel(&Kernel::new(vec![0.0, 1.0, 2.0]).unwrap());
        assert!(s.negative.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn normalize_examples() {
        let (k, scale) = normalize_kernel(&Kernel::new(vec![2.0, -4.0, 6.0]).unwrap()).unwrap();
        assert_eq!(scale, 6.0);
        assert_eq!(k.weights(), &[1.0 / 3.0, -2.0 / 3.0, 1.0]);

        let (_, scale) = normalize_kernel(&Kernel::new(vec![0.5, -1.0]).unwrap()).unwrap();
        assert_eq!(scale, 1.0);

        assert!(matches!(
            normalize_kernel(&Kernel::new(vec![0.0, 0.0]).unwrap()),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::new(vec![]).is_err());
        assert!(Kernel::new(vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn split_reconstructs_exactly(w in proptest::collection::vec(-5.0f64..5.0, 1..12)) {
            let s = split_kernel(&Kernel::new(w.clone()).unwrap());
            prop_assert_eq!(s.recombine(), w);
            for (p, n) in s.positive.iter().zip(&s.negative) {
                prop_assert!(*p >= 0.0 && *n >= 0.0);
                prop_assert_eq!(p * n, 0.0);
            }
        }
    }
}
