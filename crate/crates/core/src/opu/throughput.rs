use crate::error::{Error, Result};

/// Peak rate in TOPS of an `ports`-port OPU running a `k`-tap kernel at
/// `baud_ghz`: valid outputs × 2k ops per output × two signed FSR paths ×
/// symbol rate.
pub fn peak_tops(ports: usize, k: usize, baud_ghz: f64) -> Result<f64> {
    if k == 0 || k > ports {
        return Err(Error::KernelTooLong { k, ports });
    }
    if !(baud_ghz > 0.0) {
        return Err(Error::param("baud", "must be positive"));
    }
    Ok(ops_per_symbol(ports, k) as f64 * baud_ghz / 1000.0)
}

/// Operations one symbol slot contributes when `len` inputs are streamed
/// against a `k`-tap kernel.
pub fn ops_per_symbol(len: usize, k: usize) -> u64 {
    if k == 0 || k > len {
        return 0;
    }
    ((len - k + 1) * 4 * k) as u64
}
