//! One optical processing unit.
//!
//! A signed kernel is split into positive and negative halves carried on two
//! FSRs of the AWGR. Each output port's balanced photodetector subtracts
//! the two, so output `j` receives `Σ_p x(p) ω(p - j)`.

mod calibration;
mod io;
mod kernel;
mod noise;
mod plan;
mod precision;
mod throughput;
mod unit;

pub use calibration::{
    calibrate_mzm_array, predistort, CalibrationReport, CalibrationSettings, MzmCorrection,
    MzmMismatch, MAX_PREDISTORTION_BOOST,
};
pub use io::{read_vector_csv, write_trace_csv};
pub use kernel::{normalize_kernel, split_kernel, Kernel, SplitKernel};
pub use noise::{measure_enob, noise_sigma, NoiseModel, Quantizer};
pub use plan::{
    load_weights, plan_wavelengths, plan_wavelengths_with, read_back_weights, WavelengthPlan,
    WeightLayout,
};
pub use precision::{draw_operands, op_precision, op_trials, OpPrecision, OpTrial, MAC_TAPS};
pub use throughput::{ops_per_symbol, peak_tops};
pub use unit::{elementary_op, opu_convolve, ElementaryOp, LoadedKernel, Opu, OpuConfig, OpuMode};
