//! Image convolution on OPUs and a toy CNN that runs its first layer
//! optically. All convolutions are valid-mode cross-correlations.

mod conv;
mod dataset;
mod fixtures;
mod layer;
mod modelio;
mod tensor;
mod toy;
mod trace;

pub use conv::{
    chunk_count, conv1d_via_opu, conv2d_via_opus, correlate_row_chunked, decompose_conv2d,
    noisy_quantize, recompose, run_row_task, Conv2dTask, UnitRange,
};
pub use dataset::{
    load_mnist, read_idx, read_idx_file, synthetic_blobs, write_idx, write_idx_file, Dataset,
    IdxArray, Split,
};
pub use fixtures::{load_kernel_fixture, parse_kernel_fixture, standard_kernels, NamedKernel};
pub use layer::{layer_forward, Activation, Execution, LayerSpec};
pub use modelio::{load_model, read_model, save_model, write_model, FORMAT_VERSION};
pub use tensor::{correlate2d_valid, FeatureMap, ImageTensor, Kernel2d};
pub use toy::{
    evaluate_classifier, train_toy_cnn, Evaluation, ModelExecution, ToyCnn, TrainConfig,
    CONV_CHANNELS,
};
pub use trace::{first_layer_trace, FirstLayerTrace};
