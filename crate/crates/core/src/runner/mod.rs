//! Scenario-driven batch runs: each command reads a JSON scenario and
//! writes CSV/JSON artifacts plus a `manifest.json`.

mod commands;
mod scenario;

pub use commands::{execute, Command, ReportKind, RunContext, RunManifest};
pub use scenario::{
    bundled_mnist_dir, ClusterSection, ConvnetSection, ConvolveSection, ElementarySection,
    EnergySection, ImageSource, JobGenerator, LinkSection, LoadedScenario, OpuSection,
    PhotonicsSection, Scenario, SweepAxis, SweepSection, ThroughputPoint, ThroughputSection,
    FIXTURE_ROOT_ENV,
};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        /// Scenarios shipped with the crate, by name.
        pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../scenarios/", $name, ".json")))),*
        ];
    };
}

bundled!(
    "fig4c_link",
    "fig4e_precision",
    "fig4f_addition",
    "fig4g_kernels",
    "fig5a_mnist",
    "fig5d_firstlayer",
    "power_report",
    "peak_tops",
    "cluster_pool",
);

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

/// Caps the worker threads used for parallel sweep points and tasks.
/// Results do not depend on the count.
pub fn configure_threads(n: usize) -> crate::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::Error::Configuration(e.to_string()))
}
