//! Benchmark problem generators and frequency-domain utilities.

pub mod fem;
pub mod freqdata;
pub mod lti;
pub mod suite;

pub use fem::{build_convection_fom, build_nonsep_fom, build_poisson_fom, build_thermal_block_fom, Grid2D};
pub use freqdata::{load_frequency_data, parse_frequency_csv, write_frequency_data};
pub use lti::{sample_transfer_function, stable_part, FrequencySampleSet, StablePart};
pub use suite::{Benchmark, InitKind, Method, Setup};
