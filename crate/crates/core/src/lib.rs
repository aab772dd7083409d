//! Needlet frames on the flat torus `T^d` and thresholded needlet
//! estimators of density derivatives.

pub mod bench;
pub mod coeffs;
pub mod densities;
pub mod error;
pub mod estimation;
pub mod frame;
pub mod harmonics;
pub mod output;
pub mod par;
pub mod quad;
pub mod spectral;
pub mod transform;
pub mod window;

pub use bench::{emit_report, lp_distance, run_experiment, ExperimentConfig, ReportFormat, RiskReport};
pub use coeffs::{besov_sequence_norm, CoefficientArray, Provenance};
pub use densities::{parse_density, product_density, uniform_density, wrapped_normal, TestDensity};
pub use error::{Error, Result};
pub use estimation::{
    apply_threshold, diagnostic_bandwidth, empirical_coefficients, estimate, surviving_counts, threshold_value,
    truncation_level, DerivativeEstimator, SampleSet, ThresholdKind, ThresholdRule,
};
pub use frame::{build_frame, build_frame_with_cap, CubatureLevel, FrameLevel, NeedletFrame};
pub use harmonics::{
    derivative_multiplier, fourier_basis_eval, frequency_shell, geodesic_distance, FrequencyVector, MultiIndex,
    TorusPoint,
};
pub use spectral::Spectrum;
pub use transform::{analyze, synthesize, synthesize_on_grid, AnalysisOptions, Strategy};
pub use window::{build_window, window_moment, WindowFunction};
