//! Loop-law diagnostics for GPS baseline networks.
//!
//! Each coordinate of a baseline network is a weighted digraph. Its
//! polynomial adjacency matrix `A(z)` has `z^w` for every arc `u→v` of weight
//! `w` and `z^{−w}` in the reverse position, so the diagonal of `A(z)^r`
//! sums `z` raised to the signed weight of every closed `r`-walk. The network
//! closes all its loops exactly when those diagonals do not depend on `z`;
//! deviations from `A(1)^r` locate the offending measurements, and minimizing
//! the trace deviation over correction variables estimates the blunders.

// `!(x > 0.0)` is deliberate: NaN must fail positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod exppoly;
pub mod graph;
pub mod matrix;
pub mod report;
pub mod spectral;

pub use detect::{
    build_error_function, correct, detect, minimize_error, rank_suspect_arcs, remove_suspects,
    sample_error_surface, CorrectionResult, DetectConfig, DetectError, DiagnosticsReport, ErrorFunction,
    GridAxis, Minimum, SurfaceTable, Verdict,
};
pub use exppoly::{AffineExponent, EvalError, ExpPoly, Term};
pub use graph::{
    gauge_fix, load_network, normalize_orientation, spanning_tree, Arc, BaselineTable, Coordinate,
    GaugePotential, GraphError, VertexId, WeightedDigraph,
};
pub use matrix::{
    asymptotic_diag_slope, build_poly_matrix, numeric_eval, power_diagonals, symbolic_power, walk_oracle,
    DeviationSeries, DeviationStep, MatrixError, NumericMatrix, PolyMatrix, DEFAULT_TERM_BUDGET,
};
pub use spectral::{
    charpoly_by_determinant, charpoly_from_power_sums, power_sums, spectrum, spectrum_deviation,
    MonicPolynomial, PowerSums, SpectralError, Spectrum,
};
