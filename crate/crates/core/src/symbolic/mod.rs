pub mod expr;
pub mod extract;
pub mod fit;
pub mod library;
pub mod simplify;

pub use expr::{from_json, to_json, SymbolicExpr, EXPR_FORMAT_VERSION};
pub use extract::{compose, extract_network, spline_label, EdgeFit, ExtractConfig, Extraction};
pub use fit::{best_fit, fit_candidate, fit_library, quantile_samples, symbolify_edge, CandidateFit};
pub use library::{Candidate, CandidateLibrary};
pub use simplify::{
    canonicalize, denormalize, polynomial_coefficients, render, render_with, simplify, simplify_with,
    substitute, SimplifyOptions, DEFAULT_DECIMALS,
};
