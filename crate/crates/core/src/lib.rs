//! Monte Carlo Feynman–Kac solver for the Dirichlet problem
//!
//! ```text
//! ½ ∂_j(a_ij ∂_i u) + b·∇u + (c − div b̂) u = 0  in D,   u = f  on ∂D
//! ```
//!
//! with a non-symmetric diffusion matrix `A`, together with a deterministic
//! finite-difference oracle for the same weak problem and numerical checks of
//! the constants that control the representation.
//!
//! Module map:
//!
//! * [`coeffs`]: expression-defined coefficient fields, extension off `D`,
//!   mollification.
//! * [`pathsim`]: Euler–Maruyama paths of the divergence-form diffusion up to
//!   the exit time.
//! * [`functionals`]: the multiplicative weight (Girsanov, potential and
//!   divergence parts) and the payoff.
//! * [`oracle`]: grid bilinear forms, weak Dirichlet solves, the resolvent
//!   function `ξ^H`, discrete generator and semigroup pairing.
//! * [`bounds`]: heat-kernel majorant, Khasminskii threshold, integral bounds,
//!   Kato constant.
//! * [`driver`]: config files, parallel estimation, cross-checks, reports.

pub mod bounds;
pub mod coeffs;
pub mod domain;
pub mod driver;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod oracle;
pub mod pathsim;
pub mod quadrature;
pub mod stats;

pub use coeffs::expr::{parse_field_expr, FieldExpr};
pub use coeffs::{CoefficientSet, CoefficientSetBuilder};
pub use domain::Domain;
pub use error::{Error, Result};
