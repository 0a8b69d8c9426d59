//! Convex-potential minimization of linear classifiers over finite
//! distributions, with label noise applied exactly.
//!
//! The crate is organised around the objects in the analysis:
//!
//! * [`loss_zoo`]: the margin potentials and the axiom predicates;
//! * [`distributions`]: finite distributions, exact label-noise corruption,
//!   margins and the nearest-centroid counterexample;
//! * [`minimizers`]: ball-constrained minimizers (closed form and PGD);
//! * [`dynamics`]: gradient and coordinate descent on the unhinged loss;
//! * [`analysis`]: error rates, the robustness check, the slope identity
//!   and the recession probe.
//!
//! ```
//! use unhinged::{analysis, distributions, minimizers};
//!
//! let clean = distributions::make_counterexample(0.05)?;
//! let noisy = clean.corrupt(0.2)?;
//! let f = minimizers::unhinged_minimizer(&clean, 1.0)?;
//! let g = minimizers::unhinged_minimizer(&noisy, 1.0)?;
//! // same classifier with and without noise, and it is no better than a coin
//! assert_eq!(analysis::misclassification_error(&clean, f.v()), 0.5);
//! assert_eq!(analysis::misclassification_error(&clean, g.v()), 0.5);
//! # Ok::<(), unhinged::Error>(())
//! ```

// `!(a <= b)` is used on purpose throughout: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod distributions;
pub mod dynamics;
mod error;
pub mod loss_zoo;
pub mod minimizers;
pub mod random;
pub mod vector;

pub use error::{Error, Result};

pub use analysis::{
    check_rcn_robustness, expected_loss, misclassification_error, recession_probe, slope_identity_residual,
    MinimizerKind, RayProbe, RobustnessReport,
};
pub use distributions::{
    corrupt_rcn, l1_margin, make_counterexample, mean_label_feature, DiscreteDistribution, Label, LabeledPoint,
    MarginCertificate,
};
pub use dynamics::{cd_unhinged, gd_unhinged, CdConfig, TieRule, Trajectory};
pub use loss_zoo::{check_convex_potential, check_relaxed_potential, make_loss, AxiomClass, Loss, Potential};
pub use minimizers::{pgd_minimizer, unhinged_minimizer, FitResult, PgdConfig, WeightVector};

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/centroid.md")]
    mod centroid {}
    #[doc = include_str!("../../../book/src/counterexample.md")]
    mod counterexample {}
    #[doc = include_str!("../../../book/src/implicit_bias.md")]
    mod implicit_bias {}
    #[doc = include_str!("../../../book/src/minimizer_existence.md")]
    mod minimizer_existence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
