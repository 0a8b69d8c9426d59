//! Exact evaluation of losses and error rates, plus the checks built on them:
//! noise robustness of a fitted pair, the affine relation between clean and
//! noisy unhinged objectives, and the ray probe showing the noisy objective
//! of a convex potential grows without bound in every direction.

use serde::{Deserialize, Serialize};

use crate::distributions::{corrupt_rcn, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::loss_zoo::{check_convex_potential, default_grid, Loss, Potential};
use crate::minimizers::{pgd_minimizer, unhinged_minimizer, FitResult, PgdConfig, WeightVector};
use crate::vector::{dot, max_abs_diff, norm2};

/// Two error rates count as equal within this slack.
pub const ERROR_EQUALITY_TOLERANCE: f64 = 1e-12;
/// Allowed shortfall of the probed objective below its analytic bound.
pub const PROBE_SLACK: f64 = 1e-9;

/// `E[phi(y (v . x))]`, summed exactly over the atoms.
pub fn expected_loss(dist: &DiscreteDistribution, phi: &dyn Potential, v: &[f64]) -> Result<f64> {
    dist.check_dim(v)?;
    dist.atoms().iter().try_fold(0.0, |acc, a| Ok(acc + a.weight * phi.checked_value(a.point.margin(v))?))
}

/// Mass of the atoms with `y (v . x) <= 0`.
///
/// An atom on the decision boundary counts as an error whatever its label,
/// so `v = 0` has error 1.
pub fn misclassification_error(dist: &DiscreteDistribution, v: &[f64]) -> f64 {
    dist.atoms().iter().filter(|a| a.point.margin(v) <= 0.0).map(|a| a.weight).sum::<f64>().min(1.0)
}

/// How the robustness checker obtains its minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerKind {
    /// Nearest-centroid closed form; only valid for the unhinged loss.
    ClosedForm,
    Pgd(PgdConfig),
}

impl MinimizerKind {
    /// Closed form for the unhinged loss, default PGD otherwise.
    pub fn default_for(phi: &dyn Potential, dist: &DiscreteDistribution) -> Self {
        if phi.as_loss() == Some(Loss::Unhinged) {
            MinimizerKind::ClosedForm
        } else {
            MinimizerKind::Pgd(PgdConfig::for_distribution(dist))
        }
    }
}

pub fn fit(dist: &DiscreteDistribution, phi: &dyn Potential, r: f64, kind: &MinimizerKind) -> Result<FitResult> {
    match kind {
        MinimizerKind::ClosedForm => {
            if phi.as_loss() != Some(Loss::Unhinged) {
                return Err(Error::InvalidConfig(format!(
                    "closed-form minimizer only exists for the unhinged loss, not `{}`",
                    phi.name()
                )));
            }
            unhinged_minimizer(dist, r)
        }
        MinimizerKind::Pgd(cfg) => pgd_minimizer(dist, phi, r, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub loss: String,
    pub eta: f64,
    pub r: f64,
    /// Clean-distribution error of the minimizer fit on clean data.
    pub clean_fit_error: f64,
    /// Clean-distribution error of the minimizer fit on noisy data.
    pub noisy_fit_error: f64,
    pub robust: bool,
    pub minimizer_clean: WeightVector,
    pub minimizer_noisy: WeightVector,
    pub objective_clean: f64,
    pub objective_noisy: f64,
    /// `max_j |v_clean_j - v_noisy_j|`.
    pub minimizer_drift: f64,
    pub degenerate_centroid: bool,
}

impl RobustnessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fits on `dist` and on its `eta`-noisy version and compares the two
/// classifiers' error rates on the clean distribution.
///
/// Only the one minimizer each fit returns is compared; when the minimizer
/// set is not a singleton this is a single witness, not a statement about
/// every minimizer.
pub fn check_rcn_robustness(
    dist: &DiscreteDistribution,
    phi: &dyn Potential,
    r: f64,
    eta: f64,
    kind: &MinimizerKind,
) -> Result<RobustnessReport> {
    let noisy = corrupt_rcn(dist, eta)?;
    let f = fit(dist, phi, r, kind)?;
    let g = fit(&noisy, phi, r, kind)?;
    let clean_fit_error = misclassification_error(dist, f.v());
    let noisy_fit_error = misclassification_error(dist, g.v());
    Ok(RobustnessReport {
        loss: phi.name().to_string(),
        eta,
        r,
        clean_fit_error,
        noisy_fit_error,
        robust: (clean_fit_error - noisy_fit_error).abs() <= ERROR_EQUALITY_TOLERANCE,
        minimizer_drift: max_abs_diff(f.v(), g.v()),
        objective_clean: f.objective,
        objective_noisy: g.objective,
        degenerate_centroid: f.degenerate_centroid || g.degenerate_centroid,
        minimizer_clean: f.weights,
        minimizer_noisy: g.weights,
    })
}

/// `|P_noisy(w) - ((1 - 2 eta) P_clean(w) + 2 eta)|` for the unhinged loss.
pub fn slope_identity_residual(dist: &DiscreteDistribution, eta: f64, w: &[f64]) -> Result<f64> {
    let noisy = corrupt_rcn(dist, eta)?;
    let clean = expected_loss(dist, &Loss::Unhinged, w)?;
    let corrupted = expected_loss(&noisy, &Loss::Unhinged, w)?;
    Ok((corrupted - ((1.0 - 2.0 * eta) * clean + 2.0 * eta)).abs())
}

/// `{0, 0.5, 1, 2, 4, ..., 1024}`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0, 0.5];
    grid.extend((0..=10).map(|k| f64::from(1u32 << k)));
    grid
}

/// The noisy objective sampled along the ray `x0 + lambda u` next to the
/// lower bound
/// `eta (phi(0) - phi'(0) lambda E|u.x| + phi'(0) E|x0.x|)`,
/// which grows linearly in `lambda` because `phi'(0) < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProbe {
    pub loss: String,
    pub eta: f64,
    pub base_point: Vec<f64>,
    pub direction: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    /// `min_i values[i] - lower_bounds[i]`.
    pub min_slack: f64,
    pub bound_holds: bool,
    /// Values strictly increase over the last three grid points.
    pub eventually_increasing: bool,
}

impl RayProbe {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe serializes")
    }
}

pub fn recession_probe(
    dist: &DiscreteDistribution,
    phi: &dyn Potential,
    eta: f64,
    x0: &[f64],
    u: &[f64],
    lambdas: &[f64],
) -> Result<RayProbe> {
    dist.check_dim(x0)?;
    dist.check_dim(u)?;
    if !check_convex_potential(phi, &default_grid())?.passes() {
        return Err(Error::NotConvexPotential(phi.name().to_string()));
    }
    if (norm2(u) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!("direction must be a unit vector, |u| = {}", norm2(u))));
    }
    if lambdas.is_empty()
        || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0))
        || lambdas.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidConfig("lambdas must be nonnegative and strictly increasing".into()));
    }
    let width: f64 = dist.atoms().iter().map(|a| a.weight * dot(u, a.point.x()).abs()).sum();
    if width <= 1e-12 {
        return Err(Error::FlatDirection);
    }
    let base_width: f64 = dist.atoms().iter().map(|a| a.weight * dot(x0, a.point.x()).abs()).sum();
    let noisy = corrupt_rcn(dist, eta)?;
    let phi0 = phi.value(0.0);
    let slope0 = phi.derivative(0.0);

    let mut values = Vec::with_capacity(lambdas.len());
    let mut lower_bounds = Vec::with_capacity(lambdas.len());
    let mut point = vec![0.0; x0.len()];
    for &lambda in lambdas {
        for ((p, a), b) in point.iter_mut().zip(x0).zip(u) {
            *p = a + lambda * b;
        }
        values.push(expected_loss(&noisy, phi, &point)?);
        lower_bounds.push(eta * (phi0 - slope0 * lambda * width + slope0 * base_width));
    }
    let min_slack = values.iter().zip(&lower_bounds).map(|(v, b)| v - b).fold(f64::INFINITY, f64::min);
    let tail = &values[values.len().saturating_sub(3)..];
    let eventually_increasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] > w[0]);
    Ok(RayProbe {
        loss: phi.name().to_string(),
        eta,
        base_point: x0.to_vec(),
        direction: u.to_vec(),
        lambdas: lambdas.to_vec(),
        values,
        lower_bounds,
        min_slack,
        bound_holds: min_slack >= -PROBE_SLACK,
        eventually_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_counterexample, mean_label_feature, LabeledPoint};
    use approx::assert_abs_diff_eq;

    fn e1() -> DiscreteDistribution {
        DiscreteDistribution::new([(LabeledPoint::positive(vec![1.0]).unwrap(), 1.0)]).unwrap()
    }

    #[test]
    fn expected_loss_examples() {
        let d = make_counterexample(0.05).unwrap();
        assert_eq!(expected_loss(&d, &Loss::Unhinged, &[0.0, 0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(expected_loss(&d, &Loss::Unhinged, &[1.0, 0.0]).unwrap(), 0.7125, epsilon = 1e-15);
        assert_abs_diff_eq!(
            expected_loss(&e1(), &Loss::Exponential, &[1.0]).unwrap(),
            0.367_879_441_171_442_3,
            epsilon = 1e-15
        );
        assert!(matches!(expected_loss(&e1(), &Loss::Exponential, &[-800.0]), Err(Error::LossDomain { .. })));
    }

    #[test]
    fn counterexample_errors() {
        let d = make_counterexample(0.05).unwrap();
        let m = mean_label_feature(&d);
        assert_eq!(misclassification_error(&d, &m), 0.5);
        let d2 = make_counterexample(0.2).unwrap();
        let m2 = mean_label_feature(&d2);
        assert_abs_diff_eq!(m2[1], 0.044_948_974_278_317_79, epsilon = 1e-15);
        assert_eq!(misclassification_error(&d2, &m2), 0.0);
        assert_eq!(misclassification_error(&d, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn robustness_on_counterexample() {
        for (gamma, expected) in [(0.05, 0.5), (0.2, 0.0)] {
            let d = make_counterexample(gamma).unwrap();
            for eta in [0.05, 0.25, 0.45] {
                let rep = check_rcn_robustness(&d, &Loss::Unhinged, 1.0, eta, &MinimizerKind::ClosedForm).unwrap();
                assert!(rep.robust);
                assert_eq!(rep.clean_fit_error, expected);
                assert_eq!(rep.noisy_fit_error, expected);
                assert!(rep.minimizer_drift <= 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_needs_unhinged() {
        let d = make_counterexample(0.05).unwrap();
        assert!(check_rcn_robustness(&d, &Loss::Logistic, 1.0, 0.1, &MinimizerKind::ClosedForm).is_err());
        assert!(check_rcn_robustness(&d, &Loss::Unhinged, 1.0, 0.5, &MinimizerKind::ClosedForm).is_err());
    }

    #[test]
    fn slope_identity_examples() {
        let d = make_counterexample(0.05).unwrap();
        assert_eq!(slope_identity_residual(&d, 0.3, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(slope_identity_residual(&d, 0.1, &[1.0, 0.0]).unwrap() <= 1e-12);
        let noisy = d.corrupt(0.1).unwrap();
        assert_abs_diff_eq!(expected_loss(&noisy, &Loss::Unhinged, &[1.0, 0.0]).unwrap(), 0.77, epsilon = 1e-15);
    }

    #[test]
    fn probe_single_atom_closed_form() {
        // e^{1024} is outside the exponential's domain, so stop the grid at 512
        let grid: Vec<f64> = default_lambda_grid().into_iter().filter(|&l| l <= 512.0).collect();
        let probe = recession_probe(&e1(), &Loss::Exponential, 0.25, &[0.0], &[1.0], &grid).unwrap();
        for (i, &l) in probe.lambdas.iter().enumerate() {
            let value = 0.25 * l.exp() + 0.75 * (-l).exp();
            assert!((probe.values[i] - value).abs() <= 1e-12 * value.max(1.0));
            assert_abs_diff_eq!(probe.lower_bounds[i], 0.25 * (1.0 + l), epsilon = 1e-12);
        }
        assert!(probe.bound_holds && probe.eventually_increasing);
        assert!(matches!(
            recession_probe(&e1(), &Loss::Exponential, 0.25, &[0.0], &[1.0], &default_lambda_grid()),
            Err(Error::LossDomain { .. })
        ));
        // at the origin the bound is eta * phi(0), strictly below phi(0)
        assert_eq!(probe.values[0], 1.0);
        assert_eq!(probe.lower_bounds[0], 0.25);
    }

    #[test]
    fn probe_counterexample_logistic_grows() {
        let d = make_counterexample(0.05).unwrap();
        let m = mean_label_feature(&d);
        let n = norm2(&m);
        let u: Vec<f64> = m.iter().map(|c| c / n).collect();
        let probe = recession_probe(&d, &Loss::Logistic, 0.1, &[0.0, 0.0], &u, &default_lambda_grid()).unwrap();
        assert!(probe.bound_holds && probe.eventually_increasing);
    }

    #[test]
    fn probe_preconditions() {
        let d = DiscreteDistribution::new([(LabeledPoint::positive(vec![1.0, 0.0]).unwrap(), 1.0)]).unwrap();
        let grid = default_lambda_grid();
        assert!(matches!(
            recession_probe(&d, &Loss::Logistic, 0.1, &[0.0, 0.0], &[0.0, 1.0], &grid),
            Err(Error::FlatDirection)
        ));
        assert!(matches!(
            recession_probe(&d, &Loss::Unhinged, 0.1, &[0.0, 0.0], &[1.0, 0.0], &grid),
            Err(Error::NotConvexPotential(_))
        ));
        assert!(recession_probe(&d, &Loss::Logistic, 0.1, &[0.0, 0.0], &[2.0, 0.0], &grid).is_err());
        assert!(recession_probe(&d, &Loss::Logistic, 0.1, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(recession_probe(&d, &Loss::Logistic, 0.0, &[0.0, 0.0], &[1.0, 0.0], &grid).is_err());
    }

    #[test]
    fn lambda_grid() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 13);
        assert_eq!(g[..3], [0.0, 0.5, 1.0]);
        assert_eq!(*g.last().unwrap(), 1024.0);
    }
}
