//! Minimizers of the expected potential `P(v) = E[phi(y (v . x))]` over the
//! Euclidean ball `||v||_2 <= r`.

use serde::{Deserialize, Serialize};

use crate::distributions::{mean_label_feature, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::loss_zoo::Potential;
use crate::vector::{dot, norm2, project_to_ball};

/// Centroids with Euclidean norm at or below this are treated as zero.
pub const DEGENERATE_CENTROID: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub v: Vec<f64>,
    /// Radius of the ball the vector was fit under; `None` for unconstrained runs.
    pub r: Option<f64>,
}

impl WeightVector {
    pub fn bounded(v: Vec<f64>, r: f64) -> Self {
        Self { v, r: Some(r) }
    }

    pub fn unbounded(v: Vec<f64>) -> Self {
        Self { v, r: None }
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub weights: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm_final: f64,
    /// Set when `E[y x] = 0`: every point of the ball minimizes the unhinged loss.
    pub degenerate_centroid: bool,
}

impl FitResult {
    pub fn v(&self) -> &[f64] {
        &self.weights.v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

fn validate_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRadius(r))
    }
}

/// Closed-form minimizer of the unhinged loss on the radius-`r` ball.
///
/// `E[1 - y (v . x)] = 1 - v . m` with `m = E[y x]`, so the minimizer is the
/// boundary point `r m / ||m||` (the nearest-centroid direction) with
/// objective `1 - r ||m||`.
pub fn unhinged_minimizer(dist: &DiscreteDistribution, r: f64) -> Result<FitResult> {
    validate_radius(r)?;
    let m = mean_label_feature(dist);
    let norm = norm2(&m);
    if norm <= DEGENERATE_CENTROID {
        return Ok(FitResult {
            weights: WeightVector::bounded(vec![0.0; dist.dim()], r),
            objective: 1.0,
            iterations: 0,
            converged: true,
            gradient_norm_final: norm,
            degenerate_centroid: true,
        });
    }
    let v: Vec<f64> = m.iter().map(|c| r * c / norm).collect();
    Ok(FitResult {
        weights: WeightVector::bounded(v, r),
        objective: 1.0 - r * norm,
        iterations: 0,
        converged: true,
        gradient_norm_final: 0.0,
        degenerate_centroid: false,
    })
}

/// Settings for [`pgd_minimizer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the projected-gradient norm falls to this value.
    pub tolerance: f64,
}

impl PgdConfig {
    pub const DEFAULT_MAX_ITERS: usize = 50_000;
    pub const DEFAULT_TOLERANCE: f64 = 1e-9;

    /// Step `0.1 / (1 + E||x||^2)` with the default budget and tolerance.
    pub fn for_distribution(dist: &DiscreteDistribution) -> Self {
        let second_moment: f64 = dist.atoms().iter().map(|a| a.weight * dot(a.point.x(), a.point.x())).sum();
        Self {
            step: 0.1 / (1.0 + second_moment),
            max_iters: Self::DEFAULT_MAX_ITERS,
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }
}

/// Objective and gradient `sum_i p_i phi'(y_i v.x_i) y_i x_i` in one pass.
pub fn objective_and_gradient(dist: &DiscreteDistribution, phi: &dyn Potential, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    dist.check_dim(v)?;
    let mut objective = 0.0;
    let mut grad = vec![0.0; dist.dim()];
    for (i, atom) in dist.atoms().iter().enumerate() {
        let z = atom.point.margin(v);
        let non_finite = |_| Error::NonFiniteGradient { atom: i, margin: z, loss: phi.name().to_string() };
        let value = phi.checked_value(z).map_err(non_finite)?;
        let slope = phi.checked_derivative(z).map_err(non_finite)?;
        objective += atom.weight * value;
        let c = atom.weight * slope * atom.point.y().sign();
        for (g, x) in grad.iter_mut().zip(atom.point.x()) {
            *g += c * x;
        }
    }
    Ok((objective, grad))
}

/// First-order stationarity measure on the ball: the norm of the gradient
/// with its outward radial part removed when `v` sits on the boundary.
pub fn projected_gradient_norm(v: &[f64], grad: &[f64], r: f64) -> f64 {
    let nv = norm2(v);
    // boundary within rounding of the projection
    if nv >= r * (1.0 - 1e-12) && nv > 0.0 {
        let radial = dot(grad, v) / nv;
        if radial < 0.0 {
            return grad
                .iter()
                .zip(v)
                .map(|(g, x)| {
                    let t = g - radial * x / nv;
                    t * t
                })
                .sum::<f64>()
                .sqrt();
        }
    }
    norm2(grad)
}

/// Numerical estimate of `E[||x||^2] * max |phi''|` over the margins the
/// ball can produce. Steps below `1 / L` give monotone descent.
pub fn curvature_bound(dist: &DiscreteDistribution, phi: &dyn Potential, r: f64) -> f64 {
    let max_norm = dist.atoms().iter().map(|a| norm2(a.point.x())).fold(0.0, f64::max);
    let reach = (r * max_norm).max(1e-3);
    let h = 1e-4;
    let points = 2001;
    let mut max_curv: f64 = 0.0;
    for k in 0..points {
        let z = -reach + 2.0 * reach * k as f64 / (points - 1) as f64;
        let c = (phi.derivative(z + h) - phi.derivative(z - h)) / (2.0 * h);
        if c.is_finite() {
            max_curv = max_curv.max(c.abs());
        }
    }
    let second_moment: f64 = dist.atoms().iter().map(|a| a.weight * dot(a.point.x(), a.point.x())).sum();
    second_moment * max_curv
}

/// Projected gradient descent from `v = 0`; returns the best iterate seen.
pub fn pgd_minimizer(dist: &DiscreteDistribution, phi: &dyn Potential, r: f64, cfg: &PgdConfig) -> Result<FitResult> {
    pgd_minimizer_traced(dist, phi, r, cfg, |_, _| {})
}

/// As [`pgd_minimizer`], calling `observe(iteration, objective)` for every
/// iterate including the starting point.
pub fn pgd_minimizer_traced(
    dist: &DiscreteDistribution,
    phi: &dyn Potential,
    r: f64,
    cfg: &PgdConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<FitResult> {
    validate_radius(r)?;
    if cfg.max_iters == 0 || !(cfg.step >= 0.0) || !(cfg.tolerance >= 0.0) {
        return Err(Error::InvalidConfig(format!("bad descent settings {cfg:?}")));
    }
    let mut v = vec![0.0; dist.dim()];
    let (mut objective, mut grad) = objective_and_gradient(dist, phi, &v)?;
    observe(0, objective);
    let mut best = (v.clone(), objective, projected_gradient_norm(&v, &grad, r));
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if projected_gradient_norm(&v, &grad, r) <= cfg.tolerance {
            break;
        }
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi -= cfg.step * gi;
        }
        project_to_ball(&mut v, r);
        iterations += 1;
        (objective, grad) = objective_and_gradient(dist, phi, &v)?;
        observe(iterations, objective);
        if objective <= best.1 {
            best = (v.clone(), objective, projected_gradient_norm(&v, &grad, r));
        }
    }

    let (v, objective, gradient_norm_final) = best;
    Ok(FitResult {
        weights: WeightVector::bounded(v, r),
        objective,
        iterations,
        converged: gradient_norm_final <= cfg.tolerance,
        gradient_norm_final,
        degenerate_centroid: false,
    })
}
