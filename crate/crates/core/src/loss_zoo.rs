//! Margin-based potential functions and executable checks of the
//! convex-potential axioms.
//!
//! A potential `phi` scores a margin `z = y (v . x)`. The two axiom sets are:
//!
//! * **convex potential**: `phi` is C1, convex, nonincreasing, `phi'(0) < 0`
//!   and `phi(z) -> 0` as `z -> inf` (so `phi >= 0`);
//! * **relaxed convex potential**: the same without the limit clause, so the
//!   loss may go arbitrarily negative.
//!
//! The limit clause cannot be decided from finitely many evaluations. It is
//! checked through a proxy: `phi(z_max) < 1e-6` and `phi >= -1e-12` on the grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this margin `e^{-z}` is treated as out of domain (it overflows near -709).
pub const EXP_DOMAIN_MIN: f64 = -700.0;

const FD_STEP: f64 = 1e-6;
const CONVEXITY_SLACK: f64 = 1e-12;
const MONOTONE_SLACK: f64 = 1e-12;
const LIMIT_THRESHOLD: f64 = 1e-6;
const NONNEGATIVE_SLACK: f64 = 1e-12;
/// Relative tolerance on the gap between one-sided difference quotients.
const C1_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomClass {
    ConvexPotential,
    RelaxedOnly,
    Neither,
}

/// A scalar margin loss with its derivative.
///
/// Implementations must be pure; values are shared freely across threads.
pub trait Potential: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, z: f64) -> f64;

    /// Derivative, or a fixed subgradient where the loss has a kink.
    fn derivative(&self, z: f64) -> f64;

    fn axiom_class(&self) -> AxiomClass;

    /// The shipped loss this potential is, if any.
    fn as_loss(&self) -> Option<Loss> {
        None
    }

    fn checked_value(&self, z: f64) -> Result<f64> {
        let v = self.value(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::LossDomain { loss: self.name().to_string(), z })
        }
    }

    fn checked_derivative(&self, z: f64) -> Result<f64> {
        let d = self.derivative(z);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::LossDomain { loss: self.name().to_string(), z })
        }
    }
}

/// The five potentials of the classic boosting / margin literature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `e^{-z}` (AdaBoost).
    Exponential,
    /// `1 - z` for `z <= 0`, `e^{-z}` for `z > 0` (MadaBoost).
    MixedLinearExponential,
    /// `ln(1 + e^{-2z})` (LogitBoost).
    Logistic,
    /// `max(0, 1 - z)`.
    Hinge,
    /// `1 - z`.
    Unhinged,
}

impl Loss {
    pub const ALL: [Loss; 5] =
        [Loss::Exponential, Loss::MixedLinearExponential, Loss::Logistic, Loss::Hinge, Loss::Unhinged];

    pub const NAMES: [&'static str; 5] = ["exponential", "mixed_linear_exponential", "logistic", "hinge", "unhinged"];

    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Exponential => "exponential",
            Loss::MixedLinearExponential => "mixed_linear_exponential",
            Loss::Logistic => "logistic",
            Loss::Hinge => "hinge",
            Loss::Unhinged => "unhinged",
        }
    }

    /// Boosting algorithm / method the potential is associated with.
    pub fn reference(self) -> &'static str {
        match self {
            Loss::Exponential => "AdaBoost",
            Loss::MixedLinearExponential => "MadaBoost",
            Loss::Logistic => "LogitBoost",
            Loss::Hinge => "linear hinge loss",
            Loss::Unhinged => "unhinged (symmetric) loss",
        }
    }

    /// Points where the loss is not differentiable.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Loss::Hinge => &[1.0],
            _ => &[],
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(Loss::Exponential),
            "mixed_linear_exponential" | "mixed" => Ok(Loss::MixedLinearExponential),
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            "unhinged" => Ok(Loss::Unhinged),
            _ => Err(Error::UnknownLoss { name: s.to_string(), valid: Loss::NAMES.to_vec() }),
        }
    }
}

/// Looks up a shipped loss by name.
pub fn make_loss(name: &str) -> Result<Loss> {
    name.parse()
}

impl Potential for Loss {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn value(&self, z: f64) -> f64 {
        match self {
            Loss::Exponential => {
                if z < EXP_DOMAIN_MIN {
                    f64::INFINITY
                } else {
                    (-z).exp()
                }
            }
            Loss::MixedLinearExponential => {
                if z <= 0.0 {
                    1.0 - z
                } else {
                    (-z).exp()
                }
            }
            Loss::Logistic => {
                // ln(1 + e^t) with t = -2z, split so exp never overflows
                let t = -2.0 * z;
                if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
            Loss::Hinge => (1.0 - z).max(0.0),
            Loss::Unhinged => 1.0 - z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Loss::Exponential => {
                if z < EXP_DOMAIN_MIN {
                    f64::NEG_INFINITY
                } else {
                    -(-z).exp()
                }
            }
            Loss::MixedLinearExponential => {
                if z <= 0.0 {
                    -1.0
                } else {
                    -(-z).exp()
                }
            }
            Loss::Logistic => {
                if z >= 0.0 {
                    let e = (-2.0 * z).exp();
                    -2.0 * e / (1.0 + e)
                } else {
                    -2.0 / (1.0 + (2.0 * z).exp())
                }
            }
            // left derivative at the kink
            Loss::Hinge => {
                if z <= 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Unhinged => -1.0,
        }
    }

    fn axiom_class(&self) -> AxiomClass {
        match self {
            Loss::Exponential | Loss::MixedLinearExponential | Loss::Logistic => AxiomClass::ConvexPotential,
            Loss::Hinge => AxiomClass::Neither,
            Loss::Unhinged => AxiomClass::RelaxedOnly,
        }
    }

    fn as_loss(&self) -> Option<Loss> {
        Some(*self)
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied potential built from closures.
pub struct CustomPotential {
    name: String,
    value: ScalarFn,
    derivative: ScalarFn,
    class: AxiomClass,
}

impl CustomPotential {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        class: AxiomClass,
    ) -> Self {
        Self { name: name.into(), value: Box::new(value), derivative: Box::new(derivative), class }
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential").field("name", &self.name).field("class", &self.class).finish_non_exhaustive()
    }
}

impl Potential for CustomPotential {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }
    fn derivative(&self, z: f64) -> f64 {
        (self.derivative)(z)
    }
    fn axiom_class(&self) -> AxiomClass {
        self.class
    }
}

/// Which axiom set a report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomSet {
    ConvexPotential,
    RelaxedConvexPotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub name: String,
    pub pass: bool,
    /// Where the clause was decided: the first violation for failures, the
    /// decisive evaluation point for the pointwise clauses.
    pub witness_z: Option<f64>,
    pub witness_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub loss: String,
    pub axioms: AxiomSet,
    pub checks: Vec<ClauseCheck>,
}

impl AxiomReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&ClauseCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// First failing clause, in report order.
    pub fn first_failure(&self) -> Option<&ClauseCheck> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const CLAUSE_CONVEX: &str = "convex";
pub const CLAUSE_NONINCREASING: &str = "nonincreasing";
pub const CLAUSE_C1: &str = "continuously_differentiable";
pub const CLAUSE_SLOPE_AT_ZERO: &str = "negative_slope_at_zero";
pub const CLAUSE_LIMIT: &str = "limit_zero_proxy";

/// 401 evenly spaced points on [-50, 50] (spacing 0.25, includes 0 and 1).
pub fn default_grid() -> Vec<f64> {
    (0..=400).map(|i| -50.0 + 0.25 * i as f64).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 points, got {}", grid.len())));
    }
    if grid.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    if grid[0] > -50.0 || grid[grid.len() - 1] < 50.0 {
        return Err(Error::InvalidGrid("grid must span at least [-50, 50]".into()));
    }
    if !grid.contains(&0.0) {
        return Err(Error::InvalidGrid("grid must contain 0".into()));
    }
    Ok(())
}

fn check_convex(phi: &dyn Potential, grid: &[f64], values: &[f64]) -> ClauseCheck {
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let mid = 0.5 * (grid[i] + grid[j]);
            let at_mid = phi.value(mid);
            let chord = 0.5 * (values[i] + values[j]);
            if !(at_mid <= chord + CONVEXITY_SLACK) {
                return ClauseCheck {
                    name: CLAUSE_CONVEX.into(),
                    pass: false,
                    witness_z: Some(mid),
                    witness_value: Some(at_mid - chord),
                };
            }
        }
    }
    ClauseCheck { name: CLAUSE_CONVEX.into(), pass: true, witness_z: None, witness_value: None }
}

fn check_nonincreasing(grid: &[f64], values: &[f64]) -> ClauseCheck {
    let violation = (1..grid.len()).find(|&i| !(values[i] <= values[i - 1] + MONOTONE_SLACK));
    match violation {
        Some(i) => ClauseCheck {
            name: CLAUSE_NONINCREASING.into(),
            pass: false,
            witness_z: Some(grid[i]),
            witness_value: Some(values[i] - values[i - 1]),
        },
        None => ClauseCheck { name: CLAUSE_NONINCREASING.into(), pass: true, witness_z: None, witness_value: None },
    }
}

/// Compares forward and backward difference quotients at every grid point.
/// A kink shows up as a gap that does not shrink with the step.
fn check_c1(phi: &dyn Potential, grid: &[f64]) -> ClauseCheck {
    for &z in grid {
        let at = phi.value(z);
        let forward = (phi.value(z + FD_STEP) - at) / FD_STEP;
        let backward = (at - phi.value(z - FD_STEP)) / FD_STEP;
        let gap = (forward - backward).abs();
        let scale = 1f64.max(forward.abs()).max(backward.abs());
        if !(gap <= C1_REL_TOL * scale) {
            return ClauseCheck {
                name: CLAUSE_C1.into(),
                pass: false,
                witness_z: Some(z),
                witness_value: Some(forward - backward),
            };
        }
    }
    ClauseCheck { name: CLAUSE_C1.into(), pass: true, witness_z: None, witness_value: None }
}

fn check_slope_at_zero(phi: &dyn Potential) -> ClauseCheck {
    let d0 = phi.derivative(0.0);
    ClauseCheck { name: CLAUSE_SLOPE_AT_ZERO.into(), pass: d0 < 0.0, witness_z: Some(0.0), witness_value: Some(d0) }
}

fn check_limit(grid: &[f64], values: &[f64]) -> ClauseCheck {
    let last = grid.len() - 1;
    let tail = values[last];
    let (witness, pass) = if !(-NONNEGATIVE_SLACK..LIMIT_THRESHOLD).contains(&tail) {
        (last, false)
    } else {
        match values.iter().position(|&v| !(v >= -NONNEGATIVE_SLACK)) {
            Some(i) => (i, false),
            None => (last, true),
        }
    };
    ClauseCheck {
        name: CLAUSE_LIMIT.into(),
        pass,
        witness_z: Some(grid[witness]),
        witness_value: Some(values[witness]),
    }
}

fn relaxed_checks(phi: &dyn Potential, grid: &[f64], values: &[f64]) -> Vec<ClauseCheck> {
    vec![
        check_convex(phi, grid, values),
        check_nonincreasing(grid, values),
        check_c1(phi, grid),
        check_slope_at_zero(phi),
    ]
}

/// Checks the convex-potential axioms on `grid`.
///
/// The limit clause is replaced by the proxy described in the module docs.
/// Note that `phi(z_max)` is reported as the witness of the limit clause,
/// for instance `-49` for the unhinged loss on the default grid.
pub fn check_convex_potential(phi: &dyn Potential, grid: &[f64]) -> Result<AxiomReport> {
    validate_grid(grid)?;
    let values: Vec<f64> = grid.iter().map(|&z| phi.value(z)).collect();
    let mut checks = relaxed_checks(phi, grid, &values);
    checks.push(check_limit(grid, &values));
    Ok(AxiomReport { loss: phi.name().to_string(), axioms: AxiomSet::ConvexPotential, checks })
}

/// Checks the relaxed axioms: everything in [`check_convex_potential`] except the limit.
pub fn check_relaxed_potential(phi: &dyn Potential, grid: &[f64]) -> Result<AxiomReport> {
    validate_grid(grid)?;
    let values: Vec<f64> = grid.iter().map(|&z| phi.value(z)).collect();
    Ok(AxiomReport {
        loss: phi.name().to_string(),
        axioms: AxiomSet::RelaxedConvexPotential,
        checks: relaxed_checks(phi, grid, &values),
    })
}

/// Axiom class implied by running both predicates.
pub fn classify(phi: &dyn Potential, grid: &[f64]) -> Result<AxiomClass> {
    if check_convex_potential(phi, grid)?.passes() {
        Ok(AxiomClass::ConvexPotential)
    } else if check_relaxed_potential(phi, grid)?.passes() {
        Ok(AxiomClass::RelaxedOnly)
    } else {
        Ok(AxiomClass::Neither)
    }
}
