//! Experiment runners. Each one only composes library calls; every number
//! it reports can be recomputed by calling those functions directly.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use unhinged::analysis::{
    check_rcn_robustness, default_lambda_grid, recession_probe, MinimizerKind, RayProbe, RobustnessReport,
};
use unhinged::distributions::{counterexample_points, make_counterexample, DiscreteDistribution, Label, LabeledPoint};
use unhinged::dynamics::{
    cd_unhinged, closed_form_residual, gd_unhinged, CdConfig, CoordinateStep, TieRule, Trajectory,
};
use unhinged::loss_zoo::{check_convex_potential, default_grid, AxiomClass, Loss, Potential};
use unhinged::minimizers::unhinged_minimizer;
use unhinged::random::{self, InstanceShape};
use unhinged::vector::{dot, norm2};
use unhinged::{Error, Result};

use crate::config::{DynamicsMode, ExperimentConfig, GridSpec};

/// Every gamma below this bound is expected to give clean error 1/2.
pub const SMALL_GAMMA_BOUND: f64 = 0.0901;
/// Bisection stops once the bracket is this narrow.
pub const THRESHOLD_BRACKET: f64 = 1e-9;

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub parameter: String,
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub clean_error: f64,
    pub noisy_fit_error: f64,
    pub objective: f64,
    pub minimizer_drift: f64,
    pub robust: bool,
    pub degenerate: bool,
    pub stationary: bool,
    /// `v . x3` for the heavy atom of the three-atom distribution.
    pub v_dot_x3: Option<f64>,
}

impl SweepRecord {
    fn from_report(parameter: &str, value: f64, rep: &RobustnessReport, v_dot_x3: Option<f64>) -> Self {
        Self {
            parameter: parameter.to_string(),
            value,
            minimizer: rep.minimizer_clean.v.clone(),
            clean_error: rep.clean_fit_error,
            noisy_fit_error: rep.noisy_fit_error,
            objective: rep.objective_clean,
            minimizer_drift: rep.minimizer_drift,
            robust: rep.robust,
            degenerate: rep.degenerate_centroid,
            stationary: false,
            v_dot_x3,
        }
    }
}

/// `v . x3` where `v` is the unhinged minimizer of the three-atom distribution.
pub fn heavy_atom_score(gamma: f64, r: f64) -> Result<f64> {
    let dist = make_counterexample(gamma)?;
    let fit = unhinged_minimizer(&dist, r)?;
    Ok(dot(fit.v(), &counterexample_points(gamma)[2]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSweep {
    pub r: f64,
    pub eta: f64,
    pub records: Vec<SweepRecord>,
    /// Where `v . x3` changes sign, if the grid brackets a crossing.
    pub threshold: Option<f64>,
    pub claim_holds: bool,
}

/// Bisects the sign change of `v . x3` inside `[lo, hi]`.
pub fn bisect_threshold(mut lo: f64, mut hi: f64, r: f64) -> Result<f64> {
    let mut f_lo = heavy_atom_score(lo, r)?;
    while hi - lo > THRESHOLD_BRACKET {
        let mid = 0.5 * (lo + hi);
        let f_mid = heavy_atom_score(mid, r)?;
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<GammaSweep> {
    let grid = cfg.grid.unwrap_or(GridSpec::linear(0.01, 0.3, 30)).values()?;
    if grid.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(Error::InvalidGamma(*grid.iter().find(|&&g| !(g > 0.0 && g < 1.0)).unwrap()));
    }
    let r = cfg.r()?;
    let eta = cfg.eta_or(0.1)?;
    let records = grid
        .par_iter()
        .map(|&gamma| {
            let dist = make_counterexample(gamma)?;
            let rep = check_rcn_robustness(&dist, &Loss::Unhinged, r, eta, &MinimizerKind::ClosedForm)?;
            let score = dot(&rep.minimizer_clean.v, &counterexample_points(gamma)[2]);
            Ok(SweepRecord::from_report("gamma", gamma, &rep, Some(score)))
        })
        .collect::<Result<Vec<_>>>()?;

    let crossing = records.windows(2).find(|w| {
        let (a, b) = (w[0].v_dot_x3.unwrap(), w[1].v_dot_x3.unwrap());
        (a < 0.0) != (b < 0.0)
    });
    let threshold = match crossing {
        Some(w) => Some(bisect_threshold(w[0].value, w[1].value, r)?),
        None => None,
    };
    let claim_holds = threshold.is_some_and(|t| {
        t > SMALL_GAMMA_BOUND
            && records.iter().all(|rec| {
                let expected = if rec.value < t { 0.5 } else { 0.0 };
                rec.clean_error == expected && rec.noisy_fit_error == expected && rec.robust
            })
    });
    Ok(GammaSweep { r, eta, records, threshold, claim_holds })
}

/// Distribution named by the config: a CSV file or the three-atom builtin.
pub fn configured_distribution(cfg: &ExperimentConfig) -> Result<DiscreteDistribution> {
    match &cfg.distribution {
        Some(path) => DiscreteDistribution::load(path),
        None => make_counterexample(cfg.gamma()),
    }
}

fn configured_loss(cfg: &ExperimentConfig, default: Loss) -> Result<Loss> {
    cfg.loss.as_deref().map_or(Ok(default), str::parse)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSweep {
    pub loss: String,
    pub r: f64,
    pub records: Vec<SweepRecord>,
    /// Only the unhinged loss carries a robustness claim; other losses pass vacuously.
    pub claim_holds: bool,
}

pub fn run_eta_sweep(cfg: &ExperimentConfig) -> Result<EtaSweep> {
    let grid = cfg.grid.unwrap_or(GridSpec::linear(0.05, 0.45, 9)).values()?;
    if let Some(&bad) = grid.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        return Err(Error::InvalidNoiseRate(bad));
    }
    let loss = configured_loss(cfg, Loss::Unhinged)?;
    let r = cfg.r()?;
    let dist = configured_distribution(cfg)?;
    let kind = MinimizerKind::default_for(&loss, &dist);
    let records = grid
        .par_iter()
        .map(|&eta| {
            let rep = check_rcn_robustness(&dist, &loss, r, eta, &kind)?;
            Ok(SweepRecord::from_report("eta", eta, &rep, None))
        })
        .collect::<Result<Vec<_>>>()?;
    let claim_holds = loss != Loss::Unhinged
        || records.iter().all(|rec| {
            rec.robust
                && rec.minimizer_drift <= 1e-12
                && rec.clean_error == records[0].clean_error
                && rec.noisy_fit_error == records[0].noisy_fit_error
        });
    Ok(EtaSweep { loss: loss.to_string(), r, records, claim_holds })
}

/// Reads `x1,...,xd,y` (an extra trailing `weight` column is ignored).
pub fn load_sample(path: &Path) -> Result<Vec<LabeledPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::InvalidConfig("sample CSV needs a `y` column".into()))?;
    if y_col == 0 {
        return Err(Error::InvalidConfig("sample CSV needs feature columns before `y`".into()));
    }
    let mut sample = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("`{s}`: {e}")));
        let x = (0..y_col).map(|i| parse(&record[i])).collect::<Result<Vec<_>>>()?;
        let y = Label::try_from(parse(&record[y_col])?)?;
        sample.push(LabeledPoint::new(x, y)?);
    }
    if sample.is_empty() {
        return Err(Error::Empty);
    }
    Ok(sample)
}

pub fn builtin_sample(name: &str, gamma: f64) -> Result<Vec<LabeledPoint>> {
    match name {
        "counterexample" => {
            make_counterexample(gamma)?;
            counterexample_points(gamma).iter().map(|x| LabeledPoint::positive(x.to_vec())).collect()
        }
        // label-weighted sum (1, 1): both coordinates tie
        "tie" => Ok(vec![LabeledPoint::positive(vec![1.0, 0.0])?, LabeledPoint::positive(vec![0.0, 1.0])?]),
        other => {
            Err(Error::InvalidConfig(format!("unknown builtin sample `{other}`; expected `counterexample` or `tie`")))
        }
    }
}

pub fn configured_sample(cfg: &ExperimentConfig) -> Result<Vec<LabeledPoint>> {
    match (&cfg.sample, &cfg.builtin_sample) {
        (Some(path), None) => load_sample(path),
        (None, name) => builtin_sample(name.as_deref().unwrap_or("counterexample"), cfg.gamma()),
        (Some(_), Some(_)) => Err(Error::InvalidConfig("give either `sample` or `builtin_sample`".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSummary {
    pub mode: DynamicsMode,
    pub rounds: usize,
    pub target: Vec<f64>,
    pub stationary: bool,
    /// GD only: `max_t ||v_t - (v0 + step t g)||_inf`.
    pub closed_form_residual: Option<f64>,
    pub final_angle: Option<f64>,
    /// CD only.
    pub support_in_argmax: Option<bool>,
    pub chosen_coordinates: Vec<usize>,
    pub logged_argmax: Vec<usize>,
    pub claim_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRun {
    pub trajectory: Trajectory,
    pub log: Option<Vec<CoordinateStep>>,
    pub summary: DynamicsSummary,
}

/// Allowed gap between the iterated and closed-form GD trajectories.
pub const GD_RESIDUAL_TOLERANCE: f64 = 1e-12;

pub fn run_dynamics(cfg: &ExperimentConfig, mode: DynamicsMode) -> Result<DynamicsRun> {
    let sample = configured_sample(cfg)?;
    let d = sample[0].dim();
    match mode {
        DynamicsMode::Gd => {
            let v0 = cfg.v0.clone().unwrap_or_else(|| vec![0.0; d]);
            let traj = gd_unhinged(&sample, &v0, cfg.step.unwrap_or(0.01), cfg.iterations.unwrap_or(1000))?;
            let residual = closed_form_residual(&traj);
            let from_origin = v0.iter().all(|&c| c == 0.0);
            // from the origin every later iterate lies on the ray through g
            let on_ray = !from_origin
                || traj.stationary
                || traj.angles_to_target[1..].iter().all(|a| a.is_some_and(|a| a <= 1e-12));
            let summary = DynamicsSummary {
                mode,
                rounds: traj.rounds(),
                target: traj.target.clone(),
                stationary: traj.stationary,
                closed_form_residual: Some(residual),
                final_angle: *traj.angles_to_target.last().unwrap(),
                support_in_argmax: None,
                chosen_coordinates: Vec::new(),
                logged_argmax: Vec::new(),
                claim_holds: residual <= GD_RESIDUAL_TOLERANCE && on_ray,
            };
            Ok(DynamicsRun { trajectory: traj, log: None, summary })
        }
        DynamicsMode::Cd => {
            let cd = CdConfig {
                rounds: cfg.iterations.unwrap_or(100),
                tie_rule: cfg.tie_rule.unwrap_or(TieRule::LowestIndex),
                step_length: cfg.step.unwrap_or(1.0),
            };
            let run = cd_unhinged(&sample, &cd)?;
            let support = run.support_in_argmax();
            let chosen: BTreeSet<usize> = run.log.iter().map(|s| s.coordinate).collect();
            let logged: BTreeSet<usize> = run.log.iter().flat_map(|s| s.argmax_abs.iter().copied()).collect();
            let summary = DynamicsSummary {
                mode,
                rounds: run.trajectory.rounds(),
                target: run.trajectory.target.clone(),
                stationary: run.trajectory.stationary,
                closed_form_residual: None,
                final_angle: *run.trajectory.angles_to_target.last().unwrap(),
                support_in_argmax: Some(support),
                chosen_coordinates: chosen.iter().copied().collect(),
                logged_argmax: logged.into_iter().collect(),
                claim_holds: support && chosen.len() <= 1,
            };
            Ok(DynamicsRun { trajectory: run.trajectory, log: Some(run.log), summary })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub loss: String,
    pub reference: String,
    pub satisfies_convex_potential: bool,
    pub failing_clause: Option<String>,
    pub witness_z: Option<f64>,
    pub witness_value: Option<f64>,
    /// Verdict agrees with the loss's declared axiom class.
    pub matches_declared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub rows: Vec<LossRow>,
    pub claim_holds: bool,
}

impl LossReport {
    /// Plain-text three-column table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<26} {:<27} {}\n", "potential", "reference", "convex potential?");
        for row in &self.rows {
            let verdict = if row.satisfies_convex_potential {
                "Yes".to_string()
            } else {
                format!(
                    "No ({} fails at z = {}, witness {})",
                    row.failing_clause.as_deref().unwrap_or("?"),
                    row.witness_z.map_or("-".into(), |z| z.to_string()),
                    row.witness_value.map_or("-".into(), |v| v.to_string()),
                )
            };
            out.push_str(&format!("{:<26} {:<27} {}\n", row.loss, row.reference, verdict));
        }
        out
    }
}

pub fn run_loss_report() -> Result<LossReport> {
    let grid = default_grid();
    let rows = Loss::ALL
        .iter()
        .map(|&loss| {
            let report = check_convex_potential(&loss, &grid)?;
            let failure = report.first_failure();
            let pass = report.passes();
            Ok(LossRow {
                loss: loss.to_string(),
                reference: loss.reference().to_string(),
                satisfies_convex_potential: pass,
                failing_clause: failure.map(|c| c.name.clone()),
                witness_z: failure.and_then(|c| c.witness_z),
                witness_value: failure.and_then(|c| c.witness_value),
                matches_declared: pass == (loss.axiom_class() == AxiomClass::ConvexPotential),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let claim_holds = rows.iter().all(|r| r.matches_declared);
    Ok(LossReport { rows, claim_holds })
}

/// One randomized robustness trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustTrial {
    pub trial: usize,
    pub dim: usize,
    pub atoms: usize,
    pub eta: f64,
    pub clean_fit_error: f64,
    pub noisy_fit_error: f64,
    pub minimizer_drift: f64,
    pub robust: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobustCheck {
    Single(RobustnessReport),
    Campaign { loss: String, trials: Vec<RobustTrial> },
}

impl RobustCheck {
    pub fn claim_holds(&self) -> bool {
        match self {
            RobustCheck::Single(rep) => rep.loss != "unhinged" || rep.robust,
            RobustCheck::Campaign { loss, trials } => {
                loss != "unhinged" || trials.iter().all(|t| t.robust && t.minimizer_drift <= 1e-12)
            }
        }
    }
}

fn campaign_instances<T: Send>(
    cfg: &ExperimentConfig,
    trials: usize,
    shape: InstanceShape,
    f: impl Fn(usize, DiscreteDistribution, &mut random::InstanceRng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    // instance i is drawn from its own stream so rows do not depend on scheduling
    let seed = cfg.seed.unwrap_or(0);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let dist = random::distribution(&mut rng, &shape);
            f(i, dist, &mut rng)
        })
        .collect()
}

pub fn run_robust_check(cfg: &ExperimentConfig) -> Result<RobustCheck> {
    let loss = configured_loss(cfg, Loss::Unhinged)?;
    let r = cfg.r()?;
    match cfg.trials.unwrap_or(0) {
        0 => {
            let dist = configured_distribution(cfg)?;
            let kind = MinimizerKind::default_for(&loss, &dist);
            Ok(RobustCheck::Single(check_rcn_robustness(&dist, &loss, r, cfg.eta_or(0.1)?, &kind)?))
        }
        n => {
            let fixed_eta = cfg.eta.map(|_| cfg.eta_or(0.1)).transpose()?;
            let trials = campaign_instances(cfg, n, InstanceShape::default(), |i, dist, rng| {
                let eta = fixed_eta.unwrap_or_else(|| 0.05 * rng.gen_range(1..=9) as f64);
                let kind = MinimizerKind::default_for(&loss, &dist);
                let rep = check_rcn_robustness(&dist, &loss, r, eta, &kind)?;
                Ok(RobustTrial {
                    trial: i,
                    dim: dist.dim(),
                    atoms: dist.len(),
                    eta,
                    clean_fit_error: rep.clean_fit_error,
                    noisy_fit_error: rep.noisy_fit_error,
                    minimizer_drift: rep.minimizer_drift,
                    robust: rep.robust,
                    degenerate: rep.degenerate_centroid,
                })
            })?;
            Ok(RobustCheck::Campaign { loss: loss.to_string(), trials })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrial {
    pub trial: usize,
    pub loss: String,
    pub dim: usize,
    pub atoms: usize,
    pub eta: f64,
    pub min_slack: f64,
    pub bound_holds: bool,
    pub eventually_increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeCheck {
    Single(RayProbe),
    Campaign(Vec<ProbeTrial>),
}

impl ProbeCheck {
    pub fn claim_holds(&self) -> bool {
        match self {
            ProbeCheck::Single(p) => p.bound_holds && p.eventually_increasing,
            ProbeCheck::Campaign(rows) => rows.iter().all(|t| t.bound_holds && t.eventually_increasing),
        }
    }
}

/// Random probe instances keep features within this radius so that
/// `|margin| <= 1024 * 0.6 + 0.5` stays inside the exponential's domain.
pub const PROBE_FEATURE_RADIUS: f64 = 0.6;

pub fn run_recession_probe(cfg: &ExperimentConfig) -> Result<ProbeCheck> {
    let lambdas = cfg.lambdas.clone().unwrap_or_else(default_lambda_grid);
    match cfg.trials.unwrap_or(0) {
        0 => {
            let loss = configured_loss(cfg, Loss::Logistic)?;
            let dist = configured_distribution(cfg)?;
            let eta = cfg.eta_or(0.1)?;
            let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; dist.dim()]);
            let u = match &cfg.direction {
                Some(u) => u.clone(),
                None => {
                    let m = dist.mean_label_feature();
                    let n = norm2(&m);
                    if n == 0.0 {
                        return Err(Error::InvalidConfig("centroid is zero; give an explicit direction".into()));
                    }
                    m.iter().map(|c| c / n).collect()
                }
            };
            Ok(ProbeCheck::Single(recession_probe(&dist, &loss, eta, &x0, &u, &lambdas)?))
        }
        n => {
            let losses: Vec<Loss> = match &cfg.loss {
                Some(name) => vec![name.parse()?],
                None => vec![Loss::Exponential, Loss::MixedLinearExponential, Loss::Logistic],
            };
            let shape = InstanceShape { feature_radius: PROBE_FEATURE_RADIUS, ..Default::default() };
            let fixed_eta = cfg.eta.map(|_| cfg.eta_or(0.1)).transpose()?;
            let nested = campaign_instances(cfg, n, shape, |i, dist, rng| {
                let eta = fixed_eta.unwrap_or_else(|| rng.gen_range(0.01..0.49));
                let x0 = random::point_in_ball(rng, dist.dim(), 0.5);
                let u = random::unit_vector(rng, dist.dim());
                losses
                    .iter()
                    .map(|loss| {
                        let p = recession_probe(&dist, loss, eta, &x0, &u, &lambdas)?;
                        Ok(ProbeTrial {
                            trial: i,
                            loss: loss.to_string(),
                            dim: dist.dim(),
                            atoms: dist.len(),
                            eta,
                            min_slack: p.min_slack,
                            bound_holds: p.bound_holds,
                            eventually_increasing: p.eventually_increasing,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(ProbeCheck::Campaign(nested.into_iter().flatten().collect()))
        }
    }
}
