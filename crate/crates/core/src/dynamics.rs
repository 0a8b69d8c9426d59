//! Gradient descent and coordinate descent on the unhinged loss over a
//! finite sample, written in the sum form `L(v) = sum_i (1 - y_i v . x_i)`.
//!
//! The gradient `-g` with `g = sum_i y_i x_i` does not depend on `v`, which
//! pins down the whole trajectory: GD iterates are `v0 + step t g`, and CD
//! keeps picking the same coordinate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::LabeledPoint;
use crate::error::{Error, Result};
use crate::vector::{angle_between, dot, max_abs_diff};

/// `g = sum_i y_i x_i`, the descent direction of the sum-form unhinged loss.
pub fn target_direction(sample: &[LabeledPoint]) -> Result<Vec<f64>> {
    let first = sample.first().ok_or(Error::Empty)?;
    let mut g = vec![0.0; first.dim()];
    for p in sample {
        if p.dim() != g.len() {
            return Err(Error::DimensionMismatch { expected: g.len(), found: p.dim() });
        }
        let s = p.y().sign();
        for (gi, xi) in g.iter_mut().zip(p.x()) {
            *gi += s * xi;
        }
    }
    Ok(g)
}

/// Iterates of a descent run plus per-iterate diagnostics.
///
/// Iterates are stored row-major; `iterate(t)` for `t in 0..=rounds()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    pub step_size: f64,
    iterates: Vec<f64>,
    pub loss_values: Vec<f64>,
    /// Angle to `g` in radians; `None` where the iterate is the origin or `g = 0`.
    pub angles_to_target: Vec<Option<f64>>,
    pub target: Vec<f64>,
    /// True when `g = 0` and every iterate equals the start.
    pub stationary: bool,
}

impl Trajectory {
    fn new(dim: usize, step_size: f64, target: Vec<f64>, capacity: usize) -> Self {
        let stationary = target.iter().all(|&c| c == 0.0);
        Self {
            dim,
            step_size,
            iterates: Vec::with_capacity(capacity * dim),
            loss_values: Vec::with_capacity(capacity),
            angles_to_target: Vec::with_capacity(capacity),
            target,
            stationary,
        }
    }

    fn push(&mut self, v: &[f64], n: f64) {
        self.iterates.extend_from_slice(v);
        // sum_i (1 - y_i v.x_i) = n - v.g
        self.loss_values.push(n - dot(v, &self.target));
        self.angles_to_target.push(angle_between(v, &self.target));
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.loss_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss_values.is_empty()
    }

    /// Number of updates, one less than the number of iterates.
    pub fn rounds(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn iterate(&self, t: usize) -> &[f64] {
        &self.iterates[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iterates(&self) -> impl Iterator<Item = &[f64]> {
        self.iterates.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.iterate(self.rounds())
    }

    /// Writes `t,v_1..v_d,loss,angle_rad,chosen_coord`. `chosen` holds the
    /// coordinate picked in each round (CD only); row `t` shows the
    /// coordinate whose update produced iterate `t`.
    pub fn write_csv<W: Write>(&self, writer: W, chosen: Option<&[CoordinateStep]>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("v_{i}")));
        header.extend(["loss", "angle_rad", "chosen_coord"].map(String::from));
        wtr.write_record(&header)?;
        for (t, v) in self.iterates().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(v.iter().map(|c| c.to_string()));
            row.push(self.loss_values[t].to_string());
            row.push(self.angles_to_target[t].map_or(String::new(), |a| a.to_string()));
            let coord = match (chosen, t) {
                (Some(log), t) if t > 0 => log.get(t - 1).map_or(String::new(), |s| s.coordinate.to_string()),
                _ => String::new(),
            };
            row.push(coord);
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Adds `delta` to `v` with Kahan compensation so that long runs track the
/// exact sum to within a few ulps of its magnitude.
fn compensated_add(v: &mut [f64], comp: &mut [f64], delta: &[f64]) {
    for ((vi, ci), di) in v.iter_mut().zip(comp.iter_mut()).zip(delta) {
        let y = di - *ci;
        let t = *vi + y;
        *ci = (t - *vi) - y;
        *vi = t;
    }
}

/// Runs `iterations` gradient steps `v <- v + step g` from `v0`.
pub fn gd_unhinged(sample: &[LabeledPoint], v0: &[f64], step: f64, iterations: usize) -> Result<Trajectory> {
    let g = target_direction(sample)?;
    if v0.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), found: v0.len() });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {step}")));
    }
    if iterations == 0 {
        return Err(Error::InvalidConfig("need at least one iteration".into()));
    }
    let n = sample.len() as f64;
    let delta: Vec<f64> = g.iter().map(|c| step * c).collect();
    let mut traj = Trajectory::new(g.len(), step, g, iterations + 1);
    let mut v = v0.to_vec();
    let mut comp = vec![0.0; v.len()];
    traj.push(&v, n);
    for _ in 0..iterations {
        compensated_add(&mut v, &mut comp, &delta);
        traj.push(&v, n);
    }
    Ok(traj)
}

/// `max_t ||iterate_t - (v0 + step t g)||_inf`.
pub fn closed_form_residual(traj: &Trajectory) -> f64 {
    let v0 = traj.iterate(0);
    let mut expected = vec![0.0; traj.dim()];
    traj.iterates()
        .enumerate()
        .map(|(t, v)| {
            let scale = traj.step_size * t as f64;
            for ((e, a), g) in expected.iter_mut().zip(v0).zip(&traj.target) {
                *e = a + scale * g;
            }
            max_abs_diff(v, &expected)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Update the lowest tied index and log only it.
    #[default]
    LowestIndex,
    /// Update the lowest tied index but log the whole tied set.
    ReportAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    pub rounds: usize,
    pub tie_rule: TieRule,
    /// Magnitude of each coordinate update.
    pub step_length: f64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self { rounds: 100, tie_rule: TieRule::LowestIndex, step_length: 1.0 }
    }
}

/// One coordinate-descent round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateStep {
    pub coordinate: usize,
    /// `+1` or `-1`: the sign of `g_j`, which is the descent direction.
    pub direction: f64,
    /// `argmax_j |g_j|`, either just the chosen index or the full tied set.
    pub argmax_abs: Vec<usize>,
    /// `argmax_j g_j` (no absolute value), logged for comparison.
    pub argmax_signed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdTrajectory {
    pub trajectory: Trajectory,
    pub log: Vec<CoordinateStep>,
}

impl CdTrajectory {
    /// True when every iterate's nonzero coordinates lie in `argmax_j |g_j|`.
    pub fn support_in_argmax(&self) -> bool {
        let allowed = argmax_by(&self.trajectory.target, f64::abs);
        self.trajectory.iterates().all(|v| v.iter().enumerate().all(|(j, &c)| c == 0.0 || allowed.contains(&j)))
    }
}

fn argmax_by(g: &[f64], key: impl Fn(f64) -> f64) -> Vec<usize> {
    let best = g.iter().map(|&c| key(c)).fold(f64::NEG_INFINITY, f64::max);
    (0..g.len()).filter(|&j| key(g[j]) == best).collect()
}

/// Steepest-descent coordinate descent from the origin.
///
/// Every round moves coordinate `j* in argmax_j |g_j|` by
/// `step_length * sign(g_j*)`. With `g = 0` there is no descent coordinate:
/// the trajectory stays at the origin, the log is empty and the
/// `stationary` flag is set.
pub fn cd_unhinged(sample: &[LabeledPoint], cfg: &CdConfig) -> Result<CdTrajectory> {
    let g = target_direction(sample)?;
    if cfg.rounds == 0 {
        return Err(Error::InvalidConfig("need at least one round".into()));
    }
    if !(cfg.step_length.is_finite() && cfg.step_length > 0.0) {
        return Err(Error::InvalidConfig(format!("step length must be positive, got {}", cfg.step_length)));
    }
    let n = sample.len() as f64;
    let d = g.len();
    let mut traj = Trajectory::new(d, cfg.step_length, g.clone(), cfg.rounds + 1);
    let mut v = vec![0.0; d];
    traj.push(&v, n);
    let mut log = Vec::new();

    if traj.stationary {
        for _ in 0..cfg.rounds {
            traj.push(&v, n);
        }
        return Ok(CdTrajectory { trajectory: traj, log });
    }

    let tied = argmax_by(&g, f64::abs);
    let signed = argmax_by(&g, |c| c);
    let j = tied[0];
    let direction = g[j].signum();
    let argmax_abs = match cfg.tie_rule {
        TieRule::LowestIndex => vec![j],
        TieRule::ReportAll => tied,
    };
    for _ in 0..cfg.rounds {
        // the gradient is the same every round, so is the selection
        v[j] += cfg.step_length * direction;
        traj.push(&v, n);
        log.push(CoordinateStep {
            coordinate: j,
            direction,
            argmax_abs: argmax_abs.clone(),
            argmax_signed: signed.clone(),
        });
    }
    Ok(CdTrajectory { trajectory: traj, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Label;

    fn sample_with_sum(g: &[f64]) -> Vec<LabeledPoint> {
        // two points whose label-weighted sum is exactly g
        let half: Vec<f64> = g.iter().map(|c| c / 2.0).collect();
        let neg: Vec<f64> = half.iter().map(|c| -c).collect();
        vec![LabeledPoint::new(half, Label::Positive).unwrap(), LabeledPoint::new(neg, Label::Negative).unwrap()]
    }

    #[test]
    fn gd_from_origin_stays_on_target_ray() {
        let s = sample_with_sum(&[3.0, -1.0]);
        let traj = gd_unhinged(&s, &[0.0, 0.0], 0.1, 50).unwrap();
        assert_eq!(traj.len(), 51);
        assert_eq!(traj.angles_to_target[0], None);
        for a in &traj.angles_to_target[1..] {
            assert!(a.unwrap() < 1e-15);
        }
        assert!(closed_form_residual(&traj) <= 1e-12);
    }

    #[test]
    fn gd_orthogonal_start_angle() {
        // step * ||g|| = 1 so the angle at t is atan(1 / t)
        let s = sample_with_sum(&[2.0, 0.0]);
        let traj = gd_unhinged(&s, &[0.0, 1.0], 0.5, 100).unwrap();
        let a = traj.angles_to_target[100].unwrap();
        assert!((a - 0.009_999_666_686_665_238).abs() < 1e-15);
        assert!((traj.angles_to_target[0].unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn gd_loss_strictly_decreases() {
        let s = sample_with_sum(&[0.5, 0.25, -1.0]);
        let traj = gd_unhinged(&s, &[1.0, 0.0, 0.0], 0.01, 200).unwrap();
        assert!(traj.loss_values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gd_cancelling_sample_is_stationary() {
        let s = vec![LabeledPoint::positive(vec![1.0, 0.0]).unwrap(), LabeledPoint::negative(vec![1.0, 0.0]).unwrap()];
        let traj = gd_unhinged(&s, &[0.3, 0.4], 1.0, 5).unwrap();
        assert!(traj.stationary);
        assert!(traj.iterates().all(|v| v == [0.3, 0.4]));
        assert!(traj.angles_to_target.iter().all(Option::is_none));
    }

    #[test]
    fn gd_input_validation() {
        let s = sample_with_sum(&[1.0, 1.0]);
        assert!(matches!(gd_unhinged(&[], &[0.0], 1.0, 1), Err(Error::Empty)));
        assert!(gd_unhinged(&s, &[0.0], 1.0, 1).is_err());
        assert!(gd_unhinged(&s, &[0.0, 0.0], 0.0, 1).is_err());
        assert!(gd_unhinged(&s, &[0.0, 0.0], 1.0, 0).is_err());
    }

    #[test]
    fn cd_picks_dominant_coordinate() {
        let traj = cd_unhinged(&sample_with_sum(&[3.0, 1.0]), &CdConfig::default()).unwrap();
        assert!(traj.log.iter().all(|s| s.coordinate == 0 && s.direction == 1.0));
        assert!(traj.trajectory.iterates().all(|v| v[1] == 0.0));
        assert!(traj.support_in_argmax());
        assert_eq!(traj.trajectory.last(), &[100.0, 0.0]);
    }

    #[test]
    fn cd_ties() {
        let s = sample_with_sum(&[2.0, 2.0]);
        let low = cd_unhinged(&s, &CdConfig { rounds: 5, ..Default::default() }).unwrap();
        assert!(low.log.iter().all(|st| st.coordinate == 0 && st.argmax_abs == vec![0]));
        let all = cd_unhinged(&s, &CdConfig { rounds: 5, tie_rule: TieRule::ReportAll, step_length: 1.0 }).unwrap();
        assert!(all.log.iter().all(|st| st.coordinate == 0 && st.argmax_abs == vec![0, 1]));
        assert!(all.support_in_argmax());
    }

    #[test]
    fn cd_negative_component_descends_downward() {
        let traj = cd_unhinged(&sample_with_sum(&[0.0, -5.0]), &CdConfig::default()).unwrap();
        let first = &traj.log[0];
        assert_eq!(first.coordinate, 1);
        assert_eq!(first.direction, -1.0);
        // the signed rule would have picked coordinate 0
        assert_eq!(first.argmax_signed, vec![0]);
        assert!(traj.trajectory.loss_values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cd_zero_gradient() {
        let s = vec![LabeledPoint::positive(vec![1.0]).unwrap(), LabeledPoint::negative(vec![1.0]).unwrap()];
        let traj = cd_unhinged(&s, &CdConfig::default()).unwrap();
        assert!(traj.trajectory.stationary);
        assert!(traj.log.is_empty());
        assert!(traj.support_in_argmax());
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = cd_unhinged(&sample_with_sum(&[1.0, 0.0]), &CdConfig { rounds: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        traj.trajectory.write_csv(&mut buf, Some(&traj.log)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,v_1,v_2,loss,angle_rad,chosen_coord");
        assert_eq!(lines[1], "0,0,0,2,,");
        assert_eq!(lines[2], "1,1,0,1,0,0");
        assert_eq!(lines.len(), 4);
    }
}
