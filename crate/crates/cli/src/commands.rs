//! Command-line surface: argument parsing, config merging and report building.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use unhinged::loss_zoo::{Loss, Potential};
use unhinged::{Error, Result};

use crate::config::{DynamicsMode, ExperimentConfig};
use crate::experiments::{self, ProbeCheck, RobustCheck};
use crate::output::{num, opt_num, thin, Format, Report};
use crate::svg::{Plot, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLAIM_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "unhinged",
    version,
    about = "Noise-robustness experiments for convex potentials and the unhinged loss"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files; stdout when omitted.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write an SVG plot (needs --out-dir).
    #[arg(long, global = true)]
    pub plot: bool,
    /// Seed for randomized campaigns.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unhinged fit on the three-atom distribution across margins gamma.
    GammaSweep(SweepArgs),
    /// Robustness of one loss across noise rates.
    EtaSweep(SweepArgs),
    /// Gradient or coordinate descent on the unhinged sum loss.
    Dynamics(DynamicsArgs),
    /// Which potentials satisfy the convex-potential axioms.
    LossReport,
    /// Compare clean and noisy fits, once or over random instances.
    RobustCheck(CampaignArgs),
    /// Noisy risk along a ray against its linear lower bound.
    RecessionProbe(CampaignArgs),
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DynamicsArgs {
    #[arg(long, value_enum)]
    pub mode: Option<DynamicsMode>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    /// CSV sample with columns x1..xd,y.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// `counterexample` or `tie`.
    #[arg(long)]
    pub builtin_sample: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct CampaignArgs {
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of random instances; 0 runs a single configured instance.
    #[arg(long)]
    pub trials: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl Cli {
    /// Config file values overridden by explicit flags.
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        set(&mut cfg.seed, self.common.seed);
        match &self.command {
            Command::GammaSweep(a) | Command::EtaSweep(a) => {
                set(&mut cfg.loss, a.loss.clone());
                set(&mut cfg.eta, a.eta);
                set(&mut cfg.gamma, a.gamma);
                set(&mut cfg.r, a.r);
            }
            Command::Dynamics(a) => {
                set(&mut cfg.mode, a.mode);
                set(&mut cfg.iterations, a.iterations);
                set(&mut cfg.step, a.step);
                set(&mut cfg.sample, a.sample.clone());
                set(&mut cfg.builtin_sample, a.builtin_sample.clone());
            }
            Command::RobustCheck(a) | Command::RecessionProbe(a) => {
                set(&mut cfg.loss, a.loss.clone());
                set(&mut cfg.eta, a.eta);
                set(&mut cfg.r, a.r);
                set(&mut cfg.trials, a.trials);
            }
            Command::LossReport => {}
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.common.out_dir.clone().or_else(|| cfg.out_dir.clone())
    }
}

pub fn build_report(command: &Command, cfg: &ExperimentConfig) -> Result<Report> {
    match command {
        Command::GammaSweep(_) => gamma_sweep(cfg),
        Command::EtaSweep(_) => eta_sweep(cfg),
        Command::Dynamics(_) => dynamics(cfg),
        Command::LossReport => loss_report(),
        Command::RobustCheck(_) => robust_check(cfg),
        Command::RecessionProbe(_) => recession_probe(cfg),
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
        }
    };
    let outcome = cli.config().and_then(|cfg| {
        let out_dir = cli.out_dir(&cfg);
        if cli.common.plot && out_dir.is_none() {
            return Err(Error::InvalidConfig("--plot needs --out-dir".into()));
        }
        let report = build_report(&cli.command, &cfg)?;
        report.emit(out_dir.as_deref(), cli.common.format, cli.common.plot, stdout)?;
        // keep stdout a plain table; the summary still reaches the terminal
        if out_dir.is_none() && cli.common.format == Format::Csv {
            let _ = stderr.write_all(report.summary_json().as_bytes());
        }
        Ok(report)
    });
    match outcome {
        Ok(report) if report.claim_holds => {
            let _ = writeln!(stderr, "{}: claim holds", report.name);
            EXIT_OK
        }
        Ok(report) => {
            let _ = writeln!(stderr, "{}: claim FAILED", report.name);
            EXIT_CLAIM_FAILED
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID_INPUT
        }
    }
}

fn sweep_rows(report: &mut Report, records: &[experiments::SweepRecord]) {
    for rec in records {
        let mut row = vec![num(rec.value)];
        row.extend(rec.minimizer.iter().copied().map(num));
        row.extend([
            opt_num(rec.v_dot_x3),
            num(rec.clean_error),
            num(rec.noisy_fit_error),
            num(rec.objective),
            num(rec.minimizer_drift),
            rec.robust.to_string(),
            rec.degenerate.to_string(),
        ]);
        report.rows.push(row);
    }
}

fn sweep_header(parameter: &str, dim: usize) -> Vec<String> {
    let mut h = vec![parameter.to_string()];
    h.extend((1..=dim).map(|i| format!("v_{i}")));
    h.extend(
        ["v_dot_x3", "clean_error", "noisy_fit_error", "objective", "minimizer_drift", "robust", "degenerate"]
            .map(String::from),
    );
    h
}

fn gamma_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let sweep = experiments::run_gamma_sweep(cfg)?;
    let mut report = Report::new("gamma_sweep", &[]).with_records(&sweep.records).with_summary(&json!({
        "r": sweep.r,
        "eta": sweep.eta,
        "threshold": sweep.threshold,
        "claim_holds": sweep.claim_holds,
    }));
    report.header = sweep_header("gamma", 2);
    sweep_rows(&mut report, &sweep.records);
    report.claim_holds = sweep.claim_holds;
    report.plot = Some(Plot {
        title: "unhinged fit on the three-atom distribution".into(),
        x_label: "gamma".into(),
        y_label: "clean 0-1 error".into(),
        series: vec![
            Series {
                name: "clean fit".into(),
                points: sweep.records.iter().map(|r| (r.value, r.clean_error)).collect(),
                step: true,
            },
            Series {
                name: "noisy fit".into(),
                points: sweep.records.iter().map(|r| (r.value, r.noisy_fit_error)).collect(),
                step: true,
            },
        ],
        markers: sweep.threshold.map(|t| (t, format!("{t:.6}"))).into_iter().collect(),
        ..Default::default()
    });
    Ok(report)
}

fn eta_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let sweep = experiments::run_eta_sweep(cfg)?;
    let dim = sweep.records.first().map_or(0, |r| r.minimizer.len());
    let mut report = Report::new("eta_sweep", &[]).with_records(&sweep.records).with_summary(&json!({
        "loss": sweep.loss,
        "r": sweep.r,
        "claim_holds": sweep.claim_holds,
    }));
    report.header = sweep_header("eta", dim);
    sweep_rows(&mut report, &sweep.records);
    report.claim_holds = sweep.claim_holds;
    report.plot = Some(Plot {
        title: format!("{} under label noise", sweep.loss),
        x_label: "eta".into(),
        y_label: "clean 0-1 error".into(),
        series: vec![
            Series {
                name: "clean fit".into(),
                points: sweep.records.iter().map(|r| (r.value, r.clean_error)).collect(),
                step: false,
            },
            Series {
                name: "noisy fit".into(),
                points: sweep.records.iter().map(|r| (r.value, r.noisy_fit_error)).collect(),
                step: false,
            },
        ],
        ..Default::default()
    });
    Ok(report)
}

fn dynamics(cfg: &ExperimentConfig) -> Result<Report> {
    let mode = cfg.mode.unwrap_or(DynamicsMode::Gd);
    let run = experiments::run_dynamics(cfg, mode)?;
    let traj = &run.trajectory;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, run.log.as_deref())?;
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut report = Report::new("dynamics", &[]).with_summary(&run.summary);
    report.header = rdr.headers()?.iter().map(String::from).collect();
    for rec in rdr.records() {
        report.rows.push(rec?.iter().map(String::from).collect());
    }
    let records: Vec<_> = (0..traj.len())
        .map(|t| {
            json!({
                "t": t,
                "v": traj.iterate(t),
                "loss": traj.loss_values[t],
                "angle_rad": traj.angles_to_target[t],
                "chosen_coord": run.log.as_ref().and_then(|log| t.checked_sub(1).and_then(|s| log.get(s))).map(|s| s.coordinate),
            })
        })
        .collect();
    report = report.with_records(&records);
    report.claim_holds = run.summary.claim_holds;
    let angles: Vec<(f64, f64)> =
        traj.angles_to_target.iter().enumerate().filter_map(|(t, a)| a.map(|a| (t as f64, a))).collect();
    report.plot = Some(Plot {
        title: format!("{:?} iterates: angle to the label-weighted sum", mode),
        x_label: "t".into(),
        y_label: "angle (rad)".into(),
        series: vec![Series { name: "angle".into(), points: thin(angles), step: mode == DynamicsMode::Cd }],
        ..Default::default()
    });
    Ok(report)
}

fn loss_report() -> Result<Report> {
    let rep = experiments::run_loss_report()?;
    let mut report = Report::new(
        "loss_report",
        &["potential", "reference", "convex_potential", "failing_clause", "witness_z", "witness_value"],
    )
    .with_records(&rep.rows)
    .with_summary(&json!({ "table": rep.table(), "claim_holds": rep.claim_holds }));
    for row in &rep.rows {
        report.rows.push(vec![
            row.loss.clone(),
            row.reference.clone(),
            if row.satisfies_convex_potential { "Yes" } else { "No" }.into(),
            row.failing_clause.clone().unwrap_or_default(),
            opt_num(row.witness_z),
            opt_num(row.witness_value),
        ]);
    }
    report.claim_holds = rep.claim_holds;
    let zs: Vec<f64> = (0..=240).map(|k| -2.0 + k as f64 / 60.0).collect();
    report.plot = Some(Plot {
        title: "potentials".into(),
        x_label: "z".into(),
        y_label: "phi(z)".into(),
        series: Loss::ALL
            .iter()
            .map(|l| Series { name: l.to_string(), points: zs.iter().map(|&z| (z, l.value(z))).collect(), step: false })
            .collect(),
        ..Default::default()
    });
    Ok(report)
}

fn robust_check(cfg: &ExperimentConfig) -> Result<Report> {
    let check = experiments::run_robust_check(cfg)?;
    let claim = check.claim_holds();
    let mut report = match &check {
        RobustCheck::Single(rep) => {
            let mut r = Report::new(
                "robust_check",
                &["loss", "eta", "r", "clean_fit_error", "noisy_fit_error", "minimizer_drift", "robust", "degenerate"],
            )
            .with_records(&[rep])
            .with_summary(&json!({ "report": rep, "claim_holds": claim }));
            r.rows.push(vec![
                rep.loss.clone(),
                num(rep.eta),
                num(rep.r),
                num(rep.clean_fit_error),
                num(rep.noisy_fit_error),
                num(rep.minimizer_drift),
                rep.robust.to_string(),
                rep.degenerate_centroid.to_string(),
            ]);
            r
        }
        RobustCheck::Campaign { loss, trials } => {
            let mut r = Report::new(
                "robust_check",
                &[
                    "trial",
                    "dim",
                    "atoms",
                    "eta",
                    "clean_fit_error",
                    "noisy_fit_error",
                    "minimizer_drift",
                    "robust",
                    "degenerate",
                ],
            )
            .with_records(trials)
            .with_summary(&json!({
                "loss": loss,
                "trials": trials.len(),
                "robust": trials.iter().filter(|t| t.robust).count(),
                "max_drift": trials.iter().map(|t| t.minimizer_drift).fold(0.0, f64::max),
                "claim_holds": claim,
            }));
            for t in trials {
                r.rows.push(vec![
                    t.trial.to_string(),
                    t.dim.to_string(),
                    t.atoms.to_string(),
                    num(t.eta),
                    num(t.clean_fit_error),
                    num(t.noisy_fit_error),
                    num(t.minimizer_drift),
                    t.robust.to_string(),
                    t.degenerate.to_string(),
                ]);
            }
            r.plot = Some(Plot {
                title: format!("{loss}: clean vs noisy fit error"),
                x_label: "trial".into(),
                y_label: "clean 0-1 error".into(),
                series: vec![
                    Series {
                        name: "clean fit".into(),
                        points: trials.iter().map(|t| (t.trial as f64, t.clean_fit_error)).collect(),
                        step: false,
                    },
                    Series {
                        name: "noisy fit".into(),
                        points: trials.iter().map(|t| (t.trial as f64, t.noisy_fit_error)).collect(),
                        step: false,
                    },
                ],
                ..Default::default()
            });
            r
        }
    };
    report.claim_holds = claim;
    Ok(report)
}

fn recession_probe(cfg: &ExperimentConfig) -> Result<Report> {
    let check = experiments::run_recession_probe(cfg)?;
    let claim = check.claim_holds();
    let mut report = match &check {
        ProbeCheck::Single(p) => {
            let mut r = Report::new("recession_probe", &["lambda", "noisy_risk", "lower_bound", "slack"]).with_summary(
                &json!({
                    "loss": p.loss,
                    "eta": p.eta,
                    "base_point": p.base_point,
                    "direction": p.direction,
                    "min_slack": p.min_slack,
                    "bound_holds": p.bound_holds,
                    "eventually_increasing": p.eventually_increasing,
                    "claim_holds": claim,
                }),
            );
            let rows: Vec<_> = p
                .lambdas
                .iter()
                .zip(&p.values)
                .zip(&p.lower_bounds)
                .map(|((l, v), b)| json!({ "lambda": l, "noisy_risk": v, "lower_bound": b, "slack": v - b }))
                .collect();
            r = r.with_records(&rows);
            for ((l, v), b) in p.lambdas.iter().zip(&p.values).zip(&p.lower_bounds) {
                r.rows.push(vec![num(*l), num(*v), num(*b), num(v - b)]);
            }
            r.plot = Some(Plot {
                title: format!("{} noisy risk along a ray (eta = {})", p.loss, p.eta),
                x_label: "lambda".into(),
                y_label: "risk".into(),
                series: vec![
                    Series {
                        name: "noisy risk".into(),
                        points: p.lambdas.iter().copied().zip(p.values.iter().copied()).collect(),
                        step: false,
                    },
                    Series {
                        name: "lower bound".into(),
                        points: p.lambdas.iter().copied().zip(p.lower_bounds.iter().copied()).collect(),
                        step: false,
                    },
                ],
                ..Default::default()
            });
            r
        }
        ProbeCheck::Campaign(rows) => {
            let mut r = Report::new(
                "recession_probe",
                &["trial", "loss", "dim", "atoms", "eta", "min_slack", "bound_holds", "eventually_increasing"],
            )
            .with_records(rows)
            .with_summary(&json!({
                "instances": rows.len(),
                "min_slack": rows.iter().map(|t| t.min_slack).fold(f64::INFINITY, f64::min),
                "claim_holds": claim,
            }));
            for t in rows {
                r.rows.push(vec![
                    t.trial.to_string(),
                    t.loss.clone(),
                    t.dim.to_string(),
                    t.atoms.to_string(),
                    num(t.eta),
                    num(t.min_slack),
                    t.bound_holds.to_string(),
                    t.eventually_increasing.to_string(),
                ]);
            }
            r.plot = Some(Plot {
                title: "minimum slack of the linear lower bound".into(),
                x_label: "instance".into(),
                y_label: "min slack".into(),
                series: vec![Series {
                    name: "min slack".into(),
                    points: rows.iter().enumerate().map(|(i, t)| (i as f64, t.min_slack)).collect(),
                    step: false,
                }],
                ..Default::default()
            });
            r
        }
    };
    report.claim_holds = claim;
    Ok(report)
}
