//! Subcommand implementations. Every number printed here comes from
//! `consensus_core`; this module only formats and writes.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use consensus_core::sim::{decay_window, log_linear_slope, time_average};
use consensus_core::{
    certify, run, synthesize_certified, theorem_bounds, BlockStructure, BoundInputs, BoundReport,
    GainSet, ScenarioConfig, SimTrace,
};
use rayon::prelude::*;

use crate::svg::{Plot, Series, Style};

#[derive(Debug)]
pub enum CliError {
    Core(consensus_core::Error),
    Certification(String),
    Usage(String),
    Io(std::io::Error),
}

impl CliError {
    /// 2 config, 3 numerical blowup, 4 certification, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use consensus_core::Error as E;
        match self {
            CliError::Core(E::ConfigParse(_) | E::ConfigInvalid(_)) | CliError::Usage(_) => 2,
            CliError::Core(E::NumericalBlowup { .. }) => 3,
            CliError::Certification(_) => 4,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Certification(msg) => write!(f, "certification failed: {msg}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<consensus_core::Error> for CliError {
    fn from(e: consensus_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files produced by a command, held in memory until everything succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    fn add_plot(&mut self, stem: &str, plot: &Plot) {
        self.add(format!("{stem}.svg"), plot.render());
        self.add(format!("{stem}.csv"), plot.csv());
    }

    /// Writes each file via a temporary name and rename.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, content) in &self.files {
            let path = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            fs::write(&tmp, content)?;
            fs::rename(&tmp, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn matrix_text(name: &str, rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> String {
    let mut s = format!("{name} =\n");
    for r in 0..rows {
        s.push(' ');
        for c in 0..cols {
            let _ = write!(s, " {:>10.6}", at(r, c));
        }
        s.push('\n');
    }
    s
}

pub fn gains(q: usize, m: usize, csv: bool) -> CliResult<String> {
    let g = GainSet::synthesize(BlockStructure::new(q, m)?)?;
    let mats = [("P", &g.p), ("Q", &g.q), ("K_o", &g.k_o), ("K_c", &g.k_c)];
    let (rp, rq) = g.residuals();
    let (dko, dkc) = g.binomial_deviation();
    let mut out = String::new();
    if csv {
        out.push_str("matrix,row,col,value\n");
        for (name, mat) in mats {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    let _ = writeln!(out, "{name},{},{},{:e}", r + 1, c + 1, mat[(r, c)]);
                }
            }
        }
        return Ok(out);
    }
    let _ = writeln!(out, "q = {q}, m = {m}, n = {}", q * m);
    for (name, mat) in mats {
        out.push_str(&matrix_text(name, mat.nrows(), mat.ncols(), |r, c| {
            mat[(r, c)]
        }));
    }
    let _ = writeln!(out, "residual_p = {rp:.3e}");
    let _ = writeln!(out, "residual_q = {rq:.3e}");
    let _ = writeln!(out, "binomial_deviation_k_o = {dko:.3e}");
    let _ = writeln!(out, "binomial_deviation_k_c = {dkc:.3e}");
    let _ = writeln!(out, "rho_min_p = {:.6}", g.rho_min_p);
    let _ = writeln!(out, "rho_max_p = {:.6}", g.rho_max_p);
    let _ = writeln!(out, "rho_min_q = {:.6}", g.rho_min_q);
    let _ = writeln!(out, "rho_max_q = {:.6}", g.rho_max_q);
    let _ = writeln!(out, "norm_k_o = {:.6}", g.k_o_norm);
    let _ = writeln!(out, "norm_k_c = {:.6}", g.k_c_norm);
    Ok(out)
}

pub fn bound_report(cfg: &ScenarioConfig) -> CliResult<BoundReport> {
    let init = cfg.initial_states().errors(&cfg.topology);
    let inputs = BoundInputs::new(
        certify(&cfg.topology)?,
        GainSet::synthesize(cfg.bs)?,
        cfg.l_phi,
        cfg.tuning,
        &cfg.disturbances,
        init,
    );
    Ok(theorem_bounds(&inputs)?)
}

pub fn render_bounds(cfg: &ScenarioConfig, r: &BoundReport) -> CliResult<String> {
    let cert = certify(&cfg.topology)?;
    let t = &cfg.tuning;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<24} = {v}");
    };
    kv("scenario", cfg.name.clone());
    kv("followers", cfg.topology.followers().to_string());
    kv("q", cfg.bs.q().to_string());
    kv("m", cfg.bs.m().to_string());
    kv("l_phi", format!("{:.6}", cfg.l_phi));
    let omega: Vec<String> = cert.omega.iter().map(|w| format!("{w:.6}")).collect();
    kv("omega", format!("[{}]", omega.join(", ")));
    kv("omega_method", format!("{:?}", cert.method));
    kv("varrho", format!("{:.6e}", cert.varrho));
    kv("omega_min", format!("{:.6e}", cert.omega_min));
    kv("omega_max", format!("{:.6e}", cert.omega_max));
    kv("h_max", format!("{}", cert.h_max));
    kv("c_bar", format!("{}", t.c_bar));
    kv("lambda", format!("{}", t.lambda));
    kv("theta", format!("{}", t.theta));
    kv("tau_min", format!("{}", t.tau_m));
    kv("tau_max", format!("{}", t.tau_max));
    kv("c_star", format!("{:.6e}", r.c_star));
    kv("lambda_star", format!("{:.6e}", r.lambda_star));
    kv("xi_star", format!("{:.6e}", r.xi_star));
    kv("theta_min", format!("{:.6e}", r.theta_min));
    kv("sigma_star", format!("{:.6e}", r.sigma_star));
    kv("tau_max_bound", format!("{:.6e}", r.tau_max_bound));
    kv("rho_m_q_omega", format!("{:.6e}", r.rho_m_q_omega));
    kv("rho_max_q_omega", format!("{:.6e}", r.rho_max_q_omega));
    kv("chi1", format!("{:.6e}", r.chi1));
    kv("chi2", format!("{:.6e}", r.chi2));
    kv("chi3", format!("{:.6e}", r.chi3));
    kv("envelope_rate", format!("{:.6e}", r.envelope.rate()));
    kv(
        "envelope_steady",
        format!("{:.6e}", r.envelope.steady_state()),
    );
    kv(
        "condition_params_ge_one",
        r.satisfied.params_at_least_one.to_string(),
    );
    kv("condition_c_bar", r.satisfied.c_bar.to_string());
    kv("condition_lambda", r.satisfied.lambda.to_string());
    kv("condition_theta", r.satisfied.theta.to_string());
    kv("condition_tau_max", r.satisfied.tau_max.to_string());
    kv("all_conditions", r.satisfied.all().to_string());
    Ok(s)
}

pub fn render_synthesized(cfg: &ScenarioConfig) -> CliResult<String> {
    let tuned = synthesize_certified(
        &certify(&cfg.topology)?,
        &GainSet::synthesize(cfg.bs)?,
        cfg.l_phi,
        0.9,
    )?;
    Ok(format!(
        "synthesized.c_bar           = {}\nsynthesized.lambda          = {:.6e}\nsynthesized.theta           = {:.6e}\nsynthesized.tau_max         = {:.6e}\nsynthesized.tau_min         = {:.6e}\n",
        tuned.c_bar, tuned.lambda, tuned.theta, tuned.tau_max, tuned.tau_m
    ))
}

/// Fails with a certification error when `strict` and a condition is false.
pub fn enforce(strict: bool, r: &BoundReport) -> CliResult<()> {
    if strict && !r.satisfied.all() {
        return Err(CliError::Certification(format!("{:?}", r.satisfied)));
    }
    Ok(())
}

/// Start of the steady-state averaging window.
pub fn steady_from(horizon: f64) -> f64 {
    horizon * 2.0 / 3.0
}

pub struct Summary {
    pub final_error: f64,
    pub peak_error: f64,
    pub steady_error: f64,
    pub slope: Option<f64>,
    pub window: (f64, f64),
}

pub fn summarize(cfg: &ScenarioConfig, tr: &SimTrace) -> Summary {
    let e = &tr.metrics.mean_position_error;
    let window = decay_window(&tr.times, e, 1e-2);
    Summary {
        final_error: e.last().copied().unwrap_or(0.0),
        peak_error: e.iter().copied().fold(0.0, f64::max),
        steady_error: time_average(&tr.times, e, steady_from(cfg.horizon)),
        slope: log_linear_slope(&tr.times, e, window.0, window.1),
        window,
    }
}

pub fn render_summary(cfg: &ScenarioConfig, tr: &SimTrace, s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario               = {}", cfg.name);
    let _ = writeln!(out, "seed                   = {}", cfg.seed);
    let _ = writeln!(out, "horizon                = {}", cfg.horizon);
    let _ = writeln!(out, "dt                     = {}", cfg.dt);
    let _ = writeln!(out, "integrator_steps       = {}", tr.integrator_steps);
    let _ = writeln!(out, "sampling_events        = {}", tr.events.len());
    let _ = writeln!(out, "final_mean_error       = {:.6e}", s.final_error);
    let _ = writeln!(out, "peak_mean_error        = {:.6e}", s.peak_error);
    let _ = writeln!(out, "steady_mean_error      = {:.6e}", s.steady_error);
    let _ = writeln!(
        out,
        "decay_window           = [{:.3}, {:.3}]",
        s.window.0, s.window.1
    );
    match s.slope {
        Some(v) => {
            let _ = writeln!(out, "decay_slope            = {v:.6e}");
        }
        None => {
            let _ = writeln!(out, "decay_slope            = n/a");
        }
    }
    out
}

fn plots(cfg: &ScenarioConfig, tr: &SimTrace, art: &mut Artifacts) {
    let m = cfg.bs.m();
    let nf = tr.followers;
    for k in 0..m {
        let mut p = Plot::new(
            format!("Positions, component {}", k + 1),
            "time [s]",
            format!("x^(1,{})", k + 1),
        );
        for a in 0..=nf {
            let ys: Vec<f64> = (0..tr.times.len()).map(|r| tr.state(r, a)[k]).collect();
            let label = if a == 0 {
                "leader".to_string()
            } else {
                format!("agent {a}")
            };
            p = p.with(Series::line(label, &tr.times, &ys));
        }
        art.add_plot(&format!("positions_{}", k + 1), &p);
    }

    let pair = tr
        .pairs
        .iter()
        .copied()
        .find(|&p| p == (1, 2))
        .or_else(|| tr.pairs.iter().copied().find(|p| p.0 != p.1));
    if let Some((i, j)) = pair {
        if let Some(e) = tr.metrics.estimation_error(i, j) {
            let p = Plot::new(
                format!("Estimation error of agent {j} by agent {i}"),
                "time [s]",
                "norm",
            )
            .log_y()
            .with(Series::line("position", &tr.times, &e.position))
            .with(Series::line("higher blocks", &tr.times, &e.velocity));
            art.add_plot(&format!("estimation_{i}_{j}"), &p);
        }
        let t = tr.sample_times(i, j);
        let shown = t.len().min(60);
        let gaps: Vec<(f64, f64)> = t
            .windows(2)
            .take(shown)
            .map(|w| (w[1], w[1] - w[0]))
            .collect();
        let span = (
            gaps.first().map_or(0.0, |g| g.0),
            gaps.last().map_or(0.0, |g| g.0),
        );
        let p = Plot::new(
            format!("Sampling periods, agent {j} to agent {i}"),
            "sample time [s]",
            "period [s]",
        )
        .with(Series {
            label: "period".into(),
            points: gaps,
            style: Style::Stem,
        })
        .with(Series::line(
            "tau_min",
            &[span.0, span.1],
            &[cfg.tuning.tau_m; 2],
        ))
        .with(Series::line(
            "tau_max",
            &[span.0, span.1],
            &[cfg.tuning.tau_max; 2],
        ));
        art.add_plot(&format!("sampling_{i}_{j}"), &p);
    }

    let p = Plot::new("Mean position tracking error", "time [s]", "mean error")
        .log_y()
        .with(Series::line(
            "mean error",
            &tr.times,
            &tr.metrics.mean_position_error,
        ));
    art.add_plot("mean_error", &p);

    if let Some(obs) = tr.pairs.iter().filter(|p| p.1 == 0).map(|p| p.0).min() {
        let c = if m > 1 { 1 } else { 0 };
        let ev: Vec<_> = tr
            .events
            .iter()
            .filter(|e| e.i == obs && e.j == 0)
            .collect();
        let ts: Vec<f64> = ev.iter().map(|e| e.t).collect();
        let noisy: Vec<f64> = ev.iter().map(|e| e.received[c]).collect();
        let clean: Vec<f64> = ev.iter().map(|e| e.clean[c]).collect();
        let p = Plot::new(
            format!("Leader output component {} received by agent {obs}", c + 1),
            "time [s]",
            format!("y0^({})", c + 1),
        )
        .with(Series::line("received", &ts, &noisy))
        .with(Series::line("clean", &ts, &clean));
        art.add_plot("leader_output", &p);
    }
}

/// Runs the scenario and assembles every output file in memory.
pub fn simulate(cfg: &ScenarioConfig) -> CliResult<(Artifacts, String)> {
    let tr = run(cfg)?;
    let summary = summarize(cfg, &tr);
    let text = render_summary(cfg, &tr, &summary);
    let mut art = Artifacts::default();
    art.add("trace.csv", tr.trace_csv());
    art.add("estimates.csv", tr.estimates_csv());
    art.add("events.csv", tr.events_csv());
    art.add("metrics.csv", tr.metrics_csv());
    art.add("topology.dot", cfg.topology.to_dot());
    plots(cfg, &tr, &mut art);
    art.add("summary.txt", text.clone());
    Ok((art, text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Theta,
    Lambda,
    CBar,
    /// Upper sampling bound; the lower bound follows as half of it.
    TauMax,
}

fn apply(cfg: &mut ScenarioConfig, p: SweepParam, v: f64) {
    match p {
        SweepParam::Theta => cfg.tuning.theta = v,
        SweepParam::Lambda => cfg.tuning.lambda = v,
        SweepParam::CBar => cfg.tuning.c_bar = v,
        SweepParam::TauMax => {
            cfg.tuning.tau_max = v;
            cfg.tuning.tau_m = v / 2.0;
        }
    }
}

/// Steady mean error per value, averaged over `seeds` consecutive seeds.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    seeds: u64,
) -> CliResult<String> {
    if values.is_empty() || seeds == 0 {
        return Err(CliError::Usage(
            "sweep needs at least one value and one seed".into(),
        ));
    }
    let mut jobs = Vec::new();
    for (vi, &v) in values.iter().enumerate() {
        for s in 0..seeds {
            let mut c = cfg.clone();
            apply(&mut c, param, v);
            c.seed = cfg.seed + s;
            c.validate()?;
            jobs.push((vi, c));
        }
    }
    let results: Vec<(usize, Option<f64>)> = jobs
        .par_iter()
        .map(|(vi, c)| match run(c) {
            Ok(tr) => Ok((
                *vi,
                Some(time_average(
                    &tr.times,
                    &tr.metrics.mean_position_error,
                    steady_from(c.horizon),
                )),
            )),
            Err(consensus_core::Error::NumericalBlowup { .. }) => Ok((*vi, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;

    let name = format!("{param:?}").to_lowercase();
    let mut out = String::from("parameter,value,seeds,steady_mean,steady_std,blowups\n");
    for (vi, v) in values.iter().enumerate() {
        let vals: Vec<f64> = results
            .iter()
            .filter(|r| r.0 == vi)
            .filter_map(|r| r.1)
            .collect();
        let blowups = seeds as usize - vals.len();
        let (mean, std) = if vals.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            (mean, var.sqrt())
        };
        let _ = writeln!(out, "{name},{v},{seeds},{mean:.6e},{std:.6e},{blowups}");
    }
    Ok(out)
}
