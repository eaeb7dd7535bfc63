//! Experiment generator, configuration runner, and trace persistence.
//!
//! Reproduces the mixed-quadratic-agent experiment: a seeded family of
//! random quadratic agents, the seven interface mixes, the four built-in
//! rate presets, and one CSV trace per (mix, setting) run plus a summary of
//! iterations-to-tolerance.

pub mod config;
pub mod rng;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::acceleration::acceleration_supported;
use crate::agents::{AgentSpec, QuadraticObjective};
use crate::coordinator::{solve_observed, RunResult, SolveConfig};
use crate::diagnostics::SaddlePoint;
use crate::error::{Error, Result};
use crate::numerics::{SymmetricMatrix, Vector};
use crate::reference::direct_solve;
use crate::trace::{RunTrace, TraceRow};

use rng::SplitMix64;

/// The seven interface assignments of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mix {
    AllPrimal,
    AllDual,
    AllProximal,
    Thirds,
    PrimalDual,
    PrimalProximal,
    DualProximal,
}

impl Mix {
    pub const ALL: [Mix; 7] = [
        Mix::AllPrimal,
        Mix::AllDual,
        Mix::AllProximal,
        Mix::Thirds,
        Mix::PrimalDual,
        Mix::PrimalProximal,
        Mix::DualProximal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mix::AllPrimal => "all-primal",
            Mix::AllDual => "all-dual",
            Mix::AllProximal => "all-proximal",
            Mix::Thirds => "thirds",
            Mix::PrimalDual => "primal+dual",
            Mix::PrimalProximal => "primal+proximal",
            Mix::DualProximal => "dual+proximal",
        }
    }

    /// Agent counts `(primal, dual, proximal)` for `m` agents.
    pub fn counts(self, m: usize) -> Result<(usize, usize, usize)> {
        let split = |parts: usize| -> Result<usize> {
            if !m.is_multiple_of(parts) {
                return Err(Error::IndivisibleSplit { agents: m, mix: self.name().into() });
            }
            Ok(m / parts)
        };
        Ok(match self {
            Mix::AllPrimal => (m, 0, 0),
            Mix::AllDual => (0, m, 0),
            Mix::AllProximal => (0, 0, m),
            Mix::Thirds => {
                let third = split(3)?;
                (third, third, third)
            }
            Mix::PrimalDual => {
                let half = split(2)?;
                (half, half, 0)
            }
            Mix::PrimalProximal => {
                let half = split(2)?;
                (half, 0, half)
            }
            Mix::DualProximal => {
                let half = split(2)?;
                (0, half, half)
            }
        })
    }
}

impl FromStr for Mix {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mix::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mix '{s}'")))
    }
}

impl std::fmt::Display for Mix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The four rate settings `(rho_p, rho_d, rho_x)` built in as presets.
pub const PRESETS: [(f64, f64, f64); 4] =
    [(0.1, 0.1, 0.1), (1.0, 1.0, 1.0), (10.0, 1.0, 10.0), (50.0, 1.0, 50.0)];

/// Experiment configuration; every field mirrors a CLI flag and a config
/// file key.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Plan dimension.
    pub n: usize,
    /// Number of agents.
    pub agents: usize,
    /// Diagonal shift keeping the generated matrices definite.
    pub alpha: f64,
    /// Scale of the generated linear terms.
    pub r2: f64,
    /// `None` runs all seven mixes.
    pub mix: Option<Mix>,
    /// `(rho_p, rho_d, rho_x)`.
    pub rho: (f64, f64, f64),
    /// Run the four built-in presets instead of `rho`.
    pub all_presets: bool,
    pub accelerate: bool,
    pub max_iters: usize,
    pub tol: f64,
    /// Worker threads (0 = library default).
    pub threads: usize,
    pub out_dir: PathBuf,
    pub emit_plot_script: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n: 50,
            agents: 30,
            alpha: 1.0,
            r2: 1e4,
            mix: None,
            rho: (1.0, 1.0, 1.0),
            all_presets: false,
            accelerate: false,
            max_iters: 20_000,
            tol: 1e-8,
            threads: 0,
            out_dir: PathBuf::from("out"),
            emit_plot_script: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if self.agents == 0 {
            return Err(Error::InvalidConfig("agents must be >= 1".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidConfig("alpha must be > 0".into()));
        }
        if self.r2 < 0.0 {
            return Err(Error::InvalidConfig("r2 must be >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max-iters must be >= 1".into()));
        }
        if self.tol <= 0.0 {
            return Err(Error::InvalidConfig("tol must be > 0".into()));
        }
        let (rp, rd, rx) = self.rho;
        if rp <= 0.0 || rd <= 0.0 || rx <= 0.0 {
            return Err(Error::InvalidConfig("all rho values must be > 0".into()));
        }
        Ok(())
    }

    /// The `(rho_p, rho_d, rho_x)` settings this configuration runs.
    pub fn settings(&self) -> Vec<(f64, f64, f64)> {
        if self.all_presets {
            PRESETS.to_vec()
        } else {
            vec![self.rho]
        }
    }

    /// The mixes this configuration runs.
    pub fn mixes(&self) -> Vec<Mix> {
        match self.mix {
            Some(m) => vec![m],
            None => Mix::ALL.to_vec(),
        }
    }
}

/// Generates the seeded family of quadratic objectives:
/// `Q_i = alpha I + A_i' A_i` with `A_i = r_1i (2 U_i - 1)`, `U_i` an
/// `n x n` matrix of uniforms, `r_1i` one uniform scalar per agent, and
/// `b_i = r2 u_i` with `u_i` a uniform vector. Draw order per agent:
/// `r_1i`, then `U_i` row-major, then `u_i`, all from SplitMix64 seeded
/// with `seed` — so one seed pins the whole problem, bit for bit.
pub fn generate_problem(cfg: &ExperimentConfig) -> Result<Vec<QuadraticObjective<f64>>> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut objectives = Vec::with_capacity(cfg.agents);
    for _ in 0..cfg.agents {
        let r1 = rng.uniform();
        let mut a = vec![0.0f64; n * n];
        for entry in a.iter_mut() {
            *entry = r1 * (2.0 * rng.uniform() - 1.0);
        }
        let q = SymmetricMatrix::from_fn_symmetric(n, |i, j| {
            let mut s = if i == j { cfg.alpha } else { 0.0 };
            for m in 0..n {
                s += a[m * n + i] * a[m * n + j];
            }
            s
        });
        let b = Vector::from_fn(n, |_| cfg.r2 * rng.uniform());
        objectives.push(QuadraticObjective::new(q, b)?);
    }
    Ok(objectives)
}

/// Assigns interface kinds to the generated objectives in agent-index
/// order (primal block first, then dual, then proximal) with the per-kind
/// rates.
pub fn assign_mix(
    objectives: &[QuadraticObjective<f64>],
    mix: Mix,
    rho: (f64, f64, f64),
) -> Result<Vec<AgentSpec<f64>>> {
    let (np, nd, _nx) = mix.counts(objectives.len())?;
    let (rho_p, rho_d, rho_x) = rho;
    objectives
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            if i < np {
                AgentSpec::primal(obj.clone(), rho_p)
            } else if i < np + nd {
                AgentSpec::dual(obj.clone(), rho_d)
            } else {
                AgentSpec::proximal(obj.clone(), rho_x)
            }
        })
        .collect()
}

/// One completed run of a (mix, setting) pair.
#[derive(Debug)]
pub struct RunOutcome {
    pub mix: Mix,
    pub rho: (f64, f64, f64),
    pub accelerated: bool,
    pub result: RunResult<f64>,
    pub final_rel_error: Option<f64>,
    pub first_k_rel_1e6: Option<usize>,
    pub csv_path: PathBuf,
}

/// Everything a full experiment produced.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub summary_path: PathBuf,
    pub plot_script: Option<PathBuf>,
}

fn trim_float(x: f64) -> String {
    format!("{x}")
}

/// `rp{rho_p}_rd{rho_d}_rx{rho_x}` label used in file names.
pub fn setting_label(rho: (f64, f64, f64)) -> String {
    format!("rp{}_rd{}_rx{}", trim_float(rho.0), trim_float(rho.1), trim_float(rho.2))
}

fn run_file_name(mix: Mix, rho: (f64, f64, f64), accelerated: bool) -> String {
    let accel = if accelerated { "_accel" } else { "" };
    format!("{}_{}{}.csv", mix.name(), setting_label(rho), accel)
}

fn run_single(
    cfg: &ExperimentConfig,
    mix: Mix,
    rho: (f64, f64, f64),
) -> Result<RunOutcome> {
    let objectives = generate_problem(cfg)?;
    let agents = assign_mix(&objectives, mix, rho)?;
    let saddle: SaddlePoint<f64> = direct_solve(&agents)?;
    let accelerated = if cfg.accelerate {
        if acceleration_supported(&agents) {
            true
        } else if cfg.mix.is_some() {
            // An explicitly requested unsupported combination is an error;
            // in all-mix sweeps the incompatible mixes just run vanilla.
            return Err(Error::UnsupportedMix);
        } else {
            false
        }
    } else {
        false
    };
    let config = SolveConfig {
        max_iters: cfg.max_iters,
        primal_tol: cfg.tol,
        dual_tol: cfg.tol,
        acceleration: accelerated,
        parallel: true,
        ..SolveConfig::default()
    };
    let result = solve_observed(&agents, &config, Some(&saddle), &mut |_| Ok(()))?;
    let csv_path = cfg.out_dir.join(run_file_name(mix, rho, accelerated));
    write_trace_csv(&csv_path, &result.trace)?;
    Ok(RunOutcome {
        mix,
        rho,
        accelerated,
        final_rel_error: result.trace.rows.last().and_then(|r| r.rel_error),
        first_k_rel_1e6: result.trace.first_k_with_rel_error_below(1e-6),
        result,
        csv_path,
    })
}

/// Runs the configured mixes and settings (in parallel across runs), writes
/// one CSV per run plus `summary.csv`, and optionally a gnuplot script.
/// Already-finished runs are flushed even when a later run fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let jobs: Vec<(Mix, (f64, f64, f64))> = cfg
        .mixes()
        .into_iter()
        .flat_map(|m| cfg.settings().into_iter().map(move |s| (m, s)))
        .collect();

    let run_all = || -> Vec<Result<RunOutcome>> {
        jobs.par_iter().map(|&(mix, rho)| run_single(cfg, mix, rho)).collect()
    };
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run_all)
    } else {
        run_all()
    };

    let mut runs = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(outcome) => runs.push(outcome),
            Err(e) if first_error.is_none() => first_error = Some(e),
            Err(_) => {}
        }
    }
    let summary_path = cfg.out_dir.join("summary.csv");
    write_summary(&summary_path, &runs)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    let plot_script = if cfg.emit_plot_script {
        Some(write_plot_script(&cfg.out_dir, &runs)?)
    } else {
        None
    };
    Ok(ExperimentOutcome { runs, summary_path, plot_script })
}

fn fmt_opt_float(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn write_summary(path: &Path, runs: &[RunOutcome]) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "mix,rho_p,rho_d,rho_x,accelerated,converged,iterations,first_k_rel_1e6,final_rel_error\n",
    );
    for run in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            run.mix.name(),
            trim_float(run.rho.0),
            trim_float(run.rho.1),
            trim_float(run.rho.2),
            u8::from(run.accelerated),
            u8::from(run.result.converged),
            run.result.iterations,
            run.first_k_rel_1e6.map(|k| k.to_string()).unwrap_or_default(),
            fmt_opt_float(run.final_rel_error),
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_plot_script(dir: &Path, runs: &[RunOutcome]) -> Result<PathBuf> {
    let path = dir.join("plot.gp");
    let mut out = String::new();
    out.push_str("set datafile separator ','\n");
    out.push_str("set logscale y\n");
    out.push_str("set xlabel 'iteration k'\n");
    out.push_str("set ylabel 'relative objective error'\n");
    out.push_str("set key outside\n");
    out.push_str("plot \\\n");
    let lines: Vec<String> = runs
        .iter()
        .map(|run| {
            let file = run.csv_path.file_name().expect("csv file name").to_string_lossy();
            let accel = if run.accelerated { " accel" } else { "" };
            format!(
                "  '{}' every ::1 using 1:3 with lines title '{} {}{}'",
                file,
                run.mix.name(),
                setting_label(run.rho),
                accel
            )
        })
        .collect();
    out.push_str(&lines.join(", \\\n"));
    out.push('\n');
    std::fs::write(&path, out)?;
    Ok(path)
}

/// Writes a trace as CSV. Floats carry 17 significant digits, so parsing
/// the file reproduces the in-memory values exactly; optional columns are
/// left empty when absent.
pub fn write_trace_csv(path: &Path, trace: &RunTrace<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "k,objective,rel_error,primal_res,dual_res,V,r,restart")?;
    for row in &trace.rows {
        writeln!(
            w,
            "{},{:.16e},{},{:.16e},{:.16e},{},{},{}",
            row.k,
            row.objective,
            fmt_opt_float(row.rel_error),
            row.primal_res,
            row.dual_res,
            fmt_opt_float(row.lyapunov),
            fmt_opt_float(row.residual),
            u8::from(row.restart),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a trace CSV written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<RunTrace<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let bad = |line: &str| Error::InvalidConfig(format!("malformed trace line: {line}"));
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad(line));
        }
        let float = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(line)) };
        let opt_float = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                float(s).map(Some)
            }
        };
        rows.push(TraceRow {
            k: fields[0].parse().map_err(|_| bad(line))?,
            objective: float(fields[1])?,
            rel_error: opt_float(fields[2])?,
            primal_res: float(fields[3])?,
            dual_res: float(fields[4])?,
            lyapunov: opt_float(fields[5])?,
            residual: opt_float(fields[6])?,
            restart: fields[7] == "1",
        });
    }
    Ok(RunTrace { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 6,
            agents: 6,
            r2: 10.0,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = small_config();
        let a = generate_problem(&cfg).unwrap();
        let b = generate_problem(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.b(), y.b());
            assert_eq!(x.q(), y.q());
        }
        let other = generate_problem(&ExperimentConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a[0].b(), other[0].b());
    }

    #[test]
    fn generated_curvature_at_least_alpha() {
        let cfg = ExperimentConfig { alpha: 1.0, ..small_config() };
        for obj in generate_problem(&cfg).unwrap() {
            assert!(obj.mu() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn paper_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.agents, 30);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.r2, 1e4);
    }

    #[test]
    fn mix_assignment_blocks() {
        let cfg = small_config();
        let objectives = generate_problem(&cfg).unwrap();
        let agents = assign_mix(&objectives, Mix::Thirds, (2.0, 1.0, 3.0)).unwrap();
        let kinds: Vec<AgentKind> = agents.iter().map(AgentSpec::kind).collect();
        assert_eq!(
            kinds,
            vec![
                AgentKind::Primal,
                AgentKind::Primal,
                AgentKind::Dual,
                AgentKind::Dual,
                AgentKind::Proximal,
                AgentKind::Proximal,
            ]
        );
        assert_eq!(agents[0].rho(), 2.0);
        assert_eq!(agents[2].rho(), 1.0);
        assert_eq!(agents[4].rho(), 3.0);

        // All-dual at rho = 1 is admissible because mu >= alpha = 1.
        assert!(assign_mix(&objectives, Mix::AllDual, (1.0, 1.0, 1.0)).is_ok());

        // A single agent supports the single-kind mixes only.
        let single = generate_problem(&ExperimentConfig { agents: 1, ..small_config() }).unwrap();
        let one = assign_mix(&single, Mix::AllPrimal, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].kind(), AgentKind::Primal);
    }

    #[test]
    fn indivisible_splits_are_rejected() {
        let cfg = ExperimentConfig { agents: 5, ..small_config() };
        let objectives = generate_problem(&cfg).unwrap();
        assert!(matches!(
            assign_mix(&objectives, Mix::Thirds, (1.0, 1.0, 1.0)),
            Err(Error::IndivisibleSplit { agents: 5, .. })
        ));
        assert!(matches!(
            assign_mix(&objectives, Mix::PrimalDual, (1.0, 1.0, 1.0)),
            Err(Error::IndivisibleSplit { .. })
        ));
    }

    #[test]
    fn trace_csv_roundtrip_exact() {
        let trace = RunTrace {
            rows: vec![
                TraceRow {
                    k: 1,
                    objective: -1.234567890123456e8,
                    rel_error: Some(0.1),
                    primal_res: 3.0_f64.sqrt(),
                    dual_res: 1e-9,
                    lyapunov: Some(7.25),
                    residual: None,
                    restart: false,
                },
                TraceRow {
                    k: 2,
                    objective: 2.0 / 3.0,
                    rel_error: None,
                    primal_res: 0.0,
                    dual_res: f64::MIN_POSITIVE,
                    lyapunov: None,
                    residual: Some(1.0e-300),
                    restart: true,
                },
            ],
        };
        let dir = std::env::temp_dir().join(format!("cpp-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(trace, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn generated_condition_numbers_are_plausible() {
        for seed in [1u64, 42, 911] {
            let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
            let mut conds: Vec<f64> = generate_problem(&cfg)
                .unwrap()
                .iter()
                .map(|o| o.beta() / o.mu())
                .collect();
            conds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = conds[conds.len() / 2];
            assert!(
                (1.0..=100.0).contains(&median),
                "seed {seed}: median condition number {median}"
            );
        }
    }

    #[test]
    fn run_experiment_writes_traces_and_summary() {
        let dir = std::env::temp_dir().join(format!("cpp-harness-{}", std::process::id()));
        let cfg = ExperimentConfig {
            seed: 11,
            n: 8,
            agents: 4,
            r2: 5.0,
            mix: Some(Mix::AllDual),
            tol: 1e-9,
            out_dir: dir.clone(),
            emit_plot_script: true,
            ..ExperimentConfig::default()
        };
        let outcome = run_experiment(&cfg).unwrap();
        assert_eq!(outcome.runs.len(), 1);
        let run = &outcome.runs[0];
        assert!(run.result.converged);
        assert!(run.csv_path.exists());
        assert!(outcome.summary_path.exists());
        let script = outcome.plot_script.as_ref().unwrap();
        let script_text = std::fs::read_to_string(script).unwrap();
        assert!(script_text.contains("all-dual_rp1_rd1_rx1.csv"));

        // Reaching 1e-6 relative error implies the summary bookkeeping
        // recorded the first iteration that achieved it.
        let final_rel = run.final_rel_error.unwrap();
        if final_rel.abs() <= 1e-6 {
            let first = run.first_k_rel_1e6.expect("first-k bookkeeping");
            assert!(first <= run.result.iterations);
        }

        // The written trace parses back to the exact in-memory rows.
        let back = read_trace_csv(&run.csv_path).unwrap();
        assert_eq!(back, run.result.trace);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn failed_sweep_still_flushes_finished_runs() {
        // Four agents: the halves mixes run, thirds cannot split. The sweep
        // reports the error but the completed runs and the summary are on
        // disk.
        let dir = std::env::temp_dir().join(format!("cpp-partial-{}", std::process::id()));
        let cfg = ExperimentConfig {
            seed: 11,
            n: 6,
            agents: 4,
            r2: 5.0,
            mix: None,
            max_iters: 4000,
            out_dir: dir.clone(),
            ..ExperimentConfig::default()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::IndivisibleSplit { agents: 4, .. }));
        assert!(dir.join("summary.csv").exists());
        assert!(dir.join("all-dual_rp1_rd1_rx1.csv").exists());
        assert!(!dir.join("thirds_rp1_rd1_rx1.csv").exists());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn mix_names_parse() {
        for mix in Mix::ALL {
            assert_eq!(mix.name().parse::<Mix>().unwrap(), mix);
        }
        assert!("everything".parse::<Mix>().is_err());
    }

    #[test]
    fn presets_match_published_settings() {
        assert_eq!(PRESETS[0], (0.1, 0.1, 0.1));
        assert_eq!(PRESETS[1], (1.0, 1.0, 1.0));
        assert_eq!(PRESETS[2], (10.0, 1.0, 10.0));
        assert_eq!(PRESETS[3], (50.0, 1.0, 50.0));
    }
}
