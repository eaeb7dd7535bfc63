//! `cpp` — consensus planning experiment CLI.
//!
//! Subcommands: `run` (solve the configured mixes/settings, write CSV
//! traces), `certify` (re-run vanilla configurations under the per-iteration
//! convergence certificates and print the worst slacks), and `presets`
//! (list the built-in rate settings).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cpp::coordinator::{solve_observed, SolveConfig};
use cpp::harness::config::ConfigOverlay;
use cpp::harness::{
    assign_mix, generate_problem, run_experiment, setting_label, ExperimentConfig, Mix, PRESETS,
};
use cpp::{direct_solve, CertificateAuditor, Error, Result, VariantFlags};

#[derive(Parser)]
#[command(name = "cpp", version, about = "Consensus planning over mixed primal/dual/proximal agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured mixes and settings; write one CSV per run.
    Run(ProblemArgs),
    /// Check the convergence certificates along vanilla runs and print the
    /// worst slack of every inequality.
    Certify(ProblemArgs),
    /// List the built-in (rho_p, rho_d, rho_x) presets.
    Presets,
}

#[derive(Args)]
struct ProblemArgs {
    /// Configuration file of `key = value` lines (CLI flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mix name (all-primal, all-dual, all-proximal, thirds, primal+dual,
    /// primal+proximal, dual+proximal) or "all".
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plan dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// Diagonal shift of the generated matrices.
    #[arg(long)]
    alpha: Option<f64>,
    /// Scale of the generated linear terms.
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    rho_p: Option<f64>,
    #[arg(long)]
    rho_d: Option<f64>,
    #[arg(long)]
    rho_x: Option<f64>,
    /// Run the four built-in presets instead of one rho setting.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    all_presets: Option<bool>,
    /// Accelerate the configurations that support it.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    accelerate: Option<bool>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Residual tolerance (both primal and dual).
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (0 = library default).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script plotting the traces.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    emit_plot_script: Option<bool>,
}

impl ProblemArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            ConfigOverlay::from_file(path)?.apply(&mut cfg);
        }
        let cli = ConfigOverlay {
            seed: self.seed,
            n: self.n,
            agents: self.agents,
            alpha: self.alpha,
            r2: self.r2,
            mix: match self.mix.as_deref() {
                None => None,
                Some("all") => Some(None),
                Some(name) => Some(Some(name.parse()?)),
            },
            rho_p: self.rho_p,
            rho_d: self.rho_d,
            rho_x: self.rho_x,
            all_presets: self.all_presets,
            accelerate: self.accelerate,
            max_iters: self.max_iters,
            tol: self.tol,
            threads: self.threads,
            out: self.out.clone(),
            emit_plot_script: self.emit_plot_script,
        };
        cli.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<ExitCode> {
        match cli.command {
            Command::Run(ref args) => cmd_run(args.build()?),
            Command::Certify(ref args) => {
                let mut cfg = args.build()?;
                // Certificates apply to the vanilla algorithm only.
                cfg.accelerate = false;
                cmd_certify(cfg)
            }
            Command::Presets => cmd_presets(),
        }
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(cfg: ExperimentConfig) -> Result<ExitCode> {
    let outcome = run_experiment(&cfg)?;
    let mut all_converged = true;
    for run in &outcome.runs {
        all_converged &= run.result.converged;
        println!(
            "{:<16} {:<22} {} k={:<6} rel_error={} -> {}",
            run.mix.name(),
            setting_label(run.rho),
            if run.result.converged { "converged " } else { "max-iters " },
            run.result.iterations,
            run.final_rel_error.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "n/a".into()),
            run.csv_path.display(),
        );
    }
    println!("summary: {}", outcome.summary_path.display());
    if let Some(script) = &outcome.plot_script {
        println!("plot script: {}", script.display());
    }
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

struct CertifyOutcome {
    line: String,
    converged: bool,
    certified: bool,
}

fn certify_one(cfg: &ExperimentConfig, mix: Mix, rho: (f64, f64, f64)) -> Result<CertifyOutcome> {
    let objectives = generate_problem(cfg)?;
    let agents = assign_mix(&objectives, mix, rho)?;
    let saddle = direct_solve(&agents)?;
    let mut auditor = CertificateAuditor::new(&agents, &saddle, VariantFlags::default())?;
    let config = SolveConfig {
        max_iters: cfg.max_iters,
        primal_tol: cfg.tol,
        dual_tol: cfg.tol,
        parallel: true,
        ..SolveConfig::default()
    };
    let result = solve_observed(&agents, &config, Some(&saddle), &mut |s| auditor.observe(s))?;
    let tol = auditor.tolerance();
    let worst = auditor.worst_slacks();
    let certified = worst.iter().all(|(_, v)| *v >= tol);
    let mut line = format!(
        "{:<16} {:<22} {} k={:<6} slack floor {:.1e}\n",
        mix.name(),
        setting_label(rho),
        if result.converged { "converged " } else { "max-iters " },
        result.iterations,
        tol,
    );
    for (name, value) in &worst {
        line.push_str(&format!("    worst {name:<24} {value:+.3e}\n"));
    }
    line.push_str(if certified { "    CERTIFIED\n" } else { "    VIOLATED\n" });
    Ok(CertifyOutcome { line, converged: result.converged, certified })
}

fn cmd_certify(cfg: ExperimentConfig) -> Result<ExitCode> {
    let jobs: Vec<(Mix, (f64, f64, f64))> = cfg
        .mixes()
        .into_iter()
        .flat_map(|m| cfg.settings().into_iter().map(move |s| (m, s)))
        .collect();
    let run_all = || -> Vec<Result<CertifyOutcome>> {
        jobs.par_iter().map(|&(mix, rho)| certify_one(&cfg, mix, rho)).collect()
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
    let mut all_converged = true;
    let mut all_certified = true;
    for result in results {
        let outcome = result?;
        print!("{}", outcome.line);
        all_converged &= outcome.converged;
        all_certified &= outcome.certified;
    }
    Ok(if !all_certified {
        ExitCode::from(1)
    } else if !all_converged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_presets() -> Result<ExitCode> {
    println!("built-in rate presets (rho_p, rho_d, rho_x):");
    for (i, preset) in PRESETS.iter().enumerate() {
        println!("  {}: ({}, {}, {})", i + 1, preset.0, preset.1, preset.2);
    }
    Ok(ExitCode::SUCCESS)
}
