//! Command-line experiment runner for the polynomial-filtered solvers.
//!
//! Verbs: `nce`, `svt`, `sdp` run one generated experiment (or a batch from
//! a TOML config file) and emit a results table; `selftest` runs quick
//! numerical smoke checks and sets the exit code.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polyfilter::bench::{
    load_bench_file, markdown_table, run_batch, write_csv, ExperimentConfig, ExperimentKind,
    ResultRow, SolverChoice, TimeMode,
};

#[derive(Debug, Parser)]
#[command(
    name = "polyfilter",
    about = "Polynomial-filtered first-order solvers: experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nearest correlation matrix estimation (proximal gradient).
    Nce(RunArgs),
    /// Matrix completion by singular value thresholding.
    Svt(RunArgs),
    /// Semidefinite programs via splitting iterations.
    Sdp(RunArgs),
    /// Quick numerical smoke checks; exit code 1 on any failure.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Exact,
    Pf,
    Both,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exact => SolverChoice::Exact,
            SolverArg::Pf => SolverChoice::Filtered,
            SolverArg::Both => SolverChoice::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimeModeArg {
    Wall,
    Zero,
}

impl From<TimeModeArg> for TimeMode {
    fn from(t: TimeModeArg) -> Self {
        match t {
            TimeModeArg::Wall => TimeMode::Wall,
            TimeModeArg::Zero => TimeMode::Zero,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Matrix dimension (columns for svt).
    #[arg(long)]
    n: Option<usize>,
    /// Rows (svt) or constraint count (sdp planted).
    #[arg(long)]
    m: Option<usize>,
    /// Target rank of the generated instance.
    #[arg(long)]
    rank: Option<usize>,
    /// Sampling ratio in (0, 1] (svt).
    #[arg(long)]
    sr: Option<f64>,
    /// Correlation example kind (nce).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    example: Option<u8>,
    /// Instance name; for sdp this picks the generator (planted, cycle).
    #[arg(long)]
    name: Option<String>,
    /// Load the nce input matrix from a MatrixMarket file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Which solver(s) to run on the same instance.
    #[arg(long, value_enum, default_value_t = SolverArg::Both)]
    solver: SolverArg,
    /// Chebyshev filter degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Filter passes per iteration.
    #[arg(long)]
    repeats: Option<usize>,
    /// Subspace over-allocation factor.
    #[arg(long)]
    q: Option<f64>,
    /// Interval safety factor.
    #[arg(long)]
    eta: Option<f64>,
    /// Convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Generator and solver seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill time columns with wall clock or zeros.
    #[arg(long, value_enum, default_value_t = TimeModeArg::Wall)]
    time_mode: TimeModeArg,
    /// Run every experiment in a TOML file instead of the flag-built one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the result rows to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-iteration trace CSVs into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Parallel worker slots for batch runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl RunArgs {
    fn to_experiment(&self, kind: ExperimentKind) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(kind);
        config.name = self.name.clone();
        config.example = self.example;
        config.input = self.input.clone();
        config.n = self.n;
        config.m = self.m;
        config.rank = self.rank;
        config.sr = self.sr;
        config.solver = self.solver.into();
        config.degree = self.degree;
        config.repeats = self.repeats;
        config.eta = self.eta;
        config.q = self.q;
        config.tol = self.tol;
        config.max_iter = self.max_iter;
        config.seed = self.seed;
        config.time_mode = self.time_mode.into();
        config
    }
}

fn run_kind(kind: ExperimentKind, args: &RunArgs) -> polyfilter::Result<Vec<ResultRow>> {
    let (configs, out, trace_dir, jobs) = match &args.config {
        Some(path) => {
            let file = load_bench_file(path)?;
            let out = args.out.clone().or(file.out);
            let trace_dir = args.trace_dir.clone().or(file.trace_dir);
            let jobs = if args.jobs > 1 {
                args.jobs
            } else {
                file.jobs.unwrap_or(1)
            };
            (file.experiments, out, trace_dir, jobs)
        }
        None => (
            vec![args.to_experiment(kind)],
            args.out.clone(),
            args.trace_dir.clone(),
            args.jobs,
        ),
    };
    let rows = run_batch(kind, &configs, jobs, trace_dir.as_deref())?;
    print!("{}", markdown_table(kind, &rows)?);
    if let Some(path) = out {
        write_csv(&path, kind, &rows)?;
        eprintln!("wrote {} rows to {}", rows.len(), path.display());
    }
    Ok(rows)
}

mod selftest {
    use ndarray::array;
    use polyfilter::bench::{
        run_experiment, ExperimentConfig, ExperimentKind, ResultRow, SolverChoice, TimeMode,
    };
    use polyfilter::chebyshev::{cheb_scalar, growth_lower_bound};
    use polyfilter::pfam::{pfam_solve, PfamConfig};
    use polyfilter::pfpg::SolveMode;
    use polyfilter::problems::sdp::maxcut_sdp;
    use polyfilter::subspace::{sin_theta, Subspace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Check = std::result::Result<(), String>;

    fn chebyshev_growth() -> Check {
        for degree in [1usize, 4, 16, 64] {
            for eps in [1e-4, 1e-2, 0.1, 1.0] {
                let value = cheb_scalar(degree, 1.0 + eps);
                let bound = growth_lower_bound(degree, eps);
                if !(value >= bound) {
                    return Err(format!(
                        "T_{degree}(1+{eps}) = {value} below bound {bound}"
                    ));
                }
            }
        }
        Ok(())
    }

    fn principal_angles() -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = Subspace::random(25, 4, &mut rng).map_err(|e| e.to_string())?;
            let v = Subspace::random(25, 4, &mut rng).map_err(|e| e.to_string())?;
            let (s_uv, _) = sin_theta(&u, &v).map_err(|e| e.to_string())?;
            let (s_vu, _) = sin_theta(&v, &u).map_err(|e| e.to_string())?;
            for i in 0..4 {
                if !(0.0..=1.0 + 1e-12).contains(&s_uv[i]) {
                    return Err(format!("sine {} outside [0, 1]", s_uv[i]));
                }
                if (s_uv[i] - s_vu[i]).abs() > 1e-10 {
                    return Err(format!(
                        "asymmetric angles: {} vs {}",
                        s_uv[i], s_vu[i]
                    ));
                }
            }
            let (s_uu, _) = sin_theta(&u, &u).map_err(|e| e.to_string())?;
            if s_uu.iter().any(|&s| s > 1e-10) {
                return Err("nonzero angle between identical spans".into());
            }
        }
        Ok(())
    }

    fn nce_agreement() -> Check {
        let mut config = ExperimentConfig::new(ExperimentKind::Nce);
        config.example = Some(1);
        config.n = Some(60);
        config.seed = 5;
        config.tol = Some(1e-6);
        config.time_mode = TimeMode::Zero;
        let rows = run_experiment(&config, None).map_err(|e| e.to_string())?;
        let mut objectives = Vec::new();
        for row in &rows {
            match row {
                ResultRow::Nce { f, status, .. } if status == "converged" => objectives.push(*f),
                ResultRow::Nce { status, .. } => {
                    return Err(format!("solver finished with status {status}"));
                }
                _ => return Err("unexpected row kind".into()),
            }
        }
        let (a, b) = (objectives[0], objectives[1]);
        if (a - b).abs() > 1e-5 * a.abs().max(1.0) {
            return Err(format!("objectives disagree: {a} vs {b}"));
        }
        Ok(())
    }

    fn svt_recovery() -> Check {
        let mut config = ExperimentConfig::new(ExperimentKind::Svt);
        config.m = Some(60);
        config.n = Some(50);
        config.rank = Some(2);
        config.sr = Some(0.5);
        config.solver = SolverChoice::Both;
        config.time_mode = TimeMode::Zero;
        let rows = run_experiment(&config, None).map_err(|e| e.to_string())?;
        for row in &rows {
            match row {
                ResultRow::Svt { svp, mse, status, .. } => {
                    if status != "converged" {
                        return Err(format!("status {status}"));
                    }
                    if *svp != 2 {
                        return Err(format!("recovered rank {svp}, expected 2"));
                    }
                    if !(*mse < 5e-3) {
                        return Err(format!("recovery error {mse}"));
                    }
                }
                _ => return Err("unexpected row kind".into()),
            }
        }
        Ok(())
    }

    fn sdp_planted() -> Check {
        let mut config = ExperimentConfig::new(ExperimentKind::Sdp);
        config.n = Some(40);
        config.m = Some(12);
        config.rank = Some(2);
        config.solver = SolverChoice::Filtered;
        config.max_iter = Some(2000);
        config.time_mode = TimeMode::Zero;
        let rows = run_experiment(&config, None).map_err(|e| e.to_string())?;
        match &rows[0] {
            ResultRow::Sdp { pinf, dinf, status, .. } => {
                if status != "converged" {
                    return Err(format!("status {status}"));
                }
                if !(*pinf < 1e-5 && *dinf < 1e-5) {
                    return Err(format!("infeasibilities pinf={pinf} dinf={dinf}"));
                }
                Ok(())
            }
            _ => Err("unexpected row kind".into()),
        }
    }

    fn maxcut_two_node() -> Check {
        let w = array![[0.0, 1.0], [1.0, 0.0]];
        let prob = maxcut_sdp(&w.view(), Some(1.0)).map_err(|e| e.to_string())?;
        let config = PfamConfig {
            mode: SolveMode::Exact,
            tol: 1e-8,
            max_iter: 5000,
            ..PfamConfig::default()
        };
        let outcome = pfam_solve(&prob, &config).map_err(|e| e.to_string())?;
        let pobj = outcome.metrics.pobj;
        if (pobj + 1.0).abs() > 1e-6 {
            return Err(format!("two-node objective {pobj}, expected -1"));
        }
        Ok(())
    }

    /// Run all checks, printing one PASS/FAIL line each; returns the number
    /// of failures.
    pub fn run() -> usize {
        let checks: [(&str, fn() -> Check); 6] = [
            ("chebyshev-growth-bound", chebyshev_growth),
            ("principal-angle-properties", principal_angles),
            ("nce-solvers-agree", nce_agreement),
            ("svt-recovery", svt_recovery),
            ("sdp-planted-convergence", sdp_planted),
            ("maxcut-two-node-value", maxcut_two_node),
        ];
        let mut failures = 0;
        for (name, check) in checks {
            match check() {
                Ok(()) => println!("PASS {name}"),
                Err(msg) => {
                    println!("FAIL {name}: {msg}");
                    failures += 1;
                }
            }
        }
        if failures == 0 {
            println!("selftest: all checks passed");
        } else {
            println!("selftest: {failures} check(s) failed");
        }
        failures
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Nce(args) => dispatch(ExperimentKind::Nce, args),
        Command::Svt(args) => dispatch(ExperimentKind::Svt, args),
        Command::Sdp(args) => dispatch(ExperimentKind::Sdp, args),
        Command::Selftest => {
            if selftest::run() == 0 {
                0
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}

fn dispatch(kind: ExperimentKind, args: &RunArgs) -> i32 {
    match run_kind(kind, args) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_map_onto_experiment_config() {
        let cli = Cli::try_parse_from([
            "polyfilter",
            "svt",
            "--m",
            "100",
            "--n",
            "80",
            "--rank",
            "4",
            "--sr",
            "0.3",
            "--solver",
            "pf",
            "--degree",
            "2",
            "--seed",
            "9",
            "--time-mode",
            "zero",
        ])
        .unwrap();
        let args = match &cli.command {
            Command::Svt(a) => a,
            _ => panic!("expected svt verb"),
        };
        let config = args.to_experiment(ExperimentKind::Svt);
        assert_eq!(config.m, Some(100));
        assert_eq!(config.n, Some(80));
        assert_eq!(config.rank, Some(4));
        assert_eq!(config.sr, Some(0.3));
        assert_eq!(config.solver, SolverChoice::Filtered);
        assert_eq!(config.degree, Some(2));
        assert_eq!(config.seed, 9);
        assert_eq!(config.time_mode, TimeMode::Zero);
        config.validate().unwrap();
    }

    #[test]
    fn example_kind_is_range_checked_by_the_parser() {
        assert!(Cli::try_parse_from(["polyfilter", "nce", "--example", "4"]).is_err());
        assert!(Cli::try_parse_from(["polyfilter", "nce", "--example", "2"]).is_ok());
    }

    #[test]
    fn selftest_verb_parses() {
        let cli = Cli::try_parse_from(["polyfilter", "selftest"]).unwrap();
        assert!(matches!(cli.command, Command::Selftest));
    }

    #[test]
    fn small_run_writes_csv() {
        let dir = std::env::temp_dir().join("polyfilter-cli-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("nce.csv");
        let cli = Cli::try_parse_from([
            "polyfilter",
            "nce",
            "--example",
            "1",
            "--n",
            "30",
            "--solver",
            "exact",
            "--tol",
            "1e-5",
            "--time-mode",
            "zero",
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        let args = match &cli.command {
            Command::Nce(a) => a,
            _ => panic!("expected nce verb"),
        };
        let rows = run_kind(ExperimentKind::Nce, args).unwrap();
        assert_eq!(rows.len(), 1);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("solver,n,time_s,iter,f,rel_g,status\n"));
        assert!(text.lines().count() == 2);
        assert!(text.contains("exact,30,"));
    }
}
