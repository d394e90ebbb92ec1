use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qoc_core::harness::run::{self, GradcheckReport};
use qoc_core::harness::{PeriodRule, PeriodSpec, RunConfig, StrategyConfig, SweepSpec};
use qoc_core::{Result, StrategyKind};

/// Quantum optimal control gradients with selectable adjoint-memory strategies.
#[derive(Parser)]
#[command(name = "qoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward evolution at the configured controls.
    Simulate(Common),
    /// Compare gradients with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Largest accepted relative error per knot.
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Gradient descent on the controls.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Start from a controls.json written by an earlier run.
        #[arg(long, value_name = "PATH")]
        controls: Option<PathBuf>,
    },
    /// Memory and timing sweep; --config takes a sweep spec.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// store-all, checkpoint, revert, revert-checkpoint (gradcheck also accepts all).
    #[arg(long)]
    strategy: Option<String>,
    /// Checkpoint period C.
    #[arg(long, value_name = "C")]
    period: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

enum StrategyArg {
    One(StrategyKind),
    All,
}

impl Common {
    fn strategy(&self) -> Result<Option<StrategyArg>> {
        match self.strategy.as_deref() {
            None => Ok(None),
            Some("all") => Ok(Some(StrategyArg::All)),
            Some(s) => Ok(Some(StrategyArg::One(s.parse()?))),
        }
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn override_strategy(s: &mut StrategyConfig, kind: Option<StrategyKind>, period: Option<usize>) {
    if let Some(kind) = kind {
        s.kind = kind;
        if !kind.needs_period() {
            s.period = None;
        } else if s.period.is_none() {
            s.period = Some(PeriodSpec::Rule(PeriodRule::Sqrt));
        }
    }
    if let Some(c) = period {
        s.period = Some(PeriodSpec::Fixed(c));
    }
}

fn load_run(common: &Common) -> Result<(RunConfig, bool)> {
    let mut cfg = RunConfig::load(&common.config)?;
    let all = match common.strategy()? {
        Some(StrategyArg::All) => true,
        Some(StrategyArg::One(k)) => {
            override_strategy(&mut cfg.strategy, Some(k), common.period);
            false
        }
        None => {
            override_strategy(&mut cfg.strategy, None, common.period);
            false
        }
    };
    if let Some(seed) = common.seed {
        cfg.optimizer.seed = seed;
    }
    Ok((cfg, all))
}

fn print_matrix(label: &str, rows: usize, cols: usize, get: impl Fn(usize, usize) -> qoc_core::C64) {
    println!("{label}:");
    for i in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|j| {
                let z = get(i, j);
                format!("{:+.6}{:+.6}i", z.re, z.im)
            })
            .collect();
        println!("  [{}]", line.join(", "));
    }
}

fn cmd_simulate(common: &Common) -> Result<ExitCode> {
    let (cfg, _) = load_run(common)?;
    let setup = cfg.setup()?;
    let out = common.out_dir(&cfg);
    let r = run::simulate(&setup, Some(&out))?;
    let fin = &r.final_state;
    let d = fin.k.dim();
    print_matrix("K_N", d, d, |i, j| fin.k.get(i, j));
    for c in 0..fin.states.count() {
        let pops: Vec<String> = (0..d)
            .map(|i| format!("{:.6}", fin.states.get(i, c).norm_sqr()))
            .collect();
        println!("populations[{c}]: {}", pops.join(" "));
    }
    println!("total cost: {:.6e}", r.cost.total);
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_gradcheck(rep: &GradcheckReport, tolerance: f64) {
    for (s, e) in rep.strategies.iter().zip(&rep.max_rel_error) {
        let verdict = if *e <= tolerance { "pass" } else { "FAIL" };
        println!("{verdict} {s}: max rel error {e:.3e} (tolerance {tolerance:.1e})");
    }
    if rep.strategies.len() > 1 {
        println!("strategy comparison ‖g_a − g_b‖∞/‖g_b‖∞:");
        let names: Vec<String> = rep.strategies.iter().map(|s| s.kind().name().to_string()).collect();
        println!(
            "  {:>18} {}",
            "",
            names.iter().map(|n| format!("{n:>18}")).collect::<String>()
        );
        for (n, row) in names.iter().zip(&rep.comparison) {
            println!(
                "  {n:>18} {}",
                row.iter().map(|v| format!("{v:>18.3e}")).collect::<String>()
            );
        }
    }
}

fn cmd_gradcheck(common: &Common, h: f64, tolerance: f64) -> Result<ExitCode> {
    let (cfg, all) = load_run(common)?;
    let setup = cfg.setup()?;
    let n = setup.problem.grid.n_steps();
    let strategies = if all {
        StrategyConfig::all_sqrt()
            .into_iter()
            .map(|mut s| {
                let period = common.period.filter(|_| s.kind.needs_period());
                override_strategy(&mut s, None, period);
                s.resolve(n)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![setup.strategy]
    };
    let out = common.out_dir(&cfg);
    let rep = run::gradcheck(&setup, &strategies, h, tolerance, Some(&out))?;
    print_gradcheck(&rep, tolerance);
    println!("wrote {}", out.display());
    Ok(if rep.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_optimize(common: &Common, controls: Option<&Path>) -> Result<ExitCode> {
    let (mut cfg, _) = load_run(common)?;
    if let Some(path) = controls {
        cfg.controls = Some(qoc_core::harness::ControlsSpec::File {
            path: path.to_path_buf(),
        });
    }
    let setup = cfg.setup()?;
    let out = common.out_dir(&cfg);
    let outcome = run::optimize(&setup, Some(&out))?;
    let t = &outcome.trace;
    let best = t.best_record().expect("one record");
    println!(
        "{} after {} iterations: total {:.6e}, F0 {}",
        if t.converged { "converged" } else { "stopped" },
        t.iterations(),
        best.total,
        best.f0.map_or("-".to_string(), |v| format!("{v:.6e}"))
    );
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(common: &Common) -> Result<ExitCode> {
    let mut spec = SweepSpec::load(&common.config)?;
    match common.strategy()? {
        Some(StrategyArg::One(k)) => {
            let mut s = StrategyConfig::default();
            override_strategy(&mut s, Some(k), None);
            spec.strategies = vec![s];
        }
        Some(StrategyArg::All) => spec.strategies = StrategyConfig::all_sqrt(),
        None => {}
    }
    if let Some(c) = common.period {
        for s in spec.strategies.iter_mut().filter(|s| s.kind.needs_period()) {
            s.period = Some(PeriodSpec::Fixed(c));
        }
    }
    if let Some(seed) = common.seed {
        spec.base.optimizer.seed = seed;
    }
    let out = common.out_dir(&spec.base);
    let rows = run::bench(&spec, common.workers)?;
    run::write_bench(&out, &rows)?;
    for r in &rows {
        println!(
            "{}={:<6} {:<18} time {:.4e}s  peak bytes {:>12}  predicted {:>14.1}",
            r.axis, r.value, r.strategy, r.wall_time_s, r.peak_bytes, r.predicted_bytes
        );
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // usage errors share exit code 1 with other validation failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Gradcheck { common, h, tolerance } => cmd_gradcheck(common, *h, *tolerance),
        Command::Optimize { common, controls } => cmd_optimize(common, controls.as_deref()),
        Command::Bench(c) => cmd_bench(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
