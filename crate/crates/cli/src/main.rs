use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cgfl_cli::ablation::{run_ablation_suite, run_param_sweep};
use cgfl_cli::experiment::{mine_problem, run_experiment, write_catalogs, write_synthetic_graphs};
use cgfl_cli::{ExperimentConfig, HarnessError, Result, SweepParam};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgfl", version, about = "Cross-heterogeneity few-shot node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine, train and test every seed of the experiment.
    Run(Common),
    /// Run the base model and its ten ablations.
    Ablate(Common),
    /// Sweep the parameter named in the config's [sweep] table.
    Sweep(Common),
    /// Mine and export meta-pattern catalogs only.
    Mine(Common),
    /// Write the config's synthetic graphs as TSV files.
    Synth(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides CGFL_OUT and the config's out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads for running seeds in parallel.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed_override {
            cfg.seeds = vec![s];
        }
        let dir = cfg.run_dir(self.out.as_deref());
        Ok((cfg, dir))
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, dir) = c.load()?;
            let out = run_experiment(&cfg, &dir, c.threads)?;
            println!(
                "{}: accuracy {:.4} ± {:.4}, macro-F1 {:.4} ± {:.4} over {} seeds",
                cfg.name,
                out.metrics.accuracy.mean,
                out.metrics.accuracy.std,
                out.metrics.macro_f1.mean,
                out.metrics.macro_f1.std,
                out.results.len()
            );
            Ok(dir)
        }
        Command::Ablate(c) => {
            let (cfg, dir) = c.load()?;
            for row in run_ablation_suite(&cfg, &dir, c.threads)? {
                print_row(&row);
            }
            Ok(dir)
        }
        Command::Sweep(c) => {
            let (cfg, dir) = c.load()?;
            let sweep = cfg
                .sweep
                .clone()
                .ok_or_else(|| HarnessError::Config("config has no [sweep] table".into()))?;
            let param: SweepParam = sweep.param.parse()?;
            for row in run_param_sweep(&cfg, param, &sweep.values, &dir, c.threads)? {
                print_row(&row);
            }
            Ok(dir)
        }
        Command::Mine(c) => {
            let (cfg, dir) = c.load()?;
            let problem = mine_problem(&cfg)?;
            write_catalogs(&problem, &dir)?;
            for g in problem.graphs() {
                println!("{}: {} meta-patterns", g.name(), g.catalog.len());
            }
            Ok(dir)
        }
        Command::Synth(c) => {
            let (cfg, dir) = c.load()?;
            let graphs = dir.join("graphs");
            for m in write_synthetic_graphs(&cfg, &graphs)? {
                println!("{}", m.display());
            }
            Ok(dir)
        }
    }
}

fn print_row(row: &cgfl_cli::ReportRow) {
    match (row.accuracy_mean, row.macro_f1_mean) {
        (Some(a), Some(f)) => println!("{:<12} accuracy {a:.4}  macro-F1 {f:.4}", row.label),
        _ => println!("{:<12} failed: {}", row.label, row.error),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            eprintln!("artifacts in {}", display(&dir));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
