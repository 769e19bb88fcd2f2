use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metareg::acceptance::{checks, run_suite, SuiteOptions};
use metareg::experiment::{run_grid, run_single, ExperimentConfig};
use metareg::Error;

#[derive(Parser)]
#[command(name = "metareg", version, about = "Meta-regularized learning-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write record.json, steps.csv and curves.svg.
    Run(ConfigArgs),
    /// Run every combination of methods, divergences, rules, alpha0 and seeds.
    Grid(ConfigArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

/// Flags mirror the configuration-file keys and override them.
#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    divergence: Option<String>,
    #[arg(long)]
    rule: Option<String>,
    /// Value, comma list, or log sweep lo:hi:count.
    #[arg(long)]
    alpha0: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Growth-clip factor in (0, 1], or `none`.
    #[arg(long)]
    clip_factor: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// quadratic:..., logistic:... or csv:PATH
    #[arg(long)]
    problem: Option<String>,
    /// Minibatch size, or `full`.
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Seed list, e.g. `0,1,2` or `0..5`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    eps: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("method", &self.method),
            ("divergence", &self.divergence),
            ("rule", &self.rule),
            ("alpha0", &self.alpha0),
            ("lambda", &self.lambda),
            ("clip_factor", &self.clip_factor),
            ("beta", &self.beta),
            ("problem", &self.problem),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("horizon", &self.horizon),
            ("seed", &self.seed),
            ("out", &self.out),
            ("eps", &self.eps),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// List check ids and exit.
    #[arg(long)]
    list: bool,
    /// Check ids to run (comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Growth-clip factor for the clip diagnostics check.
    #[arg(long)]
    clip_factor: Option<f64>,
    /// Print outcomes as JSON.
    #[arg(long)]
    json: bool,
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn verify(args: VerifyArgs) -> ExitCode {
    let all = checks();
    if args.list {
        for c in &all {
            println!("{:>4}  {}", c.id, c.name);
        }
        return ExitCode::SUCCESS;
    }
    if let Some(unknown) = args.only.iter().find(|o| !all.iter().any(|c| c.id == o.as_str())) {
        eprintln!("error: invalid value for `only`: unknown check `{unknown}`");
        return ExitCode::from(2);
    }
    if let Some(c) = args.clip_factor {
        if !(c > 0.0 && c <= 1.0) {
            eprintln!("error: invalid value for `clip_factor`: {c} is outside (0, 1]");
            return ExitCode::from(2);
        }
    }
    let opts = SuiteOptions { clip_factor: args.clip_factor };
    let outcomes = run_suite(&args.only, &opts);
    if args.json {
        match serde_json::to_string_pretty(&outcomes) {
            Ok(s) => println!("{s}"),
            Err(e) => return fail(e.into()),
        }
    } else {
        for o in &outcomes {
            println!("{}", o.line());
            for n in &o.notes {
                println!("       {n}");
            }
        }
    }
    if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => match a.resolve().and_then(|cfg| run_single(&cfg).map(|r| (cfg, r))) {
            Ok((cfg, r)) => {
                if let Some(reason) = &r.aborted {
                    eprintln!("run aborted after {} steps: {reason}", r.len());
                }
                println!("wrote {} steps to {}", r.len(), cfg.out.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Grid(a) => match a.resolve().and_then(|cfg| run_grid(&cfg).map(|r| (cfg, r))) {
            Ok((cfg, rows)) => {
                println!("wrote {} rows to {}", rows.len(), cfg.out.join("summary.csv").display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify(a) => verify(a),
    }
}
