use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonbark::config::ScenarioConfig;
use nonbark::runner::{checks_json, run_checks, run_scenario, run_sweep, with_jobs, CheckResult, RunReport, SweepKind};
use nonbark::series::Format;
use nonbark::Error;

const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("atom-growth", include_str!("../presets/atom-growth.json")),
    ("checks", include_str!("../presets/checks.json")),
];

/// Weak values of pre- and post-selected quantum systems: figure data and
/// invariant checks.
#[derive(Parser, Debug)]
#[command(name = "nonbark", version)]
struct Cli {
    /// Output directory (overridden by NONBARK_OUT).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Output format; defaults to the config's own.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario config file.
    Run { config: PathBuf },
    /// Run a built-in scenario (fig1, fig2, fig3, atom-growth, checks).
    Preset {
        name: Option<String>,
        /// List the presets and exit.
        #[arg(long)]
        list: bool,
        /// Print the preset's config instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Run the invariant suite.
    Check {
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convergence study: atom-n (bath size) or pde-grid (dx, dt).
    Sweep {
        kind: SweepKind,
        #[arg(long)]
        fast: bool,
    },
}

fn out_dir(cli: &Cli) -> PathBuf {
    match std::env::var_os("NONBARK_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cli.out.clone(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::InvalidParameter { .. } => 2,
        _ => 1,
    }
}

fn print_checks(checks: &[CheckResult]) {
    for c in checks {
        println!(
            "{} {:<30} value={:.3e} tol={:.1e} ({:.2}s) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.seconds,
            c.detail
        );
    }
}

fn report(r: &RunReport) -> ExitCode {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    print_checks(&r.checks);
    for f in &r.files {
        println!("wrote {}", f.display());
    }
    if r.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_config(cfg: &ScenarioConfig, cli: &Cli) -> Result<ExitCode, Error> {
    let out = out_dir(cli);
    let r = with_jobs(cli.jobs, || run_scenario(cfg, &out, cli.format))??;
    Ok(report(&r))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = ScenarioConfig::from_path(config)?;
            run_config(&cfg, cli)
        }
        Command::Preset { name, list, show } => {
            if *list {
                for (n, _) in PRESETS {
                    println!("{n}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let name = name.as_deref().ok_or_else(|| Error::Parse("preset name required (try --list)".into()))?;
            let (_, text) = PRESETS
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| Error::Parse(format!("unknown preset `{name}` (try --list)")))?;
            let cfg = ScenarioConfig::from_json(text)?;
            if *show {
                println!("{}", cfg.to_json());
                return Ok(ExitCode::SUCCESS);
            }
            run_config(&cfg, cli)
        }
        Command::Check { fast, seed } => {
            let checks = with_jobs(cli.jobs, || run_checks(*seed, *fast))?;
            let text = checks_json(&checks);
            let path = write_text(&out_dir(cli), "checks.json", &text)?;
            Ok(report(&RunReport { files: vec![path], checks, warnings: Vec::new() }))
        }
        Command::Sweep { kind, fast } => {
            let table = with_jobs(cli.jobs, || run_sweep(*kind, *fast))??;
            let format = cli.format.unwrap_or(Format::Csv);
            let text = table.render(format);
            print!("{text}");
            let path = write_text(&out_dir(cli), &format!("sweep_{}.{}", table.name, format.extension()), &text)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
