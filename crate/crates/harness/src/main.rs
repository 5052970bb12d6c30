use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ieqsim_harness::study::{default_fine_dt, write_bench_csv};
use ieqsim_harness::{bench, converge, read_trajectory, reference, run, scan, write_trajectory, ExperimentConfig};
use ieqsim_harness::Result;

#[derive(Parser)]
#[command(name = "ieqsim", version, about = "Energy-quadratised time stepping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step one scheme and write the energy trace.
    Run(Common),
    /// Write a fine Störmer–Verlet trajectory sampled every `dt`.
    Reference(Common),
    /// Error against a reference for every scheme and step in `dt_list`.
    Converge(Common),
    /// Median stepping times.
    Bench(Common),
    /// Stability over a grid of steps.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref(), &self.set)?;
        if self.output.is_some() {
            cfg.output.clone_from(&self.output);
        }
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Summaries go to stdout when the CSV goes to a file, to stderr otherwise.
fn report(to_file: bool, text: &str) {
    if to_file {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let mut out = sink(cfg.output.as_deref())?;
            let summary = run(&cfg, out.as_mut())?;
            report(cfg.output.is_some(), &summary.to_string());
        }
        Command::Reference(c) => {
            let cfg = c.load()?;
            let fine = cfg.fine_dt.unwrap_or_else(|| default_fine_dt(cfg.dt));
            let traj = reference(&cfg, fine)?;
            write_trajectory(sink(cfg.output.as_deref())?.as_mut(), &traj)?;
            report(cfg.output.is_some(), &format!("fine_dt = {fine:?}\nsamples = {}\n", traj.samples.len()));
        }
        Command::Converge(c) => {
            let cfg = c.load()?;
            let traj = match &cfg.reference {
                Some(p) => Some(read_trajectory(&mut BufReader::new(File::open(p)?))?),
                None => None,
            };
            let rep = converge(&cfg, traj.as_ref())?;
            rep.write_csv(sink(cfg.output.as_deref())?.as_mut())?;
            let mut text = String::new();
            if let Some(f) = rep.fine_dt {
                text.push_str(&format!("fine_dt = {f:?}\n"));
            }
            for (m, s) in &rep.slopes {
                text.push_str(&format!("slope.{m} = {s:.4}\n"));
            }
            report(cfg.output.is_some(), &text);
        }
        Command::Bench(c) => {
            let cfg = c.load()?;
            let rows = bench(&cfg)?;
            write_bench_csv(sink(cfg.output.as_deref())?.as_mut(), &rows)?;
        }
        Command::Scan(c) => {
            let cfg = c.load()?;
            let rep = scan(&cfg)?;
            rep.write_csv(sink(cfg.output.as_deref())?.as_mut())?;
            let mut text = format!("cell = {:?}\n", rep.cell);
            if let Some(p) = rep.predicted {
                text.push_str(&format!("predicted_bound = {p:?}\n"));
            }
            for m in cfg.scheme_list() {
                match rep.boundary(m) {
                    Some(b) => text.push_str(&format!("boundary.{m} = {b:?}\n")),
                    None => text.push_str(&format!("boundary.{m} = none\n")),
                }
            }
            report(cfg.output.is_some(), &text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ieqsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
