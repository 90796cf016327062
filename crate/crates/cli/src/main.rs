//! `harq`: solve HARQ power policies, sweep the mean SNR and write CSV.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use harq_power::experiment::{csv_header, csv_rows, parse_power, parse_snr_list, run, ExperimentSpec};
use harq_power::{Error, PolicyKind, Scheme};

const EXIT_USAGE: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "harq", version, about = "Outage-minimizing HARQ power policies over Nakagami-m fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// State-dependent power adaptation (multi-bit feedback).
    SolveAdaptation(SpecArgs),
    /// Per-round power allocation (one-bit feedback).
    SolveAllocation(SpecArgs),
    /// Closed-form high-SNR allocation.
    SolveGp(SpecArgs),
    /// Solve a policy and validate it by Monte-Carlo simulation.
    Simulate(SpecArgs),
    /// Sweep the mean SNR for the policy named by --policy.
    Sweep(SpecArgs),
    /// Sweep several policies over the same SNR points into one CSV.
    Compare {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated policies.
        #[arg(long, default_value = "co,al,gp")]
        policies: String,
    },
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// key = value spec file; command-line flags override its entries.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rate: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Peak power, or "inf".
    #[arg(long)]
    pmax: Option<String>,
    /// start:stop:step or a comma list, in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Monte-Carlo packets per point (0 = no simulation).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn build(&self, fixed: Option<PolicyKind>) -> harq_power::Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
                ExperimentSpec::parse(&text)?
            }
            None => ExperimentSpec::default(),
        };
        if let Some(s) = &self.scheme {
            spec.scheme = s.parse::<Scheme>()?;
        }
        if let Some(p) = &self.policy {
            spec.policy = p.parse()?;
        }
        if let Some(p) = fixed {
            spec.policy = p;
        }
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(r) = self.rate {
            spec.rate = r;
        }
        if let Some(k) = self.rounds {
            spec.rounds = k;
        }
        if let Some(p) = &self.pmax {
            spec.p_max = parse_power(p)?;
        }
        if let Some(s) = &self.snr_db {
            spec.snr_db = parse_snr_list(s)?;
        }
        if let Some(n) = self.grid_n {
            spec.grid_n = n;
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = &self.out {
            spec.out = Some(o.clone());
        }
        Ok(spec)
    }
}

fn configure_threads() -> harq_power::Result<()> {
    let Ok(raw) = std::env::var("HARQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("HARQ_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))
}

fn execute(cli: Cli) -> harq_power::Result<()> {
    configure_threads()?;
    let (args, policies) = match &cli.command {
        Command::SolveAdaptation(a) => (a, vec![Some(PolicyKind::Ad)]),
        Command::SolveAllocation(a) => (a, vec![Some(PolicyKind::Al)]),
        Command::SolveGp(a) => (a, vec![Some(PolicyKind::Gp)]),
        Command::Simulate(a) | Command::Sweep(a) => (a, vec![None]),
        Command::Compare { spec, policies } => {
            let kinds = policies
                .split(',')
                .map(|p| p.parse().map(Some))
                .collect::<harq_power::Result<Vec<_>>>()?;
            (spec, kinds)
        }
    };
    let mut specs = policies
        .iter()
        .map(|p| args.build(*p))
        .collect::<harq_power::Result<Vec<_>>>()?;
    if matches!(cli.command, Command::Simulate(_)) {
        for s in &mut specs {
            if s.trials == 0 {
                s.trials = 100_000;
            }
        }
    }
    for s in &specs {
        s.validate()?;
    }

    let mut body = csv_header(specs[0].rounds);
    body.push('\n');
    for s in &specs {
        let rows = run(s)?;
        body.push_str(&csv_rows(s, &rows));
    }
    match &specs[0].out {
        Some(path) => fs::write(path, body)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .map_err(|e| Error::Numerical(format!("cannot write output: {e}")))?;
        }
    }
    Ok(())
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code, extra) = match &e {
                Error::InvalidParameter(_) => ("invalid_parameter", EXIT_USAGE, String::new()),
                Error::NonConvergence { stage, .. } => ("non_convergence", EXIT_NO_CONVERGENCE, format!(" stage={}", quote(stage))),
                Error::Infeasible(_) => ("infeasible", 1, String::new()),
                Error::Numerical(_) => ("numerical", 1, String::new()),
            };
            eprintln!("error kind={kind}{extra} message={}", quote(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
