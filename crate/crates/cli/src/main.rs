use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deltasat::dpll::{solve, DpllConfig};
use deltasat::frontend::report::Report;
use deltasat::frontend::sexp::parse_rational;
use deltasat::frontend::{bmc, check_invariant, gen_sat_encoding, parse, parse_dimacs, print, unroll_bmc, Options, ProblemFile};
use deltasat::icp::{Epsilon, Mode};
use deltasat::normalize::to_standard_form;
use deltasat::oracle::grid_decide;
use num_rational::BigRational;

#[derive(Parser)]
#[command(name = "deltasat", version, about = "Delta-complete decision procedure for nonlinear real arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the delta-weakening of a problem file.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Decide with the grid oracle instead (at most three variables).
        #[arg(long)]
        oracle: bool,
    },
    /// Bounded model checking of a transition system to the given depth.
    Bmc {
        file: PathBuf,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Check initiation, consecution and safety of the declared invariant.
    Invcheck {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Print the real-arithmetic encoding of a DIMACS CNF file.
    GenSat { file: PathBuf },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_parser = rational)]
    delta: Option<BigRational>,
    #[arg(long, value_parser = rational)]
    epsilon: Option<BigRational>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Also print the range of every asserted constraint.
    #[arg(long)]
    witness: bool,
    /// Seed for branching tie-breaks.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_boxes: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Certificate,
    PaperEpsilon,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

fn rational(s: &str) -> Result<BigRational, String> {
    parse_rational(s).ok_or_else(|| format!("'{s}' is not a rational number"))
}

fn default_delta() -> BigRational {
    BigRational::new(1.into(), 1000.into())
}

fn config(opts: &Options, args: &SolverArgs) -> DpllConfig {
    let delta = args.delta.clone().or_else(|| opts.delta.clone()).unwrap_or_else(default_delta);
    let mut cfg = DpllConfig::new(delta);
    if let Some(e) = args.epsilon.clone().or_else(|| opts.epsilon.clone()) {
        cfg.icp.epsilon = Epsilon::Fixed(e);
    }
    cfg.icp.mode = match args.mode {
        Some(ModeArg::Certificate) => Mode::Certificate,
        Some(ModeArg::PaperEpsilon) => Mode::PaperEpsilon,
        None => opts.mode.unwrap_or(Mode::Certificate),
    };
    cfg.icp.seed = args.seed;
    if let Some(n) = args.max_boxes {
        cfg.icp.max_boxes = n;
    }
    cfg
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<ProblemFile, String> {
    parse(&read(path)?).map_err(|e| format!("{}:{e}", path.display()))
}

fn exit_code(verdict: &str) -> ExitCode {
    ExitCode::from(match verdict {
        "delta-sat" => 0,
        "unsat" => 1,
        _ => 2,
    })
}

fn emit(report: &Report, args: &SolverArgs) -> ExitCode {
    match args.format {
        Format::Text => print!("{}", report.render_text(args.witness)),
        Format::Structured => print!("{}", report.render_json()),
    }
    exit_code(report.verdict)
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Solve { file, solver, oracle } => {
            let p = load(&file)?;
            if p.system.is_some() {
                return Err(format!("{}: a transition system; use bmc or invcheck", file.display()));
            }
            let sf = to_standard_form(&p.to_sentence().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let cfg = config(&p.options, &solver);
            let report = if oracle {
                let r = grid_decide(&sf.closure(), &cfg.icp.delta).map_err(|e| e.to_string())?;
                Report::from_oracle(&sf, &r)
            } else {
                Report::from_solve(&sf, &solve(&sf, &cfg).map_err(|e| e.to_string())?)
            };
            Ok(emit(&report, &solver))
        }
        Command::Bmc { file, depth, solver } => {
            let p = load(&file)?;
            let ts = p.system.as_ref().ok_or_else(|| format!("{}: no transition system declared", file.display()))?;
            let mut opts = p.options.clone();
            opts.delta.get_or_insert_with(bmc::default_delta);
            let sf = to_standard_form(&unroll_bmc(ts, depth)).map_err(|e| e.to_string())?;
            let r = solve(&sf, &config(&opts, &solver)).map_err(|e| e.to_string())?;
            Ok(emit(&Report::from_solve(&sf, &r), &solver))
        }
        Command::Invcheck { file, solver } => {
            let p = load(&file)?;
            let ts = p.system.as_ref().ok_or_else(|| format!("{}: no transition system declared", file.display()))?;
            let mut opts = p.options.clone();
            opts.delta.get_or_insert_with(bmc::default_delta);
            let report = check_invariant(ts, &config(&opts, &solver))
                .ok_or_else(|| format!("{}: no (invariant ...) declared", file.display()))?
                .map_err(|e| e.to_string())?;
            let mut sections = Vec::new();
            for (name, sentence, result) in &report.checks {
                let sf = to_standard_form(sentence).map_err(|e| e.to_string())?;
                sections.push((*name, Report::from_solve(&sf, result)));
            }
            match solver.format {
                Format::Text => {
                    for (name, r) in &sections {
                        print!("{name}: {}", r.render_text(solver.witness));
                    }
                    println!("{}", report.conclusion());
                }
                Format::Structured => {
                    let checks: Vec<serde_json::Value> = sections
                        .iter()
                        .map(|(name, r)| serde_json::json!({ "check": name, "report": r }))
                        .collect();
                    let doc = serde_json::json!({ "verdict": report.overall(), "conclusion": report.conclusion(), "checks": checks });
                    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
                }
            }
            Ok(exit_code(report.overall()))
        }
        Command::GenSat { file } => {
            let cnf = parse_dimacs(&read(&file)?).map_err(|e| format!("{}:{e}", file.display()))?;
            print!("{}", print(&gen_sat_encoding(&cnf)));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors share the error exit code rather than clap's 2
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
