use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coagency::abstraction::{
    check_abstraction, check_strong, intervention_suite, AbstractionReport, CheckConfig, StrongMode, StrongReport,
    SubsetPolicy,
};
use coagency::examples::{self, ExampleError, ExampleOutcome};
use coagency::experiment::{run_to_dir, ExperimentConfig, ExperimentError, RunReport};
use coagency::scm::{Layer, VarId};
use coagency::surrogate::SurrogateError;
use coagency::voting::Mechanism;

const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NON_FINITE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "coagency", version, about = "Mechanized causal models, agency and abstraction checks, and the voting experiment")]
struct Cli {
    /// Master seed (overrides the config file's seed for experiments).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print machine-readable JSON instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worked models.
    #[command(subcommand)]
    Examples(ExamplesCmd),
    /// Abstraction checks between registered models.
    #[command(subcommand)]
    Abstraction(AbstractionCmd),
    /// The voting experiment.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum ExamplesCmd {
    /// List example and model names.
    List,
    /// Run an example and verify its claimed properties.
    Run {
        name: String,
        #[arg(long)]
        grid_step: Option<f64>,
    },
}

#[derive(Subcommand)]
enum AbstractionCmd {
    /// Check that a high-level model abstracts a low-level one.
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    low: String,
    #[arg(long)]
    high: String,
    #[arg(long)]
    grid_step: Option<f64>,
    /// "all", or subsets of high-level mechanism variables such as "S,R;A".
    #[arg(long)]
    subsets: Option<String>,
    /// Compare forward samples of this size instead of exact tables.
    #[arg(long)]
    samples: Option<usize>,
    /// Also check that ω is surjective on the high-level grid.
    #[arg(long)]
    strong: bool,
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Train the surrogate for one mechanism and write reports.
    Run {
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Option<Mechanism>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|e: coagency::voting::VotingError| e.to_string())
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable output"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let code = match &cli.command {
        Command::Examples(cmd) => cmd_examples(&cli, cmd),
        Command::Abstraction(AbstractionCmd::Check(args)) => cmd_check(&cli, args),
        Command::Experiment(ExperimentCmd::Run { mechanism, config, out }) => {
            cmd_experiment(&cli, *mechanism, config.as_ref(), out)
        }
    };
    ExitCode::from(code)
}

fn cmd_examples(cli: &Cli, cmd: &ExamplesCmd) -> u8 {
    match cmd {
        ExamplesCmd::List => {
            #[derive(Serialize)]
            struct Listing {
                examples: Vec<&'static str>,
                models: Vec<&'static str>,
            }
            let l = Listing {
                examples: examples::EXAMPLES.to_vec(),
                models: examples::MODELS.to_vec(),
            };
            if cli.json {
                print_json(&l);
            } else {
                println!("examples: {}", l.examples.join(", "));
                println!("models:   {}", l.models.join(", "));
            }
            0
        }
        ExamplesCmd::Run { name, grid_step } => match examples::run_example(name, *grid_step) {
            Ok(outcome) => {
                if cli.json {
                    print_json(&outcome);
                } else {
                    print_outcome(&outcome);
                }
                if outcome.passed {
                    0
                } else {
                    EXIT_VERDICT
                }
            }
            Err(ExampleError::Unknown(n)) => {
                eprintln!("error: unknown example {n:?}; known: {}", examples::EXAMPLES.join(", "));
                EXIT_USAGE
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            }
        },
    }
}

fn print_outcome(o: &ExampleOutcome) {
    println!("{} (grid step {})", o.name, o.grid_step);
    println!("solutions: {}", o.solutions.len());
    for s in &o.solutions {
        println!("  {s}");
    }
    if let Some(a) = &o.abstraction {
        println!(
            "abstraction: {} ({}/{})",
            if a.holds { "PASS" } else { "FAIL" },
            a.matched,
            a.tested
        );
        if let Some(f) = &a.first_failure {
            println!("  first failure: {f}");
        }
    }
    for c in &o.claims {
        let detail = if c.detail.is_empty() {
            String::new()
        } else {
            format!(" [{}]", c.detail)
        };
        println!("[{}] {}{}", if c.passed { "ok" } else { "FAILED" }, c.claim, detail);
    }
    println!("verdict: {}", if o.passed { "PASS" } else { "FAIL" });
}

fn parse_subsets(spec: &str) -> SubsetPolicy {
    if spec.trim().eq_ignore_ascii_case("all") {
        return SubsetPolicy::All;
    }
    let var = |name: &str| {
        let name = name.trim();
        VarId::new(Layer::Mechanism, name.strip_prefix('~').unwrap_or(name))
    };
    SubsetPolicy::Exactly(
        spec.split(';')
            .map(|group| group.split(',').filter(|s| !s.trim().is_empty()).map(var).collect())
            .collect(),
    )
}

#[derive(Serialize)]
struct CheckOutput {
    low: String,
    high: String,
    report: AbstractionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    strong: Option<StrongReport>,
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> u8 {
    let Some((low, high, map, default_policy)) = examples::abstraction_pair(&args.low, &args.high, args.grid_step)
    else {
        eprintln!(
            "error: no registered pair {} -> {}; models: {}",
            args.low,
            args.high,
            examples::MODELS.join(", ")
        );
        return EXIT_USAGE;
    };
    let policy = args.subsets.as_deref().map(parse_subsets).unwrap_or(default_policy);
    let cfg = match args.samples {
        Some(n) => CheckConfig::sampled(n, cli.seed.unwrap_or(0)),
        None => CheckConfig::exact(),
    };
    let run = || -> Result<CheckOutput, coagency::abstraction::AbstractionError> {
        let suite = intervention_suite(&low, &map, &policy, None)?;
        let report = check_abstraction(&low, &high, &map, &suite, &cfg)?;
        let strong = if args.strong {
            let domains: BTreeMap<VarId, _> = map
                .omega
                .vars()
                .filter_map(|v| high.mech().domain(v).map(|d| (v.clone(), d.clone())))
                .collect();
            Some(check_strong(&low, &map, &domains, StrongMode::Exhaustive)?)
        } else {
            None
        };
        Ok(CheckOutput {
            low: args.low.clone(),
            high: args.high.clone(),
            report,
            strong,
        })
    };
    let out = match run() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&out).expect("serializable report") + "\n";
        if let Err(e) = coagency::experiment::write_atomic(path, text.as_bytes()) {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    if cli.json {
        print_json(&out);
    } else {
        let r = &out.report;
        println!("{:<22} {:<22} {:>8} {:>8} {:>10} {:>6}", "low", "high", "tested", "matched", "tol", "holds");
        println!(
            "{:<22} {:<22} {:>8} {:>8} {:>10.1e} {:>6}",
            out.low, out.high, r.tested, r.matched, r.tol, r.holds
        );
        if let Some(f) = r.first_failure() {
            println!(
                "first failure: {} ({} low vs {} high distributions, mismatch {:e}{})",
                f.intervention,
                f.low_count,
                f.high_count,
                f.max_mismatch,
                f.note.as_deref().map(|n| format!(", {n}")).unwrap_or_default()
            );
        }
        if let Some(s) = &out.strong {
            println!("strong: {} (coverage {})", s.strong, s.coverage);
        }
        println!("abstraction: {} ({}/{})", if r.holds { "PASS" } else { "FAIL" }, r.matched, r.tested);
    }
    let ok = out.report.holds && out.strong.as_ref().is_none_or(|s| s.strong);
    if ok {
        0
    } else {
        EXIT_VERDICT
    }
}

fn print_report(r: &RunReport) {
    let e = &r.eval;
    println!("mechanism      {}", e.mechanism);
    println!("model MAE      {:.4}", e.model_mae);
    println!("baseline MAE   {:.4}", e.baseline_mae);
    println!("improvement    {:.1}%", 100.0 * e.improvement);
    if let Some(f) = &e.stochasticity_floor {
        println!(
            "floor MAE      {:.4} ({} interventions x {} redraws)",
            f.mae, f.interventions, f.redraws
        );
    }
    if let Some(res) = e.max_fixed_point_residual {
        println!("fixed point    {res:.2e}");
    }
    println!(
        "{:>7} {:>8} {:>10} {:>10} {:>8} {:>13}",
        "country", "citizens", "MAE(δ)", "MAE(α)", "MAE(q)", "baseline MAE"
    );
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
    for c in &e.per_country {
        println!(
            "{:>7} {:>8} {:>10} {:>10} {:>8.3} {:>13.3}",
            c.country,
            c.citizens,
            opt(c.mae_delta),
            opt(c.mae_alpha),
            c.mae_q,
            c.baseline_mae_q
        );
    }
    for c in &r.verdict.checks {
        println!(
            "[{}] {} = {:.6} (limit {})",
            if c.passed { "ok" } else { "FAILED" },
            c.name,
            c.value,
            c.threshold
        );
    }
    println!("verdict: {}", if r.verdict.passed { "PASS" } else { "FAIL" });
}

fn cmd_experiment(cli: &Cli, mechanism: Option<Mechanism>, config: Option<&PathBuf>, out: &Path) -> u8 {
    let mut cfg = match config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let Some(mechanism) = mechanism.or(cfg.mechanism) else {
        eprintln!("error: no mechanism given (use --mechanism or set it in the config)");
        return EXIT_USAGE;
    };
    let command: Vec<String> = std::env::args().collect();
    match run_to_dir(&cfg, mechanism, out, &command.join(" ")) {
        Ok((run, _)) => {
            if cli.json {
                print_json(&run.report);
            } else {
                print_report(&run.report);
                println!("artifacts written to {}", out.display());
            }
            if run.report.verdict.passed {
                0
            } else {
                EXIT_VERDICT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ExperimentError::Config(_) | ExperimentError::Io { .. } => EXIT_USAGE,
                ExperimentError::Surrogate(SurrogateError::NonFinite { .. }) => EXIT_NON_FINITE,
                ExperimentError::Surrogate(SurrogateError::InvalidConfig(_))
                | ExperimentError::Surrogate(SurrogateError::Voting(coagency::voting::VotingError::InvalidConfig(_))) => {
                    EXIT_USAGE
                }
                ExperimentError::Surrogate(_) => EXIT_RUNTIME,
            }
        }
    }
}
