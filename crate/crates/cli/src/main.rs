use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use padic_affine::clopen::ClopenSet;
use padic_affine::literal::{self, format_rational, ParseError};
use padic_affine::measure::IntensityMeasure;
use padic_affine::padic::Prime;
use padic_affine::poisson::{self, CylinderFunction, CylinderShape, Resolution, SamplingPlan};
use padic_affine::representation::{
    check_isometry, check_lemma_v, check_rn_identity, decoupler_facts, find_decoupler, CheckKind,
    CheckMode, CheckReport, CheckSettings,
};
use padic_affine::suite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

const DEFAULT_SAMPLES: usize = 20_000;

#[derive(Parser, Debug)]
#[command(name = "padic-affine", version, about = "Exact checks for p-adic affine actions on Poisson measures")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    /// The prime p.
    #[arg(long = "p", global = true, default_value_t = 3, env = "PADIC_AFFINE_P")]
    p: u64,
    #[arg(long, global = true, default_value_t = 42, env = "PADIC_AFFINE_SEED")]
    seed: u64,
    /// Monte Carlo sample size (at least 1000).
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES, env = "PADIC_AFFINE_SAMPLES")]
    samples: usize,
    /// Sampling digits added to the required depth.
    #[arg(long, global = true, default_value_t = poisson::DEFAULT_DEPTH_MARGIN, env = "PADIC_AFFINE_DEPTH_MARGIN")]
    depth_margin: u32,
    /// Relative tolerance of exact-mode checks.
    #[arg(long, global = true, env = "PADIC_AFFINE_TOLERANCE")]
    tolerance: Option<f64>,
    /// Standard errors allowed in Monte Carlo checks.
    #[arg(long, global = true, env = "PADIC_AFFINE_SIGMAS")]
    sigmas: Option<f64>,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, env = "PADIC_AFFINE_JSON")]
    json: Option<PathBuf>,
    /// Worker threads (the report does not depend on this).
    #[arg(long, global = true, env = "PADIC_AFFINE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the density of the pushforward of Haar measure.
    Pushforward {
        #[arg(long)]
        g: String,
    },
    /// Check that V_g transports Poisson expectations to the pushforward.
    Laplace {
        #[arg(long)]
        g: String,
        /// A test function (read as e^{<f, .>}) or any cylinder function.
        #[arg(long)]
        f: String,
    },
    /// Check the Radon-Nikodym density of the pushed Poisson measure.
    Rn {
        #[arg(long)]
        g: String,
        #[arg(long)]
        f: String,
    },
    /// Audit the isometry of U_g on e^{<f, .>}.
    Unitarity {
        #[arg(long)]
        g: String,
        #[arg(long)]
        f: String,
    },
    /// Find a localized shift moving L2 off L1.
    Decouple {
        #[arg(long)]
        l1: String,
        #[arg(long)]
        l2: String,
    },
    /// Draw Poisson configurations.
    Sample {
        /// Intensity density (a step function with tail 1).
        #[arg(long)]
        mu: String,
        #[arg(short = 'n', long = "count", default_value_t = 1)]
        n: usize,
        /// Sampling window; defaults to the smallest zero-centered ball
        /// containing the density deviation.
        #[arg(long)]
        window: Option<String>,
    },
    /// Randomized composition, isometry and duality audits.
    Audit {
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Run every check.
    VerifyAll {
        #[arg(long, default_value_t = suite::DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Parse a literal and print its canonical form.
    Parse {
        #[arg(allow_hyphen_values = true)]
        literal: String,
    },
}

enum Failure {
    Config(String),
    Parse(String, ParseError),
}

/// A literal given inline or as a path to a file holding it.
fn read_input(arg: &str) -> Result<String, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {arg}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn parsed<T>(
    arg: &str,
    what: &str,
    parse: impl Fn(&str, Prime) -> Result<T, ParseError>,
    prime: Prime,
) -> Result<T, Failure> {
    let text = read_input(arg)?;
    parse(&text, prime).map_err(|e| Failure::Parse(what.to_string(), e))
}

fn cylinder_or_exponential(text: &str, prime: Prime) -> Result<CylinderFunction, ParseError> {
    match literal::parse(text, prime)? {
        literal::Literal::Cylinder(c) => Ok(c),
        _ => {
            let f = literal::parse_step(text, prime)?;
            CylinderFunction::exponential(f).map_err(|e| ParseError {
                line: 1,
                column: 1,
                span: (0, text.len()),
                message: e.to_string(),
                cause: Some(Box::new(e)),
            })
        }
    }
}

#[derive(Serialize)]
struct Header {
    command: &'static str,
    p: u32,
    seed: u64,
    samples: usize,
    depth_margin: u32,
}

fn settings(config: &RunConfig) -> CheckSettings {
    let mut s = CheckSettings {
        seed: config.seed,
        samples: config.samples,
        depth_margin: config.depth_margin,
        ..CheckSettings::default()
    };
    if let Some(t) = config.tolerance {
        s.exact_tolerance = t;
    }
    if let Some(k) = config.sigmas {
        s.mc_sigmas = k;
    }
    s
}

fn report_value(command: &'static str, prime: Prime, config: &RunConfig, body: Value) -> Value {
    let header = Header {
        command,
        p: prime.get(),
        seed: config.seed,
        samples: config.samples,
        depth_margin: config.depth_margin,
    };
    let mut v = serde_json::to_value(header).expect("plain struct");
    if let (Value::Object(map), Value::Object(extra)) = (&mut v, body) {
        map.extend(extra);
    }
    v
}

fn checks_body(reports: &[CheckReport]) -> Value {
    let (failures, findings) = suite::summarize(reports);
    json!({
        "failures": failures,
        "findings": findings,
        "reports": reports,
    })
}

fn log_reports(reports: &[CheckReport]) {
    for r in reports {
        eprintln!("{r}");
    }
}

fn check_mc_samples(config: &RunConfig) -> Result<(), Failure> {
    if config.samples < poisson::MIN_MC_SAMPLES {
        return Err(Failure::Config(format!(
            "--samples must be at least {} for Monte Carlo checks",
            poisson::MIN_MC_SAMPLES
        )));
    }
    Ok(())
}

fn dispatch(command: &Command, config: &RunConfig, prime: Prime) -> Result<(Value, bool), Failure> {
    let s = settings(config);
    let checks = |name: &'static str, reports: Vec<CheckReport>| {
        log_reports(&reports);
        let ok = !reports.iter().any(CheckReport::is_failure);
        (report_value(name, prime, config, checks_body(&reports)), ok)
    };
    let domain = |e: padic_affine::error::Error| Failure::Config(e.to_string());
    match command {
        Command::Pushforward { g } => {
            let g = parsed(g, "--g", literal::parse_affine, prime)?;
            let rho = IntensityMeasure::haar(prime).pushforward(&g);
            eprintln!("density {rho}");
            let body = json!({
                "g": g.to_string(),
                "density": rho.to_string(),
                "l1_deviation": format_rational(&rho.l1_deviation()),
                "mass_defect": format_rational(&rho.mass_defect()),
            });
            Ok((report_value("pushforward", prime, config, body), true))
        }
        Command::Laplace { g, f } => {
            check_mc_samples(config)?;
            let g = parsed(g, "--g", literal::parse_affine, prime)?;
            let f = parsed(f, "--f", cylinder_or_exponential, prime)?;
            let mut reports = vec![check_lemma_v(&g, &f, CheckMode::Exact, &s).map_err(domain)?];
            reports.push(
                check_lemma_v(&g, &f, CheckMode::MonteCarlo, &s)
                    .map_err(domain)?
                    .renamed("laplace-transport-mc"),
            );
            Ok(checks("laplace", reports))
        }
        Command::Rn { g, f } => {
            check_mc_samples(config)?;
            let g = parsed(g, "--g", literal::parse_affine, prime)?;
            let f = parsed(f, "--f", literal::parse_step, prime)?;
            let reports = vec![
                check_rn_identity(&g, &f, CheckMode::Exact, &s).map_err(domain)?,
                check_rn_identity(&g, &f, CheckMode::MonteCarlo, &s)
                    .map_err(domain)?
                    .renamed("rn-identity-mc"),
            ];
            Ok(checks("rn", reports))
        }
        Command::Unitarity { g, f } => {
            check_mc_samples(config)?;
            let g = parsed(g, "--g", literal::parse_affine, prime)?;
            let f = parsed(f, "--f", literal::parse_step, prime)?;
            let reports = vec![
                check_isometry(&g, &f, CheckMode::Exact, &s).map_err(domain)?,
                check_isometry(&g, &f, CheckMode::MonteCarlo, &s).map_err(domain)?,
            ];
            Ok(checks("unitarity", reports))
        }
        Command::Decouple { l1, l2 } => {
            let l1 = parsed(l1, "--l1", literal::parse_set, prime)?;
            let l2 = parsed(l2, "--l2", literal::parse_set, prime)?;
            let g = find_decoupler(&l1, &l2);
            let facts = decoupler_facts(&l1, &l2, &g).map_err(domain)?;
            let mut report = CheckReport::exact(
                "decoupler-postconditions",
                CheckKind::Test,
                if facts.all() { 1.0 } else { 0.0 },
                1.0,
                &s,
            );
            report = report.with_note(format!("{g}"));
            log_reports(std::slice::from_ref(&report));
            let ok = report.pass;
            let body = json!({
                "g": g.to_string(),
                "facts": facts,
                "failures": usize::from(!ok),
                "findings": 0,
                "reports": [report],
            });
            Ok((report_value("decouple", prime, config, body), ok))
        }
        Command::Sample { mu, n, window } => {
            let mu = parsed(mu, "--mu", literal::parse_measure, prime)?;
            let window = match window {
                Some(w) => parsed(w, "--window", literal::parse_set, prime)?,
                None => {
                    let deviation = mu.density().deviation_support();
                    ClopenSet::from_ball(poisson::enclosing_window(prime, &[&deviation]))
                }
            };
            let ball = poisson::enclosing_window(prime, &[&window]);
            let depth = poisson::required_depth(&[&mu as &dyn Resolution, &window], &ball) + config.depth_margin;
            let plan = SamplingPlan::new(&mu, &window, depth);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let configurations: Vec<Vec<String>> = (0..*n)
                .map(|_| plan.sample_points(&mut rng).iter().map(format_rational).collect())
                .collect();
            eprintln!("{} configurations in {window} at depth {depth}", configurations.len());
            let body = json!({
                "window": window.to_string(),
                "depth": depth,
                "total_mass": format_rational(plan.total_mass()),
                "configurations": configurations,
            });
            Ok((report_value("sample", prime, config, body), true))
        }
        Command::Audit { trials } => Ok(checks("audit", suite::audit(prime, *trials, &s))),
        Command::VerifyAll { trials } => {
            check_mc_samples(config)?;
            Ok(checks("verify-all", suite::verify_all_with(prime, &s, *trials)))
        }
        Command::Parse { literal: text } => {
            let text = read_input(text)?;
            let value = literal::parse(&text, prime).map_err(|e| Failure::Parse(String::new(), e))?;
            let kind = value.type_name();
            let canonical = literal::print(&value);
            let mut extra = json!({ "type": kind, "canonical": canonical });
            if let literal::Literal::Cylinder(c) = &value {
                if let CylinderShape::Exponential(f) = c.shape() {
                    extra["support"] = json!(f.deviation_support().to_string());
                }
            }
            if let literal::Literal::Step(f) = &value {
                extra["radius"] = json!(f.radius());
            }
            Ok((report_value("parse", prime, config, extra), true))
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let config = &cli.config;
    let prime = Prime::new(config.p).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(workers) = config.workers {
        if workers == 0 {
            return Err(Failure::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let (report, ok) = dispatch(&cli.command, config, prime)?;
    let text = serde_json::to_string_pretty(&report).expect("json values serialize");
    println!("{text}");
    if let Some(path) = &config.json {
        fs::write(path, format!("{text}\n"))
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard test failures");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Parse(what, e)) => {
            let prefix = if what.is_empty() { String::new() } else { format!("{what}: ") };
            eprintln!("parse error: {prefix}{e}");
            ExitCode::from(2)
        }
    }
}
