//! Subcommands and their exit codes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use resilience_core::analyze::{self, AnalysisError, SimulationConfig, SimulationError, VerificationReport};
use resilience_core::components::ComponentSet;
use resilience_core::model::MdpWithRepair;
use resilience_core::rational::{parse_rational, to_f64};
use resilience_core::synth::{Memory, SynthError, SynthesisOutcome};
use resilience_core::{synthesize, Rational, TransformedMdp};

use crate::document::{ModelDocument, SchedulerDocument};

pub const EXIT_OK: i32 = 0;
/// No resilient scheduler exists, or the given one is not resilient.
pub const EXIT_NEGATIVE: i32 = 1;
/// Invalid model, or a scheduler that does not fit the model.
pub const EXIT_INVALID: i32 = 2;
/// Unreadable or malformed input file.
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
/// Solver or analysis failure, or an output file that cannot be written.
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "resilience",
    version,
    about = "Resilient scheduler synthesis for MDPs with repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model document.
    Validate { model: PathBuf },
    /// Compute an optimal resilient scheduler.
    Synthesize {
        model: PathBuf,
        #[arg(long, value_parser = threshold_arg)]
        threshold: Rational,
        #[arg(long)]
        cost_bound: u64,
        /// Where to write the scheduler document.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every linear program that was solved.
        #[arg(long)]
        dump_lp: bool,
        /// Print the computed end components.
        #[arg(long)]
        dump_components: bool,
    },
    /// Check a scheduler document against a model.
    Verify {
        model: PathBuf,
        scheduler: PathBuf,
        /// Defaults to the threshold stored in the document.
        #[arg(long, value_parser = threshold_arg)]
        threshold: Option<Rational>,
        /// Defaults to the cost bound stored in the document.
        #[arg(long)]
        cost_bound: Option<u64>,
    },
    /// Run a scheduler document on a model.
    Simulate {
        model: PathBuf,
        scheduler: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the first N steps of every trial.
        #[arg(long, default_value_t = 0)]
        trace: usize,
    },
}

fn threshold_arg(s: &str) -> Result<Rational, String> {
    let q = parse_rational(s).map_err(|e| e.to_string())?;
    if in_unit_interval(&q) {
        Ok(q)
    } else {
        Err(format!("threshold {q} is outside (0, 1]"))
    }
}

fn in_unit_interval(q: &Rational) -> bool {
    *q > Rational::from_integer(0.into()) && *q <= Rational::from_integer(1.into())
}

/// A failed command: exit code plus message for standard error.
struct Failure(i32, String);

type Outcome = Result<i32, Failure>;

/// Runs one command line. Regular output goes to `out`, diagnostics to
/// `err`; the return value is the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let mut text = String::new();
    let result = match cli.command {
        Command::Validate { model } => validate(&model, &mut text),
        Command::Synthesize {
            model,
            threshold,
            cost_bound,
            out,
            dump_lp,
            dump_components,
        } => synthesize_cmd(
            &model,
            &threshold,
            cost_bound,
            out.as_deref(),
            dump_lp,
            dump_components,
            &mut text,
        ),
        Command::Verify {
            model,
            scheduler,
            threshold,
            cost_bound,
        } => verify_cmd(&model, &scheduler, threshold, cost_bound, &mut text),
        Command::Simulate {
            model,
            scheduler,
            steps,
            trials,
            seed,
            trace,
        } => simulate_cmd(
            &model,
            &scheduler,
            &SimulationConfig {
                steps,
                trials,
                seed,
                trace,
            },
            &mut text,
        ),
    };
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))
}

fn parse_model(path: &Path) -> Result<MdpWithRepair, Failure> {
    let text = read(path)?;
    let raw = ModelDocument::parse(&text)
        .and_then(|d| d.to_raw())
        .map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    MdpWithRepair::validated(&raw).map_err(|report| {
        let mut msg = format!("{}: invalid model", path.display());
        for v in &report.violations {
            let _ = write!(msg, "\n  {v}");
        }
        Failure(EXIT_INVALID, msg)
    })
}

fn parse_scheduler(path: &Path) -> Result<SchedulerDocument, Failure> {
    let text = read(path)?;
    SchedulerDocument::parse(&text).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn validate(path: &Path, out: &mut String) -> Outcome {
    let text = read(path)?;
    let raw = ModelDocument::parse(&text)
        .and_then(|d| d.to_raw())
        .map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    match MdpWithRepair::validated(&raw) {
        Ok(m) => {
            let _ = writeln!(out, "valid: {} states, {} error states", m.len(), m.errors().count());
            Ok(EXIT_OK)
        }
        Err(report) => {
            let _ = writeln!(out, "invalid: {} violations", report.violations.len());
            for v in &report.violations {
                let _ = writeln!(out, "  {v}");
            }
            Ok(EXIT_INVALID)
        }
    }
}

fn synthesize_cmd(
    path: &Path,
    threshold: &Rational,
    cost_bound: u64,
    dest: Option<&Path>,
    dump_lp: bool,
    dump_components: bool,
    out: &mut String,
) -> Outcome {
    let m = parse_model(path)?;
    let s = synthesize(&m, threshold, cost_bound).map_err(|e| match e {
        SynthError::InvalidModel(_) => Failure(EXIT_INVALID, e.to_string()),
        SynthError::InvalidThreshold(_) => Failure(EXIT_USAGE, e.to_string()),
        _ => Failure(EXIT_INTERNAL, e.to_string()),
    })?;
    let mt = &s.transformed;
    if dump_lp {
        for (k, round) in s.components.rounds.iter().enumerate() {
            let _ = writeln!(out, "\\ components, round {k}, from {}", mt.id(round.init));
            out.push_str(&round.program.to_lp_text());
        }
        let _ = writeln!(out, "\\ resiliency");
        out.push_str(&s.program.program.to_lp_text());
    }
    if dump_components {
        write_components(mt, &s.components, out);
    }
    match &s.outcome {
        SynthesisOutcome::NoResilientScheduler => {
            let _ = writeln!(out, "no resilient scheduler");
            Ok(EXIT_NEGATIVE)
        }
        SynthesisOutcome::Resilient {
            scheduler,
            availability,
        } => {
            let _ = writeln!(out, "availability: {availability} ({:.6})", to_f64(availability));
            if let Some(dest) = dest {
                let doc = SchedulerDocument::from_composed(mt, &s.components, scheduler, threshold, availability);
                let mut json = doc.to_json();
                json.push('\n');
                fs::write(dest, json)
                    .map_err(|e| Failure(EXIT_INTERNAL, format!("cannot write {}: {e}", dest.display())))?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_components(mt: &TransformedMdp, comps: &ComponentSet, out: &mut String) {
    let _ = writeln!(out, "components: {}", comps.triples.len());
    for (k, t) in comps.triples.iter().enumerate() {
        let ids: Vec<String> = t.states.iter().map(|&s| mt.id(s)).collect();
        let _ = writeln!(out, "component {k}: availability {}", t.availability);
        let _ = writeln!(out, "  states: {}", ids.join(" "));
        for &s in &t.states {
            let dist: Vec<String> = t
                .scheduler
                .get(s)
                .unwrap_or(&[])
                .iter()
                .map(|(a, p)| format!("{}={p}", mt.mdp().choices(s)[*a].label))
                .collect();
            let _ = writeln!(out, "  {}: {}", mt.id(s), dist.join(" "));
        }
    }
}

fn write_report(mt: &TransformedMdp, report: &VerificationReport, out: &mut String) {
    let _ = writeln!(out, "resilient: {}", report.ok);
    let _ = writeln!(
        out,
        "availability: {} ({:.6})",
        report.availability,
        to_f64(&report.availability)
    );
    for c in &report.errors {
        let _ = writeln!(
            out,
            "error {}: res {} ({:.6}) {} threshold {}, almost-sure repair {}, mp {}",
            mt.id(c.error),
            c.res_probability,
            to_f64(&c.res_probability),
            if c.res_ok { ">=" } else { "<" },
            report.threshold,
            c.as_rep_ok,
            c.mp
        );
    }
}

fn verify_cmd(
    model: &Path,
    scheduler: &Path,
    threshold: Option<Rational>,
    cost_bound: Option<u64>,
    out: &mut String,
) -> Outcome {
    let m = parse_model(model)?;
    let doc = parse_scheduler(scheduler)?;
    let threshold = threshold.unwrap_or_else(|| doc.threshold());
    if !in_unit_interval(&threshold) {
        return Err(Failure(EXIT_USAGE, format!("threshold {threshold} is outside (0, 1]")));
    }
    let mt = TransformedMdp::new(&m, cost_bound.unwrap_or(doc.cost_bound));
    let sched = doc
        .bind_memoryless(&mt)
        .map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", scheduler.display())))?;
    let report = analyze::verify_resilient(&mt, &sched, &threshold).map_err(|e| analysis_failure(&mt, e))?;
    write_report(&mt, &report, out);
    Ok(if report.ok { EXIT_OK } else { EXIT_NEGATIVE })
}

fn analysis_failure(mt: &TransformedMdp, e: AnalysisError) -> Failure {
    match e {
        AnalysisError::OutsideDomain(s) => Failure(
            EXIT_INVALID,
            format!("scheduler has no decision for reachable state {}", mt.id(s)),
        ),
        AnalysisError::NoSuchChoice { state, choice } => Failure(
            EXIT_INVALID,
            format!("scheduler picks missing choice {choice} at {}", mt.id(state)),
        ),
        other => Failure(EXIT_INTERNAL, other.to_string()),
    }
}

fn memory_label(m: &MdpWithRepair, mem: Memory) -> String {
    match mem {
        Memory::Idle => "idle".into(),
        Memory::Repair { error, cost } => format!("{}:{cost}", m.id(error)),
    }
}

fn simulate_cmd(model: &Path, scheduler: &Path, config: &SimulationConfig, out: &mut String) -> Outcome {
    let m = parse_model(model)?;
    let doc = parse_scheduler(scheduler)?;
    let mt = TransformedMdp::new(&m, doc.cost_bound);
    let sched = doc
        .bind(&mt)
        .map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", scheduler.display())))?;
    let stats = analyze::simulate(&m, &sched, config).map_err(|e| {
        let msg = match e {
            SimulationError::NoDecision { state, memory } => {
                format!(
                    "scheduler has no decision for {} with memory {}",
                    m.id(state),
                    memory_label(&m, memory)
                )
            }
            SimulationError::NoUpdate { state, memory, next } => format!(
                "no memory update from {} with memory {} to {}",
                m.id(state),
                memory_label(&m, memory),
                m.id(next)
            ),
            other => other.to_string(),
        };
        Failure(EXIT_INVALID, msg)
    })?;
    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    let _ = writeln!(out, "trials: {}", config.trials);
    let _ = writeln!(out, "steps: {}", config.steps);
    let _ = writeln!(out, "seed: {}", config.seed);
    let _ = writeln!(out, "mean availability: {}", opt(stats.mean_availability));
    let _ = writeln!(out, "std dev: {}", opt(stats.availability_std_dev));
    let _ = writeln!(out, "repair success rate: {}", opt(stats.repair_success_rate));
    let (ok, failed, open) = stats.trials.iter().fold((0, 0, 0), |(a, b, c), t| {
        (a + t.repairs_ok, b + t.repairs_failed, c + t.repairs_open)
    });
    let _ = writeln!(out, "repairs: {ok} ok, {failed} over budget, {open} open");
    if config.trace > 0 {
        for (k, t) in stats.trials.iter().enumerate() {
            let steps: Vec<String> = t
                .trace
                .iter()
                .map(|&(s, mem)| format!("{}/{}", m.id(s), memory_label(&m, mem)))
                .collect();
            let _ = writeln!(out, "trial {k}: {}", steps.join(" "));
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        let (code, out, err) = run_args(&[
            "resilience",
            "synthesize",
            "m.json",
            "--threshold",
            "0",
            "--cost-bound",
            "2",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("outside (0, 1]"));
        assert_eq!(
            run_args(&[
                "resilience",
                "synthesize",
                "m.json",
                "--threshold",
                "3/2",
                "--cost-bound",
                "2"
            ])
            .0,
            EXIT_USAGE
        );
        assert_eq!(run_args(&["resilience", "frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["resilience"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_is_not_an_error() {
        let (code, out, err) = run_args(&["resilience", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("synthesize"));
        assert!(err.is_empty());
    }

    #[test]
    fn missing_file_is_a_parse_error() {
        let (code, _, err) = run_args(&["resilience", "validate", "/nonexistent/model.json"]);
        assert_eq!(code, EXIT_PARSE);
        assert!(err.contains("cannot read"));
    }

    #[test]
    fn threshold_forms() {
        assert_eq!(threshold_arg("0.8"), threshold_arg("4/5"));
        assert!(threshold_arg("1").is_ok());
        assert!(threshold_arg("-1/2").is_err());
        assert!(threshold_arg("x").is_err());
    }
}
