//! Commands of the `co2` binary, as functions returning an exit code and the
//! text written to stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use co2::contracts::{check_compliance, ComplianceReport, ReadySet};
use co2::honesty::HonestyConfig;
use co2::runtime::{
    all_runs, normalize, system_step, test_honesty, test_honesty_from, HonestyTestOutcome,
    HonestyTestReport, NormalSystem, Readiness, RuntimeError, Trace,
};
use co2::typing::{type_process, type_system, ProcessType, SystemTypeError, TypeConfig, TypeError};
use co2::{parse_contract, parse_program, Defs, Participant, Program, SyntaxError, System};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_DISHONEST: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub steps: usize,
    pub wrd: usize,
    pub marking: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            steps: 64,
            wrd: 32,
            marking: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub bounds: Bounds,
    pub format: Format,
}

impl RunConfig {
    fn type_config(&self) -> TypeConfig {
        TypeConfig {
            honesty: HonestyConfig {
                marking_bound: self.bounds.marking,
                ..HonestyConfig::default()
            },
            ..TypeConfig::default()
        }
    }

    fn json(&self) -> bool {
        self.format == Format::Json
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimMode {
    All,
    Trace,
}

/// Exit code and stdout of a command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn new(code: i32, stdout: String) -> Outcome {
        Outcome { code, stdout }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Syntax { path: PathBuf, source: SyntaxError },
    #[error("{path}: {what}")]
    Input { path: PathBuf, what: String },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    parse_program(&read(path)?).map_err(|source| CliError::Syntax {
        path: path.to_path_buf(),
        source,
    })
}

fn load_system(path: &Path) -> Result<(Defs, System), CliError> {
    let prog = load_program(path)?;
    let s = prog.system.ok_or_else(|| CliError::Input {
        path: path.to_path_buf(),
        what: "no system item".into(),
    })?;
    Ok((prog.defs, s))
}

fn ready_set(x: &ReadySet) -> String {
    let v: Vec<String> = x.iter().map(|e| e.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn json_line(out: &mut String, v: &serde_json::Value) {
    out.push_str(&v.to_string());
    out.push('\n');
}

/// Decides `c ⋈ d` for the contracts in two `.ctr` files.
pub fn cmd_compliance(c_path: &Path, d_path: &Path, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let parse = |p: &Path| {
        parse_contract(&read(p)?).map_err(|source| CliError::Syntax {
            path: p.to_path_buf(),
            source,
        })
    };
    let (c, d) = (parse(c_path)?, parse(d_path)?);
    let mut out = String::new();
    let code = match check_compliance(&c, &d) {
        ComplianceReport::Compliant { configurations } => {
            if cfg.json() {
                json_line(
                    &mut out,
                    &json!({"verdict": "compliant", "configurations": configurations}),
                );
            } else {
                writeln!(out, "compliant ({configurations} configurations)").unwrap();
            }
            EXIT_OK
        }
        ComplianceReport::Violation {
            path,
            configuration,
            left_ready,
            right_ready,
        } => {
            let labels: Vec<String> = path.iter().map(|l| l.to_string()).collect();
            if cfg.json() {
                json_line(
                    &mut out,
                    &json!({
                        "verdict": "non-compliant",
                        "path": labels,
                        "configuration": configuration.to_string(),
                        "leftReady": ready_set(&left_ready),
                        "rightReady": ready_set(&right_ready),
                    }),
                );
            } else {
                writeln!(out, "non-compliant").unwrap();
                writeln!(out, "path: {}", labels.join(" ; ")).unwrap();
                writeln!(out, "configuration: {configuration}").unwrap();
                writeln!(
                    out,
                    "ready sets: {} vs {}",
                    ready_set(&left_ready),
                    ready_set(&right_ready)
                )
                .unwrap();
            }
            EXIT_NEGATIVE
        }
    };
    Ok(Outcome::new(code, out))
}

fn honest_report(f: &ProcessType, cfg: &RunConfig) -> Outcome {
    let stdout = if cfg.json() {
        format!("{}\n", json!({"verdict": "honest", "type": f.json()}))
    } else {
        format!("HONEST (typeable)\n{f}\n")
    };
    Outcome::new(EXIT_OK, stdout)
}

fn type_error_report(e: &TypeError, cfg: &RunConfig) -> Outcome {
    let mut out = String::new();
    let code = match e {
        TypeError::DishonestChannel(chans) => {
            if cfg.json() {
                json_line(&mut out, &json!({"verdict": "untypeable", "channels": chans}));
            } else {
                writeln!(out, "UNTYPEABLE").unwrap();
                for d in chans {
                    writeln!(out, "channel {}: {}", d.channel, d.channel_type).unwrap();
                    for w in &d.witness {
                        writeln!(out, "  {:<8} ({}, {})", w.rule, w.contract_state, w.channel_type)
                            .unwrap();
                    }
                }
            }
            EXIT_NEGATIVE
        }
        TypeError::UndefinedConstant(_) => {
            if cfg.json() {
                json_line(&mut out, &json!({"verdict": "untypeable", "reason": e.to_string()}));
            } else {
                writeln!(out, "UNTYPEABLE\n{e}").unwrap();
            }
            EXIT_NEGATIVE
        }
        TypeError::Inconclusive(_) | TypeError::FixpointDivergence { .. } => {
            inconclusive(&mut out, &e.to_string(), cfg);
            EXIT_INCONCLUSIVE
        }
    };
    Outcome::new(code, out)
}

fn inconclusive(out: &mut String, reason: &str, cfg: &RunConfig) {
    if cfg.json() {
        json_line(out, &json!({"verdict": "inconclusive", "reason": reason}));
    } else {
        writeln!(out, "INCONCLUSIVE\n{reason}").unwrap();
    }
}

/// Types the `process` item of a file, or `who`'s part of its `system`.
pub fn cmd_check(path: &Path, who: &Participant, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let prog = load_program(path)?;
    let tc = cfg.type_config();
    if let Some(p) = &prog.process {
        return Ok(match type_process(&prog.defs, p, &tc) {
            Ok(f) => honest_report(&f, cfg),
            Err(e) => type_error_report(&e, cfg),
        });
    }
    let Some(s) = &prog.system else {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            what: "no process or system item".into(),
        });
    };
    let ns = normalize(s);
    Ok(match type_system(who, &ns, &prog.defs, &tc) {
        Ok(f) => honest_report(&f, cfg),
        Err(SystemTypeError::Process(e)) => type_error_report(&e, cfg),
        Err(SystemTypeError::Inconclusive { rule, detail }) => {
            let mut out = String::new();
            inconclusive(&mut out, &format!("{rule}: {detail}"), cfg);
            Outcome::new(EXIT_INCONCLUSIVE, out)
        }
        Err(e @ SystemTypeError::Rule { .. }) => {
            let mut out = String::new();
            if cfg.json() {
                json_line(&mut out, &json!({"verdict": "untypeable", "reason": e.to_string()}));
            } else {
                writeln!(out, "UNTYPEABLE\n{e}").unwrap();
            }
            Outcome::new(EXIT_NEGATIVE, out)
        }
    })
}

#[derive(Serialize)]
struct RunLine<'a> {
    run: usize,
    step: usize,
    #[serde(flatten)]
    body: &'a serde_json::Value,
}

fn print_runs(out: &mut String, runs: &[Trace], cfg: &RunConfig) {
    for (k, t) in runs.iter().enumerate() {
        if cfg.json() {
            for (i, v) in t.json_lines().iter().enumerate() {
                let line = RunLine {
                    run: k,
                    step: i + 1,
                    body: v,
                };
                json_line(out, &serde_json::to_value(line).expect("serializable run"));
            }
        } else {
            writeln!(out, "run {k} ({} steps)", t.steps.len()).unwrap();
            write!(out, "{t}").unwrap();
        }
    }
}

/// The first run in label order, of at most `steps` transitions.
pub fn first_run(start: &NormalSystem, defs: &Defs, steps: usize) -> Trace {
    let mut t = Trace {
        initial: start.clone(),
        steps: Vec::new(),
    };
    while t.steps.len() < steps {
        match system_step(t.last(), defs).into_iter().next() {
            Some(step) => t.steps.push(step),
            None => break,
        }
    }
    t
}

/// Runs of the `system` item of a file.
pub fn cmd_simulate(
    path: &Path,
    steps: usize,
    mode: SimMode,
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let (defs, s) = load_system(path)?;
    let start = normalize(&s);
    let runs = match mode {
        SimMode::All => all_runs(&start, &defs, steps),
        SimMode::Trace => vec![first_run(&start, &defs, steps)],
    };
    let mut out = String::new();
    print_runs(&mut out, &runs, cfg);
    Ok(Outcome::new(EXIT_OK, out))
}

fn readiness_text(out: &mut String, r: &Readiness) {
    for s in &r.sessions {
        let atoms: Vec<String> = s.weak_ready_do.atoms.iter().map(|a| a.to_string()).collect();
        writeln!(
            out,
            "  @{}: {} with WRD {{{}}}: {}",
            s.session,
            s.contract,
            atoms.join(", "),
            s.verdict
        )
        .unwrap();
    }
}

/// Explores `who[P] | ctx` for each context file and checks readiness of
/// `who` in every reachable state. A file with a `system` item instead of a
/// `process` item is explored in parallel with each context.
pub fn cmd_test_honesty(
    path: &Path,
    who: &Participant,
    ctx_paths: &[PathBuf],
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let prog = load_program(path)?;
    let mut defs = prog.defs.clone();
    let mut contexts = Vec::new();
    for c in ctx_paths {
        let (d, s) = load_system(c)?;
        defs = defs.merge(&d).map_err(|source| CliError::Syntax {
            path: c.clone(),
            source,
        })?;
        contexts.push(s);
    }
    if contexts.is_empty() {
        contexts.push(System::Zero);
    }
    let (steps, wrd) = (cfg.bounds.steps, cfg.bounds.wrd);
    let report = match (&prog.process, &prog.system) {
        (Some(p), _) => test_honesty(p, who, &contexts, &defs, steps, wrd)?,
        (None, Some(s)) => {
            if !normalize(s).processes().contains_key(who) {
                return Err(RuntimeError::MissingParticipant(who.clone()).into());
            }
            let mut total = 0;
            let mut found = None;
            for (k, ctx) in contexts.iter().enumerate() {
                let start = normalize(&System::par(s.clone(), ctx.clone()));
                let r = test_honesty_from(&start, who, &defs, steps, wrd, k);
                total += r.states;
                match r.outcome {
                    HonestyTestOutcome::NoViolation => {}
                    HonestyTestOutcome::Violation { .. } => {
                        found = Some(r.outcome);
                        break;
                    }
                    o @ HonestyTestOutcome::Inconclusive { .. } => {
                        found.get_or_insert(o);
                    }
                }
            }
            HonestyTestReport {
                outcome: found.unwrap_or(HonestyTestOutcome::NoViolation),
                states: total,
            }
        }
        (None, None) => {
            return Err(CliError::Input {
                path: path.to_path_buf(),
                what: "no process or system item".into(),
            })
        }
    };
    let mut out = String::new();
    let code = match &report.outcome {
        HonestyTestOutcome::NoViolation => {
            if cfg.json() {
                json_line(
                    &mut out,
                    &json!({"verdict": "no-violation", "states": report.states}),
                );
            } else {
                writeln!(out, "NO VIOLATION ({} states)", report.states).unwrap();
            }
            EXIT_OK
        }
        HonestyTestOutcome::Violation {
            context,
            trace,
            readiness,
        } => {
            if cfg.json() {
                json_line(
                    &mut out,
                    &json!({
                        "verdict": "dishonest",
                        "context": ctx_name(ctx_paths, *context),
                        "states": report.states,
                        "trace": trace.json_lines(),
                    }),
                );
            } else {
                writeln!(out, "DISHONEST in context {}", ctx_name(ctx_paths, *context)).unwrap();
                write!(out, "{trace}").unwrap();
                writeln!(out, "{who} is {} in the last state", readiness.verdict).unwrap();
                readiness_text(&mut out, readiness);
            }
            EXIT_DISHONEST
        }
        HonestyTestOutcome::Inconclusive { context, state } => {
            let reason = format!(
                "readiness undetermined within bounds in context {} at {state}",
                ctx_name(ctx_paths, *context)
            );
            inconclusive(&mut out, &reason, cfg);
            EXIT_INCONCLUSIVE
        }
    };
    Ok(Outcome::new(code, out))
}

fn ctx_name(paths: &[PathBuf], k: usize) -> String {
    paths
        .get(k)
        .map_or_else(|| "0".to_string(), |p| p.display().to_string())
}
