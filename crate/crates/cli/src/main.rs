//! Command-line front end for the `alphamu` library.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on
//! malformed input or options.

use alphamu::audit::{self, Fault};
use alphamu::blowup::{blowup_tree, PlaneField};
use alphamu::deriv::{DerivDescriptor, DerivType};
use alphamu::quotient::{eigen_basis, filtration_basis, invariants_basis};
use alphamu::report::{count_failures, render_json, render_lines, IdentityRecord, Status};
use alphamu::ring::RingDescriptor;
use alphamu::torsor::{
    adjunction_identity_check, crossing_fixed_ideal_check, GluingMode, TorsorDescriptor,
};
use alphamu::RingSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "alphamu",
    version,
    about = "Exact checks for derivations and torsors in characteristic p"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Modular identities and subset-count oracles.
    Identities(Opts),
    /// Additive/multiplicative type of a derivation.
    Classify(Opts),
    /// Invariant subspace of a derivation and its eigen or filtration refinement.
    Quotient(Opts),
    /// Cocycle validation and derived data of a torsor descriptor.
    Torsor(Opts),
    /// Blowup tree of a plane vector field.
    Blowup(Opts),
    /// Adjunction identities on a local model.
    Adjunction(Opts),
    /// The complete verification suite.
    All(Opts),
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Degree bound for span computations.
    #[arg(long = "d")]
    d: Option<u32>,
    /// Truncation order of the base ring.
    #[arg(long)]
    truncate: Option<u32>,
    /// Comma-separated list of primes.
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u32>>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long, hide = true)]
    inject_fault: Option<FaultArg>,
    /// File path or inline JSON.
    input: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FaultArg {
    Projector,
}

#[derive(Debug)]
enum CliError {
    Input(String),
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Input(e.to_string())
    }
}

type Outcome = Result<(String, usize), CliError>;

const DEFAULT_SEED: u64 = 0;

fn read_input(opts: &Opts) -> Result<String, CliError> {
    let src = opts
        .input
        .as_deref()
        .ok_or_else(|| CliError::Input("missing input (path or inline JSON)".into()))?;
    if src.trim_start().starts_with('{') {
        Ok(src.to_string())
    } else {
        std::fs::read_to_string(src).map_err(|e| CliError::Input(format!("{src}: {e}")))
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(opts: &Opts) -> Result<T, CliError> {
    let text = read_input(opts)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid input JSON: {e}")))
}

/// Rejects options that the subcommand does not use.
fn check_options(name: &str, opts: &Opts, allowed: &[&str]) -> Result<(), CliError> {
    let given = [
        ("d", opts.d.is_some()),
        ("truncate", opts.truncate.is_some()),
        ("primes", opts.primes.is_some()),
        ("max-depth", opts.max_depth.is_some()),
        ("samples", opts.samples.is_some()),
        ("seed", opts.seed.is_some()),
        ("inject-fault", opts.inject_fault.is_some()),
    ];
    for (opt, present) in given {
        if present && !allowed.contains(&opt) {
            return Err(CliError::Input(format!(
                "option --{opt} does not apply to `{name}`"
            )));
        }
    }
    Ok(())
}

fn records_output(records: &[IdentityRecord], json: bool) -> (String, usize) {
    let text = if json {
        render_json(records) + "\n"
    } else {
        render_lines(records)
    };
    (text, count_failures(records))
}

#[derive(Deserialize)]
struct DerivationInput {
    ring: RingDescriptor,
    derivation: DerivDescriptor,
}

fn load_derivation(opts: &Opts) -> Result<alphamu::Derivation, CliError> {
    let input: DerivationInput = parse_json(opts)?;
    let mut ring = input.ring;
    if opts.truncate.is_some() {
        ring.truncate = opts.truncate;
    }
    let spec = ring.build()?;
    Ok(input.derivation.build(&spec)?)
}

fn identities(opts: &Opts) -> Outcome {
    check_options("identities", opts, &["primes"])?;
    let primes = opts
        .primes
        .clone()
        .unwrap_or_else(|| vec![2, 3, 5, 7, 11, 13]);
    for &p in &primes {
        alphamu::PrimeChar::new(p)?;
    }
    let mut records = audit::identity_suite(&primes, Fault::None);
    let odd: Vec<u32> = primes.iter().copied().filter(|&p| p > 2).collect();
    records.extend(audit::counting_suite(&odd));
    Ok(records_output(&records, opts.json))
}

fn classify(opts: &Opts) -> Outcome {
    check_options("classify", opts, &["truncate"])?;
    let d = load_derivation(opts)?;
    let (text, fails) = match d.classify() {
        Ok(t) => (t.to_string(), 0),
        Err(e) => (format!("error: {e}"), 1),
    };
    if opts.json {
        let v = serde_json::json!({"derivation": d.to_string(), "type": text});
        return Ok((format!("{v}\n"), fails));
    }
    Ok((format!("{text}\n"), fails))
}

fn quotient(opts: &Opts) -> Outcome {
    check_options("quotient", opts, &["d", "truncate"])?;
    let d = load_derivation(opts)?;
    let bound = opts.d.unwrap_or(5);
    let mut spaces = vec![invariants_basis(&d, bound)?];
    let p = d.spec().p();
    match d.dtype() {
        DerivType::Multiplicative => {
            for k in 1..p {
                match eigen_basis(&d, bound, k) {
                    Ok(s) => spaces.push(s),
                    Err(e) => eprintln!("eigenspace {k}: {e}"),
                }
            }
        }
        DerivType::Additive => {
            for k in 1..p {
                spaces.push(filtration_basis(&d, bound, k)?);
            }
        }
        _ => {}
    }
    if opts.json {
        let v: Vec<_> = spaces.iter().map(|s| s.to_json()).collect();
        return Ok((format!("{}\n", serde_json::Value::Array(v)), 0));
    }
    let mut out = format!("{}\n", spaces[0]);
    for s in &spaces[1..] {
        let label = match s.label {
            alphamu::quotient::SubspaceLabel::Eigen(k) => format!("L_{k}"),
            alphamu::quotient::SubspaceLabel::Filtration(k) => format!("E_{k}"),
            alphamu::quotient::SubspaceLabel::Invariants => "invariants".into(),
        };
        out.push_str(&format!("{label} {s}\n"));
    }
    Ok((out, 0))
}

#[derive(Deserialize)]
struct TorsorInput {
    #[serde(flatten)]
    torsor: TorsorDescriptor,
    /// Chart functions `d_i` for a section-type gluing.
    #[serde(default)]
    section: Option<Vec<String>>,
}

fn torsor(opts: &Opts) -> Outcome {
    check_options("torsor", opts, &[])?;
    let input: TorsorInput = parse_json(opts)?;
    let t = input.torsor.build()?;
    let report = t.validate();
    let mut records = report.records.clone();
    if report.is_valid() {
        records.extend(t.transition_exponent_data()?.records);
        if t.given().values().all(|tr| tr.gamma.is_zero()) {
            records.extend(t.glued_derivation_check(&GluingMode::Split)?);
        }
        if let Some(section) = &input.section {
            let d = section
                .iter()
                .map(|s| t.overlap().parse(s))
                .collect::<Result<Vec<_>, _>>()?;
            records.extend(t.glued_derivation_check(&GluingMode::Section(d))?);
        }
    }
    Ok(records_output(&records, opts.json))
}

#[derive(Deserialize)]
struct BlowupInput {
    p: u32,
    #[serde(rename = "P")]
    p_coeff: String,
    #[serde(rename = "Q")]
    q_coeff: String,
}

fn blowup(opts: &Opts) -> Outcome {
    check_options("blowup", opts, &["max-depth"])?;
    let input: BlowupInput = parse_json(opts)?;
    let field = PlaneField::from_exprs(input.p, &input.p_coeff, &input.q_coeff)?;
    let tree = blowup_tree(&field, opts.max_depth.unwrap_or(3))?;
    if opts.json {
        return Ok((format!("{}\n", tree.root.to_json()), 0));
    }
    let mut out = tree.render_text();
    let p = input.p;
    let summary = [
        IdentityRecord::new("blowup_cycle_depth", p).outcome(
            "-",
            tree.cycle_depth().map_or("none".into(), |d| d.to_string()),
            Status::Info,
        ),
        IdentityRecord::new("blowup_terminated", p)
            .param("max_depth", tree.max_depth)
            .outcome("-", tree.terminated(), Status::Info),
    ];
    out.push_str(&render_lines(&summary));
    Ok((out, 0))
}

#[derive(Deserialize)]
struct CrossingInput {
    f: String,
    g: String,
    order: u32,
}

#[derive(Deserialize)]
struct AdjunctionInput {
    p: u32,
    c: String,
    #[serde(default)]
    crossing: Option<CrossingInput>,
}

fn adjunction(opts: &Opts) -> Outcome {
    check_options("adjunction", opts, &["truncate", "samples", "seed"])?;
    let input: AdjunctionInput = parse_json(opts)?;
    let n = opts.truncate.unwrap_or(input.p + 2);
    let base = RingSpec::builder(input.p, &["x"]).truncate(n).build()?;
    let c = base.parse(&input.c)?;
    let mut records = adjunction_identity_check(
        &c,
        opts.samples.unwrap_or(100),
        opts.seed.unwrap_or(DEFAULT_SEED),
    )?;
    if let Some(x) = &input.crossing {
        records.extend(crossing_fixed_ideal_check(input.p, &x.f, &x.g, x.order)?);
    }
    Ok(records_output(&records, opts.json))
}

fn all(opts: &Opts) -> Outcome {
    check_options("all", opts, &["seed", "inject-fault"])?;
    let fault = match opts.inject_fault {
        Some(FaultArg::Projector) => Fault::BrokenProjector,
        None => Fault::None,
    };
    let reports = audit::run_all(opts.seed.unwrap_or(DEFAULT_SEED), fault);
    let records: Vec<IdentityRecord> = reports
        .iter()
        .flat_map(|r| r.records.iter().cloned())
        .collect();
    let fails = count_failures(&records);
    if opts.json {
        return Ok((render_json(&records) + "\n", fails));
    }
    let mut out = render_lines(&records);
    out.push_str(&audit::summary_table(&reports));
    Ok((out, fails))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Identities(o) => identities(o),
        Command::Classify(o) => classify(o),
        Command::Quotient(o) => quotient(o),
        Command::Torsor(o) => torsor(o),
        Command::Blowup(o) => blowup(o),
        Command::Adjunction(o) => adjunction(o),
        Command::All(o) => all(o),
    };
    match result {
        Ok((text, fails)) => {
            print!("{text}");
            ExitCode::from(if fails == 0 { 0 } else { 1 })
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
