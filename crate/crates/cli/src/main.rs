use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lsi_core::families::{bell, gamma, ges_state, ghz3, ghz4, BellIndex, GhzLabel, WeylLabel};
use lsi_core::script::report::to_json;
use lsi_core::script::{
    execute, format_number, parse, serialize, ExecErrorKind, ExecOptions, ParseError, RunFilter,
    Value,
};
use lsi_core::statespace::StateVector;
use lsi_core::subsets::DEFAULT_MAX_DIM;
use lsi_core::verification::run_acceptance;

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

/// Local subset identification: simulate protocols and certify impossibility.
#[derive(Debug, Parser)]
#[command(name = "lsi", version)]
struct Cli {
    /// Numerical tolerance for equality checks.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive_real)]
    tolerance: f64,
    /// Largest stacked Hilbert-space dimension a run may touch.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DIM)]
    max_dim: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the amplitudes of a named state.
    Families {
        #[command(subcommand)]
        family: FamilyCmd,
    },
    /// Run the `simulate` directives of a script.
    Simulate { script: PathBuf },
    /// Run the `certify` directives of a script.
    Certify { script: PathBuf },
    /// Run the built-in acceptance checks.
    VerifyPaper,
    /// Check a script's syntax and print its canonical form.
    Parse { script: PathBuf },
}

#[derive(Debug, Subcommand)]
enum FamilyCmd {
    /// Bell state B1..B4.
    Bell { index: usize },
    /// Maximally entangled state on two d-level systems.
    Gamma { d: usize },
    /// Weyl-generated state (I ⊗ X^a Z^b) applied to gamma(d).
    Ges { d: usize, a: usize, b: usize },
    /// Three-qubit GHZ basis state 1..8.
    Ghz3 { alpha: usize },
    /// Four-qubit GHZ basis state 1..16.
    Ghz4 { alpha: usize },
}

fn positive_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(_) => Err("must be a positive finite number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// A failure with its exit status and structured description.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    extra: Vec<(&'static str, Value)>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
            extra: Vec::new(),
        }
    }

    fn to_value(&self) -> Value {
        let mut fields = vec![
            ("kind", Value::from(self.kind)),
            ("message", Value::from(self.message.clone())),
        ];
        fields.extend(self.extra.iter().cloned());
        Value::map([("error", Value::map(fields))])
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "parse",
            message: e.to_string(),
            extra: vec![
                ("line", Value::from(e.span.line)),
                ("column", Value::from(e.span.column)),
                ("expected", Value::from(e.expected.clone())),
            ],
        }
    }
}

/// What a successful command produced, plus whether it counts as a failure.
struct Output {
    value: Value,
    text: String,
    code: u8,
}

fn read_script(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_USAGE,
        kind: "io",
        message: format!("cannot read {}: {e}", path.display()),
        extra: Vec::new(),
    })
}

fn run_script(cli: &Cli, path: &Path, filter: RunFilter) -> Result<Output, Failure> {
    let script = parse(&read_script(path)?)?;
    let opts = ExecOptions {
        tolerance: cli.tolerance,
        max_dim: cli.max_dim,
        filter,
    };
    let report = execute(&script, &opts).map_err(|e| Failure {
        code: match e.kind {
            ExecErrorKind::Resource => EXIT_RESOURCE,
            ExecErrorKind::Invalid => EXIT_USAGE,
        },
        kind: match e.kind {
            ExecErrorKind::Resource => "resource",
            ExecErrorKind::Invalid => "invalid",
        },
        message: e.to_string(),
        extra: vec![
            ("line", Value::from(e.span.line)),
            ("column", Value::from(e.span.column)),
            ("statement", Value::from(e.statement.clone())),
        ],
    })?;
    Ok(Output {
        text: report.to_text(),
        value: report.root,
        code: 0,
    })
}

fn family_state(cmd: &FamilyCmd) -> Result<(String, StateVector), String> {
    let e = |e: lsi_core::families::FamilyError| e.to_string();
    Ok(match *cmd {
        FamilyCmd::Bell { index } => (
            format!("bell {index}"),
            bell(BellIndex::new(index).map_err(e)?),
        ),
        FamilyCmd::Gamma { d } => (format!("gamma {d}"), gamma(d).map_err(e)?),
        FamilyCmd::Ges { d, a, b } => (
            format!("ges {d} {a} {b}"),
            ges_state(WeylLabel::new(a, b, d).map_err(e)?),
        ),
        FamilyCmd::Ghz3 { alpha } => (
            format!("ghz3 {alpha}"),
            ghz3(GhzLabel::three(alpha).map_err(e)?).map_err(e)?,
        ),
        FamilyCmd::Ghz4 { alpha } => (
            format!("ghz4 {alpha}"),
            ghz4(GhzLabel::four(alpha).map_err(e)?).map_err(e)?,
        ),
    })
}

fn complex_text(re: f64, im: f64) -> String {
    if im == 0.0 {
        format_number(re)
    } else if re == 0.0 {
        format!("{}i", format_number(im))
    } else {
        let sign = if im < 0.0 { "-" } else { "+" };
        format!("{}{sign}{}i", format_number(re), format_number(im.abs()))
    }
}

fn families(cmd: &FamilyCmd) -> Result<Output, Failure> {
    let (name, state) = family_state(cmd).map_err(Failure::usage)?;
    let dims = state.layout().dims();
    let mut text = format!("{name}\n");
    let mut amps = Vec::new();
    for (i, a) in state.amplitudes().iter().enumerate() {
        let mut digits = vec![0; dims.len()];
        let mut rest = i;
        for (slot, &d) in digits.iter_mut().zip(&dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        let sep = if dims.iter().all(|&d| d <= 10) {
            ""
        } else {
            ","
        };
        let ket = digits
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(sep);
        text += &format!("{i} |{ket}> {}\n", complex_text(a.re, a.im));
        amps.push(Value::map([
            ("index", Value::from(i)),
            ("digits", Value::from(digits)),
            ("re", Value::from(a.re)),
            ("im", Value::from(a.im)),
        ]));
    }
    let value = Value::map([
        ("state", Value::from(name)),
        ("parties", Value::from(state.layout().party_labels())),
        ("dims", Value::from(dims)),
        ("amplitudes", Value::List(amps)),
    ]);
    Ok(Output {
        value,
        text,
        code: 0,
    })
}

fn verify() -> Output {
    let results = run_acceptance();
    let all = results.iter().all(|r| r.passed);
    let mut text: String = results.iter().map(|r| format!("{r}\n")).collect();
    text += &format!(
        "{} of {} criteria passed\n",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    let value = Value::map([
        ("passed", Value::from(all)),
        (
            "criteria",
            Value::List(
                results
                    .iter()
                    .map(|r| {
                        Value::map([
                            ("id", Value::from(r.id)),
                            ("name", Value::from(r.name)),
                            ("passed", Value::from(r.passed)),
                            ("detail", Value::from(r.detail.clone())),
                        ])
                    })
                    .collect(),
            ),
        ),
    ]);
    Output {
        value,
        text,
        code: if all { 0 } else { EXIT_VERIFY },
    }
}

fn parse_only(path: &Path) -> Result<Output, Failure> {
    let script = parse(&read_script(path)?)?;
    let canonical = serialize(&script);
    Ok(Output {
        value: Value::map([
            ("ok", Value::from(true)),
            ("statements", Value::from(script.statements.len())),
            ("canonical", Value::from(canonical.clone())),
        ]),
        text: canonical,
        code: 0,
    })
}

fn emit(cli: &Cli, body: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => fs::write(path, body).map_err(|e| Failure {
            code: EXIT_USAGE,
            kind: "io",
            message: format!("cannot write {}: {e}", path.display()),
            extra: Vec::new(),
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let out = match &cli.command {
        Command::Families { family } => families(family)?,
        Command::Simulate { script } => run_script(cli, script, RunFilter::Simulate)?,
        Command::Certify { script } => run_script(cli, script, RunFilter::Certify)?,
        Command::VerifyPaper => verify(),
        Command::Parse { script } => parse_only(script)?,
    };
    let body = match cli.format {
        Format::Text => out.text,
        Format::Structured => to_json(&out.value),
    };
    emit(cli, &body)?;
    Ok(out.code)
}

fn structured_requested(args: &[String]) -> bool {
    args.windows(2)
        .any(|w| w[0] == "--format" && w[1] == "structured")
        || args.iter().any(|a| a == "--format=structured")
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if structured_requested(&args) {
                let f = Failure::usage(e.kind().to_string());
                print!("{}", to_json(&f.to_value()));
            } else {
                let _ = e.print();
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match cli.format {
                Format::Structured => print!("{}", to_json(&f.to_value())),
                Format::Text => eprintln!("lsi: {} error: {}", f.kind, f.message),
            }
            ExitCode::from(f.code)
        }
    }
}
