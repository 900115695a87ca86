//! `qgenus` command line: argument parsing, dispatch and output formatting.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde_json::json;

use qgenus_core::forms::{class_group, QuadForm};
use qgenus_core::genus::{self, GenusReport, Mode, SearchBounds};
use qgenus_core::k0::{bratteli_export, matrix_from_pell};
use qgenus_core::Error;

pub const CSV_HEADER: [&str; 13] = [
    "d0",
    "f2d0_max",
    "h_plus",
    "pell_t",
    "pell_s",
    "found_f",
    "found_k",
    "det_value",
    "k0_factors",
    "class_factors",
    "iso_agrees",
    "mode",
    "notes",
];

#[derive(Parser, Debug)]
#[command(name = "qgenus", version, about = "Genera of indefinite binary quadratic forms, by class counting and by K0 groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Genus report for the form a u^2 + b uv + c v^2.
    Form {
        #[arg(long, allow_hyphen_values = true)]
        a: BigInt,
        #[arg(long, allow_hyphen_values = true)]
        b: BigInt,
        #[arg(long, allow_hyphen_values = true)]
        c: BigInt,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Genus report for a discriminant (2 or 3 mod 4 is read as 4 times the value).
    Disc {
        #[command(flatten)]
        d: DiscArg,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Narrow class group: order, invariant factors and cycle representatives.
    Classgroup {
        #[command(flatten)]
        d: DiscArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// One report per fundamental discriminant in [from, to].
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        from: BigInt,
        #[arg(long, allow_hyphen_values = true)]
        to: BigInt,
        /// Worker threads; output is identical for every value.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: u32,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bratteli diagram (DOT) of the matrix attached to a discriminant.
    Bratteli {
        #[arg(long, default_value = "5", allow_hyphen_values = true)]
        d0: BigInt,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DiscArg {
    /// Discriminant, positionally.
    #[arg(value_name = "D", allow_hyphen_values = true, conflicts_with = "d0", required_unless_present = "d0")]
    value: Option<BigInt>,
    /// Discriminant, as a flag.
    #[arg(long, allow_hyphen_values = true)]
    d0: Option<BigInt>,
}

impl DiscArg {
    fn get(&self) -> &BigInt {
        self.value.as_ref().or(self.d0.as_ref()).expect("clap enforces one of D or --d0")
    }
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_f: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    max_k: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::PellTrace)]
    mode: ModeArg,
    /// Exit with status 1 when a group comparison disagrees.
    #[arg(long)]
    strict: bool,
}

impl SearchArgs {
    fn bounds(&self) -> SearchBounds {
        SearchBounds::new(self.max_f, self.max_k).expect("clap enforces bounds >= 1")
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    PellTrace,
    PaperChebyshev,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::PellTrace => Mode::PellTrace,
            ModeArg::PaperChebyshev => Mode::PaperChebyshev,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Json,
    Csv,
}

enum Failure {
    Usage(String),
    Finding(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::FormulaMismatch { .. } => Failure::Finding(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

/// Result of a command: the rendered output and whether it carries a finding
/// that should turn into exit status 1.
struct Outcome {
    text: String,
    finding: bool,
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return 2;
        }
    };
    let out_path = match &cli.command {
        Command::Form { out, .. }
        | Command::Disc { out, .. }
        | Command::Classgroup { out, .. }
        | Command::Sweep { out, .. } => out.out.clone(),
        Command::Bratteli { out, .. } => out.clone(),
    };
    match dispatch(cli.command).and_then(|o| emit(&o.text, out_path.as_ref()).map(|_| o)) {
        Ok(o) => i32::from(o.finding),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Finding(msg)) => {
            eprintln!("finding: {msg}");
            1
        }
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes())?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn no_csv(format: Format) -> Result<(), Failure> {
    if format == Format::Csv {
        return Err(Failure::Usage("--output csv is only available for sweep".into()));
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::Form { a, b, c, search, out } => {
            no_csv(out.output)?;
            let form = QuadForm::new(a, b, c)?;
            let report = genus::report_for_form(&form, &search.bounds(), search.mode.into())?;
            single_report(report, out.output, search.strict)
        }
        Command::Disc { d, search, out } => {
            no_csv(out.output)?;
            let report = genus::report_for_discriminant(d.get(), &search.bounds(), search.mode.into())?;
            single_report(report, out.output, search.strict)
        }
        Command::Classgroup { d, out } => {
            no_csv(out.output)?;
            classgroup(d.get(), out.output)
        }
        Command::Sweep { from, to, jobs, search, out } => {
            let bounds = search.bounds();
            let mode = search.mode.into();
            let reports = if jobs == 1 {
                genus::sweep(&from, &to, &bounds, mode)?
            } else {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs as usize)
                    .build()
                    .map_err(|e| Failure::Usage(format!("cannot start {jobs} threads: {e}")))?
                    .install(|| genus::sweep_parallel(&from, &to, &bounds, mode))?
            };
            let finding = reports.iter().any(|r| r.formula_mismatch || (search.strict && !r.iso_agrees));
            let text = match out.output {
                Format::Text => reports.iter().map(sweep_line).collect(),
                Format::Json => to_json(&reports),
                Format::Csv => sweep_csv(&reports, &bounds, mode)?,
            };
            Ok(Outcome { text, finding })
        }
        Command::Bratteli { d0, levels, .. } => {
            let a = matrix_from_pell(&d0)?;
            Ok(Outcome { text: bratteli_export(&a, levels)?, finding: false })
        }
    }
}

fn single_report(report: GenusReport, format: Format, strict: bool) -> Result<Outcome, Failure> {
    let finding = report.formula_mismatch || (strict && !report.iso_agrees);
    let text = match format {
        Format::Json => to_json(&report),
        _ => report_text(&report),
    };
    Ok(Outcome { text, finding })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn join(xs: &[BigInt], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn group_text(factors: &[BigInt]) -> String {
    if factors.is_empty() {
        "0".into()
    } else {
        factors.iter().map(|d| format!("Z/{d}")).collect::<Vec<_>>().join(" + ")
    }
}

fn report_text(r: &GenusReport) -> String {
    let mut lines = Vec::new();
    if let Some(form) = &r.input_form {
        lines.push(format!("form:               {form}"));
    }
    let d = &r.discriminant;
    lines.push(format!("discriminant:       {} (D0 = {}, conductor {})", d.value, d.fundamental, d.conductor));
    lines.push(format!("genus (brute):      {}", r.g_bruteforce));
    lines.push(format!("pell:               t = {}, s = {}", r.pell.t, r.pell.s));
    match &r.search_result {
        Some(s) => lines.push(format!("search:             f = {}, k = {}, det = {} ({})", s.f, s.k, s.det_value, s.mode)),
        None => lines.push("search:             no match".into()),
    }
    if let Some(g) = &r.g_formula {
        lines.push(format!("genus (formula):    {g}"));
    }
    lines.push(format!("K0:                 {} (order {})", r.k0, r.k0.order));
    lines.push(format!("class group:        {}", group_text(&r.class_group_factors)));
    lines.push(format!("iso_agrees:         {}", r.iso_agrees));
    for n in &r.notes {
        lines.push(format!("note: {n}"));
    }
    lines.join("\n") + "\n"
}

fn sweep_line(r: &GenusReport) -> String {
    let search = match &r.search_result {
        Some(s) => format!("f={} k={} det={}", s.f, s.k, s.det_value),
        None => "no-match".into(),
    };
    format!(
        "D0={} h+={} t={} {} K0=[{}] Cl=[{}] iso={}\n",
        r.discriminant.value,
        r.g_bruteforce,
        r.pell.t,
        search,
        join(&r.k0.invariant_factors, ";"),
        join(&r.class_group_factors, ";"),
        r.iso_agrees
    )
}

fn sweep_csv(reports: &[GenusReport], bounds: &SearchBounds, mode: Mode) -> Result<String, Failure> {
    let csv_err = |e: csv::Error| Failure::Usage(format!("csv: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let f2 = BigInt::from(bounds.max_f) * bounds.max_f;
    for r in reports {
        let s = r.search_result.as_ref();
        w.write_record([
            r.discriminant.value.to_string(),
            (&f2 * &r.discriminant.value).to_string(),
            r.g_bruteforce.to_string(),
            r.pell.t.to_string(),
            r.pell.s.to_string(),
            s.map(|s| s.f.to_string()).unwrap_or_default(),
            s.map(|s| s.k.to_string()).unwrap_or_default(),
            s.map(|s| s.det_value.to_string()).unwrap_or_default(),
            join(&r.k0.invariant_factors, ";"),
            join(&r.class_group_factors, ";"),
            r.iso_agrees.to_string(),
            mode.as_str().to_string(),
            r.notes.join(" | "),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn classgroup(d: &BigInt, format: Format) -> Result<Outcome, Failure> {
    let (disc, notes) = genus::normalize_discriminant(d)?;
    let cg = class_group(&disc)?;
    let text = match format {
        Format::Json => to_json(&json!({
            "discriminant": serde_json::Number::from_string_unchecked(disc.value.to_string()),
            "order": cg.order(),
            "invariant_factors": cg.invariant_factors().iter().map(|x| serde_json::Number::from_string_unchecked(x.to_string())).collect::<Vec<_>>(),
            "representatives": cg.representatives(),
            "notes": notes,
        })),
        _ => {
            let mut lines = vec![
                format!("discriminant:      {}", disc.value),
                format!("order:             {}", cg.order()),
                format!("invariant factors: [{}]", join(cg.invariant_factors(), ", ")),
                format!("group:             {}", group_text(cg.invariant_factors())),
                "representatives:".to_string(),
            ];
            for (i, rep) in cg.representatives().iter().enumerate() {
                lines.push(format!("  {rep}  (cycle length {})", cg.cycle(i).len()));
            }
            lines.extend(notes.iter().map(|n| format!("note: {n}")));
            lines.join("\n") + "\n"
        }
    };
    Ok(Outcome { text, finding: false })
}
