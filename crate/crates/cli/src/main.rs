use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use germinv::hamiltonians::{field_to_csv, intersection_chart, sample_hamiltonians, GridSpec, HamiltonianField, Stencil};
use germinv::ingest::{load_germ_pair, GermPairDoc};
use germinv::invariants::{moduli_count, Status};
use germinv::normal_forms::{roundtrip_verify, synthesize_doc, NormalFormSpec};
use germinv::report::{digest, equiv_report, germ_report, to_canonical_json, to_text};
use germinv::selftest::run_selftest;
use germinv::{Dims, Error, ErrorClass, GermPair, ToleranceConfig};
use serde::Serialize;

const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;
const EXIT_INTERNAL: u8 = 70;

#[derive(Debug, Parser)]
#[command(name = "germinv", version, about = "Symplectic invariants of double points of immersed submanifolds")]
struct Cli {
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StencilArg {
    Full,
    Axes,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Genericity and invariants of one germ pair.
    Report { file: PathBuf },
    /// Decide equivalence of two germ pairs (exit 0 equivalent, 1 not, 2 undetermined).
    Equiv { file1: PathBuf, file2: PathBuf },
    /// Synthesize a normal form and verify it round trip.
    NormalForm {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sample the characteristic Hamiltonians on a grid around the base point.
    Hamiltonians {
        file: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long, default_value_t = 0.2)]
        radius: f64,
        #[arg(long, value_enum, default_value_t = StencilArg::Full)]
        stencil: StencilArg,
        /// Also write the field as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Number of moduli for strata of dimension k (and k2) in dimension 2n.
    Moduli {
        k: usize,
        n: usize,
        #[arg(long)]
        k2: Option<usize>,
    },
    /// Run the seeded randomized property suite.
    Selftest {
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

struct Outcome {
    stdout: String,
    code: u8,
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(bytes: &[u8], path: &Path, tol: &ToleranceConfig) -> Result<GermPair, Error> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    load_germ_pair(&GermPairDoc::from_json(text)?, tol)
}

fn render<T: Serialize>(value: &T, format: Format) -> String {
    match format {
        Format::Json => to_canonical_json(value),
        Format::Text => to_text(value),
    }
}

#[derive(Serialize)]
struct FieldExport<'a> {
    input_digest: String,
    tolerances: ToleranceConfig,
    field: &'a HamiltonianField,
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let tol = ToleranceConfig::default().with_rank_tol(cli.tolerance)?;
    let ok = |stdout: String| Ok(Outcome { stdout, code: 0 });
    match &cli.command {
        Command::Report { file } => {
            let bytes = read(file)?;
            let gp = load(&bytes, file, &tol)?;
            ok(render(&germ_report(&gp, &bytes, &tol)?, cli.format))
        }
        Command::Equiv { file1, file2 } => {
            let (b1, b2) = (read(file1)?, read(file2)?);
            let (g1, g2) = (load(&b1, file1, &tol)?, load(&b2, file2, &tol)?);
            let report = equiv_report([&g1, &g2], [&b1, &b2], &tol)?;
            let code = match report.verdict.status {
                Status::Equivalent => 0,
                Status::NotEquivalent => 1,
                Status::Undetermined => 2,
            };
            Ok(Outcome {
                stdout: render(&report, cli.format),
                code,
            })
        }
        Command::NormalForm { spec, output } => {
            let text = String::from_utf8(read(spec)?).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let spec = NormalFormSpec::from_json(&text)?;
            let doc = synthesize_doc(&spec)?;
            fs::write(output, doc.to_json()).map_err(|e| Error::Io(format!("{}: {e}", output.display())))?;
            ok(render(&roundtrip_verify(&spec, &tol)?, cli.format))
        }
        Command::Hamiltonians {
            file,
            grid,
            radius,
            stencil,
            csv,
        } => {
            let bytes = read(file)?;
            let gp = load(&bytes, file, &tol)?;
            let stencil = match stencil {
                StencilArg::Full => Stencil::Full,
                StencilArg::Axes => Stencil::Axes,
            };
            let spec = GridSpec::new(*grid, *radius, stencil)?;
            let chart = intersection_chart(&gp, &tol)?;
            let field = sample_hamiltonians(&chart, &spec, &tol)?;
            if let Some(path) = csv {
                fs::write(path, field_to_csv(&field)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            }
            let export = FieldExport {
                input_digest: digest(&bytes),
                tolerances: tol,
                field: &field,
            };
            ok(render(&export, cli.format))
        }
        Command::Moduli { k, n, k2 } => {
            let dims = match k2 {
                Some(k2) if k2 != k => Dims::Unequal(*k, *k2),
                _ => Dims::Equal(*k),
            };
            let m = moduli_count(dims, *n).map_err(|e| Error::OutOfRange(e.to_string()))?;
            ok(match cli.format {
                Format::Json => to_canonical_json(&m),
                Format::Text => format!("{m}\n"),
            })
        }
        Command::Selftest { cases } => {
            let report = run_selftest(cli.seed, *cases, &tol);
            let code = if report.passed { 0 } else { EXIT_INTERNAL };
            Ok(Outcome {
                stdout: render(&report, cli.format),
                code,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => EXIT_INPUT,
                ErrorClass::Internal => EXIT_INTERNAL,
            })
        }
    }
}
