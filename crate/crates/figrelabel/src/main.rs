//! Command-line front end: extract label anchors from an EPS figure,
//! check a relabel spec against it, or rewrite the figure with the
//! replacement labels.
//!
//! Exit codes are part of the interface so shell pipelines can branch on
//! the failure class: 0 success, 1 unmatched labels, 2 parse or
//! interpreter errors, 3 I/O errors. Diagnostics go to stderr; stdout
//! carries only the requested artifact.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use figrelabel_core::{
    emit_label_listing, emit_relabeled_eps, emit_tex_overlay, escape, execute, parse_dsc,
    parse_spec, resolve, tokenize, DocumentMeta, ExtractionResult, LabelTable, ListingFormat,
    RelabelSpec, SaveRestoreMode, UnknownOperatorMode, VmConfig, DEFAULT_MAX_STEPS,
};

const EXIT_OK: u8 = 0;
const EXIT_UNMATCHED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "figrelabel",
    version,
    about = "Extract and replace text labels in EPS figures",
    long_about = "Interprets the figure's PostScript just far enough to record where every \
                  text label is painted, then rewrites the figure so replacement labels are \
                  painted at those anchors instead."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the labels a figure paints and their device-space anchors
    Extract {
        /// Input EPS/PS file
        eps: PathBuf,
        /// Listing format
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        /// Write the listing here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        vm: VmFlags,
    },
    /// Report whether every relabel directive matches a figure label
    Check {
        /// Input EPS/PS file
        eps: PathBuf,
        /// Relabel spec file
        #[arg(long)]
        spec: PathBuf,
        /// Exit 0 even when directives have no match
        #[arg(long)]
        lenient: bool,
        #[command(flatten)]
        vm: VmFlags,
    },
    /// Rewrite the figure with the replacement labels applied
    Apply {
        /// Input EPS/PS file
        eps: PathBuf,
        /// Relabel spec file
        #[arg(long)]
        spec: PathBuf,
        /// Write the rewritten EPS here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Suppress only matched labels; unmatched figure labels keep drawing
        #[arg(long)]
        keep_unmatched_labels: bool,
        /// Exit 0 even when directives have no match
        #[arg(long)]
        lenient: bool,
        /// Also write a plain-coordinate overlay file (figure coordinates)
        #[arg(long, value_name = "FILE")]
        emit_overlay: Option<PathBuf>,
        #[command(flatten)]
        vm: VmFlags,
    },
}

#[derive(Args)]
struct VmFlags {
    /// Warn and skip unknown operators instead of failing
    #[arg(long)]
    permissive: bool,
    /// Neuter save/restore exactly like the classic interception prologue
    /// (save pushes false, restore pops) instead of restoring the CTM
    #[arg(long)]
    compat_save_restore: bool,
    /// Interpreter step budget; overrides $FIGRELABEL_MAX_STEPS
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

impl From<Format> for ListingFormat {
    fn from(f: Format) -> ListingFormat {
        match f {
            Format::Tsv => ListingFormat::Tsv,
            Format::Json => ListingFormat::Json,
        }
    }
}

/// A failure with its exit-code class.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn parse(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("figrelabel: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Extract {
            eps,
            format,
            output,
            vm,
        } => run_extract(&eps, format, output.as_deref(), &vm),
        Command::Check {
            eps,
            spec,
            lenient,
            vm,
        } => run_check(&eps, &spec, lenient, &vm),
        Command::Apply {
            eps,
            spec,
            output,
            keep_unmatched_labels,
            lenient,
            emit_overlay,
            vm,
        } => run_apply(
            &eps,
            &spec,
            output.as_deref(),
            keep_unmatched_labels,
            lenient,
            emit_overlay.as_deref(),
            &vm,
        ),
    }
}

fn vm_config(flags: &VmFlags) -> Result<VmConfig, Failure> {
    let max_steps = match flags.max_steps {
        Some(v) => v,
        None => match std::env::var("FIGRELABEL_MAX_STEPS") {
            Err(_) => DEFAULT_MAX_STEPS,
            Ok(text) => text
                .trim()
                .parse::<u64>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| {
                    Failure::parse(format!(
                        "FIGRELABEL_MAX_STEPS must be a positive integer, got '{}'",
                        text
                    ))
                })?,
        },
    };
    Ok(VmConfig {
        save_restore_mode: if flags.compat_save_restore {
            SaveRestoreMode::Neutered
        } else {
            SaveRestoreMode::Faithful
        },
        unknown_operator_mode: if flags.permissive {
            UnknownOperatorMode::PermissiveNoop
        } else {
            UnknownOperatorMode::Error
        },
        max_steps,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(format!("{}: {}", path.display(), e)))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::io(format!("{}: {}", path.display(), e))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::io(format!("stdout: {}", e))),
    }
}

/// Tokenize and run the figure, reporting interpreter warnings on stderr.
fn extract_labels(path: &Path, config: &VmConfig) -> Result<ExtractionResult, Failure> {
    let bytes = read_file(path)?;
    extract_labels_from(&bytes, path, config)
}

fn extract_labels_from(
    bytes: &[u8],
    path: &Path,
    config: &VmConfig,
) -> Result<ExtractionResult, Failure> {
    let tokens = tokenize(bytes)
        .map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))?;
    let result = execute(&tokens, config)
        .map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))?;
    for warning in &result.warnings {
        match warning.pos {
            Some(pos) => eprintln!(
                "warning: {} (byte {}, line {})",
                warning.message, pos.offset, pos.line
            ),
            None => eprintln!("warning: {}", warning.message),
        }
    }
    Ok(result)
}

fn load_spec(path: &Path) -> Result<RelabelSpec, Failure> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::parse(format!("{}: spec file is not valid UTF-8", path.display())))?;
    parse_spec(&text).map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))
}

fn load_meta(bytes: &[u8], path: &Path) -> Result<DocumentMeta, Failure> {
    parse_dsc(bytes).map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))
}

fn run_extract(
    eps: &Path,
    format: Format,
    output: Option<&Path>,
    flags: &VmFlags,
) -> Result<u8, Failure> {
    let config = vm_config(flags)?;
    let result = extract_labels(eps, &config)?;
    let listing = emit_label_listing(&result.labels, format.into());
    write_output(output, listing.as_bytes())?;
    Ok(EXIT_OK)
}

/// Per-directive match report. Duplicates resolve to the first recorded
/// occurrence; that is the rule the rewrite uses, so it is what gets shown.
fn report_directives(spec: &RelabelSpec, table: &LabelTable) -> (usize, usize) {
    let mut found = 0;
    let mut total = 0;
    for directive in &spec.directives {
        let figrelabel_core::Directive::Relabel { old, .. } = directive else {
            continue;
        };
        total += 1;
        let display = escape::escape_field(old);
        let matches = table.matches(old);
        match matches.len() {
            0 => println!("NOT FOUND \"{}\"", display),
            n => {
                found += 1;
                let (anchor, _) = table.find_label(old, figrelabel_core::Point::ZERO);
                if n == 1 {
                    println!(
                        "FOUND \"{}\" -> ({:.6}, {:.6})",
                        display, anchor.x, anchor.y
                    );
                } else {
                    println!(
                        "DUPLICATE \"{}\" ({} occurrences, first wins) -> ({:.6}, {:.6})",
                        display, n, anchor.x, anchor.y
                    );
                    eprintln!(
                        "warning: label \"{}\" was painted {} times; using the first occurrence",
                        display, n
                    );
                }
            }
        }
    }
    (found, total)
}

fn run_check(eps: &Path, spec_path: &Path, lenient: bool, flags: &VmFlags) -> Result<u8, Failure> {
    let config = vm_config(flags)?;
    let spec = load_spec(spec_path)?;
    let result = extract_labels(eps, &config)?;
    let (found, total) = report_directives(&spec, &result.labels);
    println!("{}/{} labels found", found, total);
    if found < total && !lenient {
        Ok(EXIT_UNMATCHED)
    } else {
        Ok(EXIT_OK)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_apply(
    eps: &Path,
    spec_path: &Path,
    output: Option<&Path>,
    keep_unmatched_labels: bool,
    lenient: bool,
    overlay_path: Option<&Path>,
    flags: &VmFlags,
) -> Result<u8, Failure> {
    let config = vm_config(flags)?;
    let spec = load_spec(spec_path)?;
    let bytes = read_file(eps)?;
    let result = extract_labels_from(&bytes, eps, &config)?;
    let meta = load_meta(&bytes, eps)?;
    let plan = resolve(&spec, &result.labels, &meta, keep_unmatched_labels)
        .map_err(|e| Failure::parse(format!("{}: {}", spec_path.display(), e)))?;

    for unmatched in &plan.unmatched {
        eprintln!(
            "warning: no label matches \"{}\"; directive dropped",
            escape::escape_field(unmatched)
        );
    }

    let rewritten = emit_relabeled_eps(&bytes, &plan, &spec);
    write_output(output, &rewritten)?;
    if let Some(overlay) = overlay_path {
        write_output(Some(overlay), emit_tex_overlay(&plan).as_bytes())?;
    }

    if !plan.unmatched.is_empty() && !lenient {
        Ok(EXIT_UNMATCHED)
    } else {
        Ok(EXIT_OK)
    }
}
