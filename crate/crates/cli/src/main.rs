//! `hrnflow` — command-line front end for data-flow deficit analysis on
//! hierarchical recurrent networks.
//!
//! Subcommands cover the whole pipeline: `validate` and `simulate` run
//! scenario files, `diagram` re-derives the persistence diagram recorded in
//! a report (refusing tampered reports), `compare` measures the bottleneck
//! distance between two runs, `render` draws diagrams and network graphs,
//! and `check` runs the built-in self-check suite.
//!
//! Exit codes: 0 success, 1 domain error (invalid scenario, inconsistent
//! report, failed self-check), 2 usage error, 3 I/O error. A downstream
//! consumer closing the output pipe (`hrnflow … | head`) ends the run
//! quietly with status 0.

#![forbid(unsafe_code)]

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hrnflow_core::cosheaf::KernelMode;
use hrnflow_core::dataflow::CapacityMode;
use hrnflow_core::hrn::{build, export_graph, validate, GraphExport, GRAPH_TEXT_HEADER};
use hrnflow_core::persistence::{ErrorDiagram, DIAGRAM_TEXT_HEADER};
use hrnflow_core::scenario::{
    compare_diagrams, compare_instances, cones_to_csv, parse_report, parse_scenario,
    rederive_diagram, report_to_toml, run_instance, validate_scenario, ComparisonReport,
    InstanceReport, RunOutcome,
};
use hrnflow_core::selfcheck;

/// One error type per exit code, so failures map to statuses predictably.
#[derive(Debug, thiserror::Error)]
enum CliError {
    /// The inputs were readable but wrong: invalid scenario, malformed or
    /// tampered report, failed run, failed self-check.
    #[error("{0}")]
    Domain(String),
    /// The command line asked for something contradictory.
    #[error("{0}")]
    Usage(String),
    /// A file could not be read or written.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

/// Shorthand for wrapping library errors as domain failures.
fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "hrnflow",
    version,
    about = "Data-flow deficit analysis on hierarchical recurrent networks",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a scenario file and check it without running anything.
    Validate {
        /// Scenario TOML file.
        scenario: PathBuf,
    },
    /// Run a scenario and emit its instance report (and optional bundle).
    Simulate {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Override the scenario's RNG seed for this run.
        #[arg(long)]
        seed: Option<u64>,
        /// Force one capacity mode everywhere, clearing per-subprogram
        /// overrides.
        #[arg(long = "policy.capacity-mode", visible_alias = "capacity-mode", value_enum)]
        capacity_mode: Option<CapacityModeArg>,
        /// Which cone kernel drives event extraction.
        #[arg(long = "policy.kernel-mode", visible_alias = "kernel-mode", value_enum)]
        kernel_mode: Option<KernelModeArg>,
        /// Directory for the full artifact bundle (report.toml, network.txt,
        /// flow_<i>.csv, cones.csv, diagram.txt). Without it, the report
        /// TOML goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive the persistence diagram recorded in an instance report.
    ///
    /// The diagram is recomputed from the report's cone table and checked
    /// against the recorded one; a report that does not reproduce its own
    /// diagram is rejected.
    Diagram {
        /// Instance report TOML file.
        report: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value = "text")]
        format: DiagramFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two runs (report TOML or diagram text files) by bottleneck
    /// distance.
    Compare {
        left: PathBuf,
        right: PathBuf,
        /// Persistence at or below this counts as noise in the statistics.
        /// Defaults to the reports' own thresholds (or 0 for bare diagrams).
        #[arg(long)]
        noise_threshold: Option<u64>,
        /// Output format.
        #[arg(long, value_enum, default_value = "text")]
        format: CompareFormat,
    },
    /// Draw a persistence diagram or an exported network graph.
    Render {
        /// A diagram text file or a network graph text file (recognised by
        /// their header lines).
        file: PathBuf,
        /// ascii works for both kinds; svg is for diagrams, dot for graphs.
        #[arg(long, value_enum, default_value = "ascii")]
        format: RenderFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-check suite and report each result.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CapacityModeArg {
    Cap,
    Reject,
    Ignore,
}

impl From<CapacityModeArg> for CapacityMode {
    fn from(a: CapacityModeArg) -> CapacityMode {
        match a {
            CapacityModeArg::Cap => CapacityMode::Cap,
            CapacityModeArg::Reject => CapacityMode::Reject,
            CapacityModeArg::Ignore => CapacityMode::Ignore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelModeArg {
    Absolute,
    Incremental,
}

impl From<KernelModeArg> for KernelMode {
    fn from(a: KernelModeArg) -> KernelMode {
        match a {
            KernelModeArg::Absolute => KernelMode::Absolute,
            KernelModeArg::Incremental => KernelMode::Incremental,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagramFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareFormat {
    Text,
    Toml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderFormat {
    Ascii,
    Svg,
    Dot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Simulate {
            scenario,
            seed,
            capacity_mode,
            kernel_mode,
            out,
        } => cmd_simulate(&scenario, seed, capacity_mode, kernel_mode, out.as_deref()),
        Command::Diagram {
            report,
            format,
            out,
        } => cmd_diagram(&report, format, out.as_deref()),
        Command::Compare {
            left,
            right,
            noise_threshold,
            format,
        } => cmd_compare(&left, &right, noise_threshold, format),
        Command::Render { file, format, out } => cmd_render(&file, format, out.as_deref()),
        Command::Check => cmd_check(),
    }
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

/// Write to stdout. A consumer that closes the pipe early (`hrnflow … |
/// head`) has all it asked for, so a broken pipe ends the run quietly
/// instead of panicking; any other stdout failure is an I/O error.
fn print_out(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: stdout: {e}");
        std::process::exit(3);
    }
}

fn print_out_line(text: &str) {
    print_out(text);
    print_out("\n");
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Write to `out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print_out(text);
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let scenario = parse_scenario(&read_file(path)?).map_err(domain)?;
    validate_scenario(&scenario).map_err(domain)?;
    let network = build(&scenario.network.cycle_lengths).map_err(domain)?;
    let structure = validate(&network);
    if !structure.is_valid() {
        let details: Vec<String> = structure.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Domain(format!(
            "built network failed structural validation: {}",
            details.join("; ")
        )));
    }
    print_out_line(&format!(
        "ok: {} subprogram(s); network has {} vertices and {} edges",
        scenario.subprograms.len(),
        network.vertex_count(),
        network.edge_count()
    ));
    Ok(())
}

fn cmd_simulate(
    path: &Path,
    seed: Option<u64>,
    capacity_mode: Option<CapacityModeArg>,
    kernel_mode: Option<KernelModeArg>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut scenario = parse_scenario(&read_file(path)?).map_err(domain)?;
    if let Some(mode) = capacity_mode {
        scenario.policy.capacity_mode = mode.into();
        for sub in &mut scenario.subprograms {
            sub.capacity_mode = None;
        }
    }
    if let Some(mode) = kernel_mode {
        scenario.policy.kernel_mode = mode.into();
    }
    let outcome = run_instance(&scenario, seed).map_err(domain)?;
    let report_text = report_to_toml(&outcome.report).map_err(domain)?;
    match out {
        None => {
            print_out(&report_text);
            Ok(())
        }
        Some(dir) => write_bundle(dir, &outcome, &report_text),
    }
}

/// Lay out one run's artifacts in a directory. Every file is derived purely
/// from the run outcome, so identical runs produce byte-identical bundles.
fn write_bundle(dir: &Path, outcome: &RunOutcome, report_text: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })?;
    write_file(&dir.join("report.toml"), report_text)?;
    write_file(
        &dir.join("network.txt"),
        &export_graph(&outcome.network).to_text(),
    )?;
    for (i, flow) in outcome.flows.iter().enumerate() {
        write_file(&dir.join(format!("flow_{}.csv", i + 1)), &flow.to_csv())?;
    }
    write_file(&dir.join("cones.csv"), &cones_to_csv(&outcome.report.cones))?;
    write_file(&dir.join("diagram.txt"), &outcome.diagram.to_text())?;
    print_out_line(&format!("wrote bundle to {}", dir.display()));
    Ok(())
}

fn cmd_diagram(path: &Path, format: DiagramFormat, out: Option<&Path>) -> Result<(), CliError> {
    let report = parse_report(&read_file(path)?).map_err(domain)?;
    let diagram = rederive_diagram(&report).map_err(domain)?;
    let text = match format {
        DiagramFormat::Text => diagram.to_text(),
        DiagramFormat::Csv => diagram.to_csv(),
    };
    emit(out, &text)
}

/// Either side of a comparison: a full instance report or a bare diagram.
enum Side {
    Report(Box<InstanceReport>),
    Diagram(ErrorDiagram),
}

fn load_side(path: &Path) -> Result<Side, CliError> {
    let text = read_file(path)?;
    if text.trim_start().starts_with(DIAGRAM_TEXT_HEADER) {
        Ok(Side::Diagram(ErrorDiagram::from_text(&text).map_err(domain)?))
    } else {
        Ok(Side::Report(Box::new(
            parse_report(&text).map_err(domain)?,
        )))
    }
}

fn cmd_compare(
    left: &Path,
    right: &Path,
    noise_threshold: Option<u64>,
    format: CompareFormat,
) -> Result<(), CliError> {
    let cmp = match (load_side(left)?, load_side(right)?) {
        (Side::Report(a), Side::Report(b)) => {
            compare_instances(&a, &b, noise_threshold).map_err(domain)?
        }
        (a, b) => {
            let da = side_diagram(a)?;
            let db = side_diagram(b)?;
            compare_diagrams(&da, &db, noise_threshold.unwrap_or(0))
        }
    };
    match format {
        CompareFormat::Text => print_comparison(&cmp),
        CompareFormat::Toml => {
            let text = toml::to_string_pretty(&cmp)
                .map_err(|e| CliError::Domain(format!("could not encode comparison: {e}")))?;
            print_out(&text);
        }
    }
    Ok(())
}

fn side_diagram(side: Side) -> Result<ErrorDiagram, CliError> {
    match side {
        Side::Diagram(d) => Ok(d),
        Side::Report(r) => r.diagram().map_err(domain),
    }
}

fn print_comparison(cmp: &ComparisonReport) {
    print_out_line(&format!("bottleneck distance: {}", cmp.distance));
    print_out_line(&cmp.verdict);
    for (name, stats) in [("left", &cmp.left), ("right", &cmp.right)] {
        print_out_line(&format!(
            "{name}: proper mass {} in {} class(es), infinite mass {} in {} class(es)",
            stats.proper_mass, stats.proper_classes, stats.infinity_mass, stats.infinity_classes
        ));
    }
}

fn cmd_render(path: &Path, format: RenderFormat, out: Option<&Path>) -> Result<(), CliError> {
    let text = read_file(path)?;
    let head = text.trim_start();
    let rendered = if head.starts_with(DIAGRAM_TEXT_HEADER) {
        let diagram = ErrorDiagram::from_text(&text).map_err(domain)?;
        match format {
            RenderFormat::Ascii => render::diagram_ascii(&diagram),
            RenderFormat::Svg => render::diagram_svg(&diagram),
            RenderFormat::Dot => {
                return Err(CliError::Usage(
                    "dot output is for network graphs, but this file is a persistence diagram \
                     (use --format ascii or svg)"
                        .into(),
                ))
            }
        }
    } else if head.starts_with(GRAPH_TEXT_HEADER) {
        let graph = GraphExport::from_text(&text).map_err(domain)?;
        match format {
            RenderFormat::Ascii => render::graph_ascii(&graph),
            RenderFormat::Dot => graph.to_dot(),
            RenderFormat::Svg => {
                return Err(CliError::Usage(
                    "svg output is for persistence diagrams, but this file is a network graph \
                     (use --format ascii or dot)"
                        .into(),
                ))
            }
        }
    } else {
        return Err(CliError::Domain(format!(
            "{}: unrecognised file; expected a first line starting with {:?} or {:?}",
            path.display(),
            DIAGRAM_TEXT_HEADER,
            GRAPH_TEXT_HEADER
        )));
    };
    emit(out, &rendered)
}

fn cmd_check() -> Result<(), CliError> {
    let results = selfcheck::run_all();
    let mut failures = 0usize;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        print_out_line(&format!("{status} {} ({})", r.name, r.detail));
        if !r.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        Err(CliError::Domain(format!(
            "{failures} of {} self-check(s) failed",
            results.len()
        )))
    } else {
        print_out_line(&format!("all {} self-checks passed", results.len()));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_one_per_error_kind() {
        assert_eq!(CliError::Domain(String::new()).exit_code(), 1);
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
        let io = CliError::Io {
            path: PathBuf::from("x"),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        };
        assert_eq!(io.exit_code(), 3);
    }

    #[test]
    fn value_enums_map_onto_core_types() {
        assert_eq!(CapacityMode::from(CapacityModeArg::Cap), CapacityMode::Cap);
        assert_eq!(
            CapacityMode::from(CapacityModeArg::Reject),
            CapacityMode::Reject
        );
        assert_eq!(
            CapacityMode::from(CapacityModeArg::Ignore),
            CapacityMode::Ignore
        );
        assert_eq!(
            KernelMode::from(KernelModeArg::Absolute),
            KernelMode::Absolute
        );
        assert_eq!(
            KernelMode::from(KernelModeArg::Incremental),
            KernelMode::Incremental
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
