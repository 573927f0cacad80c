//! Command-line front end: parse a system file, dispatch a computation, emit
//! text or JSON reports plus CSV/PGM artifacts.
//!
//! Exit codes: 0 success, 1 internal assertion failure, 2 invalid arguments
//! or system file, 3 unreadable input.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carpetdim::approx::{build_uniform_approx, s_k_box, s_k_hausdorff};
use carpetdim::boxcount::{estimate_box_dimension, render_image, ExpandOptions, RegressionOptions};
use carpetdim::moran::bm_closed_form;
use carpetdim::overlap::{exceptional_report, GammaOptions};
use carpetdim::system::CarpetKind;
use carpetdim::variational::{bm_optimal_weights, maximize_g, MaximizeOptions};
use carpetdim::{BaranskiSystem, ExecMode, SystemDefinition};

use report::{dimension_report, render_text, ReportOptions};

const EXIT_INTERNAL: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_UNREADABLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "carpetdim",
    about = "Dimensions of carpets with translated rows and columns",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// System definition file (JSON).
    #[arg(long)]
    input: PathBuf,

    /// Output format for reports.
    #[arg(long, value_parser = ["text", "json"], default_value = "text")]
    format: String,

    /// Write the primary artifact here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Seed for randomized starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads: 0 = all cores, 1 = sequential.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Cap on enumerated words / emitted rectangles.
    #[arg(long, default_value_t = 50_000_000)]
    budget: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Full dimension report: Hausdorff, box/packing, diagnostics summary.
    Dims {
        #[command(flatten)]
        common: CommonArgs,
        /// Depth of the overlap diagnostics.
        #[arg(long, default_value_t = 10)]
        kmax: usize,
        /// Random maximizer starts.
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Hausdorff dimension only.
    Hausdorff {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Analytic box/packing dimension and Moran exponents.
    Box {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact-overlap diagnostics for the axis projections.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// Enumeration depth.
        #[arg(long, default_value_t = 10)]
        kmax: usize,
        /// Pair words only when their contraction products agree.
        #[arg(long, default_value_t = false)]
        strict_ratio: bool,
    },
    /// Convergent traces (k, s_k) as CSV.
    Approx {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest level in the trace.
        #[arg(long, default_value_t = 100_000)]
        kmax: usize,
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Empirical box-count ladder and regression slope.
    Empirical {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 2)]
        qmin: u32,
        #[arg(long, default_value_t = 8)]
        qmax: u32,
        /// Scale ladder base: delta = base^(-q).
        #[arg(long, default_value_t = 3.0)]
        base: f64,
    },
    /// PGM raster of the covering rectangles at delta = base^(-qmax).
    Render {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[arg(long, default_value_t = 2.0)]
        base: f64,
        #[arg(long, default_value_t = 8)]
        qmax: u32,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CARPETDIM_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::new(EXIT_INTERNAL, e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Dims {
            common,
            kmax,
            starts,
        } => {
            let (system, mode) = load(&common)?;
            let report = dimension_report(
                &system,
                &ReportOptions {
                    seed: common.seed,
                    starts,
                    diagnostic_depth: kmax,
                    word_budget: common.budget,
                    mode,
                },
            )
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
            if let Err(msg) = report.check_invariants() {
                return Err(Failure::new(
                    EXIT_INTERNAL,
                    format!("internal assertion failed: {msg}"),
                ));
            }
            let body = if common.format == "json" {
                to_json(&report)?
            } else {
                render_text(&system, &report)
            };
            emit(&common.output, &body)?;
            Ok(())
        }
        Command::Hausdorff { common, starts } => {
            let (system, mode) = load(&common)?;
            let class = system.classify();
            let (value, method, converged) = match class.kind {
                CarpetKind::BedfordMcMullenType { .. } => (
                    bm_closed_form(&system).map_err(Failure::from)?.hausdorff,
                    "closed_form",
                    None,
                ),
                CarpetKind::GeneralBaranski => {
                    let out = maximize_g(
                        &system,
                        &MaximizeOptions {
                            random_starts: starts,
                            seed: common.seed,
                            mode,
                            ..MaximizeOptions::default()
                        },
                    )
                    .map_err(Failure::from)?;
                    (out.value, "variational", Some(out.converged))
                }
            };
            let body = if common.format == "json" {
                let payload = serde_json::json!({
                    "schema_version": report::SCHEMA_VERSION,
                    "dim_H": value,
                    "method": method,
                    "converged": converged,
                });
                format!("{}\n", serde_json::to_string_pretty(&payload)?)
            } else {
                format!("dim_H = {value:.6} ({method})\n")
            };
            emit(&common.output, &body)?;
            Ok(())
        }
        Command::Box { common } => {
            let (system, _) = load(&common)?;
            let exps = carpetdim::box_dimension_analytic(&system).map_err(Failure::from)?;
            let body = if common.format == "json" {
                let payload = serde_json::json!({
                    "schema_version": report::SCHEMA_VERSION,
                    "dim_B": exps.box_dimension(),
                    "dim_P": exps.box_dimension(),
                    "x_axis_exponent": exps.x_axis_exponent,
                    "y_axis_exponent": exps.y_axis_exponent,
                    "width_major_exponent": exps.width_major_exponent,
                    "height_major_exponent": exps.height_major_exponent,
                });
                format!("{}\n", serde_json::to_string_pretty(&payload)?)
            } else {
                format!(
                    "dim_B = dim_P = {:.6}\n  t_A = {:.6}  t_B = {:.6}  D_A = {:.6}  D_B = {:.6}\n",
                    exps.box_dimension(),
                    exps.x_axis_exponent,
                    exps.y_axis_exponent,
                    exps.width_major_exponent,
                    exps.height_major_exponent
                )
            };
            emit(&common.output, &body)?;
            Ok(())
        }
        Command::Diagnose {
            common,
            kmax,
            strict_ratio,
        } => {
            let (system, mode) = load(&common)?;
            let rep = exceptional_report(
                &system,
                &GammaOptions {
                    k_max: kmax,
                    word_budget: common.budget,
                    strict_ratio_pairs: strict_ratio,
                    mode,
                },
            );
            let body = if common.format == "json" {
                to_json(&rep)?
            } else {
                let mut s = String::new();
                s.push_str(&format!(
                    "verdict: {}\n",
                    report::verdict_label(rep.verdict)
                ));
                s.push_str(&format!(
                    "x axis: {}\n",
                    report::axis_label(&rep.x_axis.status)
                ));
                s.push_str(&format!(
                    "y axis: {}\n",
                    report::axis_label(&rep.y_axis.status)
                ));
                s.push_str(&format!("dim of exceptional set: {}\n", rep.dim_e_constant));
                for hit in &rep.hyperplane_hits {
                    s.push_str(&format!(
                        "coincident translations: {:?} {} = {} (equal ratio: {})\n",
                        hit.axis, hit.first, hit.second, hit.equal_ratio
                    ));
                }
                if let Some(secc) = &rep.x_axis.secc {
                    s.push_str("x-axis gap trace (level, gamma, decay rate):\n");
                    for e in &secc.trace.entries {
                        let rate = e.decay_rate.map_or("-".to_string(), |r| format!("{r:.6}"));
                        s.push_str(&format!("  {:>3}  {}  {}\n", e.level, e.gamma, rate));
                    }
                }
                s
            };
            emit(&common.output, &body)?;
            Ok(())
        }
        Command::Approx {
            common,
            kmax,
            starts,
        } => {
            let (system, mode) = load(&common)?;
            let weights = match system.classify().kind {
                CarpetKind::BedfordMcMullenType { .. } => {
                    bm_optimal_weights(&system).map_err(Failure::from)?
                }
                CarpetKind::GeneralBaranski => {
                    maximize_g(
                        &system,
                        &MaximizeOptions {
                            random_starts: starts,
                            seed: common.seed,
                            mode,
                            ..MaximizeOptions::default()
                        },
                    )
                    .map_err(Failure::from)?
                    .weights
                }
            };
            let mut csv = String::from("k,s_k_hausdorff,s_k_box\n");
            for k in level_ladder(kmax) {
                let approx = build_uniform_approx(&system, &weights, k);
                let sh = s_k_hausdorff(&approx).map_err(Failure::from)?;
                let sb = s_k_box(&system, k).map_err(Failure::from)?;
                csv.push_str(&format!("{k},{sh},{sb}\n"));
            }
            emit(&common.output, &csv)?;
            Ok(())
        }
        Command::Empirical {
            common,
            qmin,
            qmax,
            base,
        } => {
            let (system, mode) = load(&common)?;
            let estimate = estimate_box_dimension(
                &system,
                &RegressionOptions {
                    q_min: qmin,
                    q_max: qmax,
                    base,
                    max_rects: common.budget,
                    mode,
                },
            )
            .map_err(Failure::from)?;
            let mut csv = String::from("q,delta,N_delta,log_N,minus_log_delta\n");
            for s in &estimate.samples {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.q,
                    s.delta,
                    s.count,
                    (s.count as f64).ln(),
                    -s.delta.ln()
                ));
            }
            if common.format == "json" {
                let payload = serde_json::json!({
                    "schema_version": report::SCHEMA_VERSION,
                    "slope": estimate.slope,
                    "intercept": estimate.intercept,
                    "dropped_transient": estimate.dropped_transient,
                    "samples": estimate.samples,
                });
                let body = format!("{}\n", serde_json::to_string_pretty(&payload)?);
                emit(&common.output, &body)?;
            } else if let Some(path) = &common.output {
                write_file(path, &csv)?;
                println!(
                    "slope = {:.6} (dropped_transient = {})",
                    estimate.slope, estimate.dropped_transient
                );
            } else {
                print!("{csv}");
                println!(
                    "slope = {:.6} (dropped_transient = {})",
                    estimate.slope, estimate.dropped_transient
                );
            }
            Ok(())
        }
        Command::Render {
            common,
            resolution,
            base,
            qmax,
        } => {
            let (system, mode) = load(&common)?;
            let delta = base.powi(-(qmax as i32));
            let raster = render_image(
                &system,
                delta,
                resolution,
                &ExpandOptions {
                    max_rects: common.budget,
                },
                mode,
            )
            .map_err(Failure::from)?;
            let path = common.output.as_ref().ok_or_else(|| {
                Failure::new(EXIT_INVALID, "render requires --output for the PGM file")
            })?;
            let file = fs::File::create(path)
                .map_err(|e| Failure::new(EXIT_INTERNAL, format!("cannot write {path:?}: {e}")))?;
            let mut writer = std::io::BufWriter::new(file);
            raster.write_pgm(&mut writer).map_err(Failure::from)?;
            writer.flush().map_err(Failure::from)?;
            Ok(())
        }
    }
}

/// Reads, parses and validates the system file; configures parallelism.
fn load(common: &CommonArgs) -> Result<(BaranskiSystem, ExecMode), Failure> {
    let text = fs::read_to_string(&common.input).map_err(|e| {
        Failure::new(
            EXIT_UNREADABLE,
            format!("cannot read {:?}: {e}", common.input),
        )
    })?;
    let definition: SystemDefinition = serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("invalid system file: {e}")))?;
    let system = BaranskiSystem::validate(definition)
        .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    for warning in system.warnings() {
        log::warn!("{warning}");
        eprintln!("warning: {warning}");
    }
    let mode = match common.threads {
        1 => ExecMode::Sequential,
        0 => ExecMode::Parallel,
        _n => {
            #[cfg(feature = "parallel")]
            {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(_n)
                    .build_global();
            }
            ExecMode::Parallel
        }
    };
    Ok((system, mode))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn emit(output: &Option<PathBuf>, body: &str) -> Result<(), Failure> {
    match output {
        Some(path) => write_file(path, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body)
        .map_err(|e| Failure::new(EXIT_INTERNAL, format!("cannot write {path:?}: {e}")))
}

/// Levels for the convergent trace: roughly geometric, always including the
/// endpoints.
fn level_ladder(k_max: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1usize;
    while k < k_max {
        ks.push(k);
        let next = (k as f64 * 1.8).ceil() as usize;
        k = next.max(k + 1);
    }
    ks.push(k_max);
    ks.dedup();
    ks
}
