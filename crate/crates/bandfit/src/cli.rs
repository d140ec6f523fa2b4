//! Command-line front end.
//!
//! Exit statuses: 0 success, 1 runtime or data failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use bandfit_core::calibration::NORMALIZED_RANGE;
use bandfit_core::spectral::circular_convolve2_complex;
use bandfit_core::stats::{log_edges, DEFAULT_BINS, DEFAULT_HIST_RANGE};
use bandfit_core::verify::{eigenfunction_suite, eigenfunction_suite_with, wft_shift_suite, SuiteOutcome};
use bandfit_core::{calibration_curve, gabor_kernel, ComplexField2, Field2, Freq2, GaborParams};
use clap::builder::RangedU64ValueParser;
use clap::{Args, CommandFactory, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::{load_archive, write_archive, ArchiveBuilder};
use crate::ingest::{extract_conv_slices, DEFAULT_MODEL_ID};
use crate::pipeline::{fit_slices, representative};
use crate::render::{render_boxplot_svg, render_calibration_svg, render_histogram_svg, render_kernel_image};
use crate::report::{emit_report, write_file, Report, ReportFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const THEORY_SIZES: [usize; 3] = [8, 16, 32];
pub const THEORY_CASES: usize = 20;
pub const THEORY_TOLERANCE: f64 = 1e-9;

/// Approximate pixel side of rendered kernel images.
const IMAGE_TARGET: usize = 128;

#[derive(Debug, Parser)]
#[command(
    name = "bandfit",
    version,
    about = "Fit oriented bandpass models to convolution kernels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the eigenfunction and windowed-shift identities numerically.
    VerifyTheory(VerifyArgs),
    /// Write an analytic kernel as an archive and a PGM image.
    Synth(SynthArgs),
    /// Fit every convolution kernel in an archive and write reports and figures.
    Fit(FitArgs),
    /// Measure RMS residual against known amounts of uniform noise.
    Calibrate(CalibrateArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Input tensor archive.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Glob over tensor names.
    #[arg(long, default_value = "*")]
    pub select: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bins over the log-spaced residual range.
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub bins: usize,
    /// Comma-separated noise fractions of the normalized value range.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub noise: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub trials: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<NonZeroUsize>,
}

impl RunConfig {
    pub fn parallelism(&self) -> usize {
        self.jobs
            .or_else(|| std::thread::available_parallelism().ok())
            .map_or(1, NonZeroUsize::get)
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Analytic kernel shape.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 3.0, value_parser = positive, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3, value_parser = finite, allow_negative_numbers = true)]
    pub u1: f64,
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_negative_numbers = true)]
    pub u2: f64,
    /// Defaults to the odd-symmetric (sine) phase.
    #[arg(long, default_value_t = -std::f64::consts::FRAC_PI_2, value_parser = finite, allow_negative_numbers = true)]
    pub phase: f64,
    #[arg(long, default_value_t = 1.0, value_parser = finite, allow_negative_numbers = true)]
    pub amplitude: f64,
}

impl ModelArgs {
    pub fn params(&self) -> GaborParams {
        GaborParams::new(self.amplitude, self.phase, Freq2::new(self.u1, self.u2), self.sigma)
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub config: RunConfig,
    /// Perturb the convolution so the eigenfunction check must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Kernel side.
    #[arg(long, default_value_t = 15, value_parser = RangedU64ValueParser::<usize>::new().range(1..=255))]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 11, value_parser = RangedU64ValueParser::<usize>::new().range(1..=255))]
    pub k: usize,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::VerifyTheory(a) => cmd_verify_theory(a, out),
        Command::Synth(a) => cmd_synth(a, out, err),
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Calibrate(a) => cmd_calibrate(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            let e = Cli::command().error(clap::error::ErrorKind::ValueValidation, message);
            let _ = write!(err, "{}", e.render());
            EXIT_USAGE
        }
        Err(Failure::Runtime(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_FAILURE
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn image_side(k: usize) -> usize {
    k * (IMAGE_TARGET / k).max(1)
}

fn report_suite(out: &mut dyn Write, property: &str, s: &SuiteOutcome) -> std::io::Result<bool> {
    let pass = s.passes(THEORY_TOLERANCE);
    writeln!(
        out,
        "{property:<13} N={:<2} cases={:<5} max_residual={:.3e} {}",
        s.n,
        s.cases,
        s.max_residual,
        if pass { "PASS" } else { "FAIL" }
    )?;
    if !pass {
        let (case, m1, m2) = s.worst;
        writeln!(
            out,
            "  violating case: #{case} at bin ({m1}, {m2}), tolerance {THEORY_TOLERANCE:e}"
        )?;
    }
    Ok(pass)
}

/// Adds a small error to one sample of every convolution output.
fn broken_convolution(f: &ComplexField2, h: &ComplexField2) -> bandfit_core::Result<ComplexField2> {
    let good = circular_convolve2_complex(f, h)?;
    let (rows, cols) = good.dims();
    let mut values = good.values().to_vec();
    values[0] += 1e-6;
    ComplexField2::new(rows, cols, values)
}

fn cmd_verify_theory(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let seed = args.config.seed;
    let mut all = true;
    for n in THEORY_SIZES {
        let eig = if args.inject_fault {
            eigenfunction_suite_with(n, THEORY_CASES, seed, broken_convolution)?
        } else {
            eigenfunction_suite(n, THEORY_CASES, seed)?
        };
        all &= report_suite(out, "eigenfunction", &eig)?;
        let wft = wft_shift_suite(n, THEORY_CASES, seed ^ 0x5eed)?;
        all &= report_suite(out, "wft-shift", &wft)?;
    }
    Ok(if all { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let params = args.model.params();
    let mut kernel = gabor_kernel(args.k, &params).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(noise) = &args.config.noise {
        let &[a] = noise.as_slice() else {
            return Err(Failure::Usage("synth takes a single --noise fraction".into()));
        };
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Failure::Usage(format!("noise fraction {a} must be nonnegative")));
        }
        let peak = kernel.max_abs();
        let half = a * NORMALIZED_RANGE * peak;
        let mut rng = ChaCha8Rng::seed_from_u64(args.config.seed);
        let values = kernel
            .values()
            .iter()
            .map(|v| {
                if half > 0.0 {
                    v + rng.random_range(-half..=half)
                } else {
                    *v
                }
            })
            .collect();
        kernel = Field2::new(args.k, args.k, values)?;
    }
    create_dir(&args.config.out)?;
    let data: Vec<f32> = kernel.values().iter().map(|&v| v as f32).collect();
    let archive = ArchiveBuilder::new()
        .tensor("synth.weight", &[1, 1, args.k, args.k], &data)
        .layer_order(&["synth"])
        .model_id("synth")
        .build();
    let archive_path = args.config.out.join("synth.tensors");
    write_archive(&archive, &archive_path)?;
    let image_path = args.config.out.join("synth.pgm");
    let image = render_kernel_image(&kernel, image_side(args.k))?;
    write_file(&image_path, &image.to_pgm())?;
    if params.amplitude == 0.0 {
        writeln!(err, "warning: amplitude 0 gives an all-zero kernel")?;
    }
    writeln!(out, "wrote {}", archive_path.display())?;
    writeln!(out, "wrote {}", image_path.display())?;
    Ok(EXIT_OK)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_fit(args: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let config = &args.config;
    let Some(input) = &config.input else {
        return Err(Failure::Usage("fit requires --input <archive>".into()));
    };
    let mut archive = load_archive(input)?;
    if archive.metadata.model_id.is_none() {
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or(DEFAULT_MODEL_ID);
        archive.metadata.model_id = Some(stem.to_owned());
    }
    let model_id = archive.metadata.model_id.clone().unwrap_or_default();
    let extraction = extract_conv_slices(&archive, &config.select).map_err(|e| Failure::Usage(e.to_string()))?;
    for w in &extraction.warnings {
        writeln!(err, "warning: {}: {}", w.tensor, w.message)?;
    }
    if extraction.slices.is_empty() {
        writeln!(err, "warning: no convolution kernels matched `{}`", config.select)?;
    }

    let fits = fit_slices(&extraction.slices, config.parallelism())?;
    let (lo, hi) = DEFAULT_HIST_RANGE;
    let edges = log_edges(config.bins, lo, hi)?;
    let report = Report::build(
        &model_id,
        &extraction.layers,
        &extraction.slices,
        &fits,
        &edges,
        extraction.warnings.clone(),
    )?;

    let dir = &config.out;
    create_dir(dir)?;
    emit_report(&report, ReportFormat::Json, &dir.join("report.json"))?;
    emit_report(&report, ReportFormat::Csv, &dir.join("report.csv"))?;
    if report.layers.is_empty() {
        writeln!(err, "warning: no layers to plot; skipping boxplot.svg")?;
    } else {
        write_file(
            &dir.join("boxplot.svg"),
            render_boxplot_svg(&report.layers, &report.aggregate)?.as_bytes(),
        )?;
    }
    write_file(
        &dir.join("histogram.svg"),
        render_histogram_svg(&report.histogram)?.as_bytes(),
    )?;

    let median_dir = dir.join("median");
    for (layer_index, layer_name) in &extraction.layers {
        let Some(i) = representative(&extraction.slices, &fits, *layer_index) else {
            continue;
        };
        create_dir(&median_dir)?;
        let slice = &extraction.slices[i];
        let fit = &fits[i];
        let k = slice.values.height();
        let model = gabor_kernel(k, &fit.params)?.scaled(fit.scale);
        let stem = format!("layer{layer_index:03}_{}", sanitize(layer_name));
        for (suffix, field) in [("learned", &slice.values), ("fit", &model)] {
            let image = render_kernel_image(field, image_side(k))?;
            write_file(&median_dir.join(format!("{stem}_{suffix}.pgm")), &image.to_pgm())?;
        }
    }

    writeln!(
        out,
        "model {model_id}: {} slices, {} layers",
        report.slices.len(),
        report.layers.len()
    )?;
    for s in &report.layers {
        match s.stats {
            Some(b) => writeln!(
                out,
                "  {:<24} n={:<6} degenerate={:<4} median={:.4e} q1={:.4e} q3={:.4e}",
                s.layer_name, s.count, s.degenerate_count, b.median, b.q1, b.q3
            )?,
            None => writeln!(
                out,
                "  {:<24} n={:<6} degenerate={:<4} no non-degenerate fits",
                s.layer_name, s.count, s.degenerate_count
            )?,
        }
    }
    writeln!(out, "wrote reports to {}", dir.display())?;
    Ok(EXIT_OK)
}

/// `0.00, 0.01, ..., 0.20`.
pub fn default_noise_fractions() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 100.0).collect()
}

fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32, Failure> {
    let config = &args.config;
    let fractions = config.noise.clone().unwrap_or_else(default_noise_fractions);
    let points = calibration_curve(args.k, &args.model.params(), &fractions, config.trials, config.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    create_dir(&config.out)?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(["noise_fraction", "mean_rms", "expected_rms", "trials"])?;
    for p in &points {
        let expected = p.noise_fraction * NORMALIZED_RANGE / 3f64.sqrt();
        w.write_record([
            format!("{:?}", p.noise_fraction),
            format!("{:?}", p.mean_rms),
            format!("{:?}", expected),
            p.trials.to_string(),
        ])?;
    }
    let csv_bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    let csv_path = config.out.join("calibration.csv");
    write_file(&csv_path, &csv_bytes)?;
    let svg_path = config.out.join("calibration.svg");
    write_file(&svg_path, render_calibration_svg(&points, NORMALIZED_RANGE)?.as_bytes())?;

    for p in &points {
        writeln!(out, "noise {:.2}  mean_rms {:.5}", p.noise_fraction, p.mean_rms)?;
    }
    writeln!(out, "wrote {}", csv_path.display())?;
    writeln!(out, "wrote {}", svg_path.display())?;
    Ok(EXIT_OK)
}
