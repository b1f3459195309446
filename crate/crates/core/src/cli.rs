//! The `epdc` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{EpdcError, Result};
use crate::estimation::{fit_candidate, ClickStatistics};
use crate::io::dataset::{ingest, serialize_dataset, write_text, IngestOptions};
use crate::io::optics::{mean_photons_to_power, power_to_mean_photons};
use crate::io::report::{ladder, CurveSeries, ModelSummary, OutputFormat, Report, ReportBody, Settings};
use crate::io::{RunConfig, ScenarioFile};
use crate::model_selection::select_model;
use crate::sweep_analysis::{analyze_sweep, regime_boundaries, BiasCurrent, SweepData};

#[derive(Debug, Parser)]
#[command(name = "epdc", version, about = "Characterize lossy click/no-click photon detectors")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for multi-start placement and synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; curve files are written beside it. Defaults to stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Integration time per row, for files without trials or integration_time_s.
    #[arg(long, global = true)]
    pub integration_time: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Text => OutputFormat::Text,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a count-rate CSV from a scenario file.
    Synth { scenario: PathBuf },
    /// Fit one truncation order.
    Fit {
        data: PathBuf,
        #[arg(long)]
        i_max: usize,
        /// Bias current to analyse when the file holds several.
        #[arg(long)]
        bias: Option<f64>,
    },
    /// Run the truncation-order ladder and select the minimal model.
    Select {
        data: PathBuf,
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long)]
        i_min: Option<usize>,
        #[arg(long)]
        i_max: Option<usize>,
    },
    /// Select a model at every bias current and tabulate the parameters.
    Sweep { data: PathBuf },
    /// Convert between optical power and mean photon number per pulse.
    Convert {
        #[arg(long, required_unless_present = "mean_photons", conflicts_with = "mean_photons")]
        power: Option<f64>,
        #[arg(long)]
        mean_photons: Option<f64>,
        #[arg(long)]
        wavelength: Option<f64>,
        #[arg(long)]
        rep_rate: Option<f64>,
        #[arg(long)]
        attenuation_db: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed(cli.seed);
    Ok(cfg)
}

fn pick_current(data: SweepData, bias: Option<f64>) -> Result<(Option<f64>, Vec<ClickStatistics>)> {
    match bias {
        Some(b) => {
            let available: Vec<f64> = data.keys().map(|k| k.0).collect();
            let mut data = data;
            data.remove(&BiasCurrent(b))
                .map(|d| (Some(b), d))
                .ok_or_else(|| EpdcError::Validation(format!("bias current {b} not in file (have {available:?})")))
        }
        None if data.len() == 1 => {
            let (k, v) = data.into_iter().next().expect("one entry");
            Ok((Some(k.0), v))
        }
        None => Err(EpdcError::Validation(format!(
            "file holds {} bias currents; choose one with --bias or use `sweep`",
            data.len()
        ))),
    }
}

fn label(bias: Option<f64>) -> String {
    bias.map_or_else(|| "data".to_string(), |b| format!("I{b}uA"))
}

fn write_output(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(path) => write_text(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| EpdcError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn emit(cli: &Cli, report: &Report, series: &[CurveSeries]) -> Result<()> {
    match &cli.output {
        Some(path) => {
            crate::io::emit_report(report, series, path, cli.format.into())?;
            write_sidecar(path, cli)
        }
        None => write_output(cli, &match cli.format {
            FormatArg::Json => report.to_json(),
            FormatArg::Text => report.to_text(),
        }),
    }
}

/// Run metadata kept out of the report so reports compare byte-for-byte.
fn write_sidecar(output: &Path, cli: &Cli) -> Result<()> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "tool": "epdc",
        "version": env!("CARGO_PKG_VERSION"),
        "threads": cli.threads,
        "unix_time": stamp,
    });
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_text(&output.with_file_name(format!("{stem}.meta.json")), &format!("{meta}\n"))
}

fn ingest_options(cli: &Cli, cfg: &RunConfig) -> IngestOptions {
    IngestOptions { optics: cfg.optics.clone(), weights: cfg.fit.weights, integration_time_s: cli.integration_time }
}

fn run_command(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { scenario } => {
            let mut file = ScenarioFile::load(scenario)?;
            if let Some(seed) = cli.seed {
                file.reseed(seed);
            }
            write_output(cli, &serialize_dataset(&file.synthesize()?))
        }
        Command::Fit { data, i_max, bias } => {
            let (bias, points) = pick_current(ingest(data, &ingest_options(cli, &cfg))?, *bias)?;
            let settings = Settings { optics: cfg.optics.clone(), fit: cfg.fit.clone(), selection: None, sweep: None };
            let fit = fit_candidate(&points, *i_max, &cfg.fit)?;
            let series = CurveSeries::new(label(bias), &points, &fit.model)?;
            let report = Report::new(
                settings,
                ReportBody::Fit { bias_current_ua: bias, summary: ModelSummary::from_fit(&fit), fit },
            );
            emit(cli, &report, &[series])
        }
        Command::Select { data, bias, i_min, i_max } => {
            let (bias, points) = pick_current(ingest(data, &ingest_options(cli, &cfg))?, *bias)?;
            let mut selection = cfg.selection.clone();
            selection.i_max_min = i_min.unwrap_or(selection.i_max_min);
            selection.i_max_max = i_max.unwrap_or(selection.i_max_max);
            let settings = Settings { optics: cfg.optics.clone(), fit: cfg.fit.clone(), selection: Some(selection.clone()), sweep: None };
            let (report, failure) = match select_model(&points, selection.i_max_range(), &selection, &cfg.fit) {
                Ok(r) => (r, None),
                Err(EpdcError::SelectionFailure { report }) => {
                    let err = EpdcError::SelectionFailure { report: report.clone() };
                    (*report, Some(err))
                }
                Err(e) => return Err(e),
            };
            let summary = report.selected().map(ModelSummary::from_fit);
            let series = match report.selected() {
                Some(fit) => vec![CurveSeries::new(label(bias), &points, &fit.model)?],
                None => Vec::new(),
            };
            let body = ReportBody::Selection { bias_current_ua: bias, summary, ladder: ladder(&report), selection: report };
            emit(cli, &Report::new(settings, body), &series)?;
            failure.map_or(Ok(()), Err)
        }
        Command::Sweep { data } => {
            let datasets = ingest(data, &ingest_options(cli, &cfg))?;
            let sweep = analyze_sweep(&datasets, &cfg.selection, &cfg.fit)?;
            let boundaries = if sweep.table.len() >= 3 { regime_boundaries(&sweep, &cfg.sweep)? } else { Vec::new() };
            let mut series = Vec::new();
            for point in &sweep.points {
                if let Some(fit) = point.report.as_ref().and_then(|r| r.selected()) {
                    let points = &datasets[&BiasCurrent(point.bias_current_ua)];
                    series.push(CurveSeries::new(label(Some(point.bias_current_ua)), points, &fit.model)?);
                }
            }
            let settings = Settings {
                optics: cfg.optics.clone(),
                fit: cfg.fit.clone(),
                selection: Some(cfg.selection.clone()),
                sweep: Some(cfg.sweep.clone()),
            };
            let body = ReportBody::Sweep { table: sweep.table, boundaries, points: sweep.points };
            emit(cli, &Report::new(settings, body), &series)
        }
        Command::Convert { power, mean_photons, wavelength, rep_rate, attenuation_db } => {
            let mut optics = cfg.optics.clone();
            optics.wavelength_m = wavelength.unwrap_or(optics.wavelength_m);
            optics.repetition_rate_hz = rep_rate.unwrap_or(optics.repetition_rate_hz);
            optics.attenuation_db = attenuation_db.unwrap_or(optics.attenuation_db);
            let line = match (power, mean_photons) {
                (Some(p), _) => format!("mean_photons {:?}\n", power_to_mean_photons(*p, &optics)?),
                (None, Some(n)) => format!("power_W {:?}\n", mean_photons_to_power(*n, &optics)?),
                (None, None) => unreachable!("clap requires one of --power / --mean-photons"),
            };
            write_output(cli, &line)
        }
    }
}

/// Executes a parsed invocation on a pool of `--threads` workers.
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| EpdcError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| run_command(cli))
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("epdc: {e}");
            e.exit_code()
        }
    }
}
