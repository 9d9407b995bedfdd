//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use meta4diag_core::accuracy::{fitted_study_measures, AccuracyType};
use meta4diag_core::data::{Dataset, ModelSpec, ModelType};
use meta4diag_core::datasets;
use meta4diag_core::inference::{fit_with, FitOptions, NoClock, Posterior};
use meta4diag_core::link::Link;
use meta4diag_core::plots::{
    self, crosshair_layout, forest_layout, render_svg, CurveGeometry, EstimateType, ForestOptions, Plot, RegionKind,
    SrocType, SvgStyle,
};
use meta4diag_core::priors::{tabulate_prior, PriorSpec, PriorTarget};

use crate::csv_io::{parse_dataset, write_dataset, IngestOptions};
use crate::report::{fitted_csv, format_fitted, format_summary, prior_csv};
use crate::result::FitResult;
use crate::runtime::{PoolExecutor, WallClock};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "meta4diag", version, about = "Bayesian bivariate meta-analysis of diagnostic test accuracy studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model and print the summary block.
    Fit(FitArgs),
    /// Print the summary block of a saved fit.
    Summary(SavedFit),
    /// Per-study accuracy table of a saved fit.
    Fitted(FittedArgs),
    /// Forest plot of per-study accuracy.
    Forest(ForestArgs),
    /// Summary ROC plot.
    Sroc(SrocArgs),
    /// Crosshair plot of paired credible intervals.
    Crosshair(CrosshairArgs),
    /// Tabulate a prior density.
    PriorPreview(PreviewArgs),
    /// List or export the bundled datasets.
    Datasets(DatasetArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with TP, FP, TN, FN columns.
    #[arg(long, conflicts_with = "builtin")]
    data: Option<PathBuf>,
    /// Bundled dataset name.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    model_type: u8,
    #[arg(long, default_value = "logit")]
    link: String,
    /// Categorical column defining test modality.
    #[arg(long)]
    modality: Option<String>,
    /// Continuous covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.025,0.5,0.975")]
    quantiles: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    nsample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Default)]
struct PriorArgs {
    #[arg(long)]
    var_prior: Option<String>,
    /// Comma-separated parameters; `_` or `NA` marks a missing slot.
    #[arg(long, allow_hyphen_values = true)]
    var_par: Option<String>,
    #[arg(long)]
    var2_prior: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    var2_par: Option<String>,
    #[arg(long)]
    cor_prior: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cor_par: Option<String>,
    /// Degrees of freedom and scale entries R11, R22, R12.
    #[arg(long, allow_hyphen_values = true)]
    wishart_par: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    priors: PriorArgs,
    /// Write the FitResult JSON here.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Record zero timings so repeated runs give identical files.
    #[arg(long)]
    no_timings: bool,
    #[arg(long, env = "META4DIAG_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct SavedFit {
    /// FitResult JSON written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, env = "META4DIAG_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct FittedArgs {
    #[command(flatten)]
    saved: SavedFit,
    #[arg(long, default_value = "sens")]
    accuracy_type: String,
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Debug, Args)]
struct PlotOutput {
    /// Directory receiving plot files.
    #[arg(long, default_value = "meta4diag-plots")]
    out_dir: PathBuf,
    /// File name inside the output directory.
    #[arg(long, short)]
    output: Option<String>,
    /// Write geometry JSON instead of SVG.
    #[arg(long)]
    geometry: bool,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Debug, Args)]
struct ForestArgs {
    #[command(flatten)]
    saved: SavedFit,
    #[arg(long, default_value = "sens")]
    accuracy_type: String,
    #[arg(long, default_value = "mean")]
    est_type: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.975])]
    intervals: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cut: Option<Vec<f64>>,
    /// Omit the summary row.
    #[arg(long)]
    no_summary: bool,
    #[command(flatten)]
    out: PlotOutput,
}

#[derive(Debug, Args)]
struct SrocArgs {
    #[command(flatten)]
    saved: SavedFit,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=5))]
    sroc_type: u8,
    /// Use the difference-on-sum regression of fitted estimates.
    #[arg(long)]
    walter: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    hide_data: bool,
    #[arg(long)]
    hide_line: bool,
    #[arg(long)]
    hide_credible: bool,
    #[arg(long)]
    hide_prediction: bool,
    #[command(flatten)]
    out: PlotOutput,
}

#[derive(Debug, Args)]
struct CrosshairArgs {
    #[command(flatten)]
    saved: SavedFit,
    #[arg(long, default_value = "mean")]
    est_type: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.975])]
    intervals: Vec<f64>,
    #[command(flatten)]
    out: PlotOutput,
}

#[derive(Debug, Args)]
struct PreviewArgs {
    #[command(flatten)]
    priors: PriorArgs,
    /// var1, var2 or cor; defaults to cor when only correlation flags are given.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Print this dataset as CSV.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long, env = "META4DIAG_THREADS", default_value_t = 0)]
    threads: usize,
    /// Idle seconds before a session expires.
    #[arg(long, default_value_t = 3600)]
    session_ttl: u64,
}

/// Parse a comma-separated parameter list; `_`, `NA` and empty entries
/// are missing.
pub fn parse_par(s: &str) -> Result<Vec<Option<f64>>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            if t.is_empty() || t == "_" || t.eq_ignore_ascii_case("na") {
                Ok(None)
            } else {
                t.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::input(format!("'{t}' is not a number")))
            }
        })
        .collect()
}

impl PriorArgs {
    fn spec(&self) -> Result<PriorSpec> {
        let mut s = PriorSpec::default();
        if let Some(v) = &self.var_prior {
            s.var_prior = v.clone();
        }
        if let Some(v) = &self.var_par {
            s.var_par = parse_par(v)?;
        }
        s.var2_prior = self.var2_prior.clone();
        if let Some(v) = &self.var2_par {
            s.var2_par = Some(parse_par(v)?);
        }
        if let Some(v) = &self.cor_prior {
            s.cor_prior = v.clone();
        }
        if let Some(v) = &self.cor_par {
            s.cor_par = parse_par(v)?;
        }
        if let Some(v) = &self.wishart_par {
            let p = parse_par(v)?;
            s.wishart_par = Some(
                p.into_iter()
                    .map(|x| x.ok_or_else(|| Error::input("inverse Wishart parameters cannot be missing")))
                    .collect::<Result<_>>()?,
            );
        }
        Ok(s)
    }
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let model_type = match self.model_type {
            1 => ModelType::SeSp,
            2 => ModelType::SeFpr,
            3 => ModelType::FnrSp,
            _ => ModelType::FnrFpr,
        };
        let link: Link = self.link.parse()?;
        Ok(ModelSpec {
            model_type,
            link,
            modality_column: self.modality.clone(),
            covariate_columns: self.covariates.clone(),
            quantiles: self.quantiles.clone(),
            nsample: self.nsample,
            seed: self.seed,
        })
    }
}

fn load_dataset(args: &DataArgs, modality: Option<&str>) -> Result<Dataset> {
    match (&args.data, &args.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            parse_dataset(
                &text,
                &IngestOptions {
                    modality_column: modality.map(str::to_owned),
                },
            )
        }
        (None, Some(name)) => {
            datasets::by_name(name).ok_or_else(|| Error::input(format!("unknown builtin dataset '{name}'")))
        }
        (None, None) => Err(Error::input("either --data or --builtin is required")),
    }
}

fn load_fit(saved: &SavedFit) -> Result<(FitResult, Posterior)> {
    let text = std::fs::read_to_string(&saved.fit)?;
    let fit = FitResult::from_json(&text)?;
    let post = fit.to_posterior(&PoolExecutor::new(saved.threads))?;
    Ok((fit, post))
}

fn write_plot(out: &PlotOutput, default_name: &str, plot: &Plot, stdout: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(&out.out_dir)?;
    let (name, body) = if out.geometry {
        let name = out.output.clone().unwrap_or_else(|| format!("{default_name}.json"));
        (name, serde_json::to_string_pretty(plot)? + "\n")
    } else {
        let style = SvgStyle {
            title: out.title.clone(),
            ..SvgStyle::default()
        };
        let name = out.output.clone().unwrap_or_else(|| format!("{default_name}.svg"));
        (name, render_svg(plot, &style)?)
    };
    let path = out.out_dir.join(name);
    std::fs::write(&path, body)?;
    writeln!(stdout, "{}", path.display())?;
    Ok(())
}

fn write_or_print(path: Option<&Path>, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn interval_pair(v: &[f64]) -> Result<(f64, f64)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::input(format!("expected two comma-separated values, got {}", v.len()))),
    }
}

/// The ROC overlay for a fit: data, line, regions and summary point.
fn sroc_geometry(post: &Posterior, a: &SrocArgs, notes: &mut Vec<String>) -> Result<Vec<CurveGeometry>> {
    let covariates = post.model.design.has_covariates();
    let mut g = Vec::new();
    if !a.hide_prediction && !covariates {
        g.extend(plots::ellipse_region(post, RegionKind::Prediction, a.level)?);
    }
    if !a.hide_credible && !covariates {
        g.extend(plots::ellipse_region(post, RegionKind::Credible, a.level)?);
    }
    if !a.hide_data {
        g.extend(plots::data_bubbles(post));
    }
    if !a.hide_line {
        if a.walter || covariates {
            if covariates && !a.walter {
                notes.push("covariates present: drawing the difference-on-sum regression line".into());
            }
            g.push(plots::walter_from_fit(post, EstimateType::Mean)?.curve);
        } else {
            g.extend(plots::sroc_curve(post, SrocType::try_from(a.sroc_type)?)?);
        }
    }
    if !covariates {
        g.extend(plots::summary_point_geometry(post)?);
    } else {
        notes.push("covariates present: summary point and regions are not available".into());
    }
    Ok(g)
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let spec = a.model.spec()?;
            let priors = a.priors.spec()?.resolve()?;
            let data = load_dataset(&a.data, spec.modality_column.as_deref())?;
            let exec = PoolExecutor::new(a.threads);
            let post = if a.no_timings {
                fit_with(&data, &spec, &priors, &FitOptions::default(), &exec, &NoClock)?
            } else {
                fit_with(&data, &spec, &priors, &FitOptions::default(), &exec, &WallClock::default())?
            };
            let fit = FitResult::from_posterior(&post)?;
            if let Some(path) = &a.output {
                std::fs::write(path, fit.to_json()?)?;
            }
            stdout.write_all(format_summary(&fit).as_bytes())?;
        }
        Command::Summary(s) => {
            let text = std::fs::read_to_string(&s.fit)?;
            stdout.write_all(format_summary(&FitResult::from_json(&text)?).as_bytes())?;
        }
        Command::Fitted(a) => {
            let (_, post) = load_fit(&a.saved)?;
            let t: AccuracyType = a.accuracy_type.parse()?;
            let table = fitted_study_measures(&post, t, a.quantiles.as_deref())?;
            let body = match a.format {
                TableFormat::Text => format_fitted(&table),
                TableFormat::Csv => fitted_csv(&table),
                TableFormat::Json => serde_json::to_string_pretty(&table)? + "\n",
            };
            stdout.write_all(body.as_bytes())?;
        }
        Command::Forest(a) => {
            let (_, post) = load_fit(&a.saved)?;
            let opts = ForestOptions {
                measure: a.accuracy_type.parse()?,
                estimate: a.est_type.parse()?,
                intervals: interval_pair(&a.intervals)?,
                cut: a.cut.as_deref().map(interval_pair).transpose()?,
                show_summary: !a.no_summary,
            };
            let forest = forest_layout(&post, &opts)?;
            write_plot(&a.out, "forest", &Plot::Forest(forest), stdout)?;
        }
        Command::Sroc(a) => {
            let (_, post) = load_fit(&a.saved)?;
            let mut notes = Vec::new();
            let g = sroc_geometry(&post, &a, &mut notes)?;
            for n in notes {
                writeln!(stderr, "note: {n}")?;
            }
            write_plot(&a.out, "sroc", &Plot::Roc(g), stdout)?;
        }
        Command::Crosshair(a) => {
            let (_, post) = load_fit(&a.saved)?;
            let crosses = crosshair_layout(&post, a.est_type.parse()?, interval_pair(&a.intervals)?)?;
            let mut g: Vec<CurveGeometry> = crosses.iter().map(|c| c.geometry()).collect();
            g.extend(plots::data_bubbles(&post).into_iter().map(|mut b| {
                b.style.size = Some(2.0);
                b
            }));
            write_plot(&a.out, "crosshair", &Plot::Roc(g), stdout)?;
        }
        Command::PriorPreview(a) => {
            let config = a.priors.spec()?.resolve()?;
            let target: PriorTarget = match &a.target {
                Some(t) => t.parse()?,
                None if a.priors.cor_prior.is_some() && a.priors.var_prior.is_none() => PriorTarget::Cor,
                None => PriorTarget::Var1,
            };
            let table = tabulate_prior(&config, target, None)?;
            let body = match a.format {
                TableFormat::Json => serde_json::to_string_pretty(&table)? + "\n",
                _ => prior_csv(&table),
            };
            write_or_print(a.output.as_deref(), &body, stdout)?;
        }
        Command::Datasets(a) => match a.name {
            Some(name) => {
                let d = datasets::by_name(&name)
                    .ok_or_else(|| Error::input(format!("unknown builtin dataset '{name}'")))?;
                stdout.write_all(write_dataset(&d).as_bytes())?;
            }
            None => {
                for name in datasets::BUILTIN_NAMES {
                    let d = datasets::by_name(name).expect("bundled dataset");
                    writeln!(stdout, "{name}\t{} studies", d.len())?;
                }
            }
        },
        Command::Serve(a) => {
            let config = crate::service::ServiceConfig {
                threads: a.threads,
                session_ttl: std::time::Duration::from_secs(a.session_ttl),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(&a.bind, config))?;
        }
    }
    Ok(())
}

/// Run with `args` (program name first) and return the exit status:
/// 0 on success, 2 for invalid input, 1 for computational failure.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
