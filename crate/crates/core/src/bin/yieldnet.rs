use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use yieldnet::data::{
    load_csv, save_csv, synthesize, synthesize_counts, table_one_layout, Crop, RejectPolicy,
    SplitSpec, SynthSpec,
};
use yieldnet::experiments::{
    self, files, plot_data_csv, plot_rows_from_comparison, ExperimentConfig,
};
use yieldnet::Error;

#[derive(Parser)]
#[command(name = "yieldnet", version, about = "Crop yield networks tuned by ICA and GWO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic crop dataset as CSV.
    Synthesize(SynthArgs),
    /// Train every method per crop and write the comparison, attribute and plot reports.
    Compare(RunArgs),
    /// Train every method per crop and write only the attribute-effect report.
    Attributes(RunArgs),
    /// Extract per-crop R values from an existing comparison.csv.
    PlotData(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    /// Same number of records for every crop and year.
    Uniform,
    /// The reference per-crop train/test counts.
    TableOne,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Layout::Uniform)]
    layout: Layout,
    /// Records per crop per year (uniform layout).
    #[arg(long, default_value_t = 20)]
    n_per_crop: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated crop labels.
    #[arg(long, value_delimiter = ',')]
    crops: Option<Vec<String>>,
    /// Comma-separated method names or kinds (ann-ica, ann-gwo, backprop).
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// Input CSV; overrides the configured data source.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory holding comparison.csv; fig2_data.csv is written there.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Comparison file to read instead of <out>/comparison.csv.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn resolve(args: &RunArgs) -> yieldnet::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(crops) = &args.crops {
        cfg.crops = crops.iter().map(|c| c.parse()).collect::<yieldnet::Result<Vec<Crop>>>()?;
    }
    if let Some(methods) = &args.method {
        cfg.retain_methods(methods)?;
    }
    if let Some(data) = &args.data {
        cfg.data.path = Some(data.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(command: &str, args: &RunArgs) -> yieldnet::Result<ExitCode> {
    let cfg = resolve(args)?;
    let output = experiments::run(&cfg, true)?;
    experiments::write_outputs(command, &cfg, &output)?;
    for e in &output.comparison.errors {
        eprintln!("error: training failed: {e}");
    }
    if let Some(a) = &output.attributes {
        for w in &a.warnings {
            eprintln!("warning: {w}");
        }
    }
    println!(
        "command={command} crops={} methods={} seeds={} rows={} failures={} config_sha256={} out={}",
        cfg.crops.len(),
        cfg.methods.len(),
        cfg.seeds.len(),
        output.comparison.rows.len(),
        output.comparison.errors.len(),
        cfg.digest(),
        cfg.out.display()
    );
    Ok(if output.failed() {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_synthesize(args: &SynthArgs) -> yieldnet::Result<ExitCode> {
    let ds = match args.layout {
        Layout::Uniform => synthesize(&SynthSpec {
            seed: args.seed,
            n_per_crop: args.n_per_crop,
            noise_sd: args.noise_sd,
            ..SynthSpec::default()
        })?,
        Layout::TableOne => {
            synthesize_counts(args.seed, args.noise_sd, &table_one_layout(), &SplitSpec::default())?
        }
    };
    save_csv(&ds, &args.out)?;
    let check = load_csv(&args.out, RejectPolicy::Skip)?;
    println!(
        "command=synthesize seed={} rows={} rejected={} out={}",
        args.seed,
        ds.len(),
        check.rejected.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_plot_data(args: &PlotArgs) -> yieldnet::Result<ExitCode> {
    let report = args
        .report
        .clone()
        .unwrap_or_else(|| args.out.join(files::COMPARISON_CSV));
    let text = std::fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
    let rows = plot_rows_from_comparison(&text)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let target = args.out.join(files::PLOT_CSV);
    std::fs::write(&target, plot_data_csv(&rows)).map_err(|e| Error::io(&target, e))?;
    if rows.is_empty() {
        eprintln!("warning: {} has no completed rows; wrote header only", report.display());
    }
    println!("command=plot-data rows={} out={}", rows.len(), target.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(a) => run_synthesize(a),
        Command::Compare(a) => run_experiment("compare", a),
        Command::Attributes(a) => run_experiment("attributes", a),
        Command::PlotData(a) => run_plot_data(a),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
