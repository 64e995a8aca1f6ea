use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tarnet::config::PipelineConfig;
use tarnet::netfilter::FilterMethod;
use tarnet::pipeline::{self, stages};
use tarnet::{panel, synth, Error, Result};

#[derive(Parser)]
#[command(
    name = "tarnet",
    version,
    about = "Multilayer networks from panel time series via tensor autoregression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file (a run manifest also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a long-format CSV and write the canonical panel.csv.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Choose or apply the differencing order and write differenced.csv.
    Fracdiff {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// Panel to difference instead of <out>/panel.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Select lambda and fit the autoregression; writes model.json.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Turn the fitted coefficient into an unfiltered multilayer network.
    BuildNetwork {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Filter every layer-pair block.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        retain: Option<f64>,
        #[arg(long)]
        method: Option<FilterMethod>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compute assortativity, overlap, strength and coreness; export GraphML and DOT.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run every stage and write the manifest.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        retain: Option<f64>,
        #[arg(long)]
        method: Option<FilterMethod>,
    },
    /// Write a seeded synthetic panel (10 entities, 4 layers) as long-format CSV.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn finish(cfg: PipelineConfig) -> Result<PipelineConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn required_input(cfg: &PipelineConfig, input: Option<PathBuf>) -> Result<PathBuf> {
    input
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| Error::Config("no input CSV: pass --input or set `input` in the config".into()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common, input } => {
            let cfg = finish(load_config(&common)?)?;
            let input = required_input(&cfg, input)?;
            let p = stages::ingest(&cfg, &input, &cfg.output_dir)?;
            let [t, e, l] = p.shape();
            println!("panel: {t} dates × {e} entities × {l} layers");
        }
        Command::Fracdiff { common, alpha, input } => {
            let mut cfg = load_config(&common)?;
            cfg.alpha = alpha.or(cfg.alpha);
            let cfg = finish(cfg)?;
            let s = stages::fracdiff(&cfg, &cfg.output_dir, input.as_deref())?;
            let passing = s.stationary.iter().filter(|x| **x).count();
            println!(
                "alpha = {} ({}); {passing}/{} series reject a unit root",
                s.alpha,
                s.alpha_source,
                s.stationary.len()
            );
        }
        Command::Fit { common, lambda, input } => {
            let mut cfg = load_config(&common)?;
            cfg.lambda = lambda.or(cfg.lambda);
            let cfg = finish(cfg)?;
            let s = stages::fit(&cfg, &cfg.output_dir, input.as_deref())?;
            println!(
                "lambda = {} ({}); {} sweeps; predicted R² = {}",
                s.lambda,
                s.lambda_source,
                s.sweeps,
                s.predicted_r2.map_or("undefined".into(), |r| format!("{r:.4}"))
            );
        }
        Command::BuildNetwork { common, input } => {
            let cfg = finish(load_config(&common)?)?;
            let net = stages::build_network(&cfg.output_dir, input.as_deref())?;
            println!("network: {} entities × {} layers", net.n_entities(), net.n_layers());
        }
        Command::Filter {
            common,
            retain,
            method,
            input,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.retain_fraction = retain.unwrap_or(cfg.retain_fraction);
            cfg.filter_method = method.unwrap_or(cfg.filter_method);
            let cfg = finish(cfg)?;
            let s = stages::filter(&cfg, &cfg.output_dir, input.as_deref())?;
            println!("{}: kept {} edges", s.method, s.total_kept);
        }
        Command::Measure { common, input } => {
            let cfg = finish(load_config(&common)?)?;
            stages::measure(&cfg, &cfg.output_dir, input.as_deref())?;
            println!("measures written to {}", cfg.output_dir.display());
        }
        Command::Pipeline {
            common,
            input,
            alpha,
            lambda,
            retain,
            method,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.lambda = lambda.or(cfg.lambda);
            cfg.retain_fraction = retain.unwrap_or(cfg.retain_fraction);
            cfg.filter_method = method.unwrap_or(cfg.filter_method);
            let input = required_input(&cfg, input)?;
            cfg.input = Some(input.clone());
            let cfg = finish(cfg)?;
            let panel = panel::ingest_csv(&input, cfg.missing).map_err(|e| e.at_stage("ingest"))?;
            let art = pipeline::run_pipeline(&cfg, &panel)?;
            let m = &art.manifest;
            println!(
                "alpha = {}, lambda = {}, predicted R² = {}, kept {} edges; manifest at {}",
                m.fracdiff.alpha,
                m.fit.lambda,
                m.fit.predicted_r2.map_or("undefined".into(), |r| format!("{r:.4}")),
                m.filter.total_kept,
                cfg.output_dir.join(pipeline::MANIFEST_FILE).display()
            );
        }
        Command::Synth { output, steps, seed } => {
            let spec = synth::SyntheticSpec {
                n_steps: steps,
                seed,
                ..synth::SyntheticSpec::default()
            };
            let s = synth::generate(&spec)?;
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            panel::export_panel(&s.panel, &output)?;
            write_truth(&output, &s.coefficient)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

/// Stores the generator's coefficient next to the panel for later comparison.
fn write_truth(panel_path: &Path, b: &tarnet::tensor::DenseTensor) -> Result<()> {
    let path = panel_path.with_extension("truth.json");
    let text = serde_json::to_string(b).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
