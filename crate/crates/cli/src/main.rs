//! `climscan` — harvest, score, compare and rank works from one config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use climscan_core::evaluator::{ScenarioKind, ScoringMode};
use climscan_core::pipeline::{self, PipelineConfig, PipelineError, CONFIG_FILE};
use climscan_core::synthetic::SyntheticSpec;

#[derive(Parser, Debug)]
#[command(name = "climscan", version, about = "Climate-innovation literature scan and ranking")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Config file (default: ./climscan.toml if present, else built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// no-shot, context or few-shot.
    #[arg(long, global = true)]
    scenario: Option<ScenarioKind>,
    /// binary or scalar10.
    #[arg(long, global = true)]
    mode: Option<ScoringMode>,
    /// Q1 filter threshold in [0, 1].
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Read OpenAlex pages from this directory instead of the network.
    #[arg(long, global = true)]
    fixture_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Harvest works and write the filtered corpus.
    Fetch,
    /// Draw a seeded random sample and spike in the controls.
    Sample {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        n_random: Option<usize>,
        #[arg(long)]
        n_controls: Option<usize>,
    },
    /// Score the sample with the configured provider.
    Evaluate {
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Validate a survey CSV and store it as a dataset.
    IngestSurvey {
        survey: PathBuf,
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Mean scores, kappa and correlation across datasets; the first is the reference.
    Stats {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
    /// Fit question weights with the sample's controls as positives.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Filter on Q1 and rank by weighted score.
    Rank {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Keyword frequencies over the top of the ranking plus the rank curve.
    Report {
        #[arg(long)]
        ranked: Option<PathBuf>,
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        include_controls: bool,
    },
    /// fetch, sample, evaluate, train, rank and report in one go.
    Run,
    /// Write a synthetic offline corpus and a config that runs against it.
    Demo {
        dir: PathBuf,
        #[arg(long, default_value_t = 95)]
        works: usize,
        #[arg(long, default_value_t = 5)]
        controls: usize,
        /// Extra harvested works without an abstract.
        #[arg(long, default_value_t = 0)]
        no_abstract: usize,
        /// Extra harvested works with an out-of-scope topic.
        #[arg(long, default_value_t = 0)]
        off_scope: usize,
        /// Random draw size written into the config (default: all eligible works).
        #[arg(long)]
        n_random: Option<usize>,
    },
}

fn load_config(g: &GlobalOpts) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None if Path::new(CONFIG_FILE).exists() => PipelineConfig::load(Path::new(CONFIG_FILE))?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.runs {
        cfg.runs = v;
    }
    if let Some(v) = g.scenario {
        cfg.scenario = v;
    }
    if let Some(v) = g.mode {
        cfg.mode = v;
    }
    if let Some(v) = g.threshold {
        cfg.q1_threshold = v;
    }
    if let Some(v) = &g.fixture_dir {
        cfg.fixture_dir = Some(v.clone());
    }
    if let Some(v) = &g.output_dir {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn show(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Command::Demo {
        dir,
        works,
        controls,
        no_abstract,
        off_scope,
        n_random,
    } = &cli.command
    {
        let spec = SyntheticSpec {
            n_without_abstract: *no_abstract,
            n_off_scope: *off_scope,
            ..SyntheticSpec::new(*works, *controls, cli.global.seed.unwrap_or(42))
        };
        let path = pipeline::write_demo(dir, &spec, n_random.unwrap_or(*works))?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Fetch => {
            let r = pipeline::fetch(&cfg)?;
            println!("{}", r.summary());
            show(&[r.corpus_path]);
        }
        Command::Sample {
            corpus,
            n_random,
            n_controls,
        } => {
            let r = pipeline::sample(&cfg, corpus.as_deref(), n_random, n_controls)?;
            println!(
                "{} records ({} random, {} controls)",
                r.n_random + r.n_controls,
                r.n_random,
                r.n_controls
            );
            show(&[r.sample_path]);
        }
        Command::Evaluate { sample } => {
            let r = pipeline::evaluate(&cfg, sample.as_deref())?;
            println!(
                "{} records, {} failures, {} parse retries, {} calls",
                r.records, r.failures, r.parse_retries, r.calls
            );
            show(&[r.dataset_path]);
        }
        Command::IngestSurvey { survey, sample } => {
            let r = pipeline::ingest_survey_file(&cfg, &survey, sample.as_deref())?;
            println!("{} records, {} missing responses", r.records, r.missing);
            show(&[r.dataset_path]);
        }
        Command::Stats { datasets } => {
            let r = pipeline::stats(&cfg, &datasets)?;
            println!("{} panels compared", r.tables.len());
            show(&r.files);
        }
        Command::Train { dataset, sample } => {
            let w = pipeline::train(&cfg, dataset.as_deref(), sample.as_deref())?;
            println!(
                "converged in {} iterations ({} positives, {} negatives)",
                w.iterations, w.n_positive, w.n_negative
            );
            for (q, v) in &w.weights {
                println!("{q}\t{v:.3}");
            }
            show(&[cfg.path(pipeline::WEIGHTS_FILE)]);
        }
        Command::Rank {
            dataset,
            weights,
            sample,
        } => {
            let r = pipeline::rank(&cfg, dataset.as_deref(), weights.as_deref(), sample.as_deref())?;
            print!("{}", r.summary);
            show(&[r.ranked_path, cfg.path(pipeline::RANK_SUMMARY_FILE)]);
        }
        Command::Report {
            ranked,
            sample,
            top_n,
            include_controls,
        } => {
            let r = pipeline::report(&cfg, ranked.as_deref(), sample.as_deref(), top_n, include_controls)?;
            for (kw, n) in r.keywords.counts.iter().take(10) {
                println!("{n:>4}  {kw}");
            }
            show(&r.files);
        }
        Command::Run => {
            let s = pipeline::run_all(&cfg)?;
            println!("{}", s.fetch.summary());
            print!("{}", s.rank.summary);
            show(&[s.rank.ranked_path]);
            show(&s.report.files);
        }
        Command::Demo { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
