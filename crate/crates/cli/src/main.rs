use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qmcdm::api::{self, AppState, StoredDataset};
use qmcdm::inputs::{
    self, Failure, SourceOptions, EXIT_INVALID_DATA, EXIT_INVALID_MODEL, EXIT_USAGE,
};
use qmcdm::output::{evaluation_document, ranking_table, stable_json};
use qmcdm_core::prettef::render_comparison;
use qmcdm_core::{
    apply_method, compare_methods, evaluate, parse_dataset, parse_model, smarter_weights,
    smarts_normalize, validate_model, DatasetFormat, DatasetSchema, Method, RankAssignment,
    SmarterAlgorithm,
};

#[derive(Parser)]
#[command(
    name = "qmcdm",
    version,
    about = "Evaluate and rank alternatives against hierarchical quality models"
)]
struct Cli {
    /// Output format for results printed to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Replay recorded repository API responses from this directory.
    #[arg(long, global = true, value_name = "DIR")]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Print criterion weights for a rank assignment or swing ratings.
    Weights {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Comma-separated ranks, 1 = most important (roc, rr, rs).
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            required_unless_present = "weights"
        )]
        ranks: Vec<i64>,
        /// Comma-separated swing ratings (swing).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        weights: Vec<f64>,
    },
    /// Evaluate and rank the alternatives of a dataset.
    Evaluate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Rewrite every weighted node to this method first.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        /// Write the evaluation JSON here.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Rows shown in the ranking table.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Rank under several weighting methods and report their agreement.
    Compare {
        #[command(flatten)]
        inputs: InputArgs,
        /// Comma-separated methods; all four by default.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Vec<Method>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a model document and list every issue.
    Validate { model: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Preload a model under the id `default`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Preload a dataset under the id `default`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        idle_timeout_minutes: u64,
        /// Require `Authorization: Bearer <token>` on API routes.
        #[arg(long, env = "QMCDM_API_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

#[derive(Args)]
struct InputArgs {
    model: PathBuf,
    data: PathBuf,
    /// Dataset format; inferred from the file extension by default.
    #[arg(long, value_parser = parse_format)]
    data_format: Option<DatasetFormat>,
    /// JSON array of metric sources. Every binding is static by default.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// JSON-lines cache of fetched metrics.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    cache_ttl_hours: i64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter =
        tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into());
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Failure>() {
            Some(f) => {
                for line in &f.lines {
                    eprintln!("{line}");
                }
                ExitCode::from(f.exit_code)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Weights {
            method,
            ranks,
            weights,
        } => cmd_weights(method, &ranks, &weights, format),
        Command::Evaluate {
            inputs,
            method,
            out,
            top,
        } => {
            let (model, alts) = load_inputs(&inputs, cli.fixtures)?;
            let (model, label) = match method {
                Some(m) => (apply_method(&model, m).0, m.as_str()),
                None => (model, "model"),
            };
            let result = evaluate(&model, &alts).map_err(|e| eval_failure(&e))?;
            let doc = stable_json(&evaluation_document(&result, label));
            if let Some(path) = &out {
                write(path, &doc)?;
            }
            match format {
                Format::Json if out.is_none() => print!("{doc}"),
                _ => print!("{}", ranking_table(&result, top)),
            }
            Ok(())
        }
        Command::Compare {
            inputs,
            methods,
            out,
        } => {
            let (model, alts) = load_inputs(&inputs, cli.fixtures)?;
            let methods = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods
            };
            let cmp = compare_methods(&model, &alts, &methods).map_err(|e| eval_failure(&e))?;
            let doc = stable_json(&cmp);
            if let Some(path) = &out {
                write(path, &doc)?;
            }
            match format {
                Format::Json if out.is_none() => print!("{doc}"),
                _ => print!("{}", render_comparison(&cmp)),
            }
            Ok(())
        }
        Command::Validate { model } => cmd_validate(&model, format),
        Command::Serve {
            host,
            port,
            model,
            data,
            idle_timeout_minutes,
            token,
        } => serve(
            host,
            port,
            model,
            data,
            Duration::from_secs(idle_timeout_minutes * 60),
            token,
        ),
    }
}

fn cmd_weights(
    method: Method,
    ranks: &[i64],
    weights: &[f64],
    format: Format,
) -> anyhow::Result<()> {
    let usage = |msg: String| Failure::new(EXIT_USAGE, format!("invalid ranks: {msg}"));
    let w = match method {
        Method::Swing => smarts_normalize(weights)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("invalid weights: {e}")))?,
        _ => {
            let ranks: Vec<u32> = ranks
                .iter()
                .map(|&r| {
                    u32::try_from(r)
                        .map_err(|_| usage(format!("rank {r} is not a positive integer")))
                })
                .collect::<Result<_, _>>()?;
            let ranks = RankAssignment::new(ranks).map_err(|e| usage(e.to_string()))?;
            let algorithm = match method {
                Method::Roc => SmarterAlgorithm::Roc,
                Method::Rr => SmarterAlgorithm::Rr,
                _ => SmarterAlgorithm::Rs,
            };
            smarter_weights(algorithm, &ranks).map_err(|e| usage(e.to_string()))?
        }
    };
    match format {
        Format::Json => print!("{}", stable_json(&w)),
        Format::Table => {
            let cells: Vec<String> = w.as_slice().iter().map(|x| format!("{x:.4}")).collect();
            println!("{}", cells.join(" "));
        }
    }
    Ok(())
}

fn cmd_validate(path: &Path, format: Format) -> anyhow::Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model = parse_model(&text)
        .map_err(|e| Failure::new(EXIT_INVALID_MODEL, format!("{}: {e}", path.display())))?;
    let issues = validate_model(&model);
    if format == Format::Json {
        print!("{}", stable_json(&issues));
    }
    if issues.is_empty() {
        if format == Format::Table {
            println!(
                "ok: {} ({} attributes)",
                model.name,
                model.root.walk().len()
            );
        }
        return Ok(());
    }
    let mut lines = vec![format!(
        "{}: {} validation issue(s)",
        path.display(),
        issues.len()
    )];
    lines.extend(issues.iter().map(|i| format!("  {i}")));
    Err(Failure {
        exit_code: EXIT_INVALID_MODEL,
        lines,
    }
    .into())
}

fn load_inputs(
    args: &InputArgs,
    fixtures: Option<PathBuf>,
) -> anyhow::Result<(qmcdm_core::QualityModel, Vec<qmcdm_core::Alternative>)> {
    let model = inputs::load_model(&args.model)?;
    let alts = inputs::load_dataset(&args.data, args.data_format, &model)?;
    let opts = SourceOptions {
        sources: args.sources.clone(),
        fixtures,
        cache: args.cache.clone(),
        cache_ttl_hours: args.cache_ttl_hours,
    };
    let alts = inputs::resolve(&model, alts, &opts)?;
    Ok((model, alts))
}

fn eval_failure(e: &qmcdm_core::EvalError) -> Failure {
    let code = if e.issues().is_empty() {
        EXIT_INVALID_DATA
    } else {
        EXIT_INVALID_MODEL
    };
    let mut lines = vec![format!("{e} ({})", e.code())];
    lines.extend(e.issues().iter().map(|i| format!("  {i}")));
    Failure {
        exit_code: code,
        lines,
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn serve(
    host: String,
    port: u16,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    idle: Duration,
    token: Option<String>,
) -> anyhow::Result<()> {
    let state = Arc::new(AppState::new(idle, token));
    if let Some(path) = &model {
        state
            .models
            .insert_with_id("default".into(), inputs::load_model(path)?);
    }
    if let Some(path) = &data {
        let content =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let format = inputs::format_for(path, None);
        parse_dataset(&content, format, &DatasetSchema::new())
            .map_err(|e| Failure::new(EXIT_INVALID_DATA, format!("{}: {e}", path.display())))?;
        state
            .datasets
            .insert_with_id("default".into(), StoredDataset { format, content });
    }
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .with_context(|| format!("bad listen address {host}:{port}"))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, api::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
