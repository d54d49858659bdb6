use std::error::Error;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bci_core::devices::{discover, Fleet};
use bci_core::intent::{compile_plan, Domain};
use bci_core::langmodel::{train_from_text, LanguageStore, Smoothing};
use bci_core::signal::EegTrial;
use bci_core::tdca::{classify, TdcaModel};
use bci_gateway::{client_from_config, infer, GatewayConfig, LlmRequest, Payload};
use bci_session::calibrate::{calibrate, gaze_trial, preprocess, snr_sweep, CalibrationPlan};
use bci_session::{replay, router, Service, ServiceConfig, SessionView};
use clap::{Parser, Subcommand};
use serde_json::json;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "bci",
    version,
    about = "SSVEP BCI loop: calibrate, decode, compile intents, serve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a TDCA model on synthetic calibration trials.
    Calibrate {
        #[arg(long)]
        out: PathBuf,
        /// Service config whose acquisition and band define the grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated class frequencies; defaults to the band grid.
        #[arg(long, value_delimiter = ',')]
        freqs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4)]
        trials_per_class: usize,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a synthetic trial of a subject gazing at one frequency.
    Synth {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        freq: f64,
        #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one trial.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trial: PathBuf,
        /// Skip the notch/band-pass chain.
        #[arg(long)]
        raw: bool,
    },
    /// Accuracy of the 4-class synthetic task across SNRs.
    Bench {
        #[arg(long)]
        snr_sweep: bool,
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_value = "-30,-20,-10,0,10"
        )]
        snrs: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        test_trials: usize,
        #[arg(long, default_value_t = 10)]
        train_per_class: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Send an utterance through the gateway and print the resulting instructions.
    Compile {
        utterance: String,
        #[arg(long, default_value = "en")]
        lang: String,
        /// arm or uav asks for a task plan; otherwise the demo fleet is offered.
        #[arg(long)]
        domain: Option<String>,
    },
    /// n-gram language models.
    Lm {
        #[command(subcommand)]
        command: LmCommand,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's model path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Rebuild a session from its event log and print it.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Subcommand)]
enum LmCommand {
    /// Train a word model from a text file, one sentence per line.
    Train {
        #[arg(long)]
        lang: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value = "laplace")]
        smoothing: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k next words from the bundled models.
    Suggest {
        ctx: String,
        #[arg(long)]
        lang: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    Detect {
        text: String,
    },
}

fn load_model(path: &Path) -> Result<TdcaModel> {
    Ok(TdcaModel::from_json(&fs::read_to_string(path)?)?)
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Calibrate {
            out,
            config,
            freqs,
            trials_per_class,
            snr_db,
            seed,
        } => {
            let cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig::default(),
            };
            let plan = CalibrationPlan {
                acquisition: cfg.acquisition,
                class_freqs_hz: freqs
                    .unwrap_or_else(|| bci_session::calibrate::model_grid(cfg.band_hz, cfg.min_sep_hz)),
                trials_per_class,
                snr_db,
                seed,
                preprocessor: cfg.preprocessor.clone(),
                ..CalibrationPlan::default()
            };
            let model = calibrate(&plan)?;
            fs::write(&out, model.to_json())?;
            tracing::info!(classes = plan.class_freqs_hz.len(), id = %model.model_id(), "wrote {}", out.display());
        }
        Command::Synth {
            model,
            freq,
            snr_db,
            seed,
            out,
        } => {
            let model = load_model(&model)?;
            let trial = gaze_trial(&model, freq, snr_db, seed)?;
            fs::write(out, trial.to_json())?;
        }
        Command::Decode { model, trial, raw } => {
            let model = load_model(&model)?;
            let trial = EegTrial::from_json(&fs::read_to_string(trial)?)?;
            let pre = (!raw).then(bci_core::signal::Preprocessor::default);
            let trial = preprocess(pre.as_ref(), trial)?;
            print(&classify(&model, &trial)?)?;
        }
        Command::Bench {
            snr_sweep: _,
            snrs,
            test_trials,
            train_per_class,
            seed,
        } => {
            let plan = CalibrationPlan {
                class_freqs_hz: vec![9.0, 11.0, 13.0, 15.0],
                trials_per_class: train_per_class,
                seed,
                preprocessor: None,
                ..CalibrationPlan::default()
            };
            println!("snr_db\taccuracy\tcorrect/trials");
            for p in snr_sweep(&plan, &snrs, test_trials)? {
                println!("{:+.1}\t{:.3}\t{}/{}", p.snr_db, p.accuracy, p.correct, p.trials);
            }
        }
        Command::Compile {
            utterance,
            lang,
            domain,
        } => {
            let gateway = GatewayConfig::default().with_env()?;
            let client = client_from_config(&gateway)?;
            let req = match domain.as_deref().map(Domain::parse) {
                Some(Some(d @ (Domain::Arm | Domain::Uav))) => LlmRequest::task(&utterance, &lang, d, 40),
                Some(None) => return Err(format!("unknown domain {:?}", domain.unwrap_or_default()).into()),
                _ => LlmRequest::paradigm(&utterance, &lang, discover(&Fleet::demo()), 40),
            };
            let reply = infer(client.as_ref(), &req)?;
            let instructions: Vec<String> = match &reply.payload {
                Payload::Catalog(c) => c
                    .entries
                    .iter()
                    .flat_map(|e| e.functions.iter().filter_map(move |f| e.action_for(f).ok()))
                    .map(|i| i.render())
                    .collect(),
                Payload::TaskPlan(p) => compile_plan(p).iter().map(|i| i.render()).collect(),
                Payload::Clarification { .. } => Vec::new(),
            };
            print(&json!({
                "provider": reply.provider,
                "attempts": reply.attempts,
                "payload": reply.payload.to_envelope(),
                "instructions": instructions,
            }))?;
        }
        Command::Lm { command } => match command {
            LmCommand::Train {
                lang,
                corpus,
                order,
                smoothing,
                out,
            } => {
                let smoothing =
                    Smoothing::parse(&smoothing).ok_or_else(|| format!("unknown smoothing {smoothing:?}"))?;
                let model = train_from_text(&fs::read_to_string(corpus)?, order, smoothing, &lang)?;
                fs::write(&out, model.to_json())?;
                tracing::info!(
                    tokens = model.total_tokens(),
                    vocab = model.vocab().len(),
                    "wrote {}",
                    out.display()
                );
            }
            LmCommand::Suggest { ctx, lang, k } => {
                let store = LanguageStore::bundled(3, Smoothing::Laplace)?;
                let lang = lang.unwrap_or_else(|| store.detect(&ctx).language);
                print(&json!({ "language": lang, "suggestions": store.suggest(&ctx, &lang, k)? }))?;
            }
            LmCommand::Detect { text } => {
                let store = LanguageStore::bundled(3, Smoothing::Laplace)?;
                print(&store.detect(&text))?;
            }
        },
        Command::Serve {
            port,
            host,
            config,
            model,
        } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig::default(),
            };
            if model.is_some() {
                cfg.model = model;
            }
            cfg.gateway = cfg.gateway.with_env()?;
            let model = match &cfg.model {
                Some(p) => Some(Arc::new(load_model(p)?)),
                None => {
                    tracing::warn!("no decoder model; gaze trials will be rejected");
                    None
                }
            };
            let store = Arc::new(LanguageStore::bundled(cfg.lm_order, cfg.lm_smoothing)?);
            let gateway: Arc<dyn bci_gateway::LlmClient> = Arc::from(client_from_config(&cfg.gateway)?);
            let service = Arc::new(Service::new(cfg, gateway, model, store)?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, router(service)).await
            })?;
        }
        Command::Replay { log } => {
            let state = replay(&log)?;
            print(&SessionView::from(&state))?;
        }
    }
    Ok(())
}
