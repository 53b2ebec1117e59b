use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gazewheel_core::calibration::{CalibrationModel, SampleSet};
use gazewheel_core::config::{load_profile, validate_coverage, Profile};
use gazewheel_core::live::{run_engine, LineFeed, RunOutputs, SnapshotPublisher, Source};
use gazewheel_core::replay::{compare_golden, record, replay_text, Speed};
use gazewheel_core::sink::{make_sink, DryRunSink, SinkKind};

#[derive(Parser)]
#[command(name = "gazewheel", version, about = "Face-driven keyboard and mouse control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine on a live frame stream.
    Run {
        #[arg(long)]
        profile: PathBuf,
        /// `stdin` or `tcp:HOST:PORT` (listens for one connection).
        #[arg(long)]
        source: Source,
        #[arg(long, value_enum, default_value = "virtual")]
        sink: SinkKind,
        /// Write the event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Calibration model; without one the cursor does not move.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Publish overlay snapshots on this address (HOST:PORT).
        #[arg(long)]
        ui: Option<String>,
        /// Frames buffered between reader and engine.
        #[arg(long, default_value_t = 64)]
        queue: usize,
    },
    /// Replay a recorded trace and print the event log.
    Replay {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "max")]
        speed: Speed,
        /// Compare the log against this file; exit 3 on mismatch.
        #[arg(long)]
        golden: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Write the log here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Save a live frame stream to a trace file.
    Record {
        #[arg(long)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a gaze model from a calibration sample file.
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a profile and optionally check key reachability.
    CheckConfig {
        profile: PathBuf,
        /// Comma-separated keys, or a file listing them.
        #[arg(long)]
        require_keys: Option<String>,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Golden(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Golden(_) => 3,
        }
    }
}

fn config<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn load(path: &Path) -> Result<Profile, Failure> {
    let profile = load_profile(path)
        .with_context(|| format!("loading profile {}", path.display()))
        .map_err(config)?;
    for w in profile.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(profile)
}

fn load_model(path: Option<&Path>) -> Result<Option<CalibrationModel>, Failure> {
    path.map(|p| {
        CalibrationModel::load(p)
            .with_context(|| format!("loading model {}", p.display()))
            .map_err(config)
    })
    .transpose()
}

fn parse_key_list(arg: &str) -> Result<Vec<String>, Failure> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}")).map_err(config)?
    } else {
        arg.to_string()
    };
    Ok(text
        .split([',', '\n'])
        .map(str::trim)
        .filter(|k| !k.is_empty() && !k.starts_with('#'))
        .map(String::from)
        .collect())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            profile,
            source,
            sink,
            log,
            model,
            ui,
            queue,
        } => {
            let profile = load(&profile)?;
            let model = load_model(model.as_deref())?;
            let mut sink = make_sink(sink).map_err(runtime)?;
            let mut log_file = log
                .map(|p| File::create(&p).map(BufWriter::new).with_context(|| format!("creating {}", p.display())))
                .transpose()
                .map_err(runtime)?;
            let mut publisher = ui
                .map(|addr| SnapshotPublisher::bind(&addr).with_context(|| format!("binding UI channel {addr}")))
                .transpose()
                .map_err(runtime)?;
            if let Some(p) = &publisher {
                eprintln!("overlay snapshots on {}", p.local_addr().map_err(runtime)?);
            }
            let reader = source.open().context("opening frame source").map_err(runtime)?;
            let feed = LineFeed::spawn(reader, queue);
            let outputs = RunOutputs {
                log: log_file.as_mut().map(|w| w as &mut dyn Write),
                ui: publisher.as_mut(),
            };
            let frames = run_engine(&feed, &profile, model, sink.as_mut(), outputs).map_err(runtime)?;
            feed.join().context("reading frames").map_err(runtime)?;
            eprintln!("processed {frames} frames");
            Ok(())
        }
        Command::Replay {
            profile,
            trace,
            speed,
            golden,
            model,
            out,
        } => {
            let profile = load(&profile)?;
            let model = load_model(model.as_deref())?;
            let text = fs::read_to_string(&trace)
                .with_context(|| format!("reading trace {}", trace.display()))
                .map_err(runtime)?;
            let log = if speed == Speed::Realtime {
                let mut sink = DryRunSink::new(io::stderr());
                replay_text(&text, &profile, model.as_ref(), speed, Some(&mut sink))
            } else {
                replay_text(&text, &profile, model.as_ref(), speed, None)
            }
            .map_err(runtime)?;
            let rendered = log.to_text();
            match out {
                Some(p) => fs::write(&p, &rendered).with_context(|| format!("writing {}", p.display())).map_err(runtime)?,
                None => io::stdout().write_all(rendered.as_bytes()).map_err(runtime)?,
            }
            if let Some(g) = golden {
                let expected = fs::read_to_string(&g)
                    .with_context(|| format!("reading golden {}", g.display()))
                    .map_err(runtime)?;
                compare_golden(&rendered, &expected).map_err(|e| Failure::Golden(e.to_string()))?;
                eprintln!("log matches {}", g.display());
            }
            Ok(())
        }
        Command::Record { source, out } => {
            let reader = source.open().context("opening frame source").map_err(runtime)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display())).map_err(runtime)?;
            let n = record(reader, BufWriter::new(file)).context("recording").map_err(runtime)?;
            eprintln!("recorded {n} frames to {}", out.display());
            Ok(())
        }
        Command::Calibrate { samples, out } => {
            let set = SampleSet::load(&samples)
                .with_context(|| format!("loading samples {}", samples.display()))
                .map_err(config)?;
            let model = set.fit().context("fitting calibration").map_err(runtime)?;
            model.save(&out).with_context(|| format!("writing {}", out.display())).map_err(runtime)?;
            eprintln!(
                "fitted {} samples: lambda {:.3e}, cv mse {:.1} px^2",
                set.samples.len(),
                model.lambda,
                model.cv_mse
            );
            Ok(())
        }
        Command::CheckConfig { profile, require_keys } => {
            let profile = load(&profile)?;
            println!(
                "ok: {} modes, {} intentions",
                profile.keymaps().len(),
                profile.expressions().len()
            );
            if let Some(list) = require_keys {
                let keys = parse_key_list(&list)?;
                let report = validate_coverage(&profile, &keys);
                for p in &report.reachable {
                    println!("reachable\t{}\t{}/{}[{}]", p.key, p.mode, p.intention, p.index);
                }
                for k in &report.unreachable {
                    println!("unreachable\t{k}");
                }
                println!("{}/{} keys reachable", report.reachable.len(), keys.len());
                if !report.all_reachable() {
                    return Err(Failure::Config(anyhow::anyhow!(
                        "unreachable keys: {}",
                        report.unreachable.join(", ")
                    )));
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Golden(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
