//! The `bigat` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::autodiff::{load_checkpoint, save_checkpoint, ParameterStore};
use crate::config::RunConfig;
use crate::data::{format_tracks, synth_generate, PassingSide, SynthKind, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{
    axis_grid, evaluate_best_of_k, evaluate_with, latent_draws, latent_sweep, linear_baseline, macro_average,
    metrics_csv, sweep_svg, trajectory_csv, MetricResult, Pairing,
};
use crate::model::{SceneSample, SocialBiGat, OBS_LEN};
use crate::training::{gradient_suite, LossReport, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "bigat", version, about = "Multimodal pedestrian trajectory forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on the configured training scenes.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for the log, the resolved config and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Best-of-K ADE/FDE of a checkpoint on the test scenes, as CSV.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Shorthand for `--set k=N`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Write sampled futures for every test scene.
    Sample {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Samples per scene.
        #[arg(long, default_value_t = 1)]
        samples: usize,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generator output along one latent axis for one test scene.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index into the concatenated test scenes.
        #[arg(long, default_value_t = 0)]
        scene: usize,
        #[arg(long, default_value_t = 0)]
        axis: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Codes run from -span to span.
        #[arg(long, default_value_t = 2.0)]
        span: f64,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Generate a synthetic track file.
    Synth {
        /// constant-velocity, social-forces or bimodal-avoidance.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        scenes: usize,
        #[arg(long)]
        seed: u64,
        /// Velocity jitter standard deviation, meters per step.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        min_peds: Option<usize>,
        #[arg(long)]
        max_peds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `scene_index,side` lines for the bimodal kind.
        #[arg(long)]
        modes: Option<PathBuf>,
    },
    /// Finite-difference gradient checks of every layer and objective.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// ADE/FDE of the least-squares linear extrapolation on the test scenes.
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Parses `argv` (program name first) and runs the command, printing to the
/// process's standard streams.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_main`] with explicit output streams.
pub fn run_cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            let code = exit_code(&e);
            if code == EXIT_USAGE {
                let _ = writeln!(err, "\n{}", Cli::command().render_usage());
            }
            code
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Parse { .. } | Error::Io(_) | Error::Checkpoint(_) | Error::UnknownParameter(_) => EXIT_DATA,
        Error::Dimension { .. } | Error::NonFinite { .. } | Error::Contract(_) | Error::NonDeterministic { .. } => {
            EXIT_NUMERIC
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Parse { .. } => Error::Config(e.to_string()),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a checkpoint and checks it carries exactly the model's parameters.
fn load_model(cfg: &RunConfig, path: &Path) -> Result<(SocialBiGat, ParameterStore<f64>)> {
    let model = SocialBiGat::new(cfg.model.clone())?;
    let store: ParameterStore<f64> = load_checkpoint(path)?;
    let expected = model.init_params::<f64>(0)?;
    for (name, p) in expected.iter() {
        let got = store
            .get(name)
            .map_err(|_| Error::Checkpoint(format!("missing parameter `{name}`")))?;
        if got.value.shape() != p.value.shape() {
            return Err(Error::Checkpoint(format!(
                "`{name}` has shape {:?}, the configured model needs {:?}",
                got.value.shape(),
                p.value.shape()
            )));
        }
    }
    if store.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, the configured model {}",
            store.len(),
            expected.len()
        )));
    }
    Ok((model, store))
}

fn test_sets(cfg: &RunConfig) -> Result<Vec<(String, Vec<SceneSample>)>> {
    let sets = cfg.scene_sets()?.test;
    if sets.iter().all(|(_, s)| s.is_empty()) {
        return Err(Error::Config("no test scenes configured".into()));
    }
    Ok(sets)
}

fn with_average(mut results: Vec<MetricResult>) -> Result<Vec<MetricResult>> {
    if results.len() > 1 {
        let avg = macro_average("average", &results)?;
        results.push(avg);
    }
    Ok(results)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Train { cfg, out: dir } => {
            let cfg = load_config(&cfg)?;
            train(&cfg, &dir, err)?;
        }
        Command::Evaluate { cfg, checkpoint, k } => {
            let mut cfg = load_config(&cfg)?;
            if let Some(k) = k {
                cfg.k = k;
                cfg.validate()?;
            }
            let (model, store) = load_model(&cfg, &checkpoint)?;
            let results = test_sets(&cfg)?
                .iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(name, scenes)| evaluate_best_of_k(&model, &store, name, scenes, cfg.k, cfg.seed, cfg.pairing))
                .collect::<Result<Vec<_>>>()?;
            out.write_all(metrics_csv(&with_average(results)?).as_bytes())?;
        }
        Command::Baseline { cfg } => {
            let cfg = load_config(&cfg)?;
            let results = test_sets(&cfg)?
                .iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(name, scenes)| {
                    evaluate_with(name, scenes, 1, Pairing::MinAde, |_, s| Ok(vec![linear_baseline(s).futures]))
                })
                .collect::<Result<Vec<_>>>()?;
            out.write_all(metrics_csv(&with_average(results)?).as_bytes())?;
        }
        Command::Sample { cfg, checkpoint, samples, out: path } => {
            let cfg = load_config(&cfg)?;
            if samples == 0 {
                return Err(Error::Config("--samples must be at least 1".into()));
            }
            let (model, store) = load_model(&cfg, &checkpoint)?;
            let scenes: Vec<SceneSample> = test_sets(&cfg)?.into_iter().flat_map(|(_, s)| s).collect();
            let mut csv = String::from("scene_id,z_index,ped_id,t,x,y\n");
            for (idx, scene) in scenes.iter().enumerate() {
                for (zi, z) in latent_draws(cfg.seed, idx, samples, model.latent_dim()).iter().enumerate() {
                    let pred = model.predict(&store, scene, z)?;
                    for (ped, fut) in scene.pedestrians.iter().zip(&pred.futures) {
                        for (k, p) in fut.iter().enumerate() {
                            writeln!(csv, "{},{zi},{},{},{},{}", scene.scene_id, ped.pedestrian_id, OBS_LEN + k, p[0], p[1])
                                .expect("write to string");
                        }
                    }
                }
            }
            write_output(path.as_deref(), &csv, out)?;
        }
        Command::Sweep { cfg, checkpoint, scene, axis, count, span, out: path, svg } => {
            let cfg = load_config(&cfg)?;
            let (model, store) = load_model(&cfg, &checkpoint)?;
            let scenes: Vec<SceneSample> = test_sets(&cfg)?.into_iter().flat_map(|(_, s)| s).collect();
            let sc = scenes
                .get(scene)
                .ok_or_else(|| Error::Config(format!("--scene {scene} out of range ({} test scenes)", scenes.len())))?;
            let codes = axis_grid(model.latent_dim(), axis, count, span)?;
            let rows = latent_sweep(&model, &store, sc, &codes)?;
            write_output(path.as_deref(), &trajectory_csv(&rows), out)?;
            if let Some(svg) = svg {
                fs::write(svg, sweep_svg(sc, &rows))?;
            }
        }
        Command::Synth { kind, scenes, seed, noise, min_peds, max_peds, out: path, modes } => {
            let kind: SynthKind = kind.parse()?;
            let mut spec = SynthSpec::new(kind, scenes, seed);
            spec.noise = noise;
            if let Some(n) = min_peds {
                spec.min_peds = n;
            }
            if let Some(n) = max_peds {
                spec.max_peds = n;
            }
            let generated = synth_generate(&spec)?;
            fs::write(&path, format_tracks(&generated.rows))?;
            if let Some(mpath) = modes {
                let mut text = String::from("scene_index,side\n");
                for (i, m) in generated.modes.iter().enumerate() {
                    let side = match m {
                        Some(PassingSide::Left) => "left",
                        Some(PassingSide::Right) => "right",
                        None => "none",
                    };
                    writeln!(text, "{i},{side}").expect("write to string");
                }
                fs::write(mpath, text)?;
            }
            writeln!(err, "wrote {} rows for {} scenes to {}", generated.rows.len(), scenes, path.display())?;
        }
        Command::Gradcheck { seed } => {
            let mut failed = 0;
            writeln!(out, "check,max_relative_error,coordinates,status")?;
            for c in gradient_suite(seed)? {
                let ok = c.report.passed();
                failed += usize::from(!ok);
                writeln!(
                    out,
                    "{},{:e},{},{}",
                    c.name,
                    c.report.max_relative_error,
                    c.report.coordinates,
                    if ok { "pass" } else { "FAIL" }
                )?;
            }
            if failed > 0 {
                writeln!(err, "{failed} gradient checks failed")?;
                return Ok(EXIT_NUMERIC);
            }
        }
    }
    Ok(EXIT_OK)
}

fn train(cfg: &RunConfig, dir: &Path, err: &mut dyn Write) -> Result<()> {
    let scenes = cfg.scene_sets()?.train_scenes();
    if scenes.is_empty() {
        return Err(Error::Config("no training scenes configured".into()));
    }
    let model = SocialBiGat::new(cfg.model.clone())?;
    let mut store = model.init_params::<f64>(cfg.seed)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let mut log = BufWriter::new(File::create(dir.join("train_log.csv"))?);
    writeln!(log, "{}", LossReport::CSV_HEADER)?;
    let steps = cfg.total_steps(scenes.len());
    writeln!(err, "training on {} scenes for {steps} steps", scenes.len())?;
    let mut trainer = Trainer::new(model, cfg.train.clone(), cfg.seed)?;
    trainer.run(&mut store, &scenes, steps, |step, report, store| {
        writeln!(log, "{}", report.csv_row(step))?;
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            save_checkpoint(store, dir.join(format!("checkpoint-{step:06}.ckpt")))?;
        }
        Ok(())
    })?;
    log.flush()?;
    save_checkpoint(&store, dir.join("final.ckpt"))?;
    writeln!(err, "saved {}", dir.join("final.ckpt").display())?;
    Ok(())
}
