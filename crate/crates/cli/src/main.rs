//! `lipsync` command line: synthetic corpora, dataset building, training,
//! rendering and verification.
//!
//! `--config FILE` reads a JSON object whose keys are flag names (`pca_k` or
//! `pca-k`); flags given on the command line take precedence. Results are
//! printed as JSON on stdout; failures print `{"error", "message"}` on stderr
//! and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lipsync_core::inpaint::InpainterConfig;
use lipsync_core::pipeline::{
    build_dataset, render_video, synth_corpus, train_inpainter_from_dir, train_keypoints_from_dir, verify_outputs,
    AudioSource, DatasetOptions, RenderOptions, SynthCorpusOptions,
};
use lipsync_core::predictor::{OptimizerChoice, PredictorConfig};
use lipsync_core::tts::StubTts;
use lipsync_core::Error;

#[derive(Parser, Debug)]
#[command(name = "lipsync", version, about = "Audio-driven lip-sync synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dataset preparation.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Network training.
    #[command(subcommand)]
    Train(TrainCmd),
    /// Render frames and audio for text or a WAV onto a target clip.
    Render(RenderArgs),
    /// Check a render directory.
    Verify(VerifyArgs),
    /// Synthetic data generation.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Fit PCA, write aligned sequences and in-painting pairs.
    Build(DatasetArgs),
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pairs_per_sec: f64,
    #[arg(long, default_value_t = 5)]
    pca_k: usize,
    #[arg(long, default_value_t = 0.3)]
    bbox_expand: f64,
}

#[derive(Subcommand, Debug)]
enum TrainCmd {
    /// Train the audio-to-keypoint predictor.
    Keypoints(KeypointArgs),
    /// Train the mouth in-painter.
    Inpainter(InpainterArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Opt {
    Sgd,
    Adam,
}

#[derive(Args, Debug)]
struct KeypointArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    hidden: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 20)]
    delay: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = Opt::Adam)]
    optimizer: Opt,
}

#[derive(Args, Debug)]
struct InpainterArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Square image side in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 32)]
    base_channels: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, required_unless_present = "audio", conflicts_with = "audio")]
    text: Option<String>,
    /// WAV file used instead of synthesized speech.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Target clip directory (with clip.json).
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    pca: PathBuf,
    #[arg(long)]
    kp: PathBuf,
    #[arg(long)]
    inpaint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    out: PathBuf,
    /// Second render of the same job that must match byte for byte.
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SynthCmd {
    /// Write a corpus of synthetic talking clips plus manifest.json.
    Corpus(SynthArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of clips.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25.0)]
    fps: f64,
    #[arg(long, default_value_t = 20)]
    min_chars: usize,
    #[arg(long, default_value_t = 40)]
    max_chars: usize,
    /// Square frame side in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Usage(m) => ("UsageError", m.clone()),
            CliError::Config(m) => ("ConfigError", m.clone()),
            CliError::Core(e) => (e.kind(), e.to_string()),
        };
        let mut v = json!({ "error": kind, "message": message });
        if let CliError::Core(Error::VerificationFailed(list)) = self {
            v["violations"] = json!(list);
        }
        v
    }
}

/// Moves `--config FILE` values into `args` for every flag not already given.
fn merge_config(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" {
            let p = args
                .get(i + 1)
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            path = Some(PathBuf::from(p));
            args.drain(i..i + 2);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for (key, value) in cfg {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match value {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => args.extend([flag, s]),
            Value::Number(n) => args.extend([flag, n.to_string()]),
            other => return Err(CliError::Config(format!("unsupported value for {key}: {other}"))),
        }
    }
    Ok(args)
}

fn square(size: usize) -> (usize, usize) {
    (size, size)
}

fn run(cli: Cli) -> Result<Value, CliError> {
    Ok(match cli.command {
        Command::Synth(SynthCmd::Corpus(a)) => {
            let opts = SynthCorpusOptions {
                seed: a.seed,
                clips: a.n,
                fps: a.fps,
                min_chars: a.min_chars,
                max_chars: a.max_chars,
                image_size: square(a.size),
            };
            let m = synth_corpus(&opts, &a.out)?;
            json!({
                "manifest": a.out.join(lipsync_core::pipeline::MANIFEST_FILE),
                "clips": m.clips.len(),
            })
        }
        Command::Dataset(DatasetCmd::Build(a)) => {
            let opts = DatasetOptions {
                pairs_per_sec: a.pairs_per_sec,
                pca_k: a.pca_k,
                bbox_expand: a.bbox_expand,
            };
            json!(build_dataset(&a.manifest, &a.out, &opts)?)
        }
        Command::Train(TrainCmd::Keypoints(a)) => {
            let config = PredictorConfig {
                hidden_size: a.hidden,
                layers: a.layers,
                delay_frames: a.delay,
                learning_rate: a.lr,
                epochs: a.epochs,
                seed: a.seed,
                optimizer: match a.optimizer {
                    Opt::Sgd => OptimizerChoice::Sgd,
                    Opt::Adam => OptimizerChoice::Adam,
                },
                ..PredictorConfig::default()
            };
            let t = train_keypoints_from_dir(&a.data, &config, &a.out)?;
            json!({ "checkpoint": a.out, "loss_history": t.loss_history })
        }
        Command::Train(TrainCmd::Inpainter(a)) => {
            let config = InpainterConfig {
                image_size: square(a.size),
                depth: a.depth,
                base_channels: a.base_channels,
                learning_rate: a.lr,
                epochs: a.epochs,
                batch_size: a.batch_size,
                seed: a.seed,
            };
            let t = train_inpainter_from_dir(&a.data, &config, &a.out, |e, l| {
                eprintln!("{}", json!({ "epoch": e, "loss": l }));
            })?;
            json!({ "checkpoint": a.out, "loss_history": t.loss_history })
        }
        Command::Render(a) => {
            let audio = match (a.text, a.audio) {
                (Some(t), _) => AudioSource::Text(t),
                (None, Some(p)) => AudioSource::Wav(p),
                (None, None) => return Err(CliError::Usage("one of --text or --audio is required".into())),
            };
            let opts = RenderOptions {
                audio,
                target: a.target,
                pca: a.pca,
                keypoints: a.kp,
                inpainter: a.inpaint,
                out: a.out.clone(),
                workers: a.workers,
                seed: a.seed,
            };
            let m = render_video(&opts, &StubTts::default())?;
            json!({ "out": a.out, "frames": m.frame_count, "fps": m.fps })
        }
        Command::Verify(a) => json!(verify_outputs(&a.out, a.compare.as_deref())?),
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let result = merge_config(args).and_then(|args| {
        let cli = Cli::try_parse_from(&args).map_err(|e| {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            CliError::Usage(e.to_string())
        })?;
        run(cli)
    });
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(match e {
                CliError::Usage(_) | CliError::Config(_) => 2,
                CliError::Core(_) => 1,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"pca_k": 3, "out": "x", "pairs-per-sec": 2.5}"#).unwrap();
        let merged = merge_config(strings(&[
            "lipsync",
            "dataset",
            "build",
            "--config",
            cfg.to_str().unwrap(),
            "--manifest",
            "m",
            "--out=y",
        ]))
        .unwrap();
        let cli = Cli::try_parse_from(&merged).unwrap();
        let Command::Dataset(DatasetCmd::Build(a)) = cli.command else {
            panic!("wrong command");
        };
        assert_eq!(a.pca_k, 3);
        assert_eq!(a.pairs_per_sec, 2.5);
        assert_eq!(a.out, std::path::Path::new("y"));
    }

    #[test]
    fn render_needs_exactly_one_source() {
        let base = [
            "lipsync",
            "render",
            "--target",
            "t",
            "--pca",
            "p",
            "--kp",
            "k",
            "--inpaint",
            "i",
            "--out",
            "o",
        ];
        assert!(Cli::try_parse_from(base).is_err());
        let mut both = base.to_vec();
        both.extend(["--text", "hi", "--audio", "a.wav"]);
        assert!(Cli::try_parse_from(both).is_err());
        let mut one = base.to_vec();
        one.extend(["--text", "hi"]);
        assert!(Cli::try_parse_from(one).is_ok());
    }
}
