//! Dataset building, rendering and verification on disk.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use lipsync_core::audio::Waveform;
use lipsync_core::inpaint::InpainterConfig;
use lipsync_core::pipeline::{
    build_dataset, frame_path, load_summary, render_video, synth_clip, synth_corpus, train_inpainter_from_dir,
    train_keypoints_from_dir, verify_outputs, write_landmarks_jsonl, AudioSource, ClipEntry, CorpusManifest,
    DatasetOptions, RenderManifest, RenderOptions, SynthCorpusOptions, PCA_FILE, RENDER_MANIFEST_FILE,
};
use lipsync_core::predictor::PredictorConfig;
use lipsync_core::synth::{render_face, FaceParams};
use lipsync_core::tts::StubTts;
use lipsync_core::{denormalize, Error, Landmarks68, PcaBasis, PcaCoeffs, Point};
use tempfile::TempDir;

/// Writes a one-clip corpus by hand: `frames` rendered faces at 25 fps and
/// `secs` of 44.1 kHz noise. Returns the manifest path.
fn handmade_corpus(root: &Path, frames: usize, secs: f64, degenerate: &[usize]) -> PathBuf {
    let clip = root.join("clip");
    let frames_dir = clip.join("frames");
    std::fs::create_dir_all(&frames_dir).unwrap();
    let mut landmarks = Vec::new();
    for f in 0..frames {
        let phase = f as f64 * 0.21;
        let mut p = FaceParams {
            center: Point::new(32.0 + phase.sin(), 30.0 + phase.cos()),
            ..FaceParams::neutral()
        };
        p.set_latent(0, 0.5 + 0.5 * (phase * 1.7).sin());
        let s = render_face(&p).unwrap();
        s.image.write_ppm(&frame_path(&frames_dir, f)).unwrap();
        landmarks.push(if degenerate.contains(&f) {
            Landmarks68::new(&[Point::new(10.0, 10.0); 68]).unwrap()
        } else {
            s.landmarks
        });
    }
    write_landmarks_jsonl(&clip.join("landmarks.jsonl"), &landmarks).unwrap();
    let n = (secs * 44_100.0).round() as usize;
    let samples = (0..n)
        .map(|i| 0.3 * ((i * 7919 % 1000) as f64 / 1000.0 - 0.5))
        .collect();
    Waveform::new(samples, 44_100)
        .write_wav(&clip.join("audio.wav"))
        .unwrap();
    let manifest = CorpusManifest {
        clips: vec![ClipEntry {
            frames_dir: "clip/frames".into(),
            landmarks_path: "clip/landmarks.jsonl".into(),
            wav_path: "clip/audio.wav".into(),
            fps: 25.0,
        }],
        notes: String::new(),
    };
    let path = root.join("manifest.json");
    std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
    path
}

#[test]
fn ten_second_clip_yields_250_frames() {
    let tmp = TempDir::new().unwrap();
    let manifest = handmade_corpus(tmp.path(), 250, 10.0, &[]);
    let out = tmp.path().join("data");
    let summary = build_dataset(&manifest, &out, &DatasetOptions::default()).unwrap();
    assert!(summary.frames[0].abs_diff(250) <= 1, "{:?}", summary.frames);
    assert_eq!(summary.pairs, 10);
    assert_eq!(summary.sequences, 1);
    assert_eq!(summary.feature_dim, 26);
    assert_eq!(load_summary(&out).unwrap(), summary);
    assert!(out.join(PCA_FILE).is_file());

    let four = build_dataset(
        &manifest,
        &tmp.path().join("four"),
        &DatasetOptions {
            pairs_per_sec: 4.0,
            ..DatasetOptions::default()
        },
    )
    .unwrap();
    assert_eq!(four.pairs, 40);
}

#[test]
fn degenerate_frames_are_skipped() {
    let tmp = TempDir::new().unwrap();
    let manifest = handmade_corpus(tmp.path(), 100, 4.0, &[25, 40]);
    let summary = build_dataset(&manifest, &tmp.path().join("data"), &DatasetOptions::default()).unwrap();
    assert_eq!(summary.skipped_frames, 2);
    assert_eq!(summary.skipped_pairs, 1);
    assert_eq!(summary.pairs, 3);
}

#[test]
fn misaligned_clip_is_rejected_without_output() {
    let tmp = TempDir::new().unwrap();
    let manifest = handmade_corpus(tmp.path(), 90, 4.0, &[]);
    let out = tmp.path().join("data");
    let err = build_dataset(&manifest, &out, &DatasetOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Alignment { .. }), "{err:?}");
    assert!(!out.exists());
}

#[test]
fn empty_landmark_file_fails_atomically() {
    let tmp = TempDir::new().unwrap();
    let manifest = handmade_corpus(tmp.path(), 50, 2.0, &[]);
    std::fs::write(tmp.path().join("clip/landmarks.jsonl"), "").unwrap();
    let out = tmp.path().join("data");
    let err = build_dataset(&manifest, &out, &DatasetOptions::default()).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)), "{err:?}");
    assert!(!out.exists());
    let leftovers: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers.len(), 2, "{leftovers:?}");
}

/// Tiny trained models plus a 30-character target clip, built once.
struct Models {
    _dir: TempDir,
    root: PathBuf,
}

fn models() -> &'static Models {
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = root.join("corpus");
        synth_corpus(
            &SynthCorpusOptions {
                seed: 4,
                clips: 2,
                min_chars: 10,
                max_chars: 14,
                ..SynthCorpusOptions::default()
            },
            &corpus,
        )
        .unwrap();
        let data = root.join("data");
        let opts = DatasetOptions {
            pairs_per_sec: 4.0,
            ..DatasetOptions::default()
        };
        build_dataset(&corpus.join("manifest.json"), &data, &opts).unwrap();
        let kp = PredictorConfig {
            hidden_size: 8,
            delay_frames: 2,
            epochs: 2,
            ..PredictorConfig::default()
        };
        train_keypoints_from_dir(&data, &kp, &root.join("kp.json")).unwrap();
        let ip = InpainterConfig {
            depth: 2,
            base_channels: 4,
            epochs: 1,
            ..InpainterConfig::default()
        };
        train_inpainter_from_dir(&data, &ip, &root.join("inpaint.json"), |_, _| {}).unwrap();
        synth_clip(
            "the quick brown fox jumps over",
            9,
            25.0,
            (64, 64),
            &root.join("target"),
        )
        .unwrap();
        Models { _dir: dir, root }
    })
}

fn render_opts(text: &str, out: &Path, workers: usize) -> RenderOptions {
    let m = models();
    RenderOptions {
        audio: AudioSource::Text(text.into()),
        target: m.root.join("target"),
        pca: m.root.join("data").join(PCA_FILE),
        keypoints: m.root.join("kp.json"),
        inpainter: m.root.join("inpaint.json"),
        out: out.to_path_buf(),
        workers,
        seed: 0,
    }
}

const TEXT: &str = "hello world 12345678";

#[test]
fn twenty_characters_render_75_frames() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("render");
    let manifest = render_video(&render_opts(TEXT, &out, 1), &StubTts::default()).unwrap();
    assert_eq!(manifest.frame_count, 75);
    assert_eq!(manifest.frames.len(), 75);
    for i in 0..75 {
        assert!(frame_path(&out, i).is_file());
    }
    assert!(!frame_path(&out, 75).exists());
    assert_eq!(Waveform::read_wav(&out.join("audio.wav")).unwrap().sample_rate, 16_000);
    let report = verify_outputs(&out, None).unwrap();
    assert_eq!(report.frames_checked, 75);
}

#[test]
fn manifest_points_follow_from_coefficients() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("render");
    render_video(&render_opts(TEXT, &out, 2), &StubTts::default()).unwrap();
    let manifest: RenderManifest =
        serde_json::from_str(&std::fs::read_to_string(out.join(RENDER_MANIFEST_FILE)).unwrap()).unwrap();
    let basis = PcaBasis::load(&out.join(PCA_FILE)).unwrap();
    for (i, f) in manifest.frames.iter().enumerate() {
        assert_eq!(f.frame_index, i);
        let shape = basis.reconstruct_shape(&PcaCoeffs(f.coeffs.clone())).unwrap();
        let pts = denormalize(&shape, &f.params);
        for (p, q) in pts.iter().zip(&f.mouth_points_px) {
            assert!((p.x - q.x).abs() <= 1e-6 && (p.y - q.y).abs() <= 1e-6);
        }
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("serial"), tmp.path().join("parallel"));
    render_video(&render_opts(TEXT, &a, 1), &StubTts::default()).unwrap();
    render_video(&render_opts(TEXT, &b, 4), &StubTts::default()).unwrap();
    verify_outputs(&a, Some(&b)).unwrap();
    for i in 0..75 {
        assert_eq!(
            std::fs::read(frame_path(&a, i)).unwrap(),
            std::fs::read(frame_path(&b, i)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.join(RENDER_MANIFEST_FILE)).unwrap(),
        std::fs::read(b.join(RENDER_MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn empty_text_leaves_no_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("render");
    let err = render_video(&render_opts("", &out, 1), &StubTts::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyText), "{err:?}");
    assert!(!out.exists());
}

#[test]
fn audio_longer_than_target_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("render");
    let long = "a".repeat(40);
    let err = render_video(&render_opts(&long, &out, 1), &StubTts::default()).unwrap_err();
    assert!(matches!(err, Error::InsufficientTargetFrames { .. }), "{err:?}");
    assert!(!out.exists());
}

#[test]
fn verify_reports_a_deleted_frame() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("render");
    render_video(&render_opts(TEXT, &out, 1), &StubTts::default()).unwrap();
    std::fs::remove_file(frame_path(&out, 17)).unwrap();
    match verify_outputs(&out, None) {
        Err(Error::VerificationFailed(v)) => {
            assert!(v.iter().any(|m| m.contains("frame_000017.ppm")), "{v:?}");
        }
        other => panic!("expected a verification failure, got {other:?}"),
    }
}
