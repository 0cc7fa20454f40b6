//! Corpus manifests, landmark files and the synthetic talking-clip generator.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_json, read_text, write_json, Staging};
use crate::audio::{FeatureConfig, Waveform};
use crate::error::{Error, Result};
use crate::geometry::{Landmarks68, Point};
use crate::image::Image;
use crate::synth::{render_face, FaceParams, NUM_LATENTS};
use crate::tts::{StubTts, TtsAdapter};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLIP_FILE: &str = "clip.json";

/// One clip: a directory of `frame_%06d.ppm`, a landmark JSONL file and a WAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub frames_dir: PathBuf,
    pub landmarks_path: PathBuf,
    pub wav_path: PathBuf,
    pub fps: f64,
}

impl ClipEntry {
    fn resolved(&self, base: &Path) -> ClipEntry {
        ClipEntry {
            frames_dir: base.join(&self.frames_dir),
            landmarks_path: base.join(&self.landmarks_path),
            wav_path: base.join(&self.wav_path),
            fps: self.fps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub clips: Vec<ClipEntry>,
    #[serde(default)]
    pub notes: String,
}

impl CorpusManifest {
    /// Loads a manifest; relative clip paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: CorpusManifest = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut m.clips {
            *c = c.resolved(base);
            if !(c.fps > 0.0) || !c.fps.is_finite() {
                return Err(Error::parse(path, format!("clip fps {} must be positive", c.fps)));
            }
        }
        Ok(m)
    }
}

/// One line of a landmark file. Points are listed in 68-point order, so
/// `points[48..68]` are mouth points 49–68.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub frame: usize,
    pub points: Vec<Point>,
}

pub fn read_landmarks_jsonl(path: &Path) -> Result<Vec<Landmarks68>> {
    let text = read_text(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let rec: LandmarkRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
            if rec.frame != i {
                return Err(Error::parse(path, format!("line {} has frame {}", i + 1, rec.frame)));
            }
            Landmarks68::new(&rec.points).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_landmarks_jsonl(path: &Path, frames: &[Landmarks68]) -> Result<()> {
    let mut out = Vec::new();
    for (frame, l) in frames.iter().enumerate() {
        let rec = LandmarkRecord {
            frame,
            points: l.points().to_vec(),
        };
        serde_json::to_writer(&mut out, &rec).expect("landmarks serialize");
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn frame_path(frames_dir: &Path, index: usize) -> PathBuf {
    frames_dir.join(format!("frame_{index:06}.ppm"))
}

/// A clip with its landmarks loaded; frames are read on demand.
#[derive(Clone, Debug)]
pub struct Clip {
    pub entry: ClipEntry,
    pub landmarks: Vec<Landmarks68>,
}

impl Clip {
    pub fn load(entry: &ClipEntry) -> Result<Self> {
        let landmarks = read_landmarks_jsonl(&entry.landmarks_path)?;
        Ok(Clip {
            entry: entry.clone(),
            landmarks,
        })
    }

    /// Opens a clip directory through its `clip.json`.
    pub fn open(dir: &Path) -> Result<Self> {
        let entry: ClipEntry = read_json(&dir.join(CLIP_FILE))?;
        Clip::load(&entry.resolved(dir))
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn frame(&self, index: usize) -> Result<Image> {
        Image::read_ppm(&frame_path(&self.entry.frames_dir, index))
    }

    /// Checks that every landmark record has a frame file.
    pub fn check_frames(&self) -> Result<()> {
        for i in 0..self.len() {
            let p = frame_path(&self.entry.frames_dir, i);
            if !p.is_file() {
                return Err(Error::MissingFile(p));
            }
        }
        Ok(())
    }
}

/// Mouth latents (open, wide, smile, jaw, asymmetry) articulated for a
/// character. Characters the stub synthesizer leaves silent get a closed,
/// neutral mouth.
pub fn char_pose(c: char) -> [f64; NUM_LATENTS] {
    let c = c.to_ascii_lowercase();
    let i = match c {
        'a'..='z' => (c as u8 - b'a') as usize,
        '0'..='9' => 26 + (c as u8 - b'0') as usize,
        _ => return [0.0, 0.5, 0.0, 0.0, 0.0],
    };
    [
        ((i * 7) % 11) as f64 / 10.0,
        ((i * 5) % 7) as f64 / 6.0,
        ((i * 3) % 9) as f64 / 4.0 - 1.0,
        ((i * 4) % 5) as f64 / 4.0,
        (((i * 13) % 5) as f64 / 2.0 - 1.0) * 0.5,
    ]
}

/// Latents at time `t` seconds: linear interpolation between the poses of
/// neighbouring characters, anchored at the character centers.
fn mouth_latents(text: &[char], char_secs: f64, t: f64) -> [f64; NUM_LATENTS] {
    let pos = (t / char_secs - 0.5).clamp(0.0, (text.len() - 1) as f64);
    let i = pos.floor() as usize;
    let j = (i + 1).min(text.len() - 1);
    let w = pos - i as f64;
    let (a, b) = (char_pose(text[i]), char_pose(text[j]));
    std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k])
}

/// Renders a talking clip for `text` into `dir` (`frames/`, `landmarks.jsonl`,
/// `audio.wav`, `clip.json`). Audio comes from the stub synthesizer and the
/// frame count equals the audio feature count at `fps`; the head drifts
/// sinusoidally with phases drawn from `seed`.
pub fn synth_clip(text: &str, seed: u64, fps: f64, image_size: (usize, usize), dir: &Path) -> Result<ClipEntry> {
    let tts = StubTts::default();
    let wave = tts.synthesize(text)?;
    let n_frames = FeatureConfig::with_fps(fps).frame_count(wave.samples.len());
    if n_frames == 0 {
        return Err(Error::TooShort {
            samples: wave.samples.len(),
            needed: FeatureConfig::with_fps(fps).window_samples(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
    let chars: Vec<char> = text.chars().collect();
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);

    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut landmarks = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let t = f as f64 / fps;
        let mut p = FaceParams {
            center: Point::new(
                w * (0.5 + 0.03 * (2.0 * PI * 0.3 * t + phase[0]).sin()),
                h * (0.47 + 0.02 * (2.0 * PI * 0.2 * t + phase[1]).sin()),
            ),
            rotation: 0.08 * (2.0 * PI * 0.25 * t + phase[2]).sin(),
            scale: h * (0.336 + 0.015 * (2.0 * PI * 0.15 * t + phase[3]).sin()),
            image_size,
            ..FaceParams::neutral()
        };
        for (k, v) in mouth_latents(&chars, tts.char_secs, t).into_iter().enumerate() {
            p.set_latent(k, v);
        }
        let s = render_face(&p)?;
        s.image.write_ppm(&frame_path(&frames_dir, f))?;
        landmarks.push(s.landmarks);
    }
    write_landmarks_jsonl(&dir.join("landmarks.jsonl"), &landmarks)?;
    wave.write_wav(&dir.join("audio.wav"))?;

    let entry = ClipEntry {
        frames_dir: "frames".into(),
        landmarks_path: "landmarks.jsonl".into(),
        wav_path: "audio.wav".into(),
        fps,
    };
    write_json(&dir.join(CLIP_FILE), &entry)?;
    Ok(entry)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpusOptions {
    pub seed: u64,
    pub clips: usize,
    pub fps: f64,
    pub min_chars: usize,
    pub max_chars: usize,
    pub image_size: (usize, usize),
}

impl Default for SynthCorpusOptions {
    fn default() -> Self {
        SynthCorpusOptions {
            seed: 0,
            clips: 8,
            fps: 25.0,
            min_chars: 20,
            max_chars: 40,
            image_size: (64, 64),
        }
    }
}

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789    ";

/// Writes `clips` synthetic clips of random text under `out`
/// (`clip_%04d/…` plus `manifest.json`).
pub fn synth_corpus(opts: &SynthCorpusOptions, out: &Path) -> Result<CorpusManifest> {
    if opts.clips == 0 {
        return Err(Error::InvalidParams("corpus needs at least one clip".into()));
    }
    if opts.min_chars == 0 || opts.min_chars > opts.max_chars {
        return Err(Error::InvalidParams(format!(
            "bad text length range {}..={}",
            opts.min_chars, opts.max_chars
        )));
    }
    let staging = Staging::new(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut clips = Vec::with_capacity(opts.clips);
    let mut texts = Vec::with_capacity(opts.clips);
    for i in 0..opts.clips {
        let len = rng.gen_range(opts.min_chars..=opts.max_chars);
        // first and last characters are always voiced
        let text: String = (0..len)
            .map(|j| {
                let pool = if j == 0 || j + 1 == len {
                    &ALPHABET[..36]
                } else {
                    ALPHABET
                };
                pool[rng.gen_range(0..pool.len())] as char
            })
            .collect();
        let name = format!("clip_{i:04}");
        let clip_seed = rng.gen();
        let entry = synth_clip(&text, clip_seed, opts.fps, opts.image_size, &staging.path().join(&name))?;
        clips.push(ClipEntry {
            frames_dir: Path::new(&name).join(entry.frames_dir),
            landmarks_path: Path::new(&name).join(entry.landmarks_path),
            wav_path: Path::new(&name).join(entry.wav_path),
            fps: entry.fps,
        });
        texts.push(text);
    }
    let manifest = CorpusManifest {
        clips,
        notes: format!(
            "synthetic corpus, seed {}, stub speech; texts: {}",
            opts.seed,
            serde_json::to_string(&texts).expect("texts serialize")
        ),
    };
    write_json(&staging.path().join(MANIFEST_FILE), &manifest)?;
    staging.commit()?;
    CorpusManifest::load(&out.join(MANIFEST_FILE))
}

/// Reads a clip's audio at 16 kHz.
pub(crate) fn read_clip_audio(entry: &ClipEntry) -> Result<Waveform> {
    let wave = Waveform::read_wav(&entry.wav_path)?;
    crate::audio::resample_to_16k(&wave)
}
