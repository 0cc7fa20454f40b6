//! Corpus → PCA basis, aligned (features, coefficients) sequences and
//! in-painting pairs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::{read_clip_audio, Clip, CorpusManifest};
use super::{read_json, read_text, write_json, Staging};
use crate::audio::{extract_features, FeatureConfig};
use crate::conditioner::{make_conditioned_pair_with, ConditionedPair, MouthBBox, DEFAULT_EXPAND};
use crate::error::{Error, Result};
use crate::geometry::{mouth_shape, normalize, MouthShape40};
use crate::image::Image;
use crate::pca::fit_pca;
use crate::predictor::SequencePair;

pub const PCA_FILE: &str = "pca_basis.json";
const SEQUENCES_DIR: &str = "sequences";
const PAIRS_DIR: &str = "pairs";
const PAIRS_INDEX: &str = "pairs.jsonl";
const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub pairs_per_sec: f64,
    pub pca_k: usize,
    pub bbox_expand: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            pairs_per_sec: 1.0,
            pca_k: 5,
            bbox_expand: DEFAULT_EXPAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub clips: usize,
    /// Frames used per clip (video and audio counts may differ by one).
    pub frames: Vec<usize>,
    pub skipped_frames: usize,
    pub sequences: usize,
    pub pairs: usize,
    pub skipped_pairs: usize,
    pub feature_dim: usize,
    pub pca_k: usize,
    /// Cumulative explained-variance ratio of the kept components.
    pub explained_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub clip: usize,
    pub frame: usize,
    pub bbox: MouthBBox,
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    clip: usize,
    fps: f64,
    features: Vec<Vec<f64>>,
    coeffs: Vec<Vec<f64>>,
}

/// Frames sampled for in-painting pairs: `round(j·fps/pairs_per_sec)` for
/// `j = 0, 1, …` while inside the clip.
pub fn pair_frame_indices(n_frames: usize, fps: f64, pairs_per_sec: f64) -> Result<Vec<usize>> {
    if !(pairs_per_sec > 0.0) || !pairs_per_sec.is_finite() || !(fps > 0.0) {
        return Err(Error::InvalidParams(format!(
            "pairs_per_sec={pairs_per_sec} and fps={fps} must be positive"
        )));
    }
    let step = fps / pairs_per_sec;
    let mut out = Vec::new();
    for j in 0.. {
        let f = (j as f64 * step).round() as usize;
        if f >= n_frames {
            break;
        }
        if out.last() != Some(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

struct ClipData {
    clip: Clip,
    features: Vec<Vec<f64>>,
    shapes: Vec<Option<MouthShape40>>,
}

/// Builds a dataset directory:
///
/// * `pca_basis.json`: PCA over every normalized mouth shape of the corpus;
/// * `sequences/seq_%04d.json`: per clip, features and PCA coefficients per
///   frame (degenerate frames repeat the nearest earlier valid coefficients);
/// * `pairs/input_%06d.ppm`, `pairs/target_%06d.ppm`, `pairs/pairs.jsonl`;
/// * `summary.json`.
pub fn build_dataset(manifest_path: &Path, out: &Path, opts: &DatasetOptions) -> Result<DatasetSummary> {
    let manifest = CorpusManifest::load(manifest_path)?;
    if manifest.clips.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut data = Vec::with_capacity(manifest.clips.len());
    let mut skipped_frames = 0;
    for (ci, entry) in manifest.clips.iter().enumerate() {
        let clip = Clip::load(entry)?;
        clip.check_frames()?;
        let wave = read_clip_audio(entry)?;
        let feats = extract_features(&wave, &FeatureConfig::with_fps(entry.fps))?;
        if feats.len().abs_diff(clip.len()) > 1 {
            return Err(Error::Alignment {
                clip: ci,
                audio_frames: feats.len(),
                video_frames: clip.len(),
            });
        }
        let n = feats.len().min(clip.len());
        let mut shapes = Vec::with_capacity(n);
        for l in &clip.landmarks[..n] {
            match normalize(l) {
                Ok(norm) => shapes.push(Some(mouth_shape(&norm))),
                Err(Error::DegenerateFace(_)) => {
                    skipped_frames += 1;
                    shapes.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let mut features = feats.frames;
        features.truncate(n);
        data.push(ClipData { clip, features, shapes });
    }

    let all: Vec<Vec<f64>> = data
        .iter()
        .flat_map(|d| d.shapes.iter().flatten().map(|s| s.0.clone()))
        .collect();
    let basis = fit_pca(&all, opts.pca_k)?;

    let staging = Staging::new(out)?;
    let root = staging.path();
    basis.save(&root.join(PCA_FILE))?;

    let seq_dir = root.join(SEQUENCES_DIR);
    std::fs::create_dir_all(&seq_dir).map_err(|e| Error::io(&seq_dir, e))?;
    let mut sequences = 0;
    for (ci, d) in data.iter().enumerate() {
        let Some(first) = d.shapes.iter().flatten().next() else {
            continue;
        };
        let mut last = basis.project_shape(first)?.0;
        let mut coeffs = Vec::with_capacity(d.shapes.len());
        for s in &d.shapes {
            if let Some(s) = s {
                last = basis.project_shape(s)?.0;
            }
            coeffs.push(last.clone());
        }
        let file = SequenceFile {
            clip: ci,
            fps: d.clip.entry.fps,
            features: d.features.clone(),
            coeffs,
        };
        let path = seq_dir.join(format!("seq_{ci:04}.json"));
        std::fs::write(&path, serde_json::to_string(&file).expect("sequence serializes"))
            .map_err(|e| Error::io(&path, e))?;
        sequences += 1;
    }

    let pair_dir = root.join(PAIRS_DIR);
    std::fs::create_dir_all(&pair_dir).map_err(|e| Error::io(&pair_dir, e))?;
    let mut index_lines = Vec::new();
    let (mut pairs, mut skipped_pairs) = (0, 0);
    for (ci, d) in data.iter().enumerate() {
        for frame in pair_frame_indices(d.shapes.len(), d.clip.entry.fps, opts.pairs_per_sec)? {
            if d.shapes[frame].is_none() {
                skipped_pairs += 1;
                continue;
            }
            let image = d.clip.frame(frame)?;
            let pair = make_conditioned_pair_with(&image, &d.clip.landmarks[frame], opts.bbox_expand)?;
            pair.input_image
                .write_ppm(&pair_dir.join(format!("input_{pairs:06}.ppm")))?;
            pair.target_image
                .write_ppm(&pair_dir.join(format!("target_{pairs:06}.ppm")))?;
            let rec = PairRecord {
                index: pairs,
                clip: ci,
                frame,
                bbox: pair.bbox,
            };
            serde_json::to_writer(&mut index_lines, &rec).expect("pair record serializes");
            index_lines.push(b'\n');
            pairs += 1;
        }
    }
    let index_path = pair_dir.join(PAIRS_INDEX);
    std::fs::File::create(&index_path)
        .and_then(|mut f| f.write_all(&index_lines))
        .map_err(|e| Error::io(&index_path, e))?;

    let summary = DatasetSummary {
        clips: data.len(),
        frames: data.iter().map(|d| d.shapes.len()).collect(),
        skipped_frames,
        sequences,
        pairs,
        skipped_pairs,
        feature_dim: data[0].features.first().map_or(0, Vec::len),
        pca_k: basis.k,
        explained_ratio: basis.cumulative_ratio(basis.k),
    };
    write_json(&root.join(SUMMARY_FILE), &summary)?;
    staging.commit()?;
    Ok(summary)
}

/// Reads every `sequences/seq_*.json` of a dataset in file-name order.
pub fn load_sequences(data_dir: &Path) -> Result<Vec<SequencePair>> {
    let dir = data_dir.join(SEQUENCES_DIR);
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(dir.clone()),
            _ => Error::io(&dir, e),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f: SequenceFile = read_json(p)?;
            Ok(SequencePair {
                features: f.features,
                targets: f.coeffs,
            })
        })
        .collect()
}

/// Reads every in-painting pair listed in `pairs/pairs.jsonl`.
pub fn load_pairs(data_dir: &Path) -> Result<Vec<ConditionedPair>> {
    let dir = data_dir.join(PAIRS_DIR);
    let index_path = dir.join(PAIRS_INDEX);
    let text = read_text(&index_path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let rec: PairRecord = serde_json::from_str(line).map_err(|e| Error::parse(&index_path, e))?;
            Ok(ConditionedPair {
                input_image: Image::read_ppm(&dir.join(format!("input_{:06}.ppm", rec.index)))?,
                target_image: Image::read_ppm(&dir.join(format!("target_{:06}.ppm", rec.index)))?,
                bbox: rec.bbox,
            })
        })
        .collect()
}

/// The summary written by [`build_dataset`].
pub fn load_summary(data_dir: &Path) -> Result<DatasetSummary> {
    read_json(&data_dir.join(SUMMARY_FILE))
}
