//! Re-checks a render directory against its manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::frame_path;
use super::dataset::PCA_FILE;
use super::read_json;
use super::render::{RenderManifest, RENDER_MANIFEST_FILE};
use crate::audio::{FeatureConfig, Waveform};
use crate::error::{Error, Result};
use crate::geometry::denormalize;
use crate::image::Image;
use crate::pca::{PcaBasis, PcaCoeffs};

const MOUTH_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub frames_checked: usize,
    pub compared_with: Option<String>,
    pub violations: Vec<String>,
}

/// Checks manifest invariants, frame files, pixel range and audio length.
/// With `compare`, every frame and the manifest must also be byte-identical
/// to the render in that directory.
///
/// Returns [`Error::VerificationFailed`] listing every violation found.
pub fn verify_outputs(out_dir: &Path, compare: Option<&Path>) -> Result<VerifyReport> {
    let manifest_path = out_dir.join(RENDER_MANIFEST_FILE);
    let manifest: RenderManifest = read_json(&manifest_path)?;
    let mut v = Vec::new();

    if manifest.frame_count != manifest.frames.len() {
        v.push(format!(
            "manifest lists {} frames but frame_count is {}",
            manifest.frames.len(),
            manifest.frame_count
        ));
    }

    let basis = match PcaBasis::load(&out_dir.join(PCA_FILE)) {
        Ok(b) => Some(b),
        Err(e) => {
            v.push(format!("{PCA_FILE}: {e}"));
            None
        }
    };

    let mut size = None;
    for (i, f) in manifest.frames.iter().enumerate() {
        if f.frame_index != i {
            v.push(format!("manifest entry {i} has frame_index {}", f.frame_index));
        }
        if let Some(basis) = &basis {
            match basis.reconstruct_shape(&PcaCoeffs(f.coeffs.clone())) {
                Ok(shape) => {
                    let expected = denormalize(&shape, &f.params);
                    let worst = if f.mouth_points_px.len() == expected.len() {
                        expected
                            .iter()
                            .zip(&f.mouth_points_px)
                            .map(|(a, b)| (a.x - b.x).abs().max((a.y - b.y).abs()))
                            .fold(0.0, f64::max)
                    } else {
                        f64::INFINITY
                    };
                    if !(worst <= MOUTH_TOLERANCE) {
                        v.push(format!("frame {i}: mouth points deviate by {worst:e} px"));
                    }
                }
                Err(e) => v.push(format!("frame {i}: {e}")),
            }
        }

        let path = frame_path(out_dir, f.frame_index);
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match Image::read_ppm(&path) {
            Ok(img) => {
                if img.data().iter().any(|x| !(0.0..=1.0).contains(x)) {
                    v.push(format!("{name}: pixel outside [0, 1]"));
                }
                match size {
                    None => size = Some(img.size()),
                    Some(s) if s != img.size() => v.push(format!("{name}: size {:?} differs from {s:?}", img.size())),
                    _ => {}
                }
            }
            Err(Error::MissingFile(_)) => v.push(format!("{name}: missing")),
            Err(e) => v.push(format!("{name}: {e}")),
        }
    }

    let extra = frame_path(out_dir, manifest.frames.len());
    if extra.exists() {
        v.push(format!("unexpected extra frame {}", extra.display()));
    }

    match Waveform::read_wav(&out_dir.join(&manifest.audio_path)) {
        Ok(w) => {
            let t = FeatureConfig::with_fps(manifest.fps).frame_count(w.samples.len());
            if w.sample_rate != crate::audio::TARGET_RATE || t != manifest.frames.len() {
                v.push(format!(
                    "audio ({} samples at {} Hz) implies {t} frames, manifest has {}",
                    w.samples.len(),
                    w.sample_rate,
                    manifest.frames.len()
                ));
            }
        }
        Err(e) => v.push(format!("{}: {e}", manifest.audio_path)),
    }

    if let Some(other) = compare {
        let read = |p: &Path| std::fs::read(p).ok();
        if read(&manifest_path) != read(&other.join(RENDER_MANIFEST_FILE)) {
            v.push(format!("{RENDER_MANIFEST_FILE} differs from {}", other.display()));
        }
        let n = manifest.frames.len();
        for i in 0..n {
            let (a, b) = (frame_path(out_dir, i), frame_path(other, i));
            if read(&a).is_none() || read(&a) != read(&b) {
                v.push(format!("frame_{i:06}.ppm differs from {}", other.display()));
            }
        }
        if frame_path(other, n).exists() {
            v.push(format!("{} has more frames", other.display()));
        }
    }

    if !v.is_empty() {
        return Err(Error::VerificationFailed(v));
    }
    Ok(VerifyReport {
        frames_checked: manifest.frames.len(),
        compared_with: compare.map(|p| p.display().to_string()),
        violations: v,
    })
}
