//! On-disk orchestration: synthetic corpora, dataset building, training,
//! rendering and output verification.
//!
//! Every writer stages into a hidden sibling directory and renames it into
//! place on success, so a failed run leaves no partial output behind.

mod corpus;
mod dataset;
mod render;
mod train;
mod verify;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use corpus::{
    char_pose, frame_path, read_landmarks_jsonl, synth_clip, synth_corpus, write_landmarks_jsonl, Clip, ClipEntry,
    CorpusManifest, LandmarkRecord, SynthCorpusOptions, CLIP_FILE, MANIFEST_FILE,
};
pub use dataset::{
    build_dataset, load_pairs, load_sequences, load_summary, pair_frame_indices, DatasetOptions, DatasetSummary,
    PairRecord, PCA_FILE,
};
pub use render::{render_video, AudioSource, RenderFrame, RenderManifest, RenderOptions, RENDER_MANIFEST_FILE};
pub use train::{train_inpainter_from_dir, train_keypoints_from_dir};
pub use verify::{verify_outputs, VerifyReport};

/// Output directory under construction; renamed onto `target` by [`Staging::commit`].
pub(crate) struct Staging {
    dir: tempfile::TempDir,
    target: PathBuf,
}

impl Staging {
    pub(crate) fn new(target: &Path) -> Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
        })
    }

    pub(crate) fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Replaces any existing `target` with the staged directory.
    pub(crate) fn commit(self) -> Result<()> {
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        let staged = self.dir.keep();
        std::fs::rename(&staged, &self.target).map_err(|e| {
            let _ = std::fs::remove_dir_all(&staged);
            Error::io(&self.target, e)
        })
    }
}

/// Writes `bytes` to a temporary sibling and renames it onto `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| Error::io(&parent, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Reads a file, mapping absence and emptiness to [`Error::MissingFile`].
pub(crate) fn read_text(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    if text.trim().is_empty() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(text)
}
