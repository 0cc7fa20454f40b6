//! Audio-driven lip-sync synthesis.
//!
//! The pipeline turns speech into mouth keypoints and then into frames:
//!
//! 1. landmarks of every frame are normalized into a mouth-local frame
//!    ([`geometry`]) and the 20 mouth points are compressed with PCA ([`pca`]);
//! 2. log-mel features of 16 kHz audio ([`audio`]) drive a time-delayed LSTM
//!    that predicts PCA coefficients per video frame ([`predictor`]);
//! 3. predicted shapes are denormalized onto a target face, drawn as a mouth
//!    outline over the blanked mouth region ([`conditioner`]), and an L1-trained
//!    U-Net in-paints the mouth ([`inpaint`]).
//!
//! [`synth`] provides faces with exact ground-truth landmarks and [`pipeline`]
//! wires the stages to on-disk datasets, checkpoints and renders.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod checkpoint;
pub mod conditioner;
pub mod error;
pub mod geometry;
pub mod image;
pub mod inpaint;
pub mod optim;
pub mod pca;
pub mod pipeline;
pub mod predictor;
pub mod raster;
pub mod synth;
pub mod toy;
pub mod tts;

pub use error::{Error, Result};
pub use geometry::{
    denormalize, estimate_frame, mouth_shape, normalize, Landmarks68, MouthShape40, NormalizationParams,
    NormalizedFace, Point,
};
pub use image::Image;
pub use pca::{fit_pca, PcaBasis, PcaCoeffs};
