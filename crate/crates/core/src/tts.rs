//! Text-to-speech boundary.
//!
//! A real synthesizer plugs in through [`TtsAdapter`]. [`StubTts`] is a
//! deterministic tone generator: every character becomes a fixed-length sine
//! segment whose frequency identifies the character.

use crate::audio::{Waveform, TARGET_RATE};
use crate::error::{Error, Result};

pub trait TtsAdapter: Send + Sync {
    /// Speech for `text` at 16 kHz.
    fn synthesize(&self, text: &str) -> Result<Waveform>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct StubTts {
    pub char_secs: f64,
    pub amplitude: f64,
}

impl Default for StubTts {
    fn default() -> Self {
        StubTts {
            char_secs: 0.15,
            amplitude: 0.5,
        }
    }
}

impl StubTts {
    pub fn samples_per_char(&self) -> usize {
        (self.char_secs * f64::from(TARGET_RATE)).round() as usize
    }

    /// Tone frequency for a character, `None` for silence.
    ///
    /// Letters (case-folded) map to `220 + 110·i` Hz for `a` = 0 … `z` = 25,
    /// digits to `3190 + 110·d` Hz; everything else is silent.
    pub fn frequency(c: char) -> Option<f64> {
        let c = c.to_ascii_lowercase();
        match c {
            'a'..='z' => Some(220.0 + 110.0 * f64::from(c as u8 - b'a')),
            '0'..='9' => Some(3190.0 + 110.0 * f64::from(c as u8 - b'0')),
            _ => None,
        }
    }
}

impl TtsAdapter for StubTts {
    fn synthesize(&self, text: &str) -> Result<Waveform> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        let per = self.samples_per_char();
        let rate = f64::from(TARGET_RATE);
        let mut samples = Vec::with_capacity(per * text.chars().count());
        for c in text.chars() {
            match Self::frequency(c) {
                Some(f) => samples.extend(
                    (0..per).map(|i| self.amplitude * (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin()),
                ),
                None => samples.extend(std::iter::repeat_n(0.0, per)),
            }
        }
        Ok(Waveform::new(samples, TARGET_RATE))
    }
}
