//! Resample → truncate → peak-normalize.

use super::resample::resample;
use super::{AudioClip, SignalError};

/// Keeps the first `floor(duration · rate)` samples.
pub fn truncate(clip: &AudioClip, duration: f64) -> Result<AudioClip, SignalError> {
    if clip.sample_rate == 0 {
        return Err(SignalError::InvalidRate);
    }
    // tolerate representation error in products like 1.125 · 2000
    let needed = (duration * clip.sample_rate as f64 + 1e-9).floor() as usize;
    if clip.samples.len() < needed {
        return Err(SignalError::TooShort {
            needed,
            got: clip.samples.len(),
        });
    }
    Ok(clip.with_samples(clip.samples[..needed].to_vec(), clip.sample_rate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub clip: AudioClip,
    /// All samples were zero; the clip is returned unchanged.
    pub silent: bool,
}

/// Divides by the peak magnitude so that `max |x| = 1`.
pub fn normalize_amplitude(clip: &AudioClip) -> Normalized {
    let peak = clip.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Normalized {
            clip: clip.clone(),
            silent: true,
        };
    }
    Normalized {
        clip: clip.with_samples(clip.samples.iter().map(|v| v / peak).collect(), clip.sample_rate),
        silent: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocessor {
    pub target_rate: u32,
    pub duration: f64,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            target_rate: 2000,
            duration: 1.125,
        }
    }
}

impl Preprocessor {
    pub fn output_len(&self) -> usize {
        (self.duration * self.target_rate as f64 + 1e-9).floor() as usize
    }

    pub fn run(&self, clip: &AudioClip) -> Result<Normalized, SignalError> {
        let r = resample(clip, self.target_rate)?;
        let t = truncate(&r, self.duration)?;
        Ok(normalize_amplitude(&t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        let c = AudioClip::new(vec![0.0; 6000], 2000);
        assert_eq!(truncate(&c, 1.125).unwrap().samples.len(), 2250);
        let c = AudioClip::new(vec![0.0; 2250], 2000);
        assert_eq!(truncate(&c, 1.125).unwrap(), c);
        let c = AudioClip::new(vec![0.0; 2000], 2000);
        assert!(matches!(
            truncate(&c, 1.125),
            Err(SignalError::TooShort { needed: 2250, got: 2000 })
        ));
    }

    #[test]
    fn peak_normalization() {
        let n = normalize_amplitude(&AudioClip::new(vec![2.0, -4.0, 1.0], 2000));
        assert_eq!(n.clip.samples, vec![0.5, -1.0, 0.25]);
        assert!(!n.silent);
        let again = normalize_amplitude(&n.clip);
        assert_eq!(again.clip, n.clip);
        let z = normalize_amplitude(&AudioClip::new(vec![0.0; 4], 2000));
        assert!(z.silent);
        assert_eq!(z.clip.samples, vec![0.0; 4]);
    }
}
