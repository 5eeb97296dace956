//! Seeded synthetic phonocardiograms.
//!
//! Each clip is a train of S1 (30–45 Hz) and S2 (50–70 Hz) tone bursts at a
//! cardiac period drawn from 0.6–1.0 s, starting at a random cardiac phase,
//! with a class-specific murmur and white Gaussian noise at 20 dB SNR:
//!
//! * `N`: no murmur
//! * `AS`: crescendo–decrescendo systolic murmur, 150–300 Hz
//! * `MR`: flat holosystolic murmur, 300–500 Hz
//! * `MS`: diastolic rumble, 40–100 Hz, with presystolic accentuation
//! * `MVP`: mid-systolic click followed by a late systolic murmur, 200–400 Hz

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::Dataset;
use super::preprocess::Preprocessor;
use super::{AudioClip, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynthClass {
    As,
    Mr,
    Ms,
    Mvp,
    N,
}

impl SynthClass {
    /// Lexicographic order, matching dataset label indices.
    pub const ALL: [SynthClass; 5] = [SynthClass::As, SynthClass::Mr, SynthClass::Ms, SynthClass::Mvp, SynthClass::N];

    pub fn name(self) -> &'static str {
        match self {
            SynthClass::As => "AS",
            SynthClass::Mr => "MR",
            SynthClass::Ms => "MS",
            SynthClass::Mvp => "MVP",
            SynthClass::N => "N",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SynthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthClass {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SynthClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| SignalError::UnknownClass(s.to_string()))
    }
}

/// Timing of one cardiac cycle, in seconds from the clip start (the first
/// beat may begin before the clip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beat {
    pub s1_onset: f64,
    pub s2_onset: f64,
    pub period: f64,
}

const S1_LEN: f64 = 0.10;
const S2_LEN: f64 = 0.08;
const SNR_DB: f64 = 20.0;
const PEAK: f64 = 0.9;

/// Band-limited noise as a sum of random-phase sinusoids, unit RMS.
fn band_noise(rng: &mut ChaCha8Rng, lo: f64, hi: f64, rate: f64, len: usize) -> Vec<f64> {
    const COMPONENTS: usize = 48;
    let comps: Vec<(f64, f64)> = (0..COMPONENTS)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let scale = (2.0 / COMPONENTS as f64).sqrt();
    (0..len)
        .map(|i| {
            let t = i as f64 / rate;
            scale * comps.iter().map(|&(f, p)| (2.0 * PI * f * t + p).sin()).sum::<f64>()
        })
        .collect()
}

/// Adds `amp · env(u) · src[i]` for `u ∈ [0, 1)` across `[start, end)` seconds.
fn add_shaped(out: &mut [f64], src: &[f64], rate: f64, start: f64, end: f64, amp: f64, env: impl Fn(f64) -> f64) {
    if end <= start {
        return;
    }
    let a = (start * rate).ceil().max(0.0) as usize;
    let b = ((end * rate).ceil().max(0.0) as usize).min(out.len());
    for i in a..b {
        let u = (i as f64 / rate - start) / (end - start);
        out[i] += amp * env(u) * src[i];
    }
}

fn burst(out: &mut [f64], rate: f64, start: f64, len: f64, freq: f64, amp: f64) {
    let a = (start * rate).ceil().max(0.0) as usize;
    let b = (((start + len) * rate).ceil().max(0.0) as usize).min(out.len());
    for i in a..b {
        let t = i as f64 / rate - start;
        let env = (PI * t / len).sin().powi(2);
        out[i] += amp * env * (2.0 * PI * freq * t).sin();
    }
}

fn edges(u: f64) -> f64 {
    (u / 0.08).min((1.0 - u) / 0.08).clamp(0.0, 1.0)
}

pub fn synth_pcg_annotated(
    class: SynthClass,
    seed: u64,
    rate: u32,
    duration: f64,
) -> Result<(AudioClip, Vec<Beat>), SignalError> {
    if rate == 0 {
        return Err(SignalError::InvalidRate);
    }
    let len = (duration * rate as f64 + 1e-9).floor() as usize;
    if len == 0 {
        return Err(SignalError::EmptyClip);
    }
    let fs = rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (class.index() + 1));
    let period = rng.random_range(0.6..1.0);
    let systole = 0.35 * period;
    let f1 = rng.random_range(30.0..45.0);
    let f2 = rng.random_range(50.0..70.0);
    let s2_amp = rng.random_range(0.6..0.9);
    let first = -rng.random_range(0.0..period);

    let mut beats = Vec::new();
    let mut t = first;
    while t < duration {
        beats.push(Beat {
            s1_onset: t,
            s2_onset: t + systole,
            period,
        });
        t += period;
    }

    let mut x = vec![0.0; len];
    for b in &beats {
        burst(&mut x, fs, b.s1_onset, S1_LEN, f1, 1.0);
        burst(&mut x, fs, b.s2_onset, S2_LEN, f2, s2_amp);
    }

    let murmur: Option<(f64, f64)> = match class {
        SynthClass::N => None,
        SynthClass::As => Some((150.0, 300.0)),
        SynthClass::Mr => Some((300.0, 500.0)),
        SynthClass::Ms => Some((40.0, 100.0)),
        SynthClass::Mvp => Some((200.0, 400.0)),
    };
    if let Some((lo, hi)) = murmur {
        let noise = band_noise(&mut rng, lo, hi.min(0.45 * fs), fs, len);
        let amp = rng.random_range(0.35..0.5);
        for b in &beats {
            let (s1, s2) = (b.s1_onset, b.s2_onset);
            match class {
                SynthClass::As => add_shaped(&mut x, &noise, fs, s1 + 0.06, s2, amp, |u| 1.0 - (2.0 * u - 1.0).abs()),
                SynthClass::Mr => add_shaped(&mut x, &noise, fs, s1 + 0.04, s2 + 0.02, amp * 0.8, edges),
                SynthClass::Ms => add_shaped(&mut x, &noise, fs, s2 + 0.12, s1 + b.period, amp, |u| {
                    let decay = (1.0 - u) * 0.7;
                    let presystolic = ((u - 0.75) / 0.25).clamp(0.0, 1.0);
                    (decay + presystolic).min(1.0) * edges(u)
                }),
                SynthClass::Mvp => {
                    let click = s1 + 0.5 * systole;
                    burst(&mut x, fs, click, 0.015, 180.0, 0.7);
                    add_shaped(&mut x, &noise, fs, click + 0.02, s2, amp, |u| u.min(1.0) * edges(u))
                }
                SynthClass::N => {}
            }
        }
    }

    let power = x.iter().map(|v| v * v).sum::<f64>() / len as f64;
    let sigma = (power / 10f64.powf(SNR_DB / 10.0)).sqrt();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    let mut clip = AudioClip::new(x, rate);
    clip.label = Some(class.name().to_string());
    clip.source_id = format!("synth:{}:{seed}", class.name());
    Ok((clip, beats))
}

/// Deterministic per `(class, seed, rate, duration)`.
pub fn synth_pcg(class: &str, seed: u64, rate: u32, duration: f64) -> Result<AudioClip, SignalError> {
    synth_pcg_annotated(class.parse()?, seed, rate, duration).map(|(c, _)| c)
}

/// Seed of the `index`-th clip of a class in a collection seeded with `seed`;
/// distinct collection seeds never share clips below 2³² clips per class.
pub fn clip_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_shl(32).wrapping_add(index)
}

/// `per_class` clips of every class, synthesized at `rate` for `duration`
/// seconds and passed through `pre`.
pub fn synth_dataset(
    per_class: usize,
    seed: u64,
    rate: u32,
    duration: f64,
    pre: &Preprocessor,
) -> Result<Dataset, SignalError> {
    let mut clips = Vec::with_capacity(per_class * SynthClass::ALL.len());
    for class in SynthClass::ALL {
        for i in 0..per_class as u64 {
            let (raw, _) = synth_pcg_annotated(class, clip_seed(seed, i), rate, duration)?;
            let mut clip = pre.run(&raw)?.clip;
            clip.label = raw.label;
            clip.source_id = raw.source_id;
            clips.push(clip);
        }
    }
    let names: Vec<String> = SynthClass::ALL.iter().map(|c| c.name().to_string()).collect();
    Dataset::from_clips(clips, &names)
}
