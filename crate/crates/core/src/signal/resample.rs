//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use super::{AudioClip, SignalError};

pub const TAPS_PER_PHASE: usize = 64;
pub const KAISER_BETA: f64 = 8.6;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// One filter per phase. Tap `j` of phase `p` weights the input sample
/// `p/up + 31 − j` samples before the output instant.
fn phase_bank(up: usize, cutoff: f64) -> Vec<[f64; TAPS_PER_PHASE]> {
    let half = (TAPS_PER_PHASE / 2) as f64;
    let norm = bessel_i0(KAISER_BETA);
    (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            let mut taps = [0.0; TAPS_PER_PHASE];
            for (j, tap) in taps.iter_mut().enumerate() {
                let tau = frac + (half - 1.0) - j as f64;
                let r = tau / half;
                let w = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
                };
                *tap = cutoff * sinc(cutoff * tau) * w;
            }
            let dc: f64 = taps.iter().sum();
            for t in taps.iter_mut() {
                *t /= dc;
            }
            taps
        })
        .collect()
}

/// Output length is `round(len · target / source)`; equal rates return the
/// input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, SignalError> {
    if target_rate == 0 || clip.sample_rate == 0 {
        return Err(SignalError::InvalidRate);
    }
    if clip.samples.is_empty() {
        return Err(SignalError::EmptyClip);
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let g = gcd(target_rate as u64, clip.sample_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (clip.sample_rate as u64 / g) as usize;
    let cutoff = (up as f64 / down as f64).min(1.0);
    let bank = phase_bank(up, cutoff);

    let len = clip.samples.len();
    let out_len = ((len as u128 * up as u128 + down as u128 / 2) / down as u128) as usize;
    let x = &clip.samples;
    let half = TAPS_PER_PHASE / 2;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n * down;
        let base = pos / up;
        let taps = &bank[pos % up];
        // taps[j] multiplies x[base − (half − 1) + j]
        let mut acc = 0.0;
        for (j, &t) in taps.iter().enumerate() {
            let idx = base as isize + j as isize - (half as isize - 1);
            if idx >= 0 && (idx as usize) < len {
                acc += t * x[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(clip.with_samples(out, target_rate))
}
