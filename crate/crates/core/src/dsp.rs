//! FFT plumbing and small DSP building blocks shared by the link models.
//!
//! Every record handled here is treated as one period of a periodic
//! waveform, so filtering is circular (steady-state) rather than linear.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Keyed by (record length, rate bits, cutoff bits).
type LpfCache = HashMap<(usize, u64, u64), Arc<Vec<f64>>>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static LPF_CACHE: RefCell<LpfCache> = RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place forward DFT, no scaling.
pub fn fft(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// In-place inverse DFT, scaled by 1/N so that `ifft(fft(x)) == x`.
pub fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    if n > 1 {
        plan(n, true).process(buf);
    }
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency of DFT bin `k` for a length-`n` record at `fs`.
#[inline]
pub fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k * fs / n as f64
}

/// Forward DFT of a real sequence.
pub fn real_spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    buf
}

/// Band-limited interpolation of a periodic real record by an integer factor.
///
/// Exact for signals whose content lies strictly below the original Nyquist
/// frequency. An even-length Nyquist bin is split between the two new bins.
pub fn upsample_periodic(x: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1, "upsampling factor must be positive");
    if factor == 1 {
        return x.to_vec();
    }
    let n = x.len();
    let m = n * factor;
    let spec = real_spectrum(x);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..n {
        if n.is_multiple_of(2) && k == half {
            out[half] += spec[k] * 0.5;
            out[m - half] += spec[k] * 0.5;
        } else if k < half || (n % 2 == 1 && k == half) {
            out[k] = spec[k];
        } else {
            out[m - (n - k)] = spec[k];
        }
    }
    ifft(&mut out);
    out.iter().map(|c| c.re * factor as f64).collect()
}

/// Highest frequency (Hz) of a real record, defined as the lowest frequency
/// above which at most `1e-6` of the one-sided energy lies.
pub fn spectral_extent(x: &[f64], fs: f64) -> f64 {
    const TAIL_FRACTION: f64 = 1e-6;
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let spec = real_spectrum(x);
    let half = n / 2;
    let power: Vec<f64> = (0..=half)
        .map(|k| {
            let w = if k == 0 || (n.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            w * spec[k].norm_sqr()
        })
        .collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    for k in (0..=half).rev() {
        tail += power[k];
        if tail > TAIL_FRACTION * total {
            return k as f64 * fs / n as f64;
        }
    }
    0.0
}

/// Zero-phase frequency response of a Blackman-windowed-sinc low-pass FIR of
/// cutoff `cutoff_hz` (-6 dB point), sized for a transition band of about half
/// the cutoff and applied with its group delay removed.
///
/// Returned per DFT bin of a length-`n` record; cached per thread.
pub fn lowpass_response(n: usize, fs: f64, cutoff_hz: f64) -> Arc<Vec<f64>> {
    let key = (n, fs.to_bits(), cutoff_hz.to_bits());
    if let Some(hit) = LPF_CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return hit;
    }
    let taps = lowpass_taps(n, fs, cutoff_hz);
    let half = (taps.len() - 1) / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &h) in taps.iter().enumerate() {
        let idx = (i + n - half) % n;
        buf[idx] += Complex64::new(h, 0.0);
    }
    fft(&mut buf);
    let resp = Arc::new(buf.iter().map(|c| c.re).collect::<Vec<f64>>());
    LPF_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() > 64 {
            c.clear();
        }
        c.insert(key, resp.clone());
    });
    resp
}

/// Odd-length Blackman-windowed-sinc taps with unit DC gain.
pub fn lowpass_taps(max_len: usize, fs: f64, cutoff_hz: f64) -> Vec<f64> {
    let fc = cutoff_hz / fs;
    let mut len = (11.0 / fc).ceil() as usize;
    len = len.min(max_len.max(1));
    if len.is_multiple_of(2) {
        len = len.saturating_sub(1).max(1);
    }
    let half = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let m = i as f64 - half;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            let w = if len == 1 {
                1.0
            } else {
                let r = i as f64 / (len - 1) as f64;
                0.42 - 0.5 * (2.0 * PI * r).cos() + 0.08 * (4.0 * PI * r).cos()
            };
            sinc * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= dc;
    }
    taps
}

/// Circular zero-phase low-pass of a real record.
pub fn lowpass_periodic(x: &[f64], fs: f64, cutoff_hz: f64) -> Vec<f64> {
    let n = x.len();
    let resp = lowpass_response(n, fs, cutoff_hz);
    let mut spec = real_spectrum(x);
    for (v, &h) in spec.iter_mut().zip(resp.iter()) {
        *v *= h;
    }
    ifft(&mut spec);
    spec.iter().map(|c| c.re).collect()
}

/// Keep every `factor`-th sample starting at 0. The caller guarantees the
/// record is already band-limited below the new Nyquist frequency.
pub fn decimate(x: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1, "decimation factor must be positive");
    x.iter().step_by(factor).copied().collect()
}

/// Derive an independent, reproducible RNG seed for work item `index`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fractional part of a cycle count, turned into a phase in radians.
#[inline]
pub fn cycles_to_phase(cycles: f64) -> f64 {
    2.0 * PI * (cycles - cycles.floor())
}
