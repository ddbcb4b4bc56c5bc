use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{invalid, Result};

/// Short-time spectrum, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Array2<f64>,
    hop_seconds: f64,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn new(frames: Array2<f64>, hop_seconds: f64, sample_rate: u32) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return invalid(format!("empty spectrogram {:?}", frames.dim()));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return invalid("spectrogram contains a non-finite entry");
        }
        if hop_seconds.is_nan() || hop_seconds <= 0.0 {
            return invalid(format!("hop must be positive, got {hop_seconds}"));
        }
        Ok(Self {
            frames,
            hop_seconds,
            sample_rate,
        })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_seconds
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Center time of frame `t`.
    pub fn frame_time(&self, t: usize) -> f64 {
        t as f64 * self.hop_seconds
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            n_mels: 80,
        }
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style filterbank (`n_mels × (n_fft/2 + 1)`) spanning
/// 0 Hz to Nyquist, each triangle peaking at 1.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Array2<f64> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = f64::from(sample_rate) / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate) / n_fft as f64;

    let mut fb = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            fb[[m, k]] = rising.min(falling).max(0.0);
        }
    }
    fb
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirrors the signal around its first and last sample (edge excluded).
fn reflect_pad(samples: &[f64], pad: usize) -> Vec<f64> {
    let n = samples.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| samples[i]));
    out.extend_from_slice(samples);
    out.extend((0..pad).map(|i| samples[n - 2 - i]));
    out
}

/// `log(1 + mel(|STFT|))` with a Hann window; frame `t` is centered at
/// sample `t·hop` of the reflect-padded signal.
pub fn log_mel(samples: &[f64], sample_rate: u32, config: MelConfig) -> Result<Spectrogram> {
    let MelConfig { n_fft, hop, n_mels } = config;
    if n_fft < 2 || hop == 0 || n_mels == 0 || sample_rate == 0 {
        return invalid(format!("bad mel configuration {config:?} at {sample_rate} Hz"));
    }
    if samples.len() < n_fft {
        return invalid(format!(
            "signal of {} samples is shorter than n_fft = {n_fft}",
            samples.len()
        ));
    }

    let padded = reflect_pad(samples, n_fft / 2);
    let n_frames = 1 + samples.len() / hop;
    let window = periodic_hann(n_fft);
    let fb = mel_filterbank(sample_rate, n_fft, n_mels);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);

    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut magnitude = vec![0.0; n_fft / 2 + 1];
    let mut frames = Array2::zeros((n_frames, n_mels));
    for t in 0..n_frames {
        let start = t * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, m) in magnitude.iter_mut().enumerate() {
            *m = buf[k].norm();
        }
        for m in 0..n_mels {
            let energy: f64 = fb.row(m).iter().zip(&magnitude).map(|(w, x)| w * x).sum();
            frames[[t, m]] = energy.ln_1p();
        }
    }
    Spectrogram::new(frames, hop as f64 / f64::from(sample_rate), sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amplitude: f64, sr: u32, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(sr)).sin())
            .collect()
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 440.0, 1000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.9855).abs() < 1e-3);
    }

    #[test]
    fn silence_is_zero() {
        let spec = log_mel(&vec![0.0; 8192], 22050, MelConfig::default()).unwrap();
        assert_eq!(spec.n_bins(), 80);
        assert_eq!(spec.n_frames(), 1 + 8192 / 512);
        assert!(spec.frames().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_signal_rejected() {
        assert!(log_mel(&[0.0; 100], 22050, MelConfig::default()).is_err());
    }

    #[test]
    fn tone_at_band_center_peaks_in_that_band() {
        let sr = 22050;
        let n_mels = 80;
        for band in [20usize, 40, 60] {
            // Center frequency of band m is the (m+1)-th of n_mels+2 equally
            // spaced points on the HTK mel axis between 0 and Nyquist.
            let mel_max = 2595.0 * (1.0 + 11025.0 / 700.0f64).log10();
            let center_mel = mel_max * (band + 1) as f64 / (n_mels + 1) as f64;
            let center_hz = 700.0 * (10f64.powf(center_mel / 2595.0) - 1.0);
            let spec = log_mel(&tone(center_hz, 0.5, sr, sr as usize), sr, MelConfig::default())
                .unwrap();
            for t in 0..spec.n_frames() {
                let row = spec.frames().row(t);
                let argmax = (0..n_mels)
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                    .unwrap();
                assert_eq!(argmax, band, "frame {t}, center {center_hz} Hz");
            }
        }
    }

    #[test]
    fn louder_signal_never_lowers_an_entry() {
        let sr = 22050;
        let x = tone(523.25, 0.3, sr, 6000);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = log_mel(&x, sr, MelConfig::default()).unwrap();
        let b = log_mel(&x2, sr, MelConfig::default()).unwrap();
        for (lo, hi) in a.frames().iter().zip(b.frames()) {
            assert!(hi >= lo);
        }
    }

    #[test]
    fn filterbank_triangles_are_bounded() {
        let fb = mel_filterbank(22050, 2048, 80);
        assert_eq!(fb.dim(), (80, 1025));
        assert!(fb.iter().all(|&w| (0.0..=1.0).contains(&w)));
        for m in 0..80 {
            assert!(fb.row(m).iter().any(|&w| w > 0.0), "empty band {m}");
        }
    }

    #[test]
    fn reflect_padding_matches_numpy_convention() {
        assert_eq!(reflect_pad(&[1.0, 2.0, 3.0, 4.0], 2), vec![3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0]);
    }
}
