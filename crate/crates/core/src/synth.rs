//! Synthetic machine sounds for demos and tests.
//!
//! Normal clips are stationary: low-passed noise plus a harmonic hum.
//! Anomalous clips are the same process with a few short tone bursts, which
//! barely move band averages but dominate band maxima.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::AudioClip;
use crate::error::Result;
use crate::pipeline::{split_dir, Domain, MachineType, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMachine {
    pub sample_rate: u32,
    pub duration_secs: f64,
    pub noise_level: f64,
    /// Low-pass pole of the noise filter, in `[0, 1)`.
    pub noise_pole: f64,
    pub hum_hz: f64,
    pub hum_level: f64,
    pub burst_hz: f64,
    pub burst_ms: f64,
    pub burst_level: f64,
    pub bursts_per_clip: usize,
    /// Target-domain hum frequency multiplier.
    pub target_hum_ratio: f64,
    /// Target-domain amplitude multiplier.
    pub target_gain: f64,
}

impl Default for SyntheticMachine {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            duration_secs: 1.0,
            noise_level: 0.05,
            noise_pole: 0.6,
            hum_hz: 120.0,
            hum_level: 0.03,
            burst_hz: 3_000.0,
            burst_ms: 30.0,
            burst_level: 0.3,
            bursts_per_clip: 1,
            target_hum_ratio: 1.03,
            target_gain: 1.2,
        }
    }
}

impl SyntheticMachine {
    fn n_samples(&self) -> usize {
        (self.duration_secs * f64::from(self.sample_rate)).round() as usize
    }

    fn base(&self, rng: &mut ChaCha8Rng, domain: Domain) -> Vec<f64> {
        let n = self.n_samples();
        let sr = f64::from(self.sample_rate);
        let (hum_hz, gain) = match domain {
            Domain::Source => (self.hum_hz, 1.0),
            Domain::Target => (self.hum_hz * self.target_hum_ratio, self.target_gain),
        };
        let phase: f64 = rng.random::<f64>() * 2.0 * PI;
        let mut state = 0.0;
        (0..n)
            .map(|i| {
                let white: f64 = StandardNormal.sample(rng);
                state = self.noise_pole * state + (1.0 - self.noise_pole) * white;
                let t = i as f64 / sr;
                let hum: f64 = (1..=3)
                    .map(|h| (2.0 * PI * hum_hz * h as f64 * t + phase * h as f64).sin() / h as f64)
                    .sum();
                gain * (self.noise_level * state * 4.0 + self.hum_level * hum)
            })
            .collect()
    }

    pub fn normal_clip(&self, rng: &mut ChaCha8Rng, domain: Domain) -> AudioClip {
        AudioClip::new(self.base(rng, domain), self.sample_rate).expect("finite samples")
    }

    pub fn anomalous_clip(&self, rng: &mut ChaCha8Rng, domain: Domain) -> AudioClip {
        let mut samples = self.base(rng, domain);
        let sr = f64::from(self.sample_rate);
        let len = ((self.burst_ms / 1000.0) * sr).round() as usize;
        let len = len.clamp(1, samples.len());
        for _ in 0..self.bursts_per_clip {
            let start = rng.random_range(0..=samples.len() - len);
            let phase: f64 = rng.random::<f64>() * 2.0 * PI;
            for j in 0..len {
                let env = 0.5 - 0.5 * (2.0 * PI * j as f64 / len as f64).cos();
                let t = j as f64 / sr;
                samples[start + j] +=
                    self.burst_level * env * (2.0 * PI * self.burst_hz * t + phase).sin();
            }
        }
        AudioClip::new(samples, self.sample_rate).expect("finite samples")
    }
}

/// How many clips of each kind to write per section.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayout {
    pub sections: Vec<u8>,
    pub train_source: usize,
    pub train_target: usize,
    /// Normal and anomalous test clips per domain.
    pub test_per_class: usize,
}

impl Default for SyntheticLayout {
    fn default() -> Self {
        Self {
            sections: vec![0],
            train_source: 200,
            train_target: 10,
            test_per_class: 20,
        }
    }
}

/// Writes `<root>/<machine>/{train,test}` with dataset-style file names.
///
/// Each section shifts the hum frequency so sections differ.
pub fn write_dataset(
    root: &Path,
    machine: &MachineType,
    base: &SyntheticMachine,
    layout: &SyntheticLayout,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_dir = split_dir(root, machine, Split::Train);
    let test_dir = split_dir(root, machine, Split::Test);
    std::fs::create_dir_all(&train_dir)?;
    std::fs::create_dir_all(&test_dir)?;
    for &section in &layout.sections {
        let m = SyntheticMachine {
            hum_hz: base.hum_hz * (1.0 + 0.25 * f64::from(section)),
            ..base.clone()
        };
        let mut id = 0;
        for (domain, count) in [
            (Domain::Source, layout.train_source),
            (Domain::Target, layout.train_target),
        ] {
            for _ in 0..count {
                let name =
                    format!("section_{section:02}_{domain}_train_normal_{id:04}_synthetic.wav");
                m.normal_clip(&mut rng, domain)
                    .write_wav(train_dir.join(name))?;
                id += 1;
            }
        }
        for domain in [Domain::Source, Domain::Target] {
            for i in 0..layout.test_per_class {
                let name =
                    format!("section_{section:02}_{domain}_test_normal_{i:04}_synthetic.wav");
                m.normal_clip(&mut rng, domain)
                    .write_wav(test_dir.join(name))?;
                let name =
                    format!("section_{section:02}_{domain}_test_anomaly_{i:04}_synthetic.wav");
                m.anomalous_clip(&mut rng, domain)
                    .write_wav(test_dir.join(name))?;
            }
        }
    }
    Ok(())
}
