//! Audio front end: WAV ingestion, framed power spectra, and log-Mel energies.

mod mel;
mod stft;
mod wav;

pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, LogMelExtractor, LogMelSpectrogram};
pub use stft::{frame_count, power_spectrogram, SpectrogramConfig, WindowKind};
pub use wav::{load_wav, AudioClip};
