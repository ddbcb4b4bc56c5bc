//! Non-deep baseline features: audio decoding, log-mel spectrogram and the
//! Barwise TF matrix, plus temporal pooling of frame-level features to bars.

mod barwise;
mod mel;
mod wav;

pub use barwise::{barwise_tf, pool_barwise, DEFAULT_FRAMES_PER_BAR};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, MelConfig, Spectrogram};
pub use wav::{decode_audio, Audio};
