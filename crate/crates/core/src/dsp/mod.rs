//! Spectral and wavelet feature extraction.

pub mod features;
pub mod spectrum;
pub mod wavelet;

pub use features::{build_feature_vector, dwt_features, extract_features, feature_schema};
pub use spectrum::{
    band_powers, band_powers_fft, periodogram, stft_spectrogram, Band, BandDefinition, Spectrogram,
    BANDS,
};
pub use wavelet::{dwt_db8, idwt_db8, Extension, WaveletDecomposition};
