//! Real-time distraction alerts over a raw sample stream.

pub mod calibrate;
pub mod detector;

pub use calibrate::{calibrate_thresholds, evaluate_profile, window_f1, GridSpec, FEATURES};
pub use detector::{
    replay_session, stream_samples, window_features, AlertEvent, BandThresholds, CalibrationProfile, Combinator,
    DetectorState, Replay, TraceRow, DEFAULT_HOP_S, DEFAULT_REFRACTORY_S, DEFAULT_WINDOW_S,
};
