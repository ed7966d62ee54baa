//! Structural analysis of Sollukattu recordings: silence segmentation, bol
//! recognition with MFCC features and Gaussian mixtures, Sollukattu
//! recognition by edit distance, tempo-period estimation and beat marking.

pub mod audio;
pub mod beatmark;
pub mod bol;
pub mod dsp;
pub mod error;
pub mod features;
pub mod gmm;
pub mod pipeline;
pub mod segment;
pub mod signatures;
pub mod synth;
pub mod tempo;

pub use audio::{frame_energy, frame_signal, load_wav, spectral_centroid, write_wav, AudioSignal};
pub use beatmark::{
    energy_classes, evaluate, mark_beats, overlap_beats, BeatEvent, DetectedBeats, MarkedBeat,
    MarkedBol, MatchScores,
};
pub use bol::BolClass;
pub use error::{Error, Result};
pub use features::{mfcc, FeatureSequence, FeatureVector, MfccParams};
pub use gmm::{classify, em_train, GmmModel};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use segment::{histogram_threshold, segment_by_silence, NonSilentSlice};
pub use signatures::{
    build_signal_signature, extend_signature, levenshtein, longest_common_substring,
    recognize_sollukattu, BeatType, BolEvent, EnergyClass, Recognition, SignalSignature,
    SollukattuSignature,
};
pub use synth::{synthesize, SynthOutput, SynthParams, SynthSpec};
pub use tempo::{comb_tempo, detect_onsets, lcs_tempo, select_tempo, TempoEstimate, TempoMethod};
