//! Error type shared across the analysis pipeline.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav error for {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),
    #[error("zero-length audio")]
    ZeroLengthAudio,
    #[error("invalid framing: {0}")]
    InvalidFraming(String),
    #[error("slice too short for feature analysis ({0} samples)")]
    SliceTooShort(usize),
    #[error("class {0} has no training vectors")]
    EmptyClass(u8),
    #[error("unknown bol code {0}")]
    UnknownBolCode(u32),
    #[error("unknown bol label `{0}`")]
    UnknownBolLabel(String),
    #[error("dictionary parse error at line {line}: {message}")]
    DictionaryParse { line: usize, message: String },
    #[error("no recognized bols in signal signature")]
    NoRecognizedBols,
    #[error("empty dictionary")]
    EmptyDictionary,
    #[error("signal too short for comb tempo estimation ({got:.2} s, need >= {need:.2} s)")]
    SignalTooShort { got: f64, need: f64 },
    #[error("no periodicity found in signal")]
    NoPeriodicity,
    #[error("LCS too short: contains {0} matched 1-beats, need >= 2")]
    LcsTooShort(usize),
    #[error("empty signal signature")]
    EmptySignature,
    #[error("tempo period {0} too small: wide window would be empty")]
    TempoTooSmall(f64),
    #[error("detected beats not strictly increasing at index {0}")]
    UnorderedBeats(usize),
    #[error("annotation parse error at line {line}: {message}")]
    AnnotationParse { line: usize, message: String },
    #[error("synthesis error: {0}")]
    Synth(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the failing pipeline stage, if tagged.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
