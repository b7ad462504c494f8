//! Wake-word detection toolkit: whole-word HMM graphs trained with
//! alignment-free LF-MMI, a compact factorized TDNN acoustic model, and an
//! online Viterbi decoder with immortal-token partial backtracking.
//!
//! The pipeline runs from raw 16 kHz PCM to detection events:
//!
//! 1. [`corpus`] ingests manifests, sub-segments long negative recordings and
//!    applies SNR-controlled augmentation.
//! 2. [`features`] extracts 40-dimensional MFCCs.
//! 3. [`graphs`] builds the HMM topologies, the phone-LM prior, and the
//!    numerator / denominator / decoding graphs.
//! 4. [`lfmmi`] computes the forward-backward statistics, the LF-MMI loss and
//!    its exact gradients, plus the cross-entropy regularizer.
//! 5. [`am`] is the 20-layer factorized TDNN (~150k parameters, 3x frame
//!    subsampling, two heads).
//! 6. [`trainer`] runs mini-batch training, alignment export and the regular
//!    LF-MMI refinement stage.
//! 7. [`decoder`] performs streaming token-passing beam search.
//! 8. [`eval`] computes FRR/FAH and DET sweeps.
//!
//! Batch-level inner loops (feature extraction, per-utterance gradients,
//! sweep decodes) go through [`par::map_slice`], which is backed by rayon
//! when the default `parallel` feature is enabled and falls back to a plain
//! sequential loop otherwise. Results are order-preserving either way, so
//! outputs are identical across both modes.

pub mod am;
pub mod corpus;
pub mod decoder;
pub mod eval;
pub mod features;
pub mod graphs;
pub mod lfmmi;
pub mod par;
pub mod synth;
pub mod trainer;
pub mod wav;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid wav file {path}: {msg}")]
    Wav { path: PathBuf, msg: String },
    #[error("feature extraction: {0}")]
    Features(String),
    #[error("graph construction: {0}")]
    Graph(String),
    #[error("forward-backward: {0}")]
    ForwardBackward(String),
    #[error("no path accepted by the graph (total = -inf){}", .utt.as_deref().map(|u| format!(" for utterance {u}")).unwrap_or_default())]
    NoPath { utt: Option<String> },
    #[error("acoustic model: {0}")]
    Model(String),
    #[error("training: {0}")]
    Train(String),
    #[error("decoding: {0}")]
    Decode(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Audio sample rate assumed throughout the crate.
pub const SAMPLE_RATE: u32 = 16_000;

/// Frame shift of the MFCC frontend in seconds.
pub const FRAME_SHIFT_S: f64 = 0.010;

/// Acoustic model frame subsampling factor.
pub const SUBSAMPLE: usize = 3;

/// Seconds per subsampled (acoustic-model output) frame.
pub const SUBFRAME_S: f64 = FRAME_SHIFT_S * SUBSAMPLE as f64;
