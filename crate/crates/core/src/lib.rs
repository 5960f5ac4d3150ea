//! Frame-level acoustic feature learning from discovered word pairs.
//!
//! The pipeline runs in stages, each one a module here:
//!
//! * [`features`]: MFCC extraction, CMVN, deltas and the feature archive format.
//! * [`alignment`]: dynamic time warping for frame alignment and word distances.
//! * [`pairing`]: pair lists, frame-level training items and a synthetic corpus.
//! * [`nn`]: dense feed-forward networks, backpropagation and optimizers.
//! * [`models`]: correspondence autoencoder, Triamese and CTriamese models.
//! * [`evaluation`]: same-different average precision and ABX error.
//! * [`trend`]: synthetic comparison of the models against raw features.

pub mod alignment;
pub mod digest;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod models;
pub mod nn;
pub mod pairing;
pub mod trend;

pub use alignment::{dtw_align, dtw_distance, AlignmentPath, Metric};
pub use error::{Error, Result};
pub use evaluation::{abx_error, same_different_ap, AbxItem, EvalReport, LabeledWord};
pub use features::{FeatureSequence, FeatureSet, SpeakerMap};
pub use models::{Checkpoint, Model, ModelKind, TrainConfig};
pub use pairing::{DiscoveredPair, FramePair, FrameQuadruplet, FrameTriplet, WordSegment};
