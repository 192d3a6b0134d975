//! Attention encoder-decoder: parameters, training, decoding and the
//! generation front ends.

pub mod beam;
pub mod generate;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use beam::{
    beam_decode, greedy_decode, rerank_duplication_penalty, Candidate, DuplicationPenalty, Hypothesis,
    DEFAULT_PARTICLES,
};
pub use generate::{
    inserted_once, retrieval_baseline, ClauseTable, DecodeConfig, GenerationMode, Generated, Generator,
};
pub use gradcheck::{gradient_check, GradCheckOutcome, GradCheckReport};
pub use model::{decode_step, encode_sequence, encode_source, GradientFault, StepOutput, TrainingExample};
pub use params::{Dims, Seq2SeqParams};
pub use train::{select_best, train, Adagrad, DevExample, EpochReport, TrainConfig};
