//! Fluency and diversity metrics for generated corpora.

pub mod kn;
pub mod metrics;

pub use kn::{perplexity, NgramLm};
pub use metrics::{avg_word_types, bleu, evaluate, MetricReport};
