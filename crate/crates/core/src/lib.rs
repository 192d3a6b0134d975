//! Modifier-clause augmentation toolkit.
//!
//! Turns dependency-parsed complex sentences into pseudo-parallel
//! simple/complex pairs, trains attention encoder-decoders that add a
//! modifier clause to a simple sentence, and scores generated corpora with
//! modified Kneser-Ney perplexity, word-type counts and BLEU.
//!
//! ```
//! use clausegen::chunk::{sentence_from_parts, Pos::*};
//! use clausegen::extract::find_modifier_candidates;
//!
//! let s = sentence_from_parts("s1", &[
//!     (&[("彼", NounGeneral), ("に", Particle)], 1),
//!     (&[("借り", Verb), ("た", Other)], 2),
//!     (&[("車", NounGeneral), ("に", Particle)], 3),
//!     (&[("乗り", Verb), ("ました", Other)], -1),
//! ]);
//! let clauses = find_modifier_candidates(&s);
//! assert_eq!(clauses[0].surfaces(&s), ["彼", "に", "借り", "た"]);
//! ```

pub mod chunk;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extract;
pub mod generator;
pub mod mark;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
