//! Run configuration: command-line flags override a flat `key = value`
//! config file, which overrides the built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

/// Bad flags, config keys or config values. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    End2end,
    Pipeline,
    /// Training-clause lookup; generation only.
    Retrieval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// The pipeline model emits the whole complex sentence.
    Full,
    /// The pipeline model emits only the clause.
    Clause,
}

macro_rules! run_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr, $key:literal $(, [$($extra:tt)*])?; )*) => {
        /// Fully resolved settings, recorded verbatim in every manifest.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct RunConfig {
            $( $(#[$doc])* pub $field: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $field: $default, )* }
            }
        }

        /// Settings accepted on the command line (after any subcommand too).
        #[derive(Debug, Clone, Default, Args)]
        pub struct Overrides {
            $( $(#[$doc])* #[arg(long = $key, global = true $(, $($extra)*)?)] pub $field: Option<$ty>, )*
        }

        pub const CONFIG_KEYS: &[&str] = &[$($key),*];

        impl RunConfig {
            /// Flags beat the config file, which beats the defaults.
            pub fn resolve(flags: &Overrides, file: &ConfigFile) -> Result<Self> {
                let mut config = RunConfig::default();
                $(
                    if let Some(v) = flags.$field.clone() {
                        config.$field = v;
                    } else if let Some(v) = file.get::<$ty>($key)? {
                        config.$field = v;
                    }
                )*
                config.validate()?;
                Ok(config)
            }
        }
    };
}

run_config! {
    /// Seed for every random decision.
    seed: u64 = 0, "seed";
    mode: Mode = Mode::Pipeline, "mode";
    /// What marked training pairs ask the model to emit.
    target: Target = Target::Full, "target";
    beam_width: usize = 10, "beam-width";
    /// Duplication penalty applied when re-ranking the beam.
    dup_lambda: f64 = 0.0, "dup-lambda";
    ngram_order: usize = 4, "ngram-order";
    vocab_cap: usize = 10_000, "vocab-cap";
    embed_dim: usize = 512, "embed-dim";
    hidden_dim: usize = 512, "hidden-dim";
    batch_size: usize = 128, "batch-size";
    lr: f64 = 0.01, "lr";
    epochs: usize = 20, "epochs";
    /// Candidates kept per generated sentence.
    nbest: usize = 1, "nbest";
    /// Fail on the first malformed input line instead of skipping it.
    strict: bool = false, "strict", [num_args = 0..=1, default_missing_value = "true"];
    dev_size: usize = 1000, "dev-size";
    test_size: usize = 1000, "test-size";
    /// Training worker threads; results are reproducible per value.
    threads: usize = 1, "threads";
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let at_least_one = [
            ("beam-width", self.beam_width),
            ("ngram-order", self.ngram_order),
            ("embed-dim", self.embed_dim),
            ("hidden-dim", self.hidden_dim),
            ("batch-size", self.batch_size),
            ("epochs", self.epochs),
            ("nbest", self.nbest),
            ("threads", self.threads),
        ];
        for (key, v) in at_least_one {
            if v == 0 {
                return Err(usage(format!("{key}: must be at least 1")));
            }
        }
        if self.vocab_cap < 6 {
            return Err(usage("vocab-cap: must be at least 6 (the reserved tokens)"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(usage(format!("lr: must be a positive number, got {}", self.lr)));
        }
        if !(self.dup_lambda.is_finite() && self.dup_lambda >= 0.0) {
            return Err(usage(format!("dup-lambda: must be non-negative, got {}", self.dup_lambda)));
        }
        Ok(())
    }
}

/// Parsed `key = value` lines; `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(usage(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn get<T: FromValue>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| T::from_value(v).map_err(|e| usage(format!("{key}: invalid value `{v}`: {e}"))))
            .transpose()
    }
}

trait FromValue: Sized {
    fn from_value(s: &str) -> std::result::Result<Self, String>;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl FromValue for $t {
            fn from_value(s: &str) -> std::result::Result<Self, String> {
                <$t as FromStr>::from_str(s).map_err(|e| e.to_string())
            }
        }
    )*};
}

from_str_value!(u64, usize, f64, bool);

impl FromValue for Mode {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        <Mode as ValueEnum>::from_str(s, true)
    }
}

impl FromValue for Target {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        <Target as ValueEnum>::from_str(s, true)
    }
}
