use std::path::PathBuf;

use clap::Args;

use super::Failure;
use crate::eval::{load_mit_layout, synth_corpus_with, Corpus, SynthConfig, DEFAULT_SEPARATION};

/// Where recordings come from: a corpus tree or the synthetic generator.
#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus root in `<speaker>/<session>/<phrase>_<take>.wav` layout.
    #[arg(long, conflicts_with = "synth")]
    pub corpus: Option<PathBuf>,
    /// Synthetic corpus, e.g. `speakers=10,phrases=10,takes=8,separation=1.25,seed=42`.
    /// Omitted keys take defaults. Used when `--corpus` is absent.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    pub synth: Option<String>,
}

/// Parses `key=value` pairs over the default synthetic configuration
/// (10 speakers, 10 phrases, 8 takes, seed 42).
pub fn parse_synth_spec(spec: &str) -> Result<SynthConfig, String> {
    let mut cfg = SynthConfig::new(10, 10, 8, DEFAULT_SEPARATION, 42);
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("expected key=value, got {item:?}"))?;
        let int = || v.parse::<usize>().map_err(|_| format!("{k}: not an integer: {v:?}"));
        match k {
            "speakers" => cfg.speakers = int()?,
            "phrases" => cfg.phrases = int()?,
            "takes" => cfg.takes = int()?,
            "seed" => cfg.seed = v.parse().map_err(|_| format!("seed: not an integer: {v:?}"))?,
            "separation" => {
                cfg.separation = match v {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => v.parse().map_err(|_| format!("separation: not a number: {v:?}"))?,
                }
            }
            _ => return Err(format!("unknown synth key {k:?}")),
        }
    }
    Ok(cfg)
}

impl CorpusArgs {
    pub fn load(&self) -> Result<Corpus, Failure> {
        match &self.corpus {
            Some(root) => Ok(load_mit_layout(root)?),
            None => {
                let cfg = parse_synth_spec(self.synth.as_deref().unwrap_or("")).map_err(Failure::usage)?;
                Ok(synth_corpus_with(&cfg)?)
            }
        }
    }

    pub fn label(&self) -> String {
        match (&self.corpus, &self.synth) {
            (Some(root), _) => format!("dir {}", root.display()),
            (None, spec) => match parse_synth_spec(spec.as_deref().unwrap_or("")) {
                Ok(c) => format!(
                    "synth speakers={},phrases={},takes={},separation={},seed={}",
                    c.speakers, c.phrases, c.takes, c.separation, c.seed
                ),
                Err(_) => "synth".into(),
            },
        }
    }
}
