use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{compute_roc, derive_seed, Corpus, EvalError, RocCurve, ScoreKind, SplitPlan, Take};
use crate::audio::{compute_mfcc, FeatureMatrix, MfccConfig};
use crate::gmm::{choose_closer, model_distance, train_model, Choice, PhraseModel, ScoreDirection, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub mfcc: MfccConfig,
    pub train: TrainConfig,
    /// Seeds the split and the presentation order of vaulted pairs.
    pub seed: u64,
}

/// The four models trained for one (speaker, phrase).
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseModels {
    /// Enrolled model: the real block.
    pub gallery: PhraseModel,
    /// Fresh genuine model: what the true speaker answers with.
    pub probe: PhraseModel,
    /// Dedicated-imposter model stored as chaff.
    pub chaff: PhraseModel,
    /// Held-out dedicated-imposter model: what the imposter answers with.
    pub attack: PhraseModel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSet {
    /// Keyed by `(speaker, phrase)`.
    pub models: BTreeMap<(String, String), PhraseModels>,
    /// `(speaker, phrase, reason)` for phrases that could not be trained.
    pub skipped: Vec<(String, String, String)>,
}

impl ModelSet {
    pub fn speakers(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.models.keys().map(|(s, _)| s.as_str()).collect();
        s.dedup();
        s
    }

    pub fn phrases_of<'a>(&'a self, speaker: &'a str) -> impl Iterator<Item = (&'a str, &'a PhraseModels)> + 'a {
        self.models
            .range((speaker.to_string(), String::new())..)
            .take_while(move |((s, _), _)| s == speaker)
            .map(|((_, p), m)| (p.as_str(), m))
    }

    pub fn get(&self, speaker: &str, phrase: &str) -> Option<&PhraseModels> {
        self.models.get(&(speaker.to_string(), phrase.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_id: String,
    /// Ground truth: the claimant is the claimed speaker.
    pub genuine: bool,
    pub score: f64,
    pub kind: ScoreKind,
    pub claimed: String,
    pub claimant: String,
    /// Set for per-phrase trials; `None` when the trial spans all phrases.
    pub phrase: Option<String>,
    pub direction: ScoreDirection,
}

fn train_takes(takes: &[&Take], idx: &[usize], phrase: &str, cfg: &ExperimentConfig) -> Result<PhraseModel, EvalError> {
    let feats = idx
        .iter()
        .map(|&i| compute_mfcc(&takes[i].clip, &cfg.mfcc))
        .collect::<Result<Vec<_>, _>>()?;
    let pooled = FeatureMatrix::concat(&feats)?;
    Ok(train_model(&pooled, phrase, &cfg.train)?)
}

/// Trains gallery, probe, chaff and attack models for every (speaker,
/// phrase) in parallel. Phrases that fail to train are skipped with a
/// warning.
pub fn build_models(corpus: &Corpus, split: &SplitPlan, cfg: &ExperimentConfig) -> Result<ModelSet, EvalError> {
    let jobs: Vec<(&(String, String), _)> = split.splits.iter().collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|((speaker, phrase), s)| {
            let enroll = corpus.enrollment_takes(speaker, phrase);
            let imp = corpus.imposter_takes(speaker, phrase);
            let built = (|| {
                Ok::<_, EvalError>(PhraseModels {
                    gallery: train_takes(&enroll, &s.gallery, phrase, cfg)?,
                    probe: train_takes(&enroll, &s.probe, phrase, cfg)?,
                    chaff: train_takes(&imp, &s.chaff, phrase, cfg)?,
                    attack: train_takes(&imp, &s.attack, phrase, cfg)?,
                })
            })();
            ((speaker.clone(), phrase.clone()), built)
        })
        .collect();
    let mut set = ModelSet::default();
    for ((speaker, phrase), built) in results {
        match built {
            Ok(m) => {
                set.models.insert((speaker, phrase), m);
            }
            Err(e @ (EvalError::Model(_) | EvalError::Audio(_))) => {
                log::warn!("skipping {speaker}/{phrase}: {e}");
                set.skipped.push((speaker, phrase, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if set.models.is_empty() {
        return Err(EvalError::InvalidConfig("no phrase could be trained".into()));
    }
    Ok(set)
}

/// Raw distances: probe vs gallery (genuine) and attack vs gallery
/// (imposter) for every trained phrase.
pub fn run_baseline_on(models: &ModelSet, dir: ScoreDirection) -> Result<(Vec<TrialOutcome>, RocCurve), EvalError> {
    let mut out = Vec::with_capacity(2 * models.models.len());
    for ((speaker, phrase), m) in &models.models {
        let imposter = format!("{speaker}~imposter");
        for (genuine, live, claimant) in [(true, &m.probe, speaker), (false, &m.attack, &imposter)] {
            out.push(TrialOutcome {
                trial_id: format!("baseline:{}:{speaker}:{phrase}:{}", dir.as_str(), if genuine { "genuine" } else { "imposter" }),
                genuine,
                score: model_distance(live, &m.gallery, dir)?,
                kind: ScoreKind::Distance,
                claimed: speaker.clone(),
                claimant: claimant.clone(),
                phrase: Some(phrase.clone()),
                direction: dir,
            });
        }
    }
    let roc = compute_roc(&out)?;
    Ok((out, roc))
}

pub fn run_baseline(
    corpus: &Corpus,
    split: &SplitPlan,
    dir: ScoreDirection,
    cfg: &ExperimentConfig,
) -> Result<(Vec<TrialOutcome>, RocCurve), EvalError> {
    run_baseline_on(&build_models(corpus, split, cfg)?, dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VaultedMode {
    /// Each speaker against their own probe and their dedicated imposter.
    Dedicated,
    /// Additionally, every other speaker's probe models as claimants.
    AllVsAll,
}

impl VaultedMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VaultedMode::Dedicated => "dedicated",
            VaultedMode::AllVsAll => "all-vs-all",
        }
    }
}

/// Vaulted trials. For every claimed speaker and every phrase, the
/// (gallery, chaff) pair is shown in a seeded random order and the
/// claimant's live model picks the closer block. A trial scores the
/// fraction of phrases where the gallery model was picked.
pub fn run_vaulted_on(
    models: &ModelSet,
    dir: ScoreDirection,
    mode: VaultedMode,
    seed: u64,
) -> Result<(Vec<TrialOutcome>, RocCurve), EvalError> {
    let speakers = models.speakers();
    let mut trials: Vec<(&str, String, bool)> = Vec::new();
    for &s in &speakers {
        trials.push((s, s.to_string(), true));
        trials.push((s, format!("{s}~imposter"), false));
        if mode == VaultedMode::AllVsAll {
            trials.extend(speakers.iter().filter(|&&t| t != s).map(|&t| (s, t.to_string(), false)));
        }
    }
    let mut out = trials
        .par_iter()
        .map(|(claimed, claimant, genuine)| {
            let trial_id = format!("vaulted:{}:{}:{claimed}:{claimant}", mode.as_str(), dir.as_str());
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[&trial_id]));
            let (mut correct, mut total) = (0usize, 0usize);
            for (phrase, m) in models.phrases_of(claimed) {
                let live = if *genuine {
                    &m.probe
                } else if claimant.ends_with("~imposter") {
                    &m.attack
                } else {
                    match models.get(claimant, phrase) {
                        Some(other) => &other.probe,
                        None => continue,
                    }
                };
                let real_first: bool = rng.gen();
                let (a, b) = if real_first { (&m.gallery, &m.chaff) } else { (&m.chaff, &m.gallery) };
                let picked_first = choose_closer(live, a, b, dir)? == Choice::First;
                correct += usize::from(picked_first == real_first);
                total += 1;
            }
            Ok::<_, EvalError>(TrialOutcome {
                trial_id,
                genuine: *genuine,
                score: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                kind: ScoreKind::BitAccuracy,
                claimed: claimed.to_string(),
                claimant: claimant.clone(),
                phrase: None,
                direction: dir,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    let roc = compute_roc(&out)?;
    Ok((out, roc))
}

pub fn run_vaulted(
    corpus: &Corpus,
    split: &SplitPlan,
    dir: ScoreDirection,
    mode: VaultedMode,
    cfg: &ExperimentConfig,
) -> Result<(Vec<TrialOutcome>, RocCurve), EvalError> {
    run_vaulted_on(&build_models(corpus, split, cfg)?, dir, mode, cfg.seed)
}
