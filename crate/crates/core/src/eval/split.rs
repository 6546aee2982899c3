use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Corpus, EvalError};

/// Indices into [`Corpus::enrollment_takes`] and [`Corpus::imposter_takes`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseSplit {
    pub gallery: Vec<usize>,
    pub probe: Vec<usize>,
    /// Imposter takes the chaff model is trained from.
    pub chaff: Vec<usize>,
    /// Held-out imposter takes the imposter claimant speaks.
    pub attack: Vec<usize>,
}

/// 60% of `n` rounded up, leaving at least one take on the other side.
pub fn gallery_count(n: usize) -> usize {
    (n * 3).div_ceil(5).min(n.saturating_sub(1))
}

fn split_indices(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut first = idx[..gallery_count(n)].to_vec();
    let mut second = idx[gallery_count(n)..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    /// Keyed by `(speaker, phrase)`.
    pub splits: BTreeMap<(String, String), PhraseSplit>,
}

impl SplitPlan {
    /// Shuffles each (speaker, phrase) independently under a sub-seed, so
    /// adding a speaker does not disturb anyone else's split.
    pub fn new(corpus: &Corpus, seed: u64) -> Result<Self, EvalError> {
        let mut splits = BTreeMap::new();
        for (speaker, phrases) in &corpus.speakers {
            for phrase in phrases.keys() {
                let n_enroll = corpus.enrollment_takes(speaker, phrase).len();
                let n_imp = corpus.imposter_takes(speaker, phrase).len();
                if n_enroll < 2 || n_imp < 2 {
                    return Err(EvalError::InvalidConfig(format!(
                        "{speaker}/{phrase}: need 2 enrollment and 2 imposter takes to split, have {n_enroll} and {n_imp}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["split", speaker, phrase]));
                let (gallery, probe) = split_indices(n_enroll, &mut rng);
                let (chaff, attack) = split_indices(n_imp, &mut rng);
                splits.insert(
                    (speaker.clone(), phrase.clone()),
                    PhraseSplit {
                        gallery,
                        probe,
                        chaff,
                        attack,
                    },
                );
            }
        }
        Ok(Self { seed, splits })
    }

    pub fn get(&self, speaker: &str, phrase: &str) -> Option<&PhraseSplit> {
        self.splits.get(&(speaker.to_string(), phrase.to_string()))
    }
}
