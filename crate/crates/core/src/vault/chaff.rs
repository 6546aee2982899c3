use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::VaultError;
use crate::gmm::PhraseModel;

/// A phrase model together with the speaker it was trained from.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedModel {
    pub owner: String,
    pub model: PhraseModel,
}

impl AttributedModel {
    pub fn new(owner: impl Into<String>, model: PhraseModel) -> Self {
        Self {
            owner: owner.into(),
            model,
        }
    }
}

/// Picks one chaff model for `real` uniformly from the pool entries that
/// belong to someone other than `enrollee`.
pub fn make_chaff(
    real: &PhraseModel,
    enrollee: &str,
    pool: &[AttributedModel],
    rng_seed: u64,
) -> Result<PhraseModel, VaultError> {
    make_chaff_set(real, enrollee, pool, 1, rng_seed).map(|mut v| v.remove(0))
}

/// Picks `count` distinct chaff models (uniformly, without replacement).
pub fn make_chaff_set(
    real: &PhraseModel,
    enrollee: &str,
    pool: &[AttributedModel],
    count: usize,
    rng_seed: u64,
) -> Result<Vec<PhraseModel>, VaultError> {
    if pool.is_empty() {
        return Err(VaultError::EmptyPool);
    }
    for entry in pool {
        if entry.model.dim() != real.dim() {
            return Err(VaultError::DimensionMismatch(real.dim(), entry.model.dim()));
        }
        if entry.model.transcription() != real.transcription() {
            return Err(VaultError::PhraseMismatch {
                expected: real.transcription().to_string(),
                found: entry.model.transcription().to_string(),
            });
        }
    }
    let eligible: Vec<&PhraseModel> = pool
        .iter()
        .filter(|e| e.owner != enrollee)
        .map(|e| &e.model)
        .collect();
    if eligible.is_empty() {
        return Err(VaultError::SelfOnlyPool);
    }
    if eligible.len() < count {
        return Err(VaultError::PoolTooSmall {
            needed: count,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(index::sample(&mut rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GaussianComponent;

    fn model(phrase: &str, mean: f64) -> PhraseModel {
        PhraseModel::new(
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![mean, 0.0],
                variance: vec![1.0, 1.0],
            }],
            phrase,
            10,
        )
        .unwrap()
    }

    #[test]
    fn forced_choice() {
        let real = model("p", 0.0);
        let pool = vec![AttributedModel::new("bob", model("p", 5.0))];
        for seed in 0..20 {
            assert_eq!(make_chaff(&real, "alice", &pool, seed).unwrap(), pool[0].model);
        }
    }

    #[test]
    fn never_picks_the_enrollee() {
        let real = model("p", 0.0);
        let pool = vec![
            AttributedModel::new("alice", model("p", 1.0)),
            AttributedModel::new("bob", model("p", 2.0)),
        ];
        for seed in 0..100 {
            assert_eq!(make_chaff(&real, "alice", &pool, seed).unwrap(), pool[1].model);
        }
        let own = vec![AttributedModel::new("alice", model("p", 1.0))];
        assert_eq!(make_chaff(&real, "alice", &own, 0), Err(VaultError::SelfOnlyPool));
        assert_eq!(make_chaff(&real, "alice", &[], 0), Err(VaultError::EmptyPool));
    }

    #[test]
    fn pool_validation() {
        let real = model("p", 0.0);
        let wrong_dim = PhraseModel::new(
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.0],
                variance: vec![1.0],
            }],
            "p",
            1,
        )
        .unwrap();
        let pool = vec![AttributedModel::new("bob", wrong_dim)];
        assert_eq!(make_chaff(&real, "a", &pool, 0), Err(VaultError::DimensionMismatch(2, 1)));
        let pool = vec![AttributedModel::new("bob", model("q", 0.0))];
        assert!(matches!(make_chaff(&real, "a", &pool, 0), Err(VaultError::PhraseMismatch { .. })));
    }

    #[test]
    fn chaff_sets_are_distinct() {
        let real = model("p", 0.0);
        let pool: Vec<_> = (1..=4)
            .map(|i| AttributedModel::new(format!("s{i}"), model("p", i as f64)))
            .collect();
        let set = make_chaff_set(&real, "a", &pool, 3, 5).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set[0] != set[1] && set[1] != set[2] && set[0] != set[2]);
        assert!(matches!(
            make_chaff_set(&real, "a", &pool, 5, 5),
            Err(VaultError::PoolTooSmall { needed: 5, available: 4 })
        ));
    }
}
