#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vaulted_voice::gmm::{GaussianComponent, PhraseModel};
use vaulted_voice::protocol::MemoryStore;
use vaulted_voice::protocol::RecordStore;
use vaulted_voice::vault::{build_enrollment, derive_user_key, EnrollmentRecord, ServerKey, UserKey, MIN_KDF_ITERATIONS};

pub const DIM: usize = 14;

pub fn phrase(i: usize) -> String {
    format!("p{i:02}")
}

/// Small random diagonal GMM with `k` components.
pub fn random_model(rng: &mut ChaCha8Rng, k: usize, transcription: &str) -> PhraseModel {
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let components = weights
        .into_iter()
        .map(|weight| GaussianComponent {
            weight,
            mean: (0..DIM).map(|_| rng.gen_range(-20.0..20.0)).collect(),
            variance: (0..DIM).map(|_| rng.gen_range(0.5..4.0)).collect(),
        })
        .collect();
    PhraseModel::new(components, transcription, 100).unwrap()
}

pub struct Fixture {
    pub user_id: String,
    pub user_key: UserKey,
    pub server_key: ServerKey,
    pub record: EnrollmentRecord,
    /// The enrolled models by phrase, doubling as a perfect live voice.
    pub real: BTreeMap<String, PhraseModel>,
    pub chaff: BTreeMap<String, Vec<PhraseModel>>,
}

impl Fixture {
    pub fn new(pairs: usize, bits: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let user_id = "alice".to_string();
        let user_key = derive_user_key("correct horse", rng.gen(), MIN_KDF_ITERATIONS).unwrap();
        let server_key = ServerKey::from_seed(seed ^ 0x5eed);
        let mut real = BTreeMap::new();
        let mut chaff = BTreeMap::new();
        for i in 0..pairs {
            let p = phrase(i);
            real.insert(p.clone(), random_model(&mut rng, 2, &p));
            chaff.insert(p.clone(), (1..1 << bits).map(|_| random_model(&mut rng, 2, &p)).collect::<Vec<_>>());
        }
        let models: Vec<PhraseModel> = real.values().cloned().collect();
        let chaffs: Vec<Vec<PhraseModel>> = chaff.values().cloned().collect();
        let record = build_enrollment(&user_id, &models, &chaffs, &user_key, &server_key, rng.gen(), 0).unwrap();
        Self {
            user_id,
            user_key,
            server_key,
            record,
            real,
            chaff,
        }
    }

    pub fn store(&self) -> MemoryStore {
        let mut store = MemoryStore::new();
        store.save(&self.record).unwrap();
        store
    }
}
