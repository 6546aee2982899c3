//! A revoked record refuses verification until the user enrolls again,
//! and the new record shares no pair ids with the old one.

use std::collections::BTreeMap;

use vaulted_voice::eval::{build_models, synth_corpus, ExperimentConfig, SplitPlan};
use vaulted_voice::protocol::{run_enrollment, run_verification, ClientConfig, MemoryStore, Server, ServerConfig};
use vaulted_voice::vault::{AttributedModel, ServerKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth_corpus(2, 8, 6, 1.25, 3)?;
    let models = build_models(&corpus, &SplitPlan::new(&corpus, 3)?, &ExperimentConfig::default())?;
    let user = "spk-01";
    let mut gallery = BTreeMap::new();
    let mut probe = BTreeMap::new();
    let mut pool: BTreeMap<String, Vec<AttributedModel>> = BTreeMap::new();
    for (phrase, m) in models.phrases_of(user) {
        gallery.insert(phrase.to_string(), m.gallery.clone());
        probe.insert(phrase.to_string(), m.probe.clone());
        pool.insert(phrase.to_string(), vec![AttributedModel::new(&corpus.imposters[user], m.chaff.clone())]);
    }
    let config = ServerConfig {
        phrases: gallery.keys().cloned().collect(),
        ..ServerConfig::default()
    };
    let mut server = Server::new(ServerKey::from_seed(9), MemoryStore::new(), config)?;
    let client = ClientConfig::default();

    let first = run_enrollment(&mut server, user, "pw-1", &gallery, &pool, &client).0?;
    println!("enrolled, pair ids {:?}", first.pair_ids);
    server.revoke(user)?;
    println!("after revoke: {:?}", run_verification(&mut server, user, "pw-1", &probe, &client).0.map(|d| d.accept));

    let second = run_enrollment(&mut server, user, "pw-2", &gallery, &pool, &client).0?;
    let reused = second.pair_ids.iter().filter(|id| first.pair_ids.contains(id)).count();
    println!("re-enrolled, pair ids {:?} ({reused} reused)", second.pair_ids);
    println!("old password: {:?}", run_verification(&mut server, user, "pw-1", &probe, &client).0.map(|d| d.accept));
    println!("new password: {:?}", run_verification(&mut server, user, "pw-2", &probe, &client).0.map(|d| d.accept));
    Ok(())
}
