//! Full enrollment and verification over an in-process channel: the
//! genuine speaker, their dedicated imposter, and a wrong password.

use std::collections::BTreeMap;

use vaulted_voice::eval::{build_models, synth_corpus, ExperimentConfig, SplitPlan};
use vaulted_voice::gmm::PhraseModel;
use vaulted_voice::protocol::{run_enrollment, run_verification, ClientConfig, MemoryStore, Server, ServerConfig};
use vaulted_voice::vault::{AttributedModel, ServerKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth_corpus(3, 10, 8, 1.25, 42)?;
    let models = build_models(&corpus, &SplitPlan::new(&corpus, 42)?, &ExperimentConfig::default())?;
    let user = "spk-00";
    let imposter = &corpus.imposters[user];

    let mut enrolled = BTreeMap::new();
    let mut genuine = BTreeMap::new();
    let mut attack = BTreeMap::new();
    let mut pool: BTreeMap<String, Vec<AttributedModel>> = BTreeMap::new();
    for (phrase, m) in models.phrases_of(user) {
        enrolled.insert(phrase.to_string(), m.gallery.clone());
        genuine.insert(phrase.to_string(), m.probe.clone());
        attack.insert(phrase.to_string(), m.attack.clone());
        pool.insert(phrase.to_string(), vec![AttributedModel::new(imposter, m.chaff.clone())]);
    }

    let config = ServerConfig {
        phrases: enrolled.keys().cloned().collect(),
        ..ServerConfig::default()
    };
    let mut server = Server::new(ServerKey::from_seed(1), MemoryStore::new(), config)?;
    let client = ClientConfig::default();

    let (receipt, transcript) = run_enrollment(&mut server, user, "s3cret", &enrolled, &pool, &client);
    let receipt = receipt?;
    println!("enrolled {user}: {} pairs, {} messages", receipt.pair_ids.len(), transcript.frames.len());
    let plain = enrolled.values().any(|m: &PhraseModel| transcript.contains(&m.to_bytes()));
    println!("plaintext model on the wire: {plain}");

    let attempts: [(&str, &str, &BTreeMap<String, PhraseModel>); 3] = [
        ("genuine speaker", "s3cret", &genuine),
        ("dedicated imposter", "s3cret", &attack),
        ("wrong password", "guess", &genuine),
    ];
    for (who, password, live) in attempts {
        match run_verification(&mut server, user, password, live, &client).0 {
            Ok(d) => println!(
                "{who:20} {}/{} bits -> {}",
                d.correct,
                d.total,
                if d.accept { "accept" } else { "reject" }
            ),
            Err(e) => println!("{who:20} error: {e}"),
        }
    }
    Ok(())
}
