//! Train phrase models and compare them with the z-score distance.

use vaulted_voice::audio::{compute_mfcc, FeatureMatrix, MfccConfig};
use vaulted_voice::eval::{synth_corpus, Take};
use vaulted_voice::gmm::{choose_closer, model_distance, train_model, PhraseModel, ScoreDirection, TrainConfig};

fn model(takes: &[&Take], phrase: &str) -> Result<PhraseModel, Box<dyn std::error::Error>> {
    let mfcc = MfccConfig::default();
    let feats = takes.iter().map(|t| compute_mfcc(&t.clip, &mfcc)).collect::<Result<Vec<_>, _>>()?;
    Ok(train_model(&FeatureMatrix::concat(&feats)?, phrase, &TrainConfig::default())?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth_corpus(3, 1, 8, 1.25, 11)?;
    let phrase = "phrase-00";
    let own = corpus.enrollment_takes("spk-00", phrase);
    let gallery = model(&own[..5], phrase)?;
    let probe = model(&own[5..], phrase)?;
    let imposter = model(&corpus.imposter_takes("spk-00", phrase)[..5], phrase)?;
    println!("gallery: {} components, dim {}", gallery.num_components(), gallery.dim());

    for dir in [ScoreDirection::GalleryVariance, ScoreDirection::ProbeVariance] {
        println!(
            "{dir}: probe->gallery {:.3}, probe->imposter {:.3}, closer: {:?}",
            model_distance(&probe, &gallery, dir)?,
            model_distance(&probe, &imposter, dir)?,
            choose_closer(&probe, &gallery, &imposter, dir)?
        );
    }
    let bytes = gallery.to_bytes();
    assert_eq!(PhraseModel::from_bytes(&bytes)?, gallery);
    println!("serialized model: {} bytes", bytes.len());
    Ok(())
}
