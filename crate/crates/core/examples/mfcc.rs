//! Feature extraction from a WAV file, or from a synthetic take when no
//! path is given.
//!
//! ```sh
//! cargo run --example mfcc -- path/to/clip.wav
//! ```

use vaulted_voice::audio::{compute_mfcc, read_wav, MfccConfig};
use vaulted_voice::eval::synth_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clip = match std::env::args().nth(1) {
        Some(path) => read_wav(&std::fs::read(path)?)?,
        None => {
            let corpus = synth_corpus(2, 1, 2, 1.0, 7)?;
            corpus.enrollment_takes("spk-00", "phrase-00")[0].clip.clone()
        }
    };
    let cfg = MfccConfig::default();
    let feats = compute_mfcc(&clip, &cfg)?;
    println!(
        "{:.3} s at {} Hz -> {} frames x {} coefficients",
        clip.duration_secs(),
        clip.sample_rate(),
        feats.len(),
        feats.dim()
    );
    for (i, frame) in feats.frames().iter().take(3).enumerate() {
        let row: Vec<String> = frame.iter().map(|c| format!("{c:7.2}")).collect();
        println!("frame {i}: {}", row.join(" "));
    }
    Ok(())
}
