//! Write a synthetic corpus as a WAV tree and load it back.

use vaulted_voice::eval::{load_mit_layout, synth_corpus, write_mit_layout, MANIFEST_NAME};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join(format!("vvv-corpus-{}", std::process::id()));
    let corpus = synth_corpus(3, 8, 6, 1.25, 5)?;
    write_mit_layout(&corpus, &root)?;
    println!("{}:", root.display());
    print!("{}", std::fs::read_to_string(root.join(MANIFEST_NAME))?);

    let back = load_mit_layout(&root)?;
    for s in back.speaker_ids() {
        let phrases: Vec<&str> = back.phrases(s).collect();
        println!(
            "{s}: {} phrases, {} enrollment and {} imposter takes of {}",
            phrases.len(),
            back.enrollment_takes(s, phrases[0]).len(),
            back.imposter_takes(s, phrases[0]).len(),
            phrases[0]
        );
    }
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
