//! Baselines and vaulted experiments on a synthetic corpus.
//!
//! ```sh
//! cargo run --release --example evaluate -- out/ [speakers]
//! ```

use std::path::PathBuf;

use vaulted_voice::eval::{run_evaluation, synth_corpus, EvalSettings, DEFAULT_SEPARATION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "eval-out".into()));
    let speakers = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let corpus = synth_corpus(speakers, 10, 8, DEFAULT_SEPARATION, 42)?;
    let settings = EvalSettings {
        corpus_label: format!("synth speakers={speakers}"),
        ..EvalSettings::default()
    };
    let res = run_evaluation(&corpus, &settings, &out)?;
    for (name, (outcomes, roc)) in [
        ("baseline 1", &res.baseline1),
        ("baseline 2", &res.baseline2),
        ("vaulted dedicated", &res.dedicated),
        ("vaulted all-vs-all", &res.all_vs_all),
    ] {
        println!("{name:20} {:4} trials  EER {:.4}", outcomes.len(), roc.eer);
    }
    println!("files in {}:", out.display());
    for f in &res.files {
        println!("  {}", f.file_name().unwrap_or_default().to_string_lossy());
    }
    Ok(())
}
