//! `<root>/<speaker>/<session>/<phrase>_<take>.wav` plus `<root>/manifest.tsv`
//! holding one `speaker<TAB>imposter` line per speaker.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Corpus, EvalError, Session, Take};
use crate::audio::{read_wav, write_wav};
use crate::protocol::write_atomic;

pub const MANIFEST_NAME: &str = "manifest.tsv";

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>, EvalError> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| EvalError::io(dir, e))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| EvalError::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn read_manifest(root: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let path = root.join(MANIFEST_NAME);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(EvalError::MissingManifest(path.display().to_string()))
        }
        Err(e) => return Err(EvalError::io(&path, e)),
    };
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(i), None) if !s.is_empty() && !i.is_empty() => {
                map.insert(s.to_string(), i.to_string());
            }
            _ => {
                return Err(EvalError::InvalidCorpus(vec![format!(
                    "{}:{}: expected `speaker<TAB>imposter`",
                    path.display(),
                    n + 1
                )]))
            }
        }
    }
    Ok(map)
}

/// Loads a corpus tree. Files are visited in path order; every invariant
/// violation is reported, not just the first.
pub fn load_mit_layout(root: &Path) -> Result<Corpus, EvalError> {
    let imposters = read_manifest(root)?;
    let mut corpus = Corpus {
        speakers: BTreeMap::new(),
        imposters,
    };
    let mut problems = Vec::new();
    for spk in sorted_entries(root)? {
        if !spk.path().is_dir() {
            continue;
        }
        let speaker = spk.file_name().to_string_lossy().into_owned();
        let phrases = corpus.speakers.entry(speaker.clone()).or_default();
        for sess in sorted_entries(&spk.path())? {
            let name = sess.file_name().to_string_lossy().into_owned();
            let Some(session) = Session::parse(&name) else {
                if sess.path().is_dir() {
                    problems.push(format!("{speaker}/{name}: unknown session directory"));
                }
                continue;
            };
            for file in sorted_entries(&sess.path())? {
                let path = file.path();
                if path.extension().and_then(|e| e.to_str()) != Some("wav") {
                    continue;
                }
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let parsed = stem
                    .rsplit_once('_')
                    .and_then(|(p, t)| t.parse::<u32>().ok().map(|t| (p.to_string(), t)))
                    .filter(|(p, _)| !p.is_empty());
                let Some((phrase, index)) = parsed else {
                    problems.push(format!("{}: expected <phrase>_<take>.wav", path.display()));
                    continue;
                };
                let bytes = fs::read(&path).map_err(|e| EvalError::io(&path, e))?;
                match read_wav(&bytes) {
                    Ok(clip) => phrases.entry(phrase).or_default().push(Take { session, index, clip }),
                    Err(e) => problems.push(format!("{}: {e}", path.display())),
                }
            }
        }
    }
    corpus.speakers.retain(|_, p| !p.is_empty());
    for s in corpus.imposters.keys() {
        if !corpus.speakers.contains_key(s) {
            problems.push(format!("{s}: listed in manifest but has no recordings"));
        }
    }
    if let Err(EvalError::InvalidCorpus(more)) = corpus.validate() {
        problems.extend(more);
    }
    if problems.is_empty() {
        Ok(corpus)
    } else {
        Err(EvalError::InvalidCorpus(problems))
    }
}

/// Writes `corpus` in the layout [`load_mit_layout`] reads.
pub fn write_mit_layout(corpus: &Corpus, root: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(root).map_err(|e| EvalError::io(root, e))?;
    let manifest: String = corpus.imposters.iter().map(|(s, i)| format!("{s}\t{i}\n")).collect();
    let path = root.join(MANIFEST_NAME);
    write_atomic(&path, manifest.as_bytes()).map_err(|e| EvalError::io(&path, e))?;
    for (speaker, phrases) in &corpus.speakers {
        for (phrase, takes) in phrases {
            for t in takes {
                let dir = root.join(speaker).join(t.session.as_str());
                fs::create_dir_all(&dir).map_err(|e| EvalError::io(&dir, e))?;
                let path = dir.join(format!("{phrase}_{}.wav", t.index));
                write_atomic(&path, &write_wav(&t.clip)).map_err(|e| EvalError::io(&path, e))?;
            }
        }
    }
    Ok(())
}
