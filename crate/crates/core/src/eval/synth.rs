//! Seeded synthetic speech stand-in.
//!
//! Each phrase is a short sequence of steady vowel-like segments. A segment
//! is a harmonic series on a speaker-dependent pitch, shaped by three
//! resonances whose centre frequencies depend on the phrase, the speaker's
//! tract length and a per-(speaker, phrase) offset. Takes of the same
//! (speaker, phrase) differ by pitch, resonance, timing, gain and noise
//! jitter, all scaled by `1 / separation`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{derive_seed, Corpus, EvalError, Session, Take};
use crate::audio::AudioClip;

/// Jitter scale at which the acceptance thresholds were calibrated.
pub const DEFAULT_SEPARATION: f64 = 1.25;

const SEGMENTS: usize = 3;
const MAX_HARMONIC_HZ: f64 = 7000.0;
const RAMP_SECS: f64 = 0.008;
const BASE_GAIN: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub speakers: usize,
    pub phrases: usize,
    /// Enrollment takes per phrase (split across both sessions); the
    /// imposter session gets the same number.
    pub takes: usize,
    /// Larger is cleaner; `f64::INFINITY` makes every take identical.
    pub separation: f64,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_secs: f64,
}

impl SynthConfig {
    pub fn new(speakers: usize, phrases: usize, takes: usize, separation: f64, seed: u64) -> Self {
        Self {
            speakers,
            phrases,
            takes,
            separation,
            seed,
            sample_rate: 16_000,
            duration_secs: 0.5,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.speakers < 2 {
            return bad(format!("{} speakers, need at least 2", self.speakers));
        }
        if self.phrases == 0 {
            return bad("need at least one phrase".into());
        }
        if self.takes < 2 {
            return bad(format!("{} takes, need at least 2", self.takes));
        }
        if self.separation.is_nan() || self.separation <= 0.0 {
            return bad(format!("separation must be positive, got {}", self.separation));
        }
        if self.sample_rate < crate::audio::MIN_SAMPLE_RATE {
            return bad(format!("sample rate {} too low", self.sample_rate));
        }
        if !(self.duration_secs > 0.05 && self.duration_secs <= 30.0) {
            return bad(format!("duration {} s out of range", self.duration_secs));
        }
        Ok(())
    }

    fn jitter(&self) -> f64 {
        if self.separation.is_infinite() {
            0.0
        } else {
            1.0 / self.separation
        }
    }
}

pub fn synth_corpus(
    speakers: usize,
    phrases: usize,
    takes: usize,
    separation: f64,
    seed: u64,
) -> Result<Corpus, EvalError> {
    synth_corpus_with(&SynthConfig::new(speakers, phrases, takes, separation, seed))
}

fn label(prefix: &str, i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len().max(2);
    format!("{prefix}-{i:0width$}")
}

struct Segment {
    weight: f64,
    formants: [f64; 3],
    f0: f64,
    phases: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn phrase_bases(seed: u64, phrase: &str) -> Vec<(f64, [f64; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["phrase", phrase]));
    (0..SEGMENTS)
        .map(|_| {
            let weight = rng.gen_range(0.6..1.4);
            let f = [
                rng.gen_range(300.0..850.0),
                rng.gen_range(900.0..2300.0),
                rng.gen_range(2400.0..3400.0),
            ];
            (weight, f)
        })
        .collect()
}

fn signature(seed: u64, speaker: &str, phrase: &str, bases: &[(f64, [f64; 3])]) -> Vec<Segment> {
    let mut voice = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["voice", speaker]));
    let tract = voice.gen_range(0.95..1.05);
    let f0 = voice.gen_range(100.0..240.0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["signature", speaker, phrase]));
    bases
        .iter()
        .map(|&(weight, base)| {
            let formants = base.map(|f| f * tract * (0.12 * normal(&mut rng)).exp());
            let f0 = f0 * (0.12 * normal(&mut rng)).exp();
            let count = (MAX_HARMONIC_HZ / f0).floor() as usize;
            let phases = (0..count).map(|_| rng.gen_range(0.0..TAU)).collect();
            Segment {
                weight,
                formants,
                f0,
                phases,
            }
        })
        .collect()
}

fn render(segments: &[Segment], cfg: &SynthConfig, take_seed: u64) -> Result<AudioClip, EvalError> {
    let j = cfg.jitter();
    let rate = f64::from(cfg.sample_rate);
    let total = (cfg.duration_secs * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(take_seed);
    let gain = BASE_GAIN * (0.2 * j * normal(&mut rng)).exp();
    let weights: Vec<f64> = segments
        .iter()
        .map(|s| s.weight * (0.1 * j * normal(&mut rng)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    let mut bounds = vec![0usize];
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        bounds.push(((acc / sum) * total as f64).round() as usize);
    }
    bounds[SEGMENTS] = total;

    let ramp = (RAMP_SECS * rate) as usize;
    let mut out = Vec::with_capacity(total);
    for (seg, win) in segments.iter().zip(bounds.windows(2)) {
        let len = win[1] - win[0];
        let f0 = seg.f0 * (0.03 * j * normal(&mut rng)).exp();
        let formants = seg.formants.map(|f| f * (0.03 * j * normal(&mut rng)).exp());
        let mut osc: Vec<(Complex64, Complex64, f64)> = Vec::with_capacity(seg.phases.len());
        let mut power = 0.0;
        for (h, &phase) in seg.phases.iter().enumerate() {
            let freq = (h + 1) as f64 * f0;
            if freq >= 0.45 * rate {
                break;
            }
            let amp: f64 = formants
                .iter()
                .map(|&fk| {
                    let bw = 50.0 + 0.06 * fk;
                    1.0 / (1.0 + ((freq - fk) / bw).powi(2))
                })
                .sum();
            power += amp * amp / 2.0;
            osc.push((Complex64::from_polar(1.0, phase), Complex64::from_polar(1.0, TAU * freq / rate), amp));
        }
        let norm = gain / power.sqrt();
        for n in 0..len {
            let edge = n.min(len - 1 - n);
            let env = if edge < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let mut s = 0.0;
            for (z, w, a) in osc.iter_mut() {
                s += *a * z.im;
                *z *= *w;
            }
            out.push(norm * env * s);
        }
    }
    for x in out.iter_mut() {
        *x = (*x + 0.002 * j * normal(&mut rng)).clamp(-1.0, 1.0);
    }
    Ok(AudioClip::new(out, cfg.sample_rate)?)
}

/// Generates the corpus. Speaker `i`'s dedicated imposter is speaker
/// `(i + 1) mod n`, who also voices the imposter session for speaker `i`.
pub fn synth_corpus_with(cfg: &SynthConfig) -> Result<Corpus, EvalError> {
    cfg.validate()?;
    let speakers: Vec<String> = (0..cfg.speakers).map(|i| label("spk", i, cfg.speakers)).collect();
    let phrases: Vec<String> = (0..cfg.phrases).map(|i| label("phrase", i, cfg.phrases)).collect();
    let bases: BTreeMap<&str, _> = phrases.iter().map(|p| (p.as_str(), phrase_bases(cfg.seed, p))).collect();
    let imposters: BTreeMap<String, String> = speakers
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), speakers[(i + 1) % speakers.len()].clone()))
        .collect();
    let first_session = cfg.takes.div_ceil(2);

    let jobs: Vec<(&String, &String)> = speakers.iter().flat_map(|s| phrases.iter().map(move |p| (s, p))).collect();
    let rendered = jobs
        .par_iter()
        .map(|&(s, p)| -> Result<_, EvalError> {
            let own = signature(cfg.seed, s, p, &bases[p.as_str()]);
            let other = signature(cfg.seed, &imposters[s], p, &bases[p.as_str()]);
            let mut takes = Vec::with_capacity(2 * cfg.takes);
            for k in 0..cfg.takes {
                let (session, index) = if k < first_session {
                    (Session::Enroll1, k)
                } else {
                    (Session::Enroll2, k - first_session)
                };
                let seed = derive_seed(cfg.seed, &["take", s, p, session.as_str(), &index.to_string()]);
                takes.push(Take {
                    session,
                    index: index as u32,
                    clip: render(&own, cfg, seed)?,
                });
            }
            for k in 0..cfg.takes {
                let seed = derive_seed(cfg.seed, &["take", s, p, "imposter", &k.to_string()]);
                takes.push(Take {
                    session: Session::Imposter,
                    index: k as u32,
                    clip: render(&other, cfg, seed)?,
                });
            }
            Ok((s.clone(), p.clone(), takes))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut corpus = Corpus {
        speakers: BTreeMap::new(),
        imposters,
    };
    for (s, p, takes) in rendered {
        corpus.speakers.entry(s).or_default().insert(p, takes);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{compute_mfcc, MfccConfig};

    #[test]
    fn infinite_separation_gives_identical_features() {
        let c = synth_corpus(2, 2, 3, f64::INFINITY, 1).unwrap();
        let cfg = MfccConfig::default();
        let takes = c.enrollment_takes("spk-00", "phrase-00");
        let first = compute_mfcc(&takes[0].clip, &cfg).unwrap();
        for t in &takes[1..] {
            assert_eq!(compute_mfcc(&t.clip, &cfg).unwrap(), first);
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = synth_corpus(3, 2, 4, 1.0, 9).unwrap();
        assert_eq!(a, synth_corpus(3, 2, 4, 1.0, 9).unwrap());
        assert_ne!(a, synth_corpus(3, 2, 4, 1.0, 10).unwrap());
        assert_eq!(a.imposters["spk-02"], "spk-00");
        let takes = &a.speakers["spk-01"]["phrase-01"];
        assert_eq!(takes.len(), 8);
        assert_eq!(takes.iter().filter(|t| t.session == Session::Enroll2).count(), 2);
        assert!(takes.iter().all(|t| t.clip.len() == 8000));
    }

    #[test]
    fn degenerate_parameters() {
        assert!(synth_corpus(1, 2, 4, 1.0, 0).is_err());
        assert!(synth_corpus(2, 0, 4, 1.0, 0).is_err());
        assert!(synth_corpus(2, 2, 1, 1.0, 0).is_err());
        assert!(synth_corpus(2, 2, 4, 0.0, 0).is_err());
        assert!(synth_corpus(2, 2, 4, f64::NAN, 0).is_err());
    }
}
