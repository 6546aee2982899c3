use std::collections::BTreeMap;

use super::EvalError;
use crate::audio::AudioClip;

pub const MIN_PHRASES: usize = 8;
pub const MIN_ENROLL_TAKES: usize = 6;
pub const MIN_IMPOSTER_TAKES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Session {
    Enroll1,
    Enroll2,
    /// Recorded by the speaker's dedicated imposter.
    Imposter,
}

impl Session {
    pub const ALL: [Session; 3] = [Session::Enroll1, Session::Enroll2, Session::Imposter];

    pub fn as_str(self) -> &'static str {
        match self {
            Session::Enroll1 => "enroll-1",
            Session::Enroll2 => "enroll-2",
            Session::Imposter => "imposter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }

    pub fn is_enrollment(self) -> bool {
        self != Session::Imposter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Take {
    pub session: Session,
    pub index: u32,
    pub clip: AudioClip,
}

/// speaker → phrase → takes, plus the dedicated-imposter assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub speakers: BTreeMap<String, BTreeMap<String, Vec<Take>>>,
    pub imposters: BTreeMap<String, String>,
}

impl Corpus {
    pub fn speaker_ids(&self) -> impl Iterator<Item = &str> {
        self.speakers.keys().map(String::as_str)
    }

    pub fn phrases(&self, speaker: &str) -> impl Iterator<Item = &str> {
        self.speakers
            .get(speaker)
            .into_iter()
            .flat_map(|p| p.keys().map(String::as_str))
    }

    fn takes_where(&self, speaker: &str, phrase: &str, pred: impl Fn(Session) -> bool) -> Vec<&Take> {
        let mut out: Vec<&Take> = self
            .speakers
            .get(speaker)
            .and_then(|p| p.get(phrase))
            .into_iter()
            .flatten()
            .filter(|t| pred(t.session))
            .collect();
        out.sort_by_key(|t| (t.session, t.index));
        out
    }

    /// Both enrollment sessions, ordered by session then take index.
    pub fn enrollment_takes(&self, speaker: &str, phrase: &str) -> Vec<&Take> {
        self.takes_where(speaker, phrase, Session::is_enrollment)
    }

    pub fn imposter_takes(&self, speaker: &str, phrase: &str) -> Vec<&Take> {
        self.takes_where(speaker, phrase, |s| s == Session::Imposter)
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.speakers
            .values()
            .flat_map(|p| p.values().flatten())
            .map(|t| t.clip.sample_rate())
            .next()
    }

    /// Checks the corpus invariants, reporting every violation.
    pub fn validate(&self) -> Result<(), EvalError> {
        let mut problems = Vec::new();
        if self.speakers.len() < 2 {
            problems.push(format!("{} speakers, need at least 2", self.speakers.len()));
        }
        let rate = self.sample_rate();
        for (speaker, phrases) in &self.speakers {
            match self.imposters.get(speaker) {
                None => problems.push(format!("{speaker}: no dedicated imposter")),
                Some(i) if i == speaker => problems.push(format!("{speaker}: is their own imposter")),
                _ => {}
            }
            if phrases.len() < MIN_PHRASES {
                problems.push(format!("{speaker}: {} phrases, need {MIN_PHRASES}", phrases.len()));
            }
            for (phrase, takes) in phrases {
                let enroll = takes.iter().filter(|t| t.session.is_enrollment()).count();
                if enroll < MIN_ENROLL_TAKES {
                    problems.push(format!("{speaker}/{phrase}: {enroll} enrollment takes, need {MIN_ENROLL_TAKES}"));
                }
                let imp = takes.len() - enroll;
                if imp < MIN_IMPOSTER_TAKES {
                    problems.push(format!("{speaker}/{phrase}: {imp} imposter takes, need {MIN_IMPOSTER_TAKES}"));
                }
                for t in takes {
                    if Some(t.clip.sample_rate()) != rate {
                        problems.push(format!(
                            "{speaker}/{}/{phrase}_{}: sample rate {} differs from {}",
                            t.session.as_str(),
                            t.index,
                            t.clip.sample_rate(),
                            rate.unwrap_or(0)
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(EvalError::InvalidCorpus(problems))
        }
    }
}
