//! The verifying server. It handles sealed blocks and bitstrings only; it
//! has no access to model parsing or scoring.

use std::collections::{HashMap, HashSet};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::bitstring::{check_threshold, server_score_response, ChallengeBitstring};
use super::challenge::server_issue_challenge;
use super::store::{validate_user_id, RecordStore};
use super::wire::{EnrollmentReceipt, Message, Reply, Request};
use super::{ErrorCode, ProtocolError, DEFAULT_THRESHOLD, NONCE_BYTES};
use crate::vault::{
    verifier_hash, EnrollmentRecord, EnrollmentSubmission, Layer, ServerKey, SymmetricSealer,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    /// Prompts handed to every enrolling user, in order.
    pub phrases: Vec<String>,
    /// Bits per challenge entry; each entry carries `2^b` blocks.
    pub bits_per_question: u8,
    /// Minimum fraction of correct bits to accept.
    pub threshold: f64,
    /// Entries per challenge; `None` challenges every pair.
    pub pairs_per_challenge: Option<usize>,
    /// Seeds the server RNG; `None` draws from the OS.
    pub seed: Option<u64>,
    /// Timestamp stamped on new records; `None` reads the clock.
    pub fixed_time: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            phrases: Vec::new(),
            bits_per_question: 1,
            threshold: DEFAULT_THRESHOLD,
            pairs_per_challenge: None,
            seed: None,
            fixed_time: None,
        }
    }
}

#[derive(Debug)]
struct Session {
    nonce: [u8; NONCE_BYTES],
    expected: ChallengeBitstring,
    transcript_id: u64,
}

pub struct Server<S: RecordStore> {
    key: ServerKey,
    store: S,
    config: ServerConfig,
    rng: ChaCha20Rng,
    sessions: HashMap<String, Session>,
    next_transcript: u64,
}

impl<S: RecordStore> Server<S> {
    pub fn new(key: ServerKey, store: S, config: ServerConfig) -> Result<Self, ProtocolError> {
        check_threshold(config.threshold)?;
        if !(1..=7).contains(&config.bits_per_question) {
            return Err(ProtocolError::InvalidConfig(format!(
                "bits per question must be in 1..=7, got {}",
                config.bits_per_question
            )));
        }
        if config.pairs_per_challenge == Some(0) {
            return Err(ProtocolError::InvalidConfig("pairs per challenge must be positive".into()));
        }
        let rng = match config.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Ok(Self {
            key,
            store,
            config,
            rng,
            sessions: HashMap::new(),
            next_transcript: 0,
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut S {
        &mut self.store
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.len()
    }

    /// Decodes a framed request, handles it and frames the reply. Never panics
    /// on hostile input; failures become `Error` replies.
    pub fn handle_bytes(&mut self, bytes: &[u8]) -> Vec<u8> {
        let reply = match Message::from_bytes(bytes) {
            Ok(msg) => return self.handle(&msg).to_bytes(),
            Err(e) => error_reply(&e),
        };
        reply.to_message().to_bytes()
    }

    pub fn handle(&mut self, msg: &Message) -> Message {
        let reply = Request::from_message(msg)
            .and_then(|req| self.dispatch(req))
            .unwrap_or_else(|e| error_reply(&e));
        reply.to_message()
    }

    pub fn dispatch(&mut self, req: Request) -> Result<Reply, ProtocolError> {
        validate_user_id(req.user_id())?;
        match req {
            Request::EnrollInit {
                user_id,
                verifier_salt,
                verifier_hash: hash,
            } => {
                self.check_enrollable(&user_id)?;
                if hash != verifier_hash(&verifier_salt, &user_id) {
                    return Err(ProtocolError::Vault(crate::vault::VaultError::Malformed(
                        "verifier hash does not match user id".into(),
                    )));
                }
                Ok(Reply::EnrollPhrases {
                    bits_per_question: self.config.bits_per_question,
                    phrases: self.config.phrases.clone(),
                })
            }
            Request::EnrollSubmit(sub) => self.enroll(*sub).map(Reply::EnrollReceipt),
            Request::VerifyInit { user_id } => {
                let rec = self.live_record(&user_id)?;
                Ok(Reply::IdentityPacket {
                    kdf_salt: rec.kdf_salt,
                    kdf_iterations: rec.kdf_iterations,
                    identity_block: rec.identity_block,
                })
            }
            Request::ChallengeRequest { user_id } => {
                let rec = self.live_record(&user_id)?;
                let n = self.config.pairs_per_challenge.unwrap_or(rec.pairs.len());
                let (expected, set) = server_issue_challenge(&rec, &self.key, n, self.rng.next_u64())?;
                let transcript_id = self.next_transcript;
                self.next_transcript += 1;
                // a new challenge voids any outstanding one
                self.sessions.insert(
                    user_id,
                    Session {
                        nonce: set.nonce,
                        expected,
                        transcript_id,
                    },
                );
                Ok(Reply::Challenge(set))
            }
            Request::Response { user_id, response } => {
                let session = self.sessions.remove(&user_id).ok_or(ProtocolError::NoSession)?;
                self.live_record(&user_id)?;
                let decision = server_score_response(
                    &response,
                    &session.expected,
                    &session.nonce,
                    self.config.threshold,
                    session.transcript_id,
                )?;
                log::info!(
                    "session {} for {user_id}: {}/{} correct, accept={}",
                    decision.transcript_id,
                    decision.correct,
                    decision.total,
                    decision.accept
                );
                Ok(Reply::Decision(decision))
            }
        }
    }

    /// Marks the user's record revoked and drops any open session.
    pub fn revoke(&mut self, user_id: &str) -> Result<(), ProtocolError> {
        let mut rec = self.store.load(user_id)?.ok_or(ProtocolError::UnknownUser)?;
        rec.revoke()?;
        self.store.save(&rec)?;
        self.sessions.remove(user_id);
        Ok(())
    }

    fn live_record(&self, user_id: &str) -> Result<EnrollmentRecord, ProtocolError> {
        let rec = self.store.load(user_id)?.ok_or(ProtocolError::UnknownUser)?;
        if rec.revoked {
            return Err(ProtocolError::Revoked);
        }
        Ok(rec)
    }

    fn check_enrollable(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, ProtocolError> {
        match self.store.load(user_id)? {
            Some(rec) if !rec.revoked => Err(ProtocolError::AlreadyEnrolled),
            prior => Ok(prior),
        }
    }

    fn enroll(&mut self, sub: EnrollmentSubmission) -> Result<EnrollmentReceipt, ProtocolError> {
        let prior = self.check_enrollable(&sub.user_id)?;
        let expected_blocks = 1usize << self.config.bits_per_question;
        if !self.config.phrases.is_empty() && sub.groups.len() != self.config.phrases.len() {
            return Err(ProtocolError::InvalidSubmission(format!(
                "{} groups for {} phrases",
                sub.groups.len(),
                self.config.phrases.len()
            )));
        }
        if sub.groups.is_empty() {
            return Err(ProtocolError::InvalidSubmission("no phrase groups".into()));
        }
        if let Some(g) = sub.groups.iter().find(|g| 1 + g.chaff.len() != expected_blocks) {
            return Err(ProtocolError::InvalidSubmission(format!(
                "group with {} blocks, expected {expected_blocks}",
                1 + g.chaff.len()
            )));
        }
        // fresh pair ids, disjoint from the revoked record they replace
        let mut used: HashSet<u32> = prior.iter().flat_map(|r| r.pairs.iter().map(|p| p.pair_id)).collect();
        let pair_ids: Vec<u32> = (0..sub.groups.len())
            .map(|_| loop {
                let id = self.rng.gen();
                if used.insert(id) {
                    break id;
                }
            })
            .collect();
        let created_at = self.config.fixed_time.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        let mut sealer = SymmetricSealer::new(&self.key, Layer::Server, self.rng.next_u64());
        let record = EnrollmentRecord::from_submission(sub, &mut sealer, &pair_ids, created_at)?;
        self.store.save(&record)?;
        Ok(EnrollmentReceipt {
            user_id: record.user_id,
            created_at,
            pair_ids,
        })
    }
}

fn error_reply(e: &ProtocolError) -> Reply {
    Reply::Error {
        code: ErrorCode::for_error(e),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn server_code_never_touches_models() {
        for src in [include_str!("server.rs"), include_str!("challenge.rs")] {
            let body = src.split("#[cfg(test)]").next().unwrap();
            assert!(!body.contains("gmm"));
            assert!(!body.contains("PhraseModel"));
            assert!(!body.contains("open_model_block"));
        }
    }
}
