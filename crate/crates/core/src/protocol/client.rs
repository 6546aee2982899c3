use std::collections::{BTreeMap, HashMap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::bitstring::{index_to_bits, ResponseBitstring, SessionDecision};
use super::challenge::{decode_entries, ChallengeSet};
use super::server::Server;
use super::store::RecordStore;
use super::wire::{EnrollmentReceipt, Message, Reply, Request};
use super::{ProtocolError, NONCE_BYTES};
use crate::audio::{compute_mfcc, AudioClip, FeatureMatrix, MfccConfig};
use crate::gmm::{closest_index, train_model, PhraseModel, ScoreDirection, TrainConfig};
use crate::vault::{
    derive_user_key, make_chaff_set, open, open_identity_block, open_model_block, seal_model_group, verifier_hash,
    AttributedModel, EnrollmentSubmission, Layer, SymmetricSealer, UserKey, MIN_KDF_ITERATIONS, SALT_LEN,
};

/// Supplies the model built from the speaker's fresh utterances of a phrase.
pub trait LiveModels {
    fn live_model(&self, phrase: &str) -> Result<PhraseModel, ProtocolError>;
}

impl LiveModels for BTreeMap<String, PhraseModel> {
    fn live_model(&self, phrase: &str) -> Result<PhraseModel, ProtocolError> {
        self.get(phrase)
            .cloned()
            .ok_or_else(|| ProtocolError::MissingLiveModel(phrase.to_string()))
    }
}

impl LiveModels for HashMap<String, PhraseModel> {
    fn live_model(&self, phrase: &str) -> Result<PhraseModel, ProtocolError> {
        self.get(phrase)
            .cloned()
            .ok_or_else(|| ProtocolError::MissingLiveModel(phrase.to_string()))
    }
}

/// Recorded utterances per phrase, turned into models on demand.
#[derive(Debug, Clone)]
pub struct Utterances {
    pub clips: BTreeMap<String, Vec<AudioClip>>,
    pub mfcc: MfccConfig,
    pub train: TrainConfig,
}

impl LiveModels for Utterances {
    fn live_model(&self, phrase: &str) -> Result<PhraseModel, ProtocolError> {
        let clips = self
            .clips
            .get(phrase)
            .ok_or_else(|| ProtocolError::MissingLiveModel(phrase.to_string()))?;
        train_from_clips(clips, phrase, &self.mfcc, &self.train)
    }
}

/// MFCCs of every clip, pooled and fit with one GMM.
pub fn train_from_clips(
    clips: &[AudioClip],
    phrase: &str,
    mfcc: &MfccConfig,
    train: &TrainConfig,
) -> Result<PhraseModel, ProtocolError> {
    let feats = clips
        .iter()
        .map(|c| compute_mfcc(c, mfcc))
        .collect::<Result<Vec<_>, _>>()?;
    let pooled = FeatureMatrix::concat(&feats)?;
    Ok(train_model(&pooled, phrase, train)?)
}

/// A challenge after the user has opened it.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenedChallenge {
    pub nonce: [u8; NONCE_BYTES],
    /// `(pair_id, candidates in challenge order)`.
    pub entries: Vec<(u32, Vec<PhraseModel>)>,
}

/// Opens the whole set or nothing: any failed block aborts.
pub fn open_challenge(set: &ChallengeSet, user_key: &UserKey) -> Result<OpenedChallenge, ProtocolError> {
    let plain = open(&set.sealed, &user_key.transport_key())?;
    let (nonce, entries) = decode_entries(&plain)?;
    if nonce != set.nonce {
        return Err(ProtocolError::NonceMismatch);
    }
    let entries = entries
        .into_iter()
        .map(|e| {
            let models = e
                .blocks
                .iter()
                .map(|b| open_model_block(b, user_key))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((e.pair_id, models))
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    Ok(OpenedChallenge { nonce, entries })
}

/// Picks the candidate closest to the live model in every entry and encodes
/// its position as the response bits.
pub fn client_answer_challenge(
    set: &ChallengeSet,
    live: &impl LiveModels,
    user_key: &UserKey,
    dir: ScoreDirection,
) -> Result<ResponseBitstring, ProtocolError> {
    let opened = open_challenge(set, user_key)?;
    let mut bits = Vec::new();
    for (_, candidates) in &opened.entries {
        let phrase = candidates[0].transcription();
        if let Some(other) = candidates.iter().find(|c| c.transcription() != phrase) {
            return Err(ProtocolError::Vault(crate::vault::VaultError::PhraseMismatch {
                expected: phrase.to_string(),
                found: other.transcription().to_string(),
            }));
        }
        let probe = live.live_model(phrase)?;
        let refs: Vec<&PhraseModel> = candidates.iter().collect();
        let idx = closest_index(&probe, &refs, dir)?;
        bits.extend(index_to_bits(idx, candidates.len().trailing_zeros()));
    }
    Ok(ResponseBitstring {
        bits,
        nonce: opened.nonce,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Every frame exchanged during one run, as it appeared on the wire.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub frames: Vec<(Direction, Vec<u8>)>,
}

impl Transcript {
    pub fn contains(&self, needle: &[u8]) -> bool {
        self.frames.iter().any(|(_, b)| b.windows(needle.len()).any(|w| w == needle))
    }

    pub fn sent(&self) -> impl Iterator<Item = &[u8]> {
        self.frames
            .iter()
            .filter(|(d, _)| *d == Direction::ClientToServer)
            .map(|(_, b)| b.as_slice())
    }

    /// One line per frame: `C>` or `S>` followed by the frame in hex.
    pub fn to_hex(&self) -> String {
        self.frames
            .iter()
            .map(|(d, b)| {
                let tag = match d {
                    Direction::ClientToServer => "C>",
                    Direction::ServerToClient => "S>",
                };
                format!("{tag} {}\n", hex::encode(b))
            })
            .collect()
    }
}

/// In-process channel that frames every message and records it.
pub struct Loopback<'a, S: RecordStore> {
    server: &'a mut Server<S>,
    pub transcript: Transcript,
}

impl<'a, S: RecordStore> Loopback<'a, S> {
    pub fn new(server: &'a mut Server<S>) -> Self {
        Self {
            server,
            transcript: Transcript::default(),
        }
    }

    pub fn exchange(&mut self, req: &Request) -> Result<Reply, ProtocolError> {
        let out = req.to_message().to_bytes();
        self.transcript.frames.push((Direction::ClientToServer, out.clone()));
        let back = self.server.handle_bytes(&out);
        self.transcript.frames.push((Direction::ServerToClient, back.clone()));
        match Reply::from_message(&Message::from_bytes(&back)?)? {
            Reply::Error { code, message } => Err(code.into_error(message)),
            reply => Ok(reply),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub kdf_iterations: u32,
    pub direction: ScoreDirection,
    /// Seeds salts, nonces and chaff picks; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            kdf_iterations: MIN_KDF_ITERATIONS,
            direction: ScoreDirection::GalleryVariance,
            seed: None,
        }
    }
}

impl ClientConfig {
    fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        }
    }
}

fn unexpected(reply: &Reply) -> ProtocolError {
    ProtocolError::UnexpectedMessage(format!("{:?}", reply.kind()))
}

/// Client side of enrollment: announce, receive the phrase list, build and
/// seal models with chaff from `chaff_pool`, and submit.
///
/// Nothing is stored unless the final step succeeds.
pub fn run_enrollment<S: RecordStore>(
    server: &mut Server<S>,
    user_id: &str,
    password: &str,
    live: &impl LiveModels,
    chaff_pool: &BTreeMap<String, Vec<AttributedModel>>,
    cfg: &ClientConfig,
) -> (Result<EnrollmentReceipt, ProtocolError>, Transcript) {
    let mut link = Loopback::new(server);
    let result = enroll_steps(&mut link, user_id, password, live, chaff_pool, cfg);
    (result, link.transcript)
}

fn enroll_steps<S: RecordStore>(
    link: &mut Loopback<'_, S>,
    user_id: &str,
    password: &str,
    live: &impl LiveModels,
    chaff_pool: &BTreeMap<String, Vec<AttributedModel>>,
    cfg: &ClientConfig,
) -> Result<EnrollmentReceipt, ProtocolError> {
    let mut rng = cfg.rng();
    let kdf_salt: [u8; SALT_LEN] = rng.gen();
    let verifier_salt: [u8; SALT_LEN] = rng.gen();
    let user_key = derive_user_key(password, kdf_salt, cfg.kdf_iterations)?;

    let reply = link.exchange(&Request::EnrollInit {
        user_id: user_id.to_string(),
        verifier_salt,
        verifier_hash: verifier_hash(&verifier_salt, user_id),
    })?;
    let Reply::EnrollPhrases {
        bits_per_question,
        phrases,
    } = reply
    else {
        return Err(unexpected(&reply));
    };
    if !(1..=7).contains(&bits_per_question) {
        return Err(ProtocolError::InvalidConfig(format!("server asked for {bits_per_question} bits")));
    }
    let chaff_count = (1usize << bits_per_question) - 1;

    let mut sealer = SymmetricSealer::new(&user_key, Layer::User, rng.next_u64());
    let mut groups = Vec::with_capacity(phrases.len());
    for phrase in &phrases {
        let model = live.live_model(phrase)?;
        let pool = chaff_pool.get(phrase).map(Vec::as_slice).unwrap_or(&[]);
        let chaff = make_chaff_set(&model, user_id, pool, chaff_count, rng.next_u64())?;
        groups.push(seal_model_group(&model, &chaff, &mut sealer)?);
    }
    let sub = EnrollmentSubmission::new(user_id, verifier_salt, &user_key, &mut sealer, groups)?;
    match link.exchange(&Request::EnrollSubmit(Box::new(sub)))? {
        Reply::EnrollReceipt(r) => Ok(r),
        other => Err(unexpected(&other)),
    }
}

/// Client side of verification. A wrong password is detected on the identity
/// block, before any challenge is requested.
pub fn run_verification<S: RecordStore>(
    server: &mut Server<S>,
    user_id: &str,
    password: &str,
    live: &impl LiveModels,
    cfg: &ClientConfig,
) -> (Result<SessionDecision, ProtocolError>, Transcript) {
    let mut link = Loopback::new(server);
    let result = verify_steps(&mut link, user_id, password, live, cfg);
    (result, link.transcript)
}

fn verify_steps<S: RecordStore>(
    link: &mut Loopback<'_, S>,
    user_id: &str,
    password: &str,
    live: &impl LiveModels,
    cfg: &ClientConfig,
) -> Result<SessionDecision, ProtocolError> {
    let reply = link.exchange(&Request::VerifyInit {
        user_id: user_id.to_string(),
    })?;
    let Reply::IdentityPacket {
        kdf_salt,
        kdf_iterations,
        identity_block,
    } = reply
    else {
        return Err(unexpected(&reply));
    };
    let user_key = derive_user_key(password, kdf_salt, kdf_iterations)?;
    open_identity_block(&identity_block, user_id, &user_key)?;

    let reply = link.exchange(&Request::ChallengeRequest {
        user_id: user_id.to_string(),
    })?;
    let Reply::Challenge(set) = reply else {
        return Err(unexpected(&reply));
    };
    let response = client_answer_challenge(&set, live, &user_key, cfg.direction)?;
    match link.exchange(&Request::Response {
        user_id: user_id.to_string(),
        response,
    })? {
        Reply::Decision(d) => Ok(d),
        other => Err(unexpected(&other)),
    }
}
