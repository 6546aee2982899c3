//! Enrollment and verification between a client holding the voice and a
//! server holding only sealed blocks.
//!
//! Enrollment: `EnrollInit` → `EnrollPhrases` → `EnrollRecord` (submission)
//! → `EnrollRecord` (receipt). Verification: `VerifyInit` → identity packet,
//! `VerifyChallenge` → sealed challenge set, `VerifyResponse` →
//! `VerifyDecision`. Any request may instead be answered with `Error`.

mod bitstring;
mod challenge;
mod client;
mod server;
mod store;
mod wire;

pub use bitstring::{
    bits_to_index, index_to_bits, server_score_response, ChallengeBitstring, ResponseBitstring, SessionDecision,
};
pub use challenge::{server_issue_challenge, ChallengeEntry, ChallengeSet};
pub use client::{
    client_answer_challenge, open_challenge, run_enrollment, run_verification, train_from_clips, ClientConfig,
    Direction, LiveModels, Loopback, OpenedChallenge, Transcript, Utterances,
};
pub use server::{Server, ServerConfig};
pub use store::{validate_user_id, write_atomic, DirStore, MemoryStore, RecordStore};
pub use wire::{EnrollmentReceipt, Message, MessageType, Reply, Request, HEADER_LEN, MAX_PAYLOAD, PROTOCOL_VERSION};

use thiserror::Error;

use crate::audio::AudioError;
use crate::gmm::GmmError;
use crate::vault::VaultError;

pub const NONCE_BYTES: usize = 16;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error(transparent)]
    Model(#[from] GmmError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("malformed message: {0}")]
    Wire(String),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("unexpected message: {0}")]
    UnexpectedMessage(String),
    #[error("invalid user id {0:?}")]
    InvalidUserId(String),
    #[error("unknown user")]
    UnknownUser,
    #[error("enrollment record is revoked")]
    Revoked,
    #[error("user is already enrolled")]
    AlreadyEnrolled,
    #[error("invalid enrollment submission: {0}")]
    InvalidSubmission(String),
    #[error("nonce does not match the open session")]
    NonceMismatch,
    #[error("no open session")]
    NoSession,
    #[error("response has {got} bits, challenge has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("requested {requested} pairs, record has {available}")]
    TooManyPairs { requested: usize, available: usize },
    #[error("no live model for phrase {0:?}")]
    MissingLiveModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("record store: {0}")]
    Store(String),
    #[error("server error: {0}")]
    Remote(String),
}

impl ProtocolError {
    /// Wrong password, tampering, or an integrity failure of stored data.
    pub fn is_integrity_failure(&self) -> bool {
        matches!(
            self,
            ProtocolError::Vault(VaultError::Authentication | VaultError::Malformed(_))
                | ProtocolError::Wire(_)
                | ProtocolError::NonceMismatch
        )
    }
}

/// Error categories carried in `Error` replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Malformed = 1,
    UnknownUser = 2,
    Revoked = 3,
    AlreadyEnrolled = 4,
    NonceMismatch = 5,
    NoSession = 6,
    LengthMismatch = 7,
    InvalidRequest = 8,
    Internal = 9,
}

impl ErrorCode {
    pub fn from_u8(tag: u8) -> Option<Self> {
        use ErrorCode::*;
        Some(match tag {
            1 => Malformed,
            2 => UnknownUser,
            3 => Revoked,
            4 => AlreadyEnrolled,
            5 => NonceMismatch,
            6 => NoSession,
            7 => LengthMismatch,
            8 => InvalidRequest,
            9 => Internal,
            _ => return None,
        })
    }

    pub fn for_error(e: &ProtocolError) -> Self {
        use ProtocolError as P;
        match e {
            P::Wire(_) | P::UnsupportedVersion(_) | P::UnknownMessageType(_) | P::Vault(VaultError::Malformed(_)) => {
                ErrorCode::Malformed
            }
            P::UnknownUser => ErrorCode::UnknownUser,
            P::Revoked | P::Vault(VaultError::AlreadyRevoked) => ErrorCode::Revoked,
            P::AlreadyEnrolled => ErrorCode::AlreadyEnrolled,
            P::NonceMismatch => ErrorCode::NonceMismatch,
            P::NoSession => ErrorCode::NoSession,
            P::LengthMismatch { .. } => ErrorCode::LengthMismatch,
            P::Store(_) => ErrorCode::Internal,
            _ => ErrorCode::InvalidRequest,
        }
    }

    /// Client-side view of a server error reply.
    pub fn into_error(self, message: String) -> ProtocolError {
        match self {
            ErrorCode::UnknownUser => ProtocolError::UnknownUser,
            ErrorCode::Revoked => ProtocolError::Revoked,
            ErrorCode::AlreadyEnrolled => ProtocolError::AlreadyEnrolled,
            ErrorCode::NonceMismatch => ProtocolError::NonceMismatch,
            ErrorCode::NoSession => ProtocolError::NoSession,
            _ => ProtocolError::Remote(message),
        }
    }
}
