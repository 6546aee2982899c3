//! Key derivation, the two-layer sealing envelope, chaff selection and the
//! server-side enrollment record.
//!
//! Every model block is sealed twice: first under the user's key, then under
//! the server's. The server can strip its own layer but never sees a model.

mod chaff;
mod keys;
mod record;
mod seal;

pub use chaff::{make_chaff, make_chaff_set, AttributedModel};
pub use keys::{
    derive_user_key, verifier_hash, KeyMaterial, ServerKey, TransportKey, UserKey, KEY_LEN, MIN_KDF_ITERATIONS,
    SALT_LEN,
};
pub use record::{
    build_enrollment, open_identity_block, open_model_block, seal_identity_block, seal_model_group, BlockPair,
    EnrollmentRecord, EnrollmentSubmission, SubmittedGroup, RECORD_MAGIC,
};
pub use seal::{open, EncryptedBlock, Layer, Sealer, SymmetricSealer, NONCE_LEN, TAG_LEN};

use thiserror::Error;

use crate::gmm::GmmError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VaultError {
    #[error("password is empty")]
    EmptyPassword,
    #[error("{0} key-stretching iterations is below the minimum of {MIN_KDF_ITERATIONS}")]
    WeakIterations(u32),
    /// Wrong key or tampered block; the two cases are deliberately not told apart.
    #[error("authentication failed")]
    Authentication,
    #[error("nonce space exhausted for this sealer")]
    NonceExhausted,
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("chaff pool is empty")]
    EmptyPool,
    #[error("chaff pool holds only the enrollee's own models")]
    SelfOnlyPool,
    #[error("chaff pool too small: need {needed}, have {available}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("phrase mismatch: expected {expected:?}, found {found:?}")]
    PhraseMismatch { expected: String, found: String },
    #[error("misaligned enrollment input: {0}")]
    Misaligned(String),
    #[error("record is already revoked")]
    AlreadyRevoked,
    #[error(transparent)]
    Model(#[from] GmmError),
}
