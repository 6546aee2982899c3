//! Enrollment submissions and the `VVR1` record format.
//!
//! ```text
//! "VVR1" | user_id: str | verifier_hash: [32] | verifier_salt: [16]
//!        | kdf_salt: [16] | kdf_iterations: u32 | transport_key: [32]
//!        | identity_block | revoked: u8 | created_at: u64 | pair_count: u32
//!        | pair_count x (pair_id: u32 | block_count: u8 | block_count x block)
//!        | pair_count x real_slot: u8
//! ```
//!
//! Blocks within a pair are written sorted by their encoded bytes, so the
//! payload section alone says nothing about which block is real. The tail
//! index holds that bookkeeping. `str` is a u32 length plus UTF-8 and
//! `block` is the [`EncryptedBlock`] encoding.

use super::{
    open, verifier_hash, EncryptedBlock, KeyMaterial, Layer, Sealer, ServerKey, SymmetricSealer, TransportKey,
    UserKey, VaultError, KEY_LEN, SALT_LEN,
};
use crate::bytes::{ByteReader, ByteWriter, DecodeError};
use crate::gmm::PhraseModel;

pub const RECORD_MAGIC: &[u8; 4] = b"VVR1";

const IDENTITY_DOMAIN: &[u8] = b"vvv/identity/v1";

/// One challenge entry: a real block plus its chaff, all doubly sealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPair {
    pub pair_id: u32,
    pub real: EncryptedBlock,
    /// One block for the classic pair; `2^b - 1` blocks for `b`-bit entries.
    pub chaff: Vec<EncryptedBlock>,
}

impl BlockPair {
    pub fn block_count(&self) -> usize {
        1 + self.chaff.len()
    }

    /// Bits of response this entry is worth.
    pub fn bits(&self) -> u32 {
        self.block_count().trailing_zeros()
    }

    /// Removes the server layer, returning the user-layer real and chaff blocks.
    pub fn open_server_layer(&self, key: &ServerKey) -> Result<(EncryptedBlock, Vec<EncryptedBlock>), VaultError> {
        let unwrap = |b: &EncryptedBlock| -> Result<EncryptedBlock, VaultError> {
            if b.layer != Layer::Server {
                return Err(VaultError::Malformed("expected a server-layer block".into()));
            }
            EncryptedBlock::from_bytes(&open(b, key)?)
        };
        let real = unwrap(&self.real)?;
        let chaff = self.chaff.iter().map(unwrap).collect::<Result<_, _>>()?;
        Ok((real, chaff))
    }

    fn stored_order(&self) -> (Vec<Vec<u8>>, u8) {
        let real = self.real.to_bytes();
        let mut all: Vec<Vec<u8>> = self.chaff.iter().map(EncryptedBlock::to_bytes).collect();
        all.push(real.clone());
        all.sort();
        let slot = all.iter().position(|b| *b == real).unwrap() as u8;
        (all, slot)
    }
}

/// A phrase group sealed under the user layer, as sent by the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmittedGroup {
    pub real: EncryptedBlock,
    pub chaff: Vec<EncryptedBlock>,
}

/// Everything the client hands the server at enrollment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollmentSubmission {
    pub user_id: String,
    pub verifier_salt: [u8; SALT_LEN],
    pub verifier_hash: [u8; 32],
    pub kdf_salt: [u8; SALT_LEN],
    pub kdf_iterations: u32,
    pub transport_key: TransportKey,
    pub identity_block: EncryptedBlock,
    pub groups: Vec<SubmittedGroup>,
}

impl EnrollmentSubmission {
    pub fn new(
        user_id: &str,
        verifier_salt: [u8; SALT_LEN],
        user_key: &UserKey,
        user_sealer: &mut impl Sealer,
        groups: Vec<SubmittedGroup>,
    ) -> Result<Self, VaultError> {
        Ok(Self {
            user_id: user_id.to_string(),
            verifier_salt,
            verifier_hash: verifier_hash(&verifier_salt, user_id),
            kdf_salt: user_key.salt(),
            kdf_iterations: user_key.iterations(),
            transport_key: user_key.transport_key(),
            identity_block: seal_identity_block(user_id, user_sealer)?,
            groups,
        })
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.put_str(&self.user_id);
        w.put_bytes(&self.verifier_salt);
        w.put_bytes(&self.verifier_hash);
        w.put_bytes(&self.kdf_salt);
        w.put_u32(self.kdf_iterations);
        w.put_bytes(self.transport_key.key_bytes());
        self.identity_block.encode(w);
        w.put_u32(self.groups.len() as u32);
        for g in &self.groups {
            w.put_u8(g.chaff.len() as u8);
            g.real.encode(w);
            for c in &g.chaff {
                c.encode(w);
            }
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self, VaultError> {
        let user_id = r.string().map_err(malformed)?;
        let verifier_salt = r.array().map_err(malformed)?;
        let verifier_hash = r.array().map_err(malformed)?;
        let kdf_salt = r.array().map_err(malformed)?;
        let kdf_iterations = r.u32().map_err(malformed)?;
        let transport_key = TransportKey::from_bytes(r.array::<KEY_LEN>().map_err(malformed)?);
        let identity_block = EncryptedBlock::decode(r)?;
        let count = r.u32().map_err(malformed)? as usize;
        let mut groups = Vec::with_capacity(count.min(r.remaining()));
        for _ in 0..count {
            let chaff_count = r.u8().map_err(malformed)? as usize;
            let real = EncryptedBlock::decode(r)?;
            let chaff = (0..chaff_count)
                .map(|_| EncryptedBlock::decode(r))
                .collect::<Result<_, _>>()?;
            groups.push(SubmittedGroup { real, chaff });
        }
        Ok(Self {
            user_id,
            verifier_salt,
            verifier_hash,
            kdf_salt,
            kdf_iterations,
            transport_key,
            identity_block,
            groups,
        })
    }
}

/// Server-side enrollment state for one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollmentRecord {
    pub user_id: String,
    pub verifier_hash: [u8; 32],
    pub verifier_salt: [u8; SALT_LEN],
    pub kdf_salt: [u8; SALT_LEN],
    pub kdf_iterations: u32,
    pub transport_key: TransportKey,
    /// User-layer block holding the user id; lets the client detect a wrong
    /// password before any challenge is requested.
    pub identity_block: EncryptedBlock,
    pub revoked: bool,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub pairs: Vec<BlockPair>,
}

impl EnrollmentRecord {
    /// Applies the server layer to every submitted block and assigns pair ids.
    pub fn from_submission(
        sub: EnrollmentSubmission,
        server_sealer: &mut impl Sealer,
        pair_ids: &[u32],
        created_at: u64,
    ) -> Result<Self, VaultError> {
        if server_sealer.layer() != Layer::Server {
            return Err(VaultError::Misaligned("server sealer must use the server layer".into()));
        }
        if pair_ids.len() != sub.groups.len() {
            return Err(VaultError::Misaligned(format!(
                "{} pair ids for {} groups",
                pair_ids.len(),
                sub.groups.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if !pair_ids.iter().all(|id| seen.insert(*id)) {
            return Err(VaultError::Misaligned("duplicate pair id".into()));
        }
        if sub.verifier_hash != verifier_hash(&sub.verifier_salt, &sub.user_id) {
            return Err(VaultError::Malformed("verifier hash does not match user id".into()));
        }
        if sub.identity_block.layer != Layer::User {
            return Err(VaultError::Malformed("identity block must be user-layer".into()));
        }
        let mut pairs = Vec::with_capacity(sub.groups.len());
        for (group, &pair_id) in sub.groups.into_iter().zip(pair_ids) {
            check_group_shape(&group)?;
            let mut wrap = |b: &EncryptedBlock| server_sealer.seal(&b.to_bytes());
            let real = wrap(&group.real)?;
            let mut chaff = group.chaff.iter().map(&mut wrap).collect::<Result<Vec<_>, _>>()?;
            chaff.sort_by_key(EncryptedBlock::to_bytes);
            pairs.push(BlockPair { pair_id, real, chaff });
        }
        Ok(Self {
            user_id: sub.user_id,
            verifier_hash: sub.verifier_hash,
            verifier_salt: sub.verifier_salt,
            kdf_salt: sub.kdf_salt,
            kdf_iterations: sub.kdf_iterations,
            transport_key: sub.transport_key,
            identity_block: sub.identity_block,
            revoked: false,
            created_at,
            pairs,
        })
    }

    pub fn revoke(&mut self) -> Result<(), VaultError> {
        if self.revoked {
            return Err(VaultError::AlreadyRevoked);
        }
        self.revoked = true;
        Ok(())
    }

    pub fn pair(&self, pair_id: u32) -> Option<&BlockPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_bytes(RECORD_MAGIC);
        w.put_str(&self.user_id);
        w.put_bytes(&self.verifier_hash);
        w.put_bytes(&self.verifier_salt);
        w.put_bytes(&self.kdf_salt);
        w.put_u32(self.kdf_iterations);
        w.put_bytes(self.transport_key.key_bytes());
        self.identity_block.encode(&mut w);
        w.put_u8(self.revoked as u8);
        w.put_u64(self.created_at);
        w.put_u32(self.pairs.len() as u32);
        let mut slots = Vec::with_capacity(self.pairs.len());
        for pair in &self.pairs {
            let (blocks, slot) = pair.stored_order();
            w.put_u32(pair.pair_id);
            w.put_u8(blocks.len() as u8);
            for b in &blocks {
                w.put_bytes(b);
            }
            slots.push(slot);
        }
        w.put_bytes(&slots);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VaultError> {
        let mut r = ByteReader::new(bytes);
        if r.take(4).map_err(malformed)? != RECORD_MAGIC {
            return Err(VaultError::Malformed("bad record magic".into()));
        }
        let user_id = r.string().map_err(malformed)?;
        let verifier_hash = r.array().map_err(malformed)?;
        let verifier_salt = r.array().map_err(malformed)?;
        let kdf_salt = r.array().map_err(malformed)?;
        let kdf_iterations = r.u32().map_err(malformed)?;
        let transport_key = TransportKey::from_bytes(r.array::<KEY_LEN>().map_err(malformed)?);
        let identity_block = EncryptedBlock::decode(&mut r)?;
        let revoked = match r.u8().map_err(malformed)? {
            0 => false,
            1 => true,
            v => return Err(VaultError::Malformed(format!("revoked flag {v}"))),
        };
        let created_at = r.u64().map_err(malformed)?;
        let count = r.u32().map_err(malformed)? as usize;
        let mut stored = Vec::with_capacity(count.min(r.remaining()));
        for _ in 0..count {
            let pair_id = r.u32().map_err(malformed)?;
            let n = r.u8().map_err(malformed)? as usize;
            let blocks = (0..n)
                .map(|_| EncryptedBlock::decode(&mut r))
                .collect::<Result<Vec<_>, _>>()?;
            stored.push((pair_id, blocks));
        }
        let slots = r.take(count).map_err(malformed)?;
        r.finish().map_err(malformed)?;
        let mut pairs = Vec::with_capacity(count);
        for ((pair_id, mut blocks), &slot) in stored.into_iter().zip(slots) {
            if (slot as usize) >= blocks.len() {
                return Err(VaultError::Malformed(format!("real slot {slot} out of range in pair {pair_id}")));
            }
            let real = blocks.remove(slot as usize);
            let pair = BlockPair { pair_id, real, chaff: blocks };
            check_shape(pair.block_count())?;
            pairs.push(pair);
        }
        Ok(Self {
            user_id,
            verifier_hash,
            verifier_salt,
            kdf_salt,
            kdf_iterations,
            transport_key,
            identity_block,
            revoked,
            created_at,
            pairs,
        })
    }
}

fn malformed(e: DecodeError) -> VaultError {
    VaultError::Malformed(e.to_string())
}

fn check_shape(blocks: usize) -> Result<(), VaultError> {
    if blocks < 2 || !blocks.is_power_of_two() {
        return Err(VaultError::Misaligned(format!(
            "a challenge entry needs a power-of-two block count of at least 2, got {blocks}"
        )));
    }
    Ok(())
}

fn check_group_shape(g: &SubmittedGroup) -> Result<(), VaultError> {
    check_shape(1 + g.chaff.len())?;
    let len = g.real.ciphertext.len();
    if std::iter::once(&g.real).chain(&g.chaff).any(|b| b.layer != Layer::User || b.ciphertext.len() != len) {
        return Err(VaultError::Malformed("group blocks must be equal-length user-layer blocks".into()));
    }
    Ok(())
}

fn padded_plaintext(model: &[u8], width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + width);
    out.extend_from_slice(&(model.len() as u32).to_le_bytes());
    out.extend_from_slice(model);
    out.resize(4 + width, 0);
    out
}

/// Serializes the real model and its chaff, pads them to a common length and
/// seals each under the user layer.
pub fn seal_model_group(
    real: &PhraseModel,
    chaff: &[PhraseModel],
    user_sealer: &mut impl Sealer,
) -> Result<SubmittedGroup, VaultError> {
    if user_sealer.layer() != Layer::User {
        return Err(VaultError::Misaligned("model blocks must be sealed with the user layer".into()));
    }
    check_shape(1 + chaff.len())?;
    for c in chaff {
        if c.dim() != real.dim() {
            return Err(VaultError::DimensionMismatch(real.dim(), c.dim()));
        }
        if c.transcription() != real.transcription() {
            return Err(VaultError::PhraseMismatch {
                expected: real.transcription().to_string(),
                found: c.transcription().to_string(),
            });
        }
    }
    let real_bytes = real.to_bytes();
    let chaff_bytes: Vec<Vec<u8>> = chaff.iter().map(PhraseModel::to_bytes).collect();
    let width = chaff_bytes.iter().map(Vec::len).fold(real_bytes.len(), usize::max);
    Ok(SubmittedGroup {
        real: user_sealer.seal(&padded_plaintext(&real_bytes, width))?,
        chaff: chaff_bytes
            .iter()
            .map(|b| user_sealer.seal(&padded_plaintext(b, width)))
            .collect::<Result<_, _>>()?,
    })
}

/// Opens a user-layer model block and strips its padding.
pub fn open_model_block(block: &EncryptedBlock, key: &impl KeyMaterial) -> Result<PhraseModel, VaultError> {
    let plain = open(block, key)?;
    let mut r = ByteReader::new(&plain);
    let len = r.u32().map_err(malformed)? as usize;
    let model = r.take(len).map_err(malformed)?;
    if r.take(r.remaining()).map_err(malformed)?.iter().any(|&b| b != 0) {
        return Err(VaultError::Malformed("non-zero padding".into()));
    }
    Ok(PhraseModel::from_bytes(model)?)
}

pub fn seal_identity_block(user_id: &str, user_sealer: &mut impl Sealer) -> Result<EncryptedBlock, VaultError> {
    if user_sealer.layer() != Layer::User {
        return Err(VaultError::Misaligned("identity block must be sealed with the user layer".into()));
    }
    user_sealer.seal(&[IDENTITY_DOMAIN, user_id.as_bytes()].concat())
}

/// Checks that `key` opens the identity block and that it names `user_id`.
pub fn open_identity_block(block: &EncryptedBlock, user_id: &str, key: &impl KeyMaterial) -> Result<(), VaultError> {
    let plain = open(block, key)?;
    if plain != [IDENTITY_DOMAIN, user_id.as_bytes()].concat() {
        return Err(VaultError::Authentication);
    }
    Ok(())
}

/// Builds a complete record in one place, with pair ids `0..n`.
///
/// `chaffs[i]` holds the chaff for `models[i]`; every group must have
/// `2^b - 1` chaff models. Nonces are derived from `seed`.
pub fn build_enrollment(
    user_id: &str,
    models: &[PhraseModel],
    chaffs: &[Vec<PhraseModel>],
    user_key: &UserKey,
    server_key: &ServerKey,
    seed: u64,
    created_at: u64,
) -> Result<EnrollmentRecord, VaultError> {
    if models.len() != chaffs.len() {
        return Err(VaultError::Misaligned(format!(
            "{} models but {} chaff groups",
            models.len(),
            chaffs.len()
        )));
    }
    let mut user_sealer = SymmetricSealer::new(user_key, Layer::User, seed);
    let groups = models
        .iter()
        .zip(chaffs)
        .map(|(m, c)| seal_model_group(m, c, &mut user_sealer))
        .collect::<Result<Vec<_>, _>>()?;
    let mut verifier_salt = [0u8; SALT_LEN];
    verifier_salt[..8].copy_from_slice(&seed.to_le_bytes());
    let sub = EnrollmentSubmission::new(user_id, verifier_salt, user_key, &mut user_sealer, groups)?;
    let mut server_sealer = SymmetricSealer::new(server_key, Layer::Server, seed ^ 0x5eed_5eed_5eed_5eed);
    let ids: Vec<u32> = (0..models.len() as u32).collect();
    EnrollmentRecord::from_submission(sub, &mut server_sealer, &ids, created_at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{GaussianComponent, MODEL_MAGIC};
    use crate::vault::{derive_user_key, MIN_KDF_ITERATIONS};

    fn model(phrase: &str, mean: f64, n: usize) -> PhraseModel {
        let comps = (0..n)
            .map(|i| GaussianComponent {
                weight: 1.0 / n as f64,
                mean: vec![mean + i as f64, -mean],
                variance: vec![1.0, 0.5],
            })
            .collect();
        PhraseModel::new(comps, phrase, 100).unwrap()
    }

    fn fixture(phrases: usize) -> (UserKey, ServerKey, EnrollmentRecord) {
        let uk = derive_user_key("pw", [3; 16], MIN_KDF_ITERATIONS).unwrap();
        let sk = ServerKey::from_seed(11);
        let models: Vec<_> = (0..phrases).map(|i| model(&format!("phrase {i}"), i as f64, 2)).collect();
        // chaff with a different component count, so the raw lengths differ
        let chaffs: Vec<_> = (0..phrases)
            .map(|i| vec![model(&format!("phrase {i}"), 50.0 + i as f64, 3)])
            .collect();
        let rec = build_enrollment("alice", &models, &chaffs, &uk, &sk, 7, 1_700_000_000).unwrap();
        (uk, sk, rec)
    }

    #[test]
    fn structure_and_padding() {
        let (uk, sk, rec) = fixture(12);
        assert_eq!(rec.pairs.len(), 12);
        for (i, p) in rec.pairs.iter().enumerate() {
            assert_eq!(p.real.ciphertext.len(), p.chaff[0].ciphertext.len());
            let (real, chaff) = p.open_server_layer(&sk).unwrap();
            assert_eq!(open_model_block(&real, &uk).unwrap(), model(&format!("phrase {i}"), i as f64, 2));
            assert_eq!(open_model_block(&chaff[0], &uk).unwrap().num_components(), 3);
        }
        open_identity_block(&rec.identity_block, "alice", &uk).unwrap();
        assert_eq!(open_identity_block(&rec.identity_block, "bob", &uk), Err(VaultError::Authentication));
    }

    #[test]
    fn record_bytes_round_trip_and_hide_models() {
        let (_, _, rec) = fixture(4);
        let bytes = rec.to_bytes();
        assert!(!bytes.windows(4).any(|w| w == MODEL_MAGIC));
        let back = EnrollmentRecord::from_bytes(&bytes).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_bytes(), bytes);
        assert!(EnrollmentRecord::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 9;
        assert!(EnrollmentRecord::from_bytes(&bad).is_err());
    }

    #[test]
    fn server_key_alone_recovers_no_model() {
        let (_, sk, rec) = fixture(6);
        for p in &rec.pairs {
            for outer in std::iter::once(&p.real).chain(&p.chaff) {
                let inner = open(outer, &sk).unwrap();
                assert!(PhraseModel::from_bytes(&inner).is_err());
                let block = EncryptedBlock::from_bytes(&inner).unwrap();
                assert_eq!(open_model_block(&block, &sk), Err(VaultError::Authentication));
            }
        }
    }

    #[test]
    fn revoke_is_flagged_and_persisted() {
        let (_, _, mut rec) = fixture(2);
        rec.revoke().unwrap();
        let snapshot = rec.clone();
        assert_eq!(rec.revoke(), Err(VaultError::AlreadyRevoked));
        assert_eq!(rec, snapshot);
        assert!(EnrollmentRecord::from_bytes(&rec.to_bytes()).unwrap().revoked);
    }

    #[test]
    fn misaligned_inputs() {
        let uk = derive_user_key("pw", [3; 16], MIN_KDF_ITERATIONS).unwrap();
        let sk = ServerKey::from_seed(1);
        let m = vec![model("a", 0.0, 1)];
        assert!(matches!(
            build_enrollment("u", &m, &[], &uk, &sk, 0, 0),
            Err(VaultError::Misaligned(_))
        ));
        let three = vec![vec![model("a", 1.0, 1), model("a", 2.0, 1)]];
        assert!(matches!(
            build_enrollment("u", &m, &three, &uk, &sk, 0, 0),
            Err(VaultError::Misaligned(_))
        ));
        let wrong_phrase = vec![vec![model("b", 1.0, 1)]];
        assert!(matches!(
            build_enrollment("u", &m, &wrong_phrase, &uk, &sk, 0, 0),
            Err(VaultError::PhraseMismatch { .. })
        ));
    }

    #[test]
    fn multi_bit_groups() {
        let uk = derive_user_key("pw", [3; 16], MIN_KDF_ITERATIONS).unwrap();
        let sk = ServerKey::from_seed(1);
        let m = vec![model("a", 0.0, 1)];
        let c = vec![(1..4).map(|i| model("a", i as f64 * 10.0, i)).collect::<Vec<_>>()];
        let rec = build_enrollment("u", &m, &c, &uk, &sk, 0, 0).unwrap();
        assert_eq!(rec.pairs[0].bits(), 2);
        let back = EnrollmentRecord::from_bytes(&rec.to_bytes()).unwrap();
        assert_eq!(back, rec);
        let (real, _) = back.pairs[0].open_server_layer(&sk).unwrap();
        assert_eq!(open_model_block(&real, &uk).unwrap(), m[0]);
    }

    #[test]
    fn submission_round_trip() {
        let uk = derive_user_key("pw", [3; 16], MIN_KDF_ITERATIONS).unwrap();
        let mut s = SymmetricSealer::new(&uk, Layer::User, 2);
        let g = seal_model_group(&model("a", 0.0, 1), &[model("a", 5.0, 2)], &mut s).unwrap();
        let sub = EnrollmentSubmission::new("u", [1; 16], &uk, &mut s, vec![g]).unwrap();
        let mut w = ByteWriter::new();
        sub.encode(&mut w);
        let bytes = w.into_inner();
        let mut r = ByteReader::new(&bytes);
        assert_eq!(EnrollmentSubmission::decode(&mut r).unwrap(), sub);
        r.finish().unwrap();
    }
}
