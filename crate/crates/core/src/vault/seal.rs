use chacha20poly1305::aead::{AeadInPlace, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce, Tag};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{KeyMaterial, VaultError};
use crate::bytes::{ByteReader, ByteWriter};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

/// Which party's key sealed a block. Bound into the authenticated data, so
/// a block cannot be opened as the other layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    User,
    Server,
}

impl Layer {
    fn tag(self) -> u8 {
        match self {
            Layer::User => 1,
            Layer::Server => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Layer::User),
            2 => Some(Layer::Server),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedBlock {
    pub layer: Layer,
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl EncryptedBlock {
    /// `layer: u8 | nonce: [u8; 12] | len: u32 | ciphertext | tag: [u8; 16]`.
    pub fn encode(&self, w: &mut ByteWriter) {
        w.put_u8(self.layer.tag());
        w.put_bytes(&self.nonce);
        w.put_blob(&self.ciphertext);
        w.put_bytes(&self.tag);
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self, VaultError> {
        let bad = |e: crate::bytes::DecodeError| VaultError::Malformed(format!("encrypted block: {e}"));
        let tag = r.u8().map_err(bad)?;
        let layer = Layer::from_tag(tag)
            .ok_or_else(|| VaultError::Malformed(format!("unknown layer tag {tag}")))?;
        let nonce = r.array().map_err(bad)?;
        let ciphertext = r.blob().map_err(bad)?.to_vec();
        let tag = r.array().map_err(bad)?;
        Ok(Self {
            layer,
            nonce,
            ciphertext,
            tag,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.encode(&mut w);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VaultError> {
        let mut r = ByteReader::new(bytes);
        let block = Self::decode(&mut r)?;
        r.finish()
            .map_err(|e| VaultError::Malformed(format!("encrypted block: {e}")))?;
        Ok(block)
    }

    pub fn encoded_len(&self) -> usize {
        1 + NONCE_LEN + 4 + self.ciphertext.len() + TAG_LEN
    }
}

/// Authenticated sealing for one protocol layer.
///
/// The protocol only depends on who can open which layer, so an
/// asymmetric implementation can replace [`SymmetricSealer`] here.
pub trait Sealer {
    fn layer(&self) -> Layer;
    fn seal(&mut self, plaintext: &[u8]) -> Result<EncryptedBlock, VaultError>;
    fn open(&self, block: &EncryptedBlock) -> Result<Vec<u8>, VaultError>;
}

/// ChaCha20-Poly1305 reference sealer.
///
/// Nonces are 8 bytes from a per-sealer ChaCha20 stream followed by a
/// 32-bit counter, so a sealer never repeats a nonce and refuses to seal
/// once the counter is spent. One sealer per key per thread.
pub struct SymmetricSealer {
    cipher: ChaCha20Poly1305,
    layer: Layer,
    nonce_rng: ChaCha20Rng,
    counter: Option<u32>,
}

impl SymmetricSealer {
    /// Deterministic nonce stream derived from `nonce_seed`.
    pub fn new(key: &impl KeyMaterial, layer: Layer, nonce_seed: u64) -> Self {
        Self::with_rng(key, layer, ChaCha20Rng::seed_from_u64(nonce_seed))
    }

    /// Nonce stream seeded from the operating system.
    pub fn from_entropy(key: &impl KeyMaterial, layer: Layer) -> Self {
        Self::with_rng(key, layer, ChaCha20Rng::from_entropy())
    }

    fn with_rng(key: &impl KeyMaterial, layer: Layer, nonce_rng: ChaCha20Rng) -> Self {
        Self {
            cipher: ChaCha20Poly1305::new(Key::from_slice(key.key_bytes())),
            layer,
            nonce_rng,
            counter: Some(0),
        }
    }

    #[cfg(test)]
    pub(crate) fn set_counter(&mut self, next: u32) {
        self.counter = Some(next);
    }

    fn next_nonce(&mut self) -> Result<[u8; NONCE_LEN], VaultError> {
        let count = self.counter.ok_or(VaultError::NonceExhausted)?;
        self.counter = count.checked_add(1);
        let mut nonce = [0u8; NONCE_LEN];
        self.nonce_rng.fill_bytes(&mut nonce[..8]);
        nonce[8..].copy_from_slice(&count.to_le_bytes());
        Ok(nonce)
    }
}

impl Sealer for SymmetricSealer {
    fn layer(&self) -> Layer {
        self.layer
    }

    fn seal(&mut self, plaintext: &[u8]) -> Result<EncryptedBlock, VaultError> {
        let nonce = self.next_nonce()?;
        let mut ciphertext = plaintext.to_vec();
        let tag = self
            .cipher
            .encrypt_in_place_detached(Nonce::from_slice(&nonce), &[self.layer.tag()], &mut ciphertext)
            .map_err(|_| VaultError::Malformed("plaintext too long".into()))?;
        Ok(EncryptedBlock {
            layer: self.layer,
            nonce,
            ciphertext,
            tag: tag.into(),
        })
    }

    fn open(&self, block: &EncryptedBlock) -> Result<Vec<u8>, VaultError> {
        open_with(&self.cipher, block)
    }
}

fn open_with(cipher: &ChaCha20Poly1305, block: &EncryptedBlock) -> Result<Vec<u8>, VaultError> {
    let mut plaintext = block.ciphertext.clone();
    cipher
        .decrypt_in_place_detached(
            Nonce::from_slice(&block.nonce),
            &[block.layer.tag()],
            &mut plaintext,
            Tag::from_slice(&block.tag),
        )
        .map_err(|_| VaultError::Authentication)?;
    Ok(plaintext)
}

/// Opens a block with the reference cipher. Wrong keys and tampering both
/// report [`VaultError::Authentication`].
pub fn open(block: &EncryptedBlock, key: &impl KeyMaterial) -> Result<Vec<u8>, VaultError> {
    open_with(&ChaCha20Poly1305::new(Key::from_slice(key.key_bytes())), block)
}
