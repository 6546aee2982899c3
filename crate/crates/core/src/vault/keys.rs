use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::VaultError;
use crate::bytes::ByteReader;

/// Lowest accepted password-stretching iteration count.
pub const MIN_KDF_ITERATIONS: u32 = 10_000;
pub const KEY_LEN: usize = 32;
pub const SALT_LEN: usize = 16;

const SERVER_KEY_MAGIC: &[u8; 4] = b"VVK1";

/// Raw symmetric key material usable by the reference sealer.
pub trait KeyMaterial {
    fn key_bytes(&self) -> &[u8; KEY_LEN];
}

/// K_U: stretched from the user's password; never leaves the client.
#[derive(Clone, PartialEq, Eq)]
pub struct UserKey {
    key: [u8; KEY_LEN],
    salt: [u8; SALT_LEN],
    iterations: u32,
}

impl fmt::Debug for UserKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserKey")
            .field("salt", &hex::encode(self.salt))
            .field("iterations", &self.iterations)
            .finish_non_exhaustive()
    }
}

/// PBKDF2-HMAC-SHA256 over the password and salt.
pub fn derive_user_key(password: &str, salt: [u8; SALT_LEN], iterations: u32) -> Result<UserKey, VaultError> {
    if password.is_empty() {
        return Err(VaultError::EmptyPassword);
    }
    if iterations < MIN_KDF_ITERATIONS {
        return Err(VaultError::WeakIterations(iterations));
    }
    let mut key = [0u8; KEY_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), &salt, iterations, &mut key);
    Ok(UserKey {
        key,
        salt,
        iterations,
    })
}

impl UserKey {
    pub fn salt(&self) -> [u8; SALT_LEN] {
        self.salt
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    /// The key the server uses to seal challenge sets for this user.
    ///
    /// It stands in for the public half of K_U: the server can seal to it
    /// but holding it does not open any model block.
    pub fn transport_key(&self) -> TransportKey {
        let mut h = Sha256::new();
        h.update(b"vvv/transport/v1");
        h.update(self.key);
        TransportKey(h.finalize().into())
    }
}

impl KeyMaterial for UserKey {
    fn key_bytes(&self) -> &[u8; KEY_LEN] {
        &self.key
    }
}

/// Challenge-sealing key registered with the server at enrollment.
#[derive(Clone, PartialEq, Eq)]
pub struct TransportKey([u8; KEY_LEN]);

impl TransportKey {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }
}

impl fmt::Debug for TransportKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TransportKey(..)")
    }
}

impl KeyMaterial for TransportKey {
    fn key_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

/// K_S: held only by the server.
#[derive(Clone, PartialEq, Eq)]
pub struct ServerKey {
    key: [u8; KEY_LEN],
    key_id: u64,
}

impl fmt::Debug for ServerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ServerKey {{ key_id: {:016x}, .. }}", self.key_id)
    }
}

impl ServerKey {
    pub fn from_bytes(key: [u8; KEY_LEN]) -> Self {
        let digest = Sha256::new()
            .chain_update(b"vvv/key-id")
            .chain_update(key)
            .finalize();
        let key_id = u64::from_le_bytes(digest[..8].try_into().unwrap());
        Self { key, key_id }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut key = [0u8; KEY_LEN];
        rng.fill_bytes(&mut key);
        Self::from_bytes(key)
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::generate(&mut ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    /// `"VVK1" | key_id: u64 LE | key: [u8; 32]`.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = SERVER_KEY_MAGIC.to_vec();
        out.extend_from_slice(&self.key_id.to_le_bytes());
        out.extend_from_slice(&self.key);
        out
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, VaultError> {
        let bad = |m: &str| VaultError::Malformed(format!("server key file: {m}"));
        let mut r = ByteReader::new(bytes);
        if r.take(4).map_err(|e| bad(&e.to_string()))? != SERVER_KEY_MAGIC {
            return Err(bad("bad magic"));
        }
        let key_id = r.u64().map_err(|e| bad(&e.to_string()))?;
        let key: [u8; KEY_LEN] = r.array().map_err(|e| bad(&e.to_string()))?;
        r.finish().map_err(|e| bad(&e.to_string()))?;
        let parsed = Self::from_bytes(key);
        if parsed.key_id != key_id {
            return Err(bad("key id does not match key"));
        }
        Ok(parsed)
    }
}

impl KeyMaterial for ServerKey {
    fn key_bytes(&self) -> &[u8; KEY_LEN] {
        &self.key
    }
}

/// Salted SHA-256 of the identifying information sent at enrollment.
pub fn verifier_hash(salt: &[u8; SALT_LEN], identity: &str) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"vvv/verifier/v1")
        .chain_update(salt)
        .chain_update(identity.as_bytes())
        .finalize()
        .into()
}
