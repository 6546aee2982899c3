//! Server-side challenge construction. Nothing here parses a model.

use rand::seq::{index, SliceRandom};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::bitstring::{bits_to_index, ChallengeBitstring};
use super::{ProtocolError, NONCE_BYTES};
use crate::bytes::{ByteReader, ByteWriter};
use crate::vault::{EncryptedBlock, EnrollmentRecord, Layer, Sealer, ServerKey, SymmetricSealer, VaultError};

/// Nonce-stamped challenge, sealed for the user as a whole.
///
/// The sealed plaintext is
/// `nonce | entry_count: u32 | entry_count x (pair_id: u32 | k: u8 | k x block)`
/// where the blocks are user-layer model blocks in challenge order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeSet {
    pub nonce: [u8; NONCE_BYTES],
    pub sealed: EncryptedBlock,
}

/// One decrypted-to-user-layer challenge entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeEntry {
    pub pair_id: u32,
    pub blocks: Vec<EncryptedBlock>,
}

impl ChallengeEntry {
    pub fn bits(&self) -> u32 {
        self.blocks.len().trailing_zeros()
    }
}

/// Picks `n` pairs, orders their blocks by a fresh balanced bitstring and
/// seals the result to the user's transport key.
///
/// For a two-block pair, bit 0 puts the real block first. For a `2^b`-block
/// entry, `b` consecutive bits (least significant first) give the position of
/// the real block and the chaff fill the remaining slots in shuffled order.
pub fn server_issue_challenge(
    record: &EnrollmentRecord,
    server_key: &ServerKey,
    n: usize,
    rng_seed: u64,
) -> Result<(ChallengeBitstring, ChallengeSet), ProtocolError> {
    if record.revoked {
        return Err(ProtocolError::Revoked);
    }
    let total = record.pairs.len();
    if n == 0 || n > total {
        return Err(ProtocolError::TooManyPairs {
            requested: n,
            available: total,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut chosen: Vec<usize> = if n < total {
        index::sample(&mut rng, total, n).into_vec()
    } else {
        (0..total).collect()
    };
    chosen.sort_unstable();

    let bit_len = chosen.iter().map(|&i| record.pairs[i].bits() as usize).sum();
    let bitstring = ChallengeBitstring::balanced(bit_len, rng.next_u64());
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);

    let mut entries = Vec::with_capacity(n);
    let mut cursor = 0;
    for &i in &chosen {
        let pair = &record.pairs[i];
        let width = pair.bits() as usize;
        let slot = bits_to_index(&bitstring.bits()[cursor..cursor + width]);
        cursor += width;
        let (real, mut blocks) = pair.open_server_layer(server_key)?;
        blocks.shuffle(&mut rng);
        blocks.insert(slot, real);
        entries.push(ChallengeEntry {
            pair_id: pair.pair_id,
            blocks,
        });
    }

    let plaintext = encode_entries(&nonce, &entries);
    let mut sealer = SymmetricSealer::new(&record.transport_key, Layer::User, rng.next_u64());
    let sealed = sealer.seal(&plaintext)?;
    Ok((bitstring, ChallengeSet { nonce, sealed }))
}

pub(crate) fn encode_entries(nonce: &[u8; NONCE_BYTES], entries: &[ChallengeEntry]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_bytes(nonce);
    w.put_u32(entries.len() as u32);
    for e in entries {
        w.put_u32(e.pair_id);
        w.put_u8(e.blocks.len() as u8);
        for b in &e.blocks {
            b.encode(&mut w);
        }
    }
    w.into_inner()
}

pub(crate) fn decode_entries(bytes: &[u8]) -> Result<([u8; NONCE_BYTES], Vec<ChallengeEntry>), ProtocolError> {
    let bad = |e: crate::bytes::DecodeError| ProtocolError::Vault(VaultError::Malformed(format!("challenge: {e}")));
    let mut r = ByteReader::new(bytes);
    let nonce = r.array().map_err(bad)?;
    let count = r.u32().map_err(bad)? as usize;
    let mut entries = Vec::with_capacity(count.min(r.remaining()));
    for _ in 0..count {
        let pair_id = r.u32().map_err(bad)?;
        let k = r.u8().map_err(bad)? as usize;
        if k < 2 || !k.is_power_of_two() {
            return Err(ProtocolError::Vault(VaultError::Malformed(format!(
                "challenge entry with {k} blocks"
            ))));
        }
        let blocks = (0..k)
            .map(|_| EncryptedBlock::decode(&mut r))
            .collect::<Result<_, _>>()?;
        entries.push(ChallengeEntry { pair_id, blocks });
    }
    r.finish().map_err(bad)?;
    Ok((nonce, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{GaussianComponent, PhraseModel};
    use crate::vault::{build_enrollment, derive_user_key, open, MIN_KDF_ITERATIONS};

    fn record(phrases: usize) -> (crate::vault::UserKey, ServerKey, EnrollmentRecord) {
        let uk = derive_user_key("pw", [1; 16], MIN_KDF_ITERATIONS).unwrap();
        let sk = ServerKey::from_seed(2);
        let m = |p: usize, mu: f64| {
            PhraseModel::new(
                vec![GaussianComponent {
                    weight: 1.0,
                    mean: vec![mu],
                    variance: vec![1.0],
                }],
                format!("p{p}"),
                1,
            )
            .unwrap()
        };
        let models: Vec<_> = (0..phrases).map(|p| m(p, 0.0)).collect();
        let chaffs: Vec<_> = (0..phrases).map(|p| vec![m(p, 9.0)]).collect();
        let rec = build_enrollment("u", &models, &chaffs, &uk, &sk, 3, 0).unwrap();
        (uk, sk, rec)
    }

    #[test]
    fn bit_zero_puts_real_first() {
        let (uk, sk, rec) = record(1);
        let (real, _) = rec.pairs[0].open_server_layer(&sk).unwrap();
        for seed in 0..32 {
            let (bits, set) = server_issue_challenge(&rec, &sk, 1, seed).unwrap();
            let plain = open(&set.sealed, &uk.transport_key()).unwrap();
            let (nonce, entries) = decode_entries(&plain).unwrap();
            assert_eq!(nonce, set.nonce);
            let real_pos = entries[0].blocks.iter().position(|b| *b == real).unwrap();
            assert_eq!(real_pos, usize::from(bits.bits()[0]));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (_, sk, rec) = record(6);
        let a = server_issue_challenge(&rec, &sk, 4, 10).unwrap();
        let b = server_issue_challenge(&rec, &sk, 4, 10).unwrap();
        assert_eq!(a, b);
        let c = server_issue_challenge(&rec, &sk, 4, 11).unwrap();
        assert_ne!(a.1.nonce, c.1.nonce);
    }

    #[test]
    fn errors() {
        let (_, sk, mut rec) = record(2);
        assert!(matches!(
            server_issue_challenge(&rec, &sk, 3, 0),
            Err(ProtocolError::TooManyPairs { requested: 3, available: 2 })
        ));
        assert!(server_issue_challenge(&rec, &sk, 0, 0).is_err());
        rec.revoke().unwrap();
        assert_eq!(server_issue_challenge(&rec, &sk, 1, 0), Err(ProtocolError::Revoked));
    }
}
