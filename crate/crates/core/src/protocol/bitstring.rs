use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ProtocolError, NONCE_BYTES};

/// The server's secret ordering bits for one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeBitstring {
    bits: Vec<bool>,
    seed: u64,
}

impl ChallengeBitstring {
    /// Shuffles a multiset holding half ones. For odd lengths the extra bit
    /// is a one or a zero with equal probability.
    pub fn balanced(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ones = len / 2 + usize::from(len % 2 == 1 && rng.gen::<bool>());
        let mut bits: Vec<bool> = (0..len).map(|i| i < ones).collect();
        bits.shuffle(&mut rng);
        Self { bits, seed }
    }

    pub fn from_bits(bits: Vec<bool>, seed: u64) -> Self {
        Self { bits, seed }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Popcount lies within one of `len / 2`.
    pub fn is_balanced(&self) -> bool {
        (2 * self.popcount()).abs_diff(self.len()) <= 2
    }
}

/// The client's answer: one bit per challenged bit, plus the nonce echo.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseBitstring {
    pub bits: Vec<bool>,
    pub nonce: [u8; NONCE_BYTES],
}

/// Outcome of scoring one response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionDecision {
    pub correct: u32,
    pub total: u32,
    pub threshold: f64,
    pub accept: bool,
    pub transcript_id: u64,
}

impl SessionDecision {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            f64::from(self.correct) / f64::from(self.total)
        }
    }
}

/// Reads `bits` as a little-endian integer.
pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().enumerate().map(|(i, &b)| usize::from(b) << i).sum()
}

/// Inverse of [`bits_to_index`] for `width` bits.
pub fn index_to_bits(index: usize, width: u32) -> Vec<bool> {
    (0..width).map(|i| (index >> i) & 1 == 1).collect()
}

/// Counts matching bits and applies `threshold`. The caller is responsible
/// for destroying the session afterwards.
pub fn server_score_response(
    resp: &ResponseBitstring,
    expected: &ChallengeBitstring,
    nonce: &[u8; NONCE_BYTES],
    threshold: f64,
    transcript_id: u64,
) -> Result<SessionDecision, ProtocolError> {
    check_threshold(threshold)?;
    if &resp.nonce != nonce {
        return Err(ProtocolError::NonceMismatch);
    }
    if resp.bits.len() != expected.len() {
        return Err(ProtocolError::LengthMismatch {
            expected: expected.len(),
            got: resp.bits.len(),
        });
    }
    let correct = resp.bits.iter().zip(expected.bits()).filter(|(a, b)| a == b).count() as u32;
    let total = expected.len() as u32;
    Ok(SessionDecision {
        correct,
        total,
        threshold,
        accept: total > 0 && f64::from(correct) / f64::from(total) >= threshold,
        transcript_id,
    })
}

pub(crate) fn check_threshold(threshold: f64) -> Result<(), ProtocolError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ProtocolError::InvalidConfig(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn always_balanced(len in 0usize..64, seed in any::<u64>()) {
            let b = ChallengeBitstring::balanced(len, seed);
            prop_assert_eq!(b.len(), len);
            prop_assert!(b.is_balanced());
            prop_assert_eq!(ChallengeBitstring::balanced(len, seed), b);
        }

        #[test]
        fn index_bits_round_trip(width in 1u32..8, raw in any::<usize>()) {
            let idx = raw % (1 << width);
            prop_assert_eq!(bits_to_index(&index_to_bits(idx, width)), idx);
        }
    }

    #[test]
    fn odd_lengths_use_both_roundings() {
        let counts: std::collections::BTreeSet<usize> =
            (0..64).map(|s| ChallengeBitstring::balanced(5, s).popcount()).collect();
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn scoring() {
        let expected = ChallengeBitstring::from_bits(vec![true, false, true, true], 0);
        let nonce = [1; NONCE_BYTES];
        let perfect = ResponseBitstring {
            bits: expected.bits().to_vec(),
            nonce,
        };
        let d = server_score_response(&perfect, &expected, &nonce, 1.0, 3).unwrap();
        assert!(d.accept && d.correct == 4 && d.total == 4 && d.transcript_id == 3);
        let flipped = ResponseBitstring {
            bits: expected.bits().iter().map(|b| !b).collect(),
            nonce,
        };
        let d = server_score_response(&flipped, &expected, &nonce, 0.5, 0).unwrap();
        assert!(!d.accept && d.correct == 0);
        assert_eq!(
            server_score_response(&perfect, &expected, &[2; NONCE_BYTES], 0.5, 0),
            Err(ProtocolError::NonceMismatch)
        );
        let short = ResponseBitstring { bits: vec![true], nonce };
        assert!(matches!(
            server_score_response(&short, &expected, &nonce, 0.5, 0),
            Err(ProtocolError::LengthMismatch { expected: 4, got: 1 })
        ));
        assert!(server_score_response(&perfect, &expected, &nonce, 1.5, 0).is_err());
    }
}
