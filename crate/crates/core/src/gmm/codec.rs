//! `VVM1` model encoding:
//!
//! ```text
//! "VVM1" | F: u32 | N: u32 | len: u32 | transcription (UTF-8)
//!        | N x (weight: f64 | F x mean: f64 | F x variance: f64)
//!        | training_frame_count: u64
//! ```
//!
//! All integers and floats are little-endian.

use super::{GaussianComponent, GmmError, PhraseModel};
use crate::bytes::{ByteReader, ByteWriter};

pub const MODEL_MAGIC: &[u8; 4] = b"VVM1";

impl PhraseModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_bytes(MODEL_MAGIC);
        w.put_u32(self.dim as u32);
        w.put_u32(self.components.len() as u32);
        w.put_str(&self.transcription);
        for c in &self.components {
            w.put_f64(c.weight);
            for &m in &c.mean {
                w.put_f64(m);
            }
            for &v in &c.variance {
                w.put_f64(v);
            }
        }
        w.put_u64(self.training_frame_count);
        w.into_inner()
    }

    /// Strict decode: trailing bytes and invariant violations are errors.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GmmError> {
        let err = |e: crate::bytes::DecodeError| GmmError::Decode(e.to_string());
        let mut r = ByteReader::new(bytes);
        if r.take(4).map_err(err)? != MODEL_MAGIC {
            return Err(GmmError::Decode("bad model magic".into()));
        }
        let dim = r.u32().map_err(err)? as usize;
        let n = r.u32().map_err(err)? as usize;
        let transcription = r.string().map_err(err)?;
        // reject absurd headers before allocating
        let needed = n.saturating_mul(dim.saturating_mul(16).saturating_add(8));
        if dim == 0 || n == 0 || needed > r.remaining() {
            return Err(GmmError::Decode(format!("inconsistent header: F={dim}, N={n}")));
        }
        let mut components = Vec::with_capacity(n);
        for _ in 0..n {
            let weight = r.f64().map_err(err)?;
            let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>().map_err(err)?;
            let variance = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>().map_err(err)?;
            components.push(GaussianComponent { weight, mean, variance });
        }
        let frames = r.u64().map_err(err)?;
        r.finish().map_err(err)?;
        let model = PhraseModel::new(components, transcription, frames)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_model() -> impl Strategy<Value = PhraseModel> {
        (1usize..4, 1usize..5, "[a-z ]{0,12}", any::<u32>()).prop_flat_map(|(n, dim, text, frames)| {
            (
                prop::collection::vec(1u32..100, n),
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, dim), n),
                prop::collection::vec(prop::collection::vec(1e-4f64..10.0, dim), n),
            )
                .prop_map(move |(raw_w, means, vars)| {
                    let total: u32 = raw_w.iter().sum();
                    let comps = raw_w
                        .iter()
                        .zip(means)
                        .zip(vars)
                        .map(|((w, mean), variance)| GaussianComponent {
                            weight: *w as f64 / total as f64,
                            mean,
                            variance,
                        })
                        .collect();
                    PhraseModel::new(comps, text.clone(), frames as u64).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(m in arb_model()) {
            let bytes = m.to_bytes();
            let back = PhraseModel::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn layout() {
        let m = PhraseModel::new(
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.5],
                variance: vec![2.0],
            }],
            "hi",
            7,
        )
        .unwrap();
        let b = m.to_bytes();
        assert_eq!(&b[..4], b"VVM1");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(&b[16..18], b"hi");
        assert_eq!(&b[18..26], &1.0f64.to_le_bytes());
        assert_eq!(&b[26..34], &0.5f64.to_le_bytes());
        assert_eq!(&b[34..42], &2.0f64.to_le_bytes());
        assert_eq!(&b[42..50], &7u64.to_le_bytes());
        assert_eq!(b.len(), 50);
    }

    #[test]
    fn rejects_garbage() {
        assert!(PhraseModel::from_bytes(b"").is_err());
        assert!(PhraseModel::from_bytes(b"VVM2\0\0\0\0").is_err());
        let m = PhraseModel::new(
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.5],
                variance: vec![2.0],
            }],
            "hi",
            7,
        )
        .unwrap();
        let mut b = m.to_bytes();
        b.push(0);
        assert!(PhraseModel::from_bytes(&b).is_err());
        let b = m.to_bytes();
        assert!(PhraseModel::from_bytes(&b[..b.len() - 1]).is_err());
        let mut huge = b"VVM1".to_vec();
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&0u32.to_le_bytes());
        assert!(PhraseModel::from_bytes(&huge).is_err());
    }
}
