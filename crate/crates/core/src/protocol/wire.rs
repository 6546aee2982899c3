//! Message framing: `version: u8 | type: u8 | len: u32 LE | payload`.
//!
//! Payloads are typed by direction, see [`Request`] and [`Reply`]. The
//! field-by-field layout lives in `docs/FORMATS.md`.

use super::bitstring::{ResponseBitstring, SessionDecision};
use super::challenge::ChallengeSet;
use super::{ErrorCode, ProtocolError, NONCE_BYTES};
use crate::bytes::{ByteReader, ByteWriter, DecodeError};
use crate::vault::{EncryptedBlock, EnrollmentSubmission, SALT_LEN};

pub const PROTOCOL_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
/// Largest payload a peer will accept.
pub const MAX_PAYLOAD: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    EnrollInit = 0x01,
    EnrollPhrases = 0x02,
    EnrollRecord = 0x03,
    VerifyInit = 0x04,
    VerifyChallenge = 0x05,
    VerifyResponse = 0x06,
    VerifyDecision = 0x07,
    Error = 0x7f,
}

impl MessageType {
    pub fn from_u8(tag: u8) -> Option<Self> {
        use MessageType::*;
        Some(match tag {
            0x01 => EnrollInit,
            0x02 => EnrollPhrases,
            0x03 => EnrollRecord,
            0x04 => VerifyInit,
            0x05 => VerifyChallenge,
            0x06 => VerifyResponse,
            0x07 => VerifyDecision,
            0x7f => Error,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub version: u8,
    pub kind: MessageType,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(kind: MessageType, payload: Vec<u8>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            kind,
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.push(self.version);
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses one frame from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn parse_prefix(bytes: &[u8]) -> Result<(Self, usize), ProtocolError> {
        if bytes.len() < HEADER_LEN {
            return Err(ProtocolError::Wire(format!("{} bytes is shorter than a header", bytes.len())));
        }
        if bytes[0] != PROTOCOL_VERSION {
            return Err(ProtocolError::UnsupportedVersion(bytes[0]));
        }
        let kind = MessageType::from_u8(bytes[1]).ok_or(ProtocolError::UnknownMessageType(bytes[1]))?;
        let len = u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(ProtocolError::Wire(format!("payload of {len} bytes exceeds limit")));
        }
        let end = HEADER_LEN + len;
        if bytes.len() < end {
            return Err(ProtocolError::Wire(format!("truncated payload: {} of {len} bytes", bytes.len() - HEADER_LEN)));
        }
        Ok((Self::new(kind, bytes[HEADER_LEN..end].to_vec()), end))
    }

    /// Parses exactly one frame.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let (msg, used) = Self::parse_prefix(bytes)?;
        if used != bytes.len() {
            return Err(ProtocolError::Wire(format!("{} bytes after frame", bytes.len() - used)));
        }
        Ok(msg)
    }
}

/// Client-to-server payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    EnrollInit {
        user_id: String,
        verifier_salt: [u8; SALT_LEN],
        verifier_hash: [u8; 32],
    },
    EnrollSubmit(Box<EnrollmentSubmission>),
    VerifyInit {
        user_id: String,
    },
    ChallengeRequest {
        user_id: String,
    },
    Response {
        user_id: String,
        response: ResponseBitstring,
    },
}

/// A successful enrollment as reported to the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollmentReceipt {
    pub user_id: String,
    pub created_at: u64,
    pub pair_ids: Vec<u32>,
}

/// Server-to-client payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    EnrollPhrases {
        bits_per_question: u8,
        phrases: Vec<String>,
    },
    EnrollReceipt(EnrollmentReceipt),
    IdentityPacket {
        kdf_salt: [u8; SALT_LEN],
        kdf_iterations: u32,
        identity_block: EncryptedBlock,
    },
    Challenge(ChallengeSet),
    Decision(SessionDecision),
    Error {
        code: ErrorCode,
        message: String,
    },
}

fn wire_err(e: DecodeError) -> ProtocolError {
    ProtocolError::Wire(e.to_string())
}

fn put_bits(w: &mut ByteWriter, bits: &[bool]) {
    w.put_u32(bits.len() as u32);
    let mut packed = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        packed[i / 8] |= u8::from(b) << (i % 8);
    }
    w.put_bytes(&packed);
}

fn get_bits(r: &mut ByteReader<'_>) -> Result<Vec<bool>, ProtocolError> {
    let n = r.u32().map_err(wire_err)? as usize;
    let packed = r.take(n.div_ceil(8)).map_err(wire_err)?;
    let bits: Vec<bool> = (0..n).map(|i| (packed[i / 8] >> (i % 8)) & 1 == 1).collect();
    if !n.is_multiple_of(8) && packed[n / 8] >> (n % 8) != 0 {
        return Err(ProtocolError::Wire("non-zero padding bits".into()));
    }
    Ok(bits)
}

impl Request {
    pub fn kind(&self) -> MessageType {
        match self {
            Request::EnrollInit { .. } => MessageType::EnrollInit,
            Request::EnrollSubmit(_) => MessageType::EnrollRecord,
            Request::VerifyInit { .. } => MessageType::VerifyInit,
            Request::ChallengeRequest { .. } => MessageType::VerifyChallenge,
            Request::Response { .. } => MessageType::VerifyResponse,
        }
    }

    pub fn user_id(&self) -> &str {
        match self {
            Request::EnrollInit { user_id, .. }
            | Request::VerifyInit { user_id }
            | Request::ChallengeRequest { user_id }
            | Request::Response { user_id, .. } => user_id,
            Request::EnrollSubmit(sub) => &sub.user_id,
        }
    }

    pub fn to_message(&self) -> Message {
        let mut w = ByteWriter::new();
        match self {
            Request::EnrollInit {
                user_id,
                verifier_salt,
                verifier_hash,
            } => {
                w.put_str(user_id);
                w.put_bytes(verifier_salt);
                w.put_bytes(verifier_hash);
            }
            Request::EnrollSubmit(sub) => sub.encode(&mut w),
            Request::VerifyInit { user_id } | Request::ChallengeRequest { user_id } => w.put_str(user_id),
            Request::Response { user_id, response } => {
                w.put_str(user_id);
                w.put_bytes(&response.nonce);
                put_bits(&mut w, &response.bits);
            }
        }
        Message::new(self.kind(), w.into_inner())
    }

    pub fn from_message(msg: &Message) -> Result<Self, ProtocolError> {
        let mut r = ByteReader::new(&msg.payload);
        let req = match msg.kind {
            MessageType::EnrollInit => Request::EnrollInit {
                user_id: r.string().map_err(wire_err)?,
                verifier_salt: r.array().map_err(wire_err)?,
                verifier_hash: r.array().map_err(wire_err)?,
            },
            MessageType::EnrollRecord => {
                Request::EnrollSubmit(Box::new(EnrollmentSubmission::decode(&mut r).map_err(ProtocolError::Vault)?))
            }
            MessageType::VerifyInit => Request::VerifyInit {
                user_id: r.string().map_err(wire_err)?,
            },
            MessageType::VerifyChallenge => Request::ChallengeRequest {
                user_id: r.string().map_err(wire_err)?,
            },
            MessageType::VerifyResponse => {
                let user_id = r.string().map_err(wire_err)?;
                let nonce: [u8; NONCE_BYTES] = r.array().map_err(wire_err)?;
                let bits = get_bits(&mut r)?;
                Request::Response {
                    user_id,
                    response: ResponseBitstring { bits, nonce },
                }
            }
            other => return Err(ProtocolError::UnexpectedMessage(format!("{other:?} is not a request"))),
        };
        r.finish().map_err(wire_err)?;
        Ok(req)
    }
}

impl Reply {
    pub fn kind(&self) -> MessageType {
        match self {
            Reply::EnrollPhrases { .. } => MessageType::EnrollPhrases,
            Reply::EnrollReceipt(_) => MessageType::EnrollRecord,
            Reply::IdentityPacket { .. } => MessageType::VerifyInit,
            Reply::Challenge(_) => MessageType::VerifyChallenge,
            Reply::Decision(_) => MessageType::VerifyDecision,
            Reply::Error { .. } => MessageType::Error,
        }
    }

    pub fn to_message(&self) -> Message {
        let mut w = ByteWriter::new();
        match self {
            Reply::EnrollPhrases {
                bits_per_question,
                phrases,
            } => {
                w.put_u8(*bits_per_question);
                w.put_u32(phrases.len() as u32);
                for p in phrases {
                    w.put_str(p);
                }
            }
            Reply::EnrollReceipt(r) => {
                w.put_str(&r.user_id);
                w.put_u64(r.created_at);
                w.put_u32(r.pair_ids.len() as u32);
                for id in &r.pair_ids {
                    w.put_u32(*id);
                }
            }
            Reply::IdentityPacket {
                kdf_salt,
                kdf_iterations,
                identity_block,
            } => {
                w.put_bytes(kdf_salt);
                w.put_u32(*kdf_iterations);
                identity_block.encode(&mut w);
            }
            Reply::Challenge(set) => {
                w.put_bytes(&set.nonce);
                set.sealed.encode(&mut w);
            }
            Reply::Decision(d) => {
                w.put_u32(d.correct);
                w.put_u32(d.total);
                w.put_f64(d.threshold);
                w.put_u8(u8::from(d.accept));
                w.put_u64(d.transcript_id);
            }
            Reply::Error { code, message } => {
                w.put_u8(*code as u8);
                w.put_str(message);
            }
        }
        Message::new(self.kind(), w.into_inner())
    }

    pub fn from_message(msg: &Message) -> Result<Self, ProtocolError> {
        let mut r = ByteReader::new(&msg.payload);
        let reply = match msg.kind {
            MessageType::EnrollPhrases => {
                let bits_per_question = r.u8().map_err(wire_err)?;
                let n = r.u32().map_err(wire_err)? as usize;
                let phrases = (0..n).map(|_| r.string()).collect::<Result<_, _>>().map_err(wire_err)?;
                Reply::EnrollPhrases {
                    bits_per_question,
                    phrases,
                }
            }
            MessageType::EnrollRecord => {
                let user_id = r.string().map_err(wire_err)?;
                let created_at = r.u64().map_err(wire_err)?;
                let n = r.u32().map_err(wire_err)? as usize;
                let pair_ids = (0..n).map(|_| r.u32()).collect::<Result<_, _>>().map_err(wire_err)?;
                Reply::EnrollReceipt(EnrollmentReceipt {
                    user_id,
                    created_at,
                    pair_ids,
                })
            }
            MessageType::VerifyInit => Reply::IdentityPacket {
                kdf_salt: r.array().map_err(wire_err)?,
                kdf_iterations: r.u32().map_err(wire_err)?,
                identity_block: EncryptedBlock::decode(&mut r).map_err(ProtocolError::Vault)?,
            },
            MessageType::VerifyChallenge => Reply::Challenge(ChallengeSet {
                nonce: r.array().map_err(wire_err)?,
                sealed: EncryptedBlock::decode(&mut r).map_err(ProtocolError::Vault)?,
            }),
            MessageType::VerifyDecision => {
                let correct = r.u32().map_err(wire_err)?;
                let total = r.u32().map_err(wire_err)?;
                let threshold = r.f64().map_err(wire_err)?;
                let accept = match r.u8().map_err(wire_err)? {
                    0 => false,
                    1 => true,
                    v => return Err(ProtocolError::Wire(format!("accept flag {v}"))),
                };
                let transcript_id = r.u64().map_err(wire_err)?;
                Reply::Decision(SessionDecision {
                    correct,
                    total,
                    threshold,
                    accept,
                    transcript_id,
                })
            }
            MessageType::Error => {
                let tag = r.u8().map_err(wire_err)?;
                let code = ErrorCode::from_u8(tag).ok_or_else(|| ProtocolError::Wire(format!("error code {tag}")))?;
                Reply::Error {
                    code,
                    message: r.string().map_err(wire_err)?,
                }
            }
            other => return Err(ProtocolError::UnexpectedMessage(format!("{other:?} is not a reply"))),
        };
        r.finish().map_err(wire_err)?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(seed: u8) -> EncryptedBlock {
        EncryptedBlock {
            layer: crate::vault::Layer::User,
            nonce: [seed; 12],
            ciphertext: vec![seed; seed as usize],
            tag: [seed ^ 0xff; 16],
        }
    }

    proptest! {
        #[test]
        fn frames_round_trip(tag in prop::sample::select(vec![1u8, 2, 3, 4, 5, 6, 7, 0x7f]),
                             payload in prop::collection::vec(any::<u8>(), 0..256)) {
            let msg = Message::new(MessageType::from_u8(tag).unwrap(), payload);
            let bytes = msg.to_bytes();
            prop_assert_eq!(Message::from_bytes(&bytes).unwrap(), msg);
        }

        #[test]
        fn responses_round_trip(bits in prop::collection::vec(any::<bool>(), 0..40), nonce in any::<[u8; 16]>()) {
            let req = Request::Response { user_id: "u".into(), response: ResponseBitstring { bits, nonce } };
            prop_assert_eq!(Request::from_message(&req.to_message()).unwrap(), req);
        }
    }

    #[test]
    fn rejects_bad_frames() {
        assert_eq!(Message::from_bytes(&[1, 0x09, 0, 0, 0, 0]), Err(ProtocolError::UnknownMessageType(9)));
        assert_eq!(Message::from_bytes(&[2, 0x01, 0, 0, 0, 0]), Err(ProtocolError::UnsupportedVersion(2)));
        assert!(Message::from_bytes(&[1, 0x01, 5, 0, 0, 0, 1]).is_err());
        assert!(Message::from_bytes(&[1, 0x01, 0, 0, 0, 0, 1]).is_err());
        let (m, used) = Message::parse_prefix(&[1, 0x04, 1, 0, 0, 0, 7, 9]).unwrap();
        assert_eq!((m.payload, used), (vec![7], 7));
    }

    #[test]
    fn replies_round_trip() {
        let replies = vec![
            Reply::EnrollPhrases {
                bits_per_question: 1,
                phrases: vec!["a".into(), "bc".into()],
            },
            Reply::EnrollReceipt(EnrollmentReceipt {
                user_id: "u".into(),
                created_at: 5,
                pair_ids: vec![3, 1],
            }),
            Reply::IdentityPacket {
                kdf_salt: [4; 16],
                kdf_iterations: 10_000,
                identity_block: block(3),
            },
            Reply::Challenge(ChallengeSet {
                nonce: [8; 16],
                sealed: block(5),
            }),
            Reply::Decision(SessionDecision {
                correct: 3,
                total: 4,
                threshold: 0.9,
                accept: false,
                transcript_id: 77,
            }),
            Reply::Error {
                code: ErrorCode::Revoked,
                message: "gone".into(),
            },
        ];
        for r in replies {
            assert_eq!(Reply::from_message(&r.to_message()).unwrap(), r);
        }
    }

    #[test]
    fn direction_is_enforced() {
        let m = Message::new(MessageType::VerifyDecision, vec![]);
        assert!(matches!(Request::from_message(&m), Err(ProtocolError::UnexpectedMessage(_))));
        let m = Message::new(MessageType::VerifyResponse, vec![]);
        assert!(matches!(Reply::from_message(&m), Err(ProtocolError::UnexpectedMessage(_))));
        let mut bad = Request::VerifyInit { user_id: "u".into() }.to_message();
        bad.payload.push(0);
        assert!(Request::from_message(&bad).is_err());
    }

    #[test]
    fn padding_bits_must_be_zero() {
        let mut m = Request::Response {
            user_id: String::new(),
            response: ResponseBitstring {
                bits: vec![true],
                nonce: [0; 16],
            },
        }
        .to_message();
        *m.payload.last_mut().unwrap() |= 0x80;
        assert!(Request::from_message(&m).is_err());
    }
}
