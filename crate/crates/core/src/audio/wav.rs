use super::{AudioClip, AudioError};

const PCM_FORMAT: u16 = 1;

/// Parses a RIFF/WAVE container holding mono 16-bit PCM.
///
/// Samples are scaled by `1/32768`. Unknown chunks are skipped; the `fmt `
/// chunk must precede `data`.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let malformed = |m: &str| AudioError::MalformedHeader(m.to_string());
    if bytes.len() < 12 {
        return Err(malformed("shorter than the RIFF preamble"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut pos = 12;
    let mut sample_rate = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(match sample_rate {
                None => malformed("no fmt chunk"),
                Some(_) => malformed("no data chunk"),
            });
        }
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(malformed("fmt chunk too short"));
                }
                let f = &bytes[body..body + size];
                let format = u16::from_le_bytes([f[0], f[1]]);
                let channels = u16::from_le_bytes([f[2], f[3]]);
                let rate = u32::from_le_bytes([f[4], f[5], f[6], f[7]]);
                let bits = u16::from_le_bytes([f[14], f[15]]);
                if format != PCM_FORMAT {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "format tag {format}, only PCM (1) is supported"
                    )));
                }
                if channels != 1 {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "{channels} channels, only mono is supported"
                    )));
                }
                if bits != 16 {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "{bits}-bit samples, only 16-bit is supported"
                    )));
                }
                if rate == 0 {
                    return Err(malformed("zero sample rate"));
                }
                sample_rate = Some(rate);
            }
            b"data" => {
                let rate = sample_rate.ok_or_else(|| malformed("data chunk before fmt chunk"))?;
                let available = bytes.len() - body;
                if size > available || !size.is_multiple_of(2) {
                    return Err(AudioError::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return AudioClip::new(samples, rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
}

/// Encodes a clip as mono 16-bit PCM, rounding to the nearest code.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.len() * 2;
    let rate = clip.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let code = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        out.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn single_zero_sample() {
        let clip = read_wav(&header(1, 1, 16000, 16, &[0, 0])).unwrap();
        assert_eq!(clip.samples(), &[0.0]);
        assert_eq!(clip.sample_rate(), 16000);
    }

    #[test]
    fn linear_scaling() {
        let clip = read_wav(&header(1, 1, 8000, 16, &16384i16.to_le_bytes())).unwrap();
        assert_eq!(clip.samples(), &[0.5]);
        let clip = read_wav(&header(1, 1, 8000, 16, &i16::MIN.to_le_bytes())).unwrap();
        assert_eq!(clip.samples(), &[-1.0]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            read_wav(b"RIFX\0\0\0\0WAVE"),
            Err(AudioError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_wav(&header(3, 1, 16000, 16, &[0, 0])),
            Err(AudioError::UnsupportedEncoding(_))
        ));
        assert!(matches!(
            read_wav(&header(1, 2, 16000, 16, &[0, 0, 0, 0])),
            Err(AudioError::UnsupportedEncoding(_))
        ));
        assert!(matches!(
            read_wav(&header(1, 1, 16000, 8, &[0, 0])),
            Err(AudioError::UnsupportedEncoding(_))
        ));
        let mut truncated = header(1, 1, 16000, 16, &[0, 0, 0, 0]);
        truncated.truncate(truncated.len() - 2);
        assert!(matches!(
            read_wav(&truncated),
            Err(AudioError::TruncatedData {
                declared: 4,
                available: 2
            })
        ));
        let mut no_data = header(1, 1, 16000, 16, &[]);
        no_data.truncate(36);
        assert!(matches!(
            read_wav(&no_data),
            Err(AudioError::MalformedHeader(_))
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let base = header(1, 1, 16000, 16, &[0, 64]);
        let mut bytes = base[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&base[36..]);
        let clip = read_wav(&bytes).unwrap();
        assert_eq!(clip.samples(), &[0.5]);
    }

    #[test]
    fn sine_round_trip() {
        let rate = 16000;
        let peak = 0.8;
        let samples: Vec<f64> = (0..rate)
            .map(|n| peak * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / rate as f64).sin())
            .collect();
        let clip = AudioClip::new(samples, rate).unwrap();
        let back = read_wav(&write_wav(&clip)).unwrap();
        assert_eq!(back.len(), 16000);
        let max = back.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((max - peak).abs() < 1e-3, "peak {max}");
    }
}
