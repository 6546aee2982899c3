use std::fmt::Write;

use super::EvalError;

/// Guessing bound for an attacker who cannot tell real from chaff.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityReport {
    pub num_phrases: u32,
    pub bits_per_question: u32,
    pub keys_compromised: bool,
    pub total_bits: u32,
    /// `2^-total_bits`.
    pub probability: f64,
}

impl SecurityReport {
    pub fn percent(&self) -> f64 {
        self.probability * 100.0
    }

    /// Percentage rounded to two decimals, e.g. `"0.39"`.
    pub fn percent_2dp(&self) -> String {
        format!("{:.2}", self.percent())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "phrases: {}", self.num_phrases);
        let _ = writeln!(s, "bits per question: {}", self.bits_per_question);
        let _ = writeln!(s, "response bits: {}", self.total_bits);
        let _ = writeln!(s, "guess success probability: 2^-{} = {:e}", self.total_bits, self.probability);
        let _ = writeln!(s, "equivalent false accept rate: {}% ({}%)", self.percent_2dp(), self.percent());
        if self.keys_compromised {
            let _ = writeln!(
                s,
                "keys compromised: blocks can be decrypted, but without the voice the real block in each entry is still a guess"
            );
        } else {
            let _ = writeln!(
                s,
                "keys intact: challenge blocks stay sealed, so an attacker sees only ciphertext and can do no better than guess"
            );
        }
        s
    }
}

pub fn security_report(
    num_phrases: u32,
    bits_per_question: u32,
    keys_compromised: bool,
) -> Result<SecurityReport, EvalError> {
    if num_phrases == 0 || bits_per_question == 0 {
        return Err(EvalError::InvalidConfig("phrases and bits per question must be at least 1".into()));
    }
    let total_bits = num_phrases
        .checked_mul(bits_per_question)
        .filter(|&b| b <= 1074)
        .ok_or_else(|| EvalError::InvalidConfig("bit count out of range".into()))?;
    Ok(SecurityReport {
        num_phrases,
        bits_per_question,
        keys_compromised,
        total_bits,
        probability: (-f64::from(total_bits)).exp2(),
    })
}
