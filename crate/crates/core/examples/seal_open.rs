//! Password-derived sealing of a block and what tampering does to it.

use vaulted_voice::vault::{derive_user_key, open, EncryptedBlock, Layer, Sealer, SymmetricSealer, MIN_KDF_ITERATIONS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let key = derive_user_key("correct horse", [7; 16], MIN_KDF_ITERATIONS)?;
    let mut sealer = SymmetricSealer::from_entropy(&key, Layer::User);

    let a = sealer.seal(b"one phrase model")?;
    let b = sealer.seal(b"one phrase model")?;
    println!("same plaintext, different ciphertext: {}", a.ciphertext != b.ciphertext);
    println!("opened: {:?}", String::from_utf8(open(&a, &key)?)?);

    let wire = a.to_bytes();
    let mut flipped = wire.clone();
    flipped[wire.len() / 2] ^= 1;
    println!("one flipped bit: {:?}", EncryptedBlock::from_bytes(&flipped).and_then(|blk| open(&blk, &key)));

    let other = derive_user_key("wrong horse", [7; 16], MIN_KDF_ITERATIONS)?;
    println!("wrong password: {:?}", open(&a, &other));
    Ok(())
}
