pub mod audio;
mod bytes;
pub mod cli;
pub mod eval;
pub mod gmm;
pub mod protocol;
pub mod vault;
