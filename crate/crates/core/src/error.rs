use qbsig_qsim::QsimError;
use thiserror::Error;

use crate::bits::BitsError;
use crate::crypto::CryptoError;
use crate::netsim::NetError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("register mismatch: expected {expected} qubits, got {got}")]
    RegisterMismatch { expected: usize, got: usize },
    #[error("signature has {got} bits, expected {expected}")]
    SignatureLength { expected: usize, got: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
