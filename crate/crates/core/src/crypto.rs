//! Classical and quantum one-time pads, the `4n`-bit hash and key
//! derivation, and computational-basis encoding of classical strings.

use qbsig_qsim::{
    prepare_computational, t_gate, Matrix2, Pauli, QsimError, QuantumMemory, Qubit, StateVector,
};
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::{BitsError, Bitstring};

/// Number of `r` components keyed into the signature pad; the signature
/// register is `6n` qubits and each derived `4n`-bit segment pads `n` of them.
pub const SIGNATURE_PAD_SEGMENTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CryptoError {
    #[error("key has {got} bits, expected {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("expected {expected} nonce components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// `K ⊕ m`.
pub fn classical_otp(msg: &Bitstring, key: &Bitstring) -> Result<Bitstring, CryptoError> {
    Ok(msg.xor(key)?)
}

fn power(p: Pauli, bit: bool) -> Matrix2 {
    if bit {
        p.matrix()
    } else {
        Matrix2::identity()
    }
}

/// `σx^a σz^b` for one qubit of the basic pad (`σz` acts first).
pub fn basic_pad_operator(x_bit: bool, z_bit: bool) -> Matrix2 {
    power(Pauli::X, x_bit) * power(Pauli::Z, z_bit)
}

/// `σx^{k4} σz^{k3} T σx^{k2} σz^{k1}` for the 4-bit key chunk
/// `[k1, k2, k3, k4]`; the rightmost factor acts first.
pub fn improved_pad_operator(chunk: [bool; 4]) -> Matrix2 {
    let [k1, k2, k3, k4] = chunk;
    power(Pauli::X, k4) * power(Pauli::Z, k3) * t_gate() * power(Pauli::X, k2) * power(Pauli::Z, k1)
}

/// Per-qubit operators of the basic pad (2 key bits per qubit).
pub fn basic_pad_operators(key: &Bitstring, qubits: usize) -> Result<Vec<Matrix2>, CryptoError> {
    check_key(key, 2 * qubits)?;
    Ok(key
        .chunks(2)
        .map(|c| basic_pad_operator(c[0], c[1]))
        .collect())
}

/// Per-qubit operators of the improved pad (4 key bits per qubit).
pub fn improved_pad_operators(key: &Bitstring, qubits: usize) -> Result<Vec<Matrix2>, CryptoError> {
    check_key(key, 4 * qubits)?;
    Ok(key
        .chunks(4)
        .map(|c| improved_pad_operator([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_key(key: &Bitstring, expected: usize) -> Result<(), CryptoError> {
    if key.len() != expected {
        return Err(CryptoError::KeyLength {
            expected,
            got: key.len(),
        });
    }
    Ok(())
}

fn apply_all(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    ops: &[Matrix2],
) -> Result<(), CryptoError> {
    for (q, op) in qubits.iter().zip(ops) {
        mem.apply(q, op)?;
    }
    Ok(())
}

fn apply_all_inverse(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    ops: &[Matrix2],
) -> Result<(), CryptoError> {
    for (q, op) in qubits.iter().zip(ops) {
        mem.apply(q, &op.adjoint())?;
    }
    Ok(())
}

/// Pads qubit `i` with `σx^{k_{2i−1}} σz^{k_{2i}}`. The key must be twice
/// the qubit count.
pub fn qotp_basic_encrypt(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    key: &Bitstring,
) -> Result<(), CryptoError> {
    apply_all(mem, qubits, &basic_pad_operators(key, qubits.len())?)
}

pub fn qotp_basic_decrypt(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    key: &Bitstring,
) -> Result<(), CryptoError> {
    apply_all_inverse(mem, qubits, &basic_pad_operators(key, qubits.len())?)
}

/// Improved pad with the `T` operator sandwiched between two Pauli layers.
/// The key must be four times the qubit count.
pub fn qotp_improved_encrypt(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    key: &Bitstring,
) -> Result<(), CryptoError> {
    apply_all(mem, qubits, &improved_pad_operators(key, qubits.len())?)
}

pub fn qotp_improved_decrypt(
    mem: &mut QuantumMemory,
    qubits: &[Qubit],
    key: &Bitstring,
) -> Result<(), CryptoError> {
    apply_all_inverse(mem, qubits, &improved_pad_operators(key, qubits.len())?)
}

/// Improved pad on every qubit of a single register.
pub fn qotp_improved_encrypt_state(
    state: &mut StateVector,
    key: &Bitstring,
) -> Result<(), CryptoError> {
    let ops = improved_pad_operators(key, state.num_qubits())?;
    for (i, op) in ops.iter().enumerate() {
        state.apply(i, op)?;
    }
    Ok(())
}

pub fn qotp_improved_decrypt_state(
    state: &mut StateVector,
    key: &Bitstring,
) -> Result<(), CryptoError> {
    let ops = improved_pad_operators(key, state.num_qubits())?;
    for (i, op) in ops.iter().enumerate() {
        state.apply(i, &op.adjoint())?;
    }
    Ok(())
}

/// Fixed-output hash `{0,1}* → {0,1}^{4n}`: SHA-256 in counter mode over the
/// length-prefixed wire form of the input, truncated to `output_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HashFn {
    output_bits: usize,
}

impl HashFn {
    pub const ALGORITHM: &'static str = "sha256-ctr";

    pub fn new(output_bits: usize) -> Self {
        Self { output_bits }
    }

    /// Output width `4n` for an `n`-bit message.
    pub fn for_message_bits(n: usize) -> Self {
        Self::new(4 * n)
    }

    pub fn output_bits(&self) -> usize {
        self.output_bits
    }

    pub fn hash(&self, input: &Bitstring) -> Bitstring {
        let wire = input.serialize();
        let mut bits = Vec::with_capacity(self.output_bits);
        let mut counter: u32 = 0;
        while bits.len() < self.output_bits {
            let mut h = Sha256::new();
            h.update(&wire);
            h.update(counter.to_be_bytes());
            for byte in h.finalize() {
                for i in (0..8).rev() {
                    bits.push(byte >> i & 1 == 1);
                }
            }
            counter += 1;
        }
        bits.truncate(self.output_bits);
        Bitstring::from_bits(bits)
    }

    /// `H(K ‖ r)`.
    pub fn derive_key(&self, key: &Bitstring, nonce: &Bitstring) -> Bitstring {
        self.hash(&key.concat(nonce))
    }

    /// `H(K ‖ r¹) ‖ … ‖ H(K ‖ r⁶)`.
    pub fn hash_vector_key(
        &self,
        key: &Bitstring,
        nonces: &[Bitstring],
    ) -> Result<Bitstring, CryptoError> {
        if nonces.len() != SIGNATURE_PAD_SEGMENTS {
            return Err(CryptoError::ComponentCount {
                expected: SIGNATURE_PAD_SEGMENTS,
                got: nonces.len(),
            });
        }
        Ok(nonces.iter().fold(Bitstring::new(), |acc, r| {
            acc.concat(&self.derive_key(key, r))
        }))
    }
}

/// One computational-basis qubit per bit.
pub fn encode_classical(mem: &mut QuantumMemory, bits: &Bitstring) -> Vec<Qubit> {
    bits.bits()
        .iter()
        .map(|&b| {
            mem.allocate_one(prepare_computational(b))
                .expect("single qubit")
        })
        .collect()
}

/// Measures every qubit in the computational basis.
pub fn decode_classical<R: Rng + ?Sized>(
    mem: &mut QuantumMemory,
    qubits: Vec<Qubit>,
    rng: &mut R,
) -> Result<Bitstring, CryptoError> {
    qubits
        .into_iter()
        .map(|q| mem.measure_computational(q, rng).map_err(CryptoError::from))
        .collect()
}

/// Shared secret keys of one protocol world. Keys are modelled as trusted
/// shared randomness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KeyRing {
    pub k_ab: Bitstring,
    pub k_ac: Bitstring,
    pub k_bc: Bitstring,
    pub k_au: Vec<Bitstring>,
    pub k_cu: Vec<Bitstring>,
}

/// Bit lengths used when drawing a [`KeyRing`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyLengths {
    pub ab: usize,
    pub ac: usize,
    pub bc: usize,
    pub au: usize,
    pub cu: usize,
}

impl KeyLengths {
    pub fn uniform(bits: usize) -> Self {
        Self {
            ab: bits,
            ac: bits,
            bc: bits,
            au: bits,
            cu: bits,
        }
    }
}

impl KeyRing {
    pub fn generate<R: Rng + ?Sized>(lengths: KeyLengths, signatories: usize, rng: &mut R) -> Self {
        Self {
            k_ab: Bitstring::random(lengths.ab, rng),
            k_ac: Bitstring::random(lengths.ac, rng),
            k_bc: Bitstring::random(lengths.bc, rng),
            k_au: (0..signatories)
                .map(|_| Bitstring::random(lengths.au, rng))
                .collect(),
            k_cu: (0..signatories)
                .map(|_| Bitstring::random(lengths.cu, rng))
                .collect(),
        }
    }

    pub fn signatories(&self) -> usize {
        self.k_au.len()
    }
}
