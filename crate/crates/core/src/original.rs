//! The original teleportation-based broadcasting multiple blind signature
//! protocol, including its weaknesses.
//!
//! Per signatory and message position `j`, Alice prepares a message qubit `M`
//! in the X basis and an EPR pair `(A, C)`. `U_i` signs by Bell-measuring
//! `(M, A)`; the two outcome bits per position are the signature. Charlie
//! applies the teleportation correction to `C` and reads the message back in
//! the X basis. Bob only ever compares messages.

use qbsig_qsim::{
    prepare_epr, prepare_message_qubit_original, teleport_correction, BellOutcome,
    MeasurementBasis, QuantumMemory, Qubit,
};
use rand::SeedableRng;
use serde::Serialize;

use crate::bits::Bitstring;
use crate::crypto::{
    classical_otp, decode_classical, encode_classical, qotp_basic_decrypt, qotp_basic_encrypt,
    KeyLengths, KeyRing,
};
use crate::error::{ProtocolError, Result};
use crate::netsim::{Network, PartyId, Payload, TapContext};
use crate::verdict::{RejectReason, Verdict};
use crate::SimRng;

/// Width of the serial number `SN` attached to each signatory's batch.
pub const SERIAL_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrigConfig {
    /// Message length in bits.
    pub n: usize,
    /// Number of signatories.
    pub t: usize,
    pub seed: u64,
    /// Message to sign; drawn from the world rng when `None`.
    pub message: Option<Bitstring>,
}

impl OrigConfig {
    pub fn new(n: usize, t: usize, seed: u64) -> Self {
        Self {
            n,
            t,
            seed,
            message: None,
        }
    }

    pub fn with_message(mut self, message: Bitstring) -> Self {
        self.n = message.len();
        self.message = Some(message);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(ProtocolError::Config("n must be at least 1".into()));
        }
        if self.t == 0 {
            return Err(ProtocolError::Config("t must be at least 1".into()));
        }
        if self.t >= 1 << SERIAL_BITS {
            return Err(ProtocolError::Config(format!(
                "t = {} exceeds the {SERIAL_BITS}-bit serial space",
                self.t
            )));
        }
        if let Some(m) = &self.message {
            if m.len() != self.n {
                return Err(ProtocolError::Config(format!(
                    "message has {} bits, n = {}",
                    m.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Key sizes: the classical pads cover every message they encrypt, the
    /// quantum pads two bits per qubit (serial qubits included).
    pub fn key_lengths(&self) -> KeyLengths {
        let (n, t) = (self.n, self.t);
        KeyLengths {
            ab: n,
            ac: 2 * t * (n + SERIAL_BITS),
            bc: (t + 1) * n,
            au: 2 * (2 * n + SERIAL_BITS),
            cu: 2 * n + SERIAL_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrigSignature {
    /// `β_MA(1) ‖ … ‖ β_MA(n)`, 2 bits per position.
    pub signature: Bitstring,
    pub serial: Bitstring,
}

/// How a Bell measurement picks its branch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum BranchPolicy {
    #[default]
    Sample,
    /// Project onto the given outcome at each position.
    Forced(Vec<BellOutcome>),
}

impl BranchPolicy {
    pub(crate) fn measure(
        &self,
        mem: &mut QuantumMemory,
        position: usize,
        q1: Qubit,
        q2: Qubit,
        rng: &mut SimRng,
    ) -> Result<BellOutcome> {
        match self {
            BranchPolicy::Sample => Ok(mem.measure_bell(q1, q2, rng)?),
            BranchPolicy::Forced(outcomes) => {
                let outcome = *outcomes
                    .get(position)
                    .ok_or(ProtocolError::RegisterMismatch {
                        expected: position + 1,
                        got: outcomes.len(),
                    })?;
                mem.measure_bell_forced(q1, q2, outcome)?;
                Ok(outcome)
            }
        }
    }
}

pub(crate) fn outcomes_to_bits(outcomes: &[BellOutcome]) -> Bitstring {
    outcomes.iter().flat_map(|o| o.bits()).collect()
}

/// Reads the `j`-th two-bit Bell label out of a signature string.
pub fn signature_outcome(signature: &Bitstring, j: usize) -> BellOutcome {
    BellOutcome::new(signature.bits()[2 * j], signature.bits()[2 * j + 1])
}

/// Bell-measures every `(M, A)` pair and concatenates the outcomes.
pub fn orig_sign(
    mem: &mut QuantumMemory,
    pairs: Vec<(Qubit, Qubit)>,
    policy: &BranchPolicy,
    rng: &mut SimRng,
) -> Result<Bitstring> {
    if let BranchPolicy::Forced(o) = policy {
        if o.len() != pairs.len() {
            return Err(ProtocolError::RegisterMismatch {
                expected: pairs.len(),
                got: o.len(),
            });
        }
    }
    let mut outcomes = Vec::with_capacity(pairs.len());
    for (j, (m, a)) in pairs.into_iter().enumerate() {
        outcomes.push(policy.measure(mem, j, m, a, rng)?);
    }
    Ok(outcomes_to_bits(&outcomes))
}

/// Applies the teleportation correction named by each signature position to
/// Charlie's qubit and reads it out in `basis`.
pub(crate) fn correct_and_read(
    mem: &mut QuantumMemory,
    signature: &Bitstring,
    c_qubits: Vec<Qubit>,
    basis: &MeasurementBasis,
    rng: &mut SimRng,
) -> Result<Bitstring> {
    if signature.len() != 2 * c_qubits.len() {
        return Err(ProtocolError::SignatureLength {
            expected: 2 * c_qubits.len(),
            got: signature.len(),
        });
    }
    let mut out = Vec::with_capacity(c_qubits.len());
    for (j, c) in c_qubits.into_iter().enumerate() {
        mem.apply_pauli(&c, teleport_correction(signature_outcome(signature, j)))?;
        out.push(mem.measure(c, basis, rng)?);
    }
    Ok(Bitstring::from_bits(out))
}

/// Charlie's message recovery: correction, then X-basis read-out.
pub fn orig_charlie_recover(
    mem: &mut QuantumMemory,
    signature: &Bitstring,
    c_qubits: Vec<Qubit>,
    rng: &mut SimRng,
) -> Result<Bitstring> {
    correct_and_read(mem, signature, c_qubits, &MeasurementBasis::hadamard(), rng)
}

/// Charlie confirms the message when every recovered `m′_i` agrees.
pub fn orig_confirm(recovered: &[Bitstring]) -> std::result::Result<&Bitstring, RejectReason> {
    let first = recovered.first().ok_or(RejectReason::Incomplete)?;
    if recovered.iter().all(|m| m == first) {
        Ok(first)
    } else {
        Err(RejectReason::SignatoryDisagreement)
    }
}

/// Combined verdict from Charlie's recovered messages and Bob's reference
/// message.
pub fn orig_combine(recovered: &[Bitstring], bob_message: &Bitstring) -> Verdict {
    match orig_confirm(recovered) {
        Ok(m1) if m1 == bob_message => Verdict::Accepted,
        Ok(_) => Verdict::Rejected(RejectReason::MessageMismatch),
        Err(r) => Verdict::Rejected(r),
    }
}

/// Insertion points for insider behaviour. Every method defaults to the
/// honest action.
pub trait OrigHooks {
    /// Alice has prepared `(M, A)` pairs and `C` qubits for signatory `i`
    /// (0-based) and has not yet encrypted them.
    fn alice_prepared(
        &mut self,
        _ctx: &mut TapContext<'_>,
        _i: usize,
        _pairs: &mut Vec<(Qubit, Qubit)>,
        _c_qubits: &mut Vec<Qubit>,
    ) {
    }

    /// `U_i` holds the decrypted pairs and is about to sign.
    fn before_sign(
        &mut self,
        _ctx: &mut TapContext<'_>,
        _i: usize,
        _pairs: &mut Vec<(Qubit, Qubit)>,
    ) {
    }

    fn sign_policy(&mut self, _i: usize) -> BranchPolicy {
        BranchPolicy::Sample
    }

    fn after_sign(&mut self, _i: usize, _signature: &OrigSignature) {}

    /// Charlie has confirmed the message and may rewrite the multi-signature
    /// he forwards.
    fn multi_signature(&mut self, _multi: &mut Vec<OrigSignature>) {}
}

/// Honest behaviour everywhere.
pub struct Honest;

impl OrigHooks for Honest {}

#[derive(Clone, Debug, Serialize)]
pub struct OrigSignatoryResult {
    pub index: usize,
    pub serial: Bitstring,
    /// What `U_i` produced.
    pub produced: OrigSignature,
    /// What Charlie decrypted.
    pub received: OrigSignature,
    /// Charlie's `m′_i`.
    pub recovered: Bitstring,
    /// `m′_i` as Bob decrypted it.
    pub bob_received: Bitstring,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrigOutcome {
    pub message: Bitstring,
    /// `m` as Bob decrypted it in the initial phase.
    pub bob_message: Bitstring,
    pub signatories: Vec<OrigSignatoryResult>,
    /// Multi-signature Charlie forwards after confirming.
    pub multi_signature: Vec<OrigSignature>,
    pub combined: Verdict,
    pub transcript_digest: String,
    pub transcript_events: usize,
}

impl OrigOutcome {
    pub fn all_individual_accepted(&self) -> bool {
        self.signatories.iter().all(|s| s.verdict.is_accepted())
    }
}

pub struct OrigWorld {
    pub config: OrigConfig,
    pub keys: KeyRing,
    pub message: Bitstring,
    pub memory: QuantumMemory,
    pub net: Network,
    pub rng: SimRng,
}

impl OrigWorld {
    pub fn new(config: OrigConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SimRng::seed_from_u64(config.seed);
        let keys = KeyRing::generate(config.key_lengths(), config.t, &mut rng);
        let message = match &config.message {
            Some(m) => m.clone(),
            None => Bitstring::random(config.n, &mut rng),
        };
        let mut net = Network::new();
        net.connect(PartyId::Alice, PartyId::Bob);
        net.connect(PartyId::Alice, PartyId::Charlie);
        net.connect(PartyId::Charlie, PartyId::Bob);
        for i in 1..=config.t {
            net.connect(PartyId::Alice, PartyId::Signatory(i));
            net.connect(PartyId::Signatory(i), PartyId::Charlie);
        }
        Ok(Self {
            config,
            keys,
            message,
            memory: QuantumMemory::new(),
            net,
            rng,
        })
    }

    pub fn serial(i: usize) -> Bitstring {
        Bitstring::from_u64(i as u64 + 1, SERIAL_BITS)
    }

    fn ctx(&mut self, from: PartyId, to: PartyId) -> TapContext<'_> {
        TapContext {
            from,
            to,
            memory: &mut self.memory,
            rng: &mut self.rng,
        }
    }

    fn k_ac_segment(&self, i: usize) -> Bitstring {
        let w = 2 * (self.config.n + SERIAL_BITS);
        self.keys.k_ac.slice(i * w..(i + 1) * w)
    }

    fn k_bc_segment(&self, i: usize) -> Bitstring {
        let n = self.config.n;
        self.keys.k_bc.slice(i * n..(i + 1) * n)
    }

    fn send(&mut self, from: PartyId, to: PartyId, label: &str, payload: Payload) -> Result<()> {
        self.net
            .send(from, to, label, payload, &mut self.memory, &mut self.rng)?;
        Ok(())
    }

    /// Runs all three phases.
    pub fn run(mut self, hooks: &mut dyn OrigHooks) -> Result<OrigOutcome> {
        let (n, t) = (self.config.n, self.config.t);
        let alice = PartyId::Alice;
        let bob = PartyId::Bob;
        let charlie = PartyId::Charlie;

        // Initial phase: E^C_{K_AB}(m) to Bob.
        let c_ab = classical_otp(&self.message, &self.keys.k_ab)?;
        self.send(alice, bob, "initial/E(m)", Payload::Classical(c_ab))?;
        let bob_message = classical_otp(&self.net.recv_classical(alice, bob)?, &self.keys.k_ab)?;

        let mut signatories = Vec::with_capacity(t);
        for i in 0..t {
            let ui = PartyId::Signatory(i + 1);
            let serial = Self::serial(i);

            // Message transformation and channel setup.
            let mut pairs = Vec::with_capacity(n);
            let mut c_qubits = Vec::with_capacity(n);
            for &bit in self.message.bits() {
                let m = self
                    .memory
                    .allocate_one(prepare_message_qubit_original(bit))?;
                let mut epr = self.memory.allocate(prepare_epr());
                let c = epr.pop().expect("pair");
                let a = epr.pop().expect("pair");
                pairs.push((m, a));
                c_qubits.push(c);
            }
            hooks.alice_prepared(&mut self.ctx(alice, ui), i, &mut pairs, &mut c_qubits);

            let mut to_u: Vec<Qubit> = pairs.into_iter().flat_map(|(m, a)| [m, a]).collect();
            to_u.extend(encode_classical(&mut self.memory, &serial));
            qotp_basic_encrypt(&mut self.memory, &to_u, &self.keys.k_au[i])?;
            self.send(alice, ui, "sign/E(psi_MA,SN)", Payload::Quantum(to_u))?;

            let mut to_c = c_qubits;
            to_c.extend(encode_classical(&mut self.memory, &serial));
            let k_ac_i = self.k_ac_segment(i);
            qotp_basic_encrypt(&mut self.memory, &to_c, &k_ac_i)?;
            self.send(alice, charlie, "sign/E(phi_C,SN)", Payload::Quantum(to_c))?;

            // U_i decrypts and signs.
            let mut got = self.net.recv_quantum(alice, ui)?;
            if got.len() != 2 * n + SERIAL_BITS {
                return Err(ProtocolError::RegisterMismatch {
                    expected: 2 * n + SERIAL_BITS,
                    got: got.len(),
                });
            }
            qotp_basic_decrypt(&mut self.memory, &got, &self.keys.k_au[i])?;
            let serial_qubits = got.split_off(2 * n);
            let u_serial = decode_classical(&mut self.memory, serial_qubits, &mut self.rng)?;
            let mut it = got.into_iter();
            let mut pairs: Vec<(Qubit, Qubit)> = Vec::with_capacity(n);
            while let (Some(m), Some(a)) = (it.next(), it.next()) {
                pairs.push((m, a));
            }
            hooks.before_sign(&mut self.ctx(ui, ui), i, &mut pairs);
            let policy = hooks.sign_policy(i);
            let signature = orig_sign(&mut self.memory, pairs, &policy, &mut self.rng)?;
            let produced = OrigSignature {
                signature,
                serial: u_serial,
            };
            hooks.after_sign(i, &produced);
            let plain = produced.signature.concat(&produced.serial);
            let sealed = classical_otp(&plain, &self.keys.k_cu[i])?;
            self.send(ui, charlie, "sign/E(S_i,SN)", Payload::Classical(sealed))?;

            // Charlie verifies.
            let mut c_got = self.net.recv_quantum(alice, charlie)?;
            qotp_basic_decrypt(&mut self.memory, &c_got, &k_ac_i)?;
            let c_serial_q = c_got.split_off(n);
            let c_serial = decode_classical(&mut self.memory, c_serial_q, &mut self.rng)?;
            let opened = classical_otp(&self.net.recv_classical(ui, charlie)?, &self.keys.k_cu[i])?;
            let received = OrigSignature {
                signature: opened.slice(0..2 * n),
                serial: opened.slice(2 * n..opened.len()),
            };
            let recovered =
                orig_charlie_recover(&mut self.memory, &received.signature, c_got, &mut self.rng)?;
            let serial_ok = received.serial == c_serial;

            let sealed_m = classical_otp(&recovered, &self.k_bc_segment(i))?;
            self.send(charlie, bob, "verify/E(m'_i)", Payload::Classical(sealed_m))?;
            let k_bc_i = self.k_bc_segment(i);
            let bob_received = classical_otp(&self.net.recv_classical(charlie, bob)?, &k_bc_i)?;
            let verdict = if !serial_ok {
                Verdict::Rejected(RejectReason::SerialMismatch)
            } else if bob_received == bob_message {
                Verdict::Accepted
            } else {
                Verdict::Rejected(RejectReason::MessageMismatch)
            };
            signatories.push(OrigSignatoryResult {
                index: i + 1,
                serial,
                produced,
                received,
                recovered,
                bob_received,
                verdict,
            });
        }

        // Combined phase.
        let recovered: Vec<Bitstring> = signatories.iter().map(|s| s.recovered.clone()).collect();
        let mut multi_signature: Vec<OrigSignature> =
            signatories.iter().map(|s| s.received.clone()).collect();
        let combined = if signatories
            .iter()
            .any(|s| s.verdict == Verdict::Rejected(RejectReason::SerialMismatch))
        {
            Verdict::Rejected(RejectReason::Incomplete)
        } else {
            match orig_confirm(&recovered) {
                Err(reason) => Verdict::Rejected(reason),
                Ok(m1) => {
                    let m1 = m1.clone();
                    hooks.multi_signature(&mut multi_signature);
                    let sealed = classical_otp(&m1, &self.k_bc_segment(t))?;
                    self.send(charlie, bob, "combine/E(m'_1)", Payload::Classical(sealed))?;
                    let k_bc_t = self.k_bc_segment(t);
                    let bob_m1 = classical_otp(&self.net.recv_classical(charlie, bob)?, &k_bc_t)?;
                    if bob_m1 == bob_message {
                        Verdict::Accepted
                    } else {
                        Verdict::Rejected(RejectReason::MessageMismatch)
                    }
                }
            }
        };

        Ok(OrigOutcome {
            message: self.message,
            bob_message,
            signatories,
            multi_signature,
            combined,
            transcript_digest: self.net.transcript().digest(),
            transcript_events: self.net.transcript().len(),
        })
    }
}

/// Honest run of the full protocol.
pub fn orig_run_honest(n: usize, t: usize, seed: u64) -> Result<OrigOutcome> {
    OrigWorld::new(OrigConfig::new(n, t, seed))?.run(&mut Honest)
}
