//! The improved protocol: blinded message `m′ = m ⊕ r`, unbalanced encoding
//! basis, hash-derived improved quantum pads, Charlie-prepared EPR pairs with
//! a decoy check, digest-carrying signatures and public-board verification.

use std::collections::BTreeSet;

use qbsig_qsim::{
    prepare_epr, prepare_message_qubit_improved, teleport_correction, EncodingBasis,
    MeasurementBasis, QuantumMemory, Qubit,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::bits::Bitstring;
use crate::crypto::{
    decode_classical, encode_classical, qotp_improved_decrypt, qotp_improved_encrypt, HashFn,
    KeyLengths, KeyRing, SIGNATURE_PAD_SEGMENTS,
};
use crate::error::{ProtocolError, Result};
use crate::netsim::{BoardEntry, Network, PartyId, Payload, TapContext};
use crate::original::{signature_outcome, BranchPolicy};
use crate::verdict::{RejectReason, Verdict};
use crate::SimRng;

/// Width of a decoy position on the wire.
pub const DECOY_POSITION_BITS: usize = 16;

pub const DEFAULT_DECOYS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpConfig {
    pub n: usize,
    pub t: usize,
    /// Decoy pairs checked per signatory channel.
    pub l: usize,
    #[serde(skip)]
    pub basis: EncodingBasis,
    pub seed: u64,
    pub message: Option<Bitstring>,
}

impl ImpConfig {
    pub fn new(n: usize, t: usize, seed: u64) -> Self {
        Self {
            n,
            t,
            l: DEFAULT_DECOYS,
            basis: EncodingBasis::default(),
            seed,
            message: None,
        }
    }

    pub fn with_decoys(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    pub fn with_basis(mut self, basis: EncodingBasis) -> Self {
        self.basis = basis;
        self
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
        if self.l == 0 {
            return Err(ProtocolError::Config("l must be at least 1".into()));
        }
        if self.n + self.l > 1 << DECOY_POSITION_BITS {
            return Err(ProtocolError::Config(format!(
                "n + l = {} exceeds the {DECOY_POSITION_BITS}-bit position space",
                self.n + self.l
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

    pub fn key_lengths(&self) -> KeyLengths {
        KeyLengths::uniform(4 * self.n)
    }
}

/// `m′ = m ⊕ r`.
pub fn imp_conceal(m: &Bitstring, r: &Bitstring) -> Result<Bitstring> {
    Ok(m.xor(r)?)
}

/// `S_i = (β_i ⊕ K) ‖ H[(β_i ⊕ K) ‖ R_i]`, with `K` the first `2n` bits of
/// `K_CU_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ImpSignature {
    pub masked_beta: Bitstring,
    pub digest: Bitstring,
    /// Kept by the signatory until the board reveal.
    pub nonce: Bitstring,
}

impl ImpSignature {
    pub fn build(
        beta: &Bitstring,
        k_cu: &Bitstring,
        nonce: Bitstring,
        hash: &HashFn,
    ) -> Result<Self> {
        let masked_beta = mask_beta(beta, k_cu)?;
        let digest = hash.hash(&masked_beta.concat(&nonce));
        Ok(Self {
            masked_beta,
            digest,
            nonce,
        })
    }

    /// The `6n`-bit string that is put on the wire.
    pub fn wire(&self) -> Bitstring {
        self.masked_beta.concat(&self.digest)
    }
}

/// `β ⊕ K_CU[..|β|]`. Self-inverse.
pub fn mask_beta(beta: &Bitstring, k_cu: &Bitstring) -> Result<Bitstring> {
    if k_cu.len() < beta.len() {
        return Err(ProtocolError::SignatureLength {
            expected: beta.len(),
            got: k_cu.len(),
        });
    }
    Ok(beta.xor(&k_cu.slice(0..beta.len()))?)
}

/// Splits a received `6n`-bit signature into its masked part and digest.
pub fn split_wire(wire: &Bitstring, n: usize) -> Result<(Bitstring, Bitstring)> {
    if wire.len() != 6 * n {
        return Err(ProtocolError::SignatureLength {
            expected: 6 * n,
            got: wire.len(),
        });
    }
    Ok((wire.slice(0..2 * n), wire.slice(2 * n..6 * n)))
}

/// Board-side digest check of one announced signature against a revealed
/// nonce: `H(masked′ ‖ R) = digest′`.
pub fn digest_matches(wire: &Bitstring, nonce: &Bitstring, n: usize, hash: &HashFn) -> bool {
    match split_wire(wire, n) {
        Ok((masked, digest)) => hash.hash(&masked.concat(nonce)) == digest,
        Err(_) => false,
    }
}

/// `F′ ⊆ F` with `F = {H(masked′_i ‖ R_j)}` over all index pairs and
/// `F′ = {digest′_i}`.
pub fn subset_check(wires: &[Bitstring], nonces: &[Bitstring], n: usize, hash: &HashFn) -> bool {
    let mut f = BTreeSet::new();
    let mut f_prime = BTreeSet::new();
    for wire in wires {
        let Ok((masked, digest)) = split_wire(wire, n) else {
            return false;
        };
        for r in nonces {
            f.insert(hash.hash(&masked.concat(r)));
        }
        f_prime.insert(digest);
    }
    f_prime.is_subset(&f)
}

/// Combined verdict from the per-signatory results and the board data.
pub fn imp_combine(
    individual: &[Verdict],
    m_stars: &[Bitstring],
    bob_message: &Bitstring,
    wires: &[Bitstring],
    nonces: &[Bitstring],
    n: usize,
    hash: &HashFn,
) -> Verdict {
    if individual.is_empty() || individual.iter().any(|v| !v.is_accepted()) {
        return Verdict::Rejected(RejectReason::Incomplete);
    }
    if m_stars.windows(2).any(|w| w[0] != w[1]) {
        return Verdict::Rejected(RejectReason::SignatoryDisagreement);
    }
    if &m_stars[0] != bob_message {
        return Verdict::Rejected(RejectReason::MessageMismatch);
    }
    if subset_check(wires, nonces, n, hash) {
        Verdict::Accepted
    } else {
        Verdict::Rejected(RejectReason::SubsetCheckFailed)
    }
}

/// Pads `data` with `H(K ‖ r¹) ‖ …` (one nonce per `n` qubits) and appends
/// the nonces as computational-basis qubits.
pub fn seal(
    mem: &mut QuantumMemory,
    mut data: Vec<Qubit>,
    key: &Bitstring,
    nonces: &[Bitstring],
    hash: &HashFn,
) -> Result<Vec<Qubit>> {
    let pad = derive_pad(key, nonces, hash)?;
    qotp_improved_encrypt(mem, &data, &pad)?;
    for r in nonces {
        data.extend(encode_classical(mem, r));
    }
    Ok(data)
}

/// Inverse of [`seal`]: reads the trailing nonces, derives the pad and
/// decrypts the data qubits in place.
pub fn open(
    mem: &mut QuantumMemory,
    mut payload: Vec<Qubit>,
    key: &Bitstring,
    segments: usize,
    hash: &HashFn,
    rng: &mut SimRng,
) -> Result<(Vec<Qubit>, Vec<Bitstring>)> {
    let w = hash.output_bits();
    let nonce_bits = segments * w;
    if payload.len() < nonce_bits {
        return Err(ProtocolError::RegisterMismatch {
            expected: nonce_bits,
            got: payload.len(),
        });
    }
    let tail = payload.split_off(payload.len() - nonce_bits);
    let all = decode_classical(mem, tail, rng)?;
    let nonces: Vec<Bitstring> = (0..segments)
        .map(|k| all.slice(k * w..(k + 1) * w))
        .collect();
    let pad = derive_pad(key, &nonces, hash)?;
    qotp_improved_decrypt(mem, &payload, &pad)?;
    Ok((payload, nonces))
}

pub fn derive_pad(key: &Bitstring, nonces: &[Bitstring], hash: &HashFn) -> Result<Bitstring> {
    if nonces.len() == SIGNATURE_PAD_SEGMENTS {
        return Ok(hash.hash_vector_key(key, nonces)?);
    }
    Ok(nonces.iter().fold(Bitstring::new(), |acc, r| {
        acc.concat(&hash.derive_key(key, r))
    }))
}

/// One decoy: position among the `n + l` pairs and basis (`true` = X).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Decoy {
    pub position: usize,
    pub x_basis: bool,
}

pub fn encode_decoys(decoys: &[Decoy]) -> Bitstring {
    decoys.iter().fold(Bitstring::new(), |acc, d| {
        acc.concat(&Bitstring::from_u64(d.position as u64, DECOY_POSITION_BITS))
            .concat(&Bitstring::from_bits(vec![d.x_basis]))
    })
}

pub fn decode_decoys(bits: &Bitstring) -> Vec<Decoy> {
    let w = DECOY_POSITION_BITS + 1;
    (0..bits.len() / w)
        .map(|k| Decoy {
            position: bits.slice(k * w..k * w + DECOY_POSITION_BITS).to_u64() as usize,
            x_basis: bits.bits()[k * w + DECOY_POSITION_BITS],
        })
        .collect()
}

fn decoy_basis(x_basis: bool) -> MeasurementBasis {
    if x_basis {
        MeasurementBasis::hadamard()
    } else {
        MeasurementBasis::computational()
    }
}

/// Measures the named positions of `halves`, returning the outcomes and the
/// untouched remainder in order.
fn measure_positions(
    mem: &mut QuantumMemory,
    halves: Vec<Qubit>,
    decoys: &[Decoy],
    rng: &mut SimRng,
) -> Result<(Bitstring, Vec<Qubit>)> {
    let mut slots: Vec<Option<Qubit>> = halves.into_iter().map(Some).collect();
    let mut outcomes = Vec::with_capacity(decoys.len());
    for d in decoys {
        let q = slots.get_mut(d.position).and_then(Option::take).ok_or(
            ProtocolError::RegisterMismatch {
                expected: d.position + 1,
                got: 0,
            },
        )?;
        outcomes.push(mem.measure(q, &decoy_basis(d.x_basis), rng)?);
    }
    Ok((
        Bitstring::from_bits(outcomes),
        slots.into_iter().flatten().collect(),
    ))
}

/// Insertion points for insider behaviour; all default to honest.
pub trait ImpHooks {
    /// `U_i` holds the decrypted information qubits before signing.
    fn signatory_peek(&mut self, _ctx: &mut TapContext<'_>, _i: usize, _info: &mut Vec<Qubit>) {}

    fn sign_policy(&mut self, _i: usize) -> BranchPolicy {
        BranchPolicy::Sample
    }

    fn after_sign(&mut self, _i: usize, _beta: &Bitstring, _signature: &ImpSignature) {}

    /// Charlie's individual board announcement of `S′_i`.
    fn announce_individual(&mut self, _i: usize, _wire: &mut Bitstring) {}

    /// Charlie's announcement of the multi-signature `S`.
    fn announce_multi(&mut self, _wires: &mut Vec<Bitstring>) {}
}

pub struct Honest;

impl ImpHooks for Honest {}

#[derive(Clone, Debug, Serialize)]
pub struct ImpSignatoryResult {
    pub index: usize,
    /// Whether the decoy check passed.
    pub channel_ok: bool,
    pub beta: Option<Bitstring>,
    pub signature: Option<ImpSignature>,
    /// `S′_i` as Charlie measured it.
    pub received: Option<Bitstring>,
    pub m_double_prime: Option<Bitstring>,
    pub m_star: Option<Bitstring>,
    /// `m*` as Bob decoded it.
    pub bob_m_star: Option<Bitstring>,
    pub digest_ok: Option<bool>,
    pub verdict: Verdict,
}

impl ImpSignatoryResult {
    fn aborted(index: usize) -> Self {
        Self {
            index,
            channel_ok: false,
            beta: None,
            signature: None,
            received: None,
            m_double_prime: None,
            m_star: None,
            bob_m_star: None,
            digest_ok: None,
            verdict: Verdict::Rejected(RejectReason::ChannelCheckFailed),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImpOutcome {
    pub message: Bitstring,
    pub blinding: Bitstring,
    pub bob_message: Bitstring,
    /// `H(K_AB ‖ r0)` used for the initial transfer.
    pub initial_pad: Bitstring,
    pub signatories: Vec<ImpSignatoryResult>,
    pub combined: Verdict,
    pub transcript_digest: String,
    pub transcript_events: usize,
    pub board: Vec<BoardEntry>,
}

impl ImpOutcome {
    pub fn all_individual_accepted(&self) -> bool {
        self.signatories.iter().all(|s| s.verdict.is_accepted())
    }

    /// At least one `m*_i` reached Bob and differed from his `m`.
    pub fn message_stage_rejected(&self) -> bool {
        self.signatories
            .iter()
            .any(|s| s.verdict == Verdict::Rejected(RejectReason::MessageMismatch))
    }
}

pub struct ImpWorld {
    pub config: ImpConfig,
    pub keys: KeyRing,
    pub hash: HashFn,
    pub message: Bitstring,
    /// Blinding string `r`.
    pub blinding: Bitstring,
    pub memory: QuantumMemory,
    pub net: Network,
    pub rng: SimRng,
}

impl ImpWorld {
    pub fn new(config: ImpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SimRng::seed_from_u64(config.seed);
        let keys = KeyRing::generate(config.key_lengths(), config.t, &mut rng);
        Self::build(config, keys, rng)
    }

    /// World with a caller-supplied key ring; randomness still comes from
    /// the config seed.
    pub fn with_keys(config: ImpConfig, keys: KeyRing) -> Result<Self> {
        config.validate()?;
        let want = 4 * config.n;
        let lengths = [&keys.k_ab, &keys.k_ac, &keys.k_bc]
            .into_iter()
            .chain(keys.k_au.iter())
            .chain(keys.k_cu.iter())
            .map(Bitstring::len);
        for got in lengths {
            if got != want {
                return Err(ProtocolError::Config(format!(
                    "key of {got} bits, expected {want}"
                )));
            }
        }
        if keys.signatories() != config.t || keys.k_cu.len() != config.t {
            return Err(ProtocolError::Config(format!(
                "key ring has {} signatories, t = {}",
                keys.signatories(),
                config.t
            )));
        }
        let rng = SimRng::seed_from_u64(config.seed);
        Self::build(config, keys, rng)
    }

    fn build(config: ImpConfig, keys: KeyRing, mut rng: SimRng) -> Result<Self> {
        let message = match &config.message {
            Some(m) => m.clone(),
            None => Bitstring::random(config.n, &mut rng),
        };
        let blinding = Bitstring::random(config.n, &mut rng);
        let mut net = Network::new();
        net.connect(PartyId::Alice, PartyId::Bob);
        net.connect(PartyId::Alice, PartyId::Charlie);
        net.connect(PartyId::Charlie, PartyId::Bob);
        for i in 1..=config.t {
            let u = PartyId::Signatory(i);
            net.connect(PartyId::Alice, u);
            net.connect(PartyId::Charlie, u);
            net.connect(u, PartyId::Charlie);
        }
        Ok(Self {
            hash: HashFn::for_message_bits(config.n),
            config,
            keys,
            message,
            blinding,
            memory: QuantumMemory::new(),
            net,
            rng,
        })
    }

    fn ctx(&mut self, from: PartyId, to: PartyId) -> TapContext<'_> {
        TapContext {
            from,
            to,
            memory: &mut self.memory,
            rng: &mut self.rng,
        }
    }

    fn nonce(&mut self) -> Bitstring {
        Bitstring::random(4 * self.config.n, &mut self.rng)
    }

    fn send(&mut self, from: PartyId, to: PartyId, label: &str, payload: Payload) -> Result<()> {
        self.net
            .send(from, to, label, payload, &mut self.memory, &mut self.rng)?;
        Ok(())
    }

    /// Seals `bits` as computational qubits under `key` and sends them.
    fn send_sealed_bits(
        &mut self,
        from: PartyId,
        to: PartyId,
        label: &str,
        bits: &Bitstring,
        key: &Bitstring,
    ) -> Result<Bitstring> {
        let nonce = self.nonce();
        let data = encode_classical(&mut self.memory, bits);
        let payload = seal(
            &mut self.memory,
            data,
            key,
            std::slice::from_ref(&nonce),
            &self.hash,
        )?;
        self.send(from, to, label, Payload::Quantum(payload))?;
        Ok(self.hash.derive_key(key, &nonce))
    }

    fn recv_sealed_bits(
        &mut self,
        from: PartyId,
        to: PartyId,
        key: &Bitstring,
        len: usize,
    ) -> Result<Bitstring> {
        let payload = self.net.recv_quantum(from, to)?;
        let (data, _) = open(&mut self.memory, payload, key, 1, &self.hash, &mut self.rng)?;
        if data.len() != len {
            return Err(ProtocolError::RegisterMismatch {
                expected: len,
                got: data.len(),
            });
        }
        Ok(decode_classical(&mut self.memory, data, &mut self.rng)?)
    }

    /// Charlie distributes `n + l` EPR halves to `U_i` and checks `l` decoys.
    /// Returns the surviving `(U_i half, Charlie half)` lists, or `None` on
    /// abort.
    fn channel_setup(&mut self, i: usize) -> Result<Option<(Vec<Qubit>, Vec<Qubit>)>> {
        let (n, l) = (self.config.n, self.config.l);
        let ui = PartyId::Signatory(i + 1);
        let charlie = PartyId::Charlie;

        let mut sent = Vec::with_capacity(n + l);
        let mut kept = Vec::with_capacity(n + l);
        for _ in 0..n + l {
            let mut pair = self.memory.allocate(prepare_epr());
            kept.push(pair.pop().expect("pair"));
            sent.push(pair.pop().expect("pair"));
        }
        self.send(charlie, ui, "setup/epr", Payload::Quantum(sent))?;
        let u_halves = self.net.recv_quantum(charlie, ui)?;
        if u_halves.len() != n + l {
            return Ok(None);
        }

        let mut positions = sample(&mut self.rng, n + l, l).into_vec();
        positions.sort_unstable();
        let decoys: Vec<Decoy> = positions
            .into_iter()
            .map(|position| Decoy {
                position,
                x_basis: self.rng.random(),
            })
            .collect();
        let (c_outcomes, c_rest) =
            measure_positions(&mut self.memory, kept, &decoys, &mut self.rng)?;
        self.send(
            charlie,
            ui,
            "setup/decoys",
            Payload::Classical(encode_decoys(&decoys)),
        )?;

        let announced = decode_decoys(&self.net.recv_classical(charlie, ui)?);
        let (u_outcomes, u_rest) =
            measure_positions(&mut self.memory, u_halves, &announced, &mut self.rng)?;
        self.send(
            ui,
            charlie,
            "setup/outcomes",
            Payload::Classical(u_outcomes),
        )?;
        let reported = self.net.recv_classical(ui, charlie)?;

        if reported != c_outcomes {
            return Ok(None);
        }
        Ok(Some((u_rest, c_rest)))
    }

    pub fn run(mut self, hooks: &mut dyn ImpHooks) -> Result<ImpOutcome> {
        let (n, t) = (self.config.n, self.config.t);
        let alice = PartyId::Alice;
        let bob = PartyId::Bob;
        let charlie = PartyId::Charlie;
        let basis = self.config.basis;
        let readout = basis.measurement_basis();

        // Conceal.
        let m_prime = imp_conceal(&self.message, &self.blinding)?;

        // |m⟩ to Bob.
        let k_ab = self.keys.k_ab.clone();
        let message = self.message.clone();
        let initial_pad = self.send_sealed_bits(alice, bob, "initial/E(m)", &message, &k_ab)?;
        let bob_message = self.recv_sealed_bits(alice, bob, &k_ab, n)?;

        // |r⟩ to Charlie.
        let k_ac = self.keys.k_ac.clone();
        let blinding = self.blinding.clone();
        self.send_sealed_bits(alice, charlie, "initial/E(r)", &blinding, &k_ac)?;
        let charlie_r = self.recv_sealed_bits(alice, charlie, &k_ac, n)?;

        let mut signatories = Vec::with_capacity(t);
        for i in 0..t {
            let ui = PartyId::Signatory(i + 1);
            let k_au = self.keys.k_au[i].clone();
            let k_cu = self.keys.k_cu[i].clone();
            let k_bc = self.keys.k_bc.clone();

            // Entanglement channel with decoy check.
            let Some((u_halves, c_halves)) = self.channel_setup(i)? else {
                signatories.push(ImpSignatoryResult::aborted(i + 1));
                continue;
            };

            // Alice encodes m′ and sends it sealed.
            let info: Vec<Qubit> = m_prime
                .bits()
                .iter()
                .map(|&b| {
                    self.memory
                        .allocate_one(prepare_message_qubit_improved(b, &basis))
                })
                .collect::<std::result::Result<_, _>>()?;
            let r2 = self.nonce();
            let payload = seal(&mut self.memory, info, &k_au, &[r2], &self.hash)?;
            self.send(alice, ui, "sign/E(psi_M)", Payload::Quantum(payload))?;

            // Signatory opens and signs.
            let payload = self.net.recv_quantum(alice, ui)?;
            let (mut info, _) = open(
                &mut self.memory,
                payload,
                &k_au,
                1,
                &self.hash,
                &mut self.rng,
            )?;
            hooks.signatory_peek(&mut self.ctx(ui, ui), i, &mut info);
            if info.len() != n || u_halves.len() != n {
                return Err(ProtocolError::RegisterMismatch {
                    expected: n,
                    got: info.len().min(u_halves.len()),
                });
            }
            let policy = hooks.sign_policy(i);
            let mut outcomes = Vec::with_capacity(n);
            for (j, (m, u)) in info.into_iter().zip(u_halves).enumerate() {
                outcomes.push(policy.measure(&mut self.memory, j, m, u, &mut self.rng)?);
            }
            let beta = crate::original::outcomes_to_bits(&outcomes);
            let nonce_r = self.nonce();
            let signature = ImpSignature::build(&beta, &k_cu, nonce_r, &self.hash)?;
            hooks.after_sign(i, &beta, &signature);

            // Signature to Charlie under K_CU.
            let r3: Vec<Bitstring> = (0..SIGNATURE_PAD_SEGMENTS).map(|_| self.nonce()).collect();
            let s_qubits = encode_classical(&mut self.memory, &signature.wire());
            let payload = seal(&mut self.memory, s_qubits, &k_cu, &r3, &self.hash)?;
            self.send(ui, charlie, "sign/E(S_i)", Payload::Quantum(payload))?;

            // Charlie opens the signature.
            let payload = self.net.recv_quantum(ui, charlie)?;
            let (s_qubits, _) = open(
                &mut self.memory,
                payload,
                &k_cu,
                SIGNATURE_PAD_SEGMENTS,
                &self.hash,
                &mut self.rng,
            )?;
            let received = decode_classical(&mut self.memory, s_qubits, &mut self.rng)?;
            let (masked, _) = split_wire(&received, n)?;
            let beta_prime = mask_beta(&masked, &k_cu)?;

            // Correct, read out, unblind.
            let mut m2 = Vec::with_capacity(n);
            for (j, c) in c_halves.into_iter().enumerate() {
                self.memory
                    .apply_pauli(&c, teleport_correction(signature_outcome(&beta_prime, j)))?;
                m2.push(self.memory.measure(c, &readout, &mut self.rng)?);
            }
            let m_double_prime = Bitstring::from_bits(m2);
            let m_star = m_double_prime.xor(&charlie_r)?;
            self.send_sealed_bits(charlie, bob, "verify/E(m*)", &m_star, &k_bc)?;

            // Bob compares and checks the board.
            let bob_m_star = self.recv_sealed_bits(charlie, bob, &k_bc, n)?;
            let (digest_ok, verdict) = if bob_m_star != bob_message {
                (None, Verdict::Rejected(RejectReason::MessageMismatch))
            } else {
                let mut announced = received.clone();
                hooks.announce_individual(i, &mut announced);
                self.net
                    .announce(charlie, format!("S'_{}", i + 1), announced.clone());
                self.net
                    .announce(ui, format!("R_{}", i + 1), signature.nonce.clone());
                let s_board = self
                    .net
                    .board()
                    .latest(charlie, &format!("S'_{}", i + 1))
                    .cloned()
                    .unwrap_or_default();
                let r_board = self
                    .net
                    .board()
                    .latest(ui, &format!("R_{}", i + 1))
                    .cloned()
                    .unwrap_or_default();
                let ok = digest_matches(&s_board, &r_board, n, &self.hash);
                let v = if ok {
                    Verdict::Accepted
                } else {
                    Verdict::Rejected(RejectReason::DigestMismatch)
                };
                (Some(ok), v)
            };

            signatories.push(ImpSignatoryResult {
                index: i + 1,
                channel_ok: true,
                beta: Some(beta),
                signature: Some(signature),
                received: Some(received),
                m_double_prime: Some(m_double_prime),
                m_star: Some(m_star),
                bob_m_star: Some(bob_m_star),
                digest_ok,
                verdict,
            });
        }

        // Combined signature.
        let individual: Vec<Verdict> = signatories.iter().map(|s| s.verdict).collect();
        let m_stars: Vec<Bitstring> = signatories
            .iter()
            .filter_map(|s| s.m_star.clone())
            .collect();
        let combined = if individual.iter().any(|v| !v.is_accepted()) {
            Verdict::Rejected(RejectReason::Incomplete)
        } else if m_stars.windows(2).any(|w| w[0] != w[1]) {
            Verdict::Rejected(RejectReason::SignatoryDisagreement)
        } else {
            let k_bc = self.keys.k_bc.clone();
            let m1 = m_stars[0].clone();
            self.send_sealed_bits(charlie, bob, "combine/E(m*_1)", &m1, &k_bc)?;
            let bob_m1 = self.recv_sealed_bits(charlie, bob, &k_bc, n)?;
            let mut wires: Vec<Bitstring> = signatories
                .iter()
                .filter_map(|s| s.received.clone())
                .collect();
            if bob_m1 == bob_message {
                hooks.announce_multi(&mut wires);
                self.net.announce(
                    charlie,
                    "S",
                    wires.iter().fold(Bitstring::new(), |a, w| a.concat(w)),
                );
                let mut nonces = Vec::with_capacity(t);
                for s in &signatories {
                    let r = s
                        .signature
                        .as_ref()
                        .map(|x| x.nonce.clone())
                        .unwrap_or_default();
                    self.net.announce(
                        PartyId::Signatory(s.index),
                        format!("R_{}", s.index),
                        r.clone(),
                    );
                    nonces.push(r);
                }
                let board_s = self
                    .net
                    .board()
                    .latest(charlie, "S")
                    .cloned()
                    .unwrap_or_default();
                let board_wires: Vec<Bitstring> = board_s
                    .chunks(6 * n)
                    .map(|c| Bitstring::from_bits(c.to_vec()))
                    .collect();
                imp_combine(
                    &individual,
                    &[bob_m1],
                    &bob_message,
                    &board_wires,
                    &nonces,
                    n,
                    &self.hash,
                )
            } else {
                Verdict::Rejected(RejectReason::MessageMismatch)
            }
        };

        Ok(ImpOutcome {
            message: self.message,
            blinding: self.blinding,
            bob_message,
            initial_pad,
            signatories,
            combined,
            transcript_digest: self.net.transcript().digest(),
            transcript_events: self.net.transcript().len(),
            board: self.net.board().entries().to_vec(),
        })
    }
}

pub fn imp_run_honest(n: usize, t: usize, seed: u64) -> Result<ImpOutcome> {
    ImpWorld::new(ImpConfig::new(n, t, seed))?.run(&mut Honest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qbsig_qsim::BellOutcome;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn conceal_examples() {
        assert_eq!(imp_conceal(&bs("1010"), &bs("0110")).unwrap(), bs("1100"));
        let m = bs("1011");
        assert_eq!(imp_conceal(&m, &Bitstring::zeros(4)).unwrap(), m);
        let r = bs("0111");
        assert_eq!(imp_conceal(&imp_conceal(&m, &r).unwrap(), &r).unwrap(), m);
        assert!(imp_conceal(&m, &bs("1")).is_err());
    }

    #[test]
    fn honest_run_accepts() {
        let out = imp_run_honest(8, 3, 5).unwrap();
        assert!(out.all_individual_accepted(), "{:?}", out.signatories);
        assert_eq!(out.combined, Verdict::Accepted);
        for s in &out.signatories {
            assert_eq!(s.m_star.as_ref(), Some(&out.message));
            assert_eq!(s.digest_ok, Some(true));
            assert_eq!(s.received, s.signature.as_ref().map(ImpSignature::wire));
        }
    }

    #[test]
    fn honest_minimal_and_single_decoy() {
        let out = ImpWorld::new(ImpConfig::new(1, 1, 3).with_decoys(1))
            .unwrap()
            .run(&mut Honest)
            .unwrap();
        assert_eq!(out.combined, Verdict::Accepted);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ImpWorld::new(ImpConfig::new(0, 1, 0)).is_err());
        assert!(ImpWorld::new(ImpConfig::new(2, 0, 0)).is_err());
        assert!(ImpWorld::new(ImpConfig::new(2, 1, 0).with_decoys(0)).is_err());
        let keys = KeyRing::generate(KeyLengths::uniform(8), 1, &mut SimRng::seed_from_u64(0));
        assert!(ImpWorld::with_keys(ImpConfig::new(8, 1, 0), keys).is_err());
    }

    #[test]
    fn signature_shape() {
        let hash = HashFn::for_message_bits(4);
        let k = Bitstring::zeros(16);
        let beta = bs("00000000");
        let sig = ImpSignature::build(&beta, &k, Bitstring::ones(16), &hash).unwrap();
        assert_eq!(sig.masked_beta, Bitstring::zeros(8));
        assert_eq!(sig.wire().len(), 24);
        assert!(digest_matches(&sig.wire(), &sig.nonce, 4, &hash));
        let other = ImpSignature::build(&beta, &k, Bitstring::zeros(16), &hash).unwrap();
        assert_ne!(sig.digest, other.digest);
    }

    struct ForceBeta00;

    impl ImpHooks for ForceBeta00 {
        fn sign_policy(&mut self, _i: usize) -> BranchPolicy {
            BranchPolicy::Forced(vec![BellOutcome::new(false, false); 4])
        }
    }

    #[test]
    fn forced_outcomes_with_zero_key() {
        let config = ImpConfig::new(4, 1, 11);
        let mut keys = KeyRing::generate(config.key_lengths(), 1, &mut SimRng::seed_from_u64(1));
        keys.k_cu[0] = Bitstring::zeros(16);
        let out = ImpWorld::with_keys(config, keys)
            .unwrap()
            .run(&mut ForceBeta00)
            .unwrap();
        let sig = out.signatories[0].signature.as_ref().unwrap();
        assert_eq!(sig.masked_beta, Bitstring::zeros(8));
        assert_eq!(out.combined, Verdict::Accepted);
    }

    struct TamperDigest;

    impl ImpHooks for TamperDigest {
        fn announce_individual(&mut self, _i: usize, wire: &mut Bitstring) {
            let last = wire.len() - 1;
            wire.flip(last);
        }
    }

    #[test]
    fn tampered_digest_keeps_message_but_fails_board() {
        let out = ImpWorld::new(ImpConfig::new(4, 2, 8))
            .unwrap()
            .run(&mut TamperDigest)
            .unwrap();
        for s in &out.signatories {
            assert_eq!(s.m_star.as_ref(), Some(&out.message));
            assert_eq!(s.verdict, Verdict::Rejected(RejectReason::DigestMismatch));
        }
        assert_eq!(out.combined, Verdict::Rejected(RejectReason::Incomplete));
    }

    #[test]
    fn subset_check_rules() {
        let hash = HashFn::for_message_bits(2);
        let k = bs("00000000");
        let mk = |beta: &str, r: &str| ImpSignature::build(&bs(beta), &k, bs(r), &hash).unwrap();
        let a = mk("0110", "10101010");
        let b = mk("1100", "01010101");
        let wires = vec![a.wire(), b.wire()];
        let nonces = vec![a.nonce.clone(), b.nonce.clone()];
        assert!(subset_check(&wires, &nonces, 2, &hash));
        let mut forged = b.wire();
        forged.flip(7);
        assert!(!subset_check(&[a.wire(), forged], &nonces, 2, &hash));
        assert!(subset_check(
            &[a.wire()],
            std::slice::from_ref(&a.nonce),
            2,
            &hash
        ));
    }

    #[test]
    fn combine_rules() {
        let hash = HashFn::for_message_bits(2);
        let sig = ImpSignature::build(&bs("0110"), &bs("00000000"), bs("11110000"), &hash).unwrap();
        let m = bs("10");
        let ok = Verdict::Accepted;
        let wires = [sig.wire()];
        let nonces = [sig.nonce.clone()];
        assert_eq!(
            imp_combine(
                &[ok],
                std::slice::from_ref(&m),
                &m,
                &wires,
                &nonces,
                2,
                &hash
            ),
            Verdict::Accepted
        );
        assert_eq!(
            imp_combine(
                &[ok, ok],
                &[m.clone(), bs("11")],
                &m,
                &wires,
                &nonces,
                2,
                &hash
            ),
            Verdict::Rejected(RejectReason::SignatoryDisagreement)
        );
        assert_eq!(
            imp_combine(&[ok], &[bs("11")], &m, &wires, &nonces, 2, &hash),
            Verdict::Rejected(RejectReason::MessageMismatch)
        );
    }

    #[test]
    fn decoy_wire_round_trip() {
        let decoys = vec![
            Decoy {
                position: 0,
                x_basis: true,
            },
            Decoy {
                position: 23,
                x_basis: false,
            },
        ];
        let bits = encode_decoys(&decoys);
        assert_eq!(bits.len(), 2 * (DECOY_POSITION_BITS + 1));
        assert_eq!(decode_decoys(&bits), decoys);
    }

    #[test]
    fn seal_open_round_trip() {
        let mut mem = QuantumMemory::new();
        let mut rng = SimRng::seed_from_u64(4);
        let hash = HashFn::for_message_bits(3);
        let key = Bitstring::random(12, &mut rng);
        let bits = bs("101110011001010110");
        let nonces: Vec<Bitstring> = (0..6).map(|_| Bitstring::random(12, &mut rng)).collect();
        let data = encode_classical(&mut mem, &bits);
        let sealed = seal(&mut mem, data, &key, &nonces, &hash).unwrap();
        assert_eq!(sealed.len(), 18 + 72);
        let (data, got_nonces) = open(&mut mem, sealed, &key, 6, &hash, &mut rng).unwrap();
        assert_eq!(got_nonces, nonces);
        assert_eq!(decode_classical(&mut mem, data, &mut rng).unwrap(), bits);
    }

    #[test]
    fn x_tap_on_every_epr_half_aborts() {
        let mut world = ImpWorld::new(ImpConfig::new(4, 1, 2)).unwrap();
        world
            .net
            .install_tap(
                PartyId::Charlie,
                PartyId::Signatory(1),
                Box::new(
                    |msg: &mut crate::netsim::Message, ctx: &mut TapContext<'_>| {
                        if let Payload::Quantum(qs) = &msg.payload {
                            if msg.label == "setup/epr" {
                                for q in qs {
                                    ctx.memory.apply_pauli(q, qbsig_qsim::Pauli::X).unwrap();
                                }
                            }
                        }
                    },
                ),
            )
            .unwrap();
        // Every Z-checked decoy disagrees; with 16 decoys at least one is Z
        // for this seed.
        let out = world.run(&mut Honest).unwrap();
        assert!(!out.signatories[0].channel_ok);
        assert_eq!(out.combined, Verdict::Rejected(RejectReason::Incomplete));
    }
}
