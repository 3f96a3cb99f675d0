//! Simulated communication fabric: ordered point-to-point channels with
//! optional interceptors, an append-only public board, and a transcript of
//! every send and announcement.
//!
//! Quantum payloads are vectors of move-only [`Qubit`] handles, so a tap can
//! take a qubit and hand back something else but has no way to copy it.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use qbsig_qsim::{QuantumMemory, Qubit};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::Bitstring;
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    Alice,
    Bob,
    Charlie,
    /// Signatory `U_i`, 1-based.
    Signatory(usize),
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Alice => f.write_str("alice"),
            PartyId::Bob => f.write_str("bob"),
            PartyId::Charlie => f.write_str("charlie"),
            PartyId::Signatory(i) => write!(f, "u{i}"),
        }
    }
}

impl Serialize for PartyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("no channel {0} -> {1}")]
    NoChannel(PartyId, PartyId),
    #[error("nothing queued on {0} -> {1}")]
    Empty(PartyId, PartyId),
    #[error("expected a {expected} payload, got {got}")]
    UnexpectedPayload {
        expected: &'static str,
        got: &'static str,
    },
}

#[derive(Debug)]
pub enum Payload {
    Classical(Bitstring),
    Quantum(Vec<Qubit>),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Classical(_) => "classical",
            Payload::Quantum(_) => "quantum",
        }
    }

    /// Hex SHA-256 of the classical wire form, or of the qubit handles for a
    /// quantum payload (its amplitudes are not observable).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        match self {
            Payload::Classical(bits) => {
                h.update(b"c");
                h.update(bits.serialize());
            }
            Payload::Quantum(qubits) => {
                h.update(b"q");
                h.update((qubits.len() as u64).to_be_bytes());
                for q in qubits {
                    h.update(q.id().to_be_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn into_classical(self) -> Result<Bitstring, NetError> {
        match self {
            Payload::Classical(b) => Ok(b),
            other => Err(NetError::UnexpectedPayload {
                expected: "classical",
                got: other.kind(),
            }),
        }
    }

    pub fn into_quantum(self) -> Result<Vec<Qubit>, NetError> {
        match self {
            Payload::Quantum(q) => Ok(q),
            other => Err(NetError::UnexpectedPayload {
                expected: "quantum",
                got: other.kind(),
            }),
        }
    }
}

#[derive(Debug)]
pub struct Message {
    pub label: String,
    pub payload: Payload,
}

/// What a tap may touch while a message is in flight.
pub struct TapContext<'a> {
    pub from: PartyId,
    pub to: PartyId,
    pub memory: &'a mut QuantumMemory,
    pub rng: &'a mut SimRng,
}

/// Synchronous interceptor on one channel. It sees each message exactly once
/// and may rewrite or replace the payload before delivery.
pub trait Tap {
    fn intercept(&mut self, msg: &mut Message, ctx: &mut TapContext<'_>);
}

impl<F> Tap for F
where
    F: FnMut(&mut Message, &mut TapContext<'_>),
{
    fn intercept(&mut self, msg: &mut Message, ctx: &mut TapContext<'_>) {
        self(msg, ctx)
    }
}

#[derive(Default)]
struct Channel {
    queue: VecDeque<Message>,
    tap: Option<Box<dyn Tap>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoardEntry {
    pub who: PartyId,
    pub label: String,
    pub value: Bitstring,
}

/// Append-only, world-readable record. No API mutates an existing entry.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PublicBoard {
    entries: Vec<BoardEntry>,
}

impl PublicBoard {
    pub fn entries(&self) -> &[BoardEntry] {
        &self.entries
    }

    /// Most recent value `who` posted under `label`.
    pub fn latest(&self, who: PartyId, label: &str) -> Option<&Bitstring> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.who == who && e.label == label)
            .map(|e| &e.value)
    }

    fn append(&mut self, entry: BoardEntry) {
        self.entries.push(entry);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Classical,
    Quantum,
    Announce,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Classical => "classical",
            EventKind::Quantum => "quantum",
            EventKind::Announce => "announce",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEvent {
    pub time: u64,
    pub from: PartyId,
    /// `None` for a board announcement.
    pub to: Option<PartyId>,
    pub kind: EventKind,
    pub label: String,
    /// Digest of the payload as delivered.
    pub digest: String,
    pub tapped: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push(&mut self, mut event: TranscriptEvent) {
        event.time = self.events.len() as u64;
        self.events.push(event);
    }

    /// One line per event: `time from to kind digest`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let to = e.to.map_or_else(|| "board".to_string(), |p| p.to_string());
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                e.time, e.from, to, e.kind, e.digest
            ));
        }
        out
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.export().as_bytes()))
    }
}

/// All channels, the board, and the transcript of one simulated world.
#[derive(Default)]
pub struct Network {
    channels: BTreeMap<(PartyId, PartyId), Channel>,
    board: PublicBoard,
    transcript: Transcript,
    sends: usize,
    announces: usize,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn connect(&mut self, from: PartyId, to: PartyId) {
        self.channels.entry((from, to)).or_default();
    }

    fn channel_mut(&mut self, from: PartyId, to: PartyId) -> Result<&mut Channel, NetError> {
        self.channels
            .get_mut(&(from, to))
            .ok_or(NetError::NoChannel(from, to))
    }

    /// Installs (or replaces) the interceptor on `from -> to`.
    pub fn install_tap(
        &mut self,
        from: PartyId,
        to: PartyId,
        tap: Box<dyn Tap>,
    ) -> Result<(), NetError> {
        self.channel_mut(from, to)?.tap = Some(tap);
        Ok(())
    }

    pub fn remove_tap(&mut self, from: PartyId, to: PartyId) -> Result<(), NetError> {
        self.channel_mut(from, to)?.tap = None;
        Ok(())
    }

    pub fn send(
        &mut self,
        from: PartyId,
        to: PartyId,
        label: impl Into<String>,
        payload: Payload,
        memory: &mut QuantumMemory,
        rng: &mut SimRng,
    ) -> Result<(), NetError> {
        let channel = self.channel_mut(from, to)?;
        let mut msg = Message {
            label: label.into(),
            payload,
        };
        let tapped = if let Some(tap) = channel.tap.as_mut() {
            let mut ctx = TapContext {
                from,
                to,
                memory,
                rng,
            };
            tap.intercept(&mut msg, &mut ctx);
            true
        } else {
            false
        };
        let event = TranscriptEvent {
            time: 0,
            from,
            to: Some(to),
            kind: match msg.payload {
                Payload::Classical(_) => EventKind::Classical,
                Payload::Quantum(_) => EventKind::Quantum,
            },
            label: msg.label.clone(),
            digest: msg.payload.digest(),
            tapped,
        };
        channel.queue.push_back(msg);
        self.transcript.push(event);
        self.sends += 1;
        Ok(())
    }

    pub fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Message, NetError> {
        self.channel_mut(from, to)?
            .queue
            .pop_front()
            .ok_or(NetError::Empty(from, to))
    }

    pub fn recv_classical(&mut self, from: PartyId, to: PartyId) -> Result<Bitstring, NetError> {
        self.recv(from, to)?.payload.into_classical()
    }

    pub fn recv_quantum(&mut self, from: PartyId, to: PartyId) -> Result<Vec<Qubit>, NetError> {
        self.recv(from, to)?.payload.into_quantum()
    }

    pub fn announce(&mut self, who: PartyId, label: impl Into<String>, value: Bitstring) {
        let label = label.into();
        let digest = Payload::Classical(value.clone()).digest();
        self.board.append(BoardEntry {
            who,
            label: label.clone(),
            value,
        });
        self.transcript.push(TranscriptEvent {
            time: 0,
            from: who,
            to: None,
            kind: EventKind::Announce,
            label,
            digest,
            tapped: false,
        });
        self.announces += 1;
    }

    pub fn board(&self) -> &PublicBoard {
        &self.board
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// `(sends, announcements)` so far.
    pub fn counts(&self) -> (usize, usize) {
        (self.sends, self.announces)
    }
}
