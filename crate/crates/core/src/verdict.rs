use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    /// The message Bob recovered differs from the one Charlie confirmed.
    MessageMismatch,
    /// Charlie's per-signatory messages disagree, so the run is terminated.
    SignatoryDisagreement,
    /// The serial on the signature does not match the one on Charlie's qubits.
    SerialMismatch,
    /// Decoy check on the entanglement channel found an error.
    ChannelCheckFailed,
    /// Board digest recomputation failed.
    DigestMismatch,
    /// `F′ ⊄ F` in the combined check.
    SubsetCheckFailed,
    /// Some individual signature was not accepted.
    Incomplete,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MessageMismatch => "message-mismatch",
            RejectReason::SignatoryDisagreement => "signatory-disagreement",
            RejectReason::SerialMismatch => "serial-mismatch",
            RejectReason::ChannelCheckFailed => "channel-check-failed",
            RejectReason::DigestMismatch => "digest-mismatch",
            RejectReason::SubsetCheckFailed => "subset-check-failed",
            RejectReason::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => f.write_str("accept"),
            Verdict::Rejected(r) => write!(f, "reject:{}", r.as_str()),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
