//! Simulator for key distribution by entanglement swapping.
//!
//! Alice and Bob pre-share pairs of qubits in publicly known Bell states,
//! two pairs per group. Alice Bell-measures her halves, Bob measures his,
//! and each infers the other's outcome from the swapping rule, so every
//! group yields four shared key bits without any qubit travelling. A random
//! subset of groups is published to detect tampering.
//!
//! * [`bell`]: the Bell-index group law, codebook and key fragments.
//! * [`statevector`]: dense statevector oracle with Bell-basis measurement.
//! * [`protocol`]: the two-party session over a public classical channel.
//! * [`adversary`]: the eavesdropping strategies.
//! * [`analysis`]: closed-form figures, Monte Carlo and uniformity testing.
//!
//! ```
//! use entswap::adversary::AdversaryKind;
//! use entswap::protocol::{run_session, SessionConfig, Verdict};
//!
//! let report = run_session(SessionConfig::new(4, 7), AdversaryKind::NoEve).unwrap();
//! assert_eq!(report.verdict, Verdict::Accept);
//! assert_eq!(report.alice_key, report.bob_key);
//! assert_eq!(report.alice_key.len(), 8);
//! ```

pub mod adversary;
pub mod analysis;
pub mod bell;
pub mod error;
pub mod protocol;
pub mod seed;
pub mod statevector;

pub use bell::BellIndex;
pub use error::{AnalysisError, OracleError, ParseError, ProtocolError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bell-algebra.md")]
    mod bell_algebra {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/adversaries.md")]
    mod adversaries {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
}
