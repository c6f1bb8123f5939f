//! The four Bell states as a finite algebra.
//!
//! A Bell state is addressed by two bits: `phase` (the sign between the two
//! basis kets) and `parity` (whether the kets are correlated, `|00⟩`/`|11⟩`,
//! or anti-correlated, `|01⟩`/`|10⟩`). Under component-wise XOR the four
//! indices form the Klein four-group, and entanglement swapping is literally
//! XOR in this indexing: measuring one qubit of each of two pairs leaves the
//! remote qubits in `a ^ b ^ m`.
//!
//! The classical codebook that turns outcomes into key bits is *not* linear
//! in this indexing, so it is kept as an explicit table.

use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// One of the four Bell states.
///
/// Discriminants follow the fixed outcome order `φ+, φ−, ψ+, ψ−`, which is
/// `phase + 2 * parity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellIndex {
    /// (|00⟩ + |11⟩)/√2
    #[serde(rename = "phi+")]
    PhiPlus = 0,
    /// (|00⟩ − |11⟩)/√2
    #[serde(rename = "phi-")]
    PhiMinus = 1,
    /// (|01⟩ + |10⟩)/√2
    #[serde(rename = "psi+")]
    PsiPlus = 2,
    /// (|01⟩ − |10⟩)/√2
    #[serde(rename = "psi-")]
    PsiMinus = 3,
}

impl BellIndex {
    /// All four states in outcome order.
    pub const ALL: [BellIndex; 4] = [
        BellIndex::PhiPlus,
        BellIndex::PhiMinus,
        BellIndex::PsiPlus,
        BellIndex::PsiMinus,
    ];

    pub fn from_bits(phase: bool, parity: bool) -> Self {
        Self::from_index(usize::from(phase) | usize::from(parity) << 1)
    }

    /// Inverse of [`BellIndex::index`]. Panics when `i > 3`.
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// Position in the fixed outcome order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// `true` for the "−" states.
    pub fn phase(self) -> bool {
        self.index() & 1 == 1
    }

    /// `true` for the anti-correlated ψ family.
    pub fn parity(self) -> bool {
        self.index() & 2 == 2
    }

    pub fn name(self) -> &'static str {
        match self {
            BellIndex::PhiPlus => "phi+",
            BellIndex::PhiMinus => "phi-",
            BellIndex::PsiPlus => "psi+",
            BellIndex::PsiMinus => "psi-",
        }
    }
}

impl BitXor for BellIndex {
    type Output = BellIndex;

    fn bitxor(self, rhs: BellIndex) -> BellIndex {
        BellIndex::from_index(self.index() ^ rhs.index())
    }
}

impl fmt::Display for BellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellIndex {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phi+" | "φ+" | "phi_plus" => Ok(BellIndex::PhiPlus),
            "phi-" | "φ-" | "φ−" | "phi_minus" => Ok(BellIndex::PhiMinus),
            "psi+" | "ψ+" | "psi_plus" => Ok(BellIndex::PsiPlus),
            "psi-" | "ψ-" | "ψ−" | "psi_minus" => Ok(BellIndex::PsiMinus),
            _ => Err(ParseError::BellState(s.to_owned())),
        }
    }
}

/// Component-wise XOR of two Bell indices.
pub fn bell_xor(x: BellIndex, y: BellIndex) -> BellIndex {
    x ^ y
}

/// State of the unmeasured pair after entanglement swapping.
///
/// Pairs `(1,2)` and `(3,4)` start in `init_a` and `init_b`; a Bell
/// measurement on `(1,3)` returning `measured` leaves `(2,4)` in the
/// returned state. The relation is symmetric in the two outcomes, so the
/// party holding `(2,4)` calls the same function with its own outcome to
/// recover the peer's.
pub fn swap_partner(init_a: BellIndex, init_b: BellIndex, measured: BellIndex) -> BellIndex {
    init_a ^ init_b ^ measured
}

/// Two classical key bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitPair {
    pub hi: bool,
    pub lo: bool,
}

impl BitPair {
    pub fn new(hi: bool, lo: bool) -> Self {
        Self { hi, lo }
    }
}

impl fmt::Display for BitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |b: bool| if b { '1' } else { '0' };
        write!(f, "{}{}", c(self.hi), c(self.lo))
    }
}

impl FromStr for BitPair {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "00" => Ok(BitPair::new(false, false)),
            "01" => Ok(BitPair::new(false, true)),
            "10" => Ok(BitPair::new(true, false)),
            "11" => Ok(BitPair::new(true, true)),
            _ => Err(ParseError::BitPair(s.to_owned())),
        }
    }
}

// Codebook: φ+ → 00, ψ− → 01, ψ+ → 10, φ− → 11.
const CODEBOOK: [(BellIndex, BitPair); 4] = [
    (
        BellIndex::PhiPlus,
        BitPair {
            hi: false,
            lo: false,
        },
    ),
    (
        BellIndex::PsiMinus,
        BitPair {
            hi: false,
            lo: true,
        },
    ),
    (
        BellIndex::PsiPlus,
        BitPair {
            hi: true,
            lo: false,
        },
    ),
    (BellIndex::PhiMinus, BitPair { hi: true, lo: true }),
];

pub fn encode_bits(b: BellIndex) -> BitPair {
    CODEBOOK
        .iter()
        .find(|(state, _)| *state == b)
        .map(|(_, bits)| *bits)
        .expect("codebook covers every Bell state")
}

pub fn decode_bits(bits: BitPair) -> BellIndex {
    CODEBOOK
        .iter()
        .find(|(_, code)| *code == bits)
        .map(|(state, _)| *state)
        .expect("codebook covers every bit pair")
}

/// The four key bits one group contributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyFragment {
    pub bits: String,
    pub group_index: usize,
}

impl KeyFragment {
    pub fn as_str(&self) -> &str {
        &self.bits
    }
}

impl fmt::Display for KeyFragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bits)
    }
}

/// Encodes Alice's outcome followed by Bob's.
pub fn group_key_fragment(
    alice_outcome: BellIndex,
    bob_outcome: BellIndex,
    group_index: usize,
) -> KeyFragment {
    KeyFragment {
        bits: format!("{}{}", encode_bits(alice_outcome), encode_bits(bob_outcome)),
        group_index,
    }
}

#[cfg(test)]
mod tests {
    use super::BellIndex::*;
    use super::*;

    #[test]
    fn xor_identity_and_self_inverse() {
        assert_eq!(bell_xor(PhiPlus, PsiMinus), PsiMinus);
        assert_eq!(bell_xor(PsiMinus, PsiMinus), PhiPlus);
        assert_eq!(bell_xor(PhiPlus, PsiPlus), PsiPlus);
    }

    #[test]
    fn klein_four_group() {
        for x in BellIndex::ALL {
            assert_eq!(x ^ PhiPlus, x);
            assert_eq!(x ^ x, PhiPlus);
            for y in BellIndex::ALL {
                assert_eq!(x ^ y, y ^ x);
                for z in BellIndex::ALL {
                    assert_eq!((x ^ y) ^ z, x ^ (y ^ z));
                }
            }
        }
    }

    #[test]
    fn bits_match_family_and_sign() {
        assert!(!PhiPlus.phase() && !PhiPlus.parity());
        assert!(PhiMinus.phase() && !PhiMinus.parity());
        assert!(!PsiPlus.phase() && PsiPlus.parity());
        assert!(PsiMinus.phase() && PsiMinus.parity());
        for b in BellIndex::ALL {
            assert_eq!(BellIndex::from_bits(b.phase(), b.parity()), b);
        }
    }

    #[test]
    fn swap_partner_worked_examples() {
        assert_eq!(swap_partner(PhiPlus, PsiPlus, PsiPlus), PhiPlus);
        assert_eq!(swap_partner(PhiPlus, PhiPlus, PhiMinus), PhiMinus);
        assert_eq!(swap_partner(PhiPlus, PsiMinus, PsiMinus), PhiPlus);
    }

    #[test]
    fn swap_partner_is_an_involution() {
        for a in BellIndex::ALL {
            for b in BellIndex::ALL {
                for m in BellIndex::ALL {
                    assert_eq!(swap_partner(a, b, swap_partner(a, b, m)), m);
                }
            }
        }
    }

    #[test]
    fn codebook() {
        assert_eq!(encode_bits(PhiPlus).to_string(), "00");
        assert_eq!(encode_bits(PsiMinus).to_string(), "01");
        assert_eq!(encode_bits(PsiPlus).to_string(), "10");
        assert_eq!(encode_bits(PhiMinus).to_string(), "11");
        assert_eq!(decode_bits("00".parse().unwrap()), PhiPlus);
        assert_eq!(decode_bits("01".parse().unwrap()), PsiMinus);
        for b in BellIndex::ALL {
            assert_eq!(decode_bits(encode_bits(b)), b);
        }
    }

    #[test]
    fn fragments() {
        assert_eq!(group_key_fragment(PsiPlus, PhiPlus, 0).bits, "1000");
        assert_eq!(group_key_fragment(PhiPlus, PhiPlus, 3).bits, "0000");
        let f = group_key_fragment(PhiMinus, PsiMinus, 1);
        assert_eq!(f.bits, "1101");
        assert_eq!(f.group_index, 1);
    }

    #[test]
    fn parse_names() {
        assert_eq!("phi+".parse::<BellIndex>().unwrap(), PhiPlus);
        assert_eq!("PSI-".parse::<BellIndex>().unwrap(), PsiMinus);
        assert_eq!("ψ+".parse::<BellIndex>().unwrap(), PsiPlus);
        assert!("chi+".parse::<BellIndex>().is_err());
        assert!("2".parse::<BitPair>().is_err());
        assert_eq!(
            serde_json::to_string(&PhiMinus).unwrap(),
            "\"phi-\"".to_string()
        );
    }
}
