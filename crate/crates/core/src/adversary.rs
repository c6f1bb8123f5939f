//! Eavesdropping strategies.
//!
//! * `TypeI` keeps her own φ+ pairs, swaps them, and guesses that her outcome
//!   matches Alice's. She never touches the channel.
//! * `TypeII` hands out GHZ triples instead of φ+ pairs, keeping the third
//!   qubit of each, and Bell-measures her two qubits after the parties.
//! * `TypeIII` replaces each channel pair with one pair shared with Alice and
//!   one shared with Bob, then swaps both sides passively.
//!
//! Every correlation here comes out of the statevector; nothing in this
//! module encodes the expected probabilities.
//!
//! Qubit labels inside a group:
//!
//! | strategy | Alice      | Bob          | Eve                                  |
//! |----------|------------|--------------|--------------------------------------|
//! | none, I  | `A1`, `A3` | `B2`, `B4`   | I: private `E1'..E4'`, swaps `E1' E3'` |
//! | II       | `A1`, `A3` | `B2`, `B4`   | `E5`, `E6`                           |
//! | III      | `A1`, `A3` | `B2'`, `B4'` | `E2`, `E4` (Alice side), `E1'`, `E3'` (Bob side) |

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bell::{group_key_fragment, swap_partner, BellIndex};
use crate::error::{OracleError, ProtocolError};
use crate::protocol::{SessionReport, SessionState, Stage, Verdict};
use crate::statevector::{make_bell, make_ghz3, tensor, StateVector, MIN_CONDITION_PROBABILITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdversaryKind {
    #[serde(rename = "none")]
    NoEve,
    #[serde(rename = "type1")]
    TypeI,
    #[serde(rename = "type2")]
    TypeII,
    #[serde(rename = "type3")]
    TypeIII,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 4] = [
        AdversaryKind::NoEve,
        AdversaryKind::TypeI,
        AdversaryKind::TypeII,
        AdversaryKind::TypeIII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::NoEve => "none",
            AdversaryKind::TypeI => "type1",
            AdversaryKind::TypeII => "type2",
            AdversaryKind::TypeIII => "type3",
        }
    }

    /// Type III Eve must swap her Bob-facing pairs before Bob measures so
    /// that his outcome is correlated with hers rather than with Alice's.
    pub fn eve_measures_before_bob(self) -> bool {
        self == AdversaryKind::TypeIII
    }

    fn requires_phi_plus(self) -> bool {
        matches!(self, AdversaryKind::TypeII | AdversaryKind::TypeIII)
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(AdversaryKind::NoEve),
            "type1" => Ok(AdversaryKind::TypeI),
            "type2" => Ok(AdversaryKind::TypeII),
            "type3" => Ok(AdversaryKind::TypeIII),
            _ => Err(format!(
                "unknown adversary {s:?}, expected none | type1 | type2 | type3"
            )),
        }
    }
}

/// The physical quantum state of one group and which qubits each honest
/// party holds.
#[derive(Debug, Clone)]
pub struct PhysicalGroup {
    pub(crate) state: StateVector,
    pub(crate) alice: [String; 2],
    pub(crate) bob: [String; 2],
}

impl PhysicalGroup {
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn alice_qubits(&self) -> [&str; 2] {
        [&self.alice[0], &self.alice[1]]
    }

    pub fn bob_qubits(&self) -> [&str; 2] {
        [&self.bob[0], &self.bob[1]]
    }
}

#[derive(Debug, Clone)]
struct EveGroup {
    /// Type I only: Eve's own pairs, never entangled with the channel.
    private: Option<StateVector>,
    /// The pair Eve swaps to guess the key.
    swap_pair: Option<[String; 2]>,
    /// Type III only: Eve's halves of the pairs shared with Alice.
    alice_facing: Option<[String; 2]>,
    swap_outcome: Option<BellIndex>,
    alice_facing_outcome: Option<BellIndex>,
}

/// Eve's registry for one session.
#[derive(Debug, Clone)]
pub struct AdversaryStrategy {
    kind: AdversaryKind,
    rng: ChaCha8Rng,
    groups: Vec<EveGroup>,
    measured: bool,
}

impl AdversaryStrategy {
    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }

    pub fn measured(&self) -> bool {
        self.measured
    }

    /// Number of qubits Eve owns in each group.
    pub fn eve_qubits_per_group(&self) -> usize {
        match self.kind {
            AdversaryKind::NoEve => 0,
            AdversaryKind::TypeI => 4,
            AdversaryKind::TypeII => 2,
            AdversaryKind::TypeIII => 4,
        }
    }
}

fn pair(a: &str, b: &str) -> [String; 2] {
    [a.to_owned(), b.to_owned()]
}

fn honest_group(a: BellIndex, b: BellIndex) -> Result<PhysicalGroup, OracleError> {
    Ok(PhysicalGroup {
        state: tensor(&make_bell(a, "A1", "B2")?, &make_bell(b, "A3", "B4")?)?,
        alice: pair("A1", "A3"),
        bob: pair("B2", "B4"),
    })
}

fn empty_eve() -> EveGroup {
    EveGroup {
        private: None,
        swap_pair: None,
        alice_facing: None,
        swap_outcome: None,
        alice_facing_outcome: None,
    }
}

/// Builds the physical channel for every group. Honest parties keep the
/// declared states; the returned layout is what they actually hold.
pub fn corrupt_channels(
    kind: AdversaryKind,
    declared: &[(BellIndex, BellIndex)],
    eve_seed: u64,
) -> Result<(Vec<PhysicalGroup>, AdversaryStrategy), ProtocolError> {
    let mut physical = Vec::with_capacity(declared.len());
    let mut eve = Vec::with_capacity(declared.len());
    for (group, &(a, b)) in declared.iter().enumerate() {
        if kind.requires_phi_plus() && (a, b) != (BellIndex::PhiPlus, BellIndex::PhiPlus) {
            return Err(ProtocolError::UnsupportedAdversary {
                adversary: kind.name(),
                group,
                declared: (a, b),
            });
        }
        let (phys, e) = match kind {
            AdversaryKind::NoEve => (honest_group(a, b)?, empty_eve()),
            AdversaryKind::TypeI => {
                let private = tensor(
                    &make_bell(BellIndex::PhiPlus, "E1'", "E2'")?,
                    &make_bell(BellIndex::PhiPlus, "E3'", "E4'")?,
                )?;
                let e = EveGroup {
                    private: Some(private),
                    swap_pair: Some(pair("E1'", "E3'")),
                    ..empty_eve()
                };
                (honest_group(a, b)?, e)
            }
            AdversaryKind::TypeII => {
                let state = tensor(&make_ghz3("A1", "B2", "E5")?, &make_ghz3("A3", "B4", "E6")?)?;
                let phys = PhysicalGroup {
                    state,
                    alice: pair("A1", "A3"),
                    bob: pair("B2", "B4"),
                };
                let e = EveGroup {
                    swap_pair: Some(pair("E5", "E6")),
                    ..empty_eve()
                };
                (phys, e)
            }
            AdversaryKind::TypeIII => {
                let phi = BellIndex::PhiPlus;
                let with_alice =
                    tensor(&make_bell(phi, "A1", "E2")?, &make_bell(phi, "A3", "E4")?)?;
                let with_bob = tensor(
                    &make_bell(phi, "E1'", "B2'")?,
                    &make_bell(phi, "E3'", "B4'")?,
                )?;
                let phys = PhysicalGroup {
                    state: tensor(&with_alice, &with_bob)?,
                    alice: pair("A1", "A3"),
                    bob: pair("B2'", "B4'"),
                };
                let e = EveGroup {
                    swap_pair: Some(pair("E1'", "E3'")),
                    alice_facing: Some(pair("E2", "E4")),
                    ..empty_eve()
                };
                (phys, e)
            }
        };
        physical.push(phys);
        eve.push(e);
    }
    let strategy = AdversaryStrategy {
        kind,
        rng: ChaCha8Rng::seed_from_u64(eve_seed),
        groups: eve,
        measured: false,
    };
    Ok((physical, strategy))
}

/// Eve's Bell measurements. Type II must run after both parties; Type III
/// after Alice and before Bob; Type I at any point after setup.
pub fn eve_measure(session: &mut SessionState) -> Result<(), ProtocolError> {
    let kind = session.adversary.kind;
    if kind == AdversaryKind::NoEve {
        return Ok(());
    }
    if session.adversary.measured {
        return Err(ProtocolError::OutOfOrder("Eve has already measured"));
    }
    match kind {
        AdversaryKind::TypeII if session.stage < Stage::BobMeasured => {
            return Err(ProtocolError::OutOfOrder(
                "type II Eve measures after both parties",
            ))
        }
        AdversaryKind::TypeIII if session.stage != Stage::AliceMeasured => {
            return Err(ProtocolError::OutOfOrder(
                "type III Eve measures after Alice and before Bob",
            ))
        }
        _ => {}
    }
    let strategy = &mut session.adversary;
    for (eve, phys) in strategy.groups.iter_mut().zip(session.physical.iter_mut()) {
        if let Some([i, j]) = &eve.alice_facing {
            let (rec, post) = phys.state.measure_bell(i, j, &mut strategy.rng)?;
            phys.state = post;
            eve.alice_facing_outcome = Some(rec.outcome);
        }
        let [i, j] = eve
            .swap_pair
            .as_ref()
            .expect("every adversary swaps a pair");
        let target = eve.private.as_mut().unwrap_or(&mut phys.state);
        let (rec, post) = target.measure_bell(i, j, &mut strategy.rng)?;
        *target = post;
        eve.swap_outcome = Some(rec.outcome);
    }
    strategy.measured = true;
    Ok(())
}

/// Eve's best guess at Alice's outcome from her own measurements.
///
/// Type II learns only the parity family from her GHZ qubits, so she
/// guesses the "+" member.
pub fn guess_alice_outcome(
    kind: AdversaryKind,
    swap: BellIndex,
    alice_facing: Option<BellIndex>,
) -> BellIndex {
    match kind {
        AdversaryKind::NoEve | AdversaryKind::TypeI => swap,
        AdversaryKind::TypeII => BellIndex::from_bits(false, swap.parity()),
        AdversaryKind::TypeIII => alice_facing.unwrap_or(swap),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveOutcome {
    pub swap: BellIndex,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_facing: Option<BellIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveReport {
    /// Guess of the final key: fragments of the unchecked groups.
    pub guessed_key: String,
    /// Guess of every group's fragment, checked or not.
    pub guessed_fragments: Vec<String>,
    pub per_group_correct: Vec<bool>,
    /// Every one of the 4n raw bits guessed right.
    pub full_key_correct: bool,
    pub outcomes: Vec<EveOutcome>,
}

/// Eve's key guess, scored against Alice's fragments. `None` when there is
/// no adversary or she has not measured.
pub fn eve_guess_key(session: &SessionState) -> Option<EveReport> {
    let strategy = &session.adversary;
    if strategy.kind == AdversaryKind::NoEve || !strategy.measured {
        return None;
    }
    let mut report = EveReport {
        guessed_key: String::new(),
        guessed_fragments: Vec::new(),
        per_group_correct: Vec::new(),
        full_key_correct: true,
        outcomes: Vec::new(),
    };
    for (eve, group) in strategy.groups.iter().zip(session.groups()) {
        let swap = eve.swap_outcome.expect("measured");
        let guess = guess_alice_outcome(strategy.kind, swap, eve.alice_facing_outcome);
        let partner = swap_partner(group.pair_a_state, group.pair_b_state, guess);
        let fragment = group_key_fragment(guess, partner, group.group_index).bits;
        let correct = group.alice_fragment.as_ref().map(|f| f.bits == fragment) == Some(true);
        if !group.checked {
            report.guessed_key.push_str(&fragment);
        }
        report.full_key_correct &= correct;
        report.per_group_correct.push(correct);
        report.guessed_fragments.push(fragment);
        report.outcomes.push(EveOutcome {
            swap,
            alice_facing: eve.alice_facing_outcome,
        });
    }
    Some(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRecord {
    pub undetected: bool,
    pub key_stolen: bool,
}

pub fn eve_success(report: &SessionReport) -> SuccessRecord {
    let undetected = report.verdict == Verdict::Accept;
    let key_stolen = match &report.eve {
        Some(eve) => {
            undetected && !report.alice_key.is_empty() && eve.guessed_key == report.alice_key
        }
        None => false,
    };
    SuccessRecord {
        undetected,
        key_stolen,
    }
}

/// One branch of a group's joint measurement record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOutcome {
    pub probability: f64,
    pub alice: BellIndex,
    pub bob: BellIndex,
    pub eve_swap: Option<BellIndex>,
    pub eve_alice_facing: Option<BellIndex>,
}

#[derive(Clone, Copy)]
enum Role {
    Alice,
    Bob,
    EveSwap,
    EveAliceFacing,
}

/// Exhaustively enumerates every outcome branch of one group, measuring in
/// the same order as a live session and conditioning instead of sampling.
/// Branches with probability below 1e-12 are pruned.
pub fn enumerate_group(
    kind: AdversaryKind,
    declared: (BellIndex, BellIndex),
) -> Result<Vec<JointOutcome>, ProtocolError> {
    let (mut physical, mut strategy) = corrupt_channels(kind, &[declared], 0)?;
    let phys = physical.remove(0);
    let eve = strategy.groups.remove(0);

    let mut systems = vec![phys.state];
    let mut steps: Vec<(Role, usize, [String; 2])> = vec![(Role::Alice, 0, phys.alice)];
    let eve_system = match eve.private {
        Some(private) => {
            systems.push(private);
            1
        }
        None => 0,
    };
    let mut eve_steps = Vec::new();
    if let Some(p) = eve.alice_facing {
        eve_steps.push((Role::EveAliceFacing, 0, p));
    }
    if let Some(p) = eve.swap_pair {
        eve_steps.push((Role::EveSwap, eve_system, p));
    }
    if kind.eve_measures_before_bob() {
        steps.extend(eve_steps);
        steps.push((Role::Bob, 0, phys.bob));
    } else {
        steps.push((Role::Bob, 0, phys.bob));
        steps.extend(eve_steps);
    }

    let mut out = Vec::new();
    branch(&mut systems, &steps, 1.0, [None; 4], &mut out)?;
    Ok(out)
}

fn branch(
    systems: &mut Vec<StateVector>,
    steps: &[(Role, usize, [String; 2])],
    probability: f64,
    seen: [Option<BellIndex>; 4],
    out: &mut Vec<JointOutcome>,
) -> Result<(), ProtocolError> {
    let Some(((role, system, [i, j]), rest)) = steps.split_first() else {
        out.push(JointOutcome {
            probability,
            alice: seen[0].expect("Alice always measures"),
            bob: seen[1].expect("Bob always measures"),
            eve_swap: seen[2],
            eve_alice_facing: seen[3],
        });
        return Ok(());
    };
    let dist = systems[*system].outcome_distribution(i, j)?;
    for outcome in BellIndex::ALL {
        if dist[outcome.index()] < MIN_CONDITION_PROBABILITY {
            continue;
        }
        let (_, post) = systems[*system].measure_bell_forced(i, j, outcome)?;
        let saved = std::mem::replace(&mut systems[*system], post);
        let mut next = seen;
        next[*role as usize] = Some(outcome);
        branch(
            systems,
            rest,
            probability * dist[outcome.index()],
            next,
            out,
        )?;
        systems[*system] = saved;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::BellIndex::*;
    use crate::protocol::{run_session, SessionConfig};

    const PP: (BellIndex, BellIndex) = (PhiPlus, PhiPlus);

    #[test]
    fn layouts() {
        let (p, s) = corrupt_channels(AdversaryKind::NoEve, &[(PhiPlus, PsiPlus)], 0).unwrap();
        assert_eq!(p[0].state().num_qubits(), 4);
        assert_eq!(s.eve_qubits_per_group(), 0);
        let (p, s) = corrupt_channels(AdversaryKind::TypeII, &[PP], 0).unwrap();
        assert_eq!(p[0].state().num_qubits(), 6);
        assert_eq!(s.eve_qubits_per_group(), 2);
        let (p, s) = corrupt_channels(AdversaryKind::TypeIII, &[PP], 0).unwrap();
        assert_eq!(p[0].state().num_qubits(), 8);
        assert_eq!(s.eve_qubits_per_group(), 4);
        assert_eq!(p[0].bob_qubits(), ["B2'", "B4'"]);
    }

    #[test]
    fn rejects_non_phi_plus_for_channel_attacks() {
        for kind in [AdversaryKind::TypeII, AdversaryKind::TypeIII] {
            assert!(matches!(
                corrupt_channels(kind, &[PP, (PhiPlus, PsiMinus)], 0),
                Err(ProtocolError::UnsupportedAdversary { group: 1, .. })
            ));
        }
        assert!(corrupt_channels(AdversaryKind::TypeI, &[(PsiMinus, PhiMinus)], 0).is_ok());
    }

    #[test]
    fn enumeration_sums_to_one() {
        for kind in AdversaryKind::ALL {
            let branches = enumerate_group(kind, PP).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-9, "{kind}: {total}");
        }
    }

    #[test]
    fn type_two_eve_pairs_with_bob() {
        // Eve's outcome is fixed by Alice's and Bob's on every branch.
        let branches = enumerate_group(AdversaryKind::TypeII, PP).unwrap();
        assert_eq!(branches.len(), 8);
        for b in &branches {
            assert!((b.probability - 0.125).abs() < 1e-9);
            assert_eq!(b.alice.parity(), b.bob.parity());
        }
    }

    #[test]
    fn type_three_eve_alice_side_is_exact() {
        let branches = enumerate_group(AdversaryKind::TypeIII, PP).unwrap();
        assert_eq!(branches.len(), 16);
        for b in &branches {
            assert_eq!(b.eve_alice_facing, Some(b.alice));
            assert_eq!(b.eve_swap, Some(b.bob));
        }
    }

    #[test]
    fn eve_order_is_enforced() {
        let mut s = SessionState::setup(SessionConfig::new(2, 1), AdversaryKind::TypeII).unwrap();
        assert!(eve_measure(&mut s).is_err());
        let ann = s.alice_measure().unwrap();
        assert!(eve_measure(&mut s).is_err());
        s.bob_measure(&ann).unwrap();
        eve_measure(&mut s).unwrap();
        assert!(eve_measure(&mut s).is_err());

        let mut s = SessionState::setup(SessionConfig::new(2, 1), AdversaryKind::TypeIII).unwrap();
        assert!(eve_measure(&mut s).is_err());
        let ann = s.alice_measure().unwrap();
        s.bob_measure(&ann).unwrap();
        assert!(eve_measure(&mut s).is_err());

        let mut s = SessionState::setup(SessionConfig::new(2, 1), AdversaryKind::TypeI).unwrap();
        eve_measure(&mut s).unwrap();
    }

    #[test]
    fn no_eve_report_without_adversary() {
        let r = run_session(SessionConfig::new(3, 4), AdversaryKind::NoEve).unwrap();
        assert!(r.eve.is_none());
        let s = eve_success(&r);
        assert!(s.undetected && !s.key_stolen);
    }

    #[test]
    fn type_one_never_disturbs_honest_outcomes() {
        for seed in 0..20 {
            let honest = run_session(SessionConfig::new(4, seed), AdversaryKind::NoEve).unwrap();
            let spied = run_session(SessionConfig::new(4, seed), AdversaryKind::TypeI).unwrap();
            assert_eq!(honest.groups, spied.groups);
            assert_eq!(spied.verdict, Verdict::Accept);
            let eve = spied.eve.unwrap();
            assert_eq!(eve.guessed_key.len(), spied.alice_key.len());
            assert_eq!(eve.per_group_correct.len(), 4);
        }
    }

    #[test]
    fn type_three_guess_matches_alice() {
        let r = run_session(SessionConfig::new(3, 8), AdversaryKind::TypeIII).unwrap();
        let eve = r.eve.unwrap();
        assert!(eve.full_key_correct);
        assert!(eve.outcomes.iter().all(|o| o.alice_facing.is_some()));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AdversaryKind::ALL {
            assert_eq!(k.name().parse::<AdversaryKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
        assert!("type4".parse::<AdversaryKind>().is_err());
    }
}
