//! The two-party session: measurement, inference, announcement, check
//! exchange and key assembly.
//!
//! Alice holds qubits 1 and 3 of every group, Bob holds 2 and 4. Each party
//! only ever sees the *declared* pair states; the physical state (which an
//! adversary may have replaced) is reachable only through Bell measurements
//! on the party's own qubits.
//!
//! Checked groups are dropped from the final key because their fragments
//! were published on the classical channel.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryKind, AdversaryStrategy, EveReport, PhysicalGroup};
use crate::bell::{group_key_fragment, swap_partner, BellIndex, KeyFragment};
use crate::error::ProtocolError;
use crate::seed::derive_seed;

type Result<T> = std::result::Result<T, ProtocolError>;

pub const DEFAULT_CHECK_FRACTION: f64 = 0.5;

/// How the 2n declared pair states are chosen. Whatever the policy, the
/// resulting list is public knowledge shared by both parties (and Eve).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatePolicy {
    AllPhiPlus,
    FixedList(Vec<BellIndex>),
    RandomKnown(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_groups: usize,
    pub pair_state_policy: PairStatePolicy,
    pub check_fraction: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_groups: 16,
            pair_state_policy: PairStatePolicy::AllPhiPlus,
            check_fraction: DEFAULT_CHECK_FRACTION,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn new(n_groups: usize, seed: u64) -> Self {
        Self {
            n_groups,
            seed,
            ..Self::default()
        }
    }

    pub fn with_policy(mut self, policy: PairStatePolicy) -> Self {
        self.pair_state_policy = policy;
        self
    }

    pub fn with_check_fraction(mut self, fraction: f64) -> Self {
        self.check_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return Err(ProtocolError::InvalidConfig(
                "n_groups must be at least 1".into(),
            ));
        }
        if !(self.check_fraction > 0.0 && self.check_fraction <= 1.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "check_fraction must lie in (0, 1], got {}",
                self.check_fraction
            )));
        }
        if let PairStatePolicy::FixedList(list) = &self.pair_state_policy {
            if list.len() != 2 * self.n_groups {
                return Err(ProtocolError::InvalidConfig(format!(
                    "fixed_list needs {} pair states for {} groups, got {}",
                    2 * self.n_groups,
                    self.n_groups,
                    list.len()
                )));
            }
        }
        Ok(())
    }

    /// Number of groups Bob publishes: `ceil(check_fraction * n)`, at least 1.
    pub fn checks(&self) -> usize {
        checks_for(self.n_groups, self.check_fraction)
    }

    /// The 2n declared pair states, grouped pairwise in order.
    pub fn declared_states(&self) -> Vec<(BellIndex, BellIndex)> {
        let flat: Vec<BellIndex> = match &self.pair_state_policy {
            PairStatePolicy::AllPhiPlus => vec![BellIndex::PhiPlus; 2 * self.n_groups],
            PairStatePolicy::FixedList(list) => list.clone(),
            PairStatePolicy::RandomKnown(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..2 * self.n_groups)
                    .map(|_| BellIndex::from_index(rng.random_range(0..4)))
                    .collect()
            }
        };
        flat.chunks_exact(2).map(|c| (c[0], c[1])).collect()
    }
}

pub fn checks_for(n_groups: usize, fraction: f64) -> usize {
    // The epsilon keeps fractions like 0.3 * 10 from rounding up to 4.
    let k = (fraction * n_groups as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n_groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckedFragment {
    pub group_index: usize,
    pub fragment: String,
}

/// Message bodies. The announcement deliberately has no field that could
/// hold an outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum MessageBody {
    MeasuredAnnouncement {
        groups: usize,
    },
    CheckRequest {
        checks: Vec<CheckedFragment>,
    },
    Verdict {
        verdict: Verdict,
        mismatched: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub sender: Party,
    #[serde(flatten)]
    pub body: MessageBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_index: usize,
    pub pair_a_state: BellIndex,
    pub pair_b_state: BellIndex,
    pub alice_outcome: Option<BellIndex>,
    pub bob_outcome: Option<BellIndex>,
    pub alice_fragment: Option<KeyFragment>,
    pub bob_fragment: Option<KeyFragment>,
    pub checked: bool,
}

impl GroupRecord {
    pub fn fragments_agree(&self) -> bool {
        matches!((&self.alice_fragment, &self.bob_fragment), (Some(a), Some(b)) if a == b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub config: SessionConfig,
    pub adversary: AdversaryKind,
    pub verdict: Verdict,
    pub alice_key: String,
    pub bob_key: String,
    pub keys_equal: bool,
    pub transcript: Vec<ClassicalMessage>,
    pub groups: Vec<GroupRecord>,
    pub eve: Option<EveReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Stage {
    Ready,
    AliceMeasured,
    BobMeasured,
    ChecksSent,
    Verified,
}

/// Full state of one protocol run.
#[derive(Debug, Clone)]
pub struct SessionState {
    config: SessionConfig,
    groups: Vec<GroupRecord>,
    transcript: Vec<ClassicalMessage>,
    verdict: Option<Verdict>,
    pub(crate) stage: Stage,
    pub(crate) physical: Vec<PhysicalGroup>,
    pub(crate) adversary: AdversaryStrategy,
    rng: ChaCha8Rng,
}

impl SessionState {
    /// Creates the pair registry and materializes the physical channel
    /// through the adversary. The honest parties' randomness comes from
    /// `config.seed`; Eve gets an independent stream derived from it.
    pub fn setup(config: SessionConfig, adversary: AdversaryKind) -> Result<Self> {
        config.validate()?;
        let declared = config.declared_states();
        let (physical, strategy) =
            adversary::corrupt_channels(adversary, &declared, derive_seed(config.seed, u64::MAX))?;
        let groups = declared
            .iter()
            .enumerate()
            .map(|(group_index, &(a, b))| GroupRecord {
                group_index,
                pair_a_state: a,
                pair_b_state: b,
                alice_outcome: None,
                bob_outcome: None,
                alice_fragment: None,
                bob_fragment: None,
                checked: false,
            })
            .collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            groups,
            transcript: Vec::new(),
            verdict: None,
            stage: Stage::Ready,
            physical,
            adversary: strategy,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn groups(&self) -> &[GroupRecord] {
        &self.groups
    }

    pub fn transcript(&self) -> &[ClassicalMessage] {
        &self.transcript
    }

    pub fn adversary_kind(&self) -> AdversaryKind {
        self.adversary.kind()
    }

    pub fn alice_measured(&self) -> bool {
        self.stage >= Stage::AliceMeasured
    }

    pub fn bob_measured(&self) -> bool {
        self.stage >= Stage::BobMeasured
    }

    fn send(&mut self, sender: Party, body: MessageBody) -> ClassicalMessage {
        let msg = ClassicalMessage { sender, body };
        self.transcript.push(msg.clone());
        msg
    }

    /// Alice measures (1,3) in every group, infers Bob's outcome from the
    /// declared states and announces that she is done.
    pub fn alice_measure(&mut self) -> Result<ClassicalMessage> {
        if self.stage != Stage::Ready {
            return Err(ProtocolError::OutOfOrder("Alice has already measured"));
        }
        for (group, phys) in self.groups.iter_mut().zip(self.physical.iter_mut()) {
            let [i, j] = &phys.alice;
            let (record, post) = phys.state.measure_bell(i, j, &mut self.rng)?;
            phys.state = post;
            let own = record.outcome;
            let inferred_bob = swap_partner(group.pair_a_state, group.pair_b_state, own);
            group.alice_outcome = Some(own);
            group.alice_fragment = Some(group_key_fragment(own, inferred_bob, group.group_index));
        }
        self.stage = Stage::AliceMeasured;
        let groups = self.groups.len();
        Ok(self.send(Party::Alice, MessageBody::MeasuredAnnouncement { groups }))
    }

    /// Bob measures (2,4) after hearing Alice's announcement.
    pub fn bob_measure(&mut self, announcement: &ClassicalMessage) -> Result<()> {
        if !matches!(
            announcement,
            ClassicalMessage {
                sender: Party::Alice,
                body: MessageBody::MeasuredAnnouncement { .. }
            }
        ) {
            return Err(ProtocolError::OutOfOrder(
                "Bob needs Alice's measurement announcement",
            ));
        }
        match self.stage {
            Stage::Ready => return Err(ProtocolError::OutOfOrder("Alice has not measured yet")),
            Stage::AliceMeasured => {}
            _ => return Err(ProtocolError::OutOfOrder("Bob has already measured")),
        }
        for (group, phys) in self.groups.iter_mut().zip(self.physical.iter_mut()) {
            let [i, j] = &phys.bob;
            let (record, post) = phys.state.measure_bell(i, j, &mut self.rng)?;
            phys.state = post;
            let own = record.outcome;
            let inferred_alice = swap_partner(group.pair_a_state, group.pair_b_state, own);
            group.bob_outcome = Some(own);
            group.bob_fragment = Some(group_key_fragment(inferred_alice, own, group.group_index));
        }
        self.stage = Stage::BobMeasured;
        Ok(())
    }

    /// Bob picks `config.checks()` distinct groups uniformly at random and
    /// publishes his fragments for them.
    pub fn bob_select_checks(&mut self) -> Result<ClassicalMessage> {
        match self.stage {
            Stage::Ready | Stage::AliceMeasured => {
                return Err(ProtocolError::OutOfOrder(
                    "checks need both parties measured",
                ))
            }
            Stage::BobMeasured => {}
            _ => return Err(ProtocolError::OutOfOrder("checks already selected")),
        }
        let k = self.config.checks();
        let mut picked = index::sample(&mut self.rng, self.groups.len(), k).into_vec();
        picked.sort_unstable();
        let checks = picked
            .iter()
            .map(|&g| {
                self.groups[g].checked = true;
                CheckedFragment {
                    group_index: g,
                    fragment: self.groups[g]
                        .bob_fragment
                        .as_ref()
                        .expect("Bob measured every group")
                        .bits
                        .clone(),
                }
            })
            .collect();
        self.stage = Stage::ChecksSent;
        Ok(self.send(Party::Bob, MessageBody::CheckRequest { checks }))
    }

    /// Alice compares the published fragments with her own. Any mismatch
    /// aborts the session.
    pub fn alice_verify(&mut self, request: &ClassicalMessage) -> Result<ClassicalMessage> {
        if self.stage != Stage::ChecksSent {
            return Err(ProtocolError::OutOfOrder(
                "verification needs a check request",
            ));
        }
        let MessageBody::CheckRequest { checks } = &request.body else {
            return Err(ProtocolError::OutOfOrder("expected a check request"));
        };
        let n = self.groups.len();
        let mut seen = vec![false; n];
        let mut mismatched = Vec::new();
        for check in checks {
            let g = check.group_index;
            if g >= n {
                return Err(ProtocolError::IndexOutOfRange {
                    index: g,
                    groups: n,
                });
            }
            if std::mem::replace(&mut seen[g], true) {
                return Err(ProtocolError::DuplicateCheck(g));
            }
            let mine = self.groups[g]
                .alice_fragment
                .as_ref()
                .expect("Alice measured every group");
            if mine.bits != check.fragment {
                mismatched.push(g);
            }
        }
        let verdict = if mismatched.is_empty() {
            Verdict::Accept
        } else {
            Verdict::Abort
        };
        self.verdict = Some(verdict);
        self.stage = Stage::Verified;
        Ok(self.send(
            Party::Alice,
            MessageBody::Verdict {
                verdict,
                mismatched,
            },
        ))
    }

    /// Assembles both keys from the unchecked groups, in group order. Keys are
    /// empty on abort.
    pub fn finalize_key(self) -> Result<SessionReport> {
        let verdict = self
            .verdict
            .ok_or(ProtocolError::OutOfOrder("no verdict has been issued"))?;
        let key_of = |pick: fn(&GroupRecord) -> &Option<KeyFragment>| -> String {
            if verdict == Verdict::Abort {
                return String::new();
            }
            self.groups
                .iter()
                .filter(|g| !g.checked)
                .map(|g| pick(g).as_ref().expect("fragment present").bits.as_str())
                .collect()
        };
        let alice_key = key_of(|g| &g.alice_fragment);
        let bob_key = key_of(|g| &g.bob_fragment);
        let eve = adversary::eve_guess_key(&self);
        Ok(SessionReport {
            keys_equal: alice_key == bob_key,
            alice_key,
            bob_key,
            adversary: self.adversary.kind(),
            verdict,
            config: self.config,
            transcript: self.transcript,
            groups: self.groups,
            eve,
        })
    }
}

/// One complete run: setup, both measurements (with Eve interleaved where
/// her strategy requires), check exchange, verdict and key assembly.
pub fn run_session(config: SessionConfig, adversary_kind: AdversaryKind) -> Result<SessionReport> {
    let mut session = SessionState::setup(config, adversary_kind)?;
    let announcement = session.alice_measure()?;
    if adversary_kind.eve_measures_before_bob() {
        adversary::eve_measure(&mut session)?;
    }
    session.bob_measure(&announcement)?;
    if !adversary_kind.eve_measures_before_bob() {
        adversary::eve_measure(&mut session)?;
    }
    let request = session.bob_select_checks()?;
    session.alice_verify(&request)?;
    session.finalize_key()
}
