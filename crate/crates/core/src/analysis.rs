//! Closed-form security figures, Monte Carlo estimators and the uniformity
//! test used to check them against each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    self, corrupt_channels, enumerate_group, guess_alice_outcome, AdversaryKind,
};
use crate::bell::{group_key_fragment, swap_partner, BellIndex};
use crate::error::AnalysisError;
use crate::protocol::{run_session, MessageBody, PairStatePolicy, SessionConfig, Verdict};
use crate::seed::derive_seed;
use crate::statevector::{make_bell, sample_outcome, tensor};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson score 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub successes: u64,
    pub total: u64,
    pub rate: f64,
    pub half_width: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    pub fn wilson(successes: u64, total: u64) -> Self {
        if total == 0 {
            return Self {
                successes,
                total,
                rate: 0.0,
                half_width: 0.0,
                ci_low: 0.0,
                ci_high: 1.0,
            };
        }
        let n = total as f64;
        let p = successes as f64 / n;
        let z2 = Z_95 * Z_95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half_width = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            successes,
            total,
            rate: p,
            half_width,
            ci_low: (center - half_width).max(0.0),
            ci_high: (center + half_width).min(1.0),
        }
    }

    /// Midpoint of the Wilson interval (not the raw rate).
    pub fn center(&self) -> f64 {
        (self.ci_low + self.ci_high) / 2.0
    }

    /// `true` if `value` is within `widths` half-widths of the interval centre.
    pub fn within(&self, value: f64, widths: f64) -> bool {
        let n = self.total as f64;
        let z2 = Z_95 * Z_95;
        let center = (self.rate + z2 / (2.0 * n)) / (1.0 + z2 / n);
        (value - center).abs() <= widths * self.half_width
    }
}

/// Probability that checking `k` groups exposes the adversary.
pub fn analytic_detection(kind: AdversaryKind, k_checked: u32) -> f64 {
    let per_group_match = match kind {
        AdversaryKind::NoEve | AdversaryKind::TypeI => return 0.0,
        AdversaryKind::TypeII => 0.5,
        AdversaryKind::TypeIII => 0.25,
    };
    1.0 - f64::powi(per_group_match, k_checked as i32)
}

/// Probability that a group's two fragments agree, by exhaustive
/// enumeration of the oracle's outcome branches for a φ+⊗φ+ group.
pub fn enumerated_match_probability(kind: AdversaryKind) -> Result<f64, AnalysisError> {
    let declared = (BellIndex::PhiPlus, BellIndex::PhiPlus);
    let branches = enumerate_group(kind, declared)?;
    Ok(branches
        .iter()
        .filter(|b| {
            let alice_inferred_bob = swap_partner(declared.0, declared.1, b.alice);
            let bob_inferred_alice = swap_partner(declared.0, declared.1, b.bob);
            group_key_fragment(b.alice, alice_inferred_bob, 0)
                == group_key_fragment(bob_inferred_alice, b.bob, 0)
        })
        .map(|b| b.probability)
        .sum())
}

/// Per-group probability that Eve's guess equals Alice's fragment, by
/// exhaustive enumeration. `None` without an adversary.
pub fn enumerated_guess_probability(kind: AdversaryKind) -> Result<Option<f64>, AnalysisError> {
    if kind == AdversaryKind::NoEve {
        return Ok(None);
    }
    let declared = (BellIndex::PhiPlus, BellIndex::PhiPlus);
    let branches = enumerate_group(kind, declared)?;
    let p = branches
        .iter()
        .filter(|b| {
            let swap = b.eve_swap.expect("adversary measured");
            guess_alice_outcome(kind, swap, b.eve_alice_facing) == b.alice
        })
        .map(|b| b.probability)
        .sum();
    Ok(Some(p))
}

/// Probability that Eve guesses all 4n raw key bits.
///
/// Type I is closed form, `(1/4)^n`. Types II and III come from enumerating
/// one group and raising to the n-th power (groups are independent).
pub fn analytic_guess(kind: AdversaryKind, n_groups: u32) -> Result<Option<f64>, AnalysisError> {
    let per_group = match kind {
        AdversaryKind::NoEve => return Ok(None),
        AdversaryKind::TypeI => 0.25,
        _ => enumerated_guess_probability(kind)?.expect("adversary present"),
    };
    Ok(Some(per_group.powi(n_groups as i32)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub strategy: AdversaryKind,
    pub n_groups: usize,
    pub k_checked: usize,
    pub trials: u64,
    pub seed: u64,
    /// Sessions aborted.
    pub detection_rate: RateEstimate,
    /// Sessions in which Eve guessed every raw key bit.
    pub eve_key_rate: RateEstimate,
    /// Groups in which Eve guessed Alice's fragment.
    pub eve_group_rate: RateEstimate,
    /// Sessions accepted with Eve holding the final key.
    pub eve_success_rate: RateEstimate,
    /// Sessions in which every group's fragments agree.
    pub key_agreement_rate: RateEstimate,
    /// Groups whose fragments agree.
    pub fragment_match_rate: RateEstimate,
    /// Checked groups that Alice flagged.
    pub check_mismatch_rate: RateEstimate,
    /// Alice's outcomes over all groups of all trials, in `BellIndex` order.
    pub outcome_counts: [u64; 4],
}

/// Runs `trials` independent sessions. Trial `t` uses session seed
/// `derive_seed(seed, t)`; a `RandomKnown` pair policy is re-seeded the same
/// way so each trial sees fresh declared states.
pub fn monte_carlo(
    config: &SessionConfig,
    strategy: AdversaryKind,
    trials: u64,
    seed: u64,
) -> Result<MCReport, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    config.validate()?;
    let n = config.n_groups as u64;
    let mut aborted = 0;
    let mut eve_full = 0;
    let mut eve_groups = 0;
    let mut eve_wins = 0;
    let mut agreed = 0;
    let mut matched_groups = 0;
    let mut checked = 0;
    let mut flagged = 0;
    let mut outcome_counts = [0u64; 4];

    for t in 0..trials {
        let mut cfg = config.clone();
        cfg.seed = derive_seed(seed, t);
        if let PairStatePolicy::RandomKnown(s) = cfg.pair_state_policy {
            cfg.pair_state_policy = PairStatePolicy::RandomKnown(derive_seed(s, t));
        }
        let report = run_session(cfg, strategy)?;

        if report.verdict == Verdict::Abort {
            aborted += 1;
        }
        let matches = report.groups.iter().filter(|g| g.fragments_agree()).count() as u64;
        matched_groups += matches;
        if matches == n {
            agreed += 1;
        }
        for g in &report.groups {
            outcome_counts[g.alice_outcome.expect("measured").index()] += 1;
        }
        for msg in &report.transcript {
            match &msg.body {
                MessageBody::CheckRequest { checks } => checked += checks.len() as u64,
                MessageBody::Verdict { mismatched, .. } => flagged += mismatched.len() as u64,
                MessageBody::MeasuredAnnouncement { .. } => {}
            }
        }
        if let Some(eve) = &report.eve {
            eve_full += u64::from(eve.full_key_correct);
            eve_groups += eve.per_group_correct.iter().filter(|&&c| c).count() as u64;
        }
        eve_wins += u64::from(adversary::eve_success(&report).key_stolen);
    }

    Ok(MCReport {
        strategy,
        n_groups: config.n_groups,
        k_checked: config.checks(),
        trials,
        seed,
        detection_rate: RateEstimate::wilson(aborted, trials),
        eve_key_rate: RateEstimate::wilson(eve_full, trials),
        eve_group_rate: RateEstimate::wilson(eve_groups, trials * n),
        eve_success_rate: RateEstimate::wilson(eve_wins, trials),
        key_agreement_rate: RateEstimate::wilson(agreed, trials),
        fragment_match_rate: RateEstimate::wilson(matched_groups, trials * n),
        check_mismatch_rate: RateEstimate::wilson(flagged, checked),
        outcome_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessEstimate {
    pub n_groups: usize,
    pub trials: u64,
    pub per_group: RateEstimate,
    pub full_key: RateEstimate,
}

/// Fast Type I guessing estimate.
///
/// Eve's private pairs never interact with the channel, so her swap
/// outcome and Alice's are independent. Both outcome distributions are
/// taken once from the oracle and then sampled directly, skipping the
/// per-trial statevector work.
pub fn type1_guess_estimate(
    n_groups: usize,
    trials: u64,
    seed: u64,
) -> Result<GuessEstimate, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    let declared = (BellIndex::PhiPlus, BellIndex::PhiPlus);
    let (honest, _) = corrupt_channels(AdversaryKind::NoEve, &[declared], 0)?;
    let [a1, a3] = honest[0].alice_qubits();
    let alice_dist = honest[0].state().outcome_distribution(a1, a3)?;
    let private = tensor(
        &make_bell(BellIndex::PhiPlus, "E1'", "E2'")?,
        &make_bell(BellIndex::PhiPlus, "E3'", "E4'")?,
    )?;
    let eve_dist = private.outcome_distribution("E1'", "E3'")?;

    let fragment =
        |own: BellIndex| group_key_fragment(own, swap_partner(declared.0, declared.1, own), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group_hits = 0u64;
    let mut full_hits = 0u64;
    for _ in 0..trials {
        let mut all = true;
        for _ in 0..n_groups {
            let alice = sample_outcome(&alice_dist, rng.random());
            let eve = sample_outcome(&eve_dist, rng.random());
            let guess = guess_alice_outcome(AdversaryKind::TypeI, eve, None);
            let hit = fragment(guess) == fragment(alice);
            group_hits += u64::from(hit);
            all &= hit;
        }
        full_hits += u64::from(all);
    }
    Ok(GuessEstimate {
        n_groups,
        trials,
        per_group: RateEstimate::wilson(group_hits, trials * n_groups as u64),
        full_key: RateEstimate::wilson(full_hits, trials),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub chi_square: f64,
    pub p_value: f64,
}

/// Pearson chi-square of four counts against the uniform distribution,
/// 3 degrees of freedom.
pub fn uniformity_test(outcome_counts: [u64; 4]) -> Result<UniformityResult, AnalysisError> {
    let total: u64 = outcome_counts.iter().sum();
    if total < 40 {
        return Err(AnalysisError::InsufficientCounts(total));
    }
    let expected = total as f64 / 4.0;
    let chi_square = outcome_counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(UniformityResult {
        chi_square,
        p_value: chi_square_sf(chi_square, 3),
    })
}

/// Upper tail `P(X > x)` of a chi-square variable with `dof` degrees of
/// freedom, i.e. the regularized upper incomplete gamma `Q(dof/2, x/2)`.
pub fn chi_square_sf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(f64::from(dof) / 2.0, x / 2.0)
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 1000;
const TINY: f64 = 1e-300;

/// Regularized upper incomplete gamma function.
///
/// Below `x = a + 1` the lower function is summed as a power series
/// `e^{-x} x^a / Γ(a) · Σ x^k / (a)_{k+1}` and complemented; above it the
/// upper function is evaluated directly by its continued fraction with the
/// modified Lentz method. Both converge to ~1e-15 relative.
fn gamma_q(a: f64, x: f64) -> f64 {
    let prefactor = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * prefactor).max(0.0)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        prefactor * h
    }
}

/// `ln Γ(x)` for `x > 0`, Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + G + 0.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub n_groups: usize,
    pub k_checked: usize,
    pub raw_bits_per_group: f64,
    pub raw_bits_per_particle: f64,
    pub net_bits_per_particle: f64,
    pub comparison_notes: String,
}

pub const BITS_PER_GROUP: u32 = 4;
pub const PARTICLES_PER_GROUP: u32 = 4;

/// Key yield per particle. The raw figure counts every group; the net figure
/// discards the `k` published check groups.
pub fn efficiency_report(config: &SessionConfig) -> EfficiencyReport {
    let n = config.n_groups;
    let k = config.checks();
    efficiency_for(n, k)
}

/// As [`efficiency_report`] with an explicit number of checked groups.
pub fn efficiency_for(n_groups: usize, k_checked: usize) -> EfficiencyReport {
    let raw_bits_per_group = f64::from(BITS_PER_GROUP);
    let raw_bits_per_particle = raw_bits_per_group / f64::from(PARTICLES_PER_GROUP);
    let unchecked = 1.0 - k_checked as f64 / n_groups as f64;
    EfficiencyReport {
        n_groups,
        k_checked,
        raw_bits_per_group,
        raw_bits_per_particle,
        net_bits_per_particle: unchecked * raw_bits_per_particle,
        comparison_notes: format!(
            "{raw_bits_per_group} raw bits per group of two pairs ({raw_bits_per_particle} per particle); \
             {k_checked} of {n_groups} groups are published for checking and discarded. \
             For reference, BB84 yields 1 bit per pair and B92 1 bit per two pairs."
        ),
    }
}
