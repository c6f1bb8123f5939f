//! Dense statevector engine used as the ground truth for every quantum step.
//!
//! Qubit ordering: amplitude index bit `k`, counted from the most significant
//! end, belongs to `labels[k]`. So for labels `["A1", "B2"]` the amplitude at
//! index `0b10` is the coefficient of `|1⟩_A1 |0⟩_B2`.
//!
//! Values are immutable; measurements return a new collapsed state.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::bell::BellIndex;
use crate::error::OracleError;

pub const MAX_QUBITS: usize = 12;

/// Absolute tolerance on norms and overlaps.
pub const TOLERANCE: f64 = 1e-9;

/// Conditioning on an outcome below this probability is refused.
pub const MIN_CONDITION_PROBABILITY: f64 = 1e-12;

type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Arc<[String]>,
    amplitudes: Vec<Complex64>,
}

/// Outcome of one Bell-basis measurement with the Born probabilities it was
/// drawn from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub qubit_i: String,
    pub qubit_j: String,
    pub outcome: BellIndex,
    pub probabilities: [f64; 4],
}

#[derive(Serialize)]
struct StateDump<'a> {
    labels: &'a [String],
    amplitudes: Vec<[f64; 2]>,
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(OracleError::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(OracleError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl StateVector {
    /// Builds a state from raw amplitudes, checking shape, labels and norm.
    pub fn from_amplitudes<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        if amplitudes.len() != 1 << labels.len() {
            return Err(OracleError::Shape {
                len: amplitudes.len(),
                labels: labels.len(),
            });
        }
        let sv = Self {
            labels: labels.into(),
            amplitudes,
        };
        let n = sv.norm_sqr();
        if (n - 1.0).abs() > TOLERANCE {
            return Err(OracleError::NotNormalized(n));
        }
        Ok(sv)
    }

    /// Single qubit in `|0⟩`.
    pub fn zero(label: impl Into<String>) -> Self {
        Self {
            labels: vec![label.into()].into(),
            amplitudes: vec![real(1.0), real(0.0)],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Bit position (from the least significant end) of a label.
    fn bit_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.labels.len() - 1 - k)
            .ok_or_else(|| OracleError::UnknownLabel(label.to_owned()))
    }

    fn pair_bits(&self, i: &str, j: &str) -> Result<(usize, usize)> {
        let bi = self.bit_of(i)?;
        let bj = self.bit_of(j)?;
        if bi == bj {
            return Err(OracleError::SameQubit(i.to_owned()));
        }
        Ok((bi, bj))
    }

    /// Calls `f(base, [c00, c01, c10, c11])` for every assignment of the
    /// other qubits, where `cxy` has qubit `i` = x and qubit `j` = y.
    fn for_each_block(&self, bi: usize, bj: usize, mut f: impl FnMut(usize, [Complex64; 4])) {
        let mi = 1usize << bi;
        let mj = 1usize << bj;
        for base in 0..self.amplitudes.len() {
            if base & (mi | mj) != 0 {
                continue;
            }
            let a = &self.amplitudes;
            f(
                base,
                [a[base], a[base | mj], a[base | mi], a[base | mi | mj]],
            );
        }
    }

    /// Born probabilities of the four Bell outcomes on `(i, j)`, in
    /// `BellIndex` order.
    pub fn outcome_distribution(&self, qubit_i: &str, qubit_j: &str) -> Result<[f64; 4]> {
        let (bi, bj) = self.pair_bits(qubit_i, qubit_j)?;
        let mut probs = [0.0; 4];
        self.for_each_block(bi, bj, |_, block| {
            for b in BellIndex::ALL {
                probs[b.index()] += bell_overlap(b, &block).norm_sqr();
            }
        });
        Ok(probs)
    }

    fn project(&self, bi: usize, bj: usize, outcome: BellIndex, probability: f64) -> StateVector {
        let mut out = vec![Complex64::default(); self.amplitudes.len()];
        let scale = 1.0 / probability.sqrt();
        let basis = bell_amplitudes(outcome);
        let mi = 1usize << bi;
        let mj = 1usize << bj;
        self.for_each_block(bi, bj, |base, block| {
            let c = bell_overlap(outcome, &block) * scale;
            out[base] = c * basis[0];
            out[base | mj] = c * basis[1];
            out[base | mi] = c * basis[2];
            out[base | mi | mj] = c * basis[3];
        });
        StateVector {
            labels: Arc::clone(&self.labels),
            amplitudes: out,
        }
    }

    /// Bell-basis measurement of `(i, j)` with the outcome sampled by the Born
    /// rule. Sampling is inverse-CDF over the outcomes in `BellIndex` order
    /// using one uniform draw from `rng`.
    pub fn measure_bell<R: Rng + ?Sized>(
        &self,
        qubit_i: &str,
        qubit_j: &str,
        rng: &mut R,
    ) -> Result<(MeasurementRecord, StateVector)> {
        let probabilities = self.outcome_distribution(qubit_i, qubit_j)?;
        let outcome = sample_outcome(&probabilities, rng.random::<f64>());
        self.collapse(qubit_i, qubit_j, outcome, probabilities)
    }

    /// Measurement conditioned on `outcome` rather than sampled. Fails when
    /// that outcome is (numerically) impossible.
    pub fn measure_bell_forced(
        &self,
        qubit_i: &str,
        qubit_j: &str,
        outcome: BellIndex,
    ) -> Result<(MeasurementRecord, StateVector)> {
        let probabilities = self.outcome_distribution(qubit_i, qubit_j)?;
        self.collapse(qubit_i, qubit_j, outcome, probabilities)
    }

    fn collapse(
        &self,
        qubit_i: &str,
        qubit_j: &str,
        outcome: BellIndex,
        probabilities: [f64; 4],
    ) -> Result<(MeasurementRecord, StateVector)> {
        let p = probabilities[outcome.index()];
        if p < MIN_CONDITION_PROBABILITY {
            return Err(OracleError::ZeroProbability {
                outcome,
                probability: p,
            });
        }
        let (bi, bj) = self.pair_bits(qubit_i, qubit_j)?;
        let post = self.project(bi, bj, outcome, p);
        let record = MeasurementRecord {
            qubit_i: qubit_i.to_owned(),
            qubit_j: qubit_j.to_owned(),
            outcome,
            probabilities,
        };
        Ok((record, post))
    }

    /// The Bell state the pair `(i, j)` is in, ignoring global phase, or
    /// `None` if the pair is entangled with other qubits or in a
    /// superposition of Bell states.
    pub fn identify_bell(&self, qubit_i: &str, qubit_j: &str) -> Result<Option<BellIndex>> {
        // P(b) = ⟨b|ρ_ij|b⟩, so the reduced state is exactly |b⟩⟨b| iff P(b) = 1.
        let probs = self.outcome_distribution(qubit_i, qubit_j)?;
        Ok(BellIndex::ALL
            .into_iter()
            .find(|b| probs[b.index()] > 1.0 - TOLERANCE))
    }

    /// Probabilities of reading 0 and 1 on one qubit in the computational basis.
    pub fn z_distribution(&self, qubit: &str) -> Result<[f64; 2]> {
        let m = 1usize << self.bit_of(qubit)?;
        let mut p = [0.0; 2];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            p[usize::from(idx & m != 0)] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Computational-basis measurement conditioned on `bit`.
    pub fn measure_z_forced(&self, qubit: &str, bit: bool) -> Result<StateVector> {
        let m = 1usize << self.bit_of(qubit)?;
        let p = self.z_distribution(qubit)?[usize::from(bit)];
        if p < MIN_CONDITION_PROBABILITY {
            return Err(OracleError::NotNormalized(0.0));
        }
        let scale = 1.0 / p.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                if (idx & m != 0) == bit {
                    a * scale
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Ok(StateVector {
            labels: Arc::clone(&self.labels),
            amplitudes,
        })
    }

    /// JSON debug dump: label list and `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let dump = StateDump {
            labels: &self.labels,
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_value(dump).expect("plain data serializes")
    }
}

/// Coefficients of a Bell state over `|00⟩, |01⟩, |10⟩, |11⟩`.
///
/// Index `(a, b)` is `(|0b⟩ + (−1)^a |1b̄⟩)/√2`.
pub fn bell_amplitudes(b: BellIndex) -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    let sign = if b.phase() { -s } else { s };
    let mut amps = [Complex64::default(); 4];
    let first = usize::from(b.parity());
    amps[first] = real(s);
    amps[2 | (first ^ 1)] = real(sign);
    amps
}

// Bell amplitudes are real, so ⟨b|block⟩ needs no conjugation.
fn bell_overlap(b: BellIndex, block: &[Complex64; 4]) -> Complex64 {
    let basis = bell_amplitudes(b);
    basis.iter().zip(block).map(|(x, c)| x * c).sum()
}

/// Inverse-CDF draw over the four outcomes in `BellIndex` order, skipping
/// impossible ones. `u` is uniform on `[0, 1)`.
pub fn sample_outcome(probabilities: &[f64; 4], u: f64) -> BellIndex {
    let mut acc = 0.0;
    let mut last_possible = None;
    for b in BellIndex::ALL {
        let p = probabilities[b.index()];
        if p < MIN_CONDITION_PROBABILITY {
            continue;
        }
        acc += p;
        last_possible = Some(b);
        if u < acc {
            return b;
        }
    }
    // Rounding can leave acc a hair under 1.
    last_possible.expect("a normalized state has at least one possible outcome")
}

/// Two-qubit Bell state on `(i, j)`.
pub fn make_bell(
    index: BellIndex,
    label_i: impl Into<String>,
    label_j: impl Into<String>,
) -> Result<StateVector> {
    let labels = vec![label_i.into(), label_j.into()];
    check_labels(&labels)?;
    Ok(StateVector {
        labels: labels.into(),
        amplitudes: bell_amplitudes(index).to_vec(),
    })
}

/// `(|000⟩ + |111⟩)/√2` on `(i, j, k)`.
pub fn make_ghz3(
    label_i: impl Into<String>,
    label_j: impl Into<String>,
    label_k: impl Into<String>,
) -> Result<StateVector> {
    let labels = vec![label_i.into(), label_j.into(), label_k.into()];
    check_labels(&labels)?;
    let mut amplitudes = vec![Complex64::default(); 8];
    amplitudes[0] = real(FRAC_1_SQRT_2);
    amplitudes[7] = real(FRAC_1_SQRT_2);
    Ok(StateVector {
        labels: labels.into(),
        amplitudes,
    })
}

/// Kronecker product, `a`'s qubits first.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let labels: Vec<String> = a.labels.iter().chain(b.labels.iter()).cloned().collect();
    check_labels(&labels)?;
    let amplitudes = a
        .amplitudes
        .iter()
        .flat_map(|x| b.amplitudes.iter().map(move |y| x * y))
        .collect();
    Ok(StateVector {
        labels: labels.into(),
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::BellIndex::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S: f64 = FRAC_1_SQRT_2;

    fn re(sv: &StateVector) -> Vec<f64> {
        sv.amplitudes().iter().map(|a| a.re).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < TOLERANCE)
    }

    #[test]
    fn bell_amplitude_layout() {
        assert!(close(
            &re(&make_bell(PhiPlus, "1", "2").unwrap()),
            &[S, 0.0, 0.0, S]
        ));
        assert!(close(
            &re(&make_bell(PhiMinus, "1", "2").unwrap()),
            &[S, 0.0, 0.0, -S]
        ));
        assert!(close(
            &re(&make_bell(PsiPlus, "1", "2").unwrap()),
            &[0.0, S, S, 0.0]
        ));
        assert!(close(
            &re(&make_bell(PsiMinus, "1", "2").unwrap()),
            &[0.0, S, -S, 0.0]
        ));
        for b in BellIndex::ALL {
            assert!((make_bell(b, "x", "y").unwrap().norm_sqr() - 1.0).abs() < TOLERANCE);
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert_eq!(
            make_bell(PhiPlus, "a", "a").unwrap_err(),
            OracleError::DuplicateLabel("a".into())
        );
        assert!(make_ghz3("a", "b", "a").is_err());
        let x = make_bell(PhiPlus, "a", "b").unwrap();
        let y = make_bell(PhiPlus, "b", "c").unwrap();
        assert!(matches!(
            tensor(&x, &y),
            Err(OracleError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn size_cap() {
        let mut sv = StateVector::zero("q0");
        for k in 1..MAX_QUBITS {
            sv = tensor(&sv, &StateVector::zero(format!("q{k}"))).unwrap();
        }
        assert_eq!(sv.amplitudes().len(), 4096);
        assert_eq!(
            tensor(&sv, &StateVector::zero("extra")).unwrap_err(),
            OracleError::TooManyQubits(13)
        );
    }

    #[test]
    fn ghz_layout_and_z_marginal() {
        let g = make_ghz3("1", "2", "5").unwrap();
        let nonzero: Vec<usize> = g
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![0, 7]);
        assert!((g.amplitudes()[0].re - S).abs() < TOLERANCE);
        let p = g.z_distribution("5").unwrap();
        assert!((p[0] - 0.5).abs() < TOLERANCE && (p[1] - 0.5).abs() < TOLERANCE);
        let zero = g.measure_z_forced("5", false).unwrap();
        assert!(close(&re(&zero), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let one = g.measure_z_forced("5", true).unwrap();
        assert!((one.amplitudes()[7].re - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn tensor_with_zero_pads_odd_positions() {
        let b = make_bell(PhiPlus, "1", "2").unwrap();
        let t = tensor(&b, &StateVector::zero("3")).unwrap();
        assert!(close(&re(&t), &[S, 0.0, 0.0, 0.0, 0.0, 0.0, S, 0.0]));
        assert_eq!(t.labels(), ["1", "2", "3"]);
    }

    #[test]
    fn eigenstate_distribution() {
        let b = make_bell(PsiMinus, "i", "j").unwrap();
        let d = b.outcome_distribution("i", "j").unwrap();
        assert!(close(&d, &[0.0, 0.0, 0.0, 1.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rec, post) = b.measure_bell("i", "j", &mut rng).unwrap();
        assert_eq!(rec.outcome, PsiMinus);
        assert_eq!(post.identify_bell("i", "j").unwrap(), Some(PsiMinus));
    }

    #[test]
    fn reversed_pair_order_flips_psi_minus_sign_only() {
        let b = make_bell(PsiMinus, "i", "j").unwrap();
        // Swapping the two qubits multiplies ψ− by −1: same state.
        assert_eq!(b.identify_bell("j", "i").unwrap(), Some(PsiMinus));
    }

    #[test]
    fn ghz_pair_is_not_a_bell_state() {
        let g = make_ghz3("1", "2", "3").unwrap();
        assert_eq!(g.identify_bell("1", "2").unwrap(), None);
        let d = g.outcome_distribution("1", "2").unwrap();
        assert!(close(&d, &[0.5, 0.5, 0.0, 0.0]));
    }

    #[test]
    fn unknown_and_repeated_labels() {
        let b = make_bell(PhiPlus, "i", "j").unwrap();
        assert_eq!(
            b.outcome_distribution("i", "k").unwrap_err(),
            OracleError::UnknownLabel("k".into())
        );
        assert!(matches!(
            b.outcome_distribution("i", "i"),
            Err(OracleError::SameQubit(_))
        ));
        assert!(b.identify_bell("x", "j").is_err());
    }

    #[test]
    fn forced_impossible_outcome_is_an_error() {
        let b = make_bell(PhiPlus, "i", "j").unwrap();
        assert!(matches!(
            b.measure_bell_forced("i", "j", PsiPlus),
            Err(OracleError::ZeroProbability {
                outcome: PsiPlus,
                ..
            })
        ));
    }

    #[test]
    fn remeasuring_returns_same_outcome() {
        let s = tensor(
            &make_bell(PhiPlus, "1", "2").unwrap(),
            &make_bell(PsiMinus, "3", "4").unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (first, post) = s.measure_bell("1", "3", &mut rng).unwrap();
            let (second, _) = post.measure_bell("1", "3", &mut rng).unwrap();
            assert_eq!(first.outcome, second.outcome);
            assert!((post.norm_sqr() - 1.0).abs() < TOLERANCE);
        }
    }

    #[test]
    fn seeded_measurement_is_reproducible() {
        let s = tensor(
            &make_ghz3("1", "2", "5").unwrap(),
            &make_ghz3("3", "4", "6").unwrap(),
        )
        .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, s1) = s.measure_bell("1", "3", &mut rng).unwrap();
            let (b, s2) = s1.measure_bell("2", "4", &mut rng).unwrap();
            (a, b, s2)
        };
        assert_eq!(run(99), run(99));
    }

    #[test]
    fn sampling_skips_impossible_outcomes() {
        assert_eq!(sample_outcome(&[0.0, 0.5, 0.0, 0.5], 0.0), PhiMinus);
        assert_eq!(
            sample_outcome(&[0.0, 0.5, 0.0, 0.5], 0.999_999_999_999),
            PsiMinus
        );
        assert_eq!(
            sample_outcome(&[0.5, 0.5 - 1e-15, 0.0, 0.0], 0.999_999_999_999_999_9),
            PhiMinus
        );
    }

    #[test]
    fn json_dump_shape() {
        let v = make_bell(PhiPlus, "A1", "B2").unwrap().to_json();
        assert_eq!(v["labels"], serde_json::json!(["A1", "B2"]));
        assert_eq!(v["amplitudes"].as_array().unwrap().len(), 4);
        assert_eq!(v["amplitudes"][1], serde_json::json!([0.0, 0.0]));
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(StateVector::from_amplitudes(["a"], vec![real(1.0)]).is_err());
        assert!(matches!(
            StateVector::from_amplitudes(["a"], vec![real(1.0), real(1.0)]),
            Err(OracleError::NotNormalized(_))
        ));
        assert!(
            StateVector::from_amplitudes(["a"], vec![real(0.6), Complex64::new(0.0, 0.8)]).is_ok()
        );
    }
}
