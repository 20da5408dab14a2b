//! Adversary models for the circular M-SQKD protocol.
//!
//! Three representations coexist:
//!
//! - [`CollectiveAttack`]: a semi-honest TP applies unitary probes `U1` (on
//!   the qubit travelling from the first user) and `U2` (on the qubit coming
//!   back) with a fresh ancilla prepared in |0⟩ each round.
//! - [`UntrustedAttack`]: a fully adversarial TP prepares an arbitrary
//!   source state, applies a unitary `V1` mid-circuit, and models her public
//!   announcement as an isometry `V2` into a 4-level announcement register.
//! - [`StochasticChannel`]: a classical noise model over the error triple
//!   (Q, Q_M, Q_R) that drives Monte-Carlo runs at scale.
//!
//! The unitary models feed the exact-evolution path and the oracle tests;
//! the stochastic channel reproduces the same observable tables at the
//! matching noise triple without tracking any quantum state.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmath::{BellOutcome, Complex64, ComplexMatrix, StateVector, TOL_CONSTRUCTION};

/// Unitarity / isometry checks run at this tolerance.
pub const TOL_UNITARY: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("U1 is not unitary within {TOL_UNITARY:e}")]
    U1NotUnitary,
    #[error("U2 is not unitary within {TOL_UNITARY:e}")]
    U2NotUnitary,
    #[error("V1 is not unitary within {TOL_UNITARY:e}")]
    V1NotUnitary,
    #[error("V2 is not an isometry within {TOL_UNITARY:e}")]
    V2NotIsometry,
    #[error("source state is not normalized within {0:e}")]
    SourceNotNormalized(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("noise parameter out of range: {0}")]
    BadNoise(String),
    #[error("wrong_bell_split must be nonnegative and sum to 1 (got {0:?})")]
    BadSplit([f64; 3]),
    #[error("attack file: {0}")]
    Parse(String),
}

/// The error triple (Q, Q_M, Q_R) observed by the users.
///
/// `q` is the probability that two consecutive measuring users disagree,
/// `qm` the probability of a wrong announcement class in measure rounds,
/// `qr` the probability of a wrong Bell outcome in all-reflect rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParameters {
    pub q: f64,
    pub qm: f64,
    pub qr: f64,
}

impl NoiseParameters {
    pub fn new(q: f64, qm: f64, qr: f64) -> Result<Self, AttackError> {
        for (name, v) in [("q", q), ("qm", qm), ("qr", qr)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(AttackError::BadNoise(format!("{name} = {v}")));
            }
        }
        Ok(Self { q, qm, qr })
    }

    /// The figures' convention: a single value expands to Q = Q_M = Q_R.
    pub fn uniform(q: f64) -> Result<Self, AttackError> {
        Self::new(q, q, q)
    }

    /// Key-rate evaluation additionally needs matched keys to dominate,
    /// i.e. (1-Q)(1-Q_M) > Q·Q_M; the protocol aborts otherwise.
    pub fn is_admissible(&self) -> bool {
        self.q < 0.5 && self.qm < 0.5 && (1.0 - self.q) * (1.0 - self.qm) > self.q * self.qm
    }
}

/// Classical noise channel for Monte-Carlo simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticChannel {
    pub noise: NoiseParameters,
    /// How Q_R mass splits over the wrong reflect outcomes (ψ+, ψ−, φ−).
    pub wrong_bell_split: [f64; 3],
}

impl StochasticChannel {
    pub fn new(noise: NoiseParameters, wrong_bell_split: [f64; 3]) -> Result<Self, AttackError> {
        let sum: f64 = wrong_bell_split.iter().sum();
        if wrong_bell_split.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > TOL_CONSTRUCTION {
            return Err(AttackError::BadSplit(wrong_bell_split));
        }
        Ok(Self {
            noise,
            wrong_bell_split,
        })
    }

    /// Even split over the three wrong reflect outcomes.
    pub fn even_split(noise: NoiseParameters) -> Self {
        Self {
            noise,
            wrong_bell_split: [1.0 / 3.0; 3],
        }
    }
}

/// Semi-honest TP attack: probe unitaries on (qubit ⊗ ancilla).
///
/// The ancilla starts in |0⟩ by convention; attacks wanting a different
/// initial state must absorb it into `u1`.
#[derive(Debug, Clone)]
pub struct CollectiveAttack {
    pub ancilla_dim: usize,
    pub u1: ComplexMatrix,
    pub u2: ComplexMatrix,
}

impl CollectiveAttack {
    pub fn new(
        ancilla_dim: usize,
        u1: ComplexMatrix,
        u2: ComplexMatrix,
    ) -> Result<Self, AttackError> {
        let dim = 2 * ancilla_dim;
        if u1.rows != dim || u1.cols != dim || u2.rows != dim || u2.cols != dim {
            return Err(AttackError::DimensionMismatch(format!(
                "expected {dim}x{dim} unitaries for ancilla_dim {ancilla_dim}"
            )));
        }
        if !u1.is_unitary(TOL_UNITARY) {
            return Err(AttackError::U1NotUnitary);
        }
        if !u2.is_unitary(TOL_UNITARY) {
            return Err(AttackError::U2NotUnitary);
        }
        Ok(Self {
            ancilla_dim,
            u1,
            u2,
        })
    }
}

/// Untrusted TP attack: arbitrary source plus isometric announcement model.
///
/// `source` lives on (qubit ⊗ ancilla); `v1` is unitary on the same space;
/// `v2` maps (qubit ⊗ ancilla) into (4-level announcement ⊗ ancilla) with
/// announcement values 0..3 meaning φ+, φ−, ψ+, ψ−.
#[derive(Debug, Clone)]
pub struct UntrustedAttack {
    pub ancilla_dim: usize,
    pub source: StateVector,
    pub v1: ComplexMatrix,
    pub v2: ComplexMatrix,
}

impl UntrustedAttack {
    pub fn new(
        ancilla_dim: usize,
        source: StateVector,
        v1: ComplexMatrix,
        v2: ComplexMatrix,
    ) -> Result<Self, AttackError> {
        let dim = 2 * ancilla_dim;
        if source.dim() != dim {
            return Err(AttackError::DimensionMismatch(format!(
                "source has dimension {}, expected {dim}",
                source.dim()
            )));
        }
        if v1.rows != dim || v1.cols != dim {
            return Err(AttackError::DimensionMismatch(format!(
                "V1 must be {dim}x{dim}"
            )));
        }
        if v2.rows != 4 * ancilla_dim || v2.cols != dim {
            return Err(AttackError::DimensionMismatch(format!(
                "V2 must be {}x{dim}",
                4 * ancilla_dim
            )));
        }
        let norm = source.norm_sqr();
        if (norm - 1.0).abs() > TOL_CONSTRUCTION {
            return Err(AttackError::SourceNotNormalized(norm));
        }
        if !v1.is_unitary(TOL_UNITARY) {
            return Err(AttackError::V1NotUnitary);
        }
        if !v2.is_isometry(TOL_UNITARY) {
            return Err(AttackError::V2NotIsometry);
        }
        Ok(Self {
            ancilla_dim,
            source,
            v1,
            v2,
        })
    }
}

/// Honest-TP baseline: both probes are the identity.
pub fn identity_attack(ancilla_dim: usize) -> CollectiveAttack {
    assert!(ancilla_dim >= 1);
    let dim = 2 * ancilla_dim;
    CollectiveAttack {
        ancilla_dim,
        u1: ComplexMatrix::identity(dim),
        u2: ComplexMatrix::identity(dim),
    }
}

/// Haar-style random probe pair, deterministic in the seed.
///
/// Unitaries come from QR decomposition (modified Gram-Schmidt with phase
/// fixing) of complex Gaussian matrices.
pub fn random_collective_attack(ancilla_dim: usize, seed: u64) -> CollectiveAttack {
    assert!(
        (1..=8).contains(&ancilla_dim),
        "ancilla_dim must be in [1, 8]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * ancilla_dim;
    let u1 = random_unitary(dim, &mut rng);
    let u2 = random_unitary(dim, &mut rng);
    CollectiveAttack {
        ancilla_dim,
        u1,
        u2,
    }
}

/// Haar-distributed random unitary of dimension `dim`.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    // Box-Muller pairs; rejection loop guards against log(0).
    let mut gauss = || loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > 1e-300 {
            let r = (-2.0 * u1.ln()).sqrt();
            return (
                r * (2.0 * std::f64::consts::PI * u2).cos(),
                r * (2.0 * std::f64::consts::PI * u2).sin(),
            );
        }
    };
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let (re, im) = gauss();
                    Complex::new(re, im)
                })
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt; the diagonal phases are fixed so the result is
    // Haar rather than merely unitary.
    for k in 0..dim {
        for prev in 0..k {
            let proj: Complex64 = cols[prev]
                .iter()
                .zip(&cols[k])
                .map(|(a, b)| a.conj() * b)
                .sum();
            for i in 0..dim {
                let sub = proj * cols[prev][i];
                cols[k][i] -= sub;
            }
        }
        let norm: f64 = cols[k].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        // Phase of the leading entry, divided out (QR sign convention).
        let lead = cols[k][k];
        let phase = if lead.norm() > 1e-300 {
            lead / Complex::new(lead.norm(), 0.0)
        } else {
            Complex::new(1.0, 0.0)
        };
        let inv = phase.conj() / Complex::new(norm, 0.0);
        for a in cols[k].iter_mut() {
            *a *= inv;
        }
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

/// Canonical named attack: the ancilla copies the computational basis.
///
/// U1 |a, x⟩ = |a, x ⊕ a⟩ (so |a, 0⟩ → |a, a⟩), U2 = identity. Leaves the
/// Z-basis values untouched but destroys reflect-case coherence, forcing
/// the φ− outcome half the time.
pub fn entangling_probe_attack() -> CollectiveAttack {
    let mut u1 = ComplexMatrix::zeros(4, 4);
    let one = Complex::new(1.0, 0.0);
    // Basis order |qubit, ancilla⟩: 00, 01, 10, 11.
    u1.set(0, 0, one);
    u1.set(1, 1, one);
    u1.set(3, 2, one);
    u1.set(2, 3, one);
    CollectiveAttack {
        ancilla_dim: 2,
        u1,
        u2: ComplexMatrix::identity(4),
    }
}

/// Untrusted-TP model instantiated to fully honest behavior.
///
/// The ancilla is the qubit TP keeps from |φ+⟩; V1 does nothing; V2 is the
/// Bell-measurement isometry against that retained half.
pub fn honest_source() -> UntrustedAttack {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // |φ⟩ = Σ_i |i⟩ ⊗ |g_i⟩ with |g_i⟩ = |i⟩/√2 on the retained qubit.
    let source = StateVector::new(vec![
        Complex::new(s, 0.0),
        Complex::new(0.0, 0.0),
        Complex::new(0.0, 0.0),
        Complex::new(s, 0.0),
    ]);
    let v1 = ComplexMatrix::identity(4);
    // V2 |j⟩_fly |h⟩_anc = Σ_m ⟨Φ_m|h j⟩ |m⟩ ⊗ |0⟩_anc. Columns indexed by
    // (j, h) with j most significant; rows by (m, anc).
    let mut v2 = ComplexMatrix::zeros(8, 4);
    for j in 0..2usize {
        for h in 0..2usize {
            let col = j * 2 + h;
            let hb = StateVector::basis(4, h * 2 + j); // |h, j⟩ on (H, B')
            for m in 0..4usize {
                let amp = BellOutcome::from_index(m).state().inner(&hb);
                v2.set(m * 2, col, amp); // residual ancilla |0⟩
            }
        }
    }
    UntrustedAttack {
        ancilla_dim: 2,
        source,
        v1,
        v2,
    }
}

/// The honest physics of one round before channel noise is applied.
///
/// Parties that measured carry `Some(bit)` (all equal in a noiseless run);
/// reflecting parties carry `None`.
#[derive(Debug, Clone)]
pub struct RoundContext<'a> {
    pub honest_outcomes: &'a [Option<u8>],
}

/// One round after the stochastic channel has acted.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedRound {
    /// Each measuring party's recorded bit after channel flips.
    pub outcomes: Vec<Option<u8>>,
    /// TP's Bell announcement (None never occurs here; callers for the sqkd
    /// variant may ignore it in the key branch).
    pub bell: BellOutcome,
    /// The classical bit arriving at TP when at least one party measured;
    /// this is what TP's Z measurement returns in the sqkd key branch.
    pub tp_bit: Option<u8>,
}

/// Applies the (Q, Q_M, Q_R) channel to one round.
///
/// Measure rounds: each measuring party after the first records the previous
/// measuring party's bit flipped with probability Q; the bit arriving at TP
/// is the last one flipped with probability Q_M, and the announcement class
/// is φ when that arrival matches the first measured bit (consistent
/// announcements split evenly between φ+ and φ−, inconsistent ones between
/// ψ+ and ψ−). All-reflect rounds: φ+ with probability 1 − Q_R, otherwise a
/// wrong outcome drawn from `wrong_bell_split` over (ψ+, ψ−, φ−).
pub fn sample_stochastic(
    channel: &StochasticChannel,
    ctx: &RoundContext,
    rng: &mut impl Rng,
) -> PerturbedRound {
    let n = channel.noise;
    let measured: Vec<usize> = ctx
        .honest_outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|_| i))
        .collect();

    if measured.is_empty() {
        // All reflect: Step 5 Case 1 statistics are driven purely by Q_R.
        let bell = if rng.gen::<f64>() < 1.0 - n.qr {
            BellOutcome::PhiPlus
        } else {
            let x: f64 = rng.gen();
            let s = channel.wrong_bell_split;
            if x < s[0] {
                BellOutcome::PsiPlus
            } else if x < s[0] + s[1] {
                BellOutcome::PsiMinus
            } else {
                BellOutcome::PhiMinus
            }
        };
        return PerturbedRound {
            outcomes: ctx.honest_outcomes.to_vec(),
            bell,
            tp_bit: None,
        };
    }

    let mut outcomes = vec![None; ctx.honest_outcomes.len()];
    let first_bit = ctx.honest_outcomes[measured[0]].unwrap();
    outcomes[measured[0]] = Some(first_bit);
    let mut current = first_bit;
    for &idx in &measured[1..] {
        if rng.gen::<f64>() < n.q {
            current ^= 1;
        }
        outcomes[idx] = Some(current);
    }
    let tp_bit = current ^ u8::from(rng.gen::<f64>() < n.qm);
    let consistent = tp_bit == first_bit;
    let sign_plus = rng.gen::<bool>();
    let bell = match (consistent, sign_plus) {
        (true, true) => BellOutcome::PhiPlus,
        (true, false) => BellOutcome::PhiMinus,
        (false, true) => BellOutcome::PsiPlus,
        (false, false) => BellOutcome::PsiMinus,
    };
    PerturbedRound {
        outcomes,
        bell,
        tp_bit: Some(tp_bit),
    }
}

// ---------------------------------------------------------------------------
// Attack-specification files
// ---------------------------------------------------------------------------

/// Any of the three adversary models, as loaded from a specification file.
#[derive(Debug, Clone)]
pub enum Adversary {
    Collective(CollectiveAttack),
    Untrusted(UntrustedAttack),
    Stochastic(StochasticChannel),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum AttackFile {
    Collective {
        ancilla_dim: usize,
        #[serde(rename = "U1")]
        u1: Vec<Vec<[f64; 2]>>,
        #[serde(rename = "U2")]
        u2: Vec<Vec<[f64; 2]>>,
    },
    Untrusted {
        ancilla_dim: usize,
        source: Vec<[f64; 2]>,
        #[serde(rename = "V1")]
        v1: Vec<Vec<[f64; 2]>>,
        #[serde(rename = "V2")]
        v2: Vec<Vec<[f64; 2]>>,
    },
    Stochastic {
        noise: NoiseParameters,
        #[serde(default)]
        wrong_bell_split: Option<[f64; 3]>,
    },
}

fn matrix_from_nested(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix, AttackError> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(AttackError::Parse(
            "matrix rows must be nonempty and rectangular".into(),
        ));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        for &[re, im] in row {
            data.push(Complex::new(re, im));
        }
    }
    ComplexMatrix::from_flat(r, c, data).map_err(|e| AttackError::Parse(e.to_string()))
}

/// Parses an attack-specification JSON document and enforces the model
/// invariants (unitarity, isometry, normalization, noise ranges).
pub fn parse_attack_json(text: &str) -> Result<Adversary, AttackError> {
    let file: AttackFile =
        serde_json::from_str(text).map_err(|e| AttackError::Parse(e.to_string()))?;
    match file {
        AttackFile::Collective {
            ancilla_dim,
            u1,
            u2,
        } => {
            let u1 = matrix_from_nested(&u1)?;
            let u2 = matrix_from_nested(&u2)?;
            Ok(Adversary::Collective(CollectiveAttack::new(
                ancilla_dim,
                u1,
                u2,
            )?))
        }
        AttackFile::Untrusted {
            ancilla_dim,
            source,
            v1,
            v2,
        } => {
            let source = StateVector::new(
                source
                    .iter()
                    .map(|&[re, im]| Complex::new(re, im))
                    .collect(),
            );
            let v1 = matrix_from_nested(&v1)?;
            let v2 = matrix_from_nested(&v2)?;
            Ok(Adversary::Untrusted(UntrustedAttack::new(
                ancilla_dim,
                source,
                v1,
                v2,
            )?))
        }
        AttackFile::Stochastic {
            noise,
            wrong_bell_split,
        } => {
            let noise = NoiseParameters::new(noise.q, noise.qm, noise.qr)?;
            let channel = match wrong_bell_split {
                Some(split) => StochasticChannel::new(noise, split)?,
                None => StochasticChannel::even_split(noise),
            };
            Ok(Adversary::Stochastic(channel))
        }
    }
}

fn dump_matrix(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows)
        .map(|i| {
            (0..m.cols)
                .map(|j| {
                    let v = m.get(i, j);
                    [v.re, v.im]
                })
                .collect()
        })
        .collect()
}

/// Serializes a collective attack in the specification-file layout.
pub fn collective_attack_to_json(attack: &CollectiveAttack) -> serde_json::Value {
    serde_json::json!({
        "type": "collective",
        "ancilla_dim": attack.ancilla_dim,
        "U1": dump_matrix(&attack.u1),
        "U2": dump_matrix(&attack.u2),
    })
}

/// Serializes an untrusted attack in the specification-file layout.
pub fn untrusted_attack_to_json(attack: &UntrustedAttack) -> serde_json::Value {
    let source: Vec<[f64; 2]> = attack
        .source
        .amplitudes
        .iter()
        .map(|a| [a.re, a.im])
        .collect();
    serde_json::json!({
        "type": "untrusted",
        "ancilla_dim": attack.ancilla_dim,
        "source": source,
        "V1": dump_matrix(&attack.v1),
        "V2": dump_matrix(&attack.v2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_attack_is_identity() {
        let a = identity_attack(1);
        assert_eq!(a.u1, ComplexMatrix::identity(2));
        assert_eq!(a.u2, ComplexMatrix::identity(2));
        assert!(CollectiveAttack::new(1, a.u1.clone(), a.u2.clone()).is_ok());
    }

    #[test]
    fn random_attack_deterministic_and_unitary() {
        let a = random_collective_attack(3, 42);
        let b = random_collective_attack(3, 42);
        assert_eq!(a.u1.frobenius_distance(&b.u1), 0.0);
        assert_eq!(a.u2.frobenius_distance(&b.u2), 0.0);
        assert!(a.u1.is_unitary(TOL_UNITARY));
        assert!(a.u2.is_unitary(TOL_UNITARY));
        let c = random_collective_attack(3, 43);
        assert!(a.u1.frobenius_distance(&c.u1) > 1e-3);
    }

    #[test]
    fn entangling_probe_is_unitary() {
        let a = entangling_probe_attack();
        assert!(a.u1.is_unitary(1e-12));
        assert_eq!(a.u2, ComplexMatrix::identity(4));
    }

    #[test]
    fn honest_source_passes_invariants() {
        let a = honest_source();
        assert!(
            UntrustedAttack::new(a.ancilla_dim, a.source.clone(), a.v1.clone(), a.v2.clone())
                .is_ok()
        );
    }

    #[test]
    fn noise_bounds_checked() {
        assert!(NoiseParameters::new(0.2, 0.3, 0.4).is_ok());
        assert!(NoiseParameters::new(-0.1, 0.0, 0.0).is_err());
        assert!(NoiseParameters::new(0.0, 1.2, 0.0).is_err());
        assert!(NoiseParameters::uniform(0.45).unwrap().is_admissible());
        assert!(!NoiseParameters::new(0.6, 0.6, 0.0).unwrap().is_admissible());
    }

    #[test]
    fn stochastic_zero_noise_identity() {
        let ch = StochasticChannel::even_split(NoiseParameters::uniform(0.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let honest = vec![Some(1u8), Some(1u8)];
        for _ in 0..50 {
            let out = sample_stochastic(
                &ch,
                &RoundContext {
                    honest_outcomes: &honest,
                },
                &mut rng,
            );
            assert_eq!(out.outcomes, honest);
            assert!(matches!(
                out.bell,
                BellOutcome::PhiPlus | BellOutcome::PhiMinus
            ));
            assert_eq!(out.tp_bit, Some(1));
        }
        let reflect = vec![None, None];
        for _ in 0..50 {
            let out = sample_stochastic(
                &ch,
                &RoundContext {
                    honest_outcomes: &reflect,
                },
                &mut rng,
            );
            assert_eq!(out.bell, BellOutcome::PhiPlus);
            assert_eq!(out.tp_bit, None);
        }
    }

    #[test]
    fn stochastic_q_one_always_flips() {
        let ch = StochasticChannel::even_split(NoiseParameters::new(1.0, 0.0, 0.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let honest = vec![Some(0u8), Some(0u8)];
        for _ in 0..50 {
            let out = sample_stochastic(
                &ch,
                &RoundContext {
                    honest_outcomes: &honest,
                },
                &mut rng,
            );
            assert_eq!(out.outcomes[0], Some(0));
            assert_eq!(out.outcomes[1], Some(1));
        }
    }

    #[test]
    fn stochastic_reproducible() {
        let ch = StochasticChannel::even_split(NoiseParameters::uniform(0.25).unwrap());
        let honest = vec![Some(0u8), None, Some(0u8)];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| {
                    sample_stochastic(
                        &ch,
                        &RoundContext {
                            honest_outcomes: &honest,
                        },
                        &mut rng,
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn attack_json_roundtrip_and_validation() {
        let a = random_collective_attack(2, 9);
        let text = collective_attack_to_json(&a).to_string();
        match parse_attack_json(&text).unwrap() {
            Adversary::Collective(b) => {
                assert!(a.u1.frobenius_distance(&b.u1) < 1e-15);
            }
            _ => panic!("wrong variant"),
        }
        // Corrupt one entry: loader must reject non-unitary input.
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["U1"][0][0] = serde_json::json!([2.5, 0.0]);
        assert!(parse_attack_json(&v.to_string()).is_err());

        let st = r#"{"type":"stochastic","noise":{"q":0.1,"qm":0.2,"qr":0.3}}"#;
        match parse_attack_json(st).unwrap() {
            Adversary::Stochastic(ch) => assert_eq!(ch.noise.qm, 0.2),
            _ => panic!("wrong variant"),
        }

        let honest = honest_source();
        let text = untrusted_attack_to_json(&honest).to_string();
        match parse_attack_json(&text).unwrap() {
            Adversary::Untrusted(b) => {
                assert!(honest.v2.frobenius_distance(&b.v2) < 1e-15);
            }
            _ => panic!("wrong variant"),
        }
    }
}
