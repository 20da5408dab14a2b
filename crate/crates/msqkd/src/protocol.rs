//! Round engine for the circular M-SQKD protocol and its L-party variants.
//!
//! Two execution paths share the sifting logic:
//!
//! - Monte Carlo ([`run_simulation`]): rounds sampled under a
//!   [`StochasticChannel`], reproducible from the master seed through a
//!   counter-based per-round stream, so results do not depend on how many
//!   worker threads execute the rounds.
//! - Exact ([`exact_statistics_semi_honest`], [`exact_statistics_untrusted`]):
//!   two-party density/state evolution under a unitary adversary, returning
//!   the observable tables with no sampling at all.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{
    sample_stochastic, CollectiveAttack, RoundContext, StochasticChannel, UntrustedAttack,
};
use crate::qmath::{BellOutcome, Complex64, StateVector};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("no key material: zero accepted all-measure rounds")]
    NoKey,
    #[error("attack dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A classical user's per-round action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    Reflect,
    Measure,
}

/// Protocol flavour: mediated (TP always Bell-measures and announces) or the
/// trusted-TP sqkd variant (TP acts on the revealed choices; Z-measures in
/// the key branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mediated,
    Sqkd,
}

/// What TP publishes for a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Announcement {
    Bell(BellOutcome),
    /// Z-basis outcome, sqkd key branch only.
    Z(u8),
}

impl Announcement {
    pub fn label(&self) -> String {
        match self {
            Announcement::Bell(b) => b.label().to_string(),
            Announcement::Z(bit) => format!("z{bit}"),
        }
    }
}

/// Sifting classification of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// All parties reflected; TP's honesty check.
    Case1,
    /// All parties measured and the round is accepted for key material.
    Case2,
    /// Mixed choices; discarded.
    Case3,
    /// All measured but TP announced ψ±; discarded.
    DiscardedPsi,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Case3 => "case3",
            Case::DiscardedPsi => "discarded_psi",
        }
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub parties: usize,
    pub rounds: u64,
    pub variant: Variant,
    pub seed: u64,
    /// Fraction of all-measure rounds sacrificed for parameter estimation.
    pub test_fraction: f64,
}

impl ProtocolConfig {
    pub fn new(parties: usize, rounds: u64, variant: Variant, seed: u64) -> Self {
        Self {
            parties,
            rounds,
            variant,
            seed,
            test_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.parties < 2 {
            return Err(ProtocolError::BadConfig(format!(
                "parties = {} (need >= 2)",
                self.parties
            )));
        }
        if self.rounds < 1 {
            return Err(ProtocolError::BadConfig("rounds must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ProtocolError::BadConfig(format!(
                "test_fraction = {} (need 0 < f < 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// One executed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub round_index: u64,
    pub choices: Vec<Choice>,
    /// Per-party recorded bit; present exactly for parties that measured.
    pub outcomes: Vec<Option<u8>>,
    /// Absent only in sqkd rounds TP discards without measuring.
    pub announcement: Option<Announcement>,
    pub case: Case,
}

/// Case sifting: a pure function of choices and announcement.
pub fn classify_case(choices: &[Choice], announcement: Option<Announcement>) -> Case {
    let all_reflect = choices.iter().all(|&c| c == Choice::Reflect);
    if all_reflect {
        return Case::Case1;
    }
    let all_measure = choices.iter().all(|&c| c == Choice::Measure);
    if all_measure {
        return match announcement {
            Some(Announcement::Bell(BellOutcome::PhiPlus | BellOutcome::PhiMinus)) => Case::Case2,
            Some(Announcement::Bell(BellOutcome::PsiPlus | BellOutcome::PsiMinus)) => {
                Case::DiscardedPsi
            }
            Some(Announcement::Z(_)) => Case::Case2,
            None => Case::Case3,
        };
    }
    Case::Case3
}

/// Per-round random stream: stream 0 is reserved for the test-subset draw.
fn round_rng(seed: u64, round_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round_index.wrapping_add(1));
    rng
}

fn test_subset_rng(seed: u64, round_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(round_index.wrapping_add(1));
    rng
}

/// Executes one round under the stochastic channel.
///
/// Choices are uniform and independent per party; the honest physics (all
/// measuring parties see the first measured bit, TP's check succeeds) is then
/// perturbed by the channel.
pub fn run_round(
    config: &ProtocolConfig,
    channel: &StochasticChannel,
    round_index: u64,
) -> TrialRecord {
    let mut rng = round_rng(config.seed, round_index);
    let choices: Vec<Choice> = (0..config.parties)
        .map(|_| {
            if rng.gen::<bool>() {
                Choice::Measure
            } else {
                Choice::Reflect
            }
        })
        .collect();
    let any_measure = choices.contains(&Choice::Measure);
    let honest_bit: u8 = if any_measure {
        u8::from(rng.gen::<bool>())
    } else {
        0
    };
    let honest: Vec<Option<u8>> = choices
        .iter()
        .map(|&c| {
            if c == Choice::Measure {
                Some(honest_bit)
            } else {
                None
            }
        })
        .collect();
    let perturbed = sample_stochastic(
        channel,
        &RoundContext {
            honest_outcomes: &honest,
        },
        &mut rng,
    );

    let all_measure = choices.iter().all(|&c| c == Choice::Measure);
    let all_reflect = !any_measure;
    let announcement = match config.variant {
        Variant::Mediated => Some(Announcement::Bell(perturbed.bell)),
        Variant::Sqkd => {
            if all_measure {
                Some(Announcement::Z(
                    perturbed.tp_bit.expect("measured round has an arrival bit"),
                ))
            } else if all_reflect {
                Some(Announcement::Bell(perturbed.bell))
            } else {
                None // Step 5* item (iii): TP discards without measuring.
            }
        }
    };
    let case = classify_case(&choices, announcement);
    TrialRecord {
        round_index,
        choices,
        outcomes: perturbed.outcomes,
        announcement,
        case,
    }
}

/// Estimated noise triple with binomial standard errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct NoiseEstimate {
    pub q: f64,
    pub qm: f64,
    pub qr: f64,
    pub se_q: f64,
    pub se_qm: f64,
    pub se_qr: f64,
}

/// Counts per sifting case.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct CaseCounts {
    pub case1: u64,
    pub case2: u64,
    pub case3: u64,
    pub discarded_psi: u64,
}

/// Observable statistics after sifting.
///
/// Two-party tables index [alice][bob]; for more than two parties the first
/// and last users stand in (the chain endpoints) and the tables fall outside
/// the proven two-party analysis. `p_c`/`p_w` follow the conditional-on-Alice
/// convention: P(Bob sees j ∧ announcement class | Alice saw i, both
/// measured). `p_m` is the joint table P(i, j, announcement m | all
/// measured). `p`/`q` are the normalized accepted-key distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiftedStatistics {
    pub parties: usize,
    pub rounds: u64,
    pub case_counts: CaseCounts,
    pub test_rounds: u64,
    pub reflect_rounds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_c: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_w: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<[[f64; 2]; 2]>,
    /// Joint announcement-resolved tables, indexed [bell outcome][i][j].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_m: Option<[[[f64; 2]; 2]; 4]>,
    /// Case-1 announcement frequencies in `BellOutcome` order.
    pub reflect_bell: [f64; 4],
    pub noise: NoiseEstimate,
}

impl SiftedStatistics {
    fn empty(parties: usize) -> Self {
        Self {
            parties,
            rounds: 0,
            case_counts: CaseCounts::default(),
            test_rounds: 0,
            reflect_rounds: 0,
            p_c: None,
            p_w: None,
            p: None,
            q: None,
            p_m: None,
            reflect_bell: [0.0; 4],
            noise: NoiseEstimate::default(),
        }
    }
}

/// Everything a simulation produces.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trials: Vec<TrialRecord>,
    pub stats: SiftedStatistics,
    /// Raw key per party: accepted all-measure rounds minus the test subset.
    pub keys: Vec<Vec<u8>>,
    /// TP's raw key in the sqkd variant.
    pub tp_key: Option<Vec<u8>>,
    /// Coverage problems (cases that never occurred, empty test subset).
    pub warnings: Vec<String>,
}

fn binom_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Runs the full protocol: rounds, sifting, test-subset estimation, keys.
///
/// Honors `SQKD_THREADS` as a cap on worker threads (default 1); the
/// per-round random streams make the output identical for any thread count.
pub fn run_simulation(
    config: &ProtocolConfig,
    channel: &StochasticChannel,
) -> Result<SimulationOutput, ProtocolError> {
    config.validate()?;
    let threads = std::env::var("SQKD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1);
    let rounds = config.rounds;
    let trials: Vec<TrialRecord> = if threads == 1 || rounds < 2 {
        (0..rounds).map(|r| run_round(config, channel, r)).collect()
    } else {
        let chunk = rounds.div_ceil(threads as u64);
        let mut parts: Vec<Vec<TrialRecord>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|t| {
                    let lo = t * chunk;
                    let hi = ((t + 1) * chunk).min(rounds);
                    scope.spawn(move || {
                        (lo..hi)
                            .map(|r| run_round(config, channel, r))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                parts.push(h.join().expect("worker panicked"));
            }
        });
        parts.into_iter().flatten().collect()
    };

    let mut counts = CaseCounts::default();
    let mut reflect_counts = [0u64; 4];
    // Test-subset draws are keyed per round so membership does not depend on
    // the order rounds were produced in.
    let mut test_set: Vec<bool> = vec![false; trials.len()];
    for t in &trials {
        match t.case {
            Case::Case1 => counts.case1 += 1,
            Case::Case2 => counts.case2 += 1,
            Case::Case3 => counts.case3 += 1,
            Case::DiscardedPsi => counts.discarded_psi += 1,
        }
        if let (Case::Case1, Some(Announcement::Bell(b))) = (t.case, t.announcement) {
            reflect_counts[b.index()] += 1;
        }
        let all_measure = matches!(t.case, Case::Case2 | Case::DiscardedPsi);
        if all_measure {
            let mut rng = test_subset_rng(config.seed, t.round_index);
            test_set[t.round_index as usize] = rng.gen::<f64>() < config.test_fraction;
        }
    }
    if counts.case2 == 0 {
        return Err(ProtocolError::NoKey);
    }

    // Parameter estimation over case 1 plus the test subset.
    let last = config.parties - 1;
    let mut n_test = 0u64;
    let mut joint_m = [[[0u64; 2]; 2]; 4];
    let mut alice_count = [0u64; 2];
    let mut pc_counts = [[0u64; 2]; 2];
    let mut pw_counts = [[0u64; 2]; 2];
    let mut accepted_joint = [[0u64; 2]; 2];
    let mut differ = 0u64;
    let mut class_mismatch = 0u64;
    for t in &trials {
        if !test_set[t.round_index as usize] {
            continue;
        }
        n_test += 1;
        let i = t.outcomes[0].expect("all-measure round") as usize;
        let j = t.outcomes[last].expect("all-measure round") as usize;
        alice_count[i] += 1;
        if i != j {
            differ += 1;
        }
        match t.announcement {
            Some(Announcement::Bell(b)) => {
                joint_m[b.index()][i][j] += 1;
                let consistent = matches!(b, BellOutcome::PhiPlus | BellOutcome::PhiMinus);
                if consistent {
                    pc_counts[i][j] += 1;
                    accepted_joint[i][j] += 1;
                } else {
                    pw_counts[i][j] += 1;
                }
                if consistent != (i == j) {
                    class_mismatch += 1;
                }
            }
            Some(Announcement::Z(bit)) => {
                // sqkd key branch: TP's bit plays the announcement's role.
                accepted_joint[i][j] += 1;
                if bit as usize != j {
                    class_mismatch += 1;
                }
            }
            None => {}
        }
    }

    let mut stats = SiftedStatistics::empty(config.parties);
    stats.rounds = rounds;
    stats.case_counts = counts;
    stats.test_rounds = n_test;
    stats.reflect_rounds = counts.case1;
    if counts.case1 > 0 {
        for k in 0..4 {
            stats.reflect_bell[k] = reflect_counts[k] as f64 / counts.case1 as f64;
        }
    }
    if n_test > 0 {
        let mut p_c = [[0.0; 2]; 2];
        let mut p_w = [[0.0; 2]; 2];
        let mut p_m = [[[0.0; 2]; 2]; 4];
        for i in 0..2 {
            for j in 0..2 {
                if alice_count[i] > 0 {
                    p_c[i][j] = pc_counts[i][j] as f64 / alice_count[i] as f64;
                    p_w[i][j] = pw_counts[i][j] as f64 / alice_count[i] as f64;
                }
                for m in 0..4 {
                    p_m[m][i][j] = joint_m[m][i][j] as f64 / n_test as f64;
                }
            }
        }
        let accepted_total: u64 = accepted_joint.iter().flatten().sum();
        if accepted_total > 0 {
            let mut p = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    p[i][j] = accepted_joint[i][j] as f64 / accepted_total as f64;
                }
            }
            stats.p = Some(p);
            stats.q = Some(p);
        }
        if config.variant == Variant::Mediated {
            stats.p_c = Some(p_c);
            stats.p_w = Some(p_w);
            stats.p_m = Some(p_m);
        }
        let q_hat = differ as f64 / n_test as f64;
        let qm_hat = class_mismatch as f64 / n_test as f64;
        let qr_hat = if counts.case1 > 0 {
            1.0 - stats.reflect_bell[0]
        } else {
            0.0
        };
        stats.noise = NoiseEstimate {
            q: q_hat,
            qm: qm_hat,
            qr: qr_hat,
            se_q: binom_se(q_hat, n_test),
            se_qm: binom_se(qm_hat, n_test),
            se_qr: binom_se(qr_hat, counts.case1),
        };
    }

    // Raw keys: accepted rounds outside the test subset.
    let mut keys: Vec<Vec<u8>> = vec![Vec::new(); config.parties];
    let mut tp_key = if config.variant == Variant::Sqkd {
        Some(Vec::new())
    } else {
        None
    };
    for t in &trials {
        if t.case != Case::Case2 || test_set[t.round_index as usize] {
            continue;
        }
        for (party, out) in t.outcomes.iter().enumerate() {
            keys[party].push(out.expect("case 2 round has all outcomes"));
        }
        if let (Some(tk), Some(Announcement::Z(bit))) = (tp_key.as_mut(), t.announcement) {
            tk.push(bit);
        }
    }

    let mut warnings = Vec::new();
    if counts.case1 == 0 {
        warnings.push("no all-reflect rounds occurred; reflect statistics are unavailable".into());
    }
    if counts.case3 == 0 {
        warnings.push("no mixed-choice rounds occurred".into());
    }
    if n_test == 0 {
        warnings.push("test subset is empty; noise estimates are unavailable".into());
    }
    Ok(SimulationOutput {
        trials,
        stats,
        keys,
        tp_key,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Exact two-party evolution under unitary adversaries
// ---------------------------------------------------------------------------

/// Embeds an ancilla branch vector into (qubit ⊗ ancilla) at qubit value `q`.
fn embed(q: usize, branch: &StateVector, ancilla_dim: usize) -> StateVector {
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 2 * ancilla_dim];
    amplitudes[q * ancilla_dim..(q + 1) * ancilla_dim].copy_from_slice(&branch.amplitudes);
    StateVector::new(amplitudes)
}

/// Exact observable tables for a semi-honest collective attack (two-party).
///
/// Evolves the measure-measure branch (Alice's collapse, U1, Bob's collapse,
/// U2, TP's Bell measurement) and the reflect-reflect branch, with no
/// sampling. The returned `p_c`/`p_w` are conditional on Alice's bit and the
/// reflect announcement probabilities are exact.
pub fn exact_statistics_semi_honest(
    attack: &CollectiveAttack,
) -> Result<SiftedStatistics, ProtocolError> {
    let d = attack.ancilla_dim;
    if attack.u1.rows != 2 * d || attack.u2.rows != 2 * d {
        return Err(ProtocolError::DimensionMismatch(format!(
            "attack unitaries are {}x{}, ancilla_dim {d}",
            attack.u1.rows, attack.u1.cols
        )));
    }
    let ancilla0 = StateVector::basis(d, 0);

    let mut p_c = [[0.0; 2]; 2];
    let mut p_w = [[0.0; 2]; 2];
    for alice in 0..2usize {
        // Alice resends |alice⟩; TP probes it together with a fresh ancilla.
        let after_u1 = attack
            .u1
            .apply(&StateVector::basis(2, alice).tensor(&ancilla0));
        for bob in 0..2usize {
            let branch = after_u1.block(bob, d);
            // Bob resends |bob⟩; the second probe acts before TP's check.
            let after_u2 = attack.u2.apply(&embed(bob, &branch, d));
            // TP compares the arriving qubit with the retained half, which
            // Alice's measurement collapsed to |alice⟩.
            p_c[alice][bob] = after_u2.block(alice, d).norm_sqr();
            p_w[alice][bob] = after_u2.block(1 - alice, d).norm_sqr();
        }
    }

    // Reflect branch: |φ+⟩ with the probes acting on the travelling half.
    let mut reflect_bell = [0.0; 4];
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut full = vec![Complex64::new(0.0, 0.0); 2 * 2 * d];
    for h in 0..2usize {
        let evolved = attack
            .u2
            .apply(&attack.u1.apply(&StateVector::basis(2, h).tensor(&ancilla0)))
            .scale(s);
        full[h * 2 * d..(h + 1) * 2 * d].copy_from_slice(&evolved.amplitudes);
    }
    for (k, outcome) in BellOutcome::ALL.iter().enumerate() {
        let bell = outcome.state();
        let mut norm = 0.0;
        for a in 0..d {
            let mut amp = Complex64::new(0.0, 0.0);
            for h in 0..2usize {
                for f in 0..2usize {
                    amp += bell.amplitudes[h * 2 + f].conj() * full[h * 2 * d + f * d + a];
                }
            }
            norm += amp.norm_sqr();
        }
        reflect_bell[k] = norm;
    }

    let n: f64 = p_c.iter().flatten().sum();
    let mut p = [[0.0; 2]; 2];
    if n > 0.0 {
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = p_c[i][j] / n;
            }
        }
    }
    // Announcement-resolved joint tables: consistent rounds split evenly
    // over φ±, inconsistent ones over ψ±; Alice's bit is uniform.
    let mut p_m = [[[0.0; 2]; 2]; 4];
    for i in 0..2 {
        for j in 0..2 {
            p_m[0][i][j] = 0.25 * p_c[i][j];
            p_m[1][i][j] = 0.25 * p_c[i][j];
            p_m[2][i][j] = 0.25 * p_w[i][j];
            p_m[3][i][j] = 0.25 * p_w[i][j];
        }
    }

    let q_true = 0.5 * (p_c[0][1] + p_w[0][1] + p_c[1][0] + p_w[1][0]);
    let qm_true = 0.5 * (p_w[0][0] + p_w[1][1] + p_c[0][1] + p_c[1][0]);
    let mut stats = SiftedStatistics::empty(2);
    stats.p_c = Some(p_c);
    stats.p_w = Some(p_w);
    stats.p = Some(p);
    stats.q = Some(p);
    stats.p_m = Some(p_m);
    stats.reflect_bell = reflect_bell;
    stats.noise = NoiseEstimate {
        q: q_true,
        qm: qm_true,
        qr: 1.0 - reflect_bell[0],
        se_q: 0.0,
        se_qm: 0.0,
        se_qr: 0.0,
    };
    Ok(stats)
}

/// Exact observable tables for an untrusted-TP attack (two-party).
///
/// Returns the joint announcement-resolved tables p_m (true branch-vector
/// norms), the accepted-key distribution q, and the exact reflect-branch
/// announcement probabilities.
pub fn exact_statistics_untrusted(
    attack: &UntrustedAttack,
) -> Result<SiftedStatistics, ProtocolError> {
    let d = attack.ancilla_dim;
    if attack.v2.rows != 4 * d || attack.v2.cols != 2 * d {
        return Err(ProtocolError::DimensionMismatch(format!(
            "V2 is {}x{}, ancilla_dim {d}",
            attack.v2.rows, attack.v2.cols
        )));
    }
    let mut p_m = [[[0.0; 2]; 2]; 4];
    let mut alice_mass = [0.0f64; 2];
    for i in 0..2usize {
        let g_i = attack.source.block(i, d);
        alice_mass[i] = g_i.norm_sqr();
        let after_v1 = attack.v1.apply(&embed(i, &g_i, d));
        for j in 0..2usize {
            let g_ij = after_v1.block(j, d);
            let after_v2 = attack.v2.apply(&embed(j, &g_ij, d));
            for m in 0..4usize {
                p_m[m][i][j] = after_v2.block(m, d).norm_sqr();
            }
        }
    }
    let mut n_prime = 0.0;
    let mut q = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            q[i][j] = p_m[0][i][j] + p_m[1][i][j];
            n_prime += q[i][j];
        }
    }
    if n_prime > 0.0 {
        for row in q.iter_mut() {
            for v in row.iter_mut() {
                *v /= n_prime;
            }
        }
    }
    // Conditional-on-Alice consistency tables, same convention as the
    // semi-honest path.
    let mut p_c = [[0.0; 2]; 2];
    let mut p_w = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            if alice_mass[i] > 0.0 {
                p_c[i][j] = (p_m[0][i][j] + p_m[1][i][j]) / alice_mass[i];
                p_w[i][j] = (p_m[2][i][j] + p_m[3][i][j]) / alice_mass[i];
            }
        }
    }

    // Reflect branch: both users bounce the qubit untouched.
    let reflected = attack.v2.apply(&attack.v1.apply(&attack.source));
    let mut reflect_bell = [0.0; 4];
    for m in 0..4usize {
        reflect_bell[m] = reflected.block(m, d).norm_sqr();
    }

    let mut differ = 0.0;
    let mut wrong_class = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let phi = p_m[0][i][j] + p_m[1][i][j];
            let psi = p_m[2][i][j] + p_m[3][i][j];
            if i != j {
                differ += phi + psi;
                wrong_class += phi;
            } else {
                wrong_class += psi;
            }
        }
    }

    let mut stats = SiftedStatistics::empty(2);
    stats.p_c = Some(p_c);
    stats.p_w = Some(p_w);
    stats.p = Some(q);
    stats.q = Some(q);
    stats.p_m = Some(p_m);
    stats.reflect_bell = reflect_bell;
    stats.noise = NoiseEstimate {
        q: differ,
        qm: wrong_class,
        qr: 1.0 - reflect_bell[0],
        se_q: 0.0,
        se_qm: 0.0,
        se_qr: 0.0,
    };
    Ok(stats)
}

/// Writes the trial log in the documented CSV layout.
///
/// Columns: round_index, choices (e.g. "MRM"), outcomes ('-' for reflect),
/// announcement, case. Byte-deterministic for identical inputs.
pub fn write_trial_csv<W: Write>(trials: &[TrialRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "round_index,choices,outcomes,announcement,case")?;
    for t in trials {
        let choices: String = t
            .choices
            .iter()
            .map(|c| if *c == Choice::Measure { 'M' } else { 'R' })
            .collect();
        let outcomes: String = t
            .outcomes
            .iter()
            .map(|o| match o {
                Some(0) => '0',
                Some(1) => '1',
                Some(_) => '?',
                None => '-',
            })
            .collect();
        let ann = t
            .announcement
            .map(|a| a.label())
            .unwrap_or_else(|| "-".into());
        writeln!(
            w,
            "{},{},{},{},{}",
            t.round_index,
            choices,
            outcomes,
            ann,
            t.case.label()
        )?;
    }
    Ok(())
}
