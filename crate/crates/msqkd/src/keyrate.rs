//! Asymptotic key-rate lower bounds and noise-tolerance thresholds.
//!
//! Two adversary scenarios are covered. The semi-honest bound chains the
//! conditional-entropy identity with a two-dimensional eigenvalue closed
//! form and a reflect-case overlap estimate; the untrusted bound applies a
//! pairwise conditional-entropy theorem to the announcement-resolved tables.
//! Both evaluate either from a noise triple (the symmetric-error convention
//! used for threshold curves) or from measured statistics.
//!
//! Overlap estimates that go negative at high noise are clamped to zero and
//! every clamp is counted on the returned intermediates; eigenvalue weights
//! λ are likewise kept inside [1/2, 1].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::NoiseParameters;
use crate::protocol::SiftedStatistics;
use crate::qmath::{binary_entropy, entropy_of};

#[derive(Debug, Error)]
pub enum KeyrateError {
    #[error("noise outside the evaluable region (need q, qm in [0, 1/2], qr in [0, 1]): {0}")]
    InadmissibleNoise(String),
    #[error("joint distribution invalid: {0}")]
    BadDistribution(String),
    #[error("statistics are missing required tables: {0}")]
    MissingTables(&'static str),
    #[error("degenerate table: zero accepted mass")]
    DegenerateTable,
    #[error("Cauchy-Schwarz violated: |Re⟨E|F⟩| = {re} exceeds sqrt(E·F) = {bound}")]
    CauchySchwarz { re: f64, bound: f64 },
    #[error("normalization mismatch: pairs sum to {sum}, N = {n}")]
    BadNormalization { sum: f64, n: f64 },
    #[error("no sign change on the bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("invalid sweep range: {0}")]
    BadRange(String),
}

/// Which adversary model the bound targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SemiHonest,
    Untrusted,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::SemiHonest => "semi-honest",
            Scenario::Untrusted => "untrusted",
        }
    }
}

/// Conditional entropy H(A|B) = H(A,B) − H(B) in bits for a 2x2 joint table.
pub fn conditional_entropy_ab(p: &[[f64; 2]; 2]) -> Result<f64, KeyrateError> {
    let mut sum = 0.0;
    for row in p {
        for &v in row {
            if v < -1e-12 {
                return Err(KeyrateError::BadDistribution(format!("negative entry {v}")));
            }
            sum += v;
        }
    }
    if (sum - 1.0).abs() > 1e-10 {
        return Err(KeyrateError::BadDistribution(format!(
            "entries sum to {sum}"
        )));
    }
    let joint = entropy_of(&[p[0][0], p[0][1], p[1][0], p[1][1]]);
    let bob = entropy_of(&[p[0][0] + p[1][0], p[0][1] + p[1][1]]);
    Ok((joint - bob).max(0.0))
}

/// Diagnostic bundle for the semi-honest bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemiHonestIntermediates {
    /// Normalized accepted-key distribution.
    pub p: [[f64; 2]; 2],
    pub h_a_given_b: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// Lower bound on the key ancilla overlap, after clamping.
    pub overlap_lower: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub s_sigma1: f64,
    pub rate: f64,
    /// Number of clamps applied (overlap floor/cap, λ range).
    pub clamp_events: u32,
}

/// Reflect-case overlap lower bound from a general consistency table.
///
/// `p_c` is the conditional-on-Alice consistent table; `wrong_reflect_mass`
/// is the total probability of a wrong Bell outcome in all-reflect rounds
/// (ψ+ + ψ− + φ−). The result is clamped below at zero: the bound only ever
/// enters through λ, which worsens monotonically as the overlap shrinks, so
/// the zero-overlap worst case keeps the rate bound valid.
pub fn semi_honest_overlap_bound(p_c: &[[f64; 2]; 2], wrong_reflect_mass: f64) -> f64 {
    let s = |a: f64, b: f64| (a.max(0.0) * b.max(0.0)).sqrt();
    let raw = 2.0
        - 2.0 * wrong_reflect_mass
        - (s(p_c[0][0], p_c[1][0]) + s(p_c[0][1], p_c[1][1]) + s(p_c[0][1], p_c[1][0]))
        - 0.5 * (p_c[0][0] + 2.0 * s(p_c[0][0], p_c[0][1]) + p_c[0][1])
        - 0.5 * (p_c[1][0] + 2.0 * s(p_c[1][0], p_c[1][1]) + p_c[1][1]);
    raw.max(0.0)
}

fn semi_honest_from_tables(
    p_c: [[f64; 2]; 2],
    wrong_reflect_mass: f64,
) -> Result<SemiHonestIntermediates, KeyrateError> {
    let n: f64 = p_c.iter().flatten().sum();
    if n <= 0.0 {
        return Err(KeyrateError::DegenerateTable);
    }
    let mut p = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            p[i][j] = p_c[i][j] / n;
        }
    }
    let h_a_given_b = conditional_entropy_ab(&p)?;
    let mut clamp_events = 0u32;

    let raw = 2.0
        - 2.0 * wrong_reflect_mass
        - ((p_c[0][0] * p_c[1][0]).sqrt()
            + (p_c[0][1] * p_c[1][1]).sqrt()
            + (p_c[0][1] * p_c[1][0]).sqrt())
        - 0.5 * (p_c[0][0] + 2.0 * (p_c[0][0] * p_c[0][1]).sqrt() + p_c[0][1])
        - 0.5 * (p_c[1][0] + 2.0 * (p_c[1][0] * p_c[1][1]).sqrt() + p_c[1][1]);
    let mut overlap = raw;
    if overlap < 0.0 {
        overlap = 0.0;
        clamp_events += 1;
    }
    let cap = (p_c[0][0] * p_c[1][1]).sqrt();
    if overlap > cap {
        overlap = cap;
        clamp_events += 1;
    }

    let key_mass = p_c[0][0] + p_c[1][1];
    let mut lambda_plus = if key_mass > 0.0 {
        0.5 + ((p_c[0][0] - p_c[1][1]).powi(2) + 4.0 * overlap * overlap).sqrt() / (2.0 * key_mass)
    } else {
        0.5
    };
    if lambda_plus > 1.0 {
        lambda_plus = 1.0;
        clamp_events += 1;
    }
    if lambda_plus < 0.5 {
        lambda_plus = 0.5;
        clamp_events += 1;
    }
    let lambda_minus = 1.0 - lambda_plus;
    let s_sigma1 = binary_entropy(lambda_plus);

    let xi1 = p[0][0] + p[1][1];
    let xi2 = p[0][1] + p[1][0];
    let rate = entropy_of(&[p[0][0] + p[1][0], p[0][1] + p[1][1]])
        - p[1][0]
        - p[0][1]
        - xi1 * s_sigma1
        - entropy_of(&[xi1, xi2]);
    Ok(SemiHonestIntermediates {
        p,
        h_a_given_b,
        xi1,
        xi2,
        overlap_lower: overlap,
        lambda_plus,
        lambda_minus,
        s_sigma1,
        rate,
        clamp_events,
    })
}

fn check_noise_evaluable(noise: &NoiseParameters) -> Result<(), KeyrateError> {
    let ok = (0.0..=0.5).contains(&noise.q)
        && (0.0..=0.5).contains(&noise.qm)
        && (0.0..=1.0).contains(&noise.qr);
    if !ok {
        return Err(KeyrateError::InadmissibleNoise(format!(
            "q = {}, qm = {}, qr = {}",
            noise.q, noise.qm, noise.qr
        )));
    }
    Ok(())
}

/// Semi-honest key-rate lower bound from a noise triple.
pub fn semi_honest_key_rate(
    noise: &NoiseParameters,
) -> Result<SemiHonestIntermediates, KeyrateError> {
    check_noise_evaluable(noise)?;
    let a = (1.0 - noise.q) * (1.0 - noise.qm);
    let b = noise.q * noise.qm;
    semi_honest_from_tables([[a, b], [b, a]], noise.qr)
}

/// Semi-honest key-rate lower bound from measured or exact statistics.
pub fn semi_honest_key_rate_from_stats(
    stats: &SiftedStatistics,
) -> Result<SemiHonestIntermediates, KeyrateError> {
    let p_c = stats.p_c.ok_or(KeyrateError::MissingTables("p_c"))?;
    let wrong = stats.reflect_bell[1] + stats.reflect_bell[2] + stats.reflect_bell[3];
    semi_honest_from_tables(p_c, wrong)
}

/// Diagnostic bundle for the untrusted bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UntrustedIntermediates {
    /// Announcement-resolved norms, indexed [m][i][j] for m in {0, 1}.
    pub g_norms: [[[f64; 2]; 2]; 2],
    pub q: [[f64; 2]; 2],
    pub n_prime: f64,
    /// Matched-pair overlap lower bound per announcement.
    pub overlap_match: [f64; 2],
    /// Mismatched-pair overlap (Cauchy-Schwarz value) per announcement.
    pub overlap_mismatch: [f64; 2],
    /// λ per (pair j, announcement m).
    pub lambda: [[f64; 2]; 2],
    pub s_a_given_t: f64,
    pub h_a_given_b: f64,
    pub rate: f64,
    pub clamp_events: u32,
}

/// Pairwise conditional-entropy lower bound.
///
/// Each pair carries (‖E‖², ‖F‖², Re⟨E|F⟩); `n` must equal the total mass.
/// Zero-mass pairs contribute nothing. Used both by the untrusted bound and
/// directly by the soundness tests with exact pair data.
pub fn theorem1_bound(pairs: &[(f64, f64, f64)], n: f64) -> Result<f64, KeyrateError> {
    let mut sum_mass = 0.0;
    for &(e, f, re) in pairs {
        if e < -1e-12 || f < -1e-12 {
            return Err(KeyrateError::BadDistribution(format!(
                "negative norm in pair ({e}, {f})"
            )));
        }
        let bound = (e.max(0.0) * f.max(0.0)).sqrt();
        if re.abs() > bound + 1e-9 {
            return Err(KeyrateError::CauchySchwarz {
                re: re.abs(),
                bound,
            });
        }
        sum_mass += e + f;
    }
    if (sum_mass - n).abs() > 1e-10 * n.max(1.0) {
        return Err(KeyrateError::BadNormalization { sum: sum_mass, n });
    }
    if n <= 0.0 {
        return Err(KeyrateError::DegenerateTable);
    }
    let mut total = 0.0;
    for &(e, f, re) in pairs {
        let tot = e + f;
        if tot <= 0.0 {
            continue;
        }
        let re = re.abs().min((e.max(0.0) * f.max(0.0)).sqrt());
        let lambda = (0.5 + ((e - f).powi(2) + 4.0 * re * re).sqrt() / (2.0 * tot)).clamp(0.5, 1.0);
        total += (tot / n) * (binary_entropy(e / tot) - binary_entropy(lambda));
    }
    Ok(total)
}

/// Overlap estimates for one announcement branch of the untrusted model.
///
/// `g` holds the branch's norms ⟨g^m_{i,j}|g^m_{i,j}⟩ and
/// `wrong_announcement_prob` the reflect-case probability mass standing in
/// for that branch's error statistic. Returns (matched, mismatched):
/// the matched-pair bound is the absolute-value/Cauchy-Schwarz estimate
/// clamped into [0, √(g₀₀ g₁₁)]; the mismatched pair is fixed at its
/// Cauchy-Schwarz value √(g₀₁ g₁₀).
pub fn untrusted_overlap_bound(g: &[[f64; 2]; 2], wrong_announcement_prob: f64) -> (f64, f64) {
    let s = |a: f64, b: f64| (a.max(0.0) * b.max(0.0)).sqrt();
    let total: f64 = g.iter().flatten().sum();
    let cs4 = s(g[0][0], g[0][1]) + s(g[0][0], g[1][0]) + s(g[1][1], g[1][0]) + s(g[0][1], g[1][1]);
    let mismatch = s(g[0][1], g[1][0]);
    let raw = (0.5 * total - 0.5 * wrong_announcement_prob).abs() - cs4 - mismatch;
    let matched = raw.clamp(0.0, s(g[0][0], g[1][1]));
    (matched, mismatch)
}

fn untrusted_from_tables(
    g_norms: [[[f64; 2]; 2]; 2],
    wrong_announcement_prob: f64,
) -> Result<UntrustedIntermediates, KeyrateError> {
    let n_prime: f64 = g_norms.iter().flat_map(|m| m.iter().flatten()).sum();
    if n_prime <= 0.0 {
        return Err(KeyrateError::DegenerateTable);
    }
    let mut q = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            q[i][j] = (g_norms[0][i][j] + g_norms[1][i][j]) / n_prime;
        }
    }
    let h_a_given_b = conditional_entropy_ab(&q)?;

    let mut clamp_events = 0u32;
    let mut overlap_match = [0.0; 2];
    let mut overlap_mismatch = [0.0; 2];
    let mut lambda = [[0.0; 2]; 2];
    let mut pairs = Vec::with_capacity(4);
    for m in 0..2 {
        let g = &g_norms[m];
        let s = |a: f64, b: f64| (a.max(0.0) * b.max(0.0)).sqrt();
        let total: f64 = g.iter().flatten().sum();
        let cs4 =
            s(g[0][0], g[0][1]) + s(g[0][0], g[1][0]) + s(g[1][1], g[1][0]) + s(g[0][1], g[1][1]);
        let mismatch = s(g[0][1], g[1][0]);
        let raw = (0.5 * total - 0.5 * wrong_announcement_prob).abs() - cs4 - mismatch;
        let cap = s(g[0][0], g[1][1]);
        let matched = raw.clamp(0.0, cap);
        if raw < 0.0 || raw > cap {
            clamp_events += 1;
        }
        overlap_match[m] = matched;
        overlap_mismatch[m] = mismatch;
        // Pair j = 0 couples the matched keys (0,0) with (1,1); pair j = 1
        // couples the mismatched keys (0,1) with (1,0).
        pairs.push((g[0][0], g[1][1], matched));
        pairs.push((g[0][1], g[1][0], mismatch));
        for (j, &(e, f, re)) in pairs[pairs.len() - 2..].iter().enumerate() {
            let tot = e + f;
            lambda[j][m] = if tot > 0.0 {
                let l = 0.5 + ((e - f).powi(2) + 4.0 * re * re).sqrt() / (2.0 * tot);
                if !(0.5..=1.0).contains(&l) {
                    clamp_events += 1;
                }
                l.clamp(0.5, 1.0)
            } else {
                0.5
            };
        }
    }
    let s_a_given_t = theorem1_bound(&pairs, n_prime)?;
    let rate = s_a_given_t - h_a_given_b;
    Ok(UntrustedIntermediates {
        g_norms,
        q,
        n_prime,
        overlap_match,
        overlap_mismatch,
        lambda,
        s_a_given_t,
        h_a_given_b,
        rate,
        clamp_events,
    })
}

/// Untrusted key-rate lower bound from a noise triple.
///
/// Tables follow the symmetric parameterization (diagonal (1−Q)(1−Q_M)/2,
/// off-diagonal Q·Q_M/2 per announcement); the wrong-announcement statistic
/// is Q_R/3, the per-outcome reflect error mass, used identically for both
/// accepted announcement branches.
pub fn untrusted_key_rate(noise: &NoiseParameters) -> Result<UntrustedIntermediates, KeyrateError> {
    check_noise_evaluable(noise)?;
    let a = 0.5 * (1.0 - noise.q) * (1.0 - noise.qm);
    let b = 0.5 * noise.q * noise.qm;
    let per_m = [[a, b], [b, a]];
    untrusted_from_tables([per_m, per_m], noise.qr / 3.0)
}

/// Untrusted key-rate lower bound from measured or exact statistics.
///
/// Uses the joint announcement-resolved tables and the observed reflect-case
/// φ− frequency as the wrong-announcement statistic for both branches.
pub fn untrusted_key_rate_from_stats(
    stats: &SiftedStatistics,
) -> Result<UntrustedIntermediates, KeyrateError> {
    let p_m = stats.p_m.ok_or(KeyrateError::MissingTables("p_m"))?;
    untrusted_from_tables([p_m[0], p_m[1]], stats.reflect_bell[1])
}

/// Evaluates the scenario's rate bound under Q = Q_M = Q_R.
pub fn uniform_noise_rate(scenario: Scenario, q: f64) -> Result<f64, KeyrateError> {
    let noise = NoiseParameters { q, qm: q, qr: q };
    match scenario {
        Scenario::SemiHonest => Ok(semi_honest_key_rate(&noise)?.rate),
        Scenario::Untrusted => Ok(untrusted_key_rate(&noise)?.rate),
    }
}

/// Root of the rate bound on Q = Q_M = Q_R.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub scenario: Scenario,
    pub threshold_q: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
}

/// Bisection bracket: the admissible-region cap keeps the search away from
/// the regime where matched keys no longer dominate.
pub const THRESHOLD_BRACKET: (f64, f64) = (0.0, 0.25);

/// Bisection on a sign-changing function: positive at `lo`, negative at `hi`.
pub fn bisect_root<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tolerance: f64,
) -> Result<(f64, (f64, f64), u32), KeyrateError>
where
    F: FnMut(f64) -> Result<f64, KeyrateError>,
{
    if f(lo)? <= 0.0 || f(hi)? >= 0.0 {
        return Err(KeyrateError::NoSignChange { lo, hi });
    }
    let mut iterations = 0u32;
    while hi - lo > tolerance && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((0.5 * (lo + hi), (lo, hi), iterations))
}

/// Solves rate(Q) = 0 under Q = Q_M = Q_R by bisection.
pub fn noise_threshold(
    scenario: Scenario,
    tolerance: f64,
) -> Result<ThresholdResult, KeyrateError> {
    let (lo, hi) = THRESHOLD_BRACKET;
    let (threshold_q, bracket, iterations) =
        bisect_root(|q| uniform_noise_rate(scenario, q), lo, hi, tolerance)?;
    Ok(ThresholdResult {
        scenario,
        threshold_q,
        bracket,
        iterations,
    })
}

/// One point of a rate curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: f64,
    pub rate: f64,
}

/// Rate curve plus any monotonicity violations found below the zero
/// crossing (reported, never silently fixed).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub points: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

/// Evaluates the rate bound on a uniform grid under Q = Q_M = Q_R.
pub fn sweep(
    scenario: Scenario,
    q_lo: f64,
    q_hi: f64,
    steps: usize,
) -> Result<SweepResult, KeyrateError> {
    if !(0.0..=0.5).contains(&q_lo) || !(0.0..=0.5).contains(&q_hi) || q_lo >= q_hi {
        return Err(KeyrateError::BadRange(format!(
            "need 0 <= lo < hi <= 0.5, got [{q_lo}, {q_hi}]"
        )));
    }
    if steps < 2 {
        return Err(KeyrateError::BadRange(format!(
            "steps = {steps}, need >= 2"
        )));
    }
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let q = q_lo + (q_hi - q_lo) * k as f64 / (steps - 1) as f64;
        points.push(SweepPoint {
            q,
            rate: uniform_noise_rate(scenario, q)?,
        });
    }
    let mut warnings = Vec::new();
    for w in points.windows(2) {
        if w[0].rate > 0.0 && w[1].rate > w[0].rate + 1e-12 {
            warnings.push(format!(
                "rate increased from {:.9} to {:.9} between q = {:.6} and q = {:.6}",
                w[0].rate, w[1].rate, w[0].q, w[1].q
            ));
        }
    }
    Ok(SweepResult {
        scenario,
        points,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_entropy_examples() {
        let correlated = [[0.5, 0.0], [0.0, 0.5]];
        assert!(conditional_entropy_ab(&correlated).unwrap().abs() < 1e-12);
        let uniform = [[0.25, 0.25], [0.25, 0.25]];
        assert!((conditional_entropy_ab(&uniform).unwrap() - 1.0).abs() < 1e-12);
        // Symmetric table at Q = Q_M = 0.1 reduces to h(0.01/0.82).
        let n = 2.0 * (0.81 + 0.01);
        let t = [[0.81 / n, 0.01 / n], [0.01 / n, 0.81 / n]];
        // Frozen from high-precision evaluation of h(0.01/0.82).
        assert!((conditional_entropy_ab(&t).unwrap() - 0.095017245671076342).abs() < 1e-12);
        assert!(conditional_entropy_ab(&[[0.5, -0.2], [0.4, 0.3]]).is_err());
    }

    #[test]
    fn semi_honest_overlap_examples() {
        // Noiseless: 2 - 0 - 0 - 1 = 1.
        let clean = [[1.0, 0.0], [0.0, 1.0]];
        assert!((semi_honest_overlap_bound(&clean, 0.0) - 1.0).abs() < 1e-12);
        // Q = Q_M = Q_R = 0.1 evaluates to 0.61 exactly.
        let t = [[0.81, 0.01], [0.01, 0.81]];
        assert!((semi_honest_overlap_bound(&t, 0.1) - 0.61).abs() < 1e-12);
        // Deep-noise value is negative and clamps to zero.
        let deep = [[0.3025, 0.2025], [0.2025, 0.3025]];
        assert_eq!(semi_honest_overlap_bound(&deep, 0.45), 0.0);
    }

    #[test]
    fn semi_honest_rate_zero_noise_is_one() {
        let out = semi_honest_key_rate(&NoiseParameters::uniform(0.0).unwrap()).unwrap();
        assert!((out.rate - 1.0).abs() < 1e-12);
        assert!((out.lambda_plus - 1.0).abs() < 1e-12);
        assert!(out.s_sigma1.abs() < 1e-12);
        assert!(out.h_a_given_b.abs() < 1e-12);
        assert_eq!(out.clamp_events, 0);
    }

    #[test]
    fn semi_honest_rate_frozen_values() {
        // Frozen from an independent 50-digit evaluation of the bound chain.
        let r8 = semi_honest_key_rate(&NoiseParameters::uniform(0.08).unwrap()).unwrap();
        assert!((r8.rate - 0.48075539468241246).abs() < 1e-12);
        let r10 = semi_honest_key_rate(&NoiseParameters::uniform(0.10).unwrap()).unwrap();
        assert!((r10.rate - 0.36014709823199009).abs() < 1e-12);
        // The published tolerance point: the rate crosses zero at 16.02%.
        let edge = semi_honest_key_rate(&NoiseParameters::uniform(0.1602).unwrap()).unwrap();
        assert!(edge.rate.abs() < 2e-3, "rate at 0.1602 is {}", edge.rate);
    }

    #[test]
    fn untrusted_rate_zero_noise_is_one() {
        let out = untrusted_key_rate(&NoiseParameters::uniform(0.0).unwrap()).unwrap();
        assert!((out.rate - 1.0).abs() < 1e-12);
        assert!((out.overlap_match[0] - 0.5).abs() < 1e-12);
        assert!((out.overlap_match[1] - 0.5).abs() < 1e-12);
        assert!(out.overlap_mismatch[0].abs() < 1e-12);
        assert!((out.lambda[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untrusted_rate_frozen_values() {
        let r5 = untrusted_key_rate(&NoiseParameters::uniform(0.05).unwrap()).unwrap();
        assert!((r5.rate - 0.46062565252945379).abs() < 1e-12);
        let r10 = untrusted_key_rate(&NoiseParameters::uniform(0.10).unwrap()).unwrap();
        assert!((r10.rate - 0.11507178461605472).abs() < 1e-12);
        // The matched overlap at 0.1 is |0.41 - 0.1/6| - 0.18 - 0.005 = 5/24.
        assert!((r10.overlap_match[1] - 0.20833333333333333).abs() < 1e-12);
        assert!((r10.overlap_mismatch[1] - 0.005).abs() < 1e-12);
    }

    #[test]
    fn theorem1_equality_cases() {
        // Orthogonal ancillas leak everything: bound is 0.
        let z = theorem1_bound(&[(0.5, 0.5, 0.0)], 1.0).unwrap();
        assert!(z.abs() < 1e-12);
        // Identical ancillas leak nothing: bound is h(1/2) = 1.
        let o = theorem1_bound(&[(0.5, 0.5, 0.5)], 1.0).unwrap();
        assert!((o - 1.0).abs() < 1e-12);
        // Zero-mass pairs contribute nothing.
        let with_empty = theorem1_bound(&[(0.5, 0.5, 0.5), (0.0, 0.0, 0.0)], 1.0).unwrap();
        assert!((with_empty - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theorem1_rejects_bad_input() {
        assert!(matches!(
            theorem1_bound(&[(0.25, 0.25, 0.4)], 0.5),
            Err(KeyrateError::CauchySchwarz { .. })
        ));
        assert!(matches!(
            theorem1_bound(&[(0.5, 0.5, 0.0)], 0.7),
            Err(KeyrateError::BadNormalization { .. })
        ));
    }

    #[test]
    fn untrusted_overlap_examples() {
        // Zero noise, either branch: |1/2 - 0| - 0 - 0 = 1/2, mismatch 0.
        let clean = [[0.5, 0.0], [0.0, 0.5]];
        let (m, mm) = untrusted_overlap_bound(&clean, 0.0);
        assert!((m - 0.5).abs() < 1e-12);
        assert!(mm.abs() < 1e-12);
        // Q = Q_M = Q_R = 0.1 tables.
        let g = [[0.405, 0.005], [0.005, 0.405]];
        let (m, mm) = untrusted_overlap_bound(&g, 0.1 / 3.0);
        assert!((m - 0.20833333333333333).abs() < 1e-12);
        assert!((mm - 0.005).abs() < 1e-12);
    }

    #[test]
    fn thresholds_match_independent_evaluation() {
        let sh = noise_threshold(Scenario::SemiHonest, 1e-7).unwrap();
        assert!((sh.threshold_q - 0.16013353774904071).abs() < 1e-6);
        let un = noise_threshold(Scenario::Untrusted, 1e-7).unwrap();
        assert!((un.threshold_q - 0.12098435265432277).abs() < 1e-6);
    }

    #[test]
    fn threshold_refinement_stable() {
        let coarse = noise_threshold(Scenario::SemiHonest, 1e-6).unwrap();
        let fine = noise_threshold(Scenario::SemiHonest, 1e-8).unwrap();
        assert!((coarse.threshold_q - fine.threshold_q).abs() < 1e-5);
    }

    #[test]
    fn sweep_shape_and_validation() {
        let s = sweep(Scenario::SemiHonest, 0.0, 0.2, 201).unwrap();
        assert_eq!(s.points.len(), 201);
        assert!((s.points[0].rate - 1.0).abs() < 1e-12);
        // Zero crossing between 0.159 and 0.161.
        let before = s
            .points
            .iter()
            .filter(|p| p.q < 0.159)
            .all(|p| p.rate > 0.0);
        let after = s
            .points
            .iter()
            .filter(|p| p.q > 0.161)
            .all(|p| p.rate < 0.0);
        assert!(before && after);
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);

        let u = sweep(Scenario::Untrusted, 0.0, 0.2, 201).unwrap();
        let cross_lo = u
            .points
            .iter()
            .filter(|p| p.rate > 0.0)
            .map(|p| p.q)
            .fold(0.0, f64::max);
        assert!(
            cross_lo > 0.115 && cross_lo < 0.125,
            "crossing near {cross_lo}"
        );

        assert!(sweep(Scenario::SemiHonest, 0.0, 0.0, 10).is_err());
        assert!(sweep(Scenario::SemiHonest, 0.0, 0.2, 1).is_err());
    }

    #[test]
    fn rates_continuous_on_grid() {
        // No NaN or infinities anywhere in the evaluable region. The slope is
        // unbounded right at q = 0 (binary entropy near its endpoints), so
        // the step bound is loose there and tight elsewhere.
        for scenario in [Scenario::SemiHonest, Scenario::Untrusted] {
            let mut prev: Option<f64> = None;
            for k in 0..=500 {
                let q = 0.5 * k as f64 / 500.0;
                let r = uniform_noise_rate(scenario, q).unwrap();
                assert!(r.is_finite(), "rate not finite at q = {q}");
                if let Some(p) = prev {
                    let allowed = if q < 0.02 { 0.15 } else { 0.02 };
                    assert!((r - p).abs() < allowed, "jump at q = {q}: {p} -> {r}");
                }
                prev = Some(r);
            }
        }
    }

    #[test]
    fn intermediates_satisfy_structural_invariants() {
        for k in 0..=50 {
            let q = 0.5 * k as f64 / 50.0;
            let noise = NoiseParameters::uniform(q).unwrap();
            let sh = semi_honest_key_rate(&noise).unwrap();
            assert!((sh.xi1 + sh.xi2 - 1.0).abs() < 1e-10);
            assert!((sh.lambda_plus + sh.lambda_minus - 1.0).abs() < 1e-10);
            assert!((0.5..=1.0).contains(&sh.lambda_plus));
            assert!((0.0..=1.0 + 1e-12).contains(&sh.s_sigma1));
            let un = untrusted_key_rate(&noise).unwrap();
            let q_sum: f64 = un.q.iter().flatten().sum();
            assert!((q_sum - 1.0).abs() < 1e-10);
            for j in 0..2 {
                for m in 0..2 {
                    assert!((0.5..=1.0).contains(&un.lambda[j][m]));
                }
            }
        }
    }

    #[test]
    fn bisection_contract() {
        // Monotone f(q) = 0.5 - q has its root outside the capped bracket.
        let err = bisect_root(|q| Ok(0.5 - q), 0.0, 0.25, 1e-6);
        assert!(matches!(err, Err(KeyrateError::NoSignChange { .. })));
        // On a bracket containing the root, bisection finds it.
        let (root, _, _) = bisect_root(|q| Ok(0.5 - q), 0.0, 1.0, 1e-9).unwrap();
        assert!((root - 0.5).abs() < 1e-8);
    }
}
