//! Exact small-dimension complex linear algebra and quantum-state utilities.
//!
//! Everything here works on dense row-major storage and is meant for the
//! small registers this crate deals with (a few qubits plus an ancilla of
//! dimension at most 16). All entropies are in bits.

use num_complex::Complex;
use thiserror::Error;

/// Double-precision complex scalar used throughout the crate.
pub type Complex64 = Complex<f64>;

/// Tolerance applied when checking invariants on freshly constructed values.
pub const TOL_CONSTRUCTION: f64 = 1e-12;
/// Looser tolerance for quantities that went through long evolution chains.
pub const TOL_EVOLVED: f64 = 1e-10;

/// Errors from matrix and state operations.
#[derive(Debug, Error)]
pub enum QmathError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian within tolerance (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not a density operator: {0}")]
    NotDensity(String),
    #[error("negative probability weight {0}")]
    NegativeWeight(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from a flat row-major entry list.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, QmathError> {
        if data.len() != rows * cols {
            return Err(QmathError::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows of real numbers.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            for &x in row {
                data.push(Complex64::new(x, 0.0));
            }
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Apply the matrix to a state vector.
    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.cols, v.dim(), "apply shape mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.get(i, j) * v.amplitudes[j];
            }
            out[i] = acc;
        }
        StateVector { amplitudes: out }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest |entry(i,j) - conj(entry(j,i))| over the matrix.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_deviation() <= tol
    }

    /// Checks M†M = I, i.e. orthonormal columns. Square matrices: unitarity.
    pub fn is_isometry(&self, tol: f64) -> bool {
        let gram = self.dagger().matmul(self);
        let mut worst: f64 = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let expect = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((gram.get(i, j) - expect).norm());
            }
        }
        worst <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.is_isometry(tol)
    }

    pub fn frobenius_distance(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Pure state (or sub-normalized branch vector) over a small register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// Computational basis state |index⟩ in the given dimension.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Verifies unit norm; branch vectors produced mid-evolution stay unchecked.
    pub fn check_normalized(&self, tol: f64) -> Result<(), QmathError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > tol {
            return Err(QmathError::Invalid(format!(
                "state norm² is {n}, expected 1"
            )));
        }
        Ok(())
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Tensor product |self⟩ ⊗ |other⟩.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        StateVector { amplitudes }
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        assert_eq!(self.dim(), other.dim());
        StateVector {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> StateVector {
        StateVector {
            amplitudes: self.amplitudes.iter().map(|a| a * s).collect(),
        }
    }

    /// Projector |self⟩⟨self| (unnormalized if the vector is).
    pub fn outer(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.amplitudes[i] * self.amplitudes[j].conj());
            }
        }
        m
    }

    /// Contiguous block of length `block_len` starting at `block * block_len`.
    ///
    /// With the register layout (system ⊗ ancilla) this extracts the ancilla
    /// branch vector attached to system basis state `block`.
    pub fn block(&self, block: usize, block_len: usize) -> StateVector {
        let start = block * block_len;
        StateVector {
            amplitudes: self.amplitudes[start..start + block_len].to_vec(),
        }
    }
}

/// Probability distribution over a finite outcome set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    pub weights: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Builds the distribution, rejecting weights below -1e-12 and clamping
    /// tiny negatives produced by floating-point noise.
    pub fn new(weights: Vec<f64>) -> Result<Self, QmathError> {
        for &w in &weights {
            if w < -TOL_CONSTRUCTION {
                return Err(QmathError::NegativeWeight(w));
            }
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
        })
    }

    pub fn check_normalized(&self, tol: f64) -> Result<(), QmathError> {
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(QmathError::Invalid(format!(
                "weights sum to {s}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Kronecker product a ⊗ b; the first factor is the most significant index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i1 in 0..a.rows {
        for j1 in 0..a.cols {
            let av = a.get(i1, j1);
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for i2 in 0..b.rows {
                for j2 in 0..b.cols {
                    out.set(i1 * b.rows + i2, j1 * b.cols + j2, av * b.get(i2, j2));
                }
            }
        }
    }
    out
}

/// Partial trace of `rho` over the subsystems not listed in `keep`.
///
/// `dims` are the subsystem dimensions in register order (first factor most
/// significant); the kept subsystems appear in the output in their original
/// order. Trace is preserved.
pub fn partial_trace(
    rho: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix, QmathError> {
    let total: usize = dims.iter().product();
    if !rho.is_square() || rho.rows != total {
        return Err(QmathError::DimensionMismatch(format!(
            "matrix is {}x{}, subsystem dims multiply to {}",
            rho.rows, rho.cols, total
        )));
    }
    for &k in keep {
        if k >= dims.len() {
            return Err(QmathError::DimensionMismatch(format!(
                "keep index {k} out of range for {} subsystems",
                dims.len()
            )));
        }
    }
    let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    let join = |parts_keep: &[usize], parts_traced: &[usize]| -> usize {
        let mut full = vec![0usize; dims.len()];
        for (slot, &sub) in keep.iter().enumerate() {
            full[sub] = parts_keep[slot];
        }
        for (slot, &sub) in traced.iter().enumerate() {
            full[sub] = parts_traced[slot];
        }
        let mut idx = 0usize;
        for s in 0..dims.len() {
            idx = idx * dims[s] + full[s];
        }
        idx
    };
    let unflatten = |mut idx: usize, subs: &[usize]| -> Vec<usize> {
        let mut parts = vec![0usize; subs.len()];
        for (slot, &sub) in subs.iter().enumerate().rev() {
            parts[slot] = idx % dims[sub];
            idx /= dims[sub];
        }
        parts
    };

    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for r in 0..keep_dim {
        let r_parts = unflatten(r, keep);
        for c in 0..keep_dim {
            let c_parts = unflatten(c, keep);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..traced_dim {
                let t_parts = unflatten(t, &traced);
                acc += rho.get(join(&r_parts, &t_parts), join(&c_parts, &t_parts));
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// The four Bell outcomes in the fixed order used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    pub fn index(self) -> usize {
        match self {
            BellOutcome::PhiPlus => 0,
            BellOutcome::PhiMinus => 1,
            BellOutcome::PsiPlus => 2,
            BellOutcome::PsiMinus => 3,
        }
    }

    pub fn from_index(i: usize) -> BellOutcome {
        Self::ALL[i]
    }

    /// Bell-basis state vector over two qubits.
    pub fn state(self) -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amp =
            |v: [f64; 4]| StateVector::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect());
        match self {
            BellOutcome::PhiPlus => amp([s, 0.0, 0.0, s]),
            BellOutcome::PhiMinus => amp([s, 0.0, 0.0, -s]),
            BellOutcome::PsiPlus => amp([0.0, s, s, 0.0]),
            BellOutcome::PsiMinus => amp([0.0, s, -s, 0.0]),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        }
    }
}

/// Bell-basis measurement of a two-qubit density operator.
///
/// Returns Tr(P_k ρ) for the four Bell projectors, in `BellOutcome` order.
pub fn bell_measure(rho: &ComplexMatrix) -> Result<ProbabilityDistribution, QmathError> {
    if !rho.is_square() || rho.rows != 4 {
        return Err(QmathError::DimensionMismatch(format!(
            "bell_measure needs a 4x4 operator, got {}x{}",
            rho.rows, rho.cols
        )));
    }
    if !rho.is_hermitian(TOL_EVOLVED) {
        return Err(QmathError::NotHermitian(rho.hermiticity_deviation()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TOL_EVOLVED || tr.im.abs() > TOL_EVOLVED {
        return Err(QmathError::NotDensity(format!("trace is {tr}")));
    }
    let mut weights = Vec::with_capacity(4);
    for outcome in BellOutcome::ALL {
        let v = outcome.state();
        // ⟨v|ρ|v⟩
        let rho_v = rho.apply(&v);
        weights.push(v.inner(&rho_v).re);
    }
    ProbabilityDistribution::new(weights)
}

/// Z-basis measurement of one qubit in a register of `n_qubits` qubits.
///
/// Returns outcome probabilities and the renormalized post-measurement
/// states; an outcome with probability below 1e-15 has no post-state.
#[allow(clippy::type_complexity)]
pub fn z_measure(
    rho: &ComplexMatrix,
    qubit: usize,
    n_qubits: usize,
) -> Result<(ProbabilityDistribution, [Option<ComplexMatrix>; 2]), QmathError> {
    let dim = 1usize << n_qubits;
    if !rho.is_square() || rho.rows != dim {
        return Err(QmathError::DimensionMismatch(format!(
            "expected {dim}x{dim} operator for {n_qubits} qubits, got {}x{}",
            rho.rows, rho.cols
        )));
    }
    if qubit >= n_qubits {
        return Err(QmathError::DimensionMismatch(format!(
            "qubit {qubit} out of range for {n_qubits}-qubit register"
        )));
    }
    // Bit position counted from the most significant end of the index.
    let shift = n_qubits - 1 - qubit;
    let bit_of = |idx: usize| (idx >> shift) & 1;
    let mut probs = [0.0f64; 2];
    let mut posts = [
        ComplexMatrix::zeros(dim, dim),
        ComplexMatrix::zeros(dim, dim),
    ];
    for i in 0..dim {
        let b = bit_of(i);
        probs[b] += rho.get(i, i).re;
        for j in 0..dim {
            if bit_of(j) == b {
                posts[b].set(i, j, rho.get(i, j));
            }
        }
    }
    let [post0, post1] = posts;
    let mk = |p: f64, m: ComplexMatrix| {
        if p < 1e-15 {
            None
        } else {
            Some(m.scale(Complex64::new(1.0 / p, 0.0)))
        }
    };
    Ok((
        ProbabilityDistribution::new(probs.to_vec())?,
        [mk(probs[0], post0), mk(probs[1], post1)],
    ))
}

/// Shannon entropy in bits, with 0·log0 = 0.
pub fn shannon_entropy(p: &ProbabilityDistribution) -> f64 {
    p.weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.log2())
        .sum()
}

/// Entropy of an unchecked weight slice; helper for internal callers.
pub fn entropy_of(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.log2())
        .sum()
}

/// Binary Shannon entropy h(x) in bits.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Von Neumann entropy in bits via the eigenvalue spectrum.
///
/// Eigenvalues in [-1e-10, 1+1e-10] are clamped into [0, 1]; anything
/// further out is rejected as a non-density input.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64, QmathError> {
    if !rho.is_hermitian(TOL_EVOLVED.max(1e-9)) {
        return Err(QmathError::NotHermitian(rho.hermiticity_deviation()));
    }
    let eigs = hermitian_eigenvalues(rho)?;
    let mut entropy = 0.0;
    for lam in eigs {
        if !(-1e-10..=1.0 + 1e-10).contains(&lam) {
            return Err(QmathError::NotDensity(format!(
                "eigenvalue {lam} outside [0, 1]"
            )));
        }
        let lam = lam.clamp(0.0, 1.0);
        if lam > 0.0 {
            entropy -= lam * lam.log2();
        }
    }
    Ok(entropy)
}

/// Closed-form eigenvalues of a 2x2 Hermitian matrix, descending.
pub fn eig2_hermitian(m: &ComplexMatrix) -> (f64, f64) {
    assert!(
        m.rows == 2 && m.cols == 2,
        "eig2_hermitian expects a 2x2 matrix"
    );
    debug_assert!(m.is_hermitian(TOL_CONSTRUCTION.max(1e-9)));
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let off = m.get(0, 1).norm();
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
    (mid + rad, mid - rad)
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below 1e-12 (relative
/// to the matrix norm). Dimensions here never exceed 16, so plain Jacobi is
/// both accurate and fast enough.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>, QmathError> {
    if !m.is_square() {
        return Err(QmathError::DimensionMismatch(format!(
            "{}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    if n == 1 {
        return Ok(vec![m.get(0, 0).re]);
    }
    if n == 2 {
        let (a, b) = eig2_hermitian(m);
        return Ok(vec![a, b]);
    }
    let mut a = m.clone();
    // Symmetrize away construction noise.
    for i in 0..n {
        for j in 0..n {
            let v = (a.get(i, j) + a.get(j, i).conj()) * Complex64::new(0.5, 0.0);
            a.set(i, j, v);
        }
    }
    let scale: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| a.get(i, j).norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| a.get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-12 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // Unitary 2x2 rotation zeroing the (p, q) element: first strip
                // the phase of a_pq, then a real Jacobi rotation.
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let phase = apq / Complex64::new(apq.norm(), 0.0);
                let g = apq.norm();
                let theta = 0.5 * (2.0 * g).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                // Column rotation: A <- A * J
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, aip * c + aiq * phase.conj() * s);
                    a.set(i, q, -aip * phase * s + aiq * c);
                }
                // Row rotation: A <- J† * A
                for j in 0..n {
                    let apj = a.get(p, j);
                    let aqj = a.get(q, j);
                    a.set(p, j, apj * c + aqj * phase * s);
                    a.set(q, j, -apj * phase.conj() * s + aqj * c);
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    eigs.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(eigs)
}
