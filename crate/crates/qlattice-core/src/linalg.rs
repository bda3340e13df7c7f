//! Minimal complex linear algebra for composite quantum systems.
//!
//! States are flat row-major amplitude arrays over mixed-radix subsystem
//! indices, most-significant subsystem first. A single global convention keeps
//! index arithmetic identical across the prisoner's-dilemma and walk engines.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type Complex = Complex64;

/// Unitarity tolerance used throughout the crate.
pub const UNITARY_TOL: f64 = 1e-12;
/// Allowed L2-norm drift after evolution operations.
pub const NORM_TOL: f64 = 1e-10;

/// Pure state over an ordered list of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<Complex>,
}

impl StateVector {
    /// Build a state from explicit amplitudes; `amps.len()` must equal the
    /// product of `dims` and every dimension must be at least 2.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::DimensionMismatch(
                "every subsystem dimension must be >= 2".into(),
            ));
        }
        let total: usize = dims.iter().product();
        if amps.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "expected {} amplitudes for dims {:?}, got {}",
                total,
                dims,
                amps.len()
            )));
        }
        Ok(StateVector { dims, amps })
    }

    /// Computational basis state |digits⟩.
    pub fn basis(dims: Vec<usize>, digits: &[usize]) -> Result<Self> {
        if digits.len() != dims.len() || digits.iter().zip(&dims).any(|(&x, &d)| x >= d) {
            return Err(Error::DimensionMismatch(format!(
                "basis digits {:?} invalid for dims {:?}",
                digits, dims
            )));
        }
        let total: usize = dims.iter().product();
        let mut amps = vec![Complex::new(0.0, 0.0); total];
        let mut idx = 0usize;
        for (&x, &d) in digits.iter().zip(&dims) {
            idx = idx * d + x;
        }
        amps[idx] = Complex::new(1.0, 0.0);
        Ok(StateVector { dims, amps })
    }

    /// Single-qubit convenience constructor.
    pub fn qubit(a0: Complex, a1: Complex) -> Self {
        StateVector {
            dims: vec![2],
            amps: vec![a0, a1],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[Complex] {
        &self.amps
    }

    pub fn amp(&self, index: usize) -> Complex {
        self.amps[index]
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Scale every amplitude by `factor`.
    pub fn scaled(&self, factor: Complex) -> Self {
        StateVector {
            dims: self.dims.clone(),
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// |⟨a|b⟩|², tolerant of a global phase between the two states.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(inner(self, other)?.norm_sqr())
    }
}

/// Dense complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Complex>, // row-major
}

impl Operator {
    pub fn from_rows(rows: Vec<Vec<Complex>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("operator must be square".into()));
        }
        Ok(Operator {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Operator { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Operator::from_fn(dim, |r, c| {
            if r == c {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex {
        self.entries[row * self.dim + col]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Operator::from_fn(self.dim, |r, c| self.entry(c, r).conj())
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Operator) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{0} by {}x{1}",
                self.dim, rhs.dim
            )));
        }
        let d = self.dim;
        Ok(Operator::from_fn(d, |r, c| {
            (0..d).map(|k| self.entry(r, k) * rhs.entry(k, c)).sum()
        }))
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Operator) -> Self {
        let d = self.dim * rhs.dim;
        Operator::from_fn(d, |r, c| {
            self.entry(r / rhs.dim, c / rhs.dim) * rhs.entry(r % rhs.dim, c % rhs.dim)
        })
    }

    /// Max-norm of `self† self - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let mut s = Complex::new(0.0, 0.0);
                for k in 0..d {
                    s += self.entry(k, r).conj() * self.entry(k, c);
                }
                if r == c {
                    s -= Complex::new(1.0, 0.0);
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// True iff `‖op† op − I‖_max ≤ tol`.
pub fn is_unitary(op: &Operator, tol: f64) -> bool {
    op.unitarity_defect() <= tol
}

/// Tensor product of two states; dims concatenate, amplitude at (i, j) is a_i * b_j.
pub fn tensor(a: &StateVector, b: &StateVector) -> StateVector {
    let mut dims = a.dims.to_vec();
    dims.extend_from_slice(&b.dims);
    let mut amps = Vec::with_capacity(a.amps.len() * b.amps.len());
    for &x in &a.amps {
        for &y in &b.amps {
            amps.push(x * y);
        }
    }
    StateVector { dims, amps }
}

/// ⟨a|b⟩, conjugate-linear in the first argument.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!(
            "inner product between dims {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Apply `op` to the ordered subsystems `targets`, identity elsewhere.
///
/// `op.dim` must equal the product of the target dimensions; the first target
/// is the most significant digit of the operator's index.
pub fn apply_local(op: &Operator, targets: &[usize], s: &StateVector) -> Result<StateVector> {
    let n = s.dims.len();
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::TargetOutOfRange { index: t, count: n });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    let tdim: usize = targets.iter().map(|&t| s.dims[t]).product();
    if op.dim() != tdim {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} does not match target dims product {}",
            op.dim(),
            tdim
        )));
    }

    // Stride of each subsystem in the flat index.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * s.dims[i + 1];
    }

    // Flat-offset of each of the op.dim target assignments.
    let offsets: Vec<usize> = (0..tdim)
        .map(|code| {
            let mut rem = code;
            let mut off = 0usize;
            for &t in targets.iter().rev() {
                off += (rem % s.dims[t]) * strides[t];
                rem /= s.dims[t];
            }
            off
        })
        .collect();

    let total = s.amps.len();
    let mut out = vec![Complex::new(0.0, 0.0); total];
    let mut scratch = vec![Complex::new(0.0, 0.0); tdim];
    for base in 0..total {
        // Visit each coset once: `base` is the member with all target digits 0.
        let mut digit_sum = 0usize;
        for &t in targets {
            digit_sum += (base / strides[t]) % s.dims[t];
        }
        if digit_sum != 0 {
            continue;
        }
        for (code, slot) in scratch.iter_mut().enumerate() {
            *slot = s.amps[base + offsets[code]];
        }
        for row in 0..tdim {
            let mut acc = Complex::new(0.0, 0.0);
            for (col, &amp) in scratch.iter().enumerate() {
                acc += op.entry(row, col) * amp;
            }
            out[base + offsets[row]] = acc;
        }
    }
    Ok(StateVector {
        dims: s.dims.clone(),
        amps: out,
    })
}
