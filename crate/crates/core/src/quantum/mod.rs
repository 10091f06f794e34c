//! Dense state-vector registers over named qubits.
//!
//! A register over the quantum-variable set `QV` is a vector of length
//! `2^|QV|`. Names are kept sorted; the first name is the most significant
//! bit of a basis index, so over `(r0, r1)` the index `0b01` is the basis
//! state `|r0↦0, r1↦1⟩`. The empty register is a scalar.

mod gates;

pub use gates::{GateRegistry, UnitaryGate};

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for register comparison and unitarity checks.
pub const REGISTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("quantum variable `{0}` is already present in the register")]
    AlreadyPresent(String),
    #[error("quantum variable `{0}` is not in the register")]
    Absent(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{gate}` acts on {expected} qubit(s) but was given {found}")]
    ArityMismatch {
        gate: String,
        expected: usize,
        found: usize,
    },
    #[error("quantum variable `{0}` is targeted twice")]
    DuplicateTarget(String),
    #[error("renaming is not a bijection on the register's variables")]
    NotBijective,
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("gate `{0}` is not unitary within tolerance")]
    NotUnitary(String),
    #[error("gate file line {line}: {message}")]
    GateFile { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRegister {
    qvars: Vec<String>,
    amps: Vec<Complex64>,
}

fn insert_bit(index: usize, shift: usize, bit: bool) -> usize {
    let low = index & ((1usize << shift) - 1);
    let high = index >> shift;
    (high << (shift + 1)) | (usize::from(bit) << shift) | low
}

impl QuantumRegister {
    /// The canonical empty register, the scalar `1`.
    pub fn empty() -> Self {
        QuantumRegister {
            qvars: vec![],
            amps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// The zero vector `0_QV`.
    pub fn zero<S: AsRef<str>>(qvars: &[S]) -> Self {
        let qvars: BTreeSet<String> = qvars.iter().map(|s| s.as_ref().to_string()).collect();
        let qvars: Vec<String> = qvars.into_iter().collect();
        let amps = vec![Complex64::new(0.0, 0.0); 1 << qvars.len()];
        QuantumRegister { qvars, amps }
    }

    /// The computational basis state `|r1↦c1, ..., rn↦cn⟩`.
    pub fn basis<S: AsRef<str>>(assignment: &[(S, bool)]) -> Result<Self, QuantumError> {
        assignment
            .iter()
            .try_fold(Self::empty(), |q, (r, c)| q.tensor_fresh(r.as_ref(), *c))
    }

    /// Builds a vector from amplitudes indexed in canonical order. `qvars`
    /// must be strictly increasing. No normalization is imposed, so this also
    /// builds the unnormalized vectors produced by raw measurement.
    pub fn from_amplitudes(qvars: Vec<String>, amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        if qvars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QuantumError::InvalidRegister(
                "quantum variables must be sorted and distinct".into(),
            ));
        }
        if amps.len() != 1usize << qvars.len() {
            return Err(QuantumError::InvalidRegister(format!(
                "{} amplitudes for {} qubit(s)",
                amps.len(),
                qvars.len()
            )));
        }
        Ok(QuantumRegister { qvars, amps })
    }

    /// Like [`QuantumRegister::from_amplitudes`] but also requires the
    /// quantum-register invariant: zero, or normalized within tolerance.
    pub fn register(qvars: Vec<String>, amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let q = Self::from_amplitudes(qvars, amps)?;
        if !q.is_register() {
            return Err(QuantumError::InvalidRegister(format!(
                "squared norm {} is neither 0 nor 1",
                q.norm_sqr()
            )));
        }
        Ok(q)
    }

    pub fn qvars(&self) -> &[String] {
        &self.qvars
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn contains(&self, r: &str) -> bool {
        self.qvars.binary_search_by(|q| q.as_str().cmp(r)).is_ok()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sqr() <= REGISTER_TOL
    }

    pub fn is_register(&self) -> bool {
        let n = self.norm_sqr();
        n <= REGISTER_TOL || (n - 1.0).abs() <= REGISTER_TOL
    }

    /// Componentwise comparison on identical variable sets.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.qvars == other.qvars
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn shift_of(&self, r: &str) -> Result<usize, QuantumError> {
        let pos = self
            .qvars
            .binary_search_by(|q| q.as_str().cmp(r))
            .map_err(|_| QuantumError::Absent(r.to_string()))?;
        Ok(self.qvars.len() - 1 - pos)
    }

    /// `self ⊗ |r↦c⟩`, reordered into the canonical basis.
    pub fn tensor_fresh(&self, r: &str, c: bool) -> Result<Self, QuantumError> {
        if self.contains(r) {
            return Err(QuantumError::AlreadyPresent(r.to_string()));
        }
        let mut qvars = self.qvars.clone();
        let pos = qvars.partition_point(|q| q.as_str() < r);
        qvars.insert(pos, r.to_string());
        let shift = qvars.len() - 1 - pos;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qvars.len()];
        for (i, a) in self.amps.iter().enumerate() {
            amps[insert_bit(i, shift, c)] = *a;
        }
        Ok(QuantumRegister { qvars, amps })
    }

    /// `(U_targets ⊗ I_rest) self`. The first target is the most significant
    /// qubit of the gate's own basis.
    pub fn apply_unitary(
        &self,
        gate: &UnitaryGate,
        targets: &[&str],
    ) -> Result<Self, QuantumError> {
        if targets.len() != gate.arity() {
            return Err(QuantumError::ArityMismatch {
                gate: gate.name().to_string(),
                expected: gate.arity(),
                found: targets.len(),
            });
        }
        let mut shifts = Vec::with_capacity(targets.len());
        for (k, t) in targets.iter().enumerate() {
            if targets[..k].contains(t) {
                return Err(QuantumError::DuplicateTarget(t.to_string()));
            }
            shifts.push(self.shift_of(t)?);
        }
        let k = shifts.len();
        let dim = 1usize << k;
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let deposit = |j: usize| -> usize {
            (0..k)
                .filter(|m| j >> (k - 1 - m) & 1 == 1)
                .map(|m| 1usize << shifts[m])
                .sum()
        };
        let scatter: Vec<usize> = (0..dim).map(deposit).collect();
        let matrix = gate.matrix();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            let base = i & !mask;
            let local = (0..k).fold(0usize, |acc, m| (acc << 1) | (i >> shifts[m] & 1));
            let row = &matrix[local * dim..(local + 1) * dim];
            *slot = row
                .iter()
                .zip(&scatter)
                .map(|(u, s)| u * self.amps[base | s])
                .sum();
        }
        Ok(QuantumRegister {
            qvars: self.qvars.clone(),
            amps: out,
        })
    }

    /// The destructive measurement `M_{r,c}`: keeps the amplitudes with
    /// `r↦c` and drops the coordinate `r`. Not normalized.
    pub fn raw_measure(&self, r: &str, c: bool) -> Result<Self, QuantumError> {
        let shift = self.shift_of(r)?;
        let qvars: Vec<String> = self.qvars.iter().filter(|q| *q != r).cloned().collect();
        let amps = (0..1usize << qvars.len())
            .map(|j| self.amps[insert_bit(j, shift, c)])
            .collect();
        Ok(QuantumRegister { qvars, amps })
    }

    /// `⟨Q|M_{r,c}† M_{r,c}|Q⟩`.
    pub fn outcome_probability(&self, r: &str, c: bool) -> Result<f64, QuantumError> {
        Ok(self.raw_measure(r, c)?.norm_sqr())
    }

    /// The normalized measurement `m_{r,c}` together with the outcome
    /// probability. A vanishing outcome leaves the (zero) raw result as is.
    pub fn normalized_measure(&self, r: &str, c: bool) -> Result<(f64, Self), QuantumError> {
        let mut post = self.raw_measure(r, c)?;
        let prob = post.norm_sqr();
        if prob > REGISTER_TOL {
            let scale = 1.0 / prob.sqrt();
            for a in &mut post.amps {
                *a *= scale;
            }
        }
        Ok((prob, post))
    }

    /// Relabels the qubits; `map` must be injective and defined on every
    /// variable of the register.
    pub fn rename_qvars(&self, map: &BTreeMap<String, String>) -> Result<Self, QuantumError> {
        let mut images = Vec::with_capacity(self.qvars.len());
        for q in &self.qvars {
            images.push(map.get(q).cloned().ok_or(QuantumError::NotBijective)?);
        }
        let mut sorted = images.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != images.len() {
            return Err(QuantumError::NotBijective);
        }
        let n = images.len();
        // new shift for each old position
        let new_shift: Vec<usize> = images
            .iter()
            .map(|img| n - 1 - sorted.binary_search(img).expect("image present"))
            .collect();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let j = (0..n)
                .filter(|pos| i >> (n - 1 - pos) & 1 == 1)
                .map(|pos| 1usize << new_shift[pos])
                .sum::<usize>();
            amps[j] = *a;
        }
        Ok(QuantumRegister {
            qvars: sorted,
            amps,
        })
    }
}
