use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;

use super::{QuantumError, REGISTER_TOL};

/// A named unitary on `arity` qubits, stored as a dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGate {
    name: String,
    arity: usize,
    matrix: Vec<Complex64>,
}

impl UnitaryGate {
    /// Validates shape and unitarity (`U†U = I` within 1e-10).
    pub fn new(name: &str, arity: usize, matrix: Vec<Complex64>) -> Result<Self, QuantumError> {
        if arity == 0 {
            return Err(QuantumError::InvalidRegister(format!(
                "gate `{name}` must act on at least one qubit"
            )));
        }
        let dim = 1usize << arity;
        if matrix.len() != dim * dim {
            return Err(QuantumError::InvalidRegister(format!(
                "gate `{name}` needs {} entries, got {}",
                dim * dim,
                matrix.len()
            )));
        }
        let gate = UnitaryGate {
            name: name.to_string(),
            arity,
            matrix,
        };
        if !gate.is_unitary(REGISTER_TOL) {
            return Err(QuantumError::NotUnitary(name.to_string()));
        }
        Ok(gate)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let dot: Complex64 = (0..d)
                    .map(|k| self.matrix[k * d + i].conj() * self.matrix[k * d + j])
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                (dot - expected).norm() <= tol
            })
        })
    }
}

/// The gates a term may name, keyed by identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct GateRegistry {
    gates: BTreeMap<String, UnitaryGate>,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl GateRegistry {
    /// `I, H, X, Y, Z, S, T` on one qubit and `CNOT, CZ, SWAP` on two.
    pub fn builtin() -> Self {
        let o = re(0.0);
        let l = re(1.0);
        let h = re(FRAC_1_SQRT_2);
        let i = Complex64::new(0.0, 1.0);
        let table: Vec<(&str, usize, Vec<Complex64>)> = vec![
            ("I", 1, vec![l, o, o, l]),
            ("H", 1, vec![h, h, h, -h]),
            ("X", 1, vec![o, l, l, o]),
            ("Y", 1, vec![o, -i, i, o]),
            ("Z", 1, vec![l, o, o, -l]),
            ("S", 1, vec![l, o, o, i]),
            ("T", 1, vec![l, o, o, Complex64::from_polar(1.0, FRAC_PI_4)]),
            (
                "CNOT",
                2,
                vec![l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o],
            ),
            (
                "CZ",
                2,
                vec![l, o, o, o, o, l, o, o, o, o, l, o, o, o, o, -l],
            ),
            (
                "SWAP",
                2,
                vec![l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l],
            ),
        ];
        let gates = table
            .into_iter()
            .map(|(n, a, m)| {
                let g = UnitaryGate::new(n, a, m).expect("built-in gates are unitary");
                (n.to_string(), g)
            })
            .collect();
        GateRegistry { gates }
    }

    /// A registry holding only the named built-in gates.
    pub fn builtin_subset(names: &[&str]) -> Self {
        let all = Self::builtin();
        let gates = all
            .gates
            .into_iter()
            .filter(|(n, _)| names.contains(&n.as_str()))
            .collect();
        GateRegistry { gates }
    }

    pub fn get(&self, name: &str) -> Option<&UnitaryGate> {
        self.gates.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gates.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.gates.keys().map(String::as_str)
    }

    pub fn insert(&mut self, gate: UnitaryGate) {
        self.gates.insert(gate.name.clone(), gate);
    }

    /// Adds the gates of an extension file.
    ///
    /// Each stanza is a header line `gate NAME ARITY` followed by `2^ARITY`
    /// rows of `2^ARITY` whitespace-separated `re,im` entries. `#` starts a
    /// comment; blank lines are ignored.
    pub fn extend_from_str(&mut self, src: &str) -> Result<(), QuantumError> {
        let err = |line: usize, message: String| QuantumError::GateFile { line, message };
        let mut lines = src
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();
        while let Some((lineno, header)) = lines.next() {
            let words: Vec<&str> = header.split_whitespace().collect();
            let [kw, name, arity] = words.as_slice() else {
                return Err(err(lineno, "expected `gate NAME ARITY`".into()));
            };
            if *kw != "gate" {
                return Err(err(lineno, format!("expected `gate`, found `{kw}`")));
            }
            let valid_name = name.starts_with(|c: char| c.is_ascii_uppercase())
                && name.chars().all(|c| c.is_ascii_alphanumeric());
            if !valid_name {
                return Err(err(
                    lineno,
                    format!("gate name `{name}` must be capitalized alphanumeric"),
                ));
            }
            let arity: usize = arity
                .parse()
                .ok()
                .filter(|a| (1..=6).contains(a))
                .ok_or_else(|| err(lineno, format!("bad arity `{arity}`")))?;
            let dim = 1usize << arity;
            let mut matrix = Vec::with_capacity(dim * dim);
            for _ in 0..dim {
                let (rowno, row) = lines
                    .next()
                    .ok_or_else(|| err(lineno, format!("gate `{name}` is missing matrix rows")))?;
                let entries: Vec<&str> = row.split_whitespace().collect();
                if entries.len() != dim {
                    return Err(err(
                        rowno,
                        format!("expected {dim} entries, found {}", entries.len()),
                    ));
                }
                for e in entries {
                    let (a, b) = e
                        .split_once(',')
                        .ok_or_else(|| err(rowno, format!("entry `{e}` is not `re,im`")))?;
                    let parse = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| err(rowno, format!("bad number `{s}`")))
                    };
                    matrix.push(Complex64::new(parse(a)?, parse(b)?));
                }
            }
            let gate =
                UnitaryGate::new(name, arity, matrix).map_err(|e| err(lineno, e.to_string()))?;
            self.insert(gate);
        }
        Ok(())
    }
}

impl Default for GateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry() {
        let g = GateRegistry::builtin();
        let names: Vec<&str> = g.names().collect();
        assert_eq!(names.len(), 10);
        for n in ["I", "H", "X", "Y", "Z", "S", "T"] {
            assert_eq!(g.get(n).unwrap().arity(), 1);
        }
        for n in ["CNOT", "CZ", "SWAP"] {
            assert_eq!(g.get(n).unwrap().arity(), 2);
        }
        assert!(g.get("Q").is_none());
    }

    #[test]
    fn extension_file() {
        let mut g = GateRegistry::builtin_subset(&["H"]);
        let src = "# square root of NOT\ngate SX 1\n0.5,0.5 0.5,-0.5\n0.5,-0.5 0.5,0.5\n";
        g.extend_from_str(src).unwrap();
        assert_eq!(g.get("SX").unwrap().arity(), 1);
        assert!(!g.contains("X"));
    }

    #[test]
    fn extension_rejects_non_unitary() {
        let mut g = GateRegistry::builtin();
        let e = g
            .extend_from_str("gate BAD 1\n1,0 1,0\n0,0 1,0\n")
            .unwrap_err();
        assert!(matches!(e, QuantumError::GateFile { line: 1, .. }), "{e}");
        let e = g.extend_from_str("gate X2 1\n1,0\n").unwrap_err();
        assert!(matches!(e, QuantumError::GateFile { line: 2, .. }), "{e}");
        assert!(g
            .extend_from_str("gate lower 1\n1,0 0,0\n0,0 1,0\n")
            .is_err());
    }
}
