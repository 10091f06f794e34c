//! Identities of destructive measurements on random registers.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::quantum::{GateRegistry, QuantumRegister, REGISTER_TOL};

const NAMES: [&str; 4] = ["a", "b", "c", "d"];
const FRESH: &str = "s";

#[derive(Clone, Debug, Default, Serialize)]
pub struct MeasurementReport {
    pub registers: usize,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl MeasurementReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

/// `M_{r,0}†M_{r,0} + M_{r,1}†M_{r,1}` on `n` qubits, as a dense matrix
/// built column by column from basis states.
fn completeness_matrix(n: usize, r: &str) -> Vec<Vec<Complex64>> {
    let dim = 1usize << n;
    let names: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();
    let columns: Vec<[Vec<Complex64>; 2]> = (0..dim)
        .map(|j| {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[j] = Complex64::new(1.0, 0.0);
            let e = QuantumRegister::from_amplitudes(names.clone(), amps).expect("basis state");
            [false, true].map(|c| {
                e.raw_measure(r, c)
                    .expect("r present")
                    .amplitudes()
                    .to_vec()
            })
        })
        .collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    (0..2)
                        .map(|c| {
                            columns[i][c]
                                .iter()
                                .zip(&columns[j][c])
                                .map(|(a, b)| a.conj() * b)
                                .sum::<Complex64>()
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn random_register(rng: &mut ChaCha8Rng, n: usize, index: usize) -> QuantumRegister {
    let names: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();
    let dim = 1usize << n;
    if index % 50 == 49 {
        return QuantumRegister::zero(&names);
    }
    let mut amps: Vec<Complex64> = if index % 10 == 9 {
        // a basis state, so that some outcomes have probability 0
        let k = rng.gen_range(0..dim);
        (0..dim)
            .map(|i| Complex64::new(f64::from(u8::from(i == k)), 0.0))
            .collect()
    } else {
        (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    QuantumRegister::from_amplitudes(names, amps).expect("normalized")
}

/// Checks the completeness condition, the interaction of raw and
/// normalized measurements with tensoring, with each other and with
/// unitaries, and the probability-product identity, on `count` seeded
/// random registers of 1 to 4 qubits.
pub fn check_measurement_algebra(seed: u64, count: usize) -> MeasurementReport {
    let mut report = MeasurementReport {
        registers: count,
        ..MeasurementReport::default()
    };
    for n in 1..=NAMES.len() {
        for r in &NAMES[..n] {
            let m = completeness_matrix(n, r);
            let ok = m.iter().enumerate().all(|(i, row)| {
                row.iter().enumerate().all(|(j, x)| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    (x - id).norm() <= REGISTER_TOL
                })
            });
            report.check(ok, || format!("completeness matrix on {n} qubits at {r}"));
        }
    }
    let gates = GateRegistry::builtin();
    let gate_names: Vec<&str> = gates.names().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for index in 0..count {
        let n = 1 + index % NAMES.len();
        let q = random_register(&mut rng, n, index);
        check_register(&mut report, &q, &gates, &gate_names, &mut rng);
    }
    report
}

fn check_register(
    report: &mut MeasurementReport,
    q: &QuantumRegister,
    gates: &GateRegistry,
    gate_names: &[&str],
    rng: &mut ChaCha8Rng,
) {
    let names: Vec<String> = q.qvars().to_vec();
    let eq = |a: &QuantumRegister, b: &QuantumRegister| a.approx_eq(b, REGISTER_TOL);
    let close = |a: f64, b: f64| (a - b).abs() <= REGISTER_TOL;
    for r in &names {
        let total: f64 = [false, true]
            .iter()
            .map(|&c| q.outcome_probability(r, c).unwrap())
            .sum();
        report.check(close(total, q.norm_sqr()), || {
            format!("completeness at {r} on {q:?}")
        });
        for c in [false, true] {
            let (_, m) = q.normalized_measure(r, c).unwrap();
            report.check(m.is_register() || m.is_zero(), || {
                format!("m_{r},{} is not a register on {q:?}", u8::from(c))
            });
            for d in [false, true] {
                let ext = q.tensor_fresh(FRESH, d).unwrap();
                let lhs = ext.raw_measure(r, c).unwrap();
                let rhs = q.raw_measure(r, c).unwrap().tensor_fresh(FRESH, d).unwrap();
                report.check(eq(&lhs, &rhs), || {
                    format!("raw measure/tensor at {r} on {q:?}")
                });
                report.check(
                    close(
                        ext.outcome_probability(r, c).unwrap(),
                        q.outcome_probability(r, c).unwrap(),
                    ),
                    || format!("probability under tensor at {r} on {q:?}"),
                );
                let lhs = ext.normalized_measure(r, c).unwrap().1;
                let rhs = q
                    .normalized_measure(r, c)
                    .unwrap()
                    .1
                    .tensor_fresh(FRESH, d)
                    .unwrap();
                report.check(eq(&lhs, &rhs), || {
                    format!("normalized measure/tensor at {r} on {q:?}")
                });
            }
        }
    }
    for r in &names {
        for s in &names {
            if r == s {
                continue;
            }
            for c in [false, true] {
                for d in [false, true] {
                    let rs = q.raw_measure(r, c).unwrap().raw_measure(s, d).unwrap();
                    let sr = q.raw_measure(s, d).unwrap().raw_measure(r, c).unwrap();
                    report.check(eq(&rs, &sr), || format!("raw measures {r},{s} on {q:?}"));
                    let (p_r, q_r) = q.normalized_measure(r, c).unwrap();
                    let (p_s, q_s) = q.normalized_measure(s, d).unwrap();
                    let (s_s, rs) = q_r.normalized_measure(s, d).unwrap();
                    let (s_r, sr) = q_s.normalized_measure(r, c).unwrap();
                    report.check(eq(&rs, &sr), || {
                        format!("normalized measures {r},{s} on {q:?}")
                    });
                    report.check(close(p_r * s_s, p_s * s_r), || {
                        format!("probability products {r},{s} on {q:?}")
                    });
                }
            }
        }
    }
    // a gate on qubits other than the measured one
    for r in &names {
        let others: Vec<&str> = names
            .iter()
            .filter(|x| *x != r)
            .map(String::as_str)
            .collect();
        let usable: Vec<&str> = gate_names
            .iter()
            .copied()
            .filter(|g| gates.get(g).unwrap().arity() <= others.len())
            .collect();
        let Some(name) = usable.choose(rng) else {
            continue;
        };
        let gate = gates.get(name).unwrap();
        let targets: Vec<&str> = others.choose_multiple(rng, gate.arity()).copied().collect();
        for c in [false, true] {
            let lhs = q
                .normalized_measure(r, c)
                .unwrap()
                .1
                .apply_unitary(gate, &targets)
                .unwrap();
            let rhs = q
                .apply_unitary(gate, &targets)
                .unwrap()
                .normalized_measure(r, c)
                .unwrap()
                .1;
            report.check(eq(&lhs, &rhs), || {
                format!("{name} on {targets:?} against m_{r} on {q:?}")
            });
        }
        let after = q.apply_unitary(gate, &targets).unwrap();
        report.check(close(after.norm_sqr(), q.norm_sqr()), || {
            format!("{name} changed the norm of {q:?}")
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold() {
        let r = check_measurement_algebra(11, 120);
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.checks > 1000);
    }

    #[test]
    fn completeness_matrix_is_identity() {
        let m = completeness_matrix(3, "b");
        assert_eq!(m.len(), 8);
        assert!((m[5][5] - 1.0).norm() < 1e-12);
        assert!(m[5][4].norm() < 1e-12);
    }

    #[test]
    fn broken_identity_is_reported() {
        let mut r = MeasurementReport::default();
        r.check(false, || "planted".to_string());
        assert_eq!(r.failures, ["planted"]);
    }
}
