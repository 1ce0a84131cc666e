//! Versioned line-oriented text form of a [`Circuit`].
//!
//! ```text
//! hqrl-circuit 1
//! qubits 2
//! h 0
//! ry 1 0.25 @0
//! cz 0 1
//! ```
//!
//! Angles are written with Rust's shortest round-trip float formatting, so
//! parsing reproduces them bit-exactly. A trailing `@k` marks trainable
//! parameter `k`.

use super::{Circuit, Gate, QuantumError, Result};
use std::fmt::Write;

pub const CIRCUIT_TEXT_VERSION: u32 = 1;
const MAGIC: &str = "hqrl-circuit";

fn parse_err(line: usize, reason: impl Into<String>) -> QuantumError {
    QuantumError::Parse {
        line,
        reason: reason.into(),
    }
}

impl Circuit {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {CIRCUIT_TEXT_VERSION}\nqubits {}\n", self.n_qubits());
        for op in self.ops() {
            match op.gate {
                Gate::H(q) => writeln!(out, "h {q}"),
                Gate::Cz(a, b) => writeln!(out, "cz {a} {b}"),
                Gate::Ry(q, a) | Gate::Rz(q, a) => {
                    write!(out, "{} {q} {a:?}", op.gate.name()).unwrap();
                    if let Some(p) = op.param {
                        write!(out, " @{p}").unwrap();
                    }
                    writeln!(out)
                }
            }
            .unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(MAGIC) {
            return Err(parse_err(ln, "missing circuit header"));
        }
        let version: u32 = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(ln, "missing version"))?;
        if version != CIRCUIT_TEXT_VERSION {
            return Err(parse_err(ln, format!("unsupported version {version}")));
        }
        let (ln, qline) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing qubit count"))?;
        let n: usize = qline
            .strip_prefix("qubits ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, "expected 'qubits N'"))?;
        let mut circuit = Circuit::new(n)?;
        for (ln, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let idx = |i: usize| -> Result<usize> {
                tok.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(ln, format!("bad qubit index in '{line}'")))
            };
            match tok[0] {
                "h" if tok.len() == 2 => circuit.push(Gate::H(idx(1)?))?,
                "cz" if tok.len() == 3 => circuit.push(Gate::Cz(idx(1)?, idx(2)?))?,
                "ry" | "rz" if (3..=4).contains(&tok.len()) => {
                    let q = idx(1)?;
                    let a: f64 = tok[2]
                        .parse()
                        .map_err(|_| parse_err(ln, format!("bad angle '{}'", tok[2])))?;
                    let gate = if tok[0] == "ry" { Gate::Ry(q, a) } else { Gate::Rz(q, a) };
                    match tok.get(3) {
                        None => circuit.push(gate)?,
                        Some(p) => {
                            let p: usize = p
                                .strip_prefix('@')
                                .and_then(|p| p.parse().ok())
                                .ok_or_else(|| parse_err(ln, format!("bad parameter marker '{p}'")))?;
                            circuit.push_trainable(gate, p)?
                        }
                    }
                }
                _ => return Err(parse_err(ln, format!("unrecognised gate line '{line}'"))),
            }
        }
        Ok(circuit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(angles in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let mut c = Circuit::new(3).unwrap();
            for (i, a) in angles.iter().enumerate() {
                let q = i % 3;
                c.push(Gate::H(q)).unwrap();
                if i % 2 == 0 {
                    c.push_trainable(Gate::Ry(q, *a), i).unwrap();
                } else {
                    c.push(Gate::Rz(q, *a)).unwrap();
                }
                c.push(Gate::Cz(q, (q + 1) % 3)).unwrap();
            }
            let back = Circuit::from_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(Circuit::from_text("").is_err());
        assert!(Circuit::from_text("hqrl-circuit 2\nqubits 1\n").is_err());
        assert!(Circuit::from_text("hqrl-circuit 1\nqubits 1\nx 0\n").is_err());
        assert!(Circuit::from_text("hqrl-circuit 1\nqubits 1\nry 0 nope\n").is_err());
        assert!(Circuit::from_text("hqrl-circuit 1\nqubits 1\nh 3\n").is_err());
        assert!(Circuit::from_text("hqrl-circuit 1\nqubits 2\nry 0 0.1 #1\n").is_err());
    }
}
