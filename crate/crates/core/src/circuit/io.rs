//! Circuit and measurement (de)serialization. Matrix entries are stored as
//! decimal strings (shortest round-trip formatting), so files reproduce the
//! exact floating-point values on load.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, Measurement, QubitId};
use crate::error::{Error, Result};

type ComplexStr = [String; 2];

fn encode_c(z: Complex64) -> ComplexStr {
    [format!("{}", z.re), format!("{}", z.im)]
}

fn decode_c(s: &ComplexStr) -> Result<Complex64> {
    let parse = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::Validation(format!("bad decimal literal {t:?}")))
    };
    Ok(Complex64::new(parse(&s[0])?, parse(&s[1])?))
}

fn encode_m2(m: &Matrix2<Complex64>) -> Vec<ComplexStr> {
    (0..2)
        .flat_map(|r| (0..2).map(move |c| (r, c)))
        .map(|(r, c)| encode_c(m[(r, c)]))
        .collect()
}

fn decode_m2(v: &[ComplexStr]) -> Result<Matrix2<Complex64>> {
    if v.len() != 4 {
        return Err(Error::Validation(format!("2x2 matrix needs 4 entries, got {}", v.len())));
    }
    let mut m = Matrix2::zeros();
    for (i, s) in v.iter().enumerate() {
        m[(i / 2, i % 2)] = decode_c(s)?;
    }
    Ok(m)
}

fn encode_m4(m: &Matrix4<Complex64>) -> Vec<ComplexStr> {
    (0..4)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| encode_c(m[(r, c)]))
        .collect()
}

fn decode_m4(v: &[ComplexStr]) -> Result<Matrix4<Complex64>> {
    if v.len() != 16 {
        return Err(Error::Validation(format!("4x4 matrix needs 16 entries, got {}", v.len())));
    }
    let mut m = Matrix4::zeros();
    for (i, s) in v.iter().enumerate() {
        m[(i / 4, i % 4)] = decode_c(s)?;
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct GateRepr {
    kind: String,
    qubits: Vec<QubitId>,
    time: usize,
    /// Row-major `[re, im]` decimal-string pairs.
    matrix: Vec<ComplexStr>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    d: usize,
    r: f64,
    l: f64,
    #[serde(rename = "T")]
    time_steps: usize,
    positions: BTreeMap<QubitId, Vec<f64>>,
    gates: Vec<GateRepr>,
}

pub fn circuit_to_json(c: &Circuit) -> Result<String> {
    let gates = c
        .gates
        .iter()
        .map(|g| match g {
            Gate::Single { qubit, time, matrix } => GateRepr {
                kind: "single".into(),
                qubits: vec![*qubit],
                time: *time,
                matrix: encode_m2(matrix),
            },
            Gate::Two { qubit_a, qubit_b, time, matrix } => GateRepr {
                kind: "two".into(),
                qubits: vec![*qubit_a, *qubit_b],
                time: *time,
                matrix: encode_m4(matrix),
            },
        })
        .collect();
    let repr = CircuitRepr {
        d: c.d,
        r: c.min_spacing,
        l: c.gate_range,
        time_steps: c.time_steps,
        positions: c.positions.clone(),
        gates,
    };
    serde_json::to_string_pretty(&repr).map_err(|e| Error::json("serializing circuit", e))
}

pub fn circuit_from_json(text: &str) -> Result<Circuit> {
    let repr: CircuitRepr =
        serde_json::from_str(text).map_err(|e| Error::json("parsing circuit", e))?;
    let mut gates = Vec::with_capacity(repr.gates.len());
    for g in &repr.gates {
        let gate = match (g.kind.as_str(), g.qubits.as_slice()) {
            ("single", [q]) => Gate::Single { qubit: *q, time: g.time, matrix: decode_m2(&g.matrix)? },
            ("two", [a, b]) => Gate::Two {
                qubit_a: *a,
                qubit_b: *b,
                time: g.time,
                matrix: decode_m4(&g.matrix)?,
            },
            _ => {
                return Err(Error::Validation(format!(
                    "gate kind {:?} with {} qubits",
                    g.kind,
                    g.qubits.len()
                )))
            }
        };
        gates.push(gate);
    }
    let circuit = Circuit {
        d: repr.d,
        positions: repr.positions,
        min_spacing: repr.r,
        gate_range: repr.l,
        gates,
        time_steps: repr.time_steps,
    };
    circuit.validate()?;
    Ok(circuit)
}

#[derive(Serialize, Deserialize)]
struct MeasurementRepr {
    projectors: BTreeMap<QubitId, Vec<ComplexStr>>,
}

pub fn measurement_to_json(m: &Measurement) -> Result<String> {
    let repr = MeasurementRepr {
        projectors: m.projectors.iter().map(|(&q, p)| (q, encode_m2(p))).collect(),
    };
    serde_json::to_string_pretty(&repr).map_err(|e| Error::json("serializing measurement", e))
}

pub fn measurement_from_json(text: &str) -> Result<Measurement> {
    let repr: MeasurementRepr =
        serde_json::from_str(text).map_err(|e| Error::json("parsing measurement", e))?;
    let mut m = Measurement::default();
    for (q, entries) in &repr.projectors {
        m.projectors.insert(*q, decode_m2(entries)?);
    }
    m.validate()?;
    Ok(m)
}

pub fn save_circuit(path: &Path, c: &Circuit) -> Result<()> {
    std::fs::write(path, circuit_to_json(c)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    circuit_from_json(&text)
}

pub fn save_measurement(path: &Path, m: &Measurement) -> Result<()> {
    std::fs::write(path, measurement_to_json(m)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_measurement(path: &Path) -> Result<Measurement> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    measurement_from_json(&text)
}
