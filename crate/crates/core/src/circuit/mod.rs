//! Quantum circuit IR, the conversion of `<0| U^dag P U |0>` into an embedded
//! tensor network, the analytic circuit bounds, naive baselines, and the
//! dense statevector oracle.

pub mod convert;
pub mod io;

pub use convert::{circuit_to_network, contract_converted, split_two_qubit_gate, ConvertedCircuit};

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tncore::{a2_prime, cost_exponent_coefficient, separator_constant};

pub type QubitId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single {
        qubit: QubitId,
        time: usize,
        matrix: Matrix2<Complex64>,
    },
    Two {
        qubit_a: QubitId,
        qubit_b: QubitId,
        time: usize,
        matrix: Matrix4<Complex64>,
    },
}

impl Gate {
    pub fn time(&self) -> usize {
        match self {
            Gate::Single { time, .. } | Gate::Two { time, .. } => *time,
        }
    }

    pub fn touches(&self, q: QubitId) -> bool {
        match self {
            Gate::Single { qubit, .. } => *qubit == q,
            Gate::Two { qubit_a, qubit_b, .. } => *qubit_a == q || *qubit_b == q,
        }
    }
}

/// A quantum circuit on qubits embedded in `R^d`, with minimal spacing `r`
/// between qubits and maximum two-qubit gate range `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub d: usize,
    pub positions: BTreeMap<QubitId, Vec<f64>>,
    /// Minimal qubit spacing `r`.
    pub min_spacing: f64,
    /// Maximum two-qubit gate range `l`.
    pub gate_range: f64,
    /// Time-ordered gate list.
    pub gates: Vec<Gate>,
    /// Number of time steps `T`.
    pub time_steps: usize,
}

const UNITARY_TOL: f64 = 1e-10;

/// Largest entry magnitude of a complex matrix.
pub(crate) fn max_abs<R, C, S>(m: &nalgebra::Matrix<Complex64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::storage::Storage<Complex64, R, C>,
{
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn unitarity_defect2(m: &Matrix2<Complex64>) -> f64 {
    max_abs(&(m.adjoint() * m - Matrix2::identity()))
}

fn unitarity_defect4(m: &Matrix4<Complex64>) -> f64 {
    max_abs(&(m.adjoint() * m - Matrix4::identity()))
}

impl Circuit {
    pub fn qubit_count(&self) -> usize {
        self.positions.len()
    }

    /// Structural checks: valid qubit references, gate unitarity, gate range,
    /// time bounds, and pairwise spacing (via a spatial hash, so large
    /// instances stay cheap).
    pub fn validate(&self) -> Result<()> {
        for (q, p) in &self.positions {
            if p.len() != self.d || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("qubit {q} has a bad position")));
            }
        }
        for (idx, gate) in self.gates.iter().enumerate() {
            let defect = match gate {
                Gate::Single { qubit, matrix, .. } => {
                    if !self.positions.contains_key(qubit) {
                        return Err(Error::Validation(format!("gate {idx}: unknown qubit {qubit}")));
                    }
                    unitarity_defect2(matrix)
                }
                Gate::Two { qubit_a, qubit_b, matrix, .. } => {
                    for q in [qubit_a, qubit_b] {
                        if !self.positions.contains_key(q) {
                            return Err(Error::Validation(format!("gate {idx}: unknown qubit {q}")));
                        }
                    }
                    if qubit_a == qubit_b {
                        return Err(Error::Validation(format!(
                            "gate {idx}: two-qubit gate on a single qubit {qubit_a}"
                        )));
                    }
                    let span = crate::geometry::dist(&self.positions[qubit_a], &self.positions[qubit_b]);
                    if span > self.gate_range + 1e-9 {
                        return Err(Error::Validation(format!(
                            "gate {idx}: span {span} exceeds range {}",
                            self.gate_range
                        )));
                    }
                    unitarity_defect4(matrix)
                }
            };
            if defect >= UNITARY_TOL {
                return Err(Error::Validation(format!(
                    "gate {idx} is not unitary (defect {defect:.2e})"
                )));
            }
            if gate.time() >= self.time_steps.max(1) {
                return Err(Error::Validation(format!(
                    "gate {idx} at time {} outside 0..{}",
                    gate.time(),
                    self.time_steps
                )));
            }
        }
        self.check_spacing()
    }

    fn check_spacing(&self) -> Result<()> {
        let r = self.min_spacing;
        if r <= 0.0 {
            return Err(Error::Validation("min_spacing must be positive".into()));
        }
        let cell = r;
        let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|&x| (x / cell).floor() as i64).collect() };
        let mut grid: std::collections::HashMap<Vec<i64>, Vec<QubitId>> = Default::default();
        for (&q, p) in &self.positions {
            grid.entry(key(p)).or_default().push(q);
        }
        for (&q, p) in &self.positions {
            let base = key(p);
            let mut offsets = vec![-1i64; self.d];
            loop {
                let ck: Vec<i64> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
                if let Some(others) = grid.get(&ck) {
                    for &other in others {
                        if other > q
                            && crate::geometry::dist(p, &self.positions[&other]) < r - 1e-9
                        {
                            return Err(Error::Validation(format!(
                                "qubits {q} and {other} closer than min_spacing {r}"
                            )));
                        }
                    }
                }
                let mut i = 0;
                loop {
                    if i == self.d {
                        return self.done_spacing();
                    }
                    if offsets[i] < 1 {
                        offsets[i] += 1;
                        break;
                    }
                    offsets[i] = -1;
                    i += 1;
                }
            }
        }
        Ok(())
    }

    fn done_spacing(&self) -> Result<()> {
        Ok(())
    }

    /// Side length `L` when the qubits form a hypercubic `L^d` lattice with
    /// unit-integer coordinates (up to translation).
    pub fn hypercubic_side(&self) -> Option<usize> {
        let n = self.positions.len();
        if n == 0 {
            return None;
        }
        let l = (n as f64).powf(1.0 / self.d as f64).round() as usize;
        if l.pow(self.d as u32) != n {
            return None;
        }
        let mins: Vec<f64> = (0..self.d)
            .map(|ax| {
                self.positions
                    .values()
                    .map(|p| p[ax])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut seen = std::collections::HashSet::new();
        for p in self.positions.values() {
            let mut cell = Vec::with_capacity(self.d);
            for ax in 0..self.d {
                let c = p[ax] - mins[ax];
                let r = c.round();
                if (c - r).abs() > 1e-9 || r < 0.0 || r >= l as f64 {
                    return None;
                }
                cell.push(r as i64);
            }
            if !seen.insert(cell) {
                return None;
            }
        }
        Some(l)
    }
}

/// Per-qubit projectors of the measured observable `P = tensor_i P_i`;
/// qubits without an entry default to `|0><0|`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Measurement {
    pub projectors: BTreeMap<QubitId, Matrix2<Complex64>>,
}

pub fn ket0_projector() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    )
}

impl Measurement {
    pub fn projector(&self, q: QubitId) -> Matrix2<Complex64> {
        self.projectors.get(&q).copied().unwrap_or_else(ket0_projector)
    }

    pub fn validate(&self) -> Result<()> {
        for (q, p) in &self.projectors {
            if max_abs(&(p * p - p)) >= UNITARY_TOL || max_abs(&(p.adjoint() - p)) >= UNITARY_TOL {
                return Err(Error::Validation(format!(
                    "measurement on qubit {q} is not a projector"
                )));
            }
        }
        Ok(())
    }
}

/// Two-qubit gate counts per qubit: `f(x_i)`, `F = max f`, and `sum f`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GateProfile {
    pub f: BTreeMap<QubitId, u64>,
    pub max_f: u64,
    pub sum_f: u64,
}

impl GateProfile {
    pub fn from_circuit(c: &Circuit) -> Self {
        let mut f: BTreeMap<QubitId, u64> = c.positions.keys().map(|&q| (q, 0)).collect();
        for gate in &c.gates {
            if let Gate::Two { qubit_a, qubit_b, .. } = gate {
                *f.entry(*qubit_a).or_insert(0) += 1;
                *f.entry(*qubit_b).or_insert(0) += 1;
            }
        }
        let max_f = f.values().copied().max().unwrap_or(0);
        let sum_f = f.values().sum();
        GateProfile { f, max_f, sum_f }
    }
}

/// log2 of the general circuit simulation bound:
/// `(2 sum_f)^(1/log2((d+2)/(d+1))) * 2^(1 + 8 a_d (1+l/r) F^(1/d) sum_f^(1-1/d))`.
pub fn circuit_bound(profile: &GateProfile, d: usize, l: f64, r: f64) -> Result<f64> {
    if profile.sum_f < 1 {
        return Err(Error::Parameter("bound requires at least one two-qubit gate".into()));
    }
    let c_d = separator_constant(d)
        .ok_or_else(|| Error::Parameter(format!("no tabulated separator constant for d = {d}")))?;
    let a = cost_exponent_coefficient(d, c_d);
    let df = d as f64;
    let sum_f = profile.sum_f as f64;
    let ratio = (df + 2.0) / (df + 1.0);
    Ok((2.0 * sum_f).log2() / ratio.log2()
        + 1.0
        + 8.0 * a * (1.0 + l / r) * (profile.max_f as f64).powf(1.0 / df) * sum_f.powf(1.0 - 1.0 / df))
}

/// log2 of the tighter planar bound for `d = 2`, nearest-neighbor gates:
/// `S^(1/log2(3/2)) * 2^(1 + 4 a_2' sqrt(S))` with `S = sum_i f_i (2 + f_i/2)`.
pub fn circuit_planar_bound(profile: &GateProfile, d: usize, l: f64, r: f64) -> Result<f64> {
    if d != 2 {
        return Err(Error::Parameter(format!("planar bound requires d = 2, got {d}")));
    }
    if (l - r).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "planar bound requires nearest-neighbor gates (l = r), got l = {l}, r = {r}"
        )));
    }
    if profile.sum_f < 1 {
        return Err(Error::Parameter("bound requires at least one two-qubit gate".into()));
    }
    let s: f64 = profile
        .f
        .values()
        .map(|&fi| fi as f64 * (2.0 + fi as f64 / 2.0))
        .sum();
    Ok(s.log2() / 1.5f64.log2() + 1.0 + 4.0 * a2_prime() * s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineBounds {
    pub sidewise_log2: f64,
    pub explicit_log2: f64,
}

/// Count of qubits untouched by any gate.
pub fn idle_qubit_count(c: &Circuit) -> usize {
    let mut touched = std::collections::BTreeSet::new();
    for g in &c.gates {
        match g {
            Gate::Single { qubit, .. } => {
                touched.insert(*qubit);
            }
            Gate::Two {
                qubit_a, qubit_b, ..
            } => {
                touched.insert(*qubit_a);
                touched.insert(*qubit_b);
            }
        }
    }
    c.positions.keys().filter(|q| !touched.contains(q)).count()
}

/// log2 of the explicit time-evolution cost `T N 2^(2 + N - #idle)`.
pub fn explicit_bound(c: &Circuit) -> f64 {
    let n = c.qubit_count() as f64;
    let t = c.time_steps.max(1) as f64;
    let idle = idle_qubit_count(c) as f64;
    (t * n).log2() + 2.0 + (n - idle)
}

/// log2 of the side-wise contraction cost `2^(1 + 4 F L^(d-1)) L`; requires
/// a hypercubic lattice.
pub fn sidewise_bound(c: &Circuit, profile: &GateProfile) -> Result<f64> {
    let l = c.hypercubic_side().ok_or_else(|| {
        Error::Parameter("side-wise bound requires a hypercubic qubit lattice".into())
    })?;
    let lf = l as f64;
    Ok(1.0 + 4.0 * profile.max_f as f64 * lf.powi(c.d as i32 - 1) + lf.log2())
}

pub fn baseline_bounds(c: &Circuit) -> Result<BaselineBounds> {
    let profile = GateProfile::from_circuit(c);
    Ok(BaselineBounds {
        sidewise_log2: sidewise_bound(c, &profile)?,
        explicit_log2: explicit_bound(c),
    })
}

pub const DEFAULT_STATEVECTOR_CAP: usize = 24;

/// Dense statevector evaluation of `<0| U^dag P U |0>`; the oracle the
/// tensor-network route is checked against on small instances.
pub fn statevector_expectation(c: &Circuit, m: &Measurement) -> Result<f64> {
    statevector_expectation_capped(c, m, DEFAULT_STATEVECTOR_CAP)
}

pub fn statevector_expectation_capped(
    c: &Circuit,
    m: &Measurement,
    cap: usize,
) -> Result<f64> {
    let qubits: Vec<QubitId> = c.positions.keys().copied().collect();
    let n = qubits.len();
    if n > cap {
        return Err(Error::Resource(format!(
            "{n} qubits exceed the statevector cap of {cap}"
        )));
    }
    let index_of: BTreeMap<QubitId, usize> =
        qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let dim = 1usize << n;
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    state[0] = Complex64::new(1.0, 0.0);

    for gate in &c.gates {
        match gate {
            Gate::Single { qubit, matrix, .. } => {
                apply_single(&mut state, index_of[qubit], matrix);
            }
            Gate::Two { qubit_a, qubit_b, matrix, .. } => {
                apply_two(&mut state, index_of[qubit_a], index_of[qubit_b], matrix);
            }
        }
    }

    let mut projected = state.clone();
    for &q in &qubits {
        apply_single(&mut projected, index_of[&q], &m.projector(q));
    }
    let value: Complex64 = state
        .iter()
        .zip(&projected)
        .map(|(a, b)| a.conj() * b)
        .sum();
    debug_assert!(value.im.abs() < 1e-10 * value.re.abs().max(1.0));
    Ok(value.re)
}

fn apply_single(state: &mut [Complex64], bit: usize, u: &Matrix2<Complex64>) {
    let mask = 1usize << bit;
    for idx in 0..state.len() {
        if idx & mask == 0 {
            let (a, b) = (state[idx], state[idx | mask]);
            state[idx] = u[(0, 0)] * a + u[(0, 1)] * b;
            state[idx | mask] = u[(1, 0)] * a + u[(1, 1)] * b;
        }
    }
}

fn apply_two(state: &mut [Complex64], bit_a: usize, bit_b: usize, u: &Matrix4<Complex64>) {
    let (ma, mb) = (1usize << bit_a, 1usize << bit_b);
    for idx in 0..state.len() {
        if idx & ma == 0 && idx & mb == 0 {
            // Basis order: row index 2a + b.
            let i00 = idx;
            let i01 = idx | mb;
            let i10 = idx | ma;
            let i11 = idx | ma | mb;
            let v = [state[i00], state[i01], state[i10], state[i11]];
            for (row, &target) in [i00, i01, i10, i11].iter().enumerate() {
                state[target] = (0..4).map(|col| u[(row, col)] * v[col]).sum();
            }
        }
    }
}

/// Haar-random single-qubit unitary: QR of a Ginibre matrix with the phase
/// convention fixed by the R diagonal.
pub fn haar_unitary2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<Complex64> {
    let g = Matrix2::from_fn(|_, _| gaussian_complex(rng));
    fix_phases(nalgebra::linalg::QR::new(g))
}

pub fn haar_unitary4<R: Rng + ?Sized>(rng: &mut R) -> Matrix4<Complex64> {
    let g = Matrix4::from_fn(|_, _| gaussian_complex(rng));
    fix_phases4(nalgebra::linalg::QR::new(g))
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn fix_phases(qr: nalgebra::linalg::QR<Complex64, nalgebra::U2, nalgebra::U2>) -> Matrix2<Complex64> {
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..2 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..2 {
            out[(i, j)] *= phase;
        }
    }
    out
}

fn fix_phases4(qr: nalgebra::linalg::QR<Complex64, nalgebra::U4, nalgebra::U4>) -> Matrix4<Complex64> {
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..4 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..4 {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// A random rank-1 projector `|v><v|`.
pub fn random_projector<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<Complex64> {
    let mut v = [gaussian_complex(rng), gaussian_complex(rng)];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    v[0] /= norm;
    v[1] /= norm;
    Matrix2::new(
        v[0] * v[0].conj(),
        v[0] * v[1].conj(),
        v[1] * v[0].conj(),
        v[1] * v[1].conj(),
    )
}
