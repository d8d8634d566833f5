//! Seeded generators for the three benchmark circuit families: IQP circuits
//! with sparse long-lived diagonal couplings, Sycamore-style cycled
//! nearest-neighbor circuits with idle qubits, and (2+1)-dimensional dense
//! brick circuits with Poisson-placed gate-free cavities.
//!
//! All generators are pure functions of their parameters (including the
//! seed) and produce circuits on the unit-spaced `L x L` grid with
//! nearest-neighbor gates (`r = l = 1`).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::circuit::{haar_unitary2, haar_unitary4, Circuit, Gate, QubitId};
use crate::error::{Error, Result};

fn grid_positions(l: usize) -> BTreeMap<QubitId, Vec<f64>> {
    let mut positions = BTreeMap::new();
    for y in 0..l {
        for x in 0..l {
            positions.insert(y * l + x, vec![x as f64, y as f64]);
        }
    }
    positions
}

fn base_circuit(l: usize, time_steps: usize) -> Circuit {
    Circuit {
        d: 2,
        positions: grid_positions(l),
        min_spacing: 1.0,
        gate_range: 1.0,
        gates: Vec::new(),
        time_steps,
    }
}

/// Nearest-neighbor bonds of the `L x L` grid, horizontal first, row-major.
fn grid_bonds(l: usize) -> Vec<(QubitId, QubitId)> {
    let mut bonds = Vec::new();
    for y in 0..l {
        for x in 0..l - 1 {
            bonds.push((y * l + x, y * l + x + 1));
        }
    }
    for y in 0..l - 1 {
        for x in 0..l {
            bonds.push((y * l + x, (y + 1) * l + x));
        }
    }
    bonds
}

// ---------------------------------------------------------------------------
// IQP

#[derive(Debug, Clone, PartialEq)]
pub struct IqpParams {
    pub l: usize,
    pub t: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl IqpParams {
    pub fn new(l: usize, seed: u64) -> Self {
        IqpParams { l, t: l * l, gamma: 3.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::Parameter(format!("IQP needs L >= 2, got {}", self.l)));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("bad gamma {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IqpStats {
    /// Pairs that passed the probability-`p` draw, before exclusion.
    pub offered: u64,
    /// Two-qubit gates actually placed.
    pub placed: u64,
}

fn phase_gate(phase: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        phase,
    )
}

/// IQP family: per step, each qubit gets `diag(1, e^{i pi m / 4})` with
/// probability 7/8; then nearest-neighbor pairs, visited in a fresh random
/// order, receive `diag(1,1,1,i^m)` with probability
/// `p = (3/4) gamma ln(N) / N`, skipping pairs with a qubit already coupled
/// this step.
pub fn gen_iqp(params: &IqpParams) -> Result<Circuit> {
    gen_iqp_with_stats(params).map(|(c, _)| c)
}

pub fn gen_iqp_with_stats(params: &IqpParams) -> Result<(Circuit, IqpStats)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.l * params.l;
    let p = (0.75 * params.gamma * (n as f64).ln() / n as f64).min(1.0);
    let mut circuit = base_circuit(params.l, params.t.max(1));
    let bonds = grid_bonds(params.l);
    let mut stats = IqpStats::default();

    for t in 0..params.t {
        for q in 0..n {
            if rng.gen_bool(7.0 / 8.0) {
                let m = rng.gen_range(0..8u32);
                let phase = Complex64::from_polar(1.0, std::f64::consts::PI * m as f64 / 4.0);
                circuit.gates.push(Gate::Single { qubit: q, time: t, matrix: phase_gate(phase) });
            }
        }
        let mut order = bonds.clone();
        order.shuffle(&mut rng);
        let mut used: BTreeSet<QubitId> = BTreeSet::new();
        for (a, b) in order {
            if !rng.gen_bool(p) {
                continue;
            }
            stats.offered += 1;
            if used.contains(&a) || used.contains(&b) {
                continue;
            }
            used.insert(a);
            used.insert(b);
            stats.placed += 1;
            let m = rng.gen_range(0..4u32);
            let mut gate = nalgebra::Matrix4::identity();
            gate[(3, 3)] = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * m as f64);
            circuit.gates.push(Gate::Two { qubit_a: a, qubit_b: b, time: t, matrix: gate });
        }
    }
    Ok((circuit, stats))
}

// ---------------------------------------------------------------------------
// Sycamore-style

/// Bond classes of the square grid: A/B horizontal at even/odd column
/// parity, C/D vertical at even/odd row parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondClass {
    A,
    B,
    C,
    D,
}

/// One period of cycles; each class appears twice.
pub fn default_cycle_pattern() -> Vec<BondClass> {
    use BondClass::*;
    vec![A, B, C, D, C, D, A, B]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SycamoreParams {
    pub l: usize,
    /// Number of periods `q`.
    pub q: usize,
    /// Probability that a qubit sits out a whole period.
    pub p_idle: f64,
    pub seed: u64,
    pub pattern: Vec<BondClass>,
}

impl SycamoreParams {
    pub fn new(l: usize, seed: u64) -> Self {
        SycamoreParams { l, q: 5, p_idle: 0.88, seed, pattern: default_cycle_pattern() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::Parameter(format!("Sycamore needs L >= 2, got {}", self.l)));
        }
        if !(0.0..=1.0).contains(&self.p_idle) {
            return Err(Error::Parameter(format!("p_idle {} not in [0, 1]", self.p_idle)));
        }
        if self.q < 1 || self.pattern.is_empty() {
            return Err(Error::Parameter("need at least one period and one cycle".into()));
        }
        Ok(())
    }
}

fn bond_class(l: usize, a: QubitId, b: QubitId) -> BondClass {
    let (ax, ay) = (a % l, a / l);
    if b == a + 1 {
        if ax % 2 == 0 { BondClass::A } else { BondClass::B }
    } else {
        debug_assert_eq!(b, a + l);
        if ay % 2 == 0 { BondClass::C } else { BondClass::D }
    }
}

/// Sycamore-style family: per period every qubit is idle with probability
/// `p_idle`; each cycle gives every active qubit one Haar-random
/// single-qubit gate, and every class bond with both endpoints active two
/// random two-qubit unitaries in immediate succession (the coupling is
/// applied twice per cycle). One cycle is one time step, so `T = 8q` for the
/// default pattern.
pub fn gen_sycamore(params: &SycamoreParams) -> Result<Circuit> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let l = params.l;
    let t_total = params.q * params.pattern.len();
    let mut circuit = base_circuit(l, t_total);
    let bonds = grid_bonds(l);
    let by_class: BTreeMap<u8, Vec<(QubitId, QubitId)>> = {
        let mut m: BTreeMap<u8, Vec<(QubitId, QubitId)>> = BTreeMap::new();
        for &(a, b) in &bonds {
            m.entry(bond_class(l, a, b) as u8).or_default().push((a, b));
        }
        m
    };

    for period in 0..params.q {
        let active: Vec<bool> = (0..l * l).map(|_| !rng.gen_bool(params.p_idle)).collect();
        for (cycle, class) in params.pattern.iter().enumerate() {
            let t = period * params.pattern.len() + cycle;
            for q in 0..l * l {
                if active[q] {
                    circuit.gates.push(Gate::Single {
                        qubit: q,
                        time: t,
                        matrix: haar_unitary2(&mut rng),
                    });
                }
            }
            if let Some(class_bonds) = by_class.get(&(*class as u8)) {
                for &(a, b) in class_bonds {
                    if active[a] && active[b] {
                        for _ in 0..2 {
                            circuit.gates.push(Gate::Two {
                                qubit_a: a,
                                qubit_b: b,
                                time: t,
                                matrix: haar_unitary4(&mut rng),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(circuit)
}

// ---------------------------------------------------------------------------
// (2+1)-dimensional random circuits with cavities

#[derive(Debug, Clone, PartialEq)]
pub struct Random3dParams {
    pub l: usize,
    /// Time steps per lattice site: `T = round(alpha L)`.
    pub alpha: f64,
    /// Cavity side length in space-time.
    pub s_cavity: usize,
    pub sigma: f64,
    /// Poisson parameter for the number of cavity placement attempts.
    pub lambda: f64,
    pub seed: u64,
}

impl Random3dParams {
    pub fn new(l: usize, seed: u64) -> Self {
        Random3dParams {
            l,
            alpha: 0.1,
            s_cavity: 5,
            sigma: 10.0,
            lambda: 5e4 * (l as f64 / 200.0).powf(3.5),
            seed,
        }
    }

    pub fn time_steps(&self) -> usize {
        (self.alpha * self.l as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::Parameter(format!("random3d needs L >= 2, got {}", self.l)));
        }
        if self.time_steps() < 1 {
            return Err(Error::Parameter(format!(
                "round(alpha L) = {} must be >= 1",
                self.time_steps()
            )));
        }
        if self.lambda < 0.0 || self.sigma <= 0.0 || self.s_cavity < 1 {
            return Err(Error::Parameter("bad cavity parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Random3dStats {
    /// Poisson draw: number of cavity placement attempts.
    pub attempts: u64,
    /// Accepted cavities.
    pub cavities: u64,
}

/// (2+1)-d family: dense brick layers of random two-qubit unitaries with a
/// per-step random orientation and parity offset, interrupted by
/// Poisson-placed `S x S x S` gate-free cavities accepted with the centered
/// Gaussian profile `exp[-(x^2/L^2 + y^2/L^2 + t^2/T^2)/sigma^2]`. Cavity
/// boxes are centered on the accepted coordinate and clip at the lattice and
/// time boundaries.
pub fn gen_random3d(params: &Random3dParams) -> Result<Circuit> {
    gen_random3d_with_stats(params).map(|(c, _)| c)
}

pub fn gen_random3d_with_stats(params: &Random3dParams) -> Result<(Circuit, Random3dStats)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let l = params.l;
    let t_total = params.time_steps();
    let mut circuit = base_circuit(l, t_total);
    let mut stats = Random3dStats::default();

    let attempts = if params.lambda > 0.0 {
        let poisson = Poisson::new(params.lambda)
            .map_err(|_| Error::Parameter(format!("bad lambda {}", params.lambda)))?;
        poisson.sample(&mut rng) as u64
    } else {
        0
    };
    stats.attempts = attempts;

    // Blocked space-time cells.
    let mut blocked: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let s = params.s_cavity;
    for _ in 0..attempts {
        let x = rng.gen_range(0..l);
        let y = rng.gen_range(0..l);
        let t = rng.gen_range(0..t_total);
        let cx = x as f64 - (l as f64 - 1.0) / 2.0;
        let cy = y as f64 - (l as f64 - 1.0) / 2.0;
        let ct = t as f64 - (t_total as f64 - 1.0) / 2.0;
        let lf = l as f64;
        let tf = t_total as f64;
        let p = (-((cx * cx) / (lf * lf) + (cy * cy) / (lf * lf) + (ct * ct) / (tf * tf))
            / (params.sigma * params.sigma))
            .exp();
        if !rng.gen_bool(p) {
            continue;
        }
        stats.cavities += 1;
        let lo = |c: usize| c.saturating_sub(s / 2);
        for bx in lo(x)..(lo(x) + s).min(l) {
            for by in lo(y)..(lo(y) + s).min(l) {
                for bt in lo(t)..(lo(t) + s).min(t_total) {
                    blocked.insert((bx, by, bt));
                }
            }
        }
    }

    for t in 0..t_total {
        let horizontal = rng.gen_bool(0.5);
        let offset = usize::from(rng.gen_bool(0.5));
        let place = |a: (usize, usize), b: (usize, usize), rng: &mut ChaCha8Rng,
                         gates: &mut Vec<Gate>| {
            if blocked.contains(&(a.0, a.1, t)) || blocked.contains(&(b.0, b.1, t)) {
                return;
            }
            gates.push(Gate::Two {
                qubit_a: a.1 * l + a.0,
                qubit_b: b.1 * l + b.0,
                time: t,
                matrix: haar_unitary4(rng),
            });
        };
        if horizontal {
            for y in 0..l {
                let mut x = offset;
                while x + 1 < l {
                    place((x, y), (x + 1, y), &mut rng, &mut circuit.gates);
                    x += 2;
                }
            }
        } else {
            for x in 0..l {
                let mut y = offset;
                while y + 1 < l {
                    place((x, y), (x, y + 1), &mut rng, &mut circuit.gates);
                    y += 2;
                }
            }
        }
    }
    Ok((circuit, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        circuit_to_network, contract_converted, statevector_expectation, GateProfile, Measurement,
    };

    #[test]
    fn iqp_gamma_zero_has_no_couplings() {
        let mut params = IqpParams::new(4, 1);
        params.gamma = 0.0;
        let c = gen_iqp(&params).unwrap();
        c.validate().unwrap();
        assert_eq!(GateProfile::from_circuit(&c).sum_f, 0);
    }

    #[test]
    fn iqp_is_deterministic() {
        let params = IqpParams::new(5, 42);
        assert_eq!(gen_iqp(&params).unwrap(), gen_iqp(&params).unwrap());
        let mut other = params.clone();
        other.seed = 43;
        assert_ne!(gen_iqp(&params).unwrap(), gen_iqp(&other).unwrap());
    }

    #[test]
    fn iqp_coupling_rate_matches_expectation() {
        // Mean placed couplings over 100 seeds vs the unexcluded expectation
        // p * pairs * T scaled by the measured acceptance fraction.
        let mut offered = 0u64;
        let mut placed = 0u64;
        for seed in 0..100 {
            let params = IqpParams::new(8, seed);
            let (_, stats) = gen_iqp_with_stats(&params).unwrap();
            offered += stats.offered;
            placed += stats.placed;
        }
        let n = 64.0f64;
        let p = 0.75 * 3.0 * n.ln() / n;
        let pairs = 2.0 * 8.0 * 7.0;
        let expected_offered = p * pairs * 64.0 * 100.0;
        let acceptance = placed as f64 / offered as f64;
        let mean_placed = placed as f64 / 100.0;
        let target = expected_offered / 100.0 * acceptance;
        assert!(
            (mean_placed - target).abs() < 0.15 * target,
            "mean {mean_placed} vs {target}"
        );
        // The offered count itself is binomial around its expectation.
        assert!((offered as f64 - expected_offered).abs() < 0.15 * expected_offered);
    }

    #[test]
    fn iqp_expectation_is_one() {
        // Diagonal circuits leave |0...0> invariant up to phase, so the
        // default measurement has expectation exactly 1 end to end.
        let params = IqpParams::new(3, 7);
        let c = gen_iqp(&params).unwrap();
        c.validate().unwrap();
        let sv = statevector_expectation(&c, &Measurement::default()).unwrap();
        assert!((sv - 1.0).abs() < 1e-10);
        let cc = circuit_to_network(&c, &Measurement::default(), None).unwrap();
        let v = contract_converted(&cc).unwrap();
        assert!((v.re - 1.0).abs() < 1e-8 && v.im.abs() < 1e-8);
    }

    #[test]
    fn sycamore_all_idle_is_empty() {
        let mut params = SycamoreParams::new(4, 3);
        params.p_idle = 1.0;
        let c = gen_sycamore(&params).unwrap();
        assert!(c.gates.is_empty());
        assert_eq!(c.time_steps, 40);
    }

    #[test]
    fn sycamore_interior_f_is_16_per_period() {
        for seed in 0..20 {
            let mut params = SycamoreParams::new(6, seed);
            params.p_idle = 0.0;
            params.q = 3;
            let c = gen_sycamore(&params).unwrap();
            let profile = GateProfile::from_circuit(&c);
            // Interior qubit: one bond per class, each class twice per
            // period, two gates per coupling.
            for y in 1..5 {
                for x in 1..5 {
                    assert_eq!(profile.f[&(y * 6 + x)], 16 * 3);
                }
            }
        }
    }

    #[test]
    fn sycamore_validates_and_is_deterministic() {
        let params = SycamoreParams::new(5, 11);
        let c = gen_sycamore(&params).unwrap();
        c.validate().unwrap();
        assert_eq!(c, gen_sycamore(&params).unwrap());
    }

    #[test]
    fn random3d_no_cavities_gives_dense_bricks() {
        for seed in 0..20 {
            let mut params = Random3dParams::new(20, seed);
            params.lambda = 0.0;
            let c = gen_random3d(&params).unwrap();
            let t = params.time_steps();
            let profile = GateProfile::from_circuit(&c);
            for y in 1..19 {
                for x in 1..19 {
                    assert_eq!(profile.f[&(y * 20 + x)], t as u64);
                }
            }
        }
    }

    #[test]
    fn random3d_cavity_count_tracks_lambda() {
        let mut attempts = 0u64;
        let mut cavities = 0u64;
        let lambda = 10.0;
        for seed in 0..1000 {
            let mut params = Random3dParams::new(20, seed);
            params.lambda = lambda;
            let (_, stats) = gen_random3d_with_stats(&params).unwrap();
            attempts += stats.attempts;
            cavities += stats.cavities;
        }
        let acceptance = cavities as f64 / attempts as f64;
        let mean = cavities as f64 / 1000.0;
        let target = lambda * acceptance;
        assert!((mean - target).abs() < 0.05 * target, "mean {mean} vs {target}");
        // With sigma = 10 the Gaussian profile is nearly flat.
        assert!(acceptance > 0.99);
    }

    #[test]
    fn random3d_validates_and_is_deterministic() {
        let params = Random3dParams::new(12, 5);
        let c = gen_random3d(&params).unwrap();
        c.validate().unwrap();
        assert_eq!(c, gen_random3d(&params).unwrap());
        // Cavities actually remove gates relative to the dense circuit.
        let mut dense = params.clone();
        dense.lambda = 0.0;
        let c_dense = gen_random3d(&dense).unwrap();
        let (ca, _) = gen_random3d_with_stats(&params).unwrap();
        if GateProfile::from_circuit(&ca.clone()).sum_f > 0 {
            assert!(ca.gates.len() <= c_dense.gates.len());
        }
    }
}
