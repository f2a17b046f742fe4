//! Dense reference simulator for small hybrid circuits.
//!
//! Qubit `q` is bit `q` of the basis index. Outcome `+1` is bit 0.

#![allow(dead_code)]

use mipt_core::clifford::{sample_uniform_2q, synthesize, CliffordGate2Q, Generator, Side};
use mipt_core::stabilizer::Tableau;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Copy, Debug)]
pub enum Op {
    Gate(&'static CliffordGate2Q, usize, usize),
    Measure(usize),
}

#[derive(Clone, Debug)]
pub struct Circuit {
    pub n: usize,
    pub ops: Vec<Op>,
}

impl Circuit {
    pub fn n_measurements(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Measure(_))).count()
    }
}

/// Alternates brick-wall layers on a ring with layers of random pairings,
/// each followed by measuring every qubit with probability `p`.
pub fn random_circuit<R: Rng>(n: usize, depth: usize, p: f64, rng: &mut R) -> Circuit {
    let mut ops = Vec::new();
    for layer in 0..depth {
        if layer % 2 == 0 {
            let off = (layer / 2) % 2;
            let last = if n.is_multiple_of(2) { n } else { n - 1 };
            for a in (off..last).step_by(2) {
                ops.push(Op::Gate(sample_uniform_2q(rng), a, (a + 1) % n));
            }
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for pair in order.chunks_exact(2) {
                ops.push(Op::Gate(sample_uniform_2q(rng), pair[0], pair[1]));
            }
        }
        for q in 0..n {
            if rng.random::<f64>() < p {
                ops.push(Op::Measure(q));
            }
        }
    }
    Circuit { n, ops }
}

fn side(s: Side, qa: usize, qb: usize) -> usize {
    match s {
        Side::A => qa,
        Side::B => qb,
    }
}

/// Applies one generator to a state vector.
pub fn apply_generator(amp: &mut [C64], g: Generator, qa: usize, qb: usize) {
    match g {
        Generator::H(s) => {
            let m = 1usize << side(s, qa, qb);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..amp.len() {
                if i & m == 0 {
                    let (a, b) = (amp[i], amp[i | m]);
                    amp[i] = (a + b) * h;
                    amp[i | m] = (a - b) * h;
                }
            }
        }
        Generator::S(s) => {
            let m = 1usize << side(s, qa, qb);
            for (i, a) in amp.iter_mut().enumerate() {
                if i & m != 0 {
                    *a *= C64::i();
                }
            }
        }
        Generator::Cnot(s) => {
            let (c, t) = match s {
                Side::A => (qa, qb),
                Side::B => (qb, qa),
            };
            let (mc, mt) = (1usize << c, 1usize << t);
            for i in 0..amp.len() {
                if i & mc != 0 && i & mt == 0 {
                    amp.swap(i, i | mt);
                }
            }
        }
    }
}

pub fn apply_gate(amp: &mut [C64], gate: &CliffordGate2Q, qa: usize, qb: usize) {
    for &g in synthesize(gate).expect("group element") {
        apply_generator(amp, g, qa, qb);
    }
}

pub fn bit_of(value: i8) -> usize {
    usize::from(value < 0)
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub n: usize,
    pub amp: Vec<C64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        let mut amp = vec![C64::new(0.0, 0.0); 1 << n];
        amp[0] = C64::new(1.0, 0.0);
        Self { n, amp }
    }

    pub fn gate(&mut self, gate: &CliffordGate2Q, qa: usize, qb: usize) {
        apply_gate(&mut self.amp, gate, qa, qb);
    }

    pub fn prob_one(&self, q: usize) -> f64 {
        let m = 1usize << q;
        self.amp
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects qubit `q` onto `bit` and renormalizes.
    pub fn project(&mut self, q: usize, bit: usize) {
        let m = 1usize << q;
        let mut norm = 0.0;
        for (i, a) in self.amp.iter_mut().enumerate() {
            if (i & m != 0) as usize != bit {
                *a = C64::new(0.0, 0.0);
            } else {
                norm += a.norm_sqr();
            }
        }
        let s = norm.sqrt().recip();
        for a in &mut self.amp {
            *a *= s;
        }
    }

    /// Von Neumann entropy of `region` in bits.
    pub fn entropy(&self, region: &[usize]) -> f64 {
        let rest: Vec<usize> = (0..self.n).filter(|q| !region.contains(q)).collect();
        let (ra, rb) = (1usize << region.len(), 1usize << rest.len());
        let mut m = DMatrix::<C64>::zeros(ra, rb);
        for (i, a) in self.amp.iter().enumerate() {
            let pick = |qs: &[usize]| {
                qs.iter()
                    .enumerate()
                    .fold(0, |acc, (k, &q)| acc | (((i >> q) & 1) << k))
            };
            m[(pick(region), pick(&rest))] = *a;
        }
        m.singular_values()
            .iter()
            .map(|s| s * s)
            .filter(|&l| l > 1e-12)
            .map(|l| -l * l.log2())
            .sum()
    }
}

/// Mixed-state evolution where every measurement dephases.
///
/// Gives the exact marginal of each measurement in the circuit averaged over
/// all earlier outcomes.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub dim: usize,
    /// Column-major.
    pub rho: Vec<C64>,
}

impl DensityMatrix {
    pub fn zero(n: usize) -> Self {
        let dim = 1 << n;
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        rho[0] = C64::new(1.0, 0.0);
        Self { dim, rho }
    }

    fn adjoint(&mut self) {
        let d = self.dim;
        for i in 0..d {
            self.rho[i * d + i] = self.rho[i * d + i].conj();
            for j in i + 1..d {
                let (a, b) = (self.rho[i * d + j], self.rho[j * d + i]);
                self.rho[i * d + j] = b.conj();
                self.rho[j * d + i] = a.conj();
            }
        }
    }

    fn left(&mut self, gate: &CliffordGate2Q, qa: usize, qb: usize) {
        for col in self.rho.chunks_exact_mut(self.dim) {
            apply_gate(col, gate, qa, qb);
        }
    }

    pub fn gate(&mut self, gate: &CliffordGate2Q, qa: usize, qb: usize) {
        self.left(gate, qa, qb);
        self.adjoint();
        self.left(gate, qa, qb);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.rho[i * self.dim + i].re).collect()
    }

    pub fn prob_one(&self, q: usize) -> f64 {
        let m = 1usize << q;
        self.diagonal()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn dephase(&mut self, q: usize) {
        let m = 1usize << q;
        let d = self.dim;
        for j in 0..d {
            for i in 0..d {
                if (i ^ j) & m != 0 {
                    self.rho[j * d + i] = C64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Exact probability that each measurement of the circuit (in order) gives
/// `-1`, followed by the final readout probabilities of every qubit and the
/// joint final readout distribution.
pub fn exact_marginals(c: &Circuit) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dm = DensityMatrix::zero(c.n);
    let mut mid = Vec::new();
    for op in &c.ops {
        match *op {
            Op::Gate(g, a, b) => dm.gate(g, a, b),
            Op::Measure(q) => {
                mid.push(dm.prob_one(q));
                dm.dephase(q);
            }
        }
    }
    let fin = (0..c.n).map(|q| dm.prob_one(q)).collect();
    (mid, fin, dm.diagonal())
}

/// One tableau shot: mid-circuit outcomes, then a full Z readout.
pub fn tableau_shot<R: Rng>(c: &Circuit, rng: &mut R) -> (Tableau, Vec<i8>, Vec<i8>) {
    let mut t = Tableau::new_zero_state(c.n).unwrap();
    let mut mid = Vec::with_capacity(c.n_measurements());
    for op in &c.ops {
        match *op {
            Op::Gate(g, a, b) => t.apply_two_qubit_clifford(g, a, b).unwrap(),
            Op::Measure(q) => mid.push(t.measure_z(q, rng).unwrap().value),
        }
    }
    let state = t.clone();
    let fin = (0..c.n).map(|q| t.measure_z(q, rng).unwrap().value).collect();
    (state, mid, fin)
}

/// Replays the tableau's outcome record on the state vector and checks each
/// outcome's conditional probability: 1/2 when the tableau drew it at random,
/// otherwise 1. Returns the final state vector.
pub fn replay_checked<R: Rng>(c: &Circuit, rng: &mut R) -> Result<(Tableau, StateVector), String> {
    let mut t = Tableau::new_zero_state(c.n).unwrap();
    let mut sv = StateVector::zero(c.n);
    for (k, op) in c.ops.iter().enumerate() {
        match *op {
            Op::Gate(g, a, b) => {
                t.apply_two_qubit_clifford(g, a, b).unwrap();
                sv.gate(g, a, b);
            }
            Op::Measure(q) => {
                let out = t.measure_z(q, rng).unwrap();
                let p1 = sv.prob_one(q);
                let p = if out.value < 0 { p1 } else { 1.0 - p1 };
                let want = if out.was_random { 0.5 } else { 1.0 };
                if (p - want).abs() > 1e-9 {
                    return Err(format!(
                        "op {k}: outcome {} on qubit {q} has probability {p}, tableau says {want}",
                        out.value
                    ));
                }
                sv.project(q, bit_of(out.value));
            }
        }
    }
    Ok((t, sv))
}

/// All non-empty proper subsets of `0..n`.
pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1..(1usize << n) - 1).map(move |mask| (0..n).filter(|q| mask >> q & 1 == 1).collect())
}
