//! The two-qubit Clifford group as conjugation tables.
//!
//! A gate is stored as the images of `XI, ZI, IX, IZ` (signed two-qubit
//! Paulis). The full group modulo global phase has 720 symplectic parts times
//! 16 sign patterns; [`group`] enumerates it once by closure over
//! `{H, S} ⊗ {0, 1}` and both CNOT orientations.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stabilizer::PauliOperator;

pub const GROUP_ORDER: usize = 11520;
pub const SYMPLECTIC_ORDER: usize = 720;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CliffordError {
    #[error("images do not form a symplectic basis (pair {0:?} has the wrong commutation)")]
    NotSymplectic((usize, usize)),
    #[error("image {0} is not a two-qubit Pauli")]
    BadImage(usize),
    #[error("conjugation table is not an element of the two-qubit Clifford group")]
    NotInGroup,
}

/// A signed Pauli on two qubits `(a, b)`.
///
/// Bits are packed as `x_a | z_a << 1 | x_b << 2 | z_b << 3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalPauli {
    pub bits: u8,
    pub negative: bool,
}

impl LocalPauli {
    pub const fn new(bits: u8, negative: bool) -> Self {
        Self { bits, negative }
    }

    fn symplectic(self, other: Self) -> u8 {
        let (a, b) = (self.bits, other.bits);
        let xa = a & 0b0101;
        let za = (a >> 1) & 0b0101;
        let xb = b & 0b0101;
        let zb = (b >> 1) & 0b0101;
        (((xa & zb) ^ (za & xb)).count_ones() & 1) as u8
    }

    pub fn to_pauli(self) -> PauliOperator {
        let mut p = PauliOperator::identity(2);
        p.set(0, self.bits & 1 != 0, self.bits & 2 != 0);
        p.set(1, self.bits & 4 != 0, self.bits & 8 != 0);
        p.set_negative(self.negative);
        p
    }

    pub fn from_pauli(p: &PauliOperator) -> Option<Self> {
        if p.n_qubits() != 2 {
            return None;
        }
        let bits = p.x_bit(0) as u8 | (p.z_bit(0) as u8) << 1 | (p.x_bit(1) as u8) << 2 | (p.z_bit(1) as u8) << 3;
        Some(Self::new(bits, p.is_negative()))
    }
}

impl fmt::Debug for LocalPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_pauli())
    }
}

/// `i`-power picked up by `P(u) P(w)` for Hermitian two-qubit Paulis, mod 4.
fn product_phase(u: u8, w: u8) -> u32 {
    let xz = |v: u8| ((v & 0b0101) & ((v >> 1) & 0b0101)).count_ones();
    let zx = ((u >> 1) & 0b0101 & w & 0b0101).count_ones();
    let r = u ^ w;
    (xz(u) + xz(w) + 2 * zx + 3 * xz(r)) % 4
}

/// Bit-sliced evaluation data for applying a gate to tableau columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct GateKernel {
    /// `out[k]` is the XOR of the inputs selected by `lin[k]`.
    pub lin: [u8; 4],
    /// Algebraic normal form of the sign flip, one bit per input monomial.
    pub anf: u16,
}

/// An element of the two-qubit Clifford group, modulo global phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CliffordGate2Q {
    images: [LocalPauli; 4],
    table: [LocalPauli; 16],
    kernel: GateKernel,
}

impl fmt::Debug for CliffordGate2Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CliffordGate2Q")
            .field("XI", &self.images[0])
            .field("ZI", &self.images[1])
            .field("IX", &self.images[2])
            .field("IZ", &self.images[3])
            .finish()
    }
}

const GENERATOR_BITS: [u8; 4] = [0b0001, 0b0010, 0b0100, 0b1000];

impl CliffordGate2Q {
    /// Builds a gate from the images of `XI, ZI, IX, IZ`.
    pub fn from_images(images: [LocalPauli; 4]) -> Result<Self, CliffordError> {
        for (i, img) in images.iter().enumerate() {
            if img.bits > 0b1111 {
                return Err(CliffordError::BadImage(i));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let want = u8::from(i / 2 == j / 2);
                if images[i].symplectic(images[j]) != want {
                    return Err(CliffordError::NotSymplectic((i, j)));
                }
            }
        }
        let mut table = [LocalPauli::new(0, false); 16];
        for (v, slot) in table.iter_mut().enumerate() {
            let v = v as u8;
            // P(v) = i^{x.z} (XI)^xa (ZI)^za (IX)^xb (IZ)^zb
            let mut phase = ((v & 0b0101) & ((v >> 1) & 0b0101)).count_ones();
            let mut bits = 0u8;
            for (k, img) in images.iter().enumerate() {
                if v & GENERATOR_BITS[k] != 0 {
                    phase += product_phase(bits, img.bits) + 2 * img.negative as u32;
                    bits ^= img.bits;
                }
            }
            let phase = phase % 4;
            debug_assert!(phase.is_multiple_of(2), "image of a Hermitian Pauli must be Hermitian");
            *slot = LocalPauli::new(bits, phase == 2);
        }
        let mut lin = [0u8; 4];
        for (k, out) in lin.iter_mut().enumerate() {
            for (i, img) in images.iter().enumerate() {
                if img.bits & (1 << k) != 0 {
                    *out |= 1 << i;
                }
            }
        }
        // Möbius transform of the sign truth table gives its ANF.
        let mut anf = [0u8; 16];
        for (v, a) in anf.iter_mut().enumerate() {
            *a = table[v].negative as u8;
        }
        for i in 0..4 {
            for v in 0..16 {
                if v & (1 << i) != 0 {
                    anf[v] ^= anf[v ^ (1 << i)];
                }
            }
        }
        let anf = anf.iter().enumerate().fold(0u16, |acc, (v, &a)| acc | (a as u16) << v);
        Ok(Self {
            images,
            table,
            kernel: GateKernel { lin, anf },
        })
    }

    pub fn identity() -> Self {
        Self::from_images([
            LocalPauli::new(0b0001, false),
            LocalPauli::new(0b0010, false),
            LocalPauli::new(0b0100, false),
            LocalPauli::new(0b1000, false),
        ])
        .expect("identity is symplectic")
    }

    pub fn images(&self) -> [LocalPauli; 4] {
        self.images
    }

    /// Images as length-2 [`PauliOperator`]s, in the order `XI, ZI, IX, IZ`.
    pub fn image_paulis(&self) -> [PauliOperator; 4] {
        self.images.map(LocalPauli::to_pauli)
    }

    /// `U P U†` for any signed two-qubit Pauli `P`.
    pub fn conjugate(&self, p: LocalPauli) -> LocalPauli {
        let img = self.table[p.bits as usize];
        LocalPauli::new(img.bits, img.negative ^ p.negative)
    }

    /// The gate that applies `self` first and `next` second.
    pub fn then(&self, next: &Self) -> Self {
        Self::from_images(self.images.map(|img| next.conjugate(img)))
            .expect("composition of Clifford gates is Clifford")
    }

    pub(crate) fn kernel(&self) -> &GateKernel {
        &self.kernel
    }

    /// Packed 4×4 symplectic matrix (image bits in generator order).
    pub fn matrix_code(&self) -> u16 {
        self.images
            .iter()
            .enumerate()
            .fold(0u16, |acc, (k, img)| acc | (img.bits as u16) << (4 * k))
    }

    pub fn sign_code(&self) -> u8 {
        self.images
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, img)| acc | (img.negative as u8) << k)
    }

    fn sort_key(&self) -> u32 {
        let id = Self::identity().matrix_code();
        ((self.matrix_code() ^ id) as u32) << 4 | self.sign_code() as u32
    }

    /// Position of this gate in the canonical ordering of the group.
    ///
    /// The identity has index 0. The ordering depends only on the
    /// conjugation table, so it is stable across runs and platforms.
    pub fn canonical_index(&self) -> Result<usize, CliffordError> {
        group()
            .index
            .get(&self.sort_key())
            .copied()
            .ok_or(CliffordError::NotInGroup)
    }

    pub fn hadamard(qubit: Side) -> Self {
        let (x, z) = qubit.generators();
        let mut imgs = Self::identity().images;
        imgs[x] = Self::identity().images[z];
        imgs[z] = Self::identity().images[x];
        Self::from_images(imgs).unwrap()
    }

    pub fn phase(qubit: Side) -> Self {
        let (x, z) = qubit.generators();
        let mut imgs = Self::identity().images;
        imgs[x] = LocalPauli::new(imgs[x].bits | imgs[z].bits, false);
        Self::from_images(imgs).unwrap()
    }

    /// CNOT with the given control; the other qubit is the target.
    pub fn cnot(control: Side) -> Self {
        let imgs = match control {
            Side::A => [
                LocalPauli::new(0b0101, false),
                LocalPauli::new(0b0010, false),
                LocalPauli::new(0b0100, false),
                LocalPauli::new(0b1010, false),
            ],
            Side::B => [
                LocalPauli::new(0b0001, false),
                LocalPauli::new(0b1010, false),
                LocalPauli::new(0b0101, false),
                LocalPauli::new(0b1000, false),
            ],
        };
        Self::from_images(imgs).unwrap()
    }

    pub fn swap() -> Self {
        let id = Self::identity().images;
        Self::from_images([id[2], id[3], id[0], id[1]]).unwrap()
    }

    pub fn generator(g: Generator) -> Self {
        match g {
            Generator::H(s) => Self::hadamard(s),
            Generator::S(s) => Self::phase(s),
            Generator::Cnot(s) => Self::cnot(s),
        }
    }
}

/// Which qubit of the pair a one-qubit generator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    fn generators(self) -> (usize, usize) {
        match self {
            Side::A => (0, 1),
            Side::B => (2, 3),
        }
    }
}

/// Generators used to build the group; also the alphabet of [`synthesize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    H(Side),
    S(Side),
    /// CNOT controlled on the given side.
    Cnot(Side),
}

pub const GENERATORS: [Generator; 6] = [
    Generator::H(Side::A),
    Generator::H(Side::B),
    Generator::S(Side::A),
    Generator::S(Side::B),
    Generator::Cnot(Side::A),
    Generator::Cnot(Side::B),
];

struct GroupTable {
    gates: Vec<CliffordGate2Q>,
    words: Vec<Vec<Generator>>,
    index: HashMap<u32, usize>,
}

fn group() -> &'static GroupTable {
    static TABLE: OnceLock<GroupTable> = OnceLock::new();
    TABLE.get_or_init(build_group)
}

fn build_group() -> GroupTable {
    let gens: Vec<_> = GENERATORS.iter().map(|&g| (g, CliffordGate2Q::generator(g))).collect();
    let id = CliffordGate2Q::identity();
    let mut seen: HashMap<u32, usize> = HashMap::new();
    let mut found = vec![(id, Vec::new())];
    seen.insert(id.sort_key(), 0);
    let mut head = 0;
    while head < found.len() {
        let (gate, word) = found[head].clone();
        head += 1;
        for (g, gen) in &gens {
            let next = gate.then(gen);
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(next.sort_key()) {
                e.insert(found.len());
                let mut w = word.clone();
                w.push(*g);
                found.push((next, w));
            }
        }
    }
    found.sort_by_key(|(g, _)| g.sort_key());
    let index = found.iter().enumerate().map(|(i, (g, _))| (g.sort_key(), i)).collect();
    let (gates, words) = found.into_iter().unzip();
    GroupTable { gates, words, index }
}

/// All 11520 conjugation tables, in canonical-index order.
pub fn enumerate_2q_group() -> &'static [CliffordGate2Q] {
    &group().gates
}

/// A word over [`GENERATORS`] implementing `gate`, in time order.
pub fn synthesize(gate: &CliffordGate2Q) -> Result<&'static [Generator], CliffordError> {
    let i = gate.canonical_index()?;
    Ok(&group().words[i])
}

/// Draws a gate uniformly from the full two-qubit Clifford group.
pub fn sample_uniform_2q<R: Rng + ?Sized>(rng: &mut R) -> &'static CliffordGate2Q {
    let table = &group().gates;
    &table[rng.random_range(0..table.len())]
}

/// Looks up a gate by canonical index.
pub fn gate_by_index(index: usize) -> Option<&'static CliffordGate2Q> {
    group().gates.get(index)
}
