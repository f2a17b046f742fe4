//! Entanglement observables of stabilizer states.
//!
//! All entropies are in bits. For a pure stabilizer state the entropy of a
//! region `A` is `rank(G_A) - |A|`, where `G_A` is the stabilizer generator
//! matrix restricted to the X and Z columns of `A`.

use thiserror::Error;

use crate::gf2::BitMatrix;
use crate::stabilizer::Tableau;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObservableError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("site {site} outside a register of {n} qubits")]
    OutOfRange { site: usize, n: usize },
    #[error("half-chain entropy needs an even system size, got {0}")]
    OddSize(usize),
    #[error("tripartite information needs a system size divisible by 4, got {0}")]
    NotQuartered(usize),
    #[error("system size {l} exceeds register of {n} qubits")]
    SystemTooLarge { l: usize, n: usize },
}

/// A set of sites, usually an interval on the ring of `L` system qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    /// Sites `start, start+1, …` (mod `ring`), `len` of them.
    pub fn interval(start: usize, len: usize, ring: usize) -> Result<Self, ObservableError> {
        if len == 0 {
            return Err(ObservableError::EmptyRegion);
        }
        if len > ring {
            return Err(ObservableError::OutOfRange { site: len - 1, n: ring });
        }
        Ok(Self::from_sites((0..len).map(|k| (start + k) % ring)))
    }

    pub fn from_sites(sites: impl IntoIterator<Item = usize>) -> Self {
        let mut sites: Vec<usize> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        Self { sites }
    }

    pub fn single(site: usize) -> Self {
        Self { sites: vec![site] }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_sites(self.sites.iter().chain(&other.sites).copied())
    }

    pub fn complement(&self, n: usize) -> Self {
        Self::from_sites((0..n).filter(|q| self.sites.binary_search(q).is_err()))
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// Von Neumann entropy of `region` in bits.
pub fn entanglement_entropy(state: &Tableau, region: &Region) -> Result<u32, ObservableError> {
    if region.is_empty() {
        return Err(ObservableError::EmptyRegion);
    }
    let n = state.n_qubits();
    if let Some(&site) = region.sites.iter().find(|&&q| q >= n) {
        return Err(ObservableError::OutOfRange { site, n });
    }
    // Rank of G_A equals the rank of its transpose, whose rows are the
    // stabilizer-half columns of the tableau.
    let columns = region.sites.iter().flat_map(|&q| {
        let (x, z) = state.stabilizer_columns(q);
        [x, z]
    });
    let rank = BitMatrix::from_word_rows(n, columns).into_rank();
    Ok((rank - region.len()) as u32)
}

/// Entropy of the half chain `[0, L/2)` of an `L`-site system embedded at the
/// start of the register (extra qubits, such as an ancilla, sit after it).
pub fn half_chain_entropy_of(state: &Tableau, l: usize) -> Result<u32, ObservableError> {
    check_system(state, l)?;
    if !l.is_multiple_of(2) {
        return Err(ObservableError::OddSize(l));
    }
    entanglement_entropy(state, &Region::interval(0, l / 2, l)?)
}

/// Half-chain entropy with the whole register as the system.
pub fn half_chain_entropy(state: &Tableau) -> Result<u32, ObservableError> {
    half_chain_entropy_of(state, state.n_qubits())
}

/// `I₃ = S_A + S_B + S_C − S_AB − S_AC − S_BC + S_ABC` over the four
/// contiguous quarters `A, B, C, D` of an `L`-site ring.
pub fn tripartite_mutual_information_of(state: &Tableau, l: usize) -> Result<i32, ObservableError> {
    check_system(state, l)?;
    if !l.is_multiple_of(4) || l == 0 {
        return Err(ObservableError::NotQuartered(l));
    }
    let q = l / 4;
    let a = Region::interval(0, q, l)?;
    let b = Region::interval(q, q, l)?;
    let c = Region::interval(2 * q, q, l)?;
    let s = |r: &Region| entanglement_entropy(state, r).map(|v| v as i32);
    Ok(s(&a)? + s(&b)? + s(&c)? - s(&a.union(&b))? - s(&a.union(&c))? - s(&b.union(&c))? + s(&a.union(&b).union(&c))?)
}

pub fn tripartite_mutual_information(state: &Tableau) -> Result<i32, ObservableError> {
    tripartite_mutual_information_of(state, state.n_qubits())
}

/// Entropy of the single ancilla qubit: 1 while it is still entangled.
pub fn ancilla_entropy(state: &Tableau, ancilla: usize) -> Result<u32, ObservableError> {
    entanglement_entropy(state, &Region::single(ancilla))
}

fn check_system(state: &Tableau, l: usize) -> Result<(), ObservableError> {
    if l > state.n_qubits() {
        return Err(ObservableError::SystemTooLarge { l, n: state.n_qubits() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::sample_uniform_2q;
    use crate::stabilizer::FixtureGate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_hybrid_state(n: usize, depth: usize, p: f64, seed: u64) -> Tableau {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut t = Tableau::new_zero_state(n).unwrap();
        for layer in 0..depth {
            for a in ((layer % 2)..n).step_by(2) {
                let b = (a + 1) % n;
                if a != b {
                    t.apply_two_qubit_clifford(sample_uniform_2q(&mut rng), a, b).unwrap();
                }
            }
            for q in 0..n {
                if rng.random_bool(p) {
                    t.measure_z(q, &mut rng).unwrap();
                }
            }
        }
        t
    }

    #[test]
    fn product_state_has_no_entanglement() {
        let t = Tableau::new_zero_state(4).unwrap();
        for start in 0..4 {
            for len in 1..=4 {
                let r = Region::interval(start, len, 4).unwrap();
                assert_eq!(entanglement_entropy(&t, &r).unwrap(), 0);
            }
        }
        assert_eq!(half_chain_entropy(&t).unwrap(), 0);
        assert_eq!(tripartite_mutual_information(&t).unwrap(), 0);
    }

    #[test]
    fn bell_pair_entropy() {
        let mut t = Tableau::new_zero_state(2).unwrap();
        t.apply_fixture_gate(FixtureGate::H(0)).unwrap();
        t.apply_fixture_gate(FixtureGate::Cnot { control: 0, target: 1 })
            .unwrap();
        assert_eq!(entanglement_entropy(&t, &Region::single(0)).unwrap(), 1);
        assert_eq!(ancilla_entropy(&t, 1).unwrap(), 1);
        assert_eq!(entanglement_entropy(&t, &Region::from_sites([0, 1])).unwrap(), 0);
    }

    #[test]
    fn crossing_bell_pairs_count() {
        // Pairs (1,2), (3,4), (5,0) on a ring of 6: only (5,0) straddles the
        // boundary of the half [0,3).
        let mut t = Tableau::new_zero_state(6).unwrap();
        for (a, b) in [(1, 2), (3, 4), (5, 0)] {
            t.apply_fixture_gate(FixtureGate::H(a)).unwrap();
            t.apply_fixture_gate(FixtureGate::Cnot { control: a, target: b })
                .unwrap();
        }
        assert_eq!(half_chain_entropy(&t).unwrap(), 1);
        // Every pair straddles the boundary here.
        let mut u = Tableau::new_zero_state(6).unwrap();
        for (a, b) in [(2, 3), (5, 0), (1, 4)] {
            u.apply_fixture_gate(FixtureGate::H(a)).unwrap();
            u.apply_fixture_gate(FixtureGate::Cnot { control: a, target: b })
                .unwrap();
        }
        assert_eq!(half_chain_entropy(&u).unwrap(), 3);
    }

    #[test]
    fn ghz_tripartite_information() {
        let mut t = Tableau::new_zero_state(4).unwrap();
        t.apply_fixture_gate(FixtureGate::H(0)).unwrap();
        for q in 1..4 {
            t.apply_fixture_gate(FixtureGate::Cnot { control: 0, target: q })
                .unwrap();
        }
        for r in [
            Region::from_sites([0]),
            Region::from_sites([0, 1]),
            Region::from_sites([0, 2]),
            Region::from_sites([0, 1, 2]),
        ] {
            assert_eq!(entanglement_entropy(&t, &r).unwrap(), 1);
        }
        assert_eq!(tripartite_mutual_information(&t).unwrap(), 1);
    }

    #[test]
    fn argument_errors() {
        let t = Tableau::new_zero_state(6).unwrap();
        assert_eq!(
            entanglement_entropy(&t, &Region::from_sites([])),
            Err(ObservableError::EmptyRegion)
        );
        assert!(Region::interval(0, 0, 4).is_err());
        assert!(matches!(
            entanglement_entropy(&t, &Region::single(6)),
            Err(ObservableError::OutOfRange { site: 6, n: 6 })
        ));
        assert_eq!(
            half_chain_entropy(&Tableau::new_zero_state(5).unwrap()),
            Err(ObservableError::OddSize(5))
        );
        assert_eq!(tripartite_mutual_information(&t), Err(ObservableError::NotQuartered(6)));
        assert!(ancilla_entropy(&t, 9).is_err());
    }

    #[test]
    fn i3_matches_mutual_information_identity() {
        for seed in 0..40 {
            let t = random_hybrid_state(16, 12, 0.15, seed);
            let s = |r: &Region| entanglement_entropy(&t, r).unwrap() as i32;
            let a = Region::interval(0, 4, 16).unwrap();
            let b = Region::interval(4, 4, 16).unwrap();
            let c = Region::interval(8, 4, 16).unwrap();
            let mi = |x: &Region, y: &Region| s(x) + s(y) - s(&x.union(y));
            let bc = b.union(&c);
            let i3 = mi(&a, &b) + mi(&a, &c) - mi(&a, &bc);
            assert_eq!(tripartite_mutual_information(&t).unwrap(), i3);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn purity_and_bounds(seed in any::<u64>(), start in 0usize..32, len in 1usize..32, p in 0.0f64..0.4) {
            let l = 32;
            let t = random_hybrid_state(l, 16, p, seed);
            let a = Region::interval(start, len, l).unwrap();
            let sa = entanglement_entropy(&t, &a).unwrap();
            let sb = entanglement_entropy(&t, &a.complement(l)).unwrap();
            prop_assert_eq!(sa, sb);
            prop_assert!(sa as usize <= len.min(l - len));
        }
    }
}
