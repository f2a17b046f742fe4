use mipt_core::observables::{entanglement_entropy, Region};
use mipt_core::protocol::{evolve_one_time_unit, CircuitConfig};
use mipt_core::stabilizer::Tableau;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn region_and_complement_have_equal_entropy(
        seed in any::<u64>(),
        p in 0.0f64..0.5,
        steps in 1usize..40,
        start in 0usize..32,
        len in 1usize..32,
    ) {
        let cfg = CircuitConfig::new(32).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut s = Tableau::new_zero_state(32).unwrap();
        for t in 0..steps {
            evolve_one_time_unit(&mut s, &cfg, t as f64, |_| p, &mut rng).unwrap();
        }
        let a = Region::interval(start, len, 32).unwrap();
        let sa = entanglement_entropy(&s, &a).unwrap();
        let sb = entanglement_entropy(&s, &a.complement(32)).unwrap();
        prop_assert_eq!(sa, sb);
        prop_assert!(sa as usize <= len.min(32 - len));
    }
}
