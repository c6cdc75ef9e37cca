use lwe_attack::codec::{decode_int, encode_int};
use lwe_attack::data::{combine_samples, gen_samples, gen_secret, LweParams, SecretDist};
use lwe_attack::model::{acc_tau, ExactOracle, NoisyOracle};
use lwe_attack::recovery::{binarize, verify_secret};
use lwe_attack::{centered_lift, mod_dot, wrap_distance, Modulus, ZqVector};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 251, 3329, 65_521, 1_073_741_789])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dot_product_matches_big_integers(q in prime(), raw in prop::collection::vec((any::<u64>(), any::<u64>()), 1..200)) {
        let m = Modulus::new(q).unwrap();
        let a = ZqVector::from_reduced(raw.iter().map(|p| p.0), m);
        let s = ZqVector::from_reduced(raw.iter().map(|p| p.1), m);
        let mut big = BigUint::from(0u32);
        for (x, y) in a.coords().iter().zip(s.coords()) {
            big += BigUint::from(*x) * BigUint::from(*y);
        }
        let want: u64 = (big % BigUint::from(q)).try_into().unwrap();
        prop_assert_eq!(mod_dot(&a, &s).unwrap(), want);
    }

    #[test]
    fn lift_and_distance(q in prime(), x in any::<u64>(), y in any::<u64>()) {
        let m = Modulus::new(q).unwrap();
        let (x, y) = (x % q, y % q);
        let l = centered_lift(x, m).unwrap();
        prop_assert!(2 * l > -(q as i64) && 2 * l <= q as i64);
        prop_assert_eq!((l.rem_euclid(q as i64)) as u64, x);
        let d = wrap_distance(x, y, m).unwrap();
        prop_assert_eq!(d, wrap_distance(y, x, m).unwrap());
        prop_assert!(d <= q / 2);
        prop_assert_eq!(d, x.abs_diff(y).min(q - x.abs_diff(y)));
    }

    #[test]
    fn codec_round_trip(x in any::<u64>(), base in 2u32..300) {
        let ids = encode_int(x, base).ids;
        prop_assert_eq!(decode_int(&ids, base).unwrap(), x);
        prop_assert!(ids.len() == 1 || ids[0] != 0);
    }

    #[test]
    fn combinations_keep_the_secret(seed in any::<u64>(), k in 1usize..5, n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LweParams::new(n, 251, 0.0, SecretDist::Binary { hamming: 1 }).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let fresh = gen_samples(&p, &s, 60, &mut rng).unwrap();
        let comb = combine_samples(&fresh, k, 10, 100, &mut rng).unwrap();
        prop_assert!(comb.residuals(s.coords()).unwrap().iter().all(|&r| r == 0));
        prop_assert!(comb.effective_sigma() <= (k as f64).sqrt() * p.sigma + 1e-12);
    }

    #[test]
    fn acc_tau_grows_with_tau(seed in any::<u64>(), hit in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LweParams::new(6, 251, 3.0, SecretDist::Binary { hamming: 2 }).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let test = gen_samples(&p, &s, 300, &mut rng).unwrap();
        let o = NoisyOracle::new(s, hit, 0.01, seed).unwrap();
        let mut last = 0.0;
        for tau in [0.01, 0.05, 0.1, 0.2, 0.3, 0.45] {
            let a = acc_tau(&o, &test, tau).unwrap();
            prop_assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn true_secret_always_verifies(seed in any::<u64>(), n in 4usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LweParams::new(n, 251, 3.0, SecretDist::Binary { hamming: 1 + n / 8 }).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_samples(&p, &s, 500, &mut rng).unwrap();
        prop_assert!(verify_secret(&s.bits().unwrap(), &set, 3.0).unwrap().accepted);
    }

    #[test]
    fn exact_probe_scores_binarize_to_the_secret(bits in prop::collection::vec(0u8..2, 2..64), k in 1u64..251) {
        prop_assume!(bits.iter().any(|&b| b == 1) && bits.iter().any(|&b| b == 0));
        let q = Modulus::new(251).unwrap();
        let scores: Vec<u64> = bits.iter().map(|&b| b as u64 * k).collect();
        let found = binarize(&scores, q, Some(k)).iter().any(|g| g.bits == bits);
        prop_assert!(found);
    }
}

#[test]
fn exact_oracle_is_perfect_on_noiseless_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = LweParams::new(20, 3329, 0.0, SecretDist::Uniform).unwrap();
    let s = gen_secret(&p, &mut rng).unwrap();
    let test = gen_samples(&p, &s, 1000, &mut rng).unwrap();
    for tau in [0.001, 0.1, 0.4] {
        assert_eq!(acc_tau(&ExactOracle::new(s.clone()), &test, tau).unwrap(), 1.0);
    }
}
