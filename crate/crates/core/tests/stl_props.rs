mod common;

use common::{formula, random_run, random_signals};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shmpc_core::stl::{parse, robustness, satisfies, Formula};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn robustness_sign_decides_satisfaction(phi in formula(2, 4, 4), seed in any::<u64>(), t in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = (t + phi.horizon() + 1).max(20.min(t + phi.horizon() + 4));
        let run = random_run(&mut rng, len, 2);
        let sig = random_signals(&mut rng, len);
        let rho = robustness(&run, &sig, t, &phi).unwrap();
        let sat = satisfies(&run, &sig, t, &phi).unwrap();
        prop_assume!(rho != 0.0);
        prop_assert_eq!(rho > 0.0, sat, "rho = {}", rho);
    }

    #[test]
    fn suffix_beyond_horizon_is_irrelevant(phi in formula(2, 4, 4), seed in any::<u64>(), t in 0usize..3, extra in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = t + phi.horizon() + 1;
        let mut run = random_run(&mut rng, keep + extra, 2);
        let sig = random_signals(&mut rng, keep + extra);
        let before = satisfies(&run, &sig, t, &phi).unwrap();
        let rho = robustness(&run, &sig, t, &phi).unwrap();
        for x in run.iter_mut().skip(keep) {
            x.iter_mut().for_each(|v| *v = rng.random_range(-50.0..50.0));
        }
        prop_assert_eq!(satisfies(&run, &sig, t, &phi).unwrap(), before);
        prop_assert_eq!(robustness(&run, &sig, t, &phi).unwrap(), rho);
        // The bare prefix is long enough on its own.
        prop_assert_eq!(satisfies(&run[..keep], &sig, t, &phi).unwrap(), before);
    }

    #[test]
    fn negation_is_exact(phi in formula(2, 4, 4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = phi.horizon() + 1;
        let run = random_run(&mut rng, len, 2);
        let sig = random_signals(&mut rng, len);
        let r = robustness(&run, &sig, 0, &phi).unwrap();
        prop_assert_eq!(robustness(&run, &sig, 0, &Formula::not(phi.clone())).unwrap(), -r);
    }

    #[test]
    fn derived_operators_agree(body in formula(2, 2, 3), a in 0usize..3, w in 0usize..3, seed in any::<u64>()) {
        let b = a + w;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = b + body.horizon() + 1;
        let run = random_run(&mut rng, len, 2);
        let sig = random_signals(&mut rng, len);
        let f = Formula::eventually(a, b, body.clone());
        let u = Formula::until(a, b, Formula::True, body.clone());
        let g = Formula::always(a, b, body.clone());
        let dual = Formula::not(Formula::eventually(a, b, Formula::not(body.clone())));
        for (x, y) in [(&f, &u), (&g, &dual)] {
            prop_assert_eq!(satisfies(&run, &sig, 0, x).unwrap(), satisfies(&run, &sig, 0, y).unwrap());
            prop_assert_eq!(robustness(&run, &sig, 0, x).unwrap(), robustness(&run, &sig, 0, y).unwrap());
        }
    }
}

#[test]
fn horizon_examples() {
    assert_eq!(parse("G[0,4] F[3,6] (x1 >= 0)").unwrap().horizon(), 10);
    assert_eq!(parse("x1 >= 0").unwrap().horizon(), 0);
    assert_eq!(parse("(F[0,3] (x1 >= 0)) & (G[0,5] (x2 >= 1))").unwrap().horizon(), 5);
    assert_eq!(parse("(x1 >= 1) U[2,5] (G[0,2] (x2 >= 0))").unwrap().horizon(), 7);
}

#[test]
fn truth_holds_everywhere() {
    let run = vec![nalgebra::DVector::from_vec(vec![-1.0])];
    assert!(satisfies(&run, &Default::default(), 0, &Formula::True).unwrap());
}
