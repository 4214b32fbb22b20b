mod common;

use common::{formula, random_inputs, random_signals, random_system, random_vectors};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shmpc_core::canonical::{atom_of_predicate, max_min_form, min_max_form, Context, Form, Shape};
use shmpc_core::stl::{robustness, Formula, Predicate};
use shmpc_core::Error;

/// Groups as sorted lists of atom dumps, in sorted order: equality up to reordering.
fn normalized<S: Shape>(f: &Form<S>) -> Vec<Vec<String>> {
    let mut groups: Vec<Vec<String>> = (0..f.num_groups())
        .map(|i| {
            let mut g: Vec<String> = f.group_atoms(i).map(|a| format!("{a:?}")).collect();
            g.sort();
            g
        })
        .collect();
    groups.sort();
    groups
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn forms_reproduce_robustness(phi in formula(2, 3, 4), seed in any::<u64>(), t_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = phi.horizon().max(1);
        let sys = random_system(&mut rng, 2, 1, n);
        let sig = random_signals(&mut rng, n + 1);
        let x0 = random_vectors(&mut rng, 1, 2, 1.0).remove(0);
        let t = ((n as f64) * t_frac) as usize;
        let u0 = random_inputs(&mut rng, &sys, n);
        let w0 = random_vectors(&mut rng, n, 2, 0.5);
        let past = sys.simulate(&x0, &u0, &w0).unwrap();
        let ctx = Context::new(&sys, &sig, t, &past.states[..=t], n).unwrap();
        let mm = match max_min_form(&phi, 0, &ctx) {
            Err(Error::FormTooLarge { .. }) => return Err(TestCaseError::reject("form too large")),
            r => r.unwrap(),
        };
        let nm = min_max_form(&phi, 0, &ctx).unwrap();
        for _ in 0..50 {
            let mut u = random_inputs(&mut rng, &sys, n);
            let mut w = random_vectors(&mut rng, n, 2, 0.5);
            u[..t].clone_from_slice(&u0[..t]);
            w[..t].clone_from_slice(&w0[..t]);
            let run = sys.simulate(&x0, &u, &w).unwrap();
            let rho = robustness(&run.states, &sig, 0, &phi).unwrap();
            let a = mm.evaluate(&u, &w).unwrap();
            let b = nm.evaluate(&u, &w).unwrap();
            prop_assert!((a - rho).abs() <= 1e-9, "max-min {} vs {}", a, rho);
            prop_assert!((b - rho).abs() <= 1e-9, "min-max {} vs {}", b, rho);
        }
    }

    #[test]
    fn negation_swaps_shapes(phi in formula(2, 3, 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = phi.horizon().max(1);
        let sys = random_system(&mut rng, 2, 1, n);
        let sig = random_signals(&mut rng, n + 1);
        let x0 = [DVector::from_vec(vec![0.2, -0.1])];
        let ctx = Context::new(&sys, &sig, 0, &x0, n).unwrap();
        let neg = Formula::not(phi.clone());
        let (Ok(mm), Ok(neg_nm)) = (max_min_form(&phi, 0, &ctx), min_max_form(&neg, 0, &ctx)) else {
            return Err(TestCaseError::reject("form too large"));
        };
        prop_assert_eq!(normalized(&mm.negate()), normalized(&neg_nm));
        let (Ok(nm), Ok(neg_mm)) = (min_max_form(&phi, 0, &ctx), max_min_form(&neg, 0, &ctx)) else {
            return Err(TestCaseError::reject("form too large"));
        };
        prop_assert_eq!(normalized(&nm.negate()), normalized(&neg_mm));
    }

    #[test]
    fn conjunction_group_count_is_bounded(f1 in formula(2, 2, 3), f2 in formula(2, 2, 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let both = Formula::And(vec![f1.clone(), f2.clone()]);
        let n = both.horizon().max(1);
        let sys = random_system(&mut rng, 2, 1, n);
        let sig = random_signals(&mut rng, n + 1);
        let x0 = [DVector::from_vec(vec![0.0, 0.0])];
        let ctx = Context::new(&sys, &sig, 0, &x0, n).unwrap();
        let (Ok(a), Ok(b), Ok(c)) = (max_min_form(&f1, 0, &ctx), max_min_form(&f2, 0, &ctx), max_min_form(&both, 0, &ctx)) else {
            return Err(TestCaseError::reject("form too large"));
        };
        prop_assert!(c.num_groups() <= a.num_groups() * b.num_groups());
        let (Ok(a), Ok(b), Ok(c)) = (min_max_form(&f1, 0, &ctx), min_max_form(&f2, 0, &ctx), min_max_form(&both, 0, &ctx)) else {
            return Err(TestCaseError::reject("form too large"));
        };
        prop_assert!(c.num_groups() <= a.num_groups() + b.num_groups());
    }

    #[test]
    fn pruning_preserves_values(phi in formula(1, 3, 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = phi.horizon().max(1);
        let sys = random_system(&mut rng, 1, 1, n);
        let sig = random_signals(&mut rng, n + 1);
        let x0 = [DVector::from_vec(vec![0.3])];
        let ctx = Context::new(&sys, &sig, 0, &x0, n).unwrap();
        let Ok(mm) = max_min_form(&phi, 0, &ctx) else {
            return Err(TestCaseError::reject("form too large"));
        };
        let nm = min_max_form(&phi, 0, &ctx).unwrap();
        let (pm, pn) = (mm.prune(0), nm.prune(0));
        prop_assert!(pm.size() <= mm.size() && pn.size() <= nm.size());
        for _ in 0..1000 {
            let u = random_inputs(&mut rng, &sys, n);
            let w = random_vectors(&mut rng, n, 1, 1.0);
            prop_assert_eq!(pm.evaluate(&u, &w).unwrap(), mm.evaluate(&u, &w).unwrap());
            prop_assert_eq!(pn.evaluate(&u, &w).unwrap(), nm.evaluate(&u, &w).unwrap());
        }
    }
}

#[test]
fn two_step_atom_matches_explicit_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sys = random_system(&mut rng, 2, 1, 6);
    let sig = random_signals(&mut rng, 7);
    let pred = Predicate::new(vec![1.5, -0.5], 0.25);
    let x = vec![DVector::from_vec(vec![0.4, 1.0]), DVector::from_vec(vec![-0.3, 0.8])];
    let t = 1;
    let ctx = Context::new(&sys, &sig, t, &x, 6).unwrap();
    let atom = atom_of_predicate(&pred, t + 2, &ctx).unwrap();
    for _ in 0..200 {
        let u = random_inputs(&mut rng, &sys, 6);
        let w = random_vectors(&mut rng, 6, 2, 1.0);
        let xs = sys.explicit_state(t, &x[t], &u[t..], &w[t..], t + 2).unwrap();
        let want = pred.alpha(xs.as_slice());
        assert!((atom.eval(&u, &w).unwrap() - want).abs() <= 1e-10);
    }
    let now = atom_of_predicate(&pred, t, &ctx).unwrap();
    assert!(now.is_constant());
    assert_eq!(now.constant, pred.alpha(x[t].as_slice()));
}
