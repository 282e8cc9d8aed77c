use bbopt_core::bdd::{BddManager, Literal, VarId, WeightMap};
use bbopt_core::gen::{formula_to_bdd, random_formula};
use bbopt_core::oracle::{assignments, brute_amc, Formula};
use bbopt_core::semiring::{ExpectationValue, RealValue};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n: usize) -> (BddManager, Vec<VarId>) {
    let mut m = BddManager::new();
    let vars = (0..n).map(|i| m.new_var(&format!("x{i}"))).collect();
    (m, vars)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn amc_matches_brute_force(seed in any::<u64>(), n in 1usize..=10, rewards in prop::collection::vec(-50.0f64..50.0, 10), biases in prop::collection::vec(0.0f64..1.0, 10)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, n, 5);
        let (mut m, vars) = setup(n);
        let h = formula_to_bdd(&mut m, &f, &vars);
        // Alternate flip-like and reward-like weights; reward weights do not
        // sum to the unit, so skipped variables must be gap-corrected.
        let weights: Vec<(ExpectationValue, ExpectationValue)> = (0..n)
            .map(|i| if i % 2 == 0 {
                (ExpectationValue::new(biases[i], 0.0), ExpectationValue::new(1.0 - biases[i], 0.0))
            } else {
                (ExpectationValue::new(1.0, rewards[i]), ExpectationValue::new(1.0, 0.0))
            })
            .collect();
        let mut wm = WeightMap::new();
        for (v, &(p, q)) in vars.iter().zip(&weights) {
            wm.insert(*v, p, q).unwrap();
        }
        let got = m.amc(h, &wm).unwrap();
        let want = brute_amc(&f, &weights).unwrap();
        prop_assert!((got.prob - want.prob).abs() < 1e-9 && (got.util - want.util).abs() < 1e-9, "{got:?} vs {want:?}");

        let rw: Vec<(RealValue, RealValue)> = biases[..n].iter().map(|&b| (RealValue(b), RealValue(1.0 - b))).collect();
        let mut rm = WeightMap::new();
        for (v, &(p, q)) in vars.iter().zip(&rw) {
            rm.insert(*v, p, q).unwrap();
        }
        prop_assert!((m.amc(h, &rm).unwrap().0 - brute_amc(&f, &rw).unwrap().0).abs() < 1e-9);
    }

    #[test]
    fn canonical_handles(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, n, 4);
        let g = random_formula(&mut rng, n, 4);
        let (mut m, vars) = setup(n);
        let (hf, hg) = (formula_to_bdd(&mut m, &f, &vars), formula_to_bdd(&mut m, &g, &vars));
        let same = assignments(n).all(|a| f.eval(&a) == g.eval(&a));
        prop_assert_eq!(same, hf == hg);
        // Double negation and De Morgan rebuild the same node.
        let nn = formula_to_bdd(&mut m, &Formula::not(Formula::not(f.clone())), &vars);
        prop_assert_eq!(nn, hf);
        let dm = formula_to_bdd(&mut m, &Formula::not(Formula::and(Formula::not(f.clone()), Formula::not(g.clone()))), &vars);
        let or = formula_to_bdd(&mut m, &Formula::or(f.clone(), g.clone()), &vars);
        prop_assert_eq!(dm, or);
    }

    #[test]
    fn conditioning_removes_variable(seed in any::<u64>(), n in 1usize..=8, pick in 0usize..8, pos in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, n, 4);
        let (mut m, vars) = setup(n);
        let h = formula_to_bdd(&mut m, &f, &vars);
        let v = vars[pick % n];
        let c = m.condition(h, Literal::new(v, pos));
        prop_assert!(!m.support(c).contains(&v));
        for a in assignments(n) {
            let mut a2 = a.clone();
            a2[pick % n] = pos;
            prop_assert_eq!(m.eval(c, &|x: VarId| a[x.0 as usize]), f.eval(&a2));
        }
    }
}
