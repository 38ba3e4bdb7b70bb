mod support {
    pub mod prop1;
}

use coagency::examples;
use coagency::examples::shared_utility::{shared_utility_low, Rationality};
use coagency::rationality::*;
use coagency::scm::model::{DeterministicScm, MechanizedScm, ParameterizedScm};
use coagency::scm::setting::Setting;
use coagency::scm::value::{Domain, Value, VarId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::prop1::generate;

/// Additive utility with random weights per object value.
fn random_utility(m: &MechanizedScm, rng: &mut ChaCha8Rng) -> UtilityFn {
    let vars = m.object_vars();
    let weights: Vec<Vec<f64>> = vars
        .iter()
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let ids = vars.clone();
    UtilityFn::new("random", &vars, move |s| {
        ids.iter()
            .zip(&weights)
            .map(|(v, w)| w[s.get(v).and_then(Value::as_int).unwrap() as usize])
            .sum()
    })
}

fn pick<T: Clone>(xs: &[T], rng: &mut ChaCha8Rng) -> T {
    xs[rng.random_range(0..xs.len())].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_response_is_total_and_affine_invariant(seed in 0u64..10_000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let m = generate(seed, false).low;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_utility(&m, &mut rng);
        let target = pick(m.mech_vars(), &mut rng);
        for c in all_contexts(&m, &target).unwrap() {
            let base = best_response_set(&m, &target, &c, &u).unwrap();
            prop_assert!(!base.is_empty());
            let scaled = best_response_set_tol(&m, &target, &c, &u.affine(a, b), TIE_TOL * a).unwrap();
            prop_assert_eq!(base, scaled);
        }
    }

    #[test]
    fn agency_is_monotone_in_context_coverage(seed in 0u64..10_000) {
        let m = generate(seed, seed % 2 == 0).low;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let u = random_utility(&m, &mut rng);
        let target = pick(m.mech_vars(), &mut rng);
        let all = all_contexts(&m, &target).unwrap();
        let subset: Vec<Setting> = all.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        let r = RationalityRelation::BestResponse;
        let full = is_agent(&m, &target, &r, &u, all.clone()).unwrap().is_agent;
        let part = is_agent(&m, &target, &r, &u, subset).unwrap().is_agent;
        prop_assert!(!full || part);
    }

    #[test]
    fn constant_utility_makes_everything_an_agent(seed in 0u64..10_000) {
        let m = generate(seed, seed % 2 == 0).low;
        for target in m.mech_vars() {
            let v = is_agent(&m, target, &RationalityRelation::BestResponse, &UtilityFn::constant(0.0), all_contexts(&m, target).unwrap()).unwrap();
            prop_assert!(v.is_agent);
        }
    }
}

#[test]
fn constant_utility_on_registered_models() {
    for id in examples::MODELS {
        // The default constants sit on the 0.1 grid. Responses between grid
        // points (the critic's products) cannot be in a gridded argmax, so
        // only contexts with representable responses are checked.
        let m = examples::model(id, Some(0.1)).unwrap();
        for target in m.mech_vars() {
            let grid = m.mech().domain(target).unwrap().enumerate(target).unwrap();
            let contexts = all_contexts(&m, target)
                .unwrap()
                .into_iter()
                .step_by(97)
                .take(300)
                .filter(|c| {
                    let r = m.mech().evaluate(target, c).unwrap();
                    grid.iter().any(|g| g.approx_eq(&r, 1e-9))
                });
            let v = is_agent(
                &m,
                target,
                &RationalityRelation::BestResponse,
                &UtilityFn::constant(0.0),
                contexts,
            )
            .unwrap();
            assert!(v.is_agent, "{id} {target}");
        }
    }
}

#[test]
fn first_mover_dominates_best_response_under_shared_utility() {
    let m = shared_utility_low(Rationality::FirstMover);
    let (d1, d2) = (VarId::mechanism("D1"), VarId::mechanism("D2"));
    let u = examples::utility("shared-utility-fm", "shared").unwrap();
    let beliefs = BeliefModel::new(vec![d2.clone()], vec![u.clone()]).unwrap();
    for c in all_contexts(&m, &d1).unwrap() {
        let br = response_utilities(&m, &d1, &c, &u)
            .unwrap()
            .into_iter()
            .map(|(_, e)| e)
            .fold(f64::NEG_INFINITY, f64::max);
        let (opt, fm) = first_mover_optimal_settings(&m, &d1, &beliefs, &u, &c).unwrap();
        assert!(!opt.is_empty());
        assert!(fm >= br - TIE_TOL, "context {c}: first mover {fm} < best response {br}");
        assert!(!first_mover_response(&m, &d1, &beliefs, &u, &c).unwrap().is_empty());
    }
}

#[test]
fn battle_payoff_mechanism_is_independent_decision_is_not() {
    let m = examples::model("battle-of-sexes", Some(0.25)).unwrap();
    assert!(has_independent_mechanism(m.mech(), &VarId::mechanism("U1")).unwrap());
    assert!(!has_independent_mechanism(m.mech(), &VarId::mechanism("D1")).unwrap());
}

#[test]
fn single_variable_model_is_independent() {
    let mech = DeterministicScm::builder().constant("X", Domain::range(2), 0i64).build().unwrap();
    let obj = ParameterizedScm::builder()
        .deterministic("X", Domain::range(2), &[], |t, _| t.clone())
        .build()
        .unwrap();
    let m = MechanizedScm::new(mech, obj).unwrap();
    let x = VarId::mechanism("X");
    assert!(has_independent_mechanism(m.mech(), &x).unwrap());
    let contexts = all_contexts(&m, &x).unwrap();
    assert_eq!(contexts, vec![Setting::new()]);
    let u = UtilityFn::of_var(VarId::object("X"));
    let v = is_agent(&m, &x, &RationalityRelation::BestResponse, &u, contexts).unwrap();
    assert!(!v.is_agent);
    assert_eq!(v.counterexample.unwrap().response_set, vec![Value::Int(1)]);
}
