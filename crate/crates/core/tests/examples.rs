use coagency::examples::{self, actor_critic, battle, shared_utility, Rationality};
use coagency::rationality::{
    best_response_set, first_mover_optimal_settings, is_agent, BeliefModel, RationalityRelation, UtilityFn,
};
use coagency::scm::{exact_distribution, induce_scm, solve_enumerate, Setting, Value, VarId};

fn print_failures(o: &examples::ExampleOutcome) {
    for c in o.claims.iter().filter(|c| !c.passed) {
        eprintln!("failed: {} ({})", c.claim, c.detail);
    }
}

#[test]
fn battle_of_sexes_claims_hold() {
    let o = examples::run_example("battle-of-sexes", None).unwrap();
    print_failures(&o);
    assert!(o.passed);
    assert_eq!(o.solutions.len(), 3);
}

#[test]
fn battle_mixed_equilibrium_joint_probability() {
    let m = battle::battle_of_sexes();
    let sols = solve_enumerate(m.mech(), &Setting::new()).unwrap();
    let mixed = sols
        .iter()
        .find(|s| {
            let d1 = s.get(&VarId::mechanism("D1")).and_then(Value::as_f64).unwrap();
            d1 > 0.0 && d1 < 1.0
        })
        .unwrap();
    let induced = induce_scm(&m, mixed).unwrap();
    let dist = exact_distribution(&induced).unwrap();
    let event = Setting::new()
        .with(VarId::object("D1"), Value::sym("O"))
        .with(VarId::object("D2"), Value::sym("O"));
    let p = dist.prob_event(&event);
    assert!((p - 2.0 / 9.0).abs() < 1e-12, "{p}");
}

#[test]
fn closed_form_matches_brute_force_on_random_games() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let u1: Vec<f64> = (0..4).map(|_| rng.random_range(0..4) as f64).collect();
        let u2: Vec<f64> = (0..4).map(|_| rng.random_range(0..4) as f64).collect();
        let Some(eqs) = battle::nash_equilibria_2x2(&u1, &u2) else { continue };
        // Independent check: pure profiles by deviation test, mixed by indifference.
        let pay = |u: &[f64], x: f64, y: f64| {
            x * y * u[0] + x * (1.0 - y) * u[1] + (1.0 - x) * y * u[2] + (1.0 - x) * (1.0 - y) * u[3]
        };
        for &(x, y) in &eqs {
            for dev in [0.0, 0.25, 0.5, 0.75, 1.0] {
                assert!(pay(&u1, dev, y) <= pay(&u1, x, y) + 1e-9);
                assert!(pay(&u2, x, dev) <= pay(&u2, x, y) + 1e-9);
            }
        }
        let mut pure = 0;
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                let ok = pay(&u1, 1.0 - x, y) <= pay(&u1, x, y) && pay(&u2, x, 1.0 - y) <= pay(&u2, x, y);
                pure += usize::from(ok);
            }
        }
        let found_pure = eqs.iter().filter(|(x, y)| x.fract() == 0.0 && y.fract() == 0.0).count();
        assert_eq!(pure, found_pure, "{u1:?} {u2:?}");
    }
}

#[test]
fn actor_critic_claims_hold() {
    let o = examples::run_example("actor-critic", None).unwrap();
    print_failures(&o);
    assert!(o.passed);
    let a = o.abstraction.unwrap();
    assert_eq!((a.tested, a.matched), (14641, 14641));
}

#[test]
fn actor_critic_default_values() {
    let q = actor_critic::critic(actor_critic::DEFAULT_R, actor_critic::DEFAULT_S);
    assert!((q[0] - 0.26).abs() < 1e-12 && (q[1] - 0.74).abs() < 1e-12);
    assert_eq!(actor_critic::collective_action(actor_critic::DEFAULT_R, actor_critic::DEFAULT_S), 1);
    assert_eq!(actor_critic::collective_action([0.3, 0.6], [0.5, 0.5]), 1);
}

#[test]
fn actor_is_not_a_reward_agent_at_low_level() {
    // Fix ~Q at the values implied by another (r, s); ~A still follows ~Q,
    // which is not a best response to R under the true reward probabilities.
    let m = actor_critic::actor_critic_low(0.1);
    let a = VarId::mechanism("A");
    let ctx = Setting::new()
        .with(VarId::mechanism("Q"), vec![0.9, 0.1])
        .with(VarId::mechanism("R"), actor_critic::DEFAULT_R.to_vec())
        .with(VarId::mechanism("S"), actor_critic::DEFAULT_S.to_vec())
        .with(VarId::mechanism("W"), 1i64)
        .with(VarId::mechanism("Y"), 1i64);
    let u = actor_critic::utility("reward").unwrap();
    let v = is_agent(&m, &a, &RationalityRelation::BestResponse, &u, vec![ctx]).unwrap();
    assert!(!v.is_agent);
    assert!(v.counterexample.is_some());
}

#[test]
fn shared_utility_best_response_fails_first_mover_passes() {
    let br = examples::run_example("shared-utility-br", None).unwrap();
    print_failures(&br);
    assert!(br.passed);
    assert!(!br.abstraction.unwrap().holds);
    assert_eq!(br.solutions.len(), 2);
    let fm = examples::run_example("shared-utility-fm", None).unwrap();
    print_failures(&fm);
    assert!(fm.passed);
    assert!(fm.abstraction.unwrap().holds);
    assert_eq!(fm.solutions.len(), 1);
}

#[test]
fn symmetric_utility_has_two_first_mover_optima() {
    let p = shared_utility::shared_utility_pair(Rationality::FirstMover);
    let u = UtilityFn::of_var(VarId::object("U"));
    let iv = shared_utility::utility_intervention([1.0, 0.0, 0.0, 1.0]);
    let ctx = solve_enumerate(p.low.mech(), &iv).unwrap().remove(0).without(&VarId::mechanism("D1"));
    let belief = BeliefModel::new(vec![VarId::mechanism("D2")], vec![u.clone()]).unwrap();
    let (opt, value) = first_mover_optimal_settings(&p.low, &VarId::mechanism("D1"), &belief, &u, &ctx).unwrap();
    assert_eq!(opt.len(), 2);
    assert!((value - 1.0).abs() < 1e-12);
    let br = best_response_set(&p.low, &VarId::mechanism("D1"), &ctx, &u).unwrap();
    assert!(!br.is_empty());
}

#[test]
fn registry_resolves_every_name() {
    for id in examples::MODELS {
        assert!(examples::model(id, Some(0.1)).is_some(), "{id}");
    }
    assert!(examples::model("nope", None).is_none());
    assert!(examples::abstraction_pair("actor-critic-low", "actor-critic-high", Some(0.1)).is_some());
    assert!(examples::abstraction_pair("shared-utility-fm-low", "shared-utility-high", None).is_some());
    assert!(examples::abstraction_pair("battle-of-sexes", "battle-of-sexes", None).is_some());
    assert!(examples::run_example("nope", None).is_err());
}

#[test]
fn shared_utility_models_round_trip_through_json() {
    for id in ["shared-utility-br-low", "shared-utility-fm-low", "shared-utility-high"] {
        let m = examples::model(id, None).unwrap();
        let json = coagency::scm::json::to_json(&m).unwrap();
        let back = coagency::scm::json::from_json(&json).unwrap();
        let iv = shared_utility::utility_intervention([0.0, 2.0, 1.0, 0.0]);
        let a = solve_enumerate(m.mech(), &iv).unwrap();
        let b = solve_enumerate(back.mech(), &iv).unwrap();
        assert_eq!(a, b, "{id}");
        let da = exact_distribution(&induce_scm(&m, &a[0]).unwrap()).unwrap();
        let db = exact_distribution(&induce_scm(&back, &b[0]).unwrap()).unwrap();
        assert!(da.max_abs_diff(&db) < 1e-12);
    }
}
