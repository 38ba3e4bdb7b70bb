//! Worked models: battle of the sexes, the actor-critic pair and the
//! shared-utility pair, with a registry and end-to-end verification runs.

pub mod actor_critic;
pub mod battle;
pub mod shared_utility;

use serde::Serialize;

use crate::abstraction::{
    check_abstraction, check_strong, intervention_suite, prop1_preconditions, AbstractionError, AbstractionMap,
    CheckConfig, StrongMode, SubsetPolicy,
};
use crate::rationality::{
    all_contexts, expected_utility, has_independent_mechanism, is_agent, is_nontrivial_agent, BeliefModel,
    RationalityError, RationalityRelation, UtilityFn,
};
use crate::scm::{solve_enumerate, MechanizedScm, ScmError, Setting, Value, VarId, DEFAULT_GRID_STEP};

pub use actor_critic::{actor_critic_pair, actor_critic_pair_with_step, ActorCritic};
pub use battle::{battle_of_sexes, battle_of_sexes_with_step};
pub use shared_utility::{shared_utility_pair, Rationality, SharedUtility};

/// Names accepted by [`run_example`].
pub const EXAMPLES: [&str; 4] = ["battle-of-sexes", "actor-critic", "shared-utility-br", "shared-utility-fm"];

/// Model identifiers accepted by [`model`] and [`abstraction_pair`].
pub const MODELS: [&str; 6] = [
    "battle-of-sexes",
    "actor-critic-low",
    "actor-critic-high",
    "shared-utility-br-low",
    "shared-utility-fm-low",
    "shared-utility-high",
];

/// Grid step used by `run_example` for the actor-critic check.
pub const ACTOR_CRITIC_CHECK_STEP: f64 = 0.1;

/// A registered model. `step` re-grids continuous ranges.
pub fn model(id: &str, step: Option<f64>) -> Option<MechanizedScm> {
    let s = step.unwrap_or(DEFAULT_GRID_STEP);
    Some(match id {
        "battle-of-sexes" => battle::battle_of_sexes_with_step(s),
        "actor-critic-low" => actor_critic::actor_critic_low(s),
        "actor-critic-high" => actor_critic::actor_critic_high(s),
        "shared-utility-br-low" => shared_utility::shared_utility_low(Rationality::BestResponse),
        "shared-utility-fm-low" => shared_utility::shared_utility_low(Rationality::FirstMover),
        "shared-utility-high" => shared_utility::shared_utility_high(),
        _ => return None,
    })
}

/// A registered (low, high) pair with its abstraction map and default suite
/// policy. A model paired with itself gets identity maps over all subsets.
pub fn abstraction_pair(
    low: &str,
    high: &str,
    step: Option<f64>,
) -> Option<(MechanizedScm, MechanizedScm, AbstractionMap, SubsetPolicy)> {
    let s = step.unwrap_or(DEFAULT_GRID_STEP);
    match (low, high) {
        ("actor-critic-low", "actor-critic-high") => {
            let p = actor_critic_pair_with_step(s);
            Some((p.low, p.high, p.map, actor_critic::state_reward_policy()))
        }
        ("shared-utility-br-low", "shared-utility-high") | ("shared-utility-fm-low", "shared-utility-high") => {
            let r = if low.contains("-br-") {
                Rationality::BestResponse
            } else {
                Rationality::FirstMover
            };
            let p = shared_utility_pair(r);
            Some((p.low, p.high, p.map, shared_utility::utility_policy()))
        }
        (a, b) if a == b => {
            let m = model(a, step)?;
            let map = AbstractionMap::identity(&m);
            Some((m.clone(), m, map, SubsetPolicy::All))
        }
        _ => None,
    }
}

/// Named utilities of an example (or model identifier).
pub fn utility(example: &str, name: &str) -> Option<UtilityFn> {
    if example.starts_with("battle") {
        battle::utility(name)
    } else if example.starts_with("actor-critic") {
        actor_critic::utility(name)
    } else if example.starts_with("shared-utility") {
        shared_utility::utility(name)
    } else {
        None
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim {
    pub claim: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbstractionSummary {
    pub tested: usize,
    pub matched: usize,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleOutcome {
    pub name: String,
    pub grid_step: f64,
    pub solutions: Vec<Setting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abstraction: Option<AbstractionSummary>,
    pub claims: Vec<Claim>,
    pub passed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ExampleError {
    #[error("unknown example {0}")]
    Unknown(String),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Rationality(#[from] RationalityError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

fn claim(claims: &mut Vec<Claim>, text: &str, passed: bool, detail: String) {
    claims.push(Claim {
        claim: text.to_string(),
        passed,
        detail,
    });
}

fn finish(name: &str, step: f64, solutions: Vec<Setting>, abstraction: Option<AbstractionSummary>, claims: Vec<Claim>) -> ExampleOutcome {
    let passed = claims.iter().all(|c| c.passed);
    ExampleOutcome {
        name: name.to_string(),
        grid_step: step,
        solutions,
        abstraction,
        claims,
        passed,
    }
}

fn summary(r: &crate::abstraction::AbstractionReport) -> AbstractionSummary {
    AbstractionSummary {
        tested: r.tested,
        matched: r.matched,
        holds: r.holds,
        first_failure: r.first_failure().map(|f| {
            format!(
                "{}: {}",
                f.intervention,
                f.note.clone().unwrap_or_else(|| format!("mismatch {:e}", f.max_mismatch))
            )
        }),
    }
}

/// Runs an example and verifies the properties claimed for it. `step`
/// defaults to 0.01 for battle of the sexes and 0.1 for the actor-critic
/// grid check.
pub fn run_example(name: &str, step: Option<f64>) -> Result<ExampleOutcome, ExampleError> {
    match name {
        "battle-of-sexes" => run_battle(step.unwrap_or(DEFAULT_GRID_STEP)),
        "actor-critic" => run_actor_critic(step.unwrap_or(ACTOR_CRITIC_CHECK_STEP)),
        "shared-utility-br" => run_shared(Rationality::BestResponse),
        "shared-utility-fm" => run_shared(Rationality::FirstMover),
        other => Err(ExampleError::Unknown(other.to_string())),
    }
}

fn strategy_pair(s: &Setting) -> (f64, f64) {
    let g = |n: &str| s.get(&VarId::mechanism(n)).and_then(Value::as_f64).unwrap_or(f64::NAN);
    (g("D1"), g("D2"))
}

fn run_battle(step: f64) -> Result<ExampleOutcome, ExampleError> {
    let m = battle::battle_of_sexes_with_step(step);
    let sols = solve_enumerate(m.mech(), &Setting::new())?;
    let mut claims = Vec::new();
    let pairs: Vec<(f64, f64)> = sols.iter().map(strategy_pair).collect();
    let expected = [(1.0, 1.0), (0.0, 0.0), (2.0 / 3.0, 1.0 / 3.0)];
    let exact = pairs.len() == 3
        && expected
            .iter()
            .all(|e| pairs.iter().any(|p| (p.0 - e.0).abs() <= 1e-12 && (p.1 - e.1).abs() <= 1e-12));
    claim(
        &mut claims,
        "three equilibria (1,1), (0,0), (2/3,1/3)",
        exact,
        format!("{pairs:?}"),
    );

    let u1 = battle::utility("payoff1").expect("registered");
    let u2 = battle::utility("payoff2").expect("registered");
    for s in &sols {
        let (d1, d2) = strategy_pair(s);
        let e1 = expected_utility(&m, s, &u1)?;
        let e2 = expected_utility(&m, s, &u2)?;
        let want = if d1 == 1.0 && d2 == 1.0 {
            (2.0, 1.0)
        } else if d1 == 0.0 && d2 == 0.0 {
            (1.0, 2.0)
        } else {
            (2.0 / 3.0, 2.0 / 3.0)
        };
        claim(
            &mut claims,
            &format!("expected payoffs at ({d1:.4}, {d2:.4})"),
            (e1 - want.0).abs() <= 1e-12 && (e2 - want.1).abs() <= 1e-12,
            format!("({e1}, {e2})"),
        );
    }

    let grid = battle::grid_solutions(&m)?;
    let near = grid.iter().all(|g| {
        let (a, b) = strategy_pair(g);
        pairs.iter().any(|p| (p.0 - a).abs() <= step && (p.1 - b).abs() <= step)
    });
    claim(
        &mut claims,
        "grid solutions lie within one grid step of the closed form",
        near && !grid.is_empty(),
        format!("{:?}", grid.iter().map(strategy_pair).collect::<Vec<_>>()),
    );

    for (player, u) in [("D1", &u1), ("D2", &u2)] {
        let target = VarId::mechanism(player);
        let other = VarId::mechanism(if player == "D1" { "D2" } else { "D1" });
        let contexts: Vec<Setting> = m
            .mech()
            .domain(&other)
            .expect("declared")
            .enumerate(&other)?
            .into_iter()
            .map(|x| {
                Setting::new()
                    .with(other.clone(), x)
                    .with(VarId::mechanism("U1"), battle::PAYOFF_1.to_vec())
                    .with(VarId::mechanism("U2"), battle::PAYOFF_2.to_vec())
            })
            .collect();
        let v = is_agent(&m, &target, &RationalityRelation::BestResponse, u, contexts)?;
        claim(
            &mut claims,
            &format!("~{player} best-responds to its payoff"),
            v.is_agent,
            format!("{} contexts", v.contexts_checked),
        );
    }
    let ind_u = has_independent_mechanism(m.mech(), &VarId::mechanism("U1"))?;
    let ind_d = has_independent_mechanism(m.mech(), &VarId::mechanism("D1"))?;
    claim(
        &mut claims,
        "~U1 has an independent mechanism, ~D1 does not",
        ind_u && !ind_d,
        format!("~U1 {ind_u}, ~D1 {ind_d}"),
    );
    Ok(finish("battle-of-sexes", step, sols, None, claims))
}

fn run_actor_critic(step: f64) -> Result<ExampleOutcome, ExampleError> {
    let p = actor_critic_pair_with_step(step);
    let mut claims = Vec::new();
    let suite = intervention_suite(&p.low, &p.map, &actor_critic::state_reward_policy(), None)?;
    let report = check_abstraction(&p.low, &p.high, &p.map, &suite, &CheckConfig::exact())?;
    claim(
        &mut claims,
        "high model abstracts the low model on the (s, r) grid",
        report.holds,
        format!("{}/{}", report.matched, report.tested),
    );
    let strong = check_strong(&p.low, &p.map, &actor_critic::high_domains(step), StrongMode::Exhaustive)?;
    claim(
        &mut claims,
        "ω is surjective (strong abstraction)",
        strong.strong,
        format!("coverage {}", strong.coverage),
    );
    let a = VarId::mechanism("A");
    let reward = actor_critic::utility("reward").expect("registered");
    let contexts = all_contexts(&p.high, &a)?;
    let n = contexts.len();
    let nt = is_nontrivial_agent(&p.high, &a, &RationalityRelation::BestResponse, &reward, contexts)?;
    claim(
        &mut claims,
        "~A* is a best-response agent for the reward",
        nt.agent.is_agent,
        format!("{}/{} contexts", nt.agent.contexts_checked, n),
    );
    claim(&mut claims, "~A* is a non-trivial agent", nt.is_nontrivial, String::new());
    let pre = prop1_preconditions(&p.low, &p.high, &p.map, &a)?;
    claim(
        &mut claims,
        "~A responds to ~Q, so the no-emergence preconditions fail",
        !pre.independent_mechanisms,
        format!("{pre:?}"),
    );
    let sols = solve_enumerate(p.high.mech(), &Setting::new())?;
    Ok(finish("actor-critic", step, sols, Some(summary(&report)), claims))
}

fn run_shared(r: Rationality) -> Result<ExampleOutcome, ExampleError> {
    let p = shared_utility_pair(r);
    let name = match r {
        Rationality::BestResponse => "shared-utility-br",
        Rationality::FirstMover => "shared-utility-fm",
    };
    let mut claims = Vec::new();
    let iv = shared_utility::utility_intervention(shared_utility::DEFAULT_U);
    let sols = solve_enumerate(p.low.mech(), &iv)?;
    let report = check_abstraction(&p.low, &p.high, &p.map, std::slice::from_ref(&iv), &CheckConfig::exact())?;
    let u = shared_utility::utility("shared").expect("registered");
    match r {
        Rationality::BestResponse => {
            let r0 = &report.results[0];
            claim(
                &mut claims,
                "abstraction fails on ũ: distribution sets differ in size",
                !report.holds && r0.low_count == 2 && r0.high_count == 1,
                format!("{} low vs {} high", r0.low_count, r0.high_count),
            );
            for d in ["D1", "D2"] {
                let t = VarId::mechanism(d);
                let v = is_agent(&p.low, &t, &RationalityRelation::BestResponse, &u, all_contexts(&p.low, &t)?)?;
                claim(
                    &mut claims,
                    &format!("~{d} best-responds to U"),
                    v.is_agent,
                    format!("{} contexts", v.contexts_checked),
                );
            }
        }
        Rationality::FirstMover => {
            claim(
                &mut claims,
                "abstraction holds on ũ",
                report.holds,
                format!("{}/{}", report.matched, report.tested),
            );
            let (d1, d2) = (VarId::mechanism("D1"), VarId::mechanism("D2"));
            for (me, other) in [(&d1, &d2), (&d2, &d1)] {
                let b = BeliefModel::new(vec![other.clone()], vec![u.clone()])?;
                let v = is_agent(&p.low, me, &RationalityRelation::FirstMover(b), &u, all_contexts(&p.low, me)?)?;
                claim(
                    &mut claims,
                    &format!("{me} is a first mover for U"),
                    v.is_agent,
                    format!("{} contexts", v.contexts_checked),
                );
            }
        }
    }
    let high_doms = [
        (VarId::mechanism("D"), p.high.mech().domain(&VarId::mechanism("D")).expect("declared").clone()),
        (VarId::mechanism("U"), p.high.mech().domain(&VarId::mechanism("U")).expect("declared").clone()),
    ]
    .into();
    let strong = check_strong(&p.low, &p.map, &high_doms, StrongMode::Exhaustive)?;
    claim(&mut claims, "ω is surjective", strong.strong, format!("coverage {}", strong.coverage));
    Ok(finish(name, 0.0, sols, Some(summary(&report)), claims))
}
