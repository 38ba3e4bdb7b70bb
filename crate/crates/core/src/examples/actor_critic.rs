//! The one-step actor-critic model and its single-agent abstraction.

use std::collections::BTreeMap;

use crate::abstraction::{AbstractionMap, Alignment, InterventionMapping, SubsetPolicy, ValueMapping};
use crate::rationality::UtilityFn;
use crate::scm::{
    DeterministicScm, Domain, MechanizedScm, ParameterizedScm, Setting, Value, VarId, DEFAULT_GRID_STEP,
};

pub const DEFAULT_R: [f64; 2] = [0.2, 0.8];
pub const DEFAULT_S: [f64; 2] = [0.1, 0.9];

fn pair(s: &Setting, name: &str) -> [f64; 2] {
    let v = s
        .get(&VarId::mechanism(name))
        .and_then(Value::as_slice)
        .expect("probability pair");
    [v[0], v[1]]
}

/// `Q̃ = (r0 (1 - s0) + r1 s0, r0 (1 - s1) + r1 s1)`.
pub fn critic(r: [f64; 2], s: [f64; 2]) -> [f64; 2] {
    [r[0] * (1.0 - s[0]) + r[1] * s[0], r[0] * (1.0 - s[1]) + r[1] * s[1]]
}

/// `1(s0 r1 + (1 - s0) r0 <= s1 r1 + (1 - s1) r0)`.
pub fn collective_action(r: [f64; 2], s: [f64; 2]) -> i64 {
    i64::from(s[0] * r[1] + (1.0 - s[0]) * r[0] <= s[1] * r[1] + (1.0 - s[1]) * r[0])
}

fn bernoulli(p: f64) -> Vec<(Value, f64)> {
    vec![(Value::Int(1), p), (Value::Int(0), 1.0 - p)]
}

fn int_of(pa: &Setting, name: &str) -> usize {
    pa.get(&VarId::object(name))
        .and_then(Value::as_int)
        .expect("binary parent") as usize
}

/// Object variables shared by both levels: action `A := θ`, state `S` with
/// `P(S = 1 | A = a) = θ[a]`, reward `R` with `P(R = 1 | S = s) = θ[s]`.
fn shared_objects(b: crate::scm::model::ParameterizedScmBuilder) -> crate::scm::model::ParameterizedScmBuilder {
    b.deterministic("A", Domain::range(2), &[], |t, _| t.clone())
        .stochastic("S", Domain::range(2), &["A"], |t, pa| {
            bernoulli(t.as_slice().expect("pair")[int_of(pa, "A")])
        })
        .stochastic("R", Domain::range(2), &["S"], |t, pa| {
            bernoulli(t.as_slice().expect("pair")[int_of(pa, "S")])
        })
}

fn prob_pair(step: f64) -> Domain {
    Domain::unit_box(2, Some(step))
}

/// Low-level model with critic `Q̃` and actor `Ã`.
pub fn actor_critic_low(step: f64) -> MechanizedScm {
    let mech = DeterministicScm::builder()
        .constant("R", prob_pair(step), DEFAULT_R.to_vec())
        .constant("W", Domain::finite([1i64]), 1i64)
        .constant("Y", Domain::finite([1i64]), 1i64)
        .constant("S", prob_pair(step), DEFAULT_S.to_vec())
        .var("Q", prob_pair(step), &["R", "S"], |s| {
            Value::Vector(critic(pair(s, "R"), pair(s, "S")).to_vec())
        })
        .var("A", Domain::range(2), &["Q"], |s| {
            let q = pair(s, "Q");
            Value::Int(i64::from(q[0] <= q[1]))
        })
        .build()
        .expect("valid model");
    let obj = shared_objects(ParameterizedScm::builder())
        .deterministic("Q", Domain::unit_box(2, None), &[], |t, _| t.clone())
        .deterministic("Y", Domain::unit_box(1, None), &["Q", "A"], |_, pa| {
            let q = pa.get(&VarId::object("Q")).and_then(Value::as_slice).expect("Q");
            Value::Real(q[int_of(pa, "A")])
        })
        .deterministic(
            "W",
            Domain::RealBox {
                lower: vec![-1.0],
                upper: vec![0.0],
                step: None,
            },
            &["R", "Y"],
            |_, pa| {
                let r = int_of(pa, "R") as f64;
                let y = pa.get(&VarId::object("Y")).and_then(Value::as_f64).expect("Y");
                Value::Real(-(r - y) * (r - y))
            },
        )
        .build()
        .expect("valid model");
    MechanizedScm::new(mech, obj).expect("paired")
}

/// High-level model with a single decision `Ã*` maximizing expected reward.
pub fn actor_critic_high(step: f64) -> MechanizedScm {
    let mech = DeterministicScm::builder()
        .constant("R", prob_pair(step), DEFAULT_R.to_vec())
        .constant("S", prob_pair(step), DEFAULT_S.to_vec())
        .var("A", Domain::range(2), &["S", "R"], |s| {
            Value::Int(collective_action(pair(s, "R"), pair(s, "S")))
        })
        .build()
        .expect("valid model");
    let obj = shared_objects(ParameterizedScm::builder()).build().expect("valid model");
    MechanizedScm::new(mech, obj).expect("paired")
}

/// Both levels with identity `τ` and `ω` on `A`, `S`, `R`. `Q`, `Y`, `W` are
/// not aligned and are marginalized by `τ`.
pub struct ActorCritic {
    pub low: MechanizedScm,
    pub high: MechanizedScm,
    pub map: AbstractionMap,
}

pub fn actor_critic_pair() -> ActorCritic {
    actor_critic_pair_with_step(DEFAULT_GRID_STEP)
}

pub fn actor_critic_pair_with_step(step: f64) -> ActorCritic {
    let alignment = Alignment::identity(&["A", "S", "R"]);
    ActorCritic {
        low: actor_critic_low(step),
        high: actor_critic_high(step),
        map: AbstractionMap {
            tau: ValueMapping::identity(&alignment),
            omega: InterventionMapping::identity(&alignment),
            alignment,
        },
    }
}

/// Interventions on `(s̃, r̃)` jointly, the setting of the exhaustive grid
/// check.
pub fn state_reward_policy() -> SubsetPolicy {
    SubsetPolicy::Exactly(vec![vec![VarId::mechanism("S"), VarId::mechanism("R")]])
}

/// High-level mechanism domains of the aligned variables at `step`.
pub fn high_domains(step: f64) -> BTreeMap<VarId, Domain> {
    [
        (VarId::mechanism("A"), Domain::range(2)),
        (VarId::mechanism("S"), prob_pair(step)),
        (VarId::mechanism("R"), prob_pair(step)),
    ]
    .into()
}

/// Utility registry: "reward", "constant".
pub fn utility(name: &str) -> Option<UtilityFn> {
    match name {
        "reward" => Some(UtilityFn::of_var(VarId::object("R"))),
        "constant" => Some(UtilityFn::constant(0.0)),
        _ => None,
    }
}
