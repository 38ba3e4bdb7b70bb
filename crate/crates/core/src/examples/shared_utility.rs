//! Two binary decisions optimizing one shared utility table, and their
//! abstraction into a single joint decision.

use crate::abstraction::{
    AbstractionMap, Alignment, DefinedDomain, InterventionMapping, OmegaComponent, SubsetPolicy, ValueMapping,
};
use crate::rationality::{UtilityFn, TIE_TOL};
use crate::scm::{DeterministicScm, Domain, MechanizedScm, ParameterizedScm, Setting, Value, VarId};

use std::sync::Arc;

/// Table cells `(d1, d2)` in the order `00, 01, 10, 11`.
pub const CELLS: [&str; 4] = ["0,0", "0,1", "1,0", "1,1"];
/// `1(d1 = d2 = 0) + 2 · 1(d1 = d2 = 1)`.
pub const DEFAULT_U: [f64; 4] = [1.0, 0.0, 0.0, 2.0];
const CODOMAIN: [f64; 3] = [0.0, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rationality {
    BestResponse,
    FirstMover,
}

fn utility_table(s: &Setting) -> [f64; 4] {
    let v = s
        .get(&VarId::mechanism("U"))
        .and_then(Value::as_slice)
        .expect("utility table");
    [v[0], v[1], v[2], v[3]]
}

fn u_at(u: &[f64; 4], d1: usize, d2: usize) -> f64 {
    u[2 * d1 + d2]
}

fn argmax_first(scores: [f64; 2]) -> usize {
    if scores[1] > scores[0] + TIE_TOL {
        1
    } else {
        0
    }
}

/// Best response of one player to the other's choice; `first` selects
/// whether the responder is player 1.
fn best_response(u: &[f64; 4], other: usize, first: bool) -> usize {
    let score = |own: usize| if first { u_at(u, own, other) } else { u_at(u, other, own) };
    argmax_first([score(0), score(1)])
}

/// First-mover choice: the own value maximizing the utility reached once the
/// other player best-responds. With a shared utility the follower's best
/// response attains the row maximum.
pub fn first_mover_choice(u: &[f64; 4], first: bool) -> usize {
    let value = |own: usize| {
        let at = |other: usize| if first { u_at(u, own, other) } else { u_at(u, other, own) };
        at(0).max(at(1))
    };
    argmax_first([value(0), value(1)])
}

fn int_param(s: &Setting, name: &str) -> usize {
    s.get(&VarId::mechanism(name))
        .and_then(Value::as_int)
        .expect("binary decision") as usize
}

fn utility_domain() -> Domain {
    Domain::function_table(&CELLS, Some(CODOMAIN.to_vec()))
}

pub fn shared_utility_low(r: Rationality) -> MechanizedScm {
    let b = DeterministicScm::builder();
    let b = match r {
        Rationality::BestResponse => b
            .var("D1", Domain::range(2), &["D2", "U"], |s| {
                Value::Int(best_response(&utility_table(s), int_param(s, "D2"), true) as i64)
            })
            .var("D2", Domain::range(2), &["D1", "U"], |s| {
                Value::Int(best_response(&utility_table(s), int_param(s, "D1"), false) as i64)
            }),
        Rationality::FirstMover => b
            .var("D1", Domain::range(2), &["U"], |s| {
                Value::Int(first_mover_choice(&utility_table(s), true) as i64)
            })
            .var("D2", Domain::range(2), &["U"], |s| {
                Value::Int(first_mover_choice(&utility_table(s), false) as i64)
            }),
    };
    let mech = b.constant("U", utility_domain(), DEFAULT_U.to_vec()).build().expect("valid model");
    let obj = ParameterizedScm::builder()
        .deterministic("D1", Domain::range(2), &[], |t, _| t.clone())
        .deterministic("D2", Domain::range(2), &[], |t, _| t.clone())
        .deterministic("U", Domain::finite(CODOMAIN), &["D1", "D2"], |t, pa| {
            let d = |n: &str| pa.get(&VarId::object(n)).and_then(Value::as_int).expect("decision") as usize;
            Value::Real(t.as_slice().expect("table")[2 * d("D1") + d("D2")])
        })
        .build()
        .expect("valid model");
    MechanizedScm::new(mech, obj).expect("paired")
}

fn joint_values() -> Vec<Value> {
    vec![
        Value::Vector(vec![0.0, 0.0]),
        Value::Vector(vec![0.0, 1.0]),
        Value::Vector(vec![1.0, 0.0]),
        Value::Vector(vec![1.0, 1.0]),
    ]
}

/// High-level model: one joint decision `D̃* ∈ {0,1}²` best-responding to the
/// utility table.
pub fn shared_utility_high() -> MechanizedScm {
    let mech = DeterministicScm::builder()
        .var("D", Domain::Finite { values: joint_values() }, &["U"], |s| {
            let u = utility_table(s);
            let mut best = 0;
            for k in 1..4 {
                if u[k] > u[best] + TIE_TOL {
                    best = k;
                }
            }
            joint_values().swap_remove(best)
        })
        .constant("U", utility_domain(), DEFAULT_U.to_vec())
        .build()
        .expect("valid model");
    let obj = ParameterizedScm::builder()
        .deterministic("D", Domain::Finite { values: joint_values() }, &[], |t, _| t.clone())
        .deterministic("U", Domain::finite(CODOMAIN), &["D"], |t, pa| {
            let d = pa.get(&VarId::object("D")).and_then(Value::as_slice).expect("joint decision");
            Value::Real(t.as_slice().expect("table")[2 * d[0] as usize + d[1] as usize])
        })
        .build()
        .expect("valid model");
    MechanizedScm::new(mech, obj).expect("paired")
}

pub struct SharedUtility {
    pub low: MechanizedScm,
    pub high: MechanizedScm,
    pub map: AbstractionMap,
}

fn joint_of(s: &Setting, a: &VarId, b: &VarId) -> Value {
    let x = |v: &VarId| s.get(v).and_then(Value::as_int).expect("binary") as f64;
    Value::Vector(vec![x(a), x(b)])
}

/// `τ_{D*}({d1, d2}) = (d1, d2)`, `τ_{U*}(u) = u`, and the same pairing for
/// `ω`.
pub fn shared_utility_pair(r: Rationality) -> SharedUtility {
    let (d1, d2) = (VarId::object("D1"), VarId::object("D2"));
    let alignment = Alignment::new([
        (VarId::object("D"), vec![d1.clone(), d2.clone()]),
        (VarId::object("U"), vec![VarId::object("U")]),
    ])
    .expect("disjoint");
    let tau = ValueMapping::identity(&alignment).with(VarId::object("D"), move |s| joint_of(s, &d1, &d2));
    let (m1, m2) = (VarId::mechanism("D1"), VarId::mechanism("D2"));
    let (p1, p2) = (m1.clone(), m2.clone());
    let joint = OmegaComponent {
        defined: DefinedDomain::Grid { step: None },
        map: Arc::new(move |s| joint_of(s, &m1, &m2)),
        preimage: Some(Arc::new(move |v| {
            let d = v.as_slice()?;
            Some(
                Setting::new()
                    .with(p1.clone(), d[0] as i64)
                    .with(p2.clone(), d[1] as i64),
            )
        })),
    };
    let omega = InterventionMapping::identity(&alignment).with(VarId::mechanism("D"), joint);
    SharedUtility {
        low: shared_utility_low(r),
        high: shared_utility_high(),
        map: AbstractionMap { alignment, tau, omega },
    }
}

/// The intervention setting the utility table to `u`.
pub fn utility_intervention(u: [f64; 4]) -> Setting {
    Setting::new().with(VarId::mechanism("U"), u.to_vec())
}

/// Interventions on the utility table only.
pub fn utility_policy() -> SubsetPolicy {
    SubsetPolicy::Exactly(vec![vec![VarId::mechanism("U")]])
}

/// Utility registry: "payoff1" and "payoff2" both name the shared `U`.
pub fn utility(name: &str) -> Option<UtilityFn> {
    match name {
        "payoff1" | "payoff2" | "shared" => Some(UtilityFn::of_var(VarId::object("U"))),
        "constant" => Some(UtilityFn::constant(0.0)),
        _ => None,
    }
}
