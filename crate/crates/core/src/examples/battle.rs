//! Battle of the sexes as a mechanized model with two best-responding
//! players and constant payoff mechanisms.

use std::sync::Arc;

use crate::rationality::{TIE_TOL, UtilityFn};
use crate::scm::{
    solve_enumerate_grid, DeterministicScm, Domain, MechanizedScm, ParameterizedScm, ScmError, Setting, Value,
    VarId, DEFAULT_GRID_STEP,
};

/// Payoff table cells, player 1's action first.
pub const CELLS: [&str; 4] = ["O,O", "O,F", "F,O", "F,F"];
pub const PAYOFF_1: [f64; 4] = [2.0, 0.0, 0.0, 1.0];
pub const PAYOFF_2: [f64; 4] = [1.0, 0.0, 0.0, 2.0];
const CODOMAIN: [f64; 3] = [0.0, 1.0, 2.0];

fn cell(d1: &str, d2: &str) -> usize {
    2 * usize::from(d1 == "F") + usize::from(d2 == "F")
}

fn table(s: &Setting, name: &str) -> Vec<f64> {
    s.get(&VarId::mechanism(name))
        .and_then(Value::as_slice)
        .expect("payoff table")
        .to_vec()
}

fn prob(s: &Setting, name: &str) -> f64 {
    s.get(&VarId::mechanism(name))
        .and_then(Value::as_f64)
        .expect("mixed strategy")
}

/// Slope of player 1's expected payoff in `d1` given `d2`.
fn slope_1(u: &[f64], d2: f64) -> f64 {
    d2 * (u[0] - u[2]) + (1.0 - d2) * (u[1] - u[3])
}

/// Slope of player 2's expected payoff in `d2` given `d1`.
fn slope_2(u: &[f64], d1: f64) -> f64 {
    d1 * (u[0] - u[1]) + (1.0 - d1) * (u[2] - u[3])
}

/// Best response on the grid of `[0, 1]`: the expected payoff is linear in
/// the own probability, so the maximizer is an endpoint. On a tie every grid
/// point maximizes and the first one, 0, is chosen.
fn endpoint(slope: f64) -> Value {
    Value::Real(if slope > TIE_TOL { 1.0 } else { 0.0 })
}

/// Closed-form equilibria of a 2x2 game with payoff tables `u1`, `u2`. `None`
/// for degenerate games where a player is indifferent at a pure profile,
/// since those have infinitely many equilibria.
pub fn nash_equilibria_2x2(u1: &[f64], u2: &[f64]) -> Option<Vec<(f64, f64)>> {
    let c = u1[0] - u1[2];
    let d = u1[1] - u1[3];
    let a = u2[0] - u2[1];
    let b = u2[2] - u2[3];
    if [a, b, c, d].iter().any(|x| x.abs() <= TIE_TOL) {
        return None;
    }
    let br1 = |d2: f64| if slope_1(u1, d2) > 0.0 { 1.0 } else { 0.0 };
    let br2 = |d1: f64| if slope_2(u2, d1) > 0.0 { 1.0 } else { 0.0 };
    let mut out = Vec::new();
    for d1 in [1.0, 0.0] {
        for d2 in [1.0, 0.0] {
            if br1(d2) == d1 && br2(d1) == d2 {
                out.push((d1, d2));
            }
        }
    }
    // Interior equilibrium: each player makes the other indifferent.
    if (a - b).abs() > TIE_TOL && (c - d).abs() > TIE_TOL {
        let d1 = b / (b - a);
        let d2 = d / (d - c);
        if d1 > 0.0 && d1 < 1.0 && d2 > 0.0 && d2 < 1.0 {
            out.push((d1, d2));
        }
    }
    Some(out)
}

pub fn battle_of_sexes() -> MechanizedScm {
    battle_of_sexes_with_step(DEFAULT_GRID_STEP)
}

/// The game with mixed strategies discretized at `step`. The closed-form
/// equilibria are registered for interventions that leave both strategies
/// free; other interventions are solved on the grid.
pub fn battle_of_sexes_with_step(step: f64) -> MechanizedScm {
    let strategy = Domain::unit_box(1, Some(step));
    let payoff = Domain::function_table(&CELLS, Some(CODOMAIN.to_vec()));
    let mech = DeterministicScm::builder()
        .var("D1", strategy.clone(), &["D2", "U1"], |s| endpoint(slope_1(&table(s, "U1"), prob(s, "D2"))))
        .var("D2", strategy, &["D1", "U2"], |s| endpoint(slope_2(&table(s, "U2"), prob(s, "D1"))))
        .constant("U1", payoff.clone(), PAYOFF_1.to_vec())
        .constant("U2", payoff, PAYOFF_2.to_vec())
        .build()
        .expect("valid model")
        .with_analytic_solutions(Arc::new(|iv: &Setting| {
            let (d1, d2) = (VarId::mechanism("D1"), VarId::mechanism("D2"));
            if iv.contains(&d1) || iv.contains(&d2) {
                return None;
            }
            let pick = |name: &str, default: &[f64; 4]| {
                iv.get(&VarId::mechanism(name))
                    .and_then(Value::as_slice)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| default.to_vec())
            };
            let (u1, u2) = (pick("U1", &PAYOFF_1), pick("U2", &PAYOFF_2));
            let eqs = nash_equilibria_2x2(&u1, &u2)?;
            Some(
                eqs.into_iter()
                    .map(|(x, y)| {
                        Setting::new()
                            .with(d1.clone(), x)
                            .with(d2.clone(), y)
                            .with(VarId::mechanism("U1"), u1.clone())
                            .with(VarId::mechanism("U2"), u2.clone())
                    })
                    .collect(),
            )
        }));

    let payoff_of = |t: &Value, pa: &Setting| {
        let d1 = pa.get(&VarId::object("D1")).and_then(Value::as_sym).expect("D1");
        let d2 = pa.get(&VarId::object("D2")).and_then(Value::as_sym).expect("D2");
        Value::Real(t.as_slice().expect("payoff table")[cell(d1, d2)])
    };
    let kernel = |t: &Value, _: &Setting| {
        let p = t.as_f64().expect("probability");
        vec![(Value::sym("O"), p), (Value::sym("F"), 1.0 - p)]
    };
    let obj = ParameterizedScm::builder()
        .stochastic("D1", Domain::finite(["O", "F"]), &[], kernel)
        .stochastic("D2", Domain::finite(["O", "F"]), &[], kernel)
        .deterministic("U1", Domain::finite(CODOMAIN), &["D1", "D2"], payoff_of)
        .deterministic("U2", Domain::finite(CODOMAIN), &["D1", "D2"], payoff_of)
        .build()
        .expect("valid model");
    MechanizedScm::new(mech, obj).expect("paired")
}

/// Grid solutions of the game, ignoring the closed-form registration.
pub fn grid_solutions(m: &MechanizedScm) -> Result<Vec<Setting>, ScmError> {
    solve_enumerate_grid(m.mech(), &Setting::new())
}

/// Utility registry: "payoff1", "payoff2", "constant".
pub fn utility(name: &str) -> Option<UtilityFn> {
    match name {
        "payoff1" => Some(UtilityFn::of_var(VarId::object("U1"))),
        "payoff2" => Some(UtilityFn::of_var(VarId::object("U2"))),
        "constant" => Some(UtilityFn::constant(0.0)),
        _ => None,
    }
}
