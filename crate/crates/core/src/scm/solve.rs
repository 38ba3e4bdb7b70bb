//! Solution sets of deterministic mechanism models under hard interventions.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::model::DeterministicScm;
use super::setting::Setting;
use super::value::{cartesian, Value, VarId, VALUE_TOL};
use super::ScmError;

/// Largest number of candidate settings examined for one strongly connected
/// block of the mechanism graph.
pub const ENUMERATION_LIMIT: usize = 10_000_000;

fn check_intervention(m: &DeterministicScm, intervention: &Setting) -> Result<(), ScmError> {
    for (var, value) in intervention {
        let dom = m
            .domain(var)
            .ok_or_else(|| ScmError::UnknownVariable(var.to_string()))?;
        if !dom.contains(value, VALUE_TOL) {
            return Err(ScmError::ValueOutOfDomain {
                var: var.to_string(),
                value: value.to_string(),
            });
        }
    }
    Ok(())
}

fn sort_dedup(mut sols: Vec<Setting>) -> Vec<Setting> {
    sols.sort_by(|a, b| a.canonical_cmp(b));
    sols.dedup_by(|a, b| a.approx_eq(b, VALUE_TOL));
    sols
}

/// `Sol(M; y)`. Uses the registered closed-form solution set when it covers
/// the intervention, otherwise enumerates the (discretized) domains.
pub fn solve_enumerate(m: &DeterministicScm, intervention: &Setting) -> Result<Vec<Setting>, ScmError> {
    check_intervention(m, intervention)?;
    if let Some(analytic) = m.analytic_solutions() {
        if let Some(sols) = analytic(intervention) {
            for s in &sols {
                let fixed = s.project(intervention.vars());
                if !fixed.approx_eq(intervention, VALUE_TOL) || s.len() != m.vars().len() {
                    return Err(ScmError::InvalidModel(
                        "registered closed-form solution violates the intervention".into(),
                    ));
                }
            }
            return Ok(sort_dedup(sols));
        }
    }
    solve_enumerate_grid(m, intervention)
}

/// `Sol(M; y)` by brute force over the enumerable domains, ignoring any
/// closed-form registration.
///
/// The non-intervened variables are split into strongly connected blocks of
/// the parent graph. Acyclic blocks are evaluated directly; cyclic blocks are
/// searched over the product of their domains given the upstream values.
pub fn solve_enumerate_grid(m: &DeterministicScm, intervention: &Setting) -> Result<Vec<Setting>, ScmError> {
    check_intervention(m, intervention)?;
    let free: Vec<&VarId> = m.vars().iter().filter(|v| !intervention.contains(v)).collect();
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..free.len()).map(|i| graph.add_node(i)).collect();
    for (ci, child) in free.iter().enumerate() {
        for p in m.parents(child) {
            if let Some(pi) = free.iter().position(|v| *v == p) {
                graph.add_edge(nodes[pi], nodes[ci], ());
            }
        }
    }
    let mut blocks = tarjan_scc(&graph);
    blocks.reverse();

    let mut partials = vec![intervention.clone()];
    for block in blocks {
        let members: Vec<&VarId> = block.iter().map(|n| free[graph[*n]]).collect();
        let cyclic = members.len() > 1;
        let mut next = Vec::new();
        if !cyclic {
            let var = members[0];
            let dom = m.domain(var).expect("declared");
            for s in partials {
                let v = m.evaluate(var, &s)?;
                if !dom.contains(&v, VALUE_TOL) {
                    return Err(ScmError::ValueOutOfDomain {
                        var: var.to_string(),
                        value: v.to_string(),
                    });
                }
                next.push(s.with(var.clone(), v));
            }
        } else {
            let axes = members
                .iter()
                .map(|v| m.domain(v).expect("declared").enumerate(v))
                .collect::<Result<Vec<_>, _>>()?;
            let size = axes.iter().fold(partials.len() as f64, |acc, a| acc * a.len() as f64);
            if size > ENUMERATION_LIMIT as f64 {
                return Err(ScmError::EnumerationTooLarge {
                    size,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let combos = cartesian(&axes);
            for s in &partials {
                for combo in &combos {
                    let mut cand = s.clone();
                    for (var, val) in members.iter().zip(combo) {
                        cand.insert((*var).clone(), val.clone());
                    }
                    let mut ok = true;
                    for (var, val) in members.iter().zip(combo) {
                        if !m.evaluate(var, &cand)?.approx_eq(val, VALUE_TOL) {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        next.push(cand);
                    }
                }
            }
        }
        partials = next;
        if partials.is_empty() {
            break;
        }
    }
    Ok(sort_dedup(partials))
}

/// Result of a successful fixed-point search.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub setting: Setting,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped synchronous (Jacobi) iteration `x <- x + damping (F(x) - x)` on the
/// non-intervened variables. Real and vector values are damped; discrete
/// values are replaced. Succeeds once the max-norm residual of one undamped
/// update is at most `tol`.
pub fn solve_fixed_point(
    m: &DeterministicScm,
    intervention: &Setting,
    init: &Setting,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, ScmError> {
    check_intervention(m, intervention)?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(ScmError::InvalidModel(format!("damping {damping} outside (0, 1]")));
    }
    let free: Vec<&VarId> = m.vars().iter().filter(|v| !intervention.contains(v)).collect();
    let mut x = init.union(intervention);
    let missing: Vec<String> = free.iter().filter(|v| !x.contains(v)).map(|v| v.to_string()).collect();
    if !missing.is_empty() {
        return Err(ScmError::IncompleteSolution { missing });
    }
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        let images = free
            .iter()
            .map(|v| m.evaluate(v, &x))
            .collect::<Result<Vec<_>, _>>()?;
        residual = free
            .iter()
            .zip(&images)
            .map(|(v, fx)| x.get(v).expect("assigned").distance(fx))
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(FixedPoint {
                setting: x,
                iterations: iter,
                residual,
            });
        }
        if !residual.is_finite() && images.iter().all(|v| v.as_sym().is_none() && v.as_int().is_none()) {
            break;
        }
        for (v, fx) in free.iter().zip(images) {
            let cur = x.get(v).expect("assigned");
            let updated = match (cur, &fx) {
                (Value::Real(a), Value::Real(b)) => Value::Real(a + damping * (b - a)),
                (Value::Vector(a), Value::Vector(b)) if a.len() == b.len() => {
                    Value::Vector(a.iter().zip(b).map(|(a, b)| a + damping * (b - a)).collect())
                }
                _ => fx,
            };
            x.insert((*v).clone(), updated);
        }
    }
    Err(ScmError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}
