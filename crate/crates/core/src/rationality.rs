//! Utility functions, rationality relations and agent detection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::scm::{
    distribution, exact_distribution, induce_scm, Distribution, DistributionMode, ExactDist, Layer, MechanizedScm,
    ScmError, Setting, Value, VarId, VALUE_TOL,
};
use crate::scm::value::cartesian;

/// Expected utilities closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;

/// Conditionals that differ by more than this count as different.
pub const CONDITIONAL_TOL: f64 = 1e-9;

/// Largest joint setting count searched by first-mover rationality.
pub const FIRST_MOVER_LIMIT: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationalityError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("{target} has an empty domain")]
    EmptyDomain { target: String },
    #[error("no joint setting satisfies the belief model of {target} in context {context}")]
    EmptyResponseSet { target: String, context: String },
    #[error("{size} joint settings exceed the first-mover search limit of {limit}")]
    TooManySettings { size: f64, limit: usize },
    #[error("invalid belief model: {0}")]
    InvalidBelief(String),
}

/// A real-valued function of the object variables that reads only
/// `depends_on`.
#[derive(Clone)]
pub struct UtilityFn {
    name: String,
    depends_on: Vec<VarId>,
    f: Arc<dyn Fn(&Setting) -> f64 + Send + Sync>,
}

impl fmt::Debug for UtilityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UtilityFn({}; {:?})", self.name, self.depends_on)
    }
}

impl UtilityFn {
    pub fn new<F>(name: &str, depends_on: &[VarId], f: F) -> Self
    where
        F: Fn(&Setting) -> f64 + Send + Sync + 'static,
    {
        UtilityFn {
            name: name.to_string(),
            depends_on: depends_on.to_vec(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        UtilityFn::new("constant", &[], move |_| c)
    }

    /// The numeric value of one object variable.
    pub fn of_var(var: VarId) -> Self {
        let v = var.clone();
        UtilityFn::new(&var.to_string(), &[var], move |s| {
            s.get(&v).and_then(Value::as_f64).unwrap_or(f64::NAN)
        })
    }

    /// `a * u + b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let inner = self.clone();
        UtilityFn::new(&format!("{a}*{}+{b}", self.name), &self.depends_on, move |s| {
            a * inner.evaluate(s) + b
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depends_on(&self) -> &[VarId] {
        &self.depends_on
    }

    /// Evaluates on the projection of `v` onto `depends_on`.
    pub fn evaluate(&self, v: &Setting) -> f64 {
        (self.f)(&v.project(&self.depends_on))
    }
}

/// How expectations are computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EuMode {
    Exact,
    MonteCarlo { n: usize, seed: u64 },
}

impl EuMode {
    pub fn monte_carlo_default() -> Self {
        EuMode::MonteCarlo { n: 100_000, seed: 0 }
    }
}

fn object_distribution(m: &MechanizedScm, full: &Setting) -> Result<ExactDist, ScmError> {
    exact_distribution(&induce_scm(m, full)?)
}

/// `E_s(U(V))` under the object distribution induced by a full mechanism
/// setting, computed exactly.
pub fn expected_utility(m: &MechanizedScm, full_mech_setting: &Setting, u: &UtilityFn) -> Result<f64, ScmError> {
    expected_utility_with(m, full_mech_setting, u, EuMode::Exact)
}

pub fn expected_utility_with(
    m: &MechanizedScm,
    full_mech_setting: &Setting,
    u: &UtilityFn,
    mode: EuMode,
) -> Result<f64, ScmError> {
    match mode {
        EuMode::Exact => Ok(object_distribution(m, full_mech_setting)?.expectation(|s| u.evaluate(s))),
        EuMode::MonteCarlo { n, seed } => {
            let scm = induce_scm(m, full_mech_setting)?;
            match distribution(&scm, DistributionMode::Sample { n, seed })? {
                Distribution::Empirical(e) => {
                    Ok(e.samples().iter().map(|s| u.evaluate(s)).sum::<f64>() / n.max(1) as f64)
                }
                Distribution::Exact(d) => Ok(d.expectation(|s| u.evaluate(s))),
            }
        }
    }
}

fn check_context(m: &MechanizedScm, target: &VarId, context: &Setting) -> Result<(), ScmError> {
    if !m.mech().contains(target) {
        return Err(ScmError::UnknownVariable(target.to_string()));
    }
    let missing: Vec<String> = m
        .mech_vars()
        .iter()
        .filter(|v| *v != target && !context.contains(v))
        .map(|v| v.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ScmError::IncompleteSolution { missing })
    }
}

/// Expected utility of every value of `target` in a context.
pub fn response_utilities(
    m: &MechanizedScm,
    target: &VarId,
    context: &Setting,
    u: &UtilityFn,
) -> Result<Vec<(Value, f64)>, RationalityError> {
    check_context(m, target, context)?;
    let dom = m.mech().domain(target).expect("checked").enumerate(target)?;
    if dom.is_empty() {
        return Err(RationalityError::EmptyDomain {
            target: target.to_string(),
        });
    }
    let base = context.without(target);
    dom.into_iter()
        .map(|v| {
            let eu = expected_utility(m, &base.clone().with(target.clone(), v.clone()), u)?;
            Ok((v, eu))
        })
        .collect()
}

fn argmax_set(scored: Vec<(Value, f64)>, tol: f64) -> Vec<Value> {
    let best = scored.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|(_, e)| *e >= best - tol)
        .map(|(v, _)| v)
        .collect()
}

/// `R^BR_target(context)` with ties within [`TIE_TOL`].
pub fn best_response_set(
    m: &MechanizedScm,
    target: &VarId,
    context: &Setting,
    u: &UtilityFn,
) -> Result<Vec<Value>, RationalityError> {
    best_response_set_tol(m, target, context, u, TIE_TOL)
}

pub fn best_response_set_tol(
    m: &MechanizedScm,
    target: &VarId,
    context: &Setting,
    u: &UtilityFn,
    tie_tol: f64,
) -> Result<Vec<Value>, RationalityError> {
    Ok(argmax_set(response_utilities(m, target, context, u)?, tie_tol))
}

/// Which other mechanism variables a first mover believes to be agents, and
/// the utility it attributes to each.
#[derive(Clone, Debug)]
pub struct BeliefModel {
    agents: Vec<VarId>,
    utilities: Vec<UtilityFn>,
}

impl BeliefModel {
    pub fn new(agents: Vec<VarId>, utilities: Vec<UtilityFn>) -> Result<Self, RationalityError> {
        if agents.len() != utilities.len() {
            return Err(RationalityError::InvalidBelief(format!(
                "{} agents but {} utilities",
                agents.len(),
                utilities.len()
            )));
        }
        let distinct: BTreeSet<&VarId> = agents.iter().collect();
        if distinct.len() != agents.len() {
            return Err(RationalityError::InvalidBelief("believed agents repeat".into()));
        }
        if let Some(a) = agents.iter().find(|a| a.layer() != Layer::Mechanism) {
            return Err(RationalityError::InvalidBelief(format!("{a} is not a mechanism variable")));
        }
        Ok(BeliefModel { agents, utilities })
    }

    pub fn empty() -> Self {
        BeliefModel {
            agents: Vec::new(),
            utilities: Vec::new(),
        }
    }

    pub fn agents(&self) -> &[VarId] {
        &self.agents
    }

    pub fn utilities(&self) -> &[UtilityFn] {
        &self.utilities
    }
}

/// Joint settings in `R` that attain the maximal expected utility, together
/// with that utility.
pub fn first_mover_optimal_settings(
    m: &MechanizedScm,
    target: &VarId,
    b: &BeliefModel,
    u: &UtilityFn,
    context: &Setting,
) -> Result<(Vec<Setting>, f64), RationalityError> {
    check_context(m, target, context)?;
    if b.agents.contains(target) {
        return Err(RationalityError::InvalidBelief(format!("{target} cannot believe itself an agent")));
    }
    for a in &b.agents {
        if !m.mech().contains(a) {
            return Err(ScmError::UnknownVariable(a.to_string()).into());
        }
    }
    let free: Vec<VarId> = std::iter::once(target.clone()).chain(b.agents.iter().cloned()).collect();
    let axes = free
        .iter()
        .map(|v| m.mech().domain(v).expect("declared").enumerate(v))
        .collect::<Result<Vec<_>, _>>()?;
    let size = axes.iter().fold(1.0, |acc, a| acc * a.len() as f64);
    if size > FIRST_MOVER_LIMIT as f64 {
        return Err(RationalityError::TooManySettings {
            size,
            limit: FIRST_MOVER_LIMIT,
        });
    }
    let base = context.without(target);
    let mut feasible: Vec<(Setting, f64)> = Vec::new();
    for combo in cartesian(&axes) {
        let mut w = base.clone();
        for (v, x) in free.iter().zip(combo) {
            w.insert(v.clone(), x);
        }
        let mut ok = true;
        for (a, ua) in b.agents.iter().zip(&b.utilities) {
            let br = best_response_set(m, a, &w, ua)?;
            if !br.iter().any(|x| x.approx_eq(w.get(a).expect("assigned"), VALUE_TOL)) {
                ok = false;
                break;
            }
        }
        if ok {
            let eu = expected_utility(m, &w, u)?;
            feasible.push((w, eu));
        }
    }
    if feasible.is_empty() {
        return Err(RationalityError::EmptyResponseSet {
            target: target.to_string(),
            context: context.to_string(),
        });
    }
    let best = feasible.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    let opt = feasible
        .into_iter()
        .filter(|(_, e)| *e >= best - TIE_TOL)
        .map(|(s, _)| s)
        .collect();
    Ok((opt, best))
}

/// `R^FM_target(context)`: the target's values in the first-mover optimal
/// joint settings.
pub fn first_mover_response(
    m: &MechanizedScm,
    target: &VarId,
    b: &BeliefModel,
    u: &UtilityFn,
    context: &Setting,
) -> Result<Vec<Value>, RationalityError> {
    let (opt, _) = first_mover_optimal_settings(m, target, b, u, context)?;
    let mut out: Vec<Value> = Vec::new();
    for s in opt {
        let v = s.get(target).expect("assigned").clone();
        if !out.iter().any(|x| x.approx_eq(&v, VALUE_TOL)) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| a.canonical_cmp(b));
    Ok(out)
}

/// Response predicate of a custom rationality relation:
/// `(context, candidate) -> acceptable`.
pub type ResponsePredicate = Arc<dyn Fn(&Setting, &Value) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum RationalityRelation {
    BestResponse,
    FirstMover(BeliefModel),
    Custom(ResponsePredicate),
}

impl fmt::Debug for RationalityRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalityRelation::BestResponse => write!(f, "BestResponse"),
            RationalityRelation::FirstMover(b) => write!(f, "FirstMover({:?})", b.agents),
            RationalityRelation::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RationalityRelation {
    /// The set of acceptable responses of `target` in `context`.
    pub fn response_set(
        &self,
        m: &MechanizedScm,
        target: &VarId,
        context: &Setting,
        u: &UtilityFn,
    ) -> Result<Vec<Value>, RationalityError> {
        match self {
            RationalityRelation::BestResponse => best_response_set(m, target, context, u),
            RationalityRelation::FirstMover(b) => first_mover_response(m, target, b, u, context),
            RationalityRelation::Custom(pred) => {
                check_context(m, target, context)?;
                let dom = m.mech().domain(target).expect("checked").enumerate(target)?;
                let set: Vec<Value> = dom.into_iter().filter(|v| pred(context, v)).collect();
                if set.is_empty() {
                    return Err(RationalityError::EmptyResponseSet {
                        target: target.to_string(),
                        context: context.to_string(),
                    });
                }
                Ok(set)
            }
        }
    }
}

/// A context in which the mechanism does not pick an acceptable response.
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub context: Setting,
    pub response: Value,
    pub response_set: Vec<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgentVerdict {
    pub is_agent: bool,
    pub contexts_checked: usize,
    pub counterexample: Option<Counterexample>,
}

/// Whether `F_target(c) ∈ R_target(c)` for every supplied context. Stops at
/// the first violation.
pub fn is_agent<I>(
    m: &MechanizedScm,
    target: &VarId,
    r: &RationalityRelation,
    u: &UtilityFn,
    contexts: I,
) -> Result<AgentVerdict, RationalityError>
where
    I: IntoIterator<Item = Setting>,
{
    let mut checked = 0;
    for c in contexts {
        checked += 1;
        let response = m.mech().evaluate(target, &c)?;
        let set = r.response_set(m, target, &c, u)?;
        if !set.iter().any(|x| x.approx_eq(&response, VALUE_TOL)) {
            return Ok(AgentVerdict {
                is_agent: false,
                contexts_checked: checked,
                counterexample: Some(Counterexample {
                    context: c,
                    response,
                    response_set: set,
                }),
            });
        }
    }
    Ok(AgentVerdict {
        is_agent: true,
        contexts_checked: checked,
        counterexample: None,
    })
}

/// Every setting of the mechanism variables other than `target`, from their
/// (discretized) domains.
pub fn all_contexts(m: &MechanizedScm, target: &VarId) -> Result<Vec<Setting>, ScmError> {
    let others: Vec<&VarId> = m.mech_vars().iter().filter(|v| *v != target).collect();
    let axes = others
        .iter()
        .map(|v| m.mech().domain(v).expect("declared").enumerate(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cartesian(&axes)
        .into_iter()
        .map(|vals| others.iter().map(|v| (*v).clone()).zip(vals).collect())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct NontrivialVerdict {
    pub agent: AgentVerdict,
    /// Two contexts whose induced conditionals of the object variable differ.
    pub witness: Option<(Setting, Setting)>,
    /// Parent configurations that had positive probability under one context
    /// of a compared pair but not the other; they were not compared.
    pub flagged_configs: usize,
    pub is_nontrivial: bool,
}

/// Induced `P(S | PA_S)` on the parent configurations with positive
/// probability.
fn induced_conditional(
    m: &MechanizedScm,
    target: &VarId,
    context: &Setting,
) -> Result<Vec<(Setting, ExactDist)>, ScmError> {
    let response = m.mech().evaluate(target, context)?;
    let full = context.without(target).with(target.clone(), response);
    let obj = target.paired(Layer::Object);
    let parents = m.obj().parents(&obj).to_vec();
    Ok(object_distribution(m, &full)?.conditional(&obj, &parents))
}

/// Compares two conditional tables on their common parent configurations.
/// Returns (differs, number of configurations present in only one table).
fn compare_conditionals(a: &[(Setting, ExactDist)], b: &[(Setting, ExactDist)]) -> (bool, usize) {
    let mut flagged = 0;
    let mut differs = false;
    for (pa, da) in a {
        match b.iter().find(|(pb, _)| pb.approx_eq(pa, VALUE_TOL)) {
            Some((_, db)) => {
                if da.max_abs_diff(db) > CONDITIONAL_TOL {
                    differs = true;
                }
            }
            None => flagged += 1,
        }
    }
    flagged += b
        .iter()
        .filter(|(pb, _)| !a.iter().any(|(pa, _)| pa.approx_eq(pb, VALUE_TOL)))
        .count();
    (differs, flagged)
}

/// An agent whose induced conditional `P(S | PA_S)` is not the same in all
/// supplied contexts.
pub fn is_nontrivial_agent<I>(
    m: &MechanizedScm,
    target: &VarId,
    r: &RationalityRelation,
    u: &UtilityFn,
    contexts: I,
) -> Result<NontrivialVerdict, RationalityError>
where
    I: IntoIterator<Item = Setting>,
{
    let contexts: Vec<Setting> = contexts.into_iter().collect();
    let agent = is_agent(m, target, r, u, contexts.iter().cloned())?;
    // Contexts are grouped by their conditional tables; only one
    // representative per distinct table needs comparing.
    let mut reps: Vec<(Setting, Vec<(Setting, ExactDist)>)> = Vec::new();
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    let mut witness = None;
    let mut flagged = 0;
    for c in &contexts {
        let cond = induced_conditional(m, target, c)?;
        let key = serde_json::to_string(&cond.iter().map(|(p, d)| (p, d.entries())).collect::<Vec<_>>())
            .expect("serializable");
        if seen.insert(key, ()).is_some() {
            continue;
        }
        for (rc, rcond) in &reps {
            let (differs, f) = compare_conditionals(rcond, &cond);
            flagged += f;
            if differs && witness.is_none() {
                witness = Some((rc.clone(), c.clone()));
            }
        }
        if witness.is_some() {
            break;
        }
        reps.push((c.clone(), cond));
    }
    let is_nontrivial = agent.is_agent && witness.is_some();
    Ok(NontrivialVerdict {
        agent,
        witness,
        flagged_configs: flagged,
        is_nontrivial,
    })
}

/// Whether `F_target` takes one value in every context of its parents.
pub fn has_independent_mechanism(m: &crate::scm::DeterministicScm, target: &VarId) -> Result<bool, ScmError> {
    if !m.contains(target) {
        return Err(ScmError::UnknownVariable(target.to_string()));
    }
    let parents = m.parents(target).to_vec();
    let axes = parents
        .iter()
        .map(|p| m.domain(p).expect("declared").enumerate(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut first: Option<Value> = None;
    for vals in cartesian(&axes) {
        let ctx: Setting = parents.iter().cloned().zip(vals).collect();
        let v = m.evaluate(target, &ctx)?;
        match &first {
            None => first = Some(v),
            Some(f) if !f.approx_eq(&v, VALUE_TOL) => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{DeterministicScm, Domain, ParameterizedScm};

    /// Coordination game: two binary choices, each best-responding to the
    /// other under a shared payoff of 1 when they match.
    fn coordination() -> MechanizedScm {
        let copy = |other: &'static str| move |s: &Setting| s.get(&VarId::mechanism(other)).unwrap().clone();
        let mech = DeterministicScm::builder()
            .var("X", Domain::range(2), &["Y"], copy("Y"))
            .var("Y", Domain::range(2), &["X"], copy("X"))
            .constant("U", Domain::range(1), 0i64)
            .build()
            .unwrap();
        let obj = ParameterizedScm::builder()
            .deterministic("X", Domain::range(2), &[], |t, _| t.clone())
            .deterministic("Y", Domain::range(2), &[], |t, _| t.clone())
            .deterministic("U", Domain::finite([0.0, 1.0]), &["X", "Y"], |_, pa| {
                let x = pa.get(&VarId::object("X")).unwrap();
                let y = pa.get(&VarId::object("Y")).unwrap();
                Value::Real(if x == y { 1.0 } else { 0.0 })
            })
            .build()
            .unwrap();
        MechanizedScm::new(mech, obj).unwrap()
    }

    fn u() -> UtilityFn {
        UtilityFn::of_var(VarId::object("U"))
    }

    fn ctx(y: i64) -> Setting {
        Setting::new()
            .with(VarId::mechanism("Y"), y)
            .with(VarId::mechanism("U"), 0i64)
    }

    #[test]
    fn constant_utility_expectation() {
        let m = coordination();
        let s = ctx(1).with(VarId::mechanism("X"), 0i64);
        assert_eq!(expected_utility(&m, &s, &UtilityFn::constant(5.0)).unwrap(), 5.0);
    }

    #[test]
    fn best_response_follows_the_other_player() {
        let m = coordination();
        let x = VarId::mechanism("X");
        assert_eq!(best_response_set(&m, &x, &ctx(1), &u()).unwrap(), vec![Value::Int(1)]);
        assert_eq!(
            best_response_set(&m, &x, &ctx(1), &UtilityFn::constant(0.0)).unwrap().len(),
            2
        );
    }

    #[test]
    fn copying_mechanism_is_a_nontrivial_agent() {
        let m = coordination();
        let x = VarId::mechanism("X");
        let cs = all_contexts(&m, &x).unwrap();
        let v = is_nontrivial_agent(&m, &x, &RationalityRelation::BestResponse, &u(), cs).unwrap();
        assert!(v.agent.is_agent);
        assert!(v.is_nontrivial);
        assert!(!has_independent_mechanism(m.mech(), &x).unwrap());
        assert!(has_independent_mechanism(m.mech(), &VarId::mechanism("U")).unwrap());
    }

    #[test]
    fn negated_utility_gives_counterexample() {
        let m = coordination();
        let x = VarId::mechanism("X");
        let cs = all_contexts(&m, &x).unwrap();
        let v = is_agent(&m, &x, &RationalityRelation::BestResponse, &u().affine(-1.0, 0.0), cs).unwrap();
        assert!(!v.is_agent);
        let ce = v.counterexample.unwrap();
        assert_eq!(ce.context, ctx(0));
        assert_eq!(ce.response, Value::Int(0));
    }

    #[test]
    fn first_mover_with_empty_beliefs_is_best_response() {
        let m = coordination();
        let x = VarId::mechanism("X");
        for y in 0..2 {
            assert_eq!(
                first_mover_response(&m, &x, &BeliefModel::empty(), &u(), &ctx(y)).unwrap(),
                best_response_set(&m, &x, &ctx(y), &u()).unwrap()
            );
        }
    }

    #[test]
    fn first_mover_anticipates_the_follower() {
        let m = coordination();
        let x = VarId::mechanism("X");
        let y = VarId::mechanism("Y");
        let b = BeliefModel::new(vec![y], vec![u()]).unwrap();
        let (opt, best) = first_mover_optimal_settings(&m, &x, &b, &u(), &ctx(0)).unwrap();
        assert_eq!(opt.len(), 2);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn invalid_beliefs() {
        let y = VarId::mechanism("Y");
        assert!(BeliefModel::new(vec![y.clone()], vec![]).is_err());
        assert!(BeliefModel::new(vec![y.clone(), y], vec![u(), u()]).is_err());
    }

    #[test]
    fn custom_relation_with_empty_response_set_errors() {
        let m = coordination();
        let x = VarId::mechanism("X");
        let r = RationalityRelation::Custom(Arc::new(|_, _| false));
        assert!(matches!(
            r.response_set(&m, &x, &ctx(0), &u()),
            Err(RationalityError::EmptyResponseSet { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_close_to_exact() {
        let m = coordination();
        let s = ctx(1).with(VarId::mechanism("X"), 1i64);
        let mc = expected_utility_with(&m, &s, &u(), EuMode::monte_carlo_default()).unwrap();
        assert!((mc - 1.0).abs() < 1e-12);
    }
}
