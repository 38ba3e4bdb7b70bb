//! Deterministic (cyclic) mechanism models, parameterized object models and
//! their pairing into mechanized models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::setting::Setting;
use super::value::{Domain, Layer, Value, VarId, VALUE_TOL};
use super::ScmError;

/// Structural function of a mechanism variable. It receives the projection of
/// the current setting onto the declared parents.
pub type MechanismFn = Arc<dyn Fn(&Setting) -> Value + Send + Sync>;

/// Closed-form solution sets. Given an intervention, returns the full set of
/// solutions if the closed form covers that intervention, `None` otherwise.
pub type AnalyticSolutions = Arc<dyn Fn(&Setting) -> Option<Vec<Setting>> + Send + Sync>;

/// Object-level assignment `(theta, parent setting, noise value) -> value`.
pub type AssignmentFn = Arc<dyn Fn(&Value, &Setting, &Value) -> Value + Send + Sync>;

/// Conditional distribution of an object variable given its parameter and
/// parents, with the noise already marginalized out.
pub type KernelFn = Arc<dyn Fn(&Value, &Setting) -> Vec<(Value, f64)> + Send + Sync>;

#[derive(Clone)]
pub struct Mechanism {
    parents: Vec<VarId>,
    func: MechanismFn,
}

impl Mechanism {
    pub fn parents(&self) -> &[VarId] {
        &self.parents
    }
}

/// A deterministic, possibly cyclic, structural causal model over mechanism
/// variables. Every structural function is total on the settings of its
/// parents; the remaining variables are ignored.
#[derive(Clone)]
pub struct DeterministicScm {
    vars: Vec<VarId>,
    domains: BTreeMap<VarId, Domain>,
    mechanisms: BTreeMap<VarId, Mechanism>,
    analytic: Option<AnalyticSolutions>,
}

impl fmt::Debug for DeterministicScm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeterministicScm")
            .field("vars", &self.vars)
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl DeterministicScm {
    pub fn builder() -> DeterministicScmBuilder {
        DeterministicScmBuilder::default()
    }

    /// Mechanism variables in declaration order.
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn domain(&self, var: &VarId) -> Option<&Domain> {
        self.domains.get(var)
    }

    pub fn parents(&self, var: &VarId) -> &[VarId] {
        self.mechanisms
            .get(var)
            .map(|m| m.parents.as_slice())
            .unwrap_or(&[])
    }

    pub fn contains(&self, var: &VarId) -> bool {
        self.domains.contains_key(var)
    }

    /// Evaluates `F_var` on a setting that assigns at least its parents.
    pub fn evaluate(&self, var: &VarId, setting: &Setting) -> Result<Value, ScmError> {
        let mech = self
            .mechanisms
            .get(var)
            .ok_or_else(|| ScmError::UnknownVariable(var.to_string()))?;
        let args = setting.project(&mech.parents);
        if args.len() != mech.parents.len() {
            let missing = mech
                .parents
                .iter()
                .filter(|p| !setting.contains(p))
                .map(|p| p.to_string())
                .collect();
            return Err(ScmError::IncompleteSolution { missing });
        }
        Ok((mech.func)(&args))
    }

    pub fn analytic_solutions(&self) -> Option<&AnalyticSolutions> {
        self.analytic.as_ref()
    }

    /// Registers a closed-form solution set; it takes precedence over grid
    /// enumeration for the interventions it covers.
    pub fn with_analytic_solutions(mut self, f: AnalyticSolutions) -> Self {
        self.analytic = Some(f);
        self
    }

    /// Copy with every real-box domain re-gridded at `step`.
    pub fn with_grid_step(&self, step: Option<f64>) -> Self {
        let mut out = self.clone();
        for d in out.domains.values_mut() {
            *d = d.clone().with_step(step);
        }
        out
    }

    /// Copy with the domain of one variable replaced.
    pub fn with_domain(&self, var: &VarId, domain: Domain) -> Result<Self, ScmError> {
        domain.validate()?;
        let mut out = self.clone();
        match out.domains.get_mut(var) {
            Some(d) => *d = domain,
            None => return Err(ScmError::UnknownVariable(var.to_string())),
        }
        Ok(out)
    }
}

#[derive(Default)]
pub struct DeterministicScmBuilder {
    vars: Vec<VarId>,
    domains: BTreeMap<VarId, Domain>,
    mechanisms: BTreeMap<VarId, Mechanism>,
    errors: Vec<String>,
}

impl DeterministicScmBuilder {
    /// Declares mechanism variable `name` with structural function `f` of the
    /// named parents.
    pub fn var<F>(mut self, name: &str, domain: Domain, parents: &[&str], f: F) -> Self
    where
        F: Fn(&Setting) -> Value + Send + Sync + 'static,
    {
        let id = VarId::mechanism(name);
        if self.domains.contains_key(&id) {
            self.errors.push(format!("duplicate variable {id}"));
        }
        self.vars.push(id.clone());
        self.domains.insert(id.clone(), domain);
        self.mechanisms.insert(
            id,
            Mechanism {
                parents: parents.iter().map(|p| VarId::mechanism(p)).collect(),
                func: Arc::new(f),
            },
        );
        self
    }

    /// A parentless variable with a constant structural function.
    pub fn constant(self, name: &str, domain: Domain, value: impl Into<Value>) -> Self {
        let v = value.into();
        self.var(name, domain, &[], move |_| v.clone())
    }

    pub fn build(self) -> Result<DeterministicScm, ScmError> {
        if let Some(e) = self.errors.into_iter().next() {
            return Err(ScmError::InvalidModel(e));
        }
        for (id, mech) in &self.mechanisms {
            self.domains[id].validate()?;
            for p in &mech.parents {
                if p == id {
                    return Err(ScmError::InvalidModel(format!("{id} lists itself as a parent")));
                }
                if !self.domains.contains_key(p) {
                    return Err(ScmError::UnknownVariable(p.to_string()));
                }
            }
        }
        Ok(DeterministicScm {
            vars: self.vars,
            domains: self.domains,
            mechanisms: self.mechanisms,
            analytic: None,
        })
    }
}

/// Distribution of a noise variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDist {
    /// Finitely many outcomes with probabilities summing to one.
    Finite { outcomes: Vec<(Value, f64)> },
    /// Uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
}

impl NoiseDist {
    /// A single outcome with probability one.
    pub fn point() -> NoiseDist {
        NoiseDist::Finite {
            outcomes: vec![(Value::Int(0), 1.0)],
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, NoiseDist::Finite { .. })
    }
}

/// An object variable of a parameterized model.
#[derive(Clone)]
pub struct ObjectVar {
    id: VarId,
    domain: Domain,
    parents: Vec<VarId>,
    noise: NoiseDist,
    assign: AssignmentFn,
    kernel: Option<KernelFn>,
}

impl ObjectVar {
    pub fn id(&self) -> &VarId {
        &self.id
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn parents(&self) -> &[VarId] {
        &self.parents
    }

    pub fn noise(&self) -> &NoiseDist {
        &self.noise
    }

    pub fn noise_var(&self) -> VarId {
        self.id.paired(Layer::Noise)
    }

    /// Applies the structural assignment for a concrete noise value.
    pub fn assign(&self, theta: &Value, parents: &Setting, noise: &Value) -> Value {
        (self.assign)(theta, parents, noise)
    }

    /// Exact conditional distribution given parameter and parents. Finite
    /// noise is summed out; continuous noise needs a closed-form kernel.
    pub fn conditional(&self, theta: &Value, parents: &Setting) -> Result<Vec<(Value, f64)>, ScmError> {
        if let Some(k) = &self.kernel {
            return Ok(k(theta, parents));
        }
        match &self.noise {
            NoiseDist::Finite { outcomes } => {
                let mut out: Vec<(Value, f64)> = Vec::new();
                for (n, p) in outcomes {
                    if *p == 0.0 {
                        continue;
                    }
                    let v = (self.assign)(theta, parents, n);
                    match out.iter_mut().find(|(w, _)| *w == v) {
                        Some(entry) => entry.1 += p,
                        None => out.push((v, *p)),
                    }
                }
                Ok(out)
            }
            NoiseDist::Uniform { .. } => Err(ScmError::NonFiniteDomain {
                var: self.noise_var().to_string(),
            }),
        }
    }
}

/// An acyclic object-level model whose structural assignments are indexed by
/// parameters. Variables are stored in a topological order of the DAG.
#[derive(Clone)]
pub struct ParameterizedScm {
    vars: Vec<ObjectVar>,
    index: BTreeMap<VarId, usize>,
}

impl fmt::Debug for ParameterizedScm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterizedScm")
            .field("vars", &self.vars.iter().map(|v| &v.id).collect::<Vec<_>>())
            .finish()
    }
}

impl ParameterizedScm {
    pub fn builder() -> ParameterizedScmBuilder {
        ParameterizedScmBuilder::default()
    }

    /// Object variables in topological order.
    pub fn vars(&self) -> &[ObjectVar] {
        &self.vars
    }

    pub fn var(&self, id: &VarId) -> Option<&ObjectVar> {
        self.index.get(id).map(|&i| &self.vars[i])
    }

    pub fn var_ids(&self) -> impl Iterator<Item = &VarId> {
        self.vars.iter().map(|v| &v.id)
    }

    pub fn parents(&self, id: &VarId) -> &[VarId] {
        self.var(id).map(|v| v.parents.as_slice()).unwrap_or(&[])
    }
}

#[derive(Default)]
pub struct ParameterizedScmBuilder {
    vars: Vec<ObjectVar>,
    errors: Vec<String>,
}

impl ParameterizedScmBuilder {
    fn push(mut self, var: ObjectVar) -> Self {
        if self.vars.iter().any(|v| v.id == var.id) {
            self.errors.push(format!("duplicate variable {}", var.id));
        }
        for p in &var.parents {
            if !self.vars.iter().any(|v| &v.id == p) {
                self.errors.push(format!(
                    "parent {p} of {} must be declared first (object models are acyclic)",
                    var.id
                ));
            }
        }
        self.vars.push(var);
        self
    }

    /// A variable that is a deterministic function of its parameter and
    /// parents; its noise is a point mass.
    pub fn deterministic<F>(self, name: &str, domain: Domain, parents: &[&str], f: F) -> Self
    where
        F: Fn(&Value, &Setting) -> Value + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let g = f.clone();
        self.push(ObjectVar {
            id: VarId::object(name),
            domain,
            parents: parents.iter().map(|p| VarId::object(p)).collect(),
            noise: NoiseDist::point(),
            assign: Arc::new(move |t, pa, _| f(t, pa)),
            kernel: Some(Arc::new(move |t, pa| vec![(g(t, pa), 1.0)])),
        })
    }

    /// A variable given by its conditional distribution. Its assignment reads
    /// a `Uniform(0, 1)` noise through the inverse CDF of the kernel: the
    /// first outcome whose cumulative probability reaches the noise value.
    pub fn stochastic<K>(self, name: &str, domain: Domain, parents: &[&str], kernel: K) -> Self
    where
        K: Fn(&Value, &Setting) -> Vec<(Value, f64)> + Send + Sync + 'static,
    {
        let kernel: KernelFn = Arc::new(kernel);
        let k2 = kernel.clone();
        self.push(ObjectVar {
            id: VarId::object(name),
            domain,
            parents: parents.iter().map(|p| VarId::object(p)).collect(),
            noise: NoiseDist::Uniform { low: 0.0, high: 1.0 },
            assign: Arc::new(move |t, pa, e| {
                let u = e.as_f64().unwrap_or(0.0);
                let outcomes = k2(t, pa);
                let mut cum = 0.0;
                for (v, p) in &outcomes {
                    cum += p;
                    if u <= cum {
                        return v.clone();
                    }
                }
                outcomes
                    .iter()
                    .rev()
                    .find(|(_, p)| *p > 0.0)
                    .or(outcomes.last())
                    .map(|(v, _)| v.clone())
                    .unwrap_or(Value::Int(0))
            }),
            kernel: Some(kernel),
        })
    }

    /// A variable with an explicit noise distribution and assignment.
    pub fn with_noise<F>(self, name: &str, domain: Domain, parents: &[&str], noise: NoiseDist, f: F) -> Self
    where
        F: Fn(&Value, &Setting, &Value) -> Value + Send + Sync + 'static,
    {
        self.push(ObjectVar {
            id: VarId::object(name),
            domain,
            parents: parents.iter().map(|p| VarId::object(p)).collect(),
            noise,
            assign: Arc::new(f),
            kernel: None,
        })
    }

    pub fn build(self) -> Result<ParameterizedScm, ScmError> {
        if let Some(e) = self.errors.into_iter().next() {
            return Err(ScmError::InvalidModel(e));
        }
        for v in &self.vars {
            v.domain.validate()?;
            match &v.noise {
                NoiseDist::Finite { outcomes } => {
                    let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
                    if outcomes.is_empty() || outcomes.iter().any(|(_, p)| *p < 0.0) || (total - 1.0).abs() > 1e-12 {
                        return Err(ScmError::InvalidModel(format!(
                            "noise of {} is not a probability distribution",
                            v.id
                        )));
                    }
                }
                NoiseDist::Uniform { low, high } => {
                    if !(low < high) {
                        return Err(ScmError::InvalidModel(format!("noise of {} has empty support", v.id)));
                    }
                }
            }
        }
        let index = self.vars.iter().enumerate().map(|(i, v)| (v.id.clone(), i)).collect();
        Ok(ParameterizedScm { vars: self.vars, index })
    }
}

/// A mechanism model paired with an object model. The parameter space of each
/// object variable is the domain of the mechanism variable with the same name.
#[derive(Clone, Debug)]
pub struct MechanizedScm {
    mech: DeterministicScm,
    obj: Arc<ParameterizedScm>,
}

impl MechanizedScm {
    pub fn new(mech: DeterministicScm, obj: ParameterizedScm) -> Result<Self, ScmError> {
        let mech_names: BTreeSet<&str> = mech.vars().iter().map(|v| v.name()).collect();
        let obj_names: BTreeSet<&str> = obj.var_ids().map(|v| v.name()).collect();
        if mech_names != obj_names || mech_names.len() != mech.vars().len() {
            return Err(ScmError::InvalidModel(format!(
                "mechanism variables {mech_names:?} do not pair one-to-one with object variables {obj_names:?}"
            )));
        }
        Ok(MechanizedScm {
            mech,
            obj: Arc::new(obj),
        })
    }

    pub fn mech(&self) -> &DeterministicScm {
        &self.mech
    }

    pub fn obj(&self) -> &ParameterizedScm {
        &self.obj
    }

    pub(crate) fn obj_arc(&self) -> Arc<ParameterizedScm> {
        self.obj.clone()
    }

    /// Same object model, different mechanism model (e.g. re-gridded).
    pub fn with_mech(&self, mech: DeterministicScm) -> Result<Self, ScmError> {
        MechanizedScm::new(mech, (*self.obj).clone())
    }

    pub fn mech_vars(&self) -> &[VarId] {
        self.mech.vars()
    }

    pub fn object_vars(&self) -> Vec<VarId> {
        self.obj.var_ids().cloned().collect()
    }
}

/// An object model instantiated at one parameter per variable.
#[derive(Clone)]
pub struct InducedScm {
    obj: Arc<ParameterizedScm>,
    theta: BTreeMap<VarId, Value>,
}

impl fmt::Debug for InducedScm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InducedScm").field("theta", &self.theta).finish()
    }
}

impl InducedScm {
    pub fn model(&self) -> &ParameterizedScm {
        &self.obj
    }

    /// Parameter of an object variable.
    pub fn theta(&self, var: &VarId) -> Option<&Value> {
        self.theta.get(var)
    }

    pub fn conditional(&self, var: &ObjectVar, parents: &Setting) -> Result<Vec<(Value, f64)>, ScmError> {
        var.conditional(&self.theta[var.id()], parents)
    }
}

/// Instantiates the object model at the parameters given by a full setting of
/// the mechanism variables.
pub fn induce_scm(m: &MechanizedScm, mech_setting: &Setting) -> Result<InducedScm, ScmError> {
    let mut theta = BTreeMap::new();
    let mut missing = Vec::new();
    for mv in m.mech_vars() {
        match mech_setting.get(mv) {
            Some(v) => {
                let dom = m.mech.domain(mv).expect("declared");
                if !dom.contains(v, VALUE_TOL) {
                    return Err(ScmError::ValueOutOfDomain {
                        var: mv.to_string(),
                        value: v.to_string(),
                    });
                }
                theta.insert(mv.paired(Layer::Object), v.clone());
            }
            None => missing.push(mv.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(ScmError::IncompleteSolution { missing });
    }
    Ok(InducedScm {
        obj: m.obj_arc(),
        theta,
    })
}
