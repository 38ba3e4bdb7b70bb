//! Variable alignments, value and intervention mappings, and checking that
//! one mechanized model abstracts another.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rationality::has_independent_mechanism;
use crate::scm::value::cartesian;
use crate::scm::{
    solution_distributions, Domain, DistributionMode, ExactDist, Layer, MechanizedScm, ScmError, Setting,
    SolveConfig, Value, VarId, VALUE_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error("setting misses aligned variables: {}", missing.join(", "))]
    MissingVariables { missing: Vec<String> },
    #[error("intervention covers only part of the collection of {collection} (missing {})", missing.join(", "))]
    PartialCollection { collection: String, missing: Vec<String> },
    #[error("{0} is not aligned with any high-level variable")]
    Unaligned(String),
    #[error("no intervention mapping for {0}")]
    MissingMapping(String),
}

/// `Π`: each high-level object variable owns a non-empty set of low-level
/// object variables; the sets are pairwise disjoint. The mechanism-level
/// alignment pairs the same names on the mechanism layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Alignment {
    map: BTreeMap<VarId, Vec<VarId>>,
}

impl Alignment {
    pub fn new<I>(pairs: I) -> Result<Self, AbstractionError>
    where
        I: IntoIterator<Item = (VarId, Vec<VarId>)>,
    {
        let mut map = BTreeMap::new();
        let mut owned: BTreeSet<VarId> = BTreeSet::new();
        for (high, low) in pairs {
            if high.layer() != Layer::Object || low.iter().any(|v| v.layer() != Layer::Object) {
                return Err(AbstractionError::InvalidAlignment("alignments relate object variables".into()));
            }
            if low.is_empty() {
                return Err(AbstractionError::InvalidAlignment(format!("{high} has an empty image")));
            }
            for v in &low {
                if !owned.insert(v.clone()) {
                    return Err(AbstractionError::InvalidAlignment(format!("{v} is in two images")));
                }
            }
            if map.insert(high.clone(), low).is_some() {
                return Err(AbstractionError::InvalidAlignment(format!("{high} aligned twice")));
            }
        }
        Ok(Alignment { map })
    }

    /// Each named variable aligned with the same name.
    pub fn identity(names: &[&str]) -> Self {
        Alignment::new(
            names
                .iter()
                .map(|n| (VarId::object(n), vec![VarId::object(n)])),
        )
        .expect("distinct names")
    }

    pub fn high_vars(&self) -> impl Iterator<Item = &VarId> {
        self.map.keys()
    }

    /// `Π_{V*}` for a high-level object variable.
    pub fn image(&self, high: &VarId) -> Option<&[VarId]> {
        self.map.get(&high.paired(Layer::Object)).map(Vec::as_slice)
    }

    /// `Π_{Ṽ*}` for a high-level mechanism variable.
    pub fn mech_image(&self, high_mech: &VarId) -> Option<Vec<VarId>> {
        self.image(high_mech)
            .map(|vs| vs.iter().map(|v| v.paired(Layer::Mechanism)).collect())
    }

    /// The high-level mechanism variable owning a low-level mechanism variable.
    pub fn owner_of_mech(&self, low_mech: &VarId) -> Option<VarId> {
        let obj = low_mech.paired(Layer::Object);
        self.map
            .iter()
            .find(|(_, low)| low.contains(&obj))
            .map(|(h, _)| h.paired(Layer::Mechanism))
    }
}

pub type SettingMap = Arc<dyn Fn(&Setting) -> Value + Send + Sync>;

/// `τ`: one total function per high-level object variable from settings of
/// its image.
#[derive(Clone, Default)]
pub struct ValueMapping {
    maps: BTreeMap<VarId, SettingMap>,
}

impl fmt::Debug for ValueMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.maps.keys()).finish()
    }
}

impl ValueMapping {
    pub fn new() -> Self {
        ValueMapping::default()
    }

    pub fn with<F>(mut self, high: VarId, f: F) -> Self
    where
        F: Fn(&Setting) -> Value + Send + Sync + 'static,
    {
        self.maps.insert(high, Arc::new(f));
        self
    }

    /// Identity for every high variable with a one-element image.
    pub fn identity(a: &Alignment) -> Self {
        let mut t = ValueMapping::new();
        for (high, low) in &a.map {
            if let [single] = low.as_slice() {
                let v = single.clone();
                t = t.with(high.clone(), move |s| s.get(&v).expect("projected").clone());
            }
        }
        t
    }

    pub fn get(&self, high: &VarId) -> Option<&SettingMap> {
        self.maps.get(high)
    }
}

/// Sampler over a predicate-defined domain.
pub type SettingSampler = Arc<dyn Fn(&mut dyn RngCore) -> Setting + Send + Sync>;
pub type SettingPredicate = Arc<dyn Fn(&Setting) -> bool + Send + Sync>;

/// Where a component of `ω` is defined.
#[derive(Clone)]
pub enum DefinedDomain {
    /// The whole product of the low-level domains, enumerated on a grid
    /// (`None` keeps the domains' own grids).
    Grid { step: Option<f64> },
    /// An explicit list of low-level settings.
    Finite(Vec<Setting>),
    /// A predicate, enumerated by filtering the product grid and sampled with
    /// the given sampler.
    Predicate {
        pred: SettingPredicate,
        sampler: SettingSampler,
        step: Option<f64>,
    },
}

impl fmt::Debug for DefinedDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefinedDomain::Grid { step } => write!(f, "Grid({step:?})"),
            DefinedDomain::Finite(v) => write!(f, "Finite({})", v.len()),
            DefinedDomain::Predicate { step, .. } => write!(f, "Predicate({step:?})"),
        }
    }
}

/// One component `ω_{Ṽ*}` with an optional right inverse used to certify
/// surjectivity.
#[derive(Clone)]
pub struct OmegaComponent {
    pub defined: DefinedDomain,
    pub map: SettingMap,
    pub preimage: Option<Arc<dyn Fn(&Value) -> Option<Setting> + Send + Sync>>,
}

impl fmt::Debug for OmegaComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OmegaComponent")
            .field("defined", &self.defined)
            .field("preimage", &self.preimage.is_some())
            .finish()
    }
}

fn product_domain(
    low: &MechanizedScm,
    vars: &[VarId],
    step: Option<f64>,
) -> Result<Vec<Setting>, ScmError> {
    let axes = vars
        .iter()
        .map(|v| {
            let d = low
                .mech()
                .domain(v)
                .ok_or_else(|| ScmError::UnknownVariable(v.to_string()))?
                .clone();
            let d = match step {
                Some(s) => d.with_step(Some(s)),
                None => d,
            };
            d.enumerate(v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cartesian(&axes)
        .into_iter()
        .map(|vals| vars.iter().cloned().zip(vals).collect())
        .collect())
}

impl OmegaComponent {
    /// The identity on a one-variable collection.
    pub fn identity(low_mech: VarId, defined: DefinedDomain) -> Self {
        let v = low_mech.clone();
        OmegaComponent {
            defined,
            map: Arc::new(move |s| s.get(&v).expect("projected").clone()),
            preimage: Some(Arc::new(move |x| Some(Setting::new().with(low_mech.clone(), x.clone())))),
        }
    }

    pub fn is_defined(&self, low: &MechanizedScm, s: &Setting) -> bool {
        match &self.defined {
            DefinedDomain::Grid { .. } => s.iter().all(|(v, x)| {
                low.mech()
                    .domain(v)
                    .is_some_and(|d| d.contains(x, VALUE_TOL))
            }),
            DefinedDomain::Finite(list) => list.iter().any(|e| e.approx_eq(s, VALUE_TOL)),
            DefinedDomain::Predicate { pred, .. } => pred(s),
        }
    }

    /// The defined domain as a list, on the given grid step when it is a grid.
    pub fn enumerate_defined(
        &self,
        low: &MechanizedScm,
        collection: &[VarId],
        step_override: Option<f64>,
    ) -> Result<Vec<Setting>, ScmError> {
        match &self.defined {
            DefinedDomain::Grid { step } => product_domain(low, collection, step_override.or(*step)),
            DefinedDomain::Finite(list) => Ok(list.clone()),
            DefinedDomain::Predicate { pred, step, .. } => Ok(product_domain(low, collection, step_override.or(*step))?
                .into_iter()
                .filter(|s| pred(s))
                .collect()),
        }
    }

    fn sample_defined(&self, low: &MechanizedScm, collection: &[VarId], rng: &mut ChaCha8Rng) -> Result<Setting, ScmError> {
        match &self.defined {
            DefinedDomain::Grid { .. } => collection
                .iter()
                .map(|v| Ok((v.clone(), low.mech().domain(v).expect("declared").sample(rng, v)?)))
                .collect(),
            DefinedDomain::Finite(list) => {
                let i = (rng.next_u64() % list.len().max(1) as u64) as usize;
                Ok(list[i].clone())
            }
            DefinedDomain::Predicate { sampler, .. } => Ok(sampler(rng)),
        }
    }
}

/// `ω`: partial maps per high-level mechanism variable.
#[derive(Clone, Debug, Default)]
pub struct InterventionMapping {
    comps: BTreeMap<VarId, OmegaComponent>,
}

impl InterventionMapping {
    pub fn new() -> Self {
        InterventionMapping::default()
    }

    pub fn with(mut self, high_mech: VarId, comp: OmegaComponent) -> Self {
        self.comps.insert(high_mech, comp);
        self
    }

    /// Identity components for every one-variable collection, defined on the
    /// whole low-level domain.
    pub fn identity(a: &Alignment) -> Self {
        let mut w = InterventionMapping::new();
        for (high, low) in &a.map {
            if let [single] = low.as_slice() {
                w = w.with(
                    high.paired(Layer::Mechanism),
                    OmegaComponent::identity(single.paired(Layer::Mechanism), DefinedDomain::Grid { step: None }),
                );
            }
        }
        w
    }

    pub fn get(&self, high_mech: &VarId) -> Option<&OmegaComponent> {
        self.comps.get(high_mech)
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.comps.keys()
    }
}

/// Alignment, value mapping and intervention mapping together.
#[derive(Clone, Debug)]
pub struct AbstractionMap {
    pub alignment: Alignment,
    pub tau: ValueMapping,
    pub omega: InterventionMapping,
}

impl AbstractionMap {
    /// Identity alignment and maps over the object variables of `m`.
    pub fn identity(m: &MechanizedScm) -> Self {
        let names: Vec<String> = m.object_vars().iter().map(|v| v.name().to_string()).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let alignment = Alignment::identity(&refs);
        AbstractionMap {
            tau: ValueMapping::identity(&alignment),
            omega: InterventionMapping::identity(&alignment),
            alignment,
        }
    }
}

/// `τ(v)`: the union of `τ_{V*}(proj_{Π_{V*}}(v))`. Low-level variables
/// outside every image are dropped.
pub fn push_tau(a: &Alignment, t: &ValueMapping, low_setting: &Setting) -> Result<Setting, AbstractionError> {
    let mut out = Setting::new();
    let mut missing = Vec::new();
    for (high, low) in &a.map {
        let proj = low_setting.project(low);
        if proj.len() != low.len() {
            missing.extend(low.iter().filter(|v| !low_setting.contains(v)).map(|v| v.to_string()));
            continue;
        }
        let f = t.get(high).ok_or_else(|| AbstractionError::MissingMapping(high.to_string()))?;
        out.insert(high.clone(), f(&proj));
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(AbstractionError::MissingVariables { missing })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OmegaImage {
    Defined { setting: Setting },
    Undefined { var: String, reason: String },
}

/// `ω(y)` for a low-level intervention made of whole collections.
pub fn push_omega(
    a: &Alignment,
    w: &InterventionMapping,
    low: &MechanizedScm,
    low_intervention: &Setting,
) -> Result<OmegaImage, AbstractionError> {
    let mut touched: BTreeSet<VarId> = BTreeSet::new();
    for v in low_intervention.vars() {
        let owner = a.owner_of_mech(v).ok_or_else(|| AbstractionError::Unaligned(v.to_string()))?;
        touched.insert(owner);
    }
    let mut out = Setting::new();
    for high in touched {
        let coll = a.mech_image(&high).expect("owner is aligned");
        let proj = low_intervention.project(&coll);
        if proj.len() != coll.len() {
            return Err(AbstractionError::PartialCollection {
                collection: high.to_string(),
                missing: coll.iter().filter(|v| !proj.contains(v)).map(|v| v.to_string()).collect(),
            });
        }
        let comp = w.get(&high).ok_or_else(|| AbstractionError::MissingMapping(high.to_string()))?;
        if !comp.is_defined(low, &proj) {
            return Ok(OmegaImage::Undefined {
                var: high.to_string(),
                reason: format!("{proj} is outside the defined domain"),
            });
        }
        out.insert(high, (comp.map)(&proj));
    }
    Ok(OmegaImage::Defined { setting: out })
}

/// Distance between distributions used when matching solution sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Metric {
    MaxAbs,
    TotalVariation,
}

impl Metric {
    pub fn distance(&self, a: &ExactDist, b: &ExactDist) -> f64 {
        match self {
            Metric::MaxAbs => a.max_abs_diff(b),
            Metric::TotalVariation => a.total_variation(b),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub low: SolveConfig,
    pub high: SolveConfig,
    pub metric: Metric,
    pub tol: f64,
    /// Keep distribution sets of matched interventions in the report.
    pub record_all: bool,
}

impl CheckConfig {
    /// Exact tables compared in max-abs difference within 1e-9.
    pub fn exact() -> Self {
        CheckConfig {
            low: SolveConfig::default(),
            high: SolveConfig::default(),
            metric: Metric::MaxAbs,
            tol: 1e-9,
            record_all: false,
        }
    }

    /// Forward samples compared in total variation within 0.02.
    pub fn sampled(n: usize, seed: u64) -> Self {
        let mode = DistributionMode::Sample { n, seed };
        CheckConfig {
            low: SolveConfig {
                mode,
                ..SolveConfig::default()
            },
            high: SolveConfig {
                mode,
                ..SolveConfig::default()
            },
            metric: Metric::TotalVariation,
            tol: 0.02,
            record_all: false,
        }
    }
}

/// Set equality under tolerance: every element of each side has an element
/// of the other side within `tol`. Returns the verdict and the largest
/// nearest-neighbour distance in either direction.
pub fn match_sets(a: &[ExactDist], b: &[ExactDist], metric: Metric, tol: f64) -> (bool, f64) {
    fn directed(a: &[ExactDist], b: &[ExactDist], metric: Metric) -> f64 {
        a.iter()
            .map(|x| b.iter().map(|y| metric.distance(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    if a.is_empty() && b.is_empty() {
        return (true, 0.0);
    }
    let d = directed(a, b, metric).max(directed(b, a, metric));
    (d <= tol, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct InterventionResult {
    pub intervention: Setting,
    pub high_intervention: Option<Setting>,
    pub low_count: usize,
    pub high_count: usize,
    pub matched: bool,
    pub max_mismatch: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low: Option<Vec<ExactDist>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high: Option<Vec<ExactDist>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbstractionReport {
    pub metric: Metric,
    pub tol: f64,
    pub sampled: bool,
    pub tested: usize,
    pub matched: usize,
    pub holds: bool,
    pub results: Vec<InterventionResult>,
}

impl AbstractionReport {
    pub fn first_failure(&self) -> Option<&InterventionResult> {
        self.results.iter().find(|r| !r.matched)
    }
}

fn check_one(
    low: &MechanizedScm,
    high: &MechanizedScm,
    map: &AbstractionMap,
    iv: &Setting,
    cfg: &CheckConfig,
) -> Result<InterventionResult, AbstractionError> {
    let high_iv = match push_omega(&map.alignment, &map.omega, low, iv)? {
        OmegaImage::Defined { setting } => setting,
        OmegaImage::Undefined { var, reason } => {
            return Ok(InterventionResult {
                intervention: iv.clone(),
                high_intervention: None,
                low_count: 0,
                high_count: 0,
                matched: false,
                max_mismatch: f64::INFINITY,
                note: Some(format!("ω undefined for {var}: {reason}")),
                low: None,
                high: None,
            })
        }
    };
    let mut low_dists = Vec::new();
    for d in solution_distributions(low, iv, &cfg.low)? {
        let pushed = d
            .table()
            .entries()
            .iter()
            .map(|(s, p)| Ok((push_tau(&map.alignment, &map.tau, s)?, *p)))
            .collect::<Result<Vec<_>, AbstractionError>>()?;
        low_dists.push(ExactDist::from_entries(pushed));
    }
    let high_dists: Vec<ExactDist> = solution_distributions(high, &high_iv, &cfg.high)?
        .iter()
        .map(|d| d.table())
        .collect();
    let (matched, max_mismatch) = match_sets(&low_dists, &high_dists, cfg.metric, cfg.tol);
    let keep = cfg.record_all || !matched;
    let note = (low_dists.len() != high_dists.len()).then(|| {
        format!(
            "{} low-level vs {} high-level distributions",
            low_dists.len(),
            high_dists.len()
        )
    });
    Ok(InterventionResult {
        intervention: iv.clone(),
        high_intervention: Some(high_iv),
        low_count: low_dists.len(),
        high_count: high_dists.len(),
        matched,
        max_mismatch,
        note,
        low: keep.then_some(low_dists),
        high: keep.then_some(high_dists),
    })
}

/// Checks `P_{Sol(M; y)}(τ(V)) = P_{Sol(M*; ω(y))}(V*)` on every intervention
/// of the suite. Interventions are checked in parallel; results keep suite
/// order.
pub fn check_abstraction(
    low: &MechanizedScm,
    high: &MechanizedScm,
    map: &AbstractionMap,
    suite: &[Setting],
    cfg: &CheckConfig,
) -> Result<AbstractionReport, AbstractionError> {
    let results = suite
        .par_iter()
        .map(|iv| check_one(low, high, map, iv, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let matched = results.iter().filter(|r| r.matched).count();
    Ok(AbstractionReport {
        metric: cfg.metric,
        tol: cfg.tol,
        sampled: !matches!(cfg.low.mode, DistributionMode::Exact),
        tested: results.len(),
        matched,
        holds: matched == results.len(),
        results,
    })
}

/// Which subsets `Ỹ*` of the high-level mechanism variables a suite covers.
#[derive(Clone, Debug)]
pub enum SubsetPolicy {
    /// Every subset, including the empty one.
    All,
    /// The listed subsets only.
    Exactly(Vec<Vec<VarId>>),
}

/// Low-level interventions: for each subset `Ỹ*`, the product of the
/// enumerated defined domains of its ω components.
pub fn intervention_suite(
    low: &MechanizedScm,
    map: &AbstractionMap,
    policy: &SubsetPolicy,
    grid_step: Option<f64>,
) -> Result<Vec<Setting>, AbstractionError> {
    let high_vars: Vec<VarId> = map.omega.vars().cloned().collect();
    let subsets: Vec<Vec<VarId>> = match policy {
        SubsetPolicy::All => (0..1u64 << high_vars.len())
            .map(|mask| {
                high_vars
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect(),
        SubsetPolicy::Exactly(list) => list.clone(),
    };
    let mut suite = Vec::new();
    for subset in subsets {
        let mut axes = Vec::with_capacity(subset.len());
        for hv in &subset {
            let comp = map
                .omega
                .get(hv)
                .ok_or_else(|| AbstractionError::MissingMapping(hv.to_string()))?;
            let coll = map
                .alignment
                .mech_image(hv)
                .ok_or_else(|| AbstractionError::Unaligned(hv.to_string()))?;
            axes.push(comp.enumerate_defined(low, &coll, grid_step)?);
        }
        for parts in cartesian(&axes) {
            suite.push(parts.iter().fold(Setting::new(), |acc, p| acc.union(p)));
        }
    }
    Ok(suite)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrongMode {
    Exhaustive,
    Sampled { n: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongVarReport {
    pub var: VarId,
    pub checked: usize,
    pub covered: usize,
    /// Up to ten high-level values without a preimage.
    pub gaps: Vec<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongReport {
    pub strong: bool,
    pub coverage: f64,
    pub per_var: Vec<StrongVarReport>,
}

/// Whether every `ω_{Ṽ*}` is surjective onto the given high-level domain.
/// A value counts as covered when the component's right inverse returns a
/// defined low-level setting that maps back to it, or, without a right
/// inverse, when a search over the enumerated defined domain finds one.
pub fn check_strong(
    low: &MechanizedScm,
    map: &AbstractionMap,
    high_domains: &BTreeMap<VarId, Domain>,
    mode: StrongMode,
) -> Result<StrongReport, AbstractionError> {
    let mut per_var = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(match mode {
        StrongMode::Sampled { seed, .. } => seed,
        StrongMode::Exhaustive => 0,
    });
    for (hv, dom) in high_domains {
        let comp = map
            .omega
            .get(hv)
            .ok_or_else(|| AbstractionError::MissingMapping(hv.to_string()))?;
        let coll = map
            .alignment
            .mech_image(hv)
            .ok_or_else(|| AbstractionError::Unaligned(hv.to_string()))?;
        let targets: Vec<Value> = match mode {
            StrongMode::Exhaustive => dom.enumerate(hv)?,
            StrongMode::Sampled { n, .. } => (0..n).map(|_| dom.sample(&mut rng, hv)).collect::<Result<_, _>>()?,
        };
        let image: Option<Vec<Value>> = if comp.preimage.is_none() {
            let pre = match mode {
                StrongMode::Exhaustive => comp.enumerate_defined(low, &coll, None)?,
                StrongMode::Sampled { n, .. } => (0..n.max(1) * 10)
                    .map(|_| comp.sample_defined(low, &coll, &mut rng))
                    .collect::<Result<_, _>>()?,
            };
            Some(pre.iter().map(|s| (comp.map)(s)).collect())
        } else {
            None
        };
        let mut covered = 0;
        let mut gaps = Vec::new();
        for t in &targets {
            let ok = match (&comp.preimage, &image) {
                (Some(inv), _) => inv(t)
                    .is_some_and(|s| comp.is_defined(low, &s) && (comp.map)(&s).approx_eq(t, VALUE_TOL)),
                (None, Some(img)) => img.iter().any(|x| x.approx_eq(t, VALUE_TOL)),
                (None, None) => false,
            };
            if ok {
                covered += 1;
            } else if gaps.len() < 10 {
                gaps.push(t.clone());
            }
        }
        per_var.push(StrongVarReport {
            var: hv.clone(),
            checked: targets.len(),
            covered,
            gaps,
        });
    }
    let checked: usize = per_var.iter().map(|r| r.checked).sum();
    let covered: usize = per_var.iter().map(|r| r.covered).sum();
    Ok(StrongReport {
        strong: covered == checked,
        coverage: if checked == 0 { 1.0 } else { covered as f64 / checked as f64 },
        per_var,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Check {
    pub tau_injective: bool,
    pub independent_mechanisms: bool,
    /// Both preconditions hold, so the target cannot be a non-trivial agent.
    pub conclusion: bool,
}

/// Checks that `τ` restricted to the parents of the target's object variable
/// is injective, and that every low-level mechanism in the target's
/// collection is independent.
pub fn prop1_preconditions(
    low: &MechanizedScm,
    high: &MechanizedScm,
    map: &AbstractionMap,
    target: &VarId,
) -> Result<Prop1Check, AbstractionError> {
    let obj = target.paired(Layer::Object);
    // τ on the parents is a product of the per-parent maps over disjoint
    // coordinates, so it is injective iff every factor is.
    let mut tau_injective = true;
    for parent in high.obj().parents(&obj) {
        let coll = map
            .alignment
            .image(parent)
            .ok_or_else(|| AbstractionError::Unaligned(parent.to_string()))?;
        let f = map
            .tau
            .get(parent)
            .ok_or_else(|| AbstractionError::MissingMapping(parent.to_string()))?;
        let axes = coll
            .iter()
            .map(|v| {
                low.obj()
                    .var(v)
                    .ok_or_else(|| ScmError::UnknownVariable(v.to_string()))?
                    .domain()
                    .enumerate(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut images: Vec<Value> = Vec::new();
        for vals in cartesian(&axes) {
            let s: Setting = coll.iter().cloned().zip(vals).collect();
            let y = f(&s);
            if images.iter().any(|x| x.approx_eq(&y, VALUE_TOL)) {
                tau_injective = false;
                break;
            }
            images.push(y);
        }
        if !tau_injective {
            break;
        }
    }
    let coll = map
        .alignment
        .mech_image(target)
        .ok_or_else(|| AbstractionError::Unaligned(target.to_string()))?;
    let mut independent_mechanisms = true;
    for v in &coll {
        if !has_independent_mechanism(low.mech(), v)? {
            independent_mechanisms = false;
            break;
        }
    }
    Ok(Prop1Check {
        tau_injective,
        independent_mechanisms,
        conclusion: tau_injective && independent_mechanisms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{DeterministicScm, ParameterizedScm};

    fn coin() -> MechanizedScm {
        let mech = DeterministicScm::builder()
            .constant("P", Domain::unit_interval().with_step(Some(0.25)), 0.5)
            .var("X", Domain::range(2), &["P"], |s| {
                Value::Int((s.get(&VarId::mechanism("P")).unwrap().as_f64().unwrap() > 0.5) as i64)
            })
            .build()
            .unwrap();
        let obj = ParameterizedScm::builder()
            .stochastic("P", Domain::range(2), &[], |t, _| {
                let p = t.as_f64().unwrap();
                vec![(Value::Int(1), p), (Value::Int(0), 1.0 - p)]
            })
            .deterministic("X", Domain::range(2), &["P"], |t, _| t.clone())
            .build()
            .unwrap();
        MechanizedScm::new(mech, obj).unwrap()
    }

    #[test]
    fn alignment_images_must_be_disjoint() {
        let x = VarId::object("X");
        let err = Alignment::new([
            (VarId::object("A"), vec![x.clone()]),
            (VarId::object("B"), vec![x]),
        ]);
        assert!(matches!(err, Err(AbstractionError::InvalidAlignment(_))));
    }

    #[test]
    fn identity_is_an_abstraction_of_itself() {
        let m = coin();
        let map = AbstractionMap::identity(&m);
        let suite = intervention_suite(&m, &map, &SubsetPolicy::All, None).unwrap();
        assert_eq!(suite.len(), 1 + 5 + 2 + 10);
        let r = check_abstraction(&m, &m, &map, &suite, &CheckConfig::exact()).unwrap();
        assert!(r.holds, "{:?}", r.first_failure());
        let mut doms = BTreeMap::new();
        for v in m.mech_vars() {
            doms.insert(v.clone(), m.mech().domain(v).unwrap().clone());
        }
        assert!(check_strong(&m, &map, &doms, StrongMode::Exhaustive).unwrap().strong);
    }

    #[test]
    fn partial_collection_is_rejected() {
        let a = Alignment::new([(VarId::object("Z"), vec![VarId::object("P"), VarId::object("X")])]).unwrap();
        let w = InterventionMapping::new();
        let iv = Setting::new().with(VarId::mechanism("P"), 0.5);
        assert!(matches!(
            push_omega(&a, &w, &coin(), &iv),
            Err(AbstractionError::PartialCollection { .. })
        ));
    }

    #[test]
    fn empty_intervention_maps_to_empty() {
        let m = coin();
        let map = AbstractionMap::identity(&m);
        assert_eq!(
            push_omega(&map.alignment, &map.omega, &m, &Setting::new()).unwrap(),
            OmegaImage::Defined { setting: Setting::new() }
        );
    }

    #[test]
    fn missing_low_variables() {
        let m = coin();
        let map = AbstractionMap::identity(&m);
        let s = Setting::new().with(VarId::object("X"), 1i64);
        assert!(matches!(
            push_tau(&map.alignment, &map.tau, &s),
            Err(AbstractionError::MissingVariables { .. })
        ));
    }

    #[test]
    fn restricted_omega_is_not_strong() {
        let m = coin();
        let mut map = AbstractionMap::identity(&m);
        let p = VarId::mechanism("P");
        let pp = p.clone();
        map.omega = map.omega.with(
            p.clone(),
            OmegaComponent::identity(
                p.clone(),
                DefinedDomain::Predicate {
                    pred: Arc::new(move |s| s.get(&pp).unwrap().as_f64() == Some(0.0)),
                    sampler: Arc::new(|_| Setting::new().with(VarId::mechanism("P"), 0.0)),
                    step: None,
                },
            ),
        );
        let doms: BTreeMap<_, _> = [(p.clone(), m.mech().domain(&p).unwrap().clone())].into();
        let r = check_strong(&m, &map, &doms, StrongMode::Exhaustive).unwrap();
        assert!(!r.strong);
        assert_eq!(r.per_var[0].covered, 1);
        assert_eq!(r.per_var[0].gaps[0], Value::Real(0.25));
    }

    #[test]
    fn set_matching_is_symmetric() {
        let a = ExactDist::from_entries(vec![(Setting::new().with(VarId::object("X"), 0i64), 1.0)]);
        let b = ExactDist::from_entries(vec![(Setting::new().with(VarId::object("X"), 1i64), 1.0)]);
        let one = [a.clone()];
        let two = [a, b];
        assert_eq!(
            match_sets(&one, &two, Metric::MaxAbs, 1e-9),
            match_sets(&two, &one, Metric::MaxAbs, 1e-9)
        );
        assert!(!match_sets(&one, &two, Metric::MaxAbs, 1e-9).0);
    }
}
