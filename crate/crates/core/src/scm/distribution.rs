//! Distributions induced by instantiated object models.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{induce_scm, InducedScm, MechanizedScm, NoiseDist};
use super::setting::Setting;
use super::solve::{solve_enumerate, solve_enumerate_grid, solve_fixed_point};
use super::value::{Layer, Value, VarId, VALUE_TOL};
use super::ScmError;

/// A probability table over settings of the object variables. Entries are in
/// canonical order and have positive probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactDist {
    entries: Vec<(Setting, f64)>,
}

impl ExactDist {
    /// Builds a table, merging keys equal up to `VALUE_TOL` and dropping zero
    /// entries.
    pub fn from_entries(raw: Vec<(Setting, f64)>) -> ExactDist {
        let mut raw: Vec<(Setting, f64)> = raw.into_iter().filter(|(_, p)| *p != 0.0).collect();
        raw.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        let mut entries: Vec<(Setting, f64)> = Vec::with_capacity(raw.len());
        for (s, p) in raw {
            match entries.iter_mut().find(|(k, _)| k.approx_eq(&s, VALUE_TOL)) {
                Some(e) => e.1 += p,
                None => entries.push((s, p)),
            }
        }
        ExactDist { entries }
    }

    pub fn entries(&self) -> &[(Setting, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Probability of an exact key (up to `VALUE_TOL`).
    pub fn prob(&self, key: &Setting) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.approx_eq(key, VALUE_TOL))
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of the event that the variables in `partial` take its values.
    pub fn prob_event(&self, partial: &Setting) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.project(partial.vars()).approx_eq(partial, VALUE_TOL))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn expectation<F: Fn(&Setting) -> f64>(&self, f: F) -> f64 {
        self.entries.iter().map(|(s, p)| p * f(s)).sum()
    }

    /// Image of the distribution under a map of settings.
    pub fn pushforward<F: Fn(&Setting) -> Setting>(&self, f: F) -> ExactDist {
        ExactDist::from_entries(self.entries.iter().map(|(s, p)| (f(s), *p)).collect())
    }

    pub fn marginal(&self, vars: &BTreeSet<VarId>) -> ExactDist {
        self.pushforward(|s| s.project(vars))
    }

    /// Largest absolute difference of probabilities over the union of supports.
    pub fn max_abs_diff(&self, other: &ExactDist) -> f64 {
        self.entry_diffs(other).into_iter().fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &ExactDist) -> f64 {
        0.5 * self.entry_diffs(other).into_iter().sum::<f64>()
    }

    fn entry_diffs(&self, other: &ExactDist) -> Vec<f64> {
        let mut used = vec![false; other.entries.len()];
        let mut diffs = Vec::with_capacity(self.entries.len() + other.entries.len());
        for (k, p) in &self.entries {
            let q = match other
                .entries
                .iter()
                .enumerate()
                .find(|(i, (k2, _))| !used[*i] && k2.approx_eq(k, VALUE_TOL))
            {
                Some((i, (_, q))) => {
                    used[i] = true;
                    *q
                }
                None => 0.0,
            };
            diffs.push((p - q).abs());
        }
        for (i, (_, q)) in other.entries.iter().enumerate() {
            if !used[i] {
                diffs.push(q.abs());
            }
        }
        diffs
    }

    /// `P(child | parents)` for every parent configuration with positive
    /// probability.
    pub fn conditional(&self, child: &VarId, parents: &[VarId]) -> Vec<(Setting, ExactDist)> {
        let pa_set: BTreeSet<VarId> = parents.iter().cloned().collect();
        let child_set: BTreeSet<VarId> = [child.clone()].into_iter().collect();
        let joint = self.marginal(&pa_set.union(&child_set).cloned().collect());
        let pa_marg = self.marginal(&pa_set);
        pa_marg
            .entries
            .iter()
            .map(|(pa, ppa)| {
                let cond = ExactDist::from_entries(
                    joint
                        .entries
                        .iter()
                        .filter(|(k, _)| k.project(&pa_set).approx_eq(pa, VALUE_TOL))
                        .map(|(k, p)| (k.project(&child_set), p / ppa))
                        .collect(),
                );
                (pa.clone(), cond)
            })
            .collect()
    }
}

/// Forward samples with the seed that produced them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalDist {
    samples: Vec<Setting>,
    seed: u64,
}

impl EmpiricalDist {
    pub fn samples(&self) -> &[Setting] {
        &self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Relative frequencies as a table.
    pub fn frequencies(&self) -> ExactDist {
        let w = 1.0 / self.samples.len().max(1) as f64;
        ExactDist::from_entries(self.samples.iter().map(|s| (s.clone(), w)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Exact(ExactDist),
    Empirical(EmpiricalDist),
}

impl Distribution {
    /// The exact table, or the frequency table of the samples.
    pub fn table(&self) -> ExactDist {
        match self {
            Distribution::Exact(d) => d.clone(),
            Distribution::Empirical(e) => e.frequencies(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Distribution::Exact(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DistributionMode {
    Exact,
    Sample { n: usize, seed: u64 },
}

/// Joint distribution of the object variables of an instantiated model.
pub fn distribution(scm: &InducedScm, mode: DistributionMode) -> Result<Distribution, ScmError> {
    match mode {
        DistributionMode::Exact => exact_distribution(scm).map(Distribution::Exact),
        DistributionMode::Sample { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = (0..n).map(|_| sample_once(scm, &mut rng)).collect::<Result<_, _>>()?;
            Ok(Distribution::Empirical(EmpiricalDist { samples, seed }))
        }
    }
}

/// Exact joint table, built in topological order by summing out the noise.
pub fn exact_distribution(scm: &InducedScm) -> Result<ExactDist, ScmError> {
    let mut table = vec![(Setting::new(), 1.0)];
    for var in scm.model().vars() {
        let mut next = Vec::with_capacity(table.len() * 2);
        for (s, p) in &table {
            let pa = s.project(var.parents());
            for (v, q) in scm.conditional(var, &pa)? {
                if q > 0.0 {
                    next.push((s.clone().with(var.id().clone(), v), p * q));
                }
            }
        }
        table = next;
    }
    let d = ExactDist::from_entries(table);
    debug_assert!((d.total() - 1.0).abs() <= 1e-12 || d.entries.is_empty());
    Ok(d)
}

fn sample_once<R: Rng>(scm: &InducedScm, rng: &mut R) -> Result<Setting, ScmError> {
    let mut s = Setting::new();
    for var in scm.model().vars() {
        let noise = match var.noise() {
            NoiseDist::Finite { outcomes } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut pick = &outcomes[outcomes.len() - 1].0;
                for (n, p) in outcomes {
                    cum += p;
                    if u < cum {
                        pick = n;
                        break;
                    }
                }
                pick.clone()
            }
            NoiseDist::Uniform { low, high } => Value::Real(rng.random_range(*low..*high)),
        };
        let pa = s.project(var.parents());
        let theta = scm.theta(var.id()).expect("instantiated");
        let v = var.assign(theta, &pa, &noise);
        s.insert(var.id().clone(), v);
    }
    Ok(s)
}

/// How solution sets are computed for [`solution_distributions`].
#[derive(Clone, Debug)]
pub enum SolveMethod {
    /// Closed-form registration if available, else grid enumeration.
    Enumerate,
    /// Grid enumeration only.
    EnumerateGrid,
    /// A single damped fixed-point search.
    FixedPoint {
        init: Setting,
        damping: f64,
        tol: f64,
        max_iter: usize,
    },
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub method: SolveMethod,
    pub mode: DistributionMode,
    /// Two exact tables closer than this in max-abs difference are one element.
    pub dedup_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: SolveMethod::Enumerate,
            mode: DistributionMode::Exact,
            dedup_tol: 1e-12,
        }
    }
}

/// Solutions of the mechanism model under a mechanism-level intervention.
pub fn solutions(m: &MechanizedScm, intervention: &Setting, method: &SolveMethod) -> Result<Vec<Setting>, ScmError> {
    if let Some(bad) = intervention.vars().find(|v| v.layer() != Layer::Mechanism) {
        return Err(ScmError::InvalidIntervention(format!("{bad} is not a mechanism variable")));
    }
    match method {
        SolveMethod::Enumerate => solve_enumerate(m.mech(), intervention),
        SolveMethod::EnumerateGrid => solve_enumerate_grid(m.mech(), intervention),
        SolveMethod::FixedPoint {
            init,
            damping,
            tol,
            max_iter,
        } => solve_fixed_point(m.mech(), intervention, init, *damping, *tol, *max_iter).map(|fp| vec![fp.setting]),
    }
}

/// `P_{Sol(M; y)}(V)`: one distribution per solution, with equal ones merged.
pub fn solution_distributions(
    m: &MechanizedScm,
    intervention: &Setting,
    cfg: &SolveConfig,
) -> Result<Vec<Distribution>, ScmError> {
    let sols = solutions(m, intervention, &cfg.method)?;
    let mut out: Vec<Distribution> = Vec::with_capacity(sols.len());
    for s in &sols {
        let d = distribution(&induce_scm(m, s)?, cfg.mode)?;
        let dup = out.iter().any(|e| match (e, &d) {
            (Distribution::Exact(a), Distribution::Exact(b)) => a.max_abs_diff(b) <= cfg.dedup_tol,
            _ => *e == d,
        });
        if !dup {
            out.push(d);
        }
    }
    Ok(out)
}
