//! JSON document format for finite mechanized models.
//!
//! ```json
//! {
//!   "variables": ["X", "Y"],
//!   "domains": { "~X": {...}, "X": {...}, ... },
//!   "mechanism_tables": {
//!     "~Y": { "parents": ["~X"], "rows": [ { "parents": [0], "value": 1 }, ... ] }
//!   },
//!   "object_tables": {
//!     "Y": { "parents": ["X"],
//!            "rows": [ { "theta": 1, "parents": [0], "noise": 0, "value": 1 }, ... ] }
//!   },
//!   "noise": { "E_Y": { "kind": "finite", "outcomes": [[0, 1.0]] } }
//! }
//! ```
//!
//! `variables` lists the object variables in topological order. Every table
//! covers the full product of the parameter, parent and noise ranges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{DeterministicScm, MechanizedScm, NoiseDist, ParameterizedScm};
use super::setting::Setting;
use super::value::{cartesian, Domain, Layer, Value, VarId, VALUE_TOL};
use super::ScmError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub variables: Vec<String>,
    pub domains: BTreeMap<String, Domain>,
    pub mechanism_tables: BTreeMap<String, MechanismTable>,
    pub object_tables: BTreeMap<String, ObjectTable>,
    pub noise: BTreeMap<String, NoiseDist>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismTable {
    pub parents: Vec<String>,
    pub rows: Vec<MechanismRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismRow {
    pub parents: Vec<Value>,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTable {
    pub parents: Vec<String>,
    pub rows: Vec<ObjectRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub theta: Value,
    pub parents: Vec<Value>,
    pub noise: Value,
    pub value: Value,
}

fn enumerate_all(vars: &[VarId], domain_of: impl Fn(&VarId) -> Domain) -> Result<Vec<Vec<Value>>, ScmError> {
    let axes = vars
        .iter()
        .map(|v| domain_of(v).enumerate(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cartesian(&axes))
}

fn setting_of(vars: &[VarId], values: &[Value]) -> Setting {
    vars.iter().cloned().zip(values.iter().cloned()).collect()
}

/// Tabulates a model whose mechanism, object and noise ranges are all finite
/// (or gridded). Closed-form solution registrations are not part of the
/// document.
pub fn to_doc(m: &MechanizedScm) -> Result<ModelDoc, ScmError> {
    let mech = m.mech();
    let obj = m.obj();
    let mut domains = BTreeMap::new();
    let mut mechanism_tables = BTreeMap::new();
    for mv in mech.vars() {
        let dom = mech.domain(mv).expect("declared").clone();
        dom.enumerate(mv)?;
        domains.insert(mv.to_string(), dom);
        let parents = mech.parents(mv).to_vec();
        let rows = enumerate_all(&parents, |p| mech.domain(p).expect("declared").clone())?
            .into_iter()
            .map(|vals| {
                let value = mech.evaluate(mv, &setting_of(&parents, &vals))?;
                Ok(MechanismRow { parents: vals, value })
            })
            .collect::<Result<Vec<_>, ScmError>>()?;
        mechanism_tables.insert(
            mv.to_string(),
            MechanismTable {
                parents: parents.iter().map(|p| p.to_string()).collect(),
                rows,
            },
        );
    }
    let mut object_tables = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for ov in obj.vars() {
        let id = ov.id();
        domains.insert(id.to_string(), ov.domain().clone());
        let outcomes = match ov.noise() {
            NoiseDist::Finite { outcomes } => outcomes.clone(),
            NoiseDist::Uniform { .. } => {
                return Err(ScmError::NonFiniteDomain {
                    var: ov.noise_var().to_string(),
                })
            }
        };
        noise.insert(ov.noise_var().to_string(), ov.noise().clone());
        let thetas = mech
            .domain(&id.paired(Layer::Mechanism))
            .expect("paired")
            .enumerate(id)?;
        let parents = ov.parents().to_vec();
        let configs = enumerate_all(&parents, |p| obj.var(p).expect("declared").domain().clone())?;
        let mut rows = Vec::new();
        for theta in &thetas {
            for pa in &configs {
                let pa_setting = setting_of(&parents, pa);
                for (e, _) in &outcomes {
                    rows.push(ObjectRow {
                        theta: theta.clone(),
                        parents: pa.clone(),
                        noise: e.clone(),
                        value: ov.assign(theta, &pa_setting, e),
                    });
                }
            }
        }
        object_tables.insert(
            id.to_string(),
            ObjectTable {
                parents: parents.iter().map(|p| p.to_string()).collect(),
                rows,
            },
        );
    }
    Ok(ModelDoc {
        variables: obj.var_ids().map(|v| v.name().to_string()).collect(),
        domains,
        mechanism_tables,
        object_tables,
        noise,
    })
}

fn lookup<'a, I>(mut rows: I, key: &[Value]) -> Option<&'a Value>
where
    I: Iterator<Item = (&'a [Value], &'a Value)>,
{
    rows.find(|(k, _)| k.len() == key.len() && k.iter().zip(key).all(|(a, b)| a.approx_eq(b, VALUE_TOL)))
        .map(|(_, v)| v)
}

/// Builds a table-backed model from a document, checking that every table is
/// total on its declared ranges.
pub fn from_doc(doc: &ModelDoc) -> Result<MechanizedScm, ScmError> {
    let bad = |msg: String| ScmError::Json(msg);
    let domain_of = |name: &str| {
        doc.domains
            .get(name)
            .cloned()
            .ok_or_else(|| bad(format!("no domain for {name}")))
    };

    let mut mb = DeterministicScm::builder();
    for name in &doc.variables {
        let mv = VarId::mechanism(name);
        let key = mv.to_string();
        let dom = domain_of(&key)?;
        let table = doc
            .mechanism_tables
            .get(&key)
            .ok_or_else(|| bad(format!("no mechanism table for {key}")))?
            .clone();
        let parents: Vec<VarId> = table.parents.iter().map(|p| VarId::parse(p)).collect();
        if let Some(p) = parents.iter().find(|p| p.layer() != Layer::Mechanism) {
            return Err(bad(format!("mechanism parent {p} of {key} is not a mechanism variable")));
        }
        let configs = enumerate_all(&parents, |p| domain_of(&p.to_string()).unwrap_or_else(|_| Domain::range(0)))?;
        for cfg in &configs {
            let value = lookup(table.rows.iter().map(|r| (r.parents.as_slice(), &r.value)), cfg)
                .ok_or_else(|| bad(format!("mechanism table of {key} misses a parent configuration")))?;
            if !dom.contains(value, VALUE_TOL) {
                return Err(ScmError::ValueOutOfDomain {
                    var: key.clone(),
                    value: value.to_string(),
                });
            }
        }
        let names: Vec<&str> = parents.iter().map(|p| p.name()).collect();
        let rows = table.rows;
        let pvars = parents.clone();
        mb = mb.var(name, dom, &names, move |s| {
            let key: Vec<Value> = pvars.iter().map(|p| s.get(p).expect("parent").clone()).collect();
            lookup(rows.iter().map(|r| (r.parents.as_slice(), &r.value)), &key)
                .expect("table checked at load")
                .clone()
        });
    }
    let mech = mb.build()?;

    let mut ob = ParameterizedScm::builder();
    for name in &doc.variables {
        let ov = VarId::object(name);
        let key = ov.to_string();
        let dom = domain_of(&key)?;
        let table = doc
            .object_tables
            .get(&key)
            .ok_or_else(|| bad(format!("no object table for {key}")))?
            .clone();
        let noise = doc
            .noise
            .get(&ov.paired(Layer::Noise).to_string())
            .cloned()
            .ok_or_else(|| bad(format!("no noise distribution for {key}")))?;
        let NoiseDist::Finite { outcomes } = &noise else {
            return Err(ScmError::NonFiniteDomain {
                var: ov.paired(Layer::Noise).to_string(),
            });
        };
        let parents: Vec<VarId> = table.parents.iter().map(|p| VarId::parse(p)).collect();
        let thetas = domain_of(&VarId::mechanism(name).to_string())?.enumerate(&ov)?;
        let configs = enumerate_all(&parents, |p| domain_of(&p.to_string()).unwrap_or_else(|_| Domain::range(0)))?;
        let full_key = |r: &ObjectRow| {
            let mut k = vec![r.theta.clone()];
            k.extend(r.parents.iter().cloned());
            k.push(r.noise.clone());
            k
        };
        let keyed: Vec<(Vec<Value>, Value)> = table.rows.iter().map(|r| (full_key(r), r.value.clone())).collect();
        for theta in &thetas {
            for cfg in &configs {
                for (e, _) in outcomes {
                    let mut k = vec![theta.clone()];
                    k.extend(cfg.iter().cloned());
                    k.push(e.clone());
                    let v = lookup(keyed.iter().map(|(k, v)| (k.as_slice(), v)), &k)
                        .ok_or_else(|| bad(format!("object table of {key} misses a configuration")))?;
                    if !dom.contains(v, VALUE_TOL) {
                        return Err(ScmError::ValueOutOfDomain {
                            var: key.clone(),
                            value: v.to_string(),
                        });
                    }
                }
            }
        }
        let names: Vec<&str> = parents.iter().map(|p| p.name()).collect();
        let pvars = parents.clone();
        ob = ob.with_noise(name, dom, &names, noise.clone(), move |theta, pa, e| {
            let mut k = vec![theta.clone()];
            k.extend(pvars.iter().map(|p| pa.get(p).expect("parent").clone()));
            k.push(e.clone());
            lookup(keyed.iter().map(|(k, v)| (k.as_slice(), v)), &k)
                .expect("table checked at load")
                .clone()
        });
    }
    MechanizedScm::new(mech, ob.build()?)
}

pub fn to_json(m: &MechanizedScm) -> Result<String, ScmError> {
    serde_json::to_string_pretty(&to_doc(m)?).map_err(|e| ScmError::Json(e.to_string()))
}

pub fn from_json(text: &str) -> Result<MechanizedScm, ScmError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ScmError::Json(e.to_string()))?;
    from_doc(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{solve_enumerate, Setting};

    fn coin() -> MechanizedScm {
        let mech = DeterministicScm::builder()
            .constant("X", Domain::range(2), 1i64)
            .var("Y", Domain::range(2), &["X"], |s| s.get(&VarId::mechanism("X")).unwrap().clone())
            .build()
            .unwrap();
        let obj = ParameterizedScm::builder()
            .with_noise(
                "X",
                Domain::range(2),
                &[],
                NoiseDist::Finite {
                    outcomes: vec![(Value::Int(0), 0.5), (Value::Int(1), 0.5)],
                },
                |t, _, e| Value::Int(t.as_int().unwrap() * e.as_int().unwrap()),
            )
            .deterministic("Y", Domain::range(2), &["X"], |t, pa| {
                Value::Int(t.as_int().unwrap() ^ pa.get(&VarId::object("X")).unwrap().as_int().unwrap())
            })
            .build()
            .unwrap();
        MechanizedScm::new(mech, obj).unwrap()
    }

    #[test]
    fn round_trip_preserves_tables() {
        let m = coin();
        let doc = to_doc(&m).unwrap();
        let back = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(to_doc(&back).unwrap(), doc);
        assert_eq!(
            solve_enumerate(back.mech(), &Setting::new()).unwrap(),
            solve_enumerate(m.mech(), &Setting::new()).unwrap()
        );
    }

    #[test]
    fn incomplete_table_is_rejected() {
        let mut doc = to_doc(&coin()).unwrap();
        doc.mechanism_tables.get_mut("~Y").unwrap().rows.pop();
        assert!(matches!(from_doc(&doc), Err(ScmError::Json(_))));
    }
}
