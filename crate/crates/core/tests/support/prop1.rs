//! Random finite low-level models with a grouped high-level abstraction.
//!
//! High-level variables are contiguous groups of low-level variables (in
//! topological order). Values, mechanism settings and `τ`/`ω` are mixed-radix
//! encodings of the members' values, so `τ` is injective on every variable.
//! With `independent_target`, every low mechanism of the target group is a
//! constant; otherwise at least one member reads other groups' mechanisms.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use coagency::abstraction::{
    AbstractionMap, Alignment, DefinedDomain, InterventionMapping, OmegaComponent, ValueMapping,
};
use coagency::rationality::{all_contexts, is_nontrivial_agent, RationalityRelation, UtilityFn};
use coagency::scm::model::{DeterministicScm, MechanizedScm, ParameterizedScm};
use coagency::scm::setting::Setting;
use coagency::scm::value::{Domain, Layer, Value, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub low: MechanizedScm,
    pub high: MechanizedScm,
    pub map: AbstractionMap,
    /// High-level mechanism variable of the target group.
    pub target: VarId,
}

fn encode(digits: &[i64], radix: &[usize]) -> i64 {
    digits
        .iter()
        .zip(radix)
        .fold(0, |acc, (&d, &r)| acc * r as i64 + d)
}

fn decode(mut x: i64, radix: &[usize]) -> Vec<i64> {
    let mut out = vec![0; radix.len()];
    for i in (0..radix.len()).rev() {
        out[i] = x % radix[i] as i64;
        x /= radix[i] as i64;
    }
    out
}

fn int(s: &Setting, v: &VarId) -> i64 {
    s.get(v).and_then(Value::as_int).expect("integer value")
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

struct LowVar {
    name: String,
    dom: usize,
    kernels: usize,
    obj_parents: Vec<usize>,
    mech_parents: Vec<usize>,
}

pub fn generate(seed: u64, independent_target: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let n_groups = rng.random_range(2..=n.min(3));
    // Contiguous groups: choose n_groups - 1 distinct cut points in 1..n.
    let mut cuts: Vec<usize> = (1..n).collect();
    while cuts.len() > n_groups - 1 {
        let i = rng.random_range(0..cuts.len());
        cuts.remove(i);
    }
    let mut group_of = vec![0; n];
    for (i, g) in group_of.iter_mut().enumerate() {
        *g = cuts.iter().filter(|&&c| c <= i).count();
    }
    let members: Vec<Vec<usize>> = (0..n_groups)
        .map(|g| (0..n).filter(|&i| group_of[i] == g).collect())
        .collect();
    let target = rng.random_range(0..n_groups);

    let mut vars: Vec<LowVar> = (0..n)
        .map(|i| LowVar {
            name: format!("L{i}"),
            dom: rng.random_range(2..=3),
            kernels: rng.random_range(1..=3),
            obj_parents: (0..i).filter(|_| rng.random_bool(0.5)).collect(),
            mech_parents: Vec::new(),
        })
        .collect();
    for i in 0..n {
        let outside: Vec<usize> = (0..n).filter(|&j| group_of[j] != group_of[i]).collect();
        if group_of[i] == target && independent_target {
            continue;
        }
        vars[i].mech_parents = outside.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    }
    if !independent_target {
        // Some member must actually respond to its context.
        let i = members[target][rng.random_range(0..members[target].len())];
        vars[i].kernels = vars[i].kernels.max(2);
        let outside: Vec<usize> = (0..n).filter(|&j| group_of[j] != target).collect();
        let j = outside[rng.random_range(0..outside.len())];
        vars[j].kernels = vars[j].kernels.max(2);
        if !vars[i].mech_parents.contains(&j) {
            vars[i].mech_parents.push(j);
            vars[i].mech_parents.sort_unstable();
        }
    }

    // Low mechanism layer.
    let mut mech = DeterministicScm::builder();
    for i in 0..n {
        let v = &vars[i];
        let dom = Domain::range(v.kernels as i64);
        if v.mech_parents.is_empty() {
            let c = rng.random_range(0..v.kernels) as i64;
            mech = mech.constant(&v.name, dom, Value::Int(c));
            continue;
        }
        let radix: Vec<usize> = v.mech_parents.iter().map(|&j| vars[j].kernels).collect();
        let rows: usize = radix.iter().product();
        let mut table: Vec<i64> = (0..rows).map(|_| rng.random_range(0..v.kernels) as i64).collect();
        if !independent_target && group_of[i] == target && rows > 1 && table.iter().all(|&x| x == table[0]) {
            table[0] = (table[0] + 1) % v.kernels as i64;
        }
        let ids: Vec<VarId> = v.mech_parents.iter().map(|&j| VarId::mechanism(&vars[j].name)).collect();
        let names: Vec<&str> = v.mech_parents.iter().map(|&j| vars[j].name.as_str()).collect();
        mech = mech.var(&v.name, dom, &names, move |s| {
            let digits: Vec<i64> = ids.iter().map(|p| int(s, p)).collect();
            Value::Int(table[encode(&digits, &radix) as usize])
        });
    }
    let mech = mech.build().expect("valid low mechanism model");

    // Low object layer: one random conditional table per parameter value.
    let mut obj = ParameterizedScm::builder();
    for v in &vars {
        let radix: Vec<usize> = v.obj_parents.iter().map(|&j| vars[j].dom).collect();
        let rows: usize = radix.iter().product();
        let tables: Vec<Vec<Vec<f64>>> = (0..v.kernels)
            .map(|_| (0..rows).map(|_| random_simplex(&mut rng, v.dom)).collect())
            .collect();
        let ids: Vec<VarId> = v.obj_parents.iter().map(|&j| VarId::object(&vars[j].name)).collect();
        let names: Vec<&str> = v.obj_parents.iter().map(|&j| vars[j].name.as_str()).collect();
        obj = obj.stochastic(&v.name, Domain::range(v.dom as i64), &names, move |t, pa| {
            let digits: Vec<i64> = ids.iter().map(|p| int(pa, p)).collect();
            let row = &tables[t.as_int().expect("kernel index") as usize][encode(&digits, &radix) as usize];
            row.iter().enumerate().map(|(x, &p)| (Value::Int(x as i64), p)).collect()
        });
    }
    let low = MechanizedScm::new(mech, obj.build().expect("valid low object model")).expect("paired");

    // High level.
    let gname = |g: usize| format!("H{g}");
    let dom_radix: Vec<Vec<usize>> = members.iter().map(|m| m.iter().map(|&i| vars[i].dom).collect()).collect();
    let mech_radix: Vec<Vec<usize>> = members.iter().map(|m| m.iter().map(|&i| vars[i].kernels).collect()).collect();
    let low_arc = Arc::new(low.clone());

    let mut hmech = DeterministicScm::builder();
    for g in 0..n_groups {
        let mut parents: Vec<usize> = members[g]
            .iter()
            .flat_map(|&i| vars[i].mech_parents.iter().map(|&j| group_of[j]))
            .collect();
        parents.sort_unstable();
        parents.dedup();
        let names: Vec<String> = parents.iter().map(|&h| gname(h)).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let low_m = low_arc.clone();
        let members_all = members.clone();
        let mech_radix_all = mech_radix.clone();
        let vars_names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
        let own = members[g].clone();
        let own_radix = mech_radix[g].clone();
        hmech = hmech.var(
            &gname(g),
            Domain::range(mech_radix[g].iter().product::<usize>() as i64),
            &name_refs,
            move |s| {
                let mut ctx = Setting::new();
                for &h in &parents {
                    let digits = decode(int(s, &VarId::mechanism(&format!("H{h}"))), &mech_radix_all[h]);
                    for (&i, d) in members_all[h].iter().zip(digits) {
                        ctx.insert(VarId::mechanism(&vars_names[i]), Value::Int(d));
                    }
                }
                let digits: Vec<i64> = own
                    .iter()
                    .map(|&i| {
                        let r = low_m.mech().evaluate(&VarId::mechanism(&vars_names[i]), &ctx);
                        r.expect("context covers parents").as_int().expect("integer")
                    })
                    .collect();
                Value::Int(encode(&digits, &own_radix))
            },
        );
    }
    let hmech = hmech.build().expect("valid high mechanism model");

    let mut hobj = ParameterizedScm::builder();
    for g in 0..n_groups {
        let own = members[g].clone();
        let mut parents: Vec<usize> = own
            .iter()
            .flat_map(|&i| vars[i].obj_parents.iter().map(|&j| group_of[j]))
            .filter(|&h| h != g)
            .collect();
        parents.sort_unstable();
        parents.dedup();
        let names: Vec<String> = parents.iter().map(|&h| gname(h)).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let low_m = low_arc.clone();
        let members_all = members.clone();
        let dom_radix_all = dom_radix.clone();
        let own_mech_radix = mech_radix[g].clone();
        let own_dom_radix = dom_radix[g].clone();
        let vars_names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
        hobj = hobj.stochastic(
            &gname(g),
            Domain::range(dom_radix[g].iter().product::<usize>() as i64),
            &name_refs,
            move |t, pa| {
                let thetas = decode(t.as_int().expect("encoded parameter"), &own_mech_radix);
                let mut outside = Setting::new();
                for &h in &parents {
                    let digits = decode(int(pa, &VarId::object(&format!("H{h}"))), &dom_radix_all[h]);
                    for (&i, d) in members_all[h].iter().zip(digits) {
                        outside.insert(VarId::object(&vars_names[i]), Value::Int(d));
                    }
                }
                let size: usize = own_dom_radix.iter().product();
                (0..size as i64)
                    .map(|code| {
                        let xs = decode(code, &own_dom_radix);
                        let mut full = outside.clone();
                        for (&i, &x) in own.iter().zip(&xs) {
                            full.insert(VarId::object(&vars_names[i]), Value::Int(x));
                        }
                        let mut p = 1.0;
                        for ((&i, &x), &theta) in own.iter().zip(&xs).zip(&thetas) {
                            let var = low_m.obj().var(&VarId::object(&vars_names[i])).expect("declared");
                            let pa_i = full.project(var.parents());
                            let cond = var.conditional(&Value::Int(theta), &pa_i).expect("finite kernel");
                            p *= cond
                                .iter()
                                .find(|(v, _)| v.as_int() == Some(x))
                                .map_or(0.0, |(_, q)| *q);
                        }
                        (Value::Int(code), p)
                    })
                    .collect()
            },
        );
    }
    let high = MechanizedScm::new(hmech, hobj.build().expect("valid high object model")).expect("paired");

    let alignment = Alignment::new((0..n_groups).map(|g| {
        (
            VarId::object(&gname(g)),
            members[g].iter().map(|&i| VarId::object(&vars[i].name)).collect(),
        )
    }))
    .expect("disjoint groups");
    let mut tau = ValueMapping::new();
    let mut omega = InterventionMapping::new();
    for g in 0..n_groups {
        let obj_ids: Vec<VarId> = members[g].iter().map(|&i| VarId::object(&vars[i].name)).collect();
        let radix = dom_radix[g].clone();
        tau = tau.with(VarId::object(&gname(g)), move |s| {
            let digits: Vec<i64> = obj_ids.iter().map(|v| int(s, v)).collect();
            Value::Int(encode(&digits, &radix))
        });
        let mech_ids: Vec<VarId> = members[g].iter().map(|&i| VarId::mechanism(&vars[i].name)).collect();
        let inv_ids = mech_ids.clone();
        let radix = mech_radix[g].clone();
        let inv_radix = radix.clone();
        omega = omega.with(
            VarId::mechanism(&gname(g)),
            OmegaComponent {
                defined: DefinedDomain::Grid { step: None },
                map: Arc::new(move |s| {
                    let digits: Vec<i64> = mech_ids.iter().map(|v| int(s, v)).collect();
                    Value::Int(encode(&digits, &radix))
                }),
                preimage: Some(Arc::new(move |x| {
                    let digits = decode(x.as_int()?, &inv_radix);
                    Some(inv_ids.iter().cloned().zip(digits.into_iter().map(Value::Int)).collect())
                })),
            },
        );
    }
    Case {
        low,
        high,
        map: AbstractionMap { alignment, tau, omega },
        target: VarId::mechanism(&gname(target)),
    }
}

/// Constant, the target's own value, and a random additive utility over all
/// high-level object variables.
pub fn utilities(case: &Case, seed: u64) -> Vec<UtilityFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = case.high.object_vars();
    let weights: BTreeMap<VarId, Vec<f64>> = vars
        .iter()
        .map(|v| (v.clone(), (0..27).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let random = UtilityFn::new("random", &vars, move |s| {
        s.iter()
            .map(|(v, x)| weights[v][x.as_int().expect("integer") as usize])
            .sum()
    });
    vec![
        UtilityFn::constant(0.0),
        UtilityFn::of_var(case.target.paired(Layer::Object)),
        random,
    ]
}

pub fn nontrivial_under_any(case: &Case, seed: u64) -> bool {
    let contexts = all_contexts(&case.high, &case.target).unwrap();
    utilities(case, seed).iter().any(|u| {
        is_nontrivial_agent(&case.high, &case.target, &RationalityRelation::BestResponse, u, contexts.clone())
            .unwrap()
            .is_nontrivial
    })
}
