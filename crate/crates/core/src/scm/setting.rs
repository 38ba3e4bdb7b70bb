//! Partial assignments of values to variables.

use std::cmp::Ordering;
use std::collections::btree_map;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use super::value::{Value, VarId};

/// A setting: at most one value per variable. Because every value is keyed by
/// its owning variable, a setting is the same thing as a set of tagged values.
#[derive(Clone, Default, PartialEq)]
pub struct Setting(BTreeMap<VarId, Value>);

impl Setting {
    pub fn new() -> Self {
        Setting(BTreeMap::new())
    }

    /// Builder-style insertion.
    pub fn with(mut self, var: VarId, value: impl Into<Value>) -> Self {
        self.0.insert(var, value.into());
        self
    }

    pub fn insert(&mut self, var: VarId, value: Value) -> Option<Value> {
        self.0.insert(var, value)
    }

    pub fn remove(&mut self, var: &VarId) -> Option<Value> {
        self.0.remove(var)
    }

    pub fn get(&self, var: &VarId) -> Option<&Value> {
        self.0.get(var)
    }

    pub fn contains(&self, var: &VarId) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.0.keys()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, VarId, Value> {
        self.0.iter()
    }

    /// Keeps exactly the values owned by variables in `target`.
    pub fn project<'a, I>(&self, target: I) -> Setting
    where
        I: IntoIterator<Item = &'a VarId>,
    {
        let mut out = Setting::new();
        for var in target {
            if let Some(v) = self.0.get(var) {
                out.0.insert(var.clone(), v.clone());
            }
        }
        out
    }

    /// The setting without one variable.
    pub fn without(&self, var: &VarId) -> Setting {
        let mut out = self.clone();
        out.0.remove(var);
        out
    }

    /// Union of two settings; values from `other` win on shared variables.
    pub fn union(&self, other: &Setting) -> Setting {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            out.0.insert(k.clone(), v.clone());
        }
        out
    }

    /// Same variables, values equal up to `tol` on real coordinates.
    pub fn approx_eq(&self, other: &Setting, tol: f64) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|((ka, va), (kb, vb))| ka == kb && va.approx_eq(vb, tol))
    }

    /// Total order: by variable set first, then values in variable order.
    pub fn canonical_cmp(&self, other: &Setting) -> Ordering {
        for ((ka, va), (kb, vb)) in self.0.iter().zip(&other.0) {
            match ka.cmp(kb) {
                Ordering::Equal => {}
                o => return o,
            }
            match va.canonical_cmp(vb) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }

    pub fn var_set(&self) -> BTreeSet<VarId> {
        self.0.keys().cloned().collect()
    }
}

/// Projection of `s` onto the variables in `target`.
pub fn project(s: &Setting, target: &BTreeSet<VarId>) -> Setting {
    s.project(target)
}

impl FromIterator<(VarId, Value)> for Setting {
    fn from_iter<I: IntoIterator<Item = (VarId, Value)>>(iter: I) -> Self {
        Setting(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Setting {
    type Item = (&'a VarId, &'a Value);
    type IntoIter = btree_map::Iter<'a, VarId, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SettingVisitor;
        impl<'de> Visitor<'de> for SettingVisitor {
            type Value = Setting;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from variable names to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Setting, A::Error> {
                let mut s = Setting::new();
                while let Some((k, v)) = access.next_entry::<String, Value>()? {
                    s.insert(VarId::parse(&k), v);
                }
                Ok(s)
            }
        }
        deserializer.deserialize_map(SettingVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(i: usize) -> VarId {
        VarId::object(&format!("X{i}"))
    }

    #[test]
    fn projection_examples() {
        let s = Setting::new().with(x(1), 4.0).with(x(2), 5.0);
        let target: BTreeSet<_> = [x(1)].into_iter().collect();
        assert_eq!(project(&s, &target), Setting::new().with(x(1), 4.0));

        let s = Setting::new().with(x(2), 5.0);
        assert!(project(&s, &target).is_empty());
        assert!(project(&Setting::new(), &target).is_empty());
    }

    #[test]
    fn layers_are_distinct_owners() {
        let s = Setting::new()
            .with(VarId::object("A"), 1i64)
            .with(VarId::mechanism("A"), 1i64);
        assert_eq!(s.len(), 2);
        let only_obj: BTreeSet<_> = [VarId::object("A")].into_iter().collect();
        assert_eq!(project(&s, &only_obj).len(), 1);
    }

    #[test]
    fn serde_uses_display_names() {
        let s = Setting::new()
            .with(VarId::mechanism("S"), vec![0.1, 0.9])
            .with(VarId::object("A"), 1i64);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"A":1,"~S":[0.1,0.9]}"#);
        let back: Setting = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(
            vals in proptest::collection::btree_map(0usize..8, -5i64..5, 0..8),
            target in proptest::collection::btree_set(0usize..8, 0..8),
        ) {
            let s: Setting = vals.into_iter().map(|(k, v)| (x(k), Value::Int(v))).collect();
            let t: BTreeSet<VarId> = target.into_iter().map(x).collect();
            let once = project(&s, &t);
            prop_assert_eq!(project(&once, &t), once.clone());
            prop_assert!(once.vars().all(|v| t.contains(v) && s.contains(v)));
        }
    }
}
