//! Variables, values and their ranges.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScmError;

/// Default coordinatewise tolerance for comparing real-valued values.
pub const VALUE_TOL: f64 = 1e-9;

/// The three layers of a mechanized model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Object,
    Mechanism,
    Noise,
}

/// A variable identifier. Object, mechanism and noise variables that share a
/// name are paired with each other.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    layer: Layer,
    name: Arc<str>,
}

impl VarId {
    pub fn new(layer: Layer, name: &str) -> Self {
        VarId {
            layer,
            name: Arc::from(name),
        }
    }

    pub fn object(name: &str) -> Self {
        Self::new(Layer::Object, name)
    }

    pub fn mechanism(name: &str) -> Self {
        Self::new(Layer::Mechanism, name)
    }

    pub fn noise(name: &str) -> Self {
        Self::new(Layer::Noise, name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    /// The variable with the same name on another layer.
    pub fn paired(&self, layer: Layer) -> VarId {
        VarId {
            layer,
            name: self.name.clone(),
        }
    }

    /// Parses the textual form produced by `Display` (`A`, `~A`, `E_A`).
    pub fn parse(text: &str) -> VarId {
        if let Some(rest) = text.strip_prefix('~') {
            VarId::mechanism(rest)
        } else if let Some(rest) = text.strip_prefix("E_") {
            VarId::noise(rest)
        } else {
            VarId::object(text)
        }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Layer::Object => write!(f, "{}", self.name),
            Layer::Mechanism => write!(f, "~{}", self.name),
            Layer::Noise => write!(f, "E_{}", self.name),
        }
    }
}

impl Serialize for VarId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VarId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Ok(VarId::parse(&text))
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A value of a variable. Function tables are stored as `Vector`s of outputs
/// in the cell order of their domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Sym(String),
    Vector(Vec<f64>),
}

impl Value {
    pub fn sym(s: &str) -> Value {
        Value::Sym(s.to_string())
    }

    /// Scalar view of numeric values.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> Option<&[f64]> {
        match self {
            Value::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Exact for integers and symbols, coordinatewise within `tol` for reals.
    pub fn approx_eq(&self, other: &Value, tol: f64) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => (a - b).abs() <= tol,
            (Value::Sym(a), Value::Sym(b)) => a == b,
            (Value::Vector(a), Value::Vector(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
            }
            _ => false,
        }
    }

    /// Max-norm distance between numeric values of the same shape; infinite
    /// for mismatched discrete values.
    pub fn distance(&self, other: &Value) -> f64 {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => (a - b).abs(),
            (Value::Vector(a), Value::Vector(b)) if a.len() == b.len() => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            _ if self == other => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// A total order used to put tables and solution sets in canonical order.
    pub fn canonical_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Int(_) => 0,
                Value::Real(_) => 1,
                Value::Sym(_) => 2,
                Value::Vector(_) => 3,
            }
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
            (Value::Vector(a), Value::Vector(b)) => {
                for (x, y) in a.iter().zip(b) {
                    match x.total_cmp(y) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Vector(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::sym(s)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Vector(v)
    }
}

/// The range of a variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// An explicit, non-empty list of values.
    Finite { values: Vec<Value> },
    /// A box in R^dim. One-dimensional boxes hold `Real` values, higher
    /// dimensions hold `Vector`s. `step` is the optional uniform grid used when
    /// the range must be enumerated.
    RealBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        step: Option<f64>,
    },
    /// Functions from a finite list of input cells into a codomain of reals.
    /// `codomain: None` means all of R and is not enumerable.
    FunctionTable {
        cells: Vec<String>,
        codomain: Option<Vec<f64>>,
    },
}

/// Grid step used for continuous ranges unless a caller chooses another.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

impl Domain {
    pub fn finite<I, V>(values: I) -> Domain
    where
        I: IntoIterator<Item = V>,
        V: Into<Value>,
    {
        Domain::Finite {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    /// `{0, 1, ..., n-1}` as integers.
    pub fn range(n: i64) -> Domain {
        Domain::finite(0..n)
    }

    /// `[0, 1]` with the default grid.
    pub fn unit_interval() -> Domain {
        Domain::unit_box(1, Some(DEFAULT_GRID_STEP))
    }

    pub fn unit_box(dim: usize, step: Option<f64>) -> Domain {
        Domain::RealBox {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
            step,
        }
    }

    pub fn function_table(cells: &[&str], codomain: Option<Vec<f64>>) -> Domain {
        Domain::FunctionTable {
            cells: cells.iter().map(|c| c.to_string()).collect(),
            codomain,
        }
    }

    /// Replaces the grid step of a real box; other domains are unchanged.
    pub fn with_step(self, new_step: Option<f64>) -> Domain {
        match self {
            Domain::RealBox { lower, upper, .. } => Domain::RealBox {
                lower,
                upper,
                step: new_step,
            },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<(), ScmError> {
        match self {
            Domain::Finite { values } if values.is_empty() => {
                Err(ScmError::InvalidModel("finite domain is empty".into()))
            }
            Domain::RealBox { lower, upper, step } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(ScmError::InvalidModel("real box bounds mismatch".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(ScmError::InvalidModel("real box has lower > upper".into()));
                }
                if let Some(s) = step {
                    if !(*s > 0.0) {
                        return Err(ScmError::InvalidModel("grid step must be positive".into()));
                    }
                }
                Ok(())
            }
            Domain::FunctionTable { cells, codomain } => {
                if cells.is_empty() {
                    return Err(ScmError::InvalidModel("function table has no cells".into()));
                }
                if matches!(codomain, Some(c) if c.is_empty()) {
                    return Err(ScmError::InvalidModel("function table codomain is empty".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of enumerable values, `None` when the range is not enumerable.
    pub fn size(&self) -> Option<usize> {
        match self {
            Domain::Finite { values } => Some(values.len()),
            Domain::RealBox { lower, upper, step } => {
                let s = (*step)?;
                let mut n = 1usize;
                for (l, u) in lower.iter().zip(upper) {
                    n = n.checked_mul(grid_points(*l, *u, s)?.len())?;
                }
                Some(n)
            }
            Domain::FunctionTable { cells, codomain } => {
                let c = codomain.as_ref()?;
                c.len().checked_pow(cells.len() as u32)
            }
        }
    }

    pub fn is_enumerable(&self) -> bool {
        self.size().is_some()
    }

    /// All values of the range (grid points for real boxes), in canonical
    /// lexicographic order.
    pub fn enumerate(&self, var: &VarId) -> Result<Vec<Value>, ScmError> {
        let non_finite = || ScmError::NonFiniteDomain {
            var: var.to_string(),
        };
        match self {
            Domain::Finite { values } => Ok(values.clone()),
            Domain::RealBox { lower, upper, step } => {
                let s = step.ok_or_else(non_finite)?;
                let axes = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| grid_points(*l, *u, s).ok_or_else(non_finite))
                    .collect::<Result<Vec<_>, _>>()?;
                let points = cartesian(&axes);
                Ok(if lower.len() == 1 {
                    points.into_iter().map(|p| Value::Real(p[0])).collect()
                } else {
                    points.into_iter().map(Value::Vector).collect()
                })
            }
            Domain::FunctionTable { cells, codomain } => {
                let c = codomain.as_ref().ok_or_else(non_finite)?;
                let axes = vec![c.clone(); cells.len()];
                Ok(cartesian(&axes).into_iter().map(Value::Vector).collect())
            }
        }
    }

    /// Membership, with real coordinates compared within `tol`. Real boxes
    /// accept off-grid points.
    pub fn contains(&self, value: &Value, tol: f64) -> bool {
        match self {
            Domain::Finite { values } => values.iter().any(|v| v.approx_eq(value, tol)),
            Domain::RealBox { lower, upper, .. } => {
                let coords: &[f64] = match value {
                    Value::Real(x) if lower.len() == 1 => std::slice::from_ref(x),
                    Value::Vector(v) if lower.len() > 1 => v,
                    _ => return false,
                };
                coords.len() == lower.len()
                    && coords
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
            }
            Domain::FunctionTable { cells, codomain } => match value {
                Value::Vector(v) if v.len() == cells.len() => match codomain {
                    Some(c) => v.iter().all(|x| c.iter().any(|y| (x - y).abs() <= tol)),
                    None => v.iter().all(|x| x.is_finite()),
                },
                _ => false,
            },
        }
    }

    /// Draws a value: uniform over finite lists, uniform in boxes (ignoring the
    /// grid), uniform codomain entries for tables.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, var: &VarId) -> Result<Value, ScmError> {
        match self {
            Domain::Finite { values } => Ok(values[rng.random_range(0..values.len())].clone()),
            Domain::RealBox { lower, upper, .. } => {
                let v: Vec<f64> = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..=*u) })
                    .collect();
                Ok(if v.len() == 1 {
                    Value::Real(v[0])
                } else {
                    Value::Vector(v)
                })
            }
            Domain::FunctionTable { cells, codomain } => {
                let c = codomain.as_ref().ok_or_else(|| ScmError::NonFiniteDomain {
                    var: var.to_string(),
                })?;
                Ok(Value::Vector(
                    (0..cells.len()).map(|_| c[rng.random_range(0..c.len())]).collect(),
                ))
            }
        }
    }
}

/// Grid points `l + (u - l) k / n`, `k = 0..=n`. The step must tile the
/// interval up to rounding.
fn grid_points(l: f64, u: f64, step: f64) -> Option<Vec<f64>> {
    let width = u - l;
    if width == 0.0 {
        return Some(vec![l]);
    }
    let n = (width / step).round();
    if n < 1.0 || ((n * step) - width).abs() > 1e-9 * width.max(1.0) || n > 1e7 {
        return None;
    }
    let n = n as usize;
    Some(
        (0..=n)
            .map(|k| if k == n { u } else { l + width * (k as f64) / (n as f64) })
            .collect(),
    )
}

/// Cartesian product in lexicographic order (first axis most significant).
pub(crate) fn cartesian<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for x in axis {
                let mut p = prefix.clone();
                p.push(x.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_has_101_points() {
        let d = Domain::unit_interval();
        let pts = d.enumerate(&VarId::mechanism("D")).unwrap();
        assert_eq!(pts.len(), 101);
        assert_eq!(pts[30], Value::Real(0.3));
        assert_eq!(pts[100], Value::Real(1.0));
        assert_eq!(d.size(), Some(101));
    }

    #[test]
    fn box_grid_is_lexicographic() {
        let d = Domain::unit_box(2, Some(0.5));
        let pts = d.enumerate(&VarId::mechanism("S")).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[1], Value::Vector(vec![0.0, 0.5]));
        assert_eq!(pts[3], Value::Vector(vec![0.5, 0.0]));
    }

    #[test]
    fn real_box_without_grid_is_not_enumerable() {
        let d = Domain::unit_box(1, None);
        assert!(matches!(
            d.enumerate(&VarId::mechanism("X")),
            Err(ScmError::NonFiniteDomain { .. })
        ));
        assert!(d.contains(&Value::Real(0.123), 0.0));
        assert!(!d.contains(&Value::Real(1.5), 1e-9));
    }

    #[test]
    fn function_table_enumeration() {
        let d = Domain::function_table(&["0,0", "0,1", "1,0", "1,1"], Some(vec![0.0, 1.0, 2.0]));
        assert_eq!(d.size(), Some(81));
        let all = d.enumerate(&VarId::mechanism("U")).unwrap();
        assert_eq!(all.len(), 81);
        assert!(d.contains(&Value::Vector(vec![1.0, 0.0, 0.0, 2.0]), 0.0));
        assert!(!d.contains(&Value::Vector(vec![1.0, 0.0, 0.0, 3.0]), 0.0));
    }

    #[test]
    fn invalid_domains_are_rejected() {
        assert!(Domain::Finite { values: vec![] }.validate().is_err());
        let inverted = Domain::RealBox {
            lower: vec![1.0],
            upper: vec![0.0],
            step: None,
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn value_json_is_untagged() {
        let vals = vec![
            Value::Int(3),
            Value::Real(0.5),
            Value::sym("O"),
            Value::Vector(vec![0.1, 0.9]),
        ];
        let text = serde_json::to_string(&vals).unwrap();
        assert_eq!(text, r#"[3,0.5,"O",[0.1,0.9]]"#);
        let back: Vec<Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vals);
    }

    #[test]
    fn var_display_round_trips() {
        for v in [VarId::object("A"), VarId::mechanism("A"), VarId::noise("A")] {
            assert_eq!(VarId::parse(&v.to_string()), v);
        }
    }
}
