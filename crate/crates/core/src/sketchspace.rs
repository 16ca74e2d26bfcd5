//! Classifier sketches: templates whose hyperparameters are holes with
//! explicit candidate lists.
//!
//! A sketch's candidate space is the union of its blocks; each block narrows
//! some holes to a subset of their candidates. Holes may carry a guard that
//! makes them inactive (and absent from the assignment) unless another hole
//! takes one of the listed values.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::inspect::{DatasetProfile, Separability};
use crate::learners::{
    ClassifierId, KernelKind, KernelSvmParams, LinearSvmParams, LogisticParams, LogisticSolver,
    ModelParams, ModelSpec, MultiClass, Penalty, PerceptronParams, SvmLoss,
};

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("sketch {sketch}: {reason}")]
    Invalid { sketch: String, reason: String },
    #[error("assignment names unknown hole {hole:?} of {sketch}")]
    UnknownHole { sketch: String, hole: String },
    #[error("value {value} is not a candidate of hole {hole:?}")]
    NotACandidate { hole: String, value: String },
    #[error("active hole {hole:?} has no value")]
    MissingValue { hole: String },
    #[error("hole {hole:?} cannot take {value} for {sketch}")]
    Ungeneratable {
        sketch: String,
        hole: String,
        value: String,
    },
    #[error("profile has no separability verdict; run the probe first")]
    ProfileIncomplete,
    #[error("static rules would remove every candidate ({size} before pruning)")]
    WouldEmpty { size: usize },
    #[error("sketch file: {0}")]
    File(String),
}

type Result<T> = std::result::Result<T, SketchError>;

/// A hole value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn text(s: &str) -> Value {
        Value::Text(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) => 1,
            Value::Float(_) => 2,
            Value::Text(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Float(f) => f.to_bits().hash(state),
            Value::Text(s) => s.hash(state),
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleKind {
    Categorical,
    OrderedNumeric,
}

/// The hole is active only while `hole` takes one of `any_of`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub hole: String,
    pub any_of: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hole {
    pub name: String,
    pub kind: HoleKind,
    pub candidates: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_when: Option<Guard>,
}

impl Hole {
    pub fn new(name: &str, kind: HoleKind, candidates: Vec<Value>) -> Hole {
        Hole {
            name: name.to_string(),
            kind,
            candidates,
            active_when: None,
        }
    }

    pub fn guarded(mut self, hole: &str, any_of: Vec<Value>) -> Hole {
        self.active_when = Some(Guard {
            hole: hole.to_string(),
            any_of,
        });
        self
    }

    pub fn position(&self, v: &Value) -> Option<usize> {
        self.candidates.iter().position(|c| c == v)
    }
}

/// Per-hole restrictions; holes not named keep all their candidates.
pub type Block = BTreeMap<String, Vec<Value>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    pub classifier_id: ClassifierId,
    pub holes: Vec<Hole>,
    #[serde(default)]
    pub blocks: Vec<Block>,
}

/// Hole values of one canonical configuration, in hole declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub sketch: ClassifierId,
    pub values: Vec<(String, Value)>,
}

impl Assignment {
    pub fn get(&self, hole: &str) -> Option<&Value> {
        self.values.iter().find(|(h, _)| h == hole).map(|(_, v)| v)
    }

    /// True when `self` and `other` agree on every hole except `hole`.
    pub fn siblings_except(&self, other: &Assignment, hole: &str) -> bool {
        self.sketch == other.sketch && {
            let strip = |a: &Assignment| -> Vec<(String, Value)> {
                a.values.iter().filter(|(h, _)| h != hole).cloned().collect()
            };
            strip(self) == strip(other)
        }
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.sketch)?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

impl Sketch {
    pub fn hole(&self, name: &str) -> Option<&Hole> {
        self.holes.iter().find(|h| h.name == name)
    }

    fn invalid(&self, reason: String) -> SketchError {
        SketchError::Invalid {
            sketch: self.classifier_id.to_string(),
            reason,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, hole) in self.holes.iter().enumerate() {
            if !seen.insert(hole.name.as_str()) {
                return Err(self.invalid(format!("duplicate hole {:?}", hole.name)));
            }
            if hole.candidates.is_empty() {
                return Err(self.invalid(format!("hole {:?} has no candidates", hole.name)));
            }
            let distinct: BTreeSet<&Value> = hole.candidates.iter().collect();
            if distinct.len() != hole.candidates.len() {
                return Err(self.invalid(format!("hole {:?} repeats a candidate", hole.name)));
            }
            if hole.kind == HoleKind::OrderedNumeric {
                let nums: Option<Vec<f64>> = hole.candidates.iter().map(Value::as_f64).collect();
                let ok = nums.is_some_and(|v| v.windows(2).all(|w| w[0] < w[1]));
                if !ok {
                    return Err(self.invalid(format!(
                        "ordered hole {:?} needs strictly increasing numbers",
                        hole.name
                    )));
                }
            }
            if let Some(g) = &hole.active_when {
                // Guards may only look at earlier holes so enumeration can
                // decide activity as it goes.
                if !self.holes[..i].iter().any(|h| h.name == g.hole) {
                    return Err(self.invalid(format!(
                        "guard of {:?} refers to {:?}, which is not an earlier hole",
                        hole.name, g.hole
                    )));
                }
            }
        }
        for block in &self.blocks {
            for (name, values) in block {
                let hole = self
                    .hole(name)
                    .ok_or_else(|| self.invalid(format!("block names unknown hole {name:?}")))?;
                if let Some(v) = values.iter().find(|v| hole.position(v).is_none()) {
                    return Err(self.invalid(format!("block value {v} is not a candidate of {name:?}")));
                }
            }
        }
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                let disjoint = a.iter().any(|(name, va)| {
                    b.get(name)
                        .is_some_and(|vb| va.iter().all(|v| !vb.contains(v)))
                });
                if !disjoint {
                    return Err(self.invalid("blocks overlap".into()));
                }
            }
        }
        Ok(())
    }

    fn effective_blocks(&self) -> Vec<Block> {
        if self.blocks.is_empty() {
            vec![Block::new()]
        } else {
            self.blocks.clone()
        }
    }

    /// Every canonical assignment, block by block; within a block the first
    /// hole varies slowest.
    pub fn enumerate(&self) -> Vec<Assignment> {
        let mut out = Vec::new();
        for block in self.effective_blocks() {
            let mut current = Vec::new();
            self.fill(&block, 0, &mut current, &mut out);
        }
        out
    }

    pub fn count(&self) -> usize {
        self.enumerate().len()
    }

    fn is_active(hole: &Hole, current: &[(String, Value)]) -> bool {
        match &hole.active_when {
            None => true,
            Some(g) => current
                .iter()
                .any(|(h, v)| *h == g.hole && g.any_of.contains(v)),
        }
    }

    fn fill(
        &self,
        block: &Block,
        idx: usize,
        current: &mut Vec<(String, Value)>,
        out: &mut Vec<Assignment>,
    ) {
        let Some(hole) = self.holes.get(idx) else {
            out.push(Assignment {
                sketch: self.classifier_id,
                values: current.clone(),
            });
            return;
        };
        if !Self::is_active(hole, current) {
            return self.fill(block, idx + 1, current, out);
        }
        for v in &hole.candidates {
            if block.get(&hole.name).is_some_and(|allowed| !allowed.contains(v)) {
                continue;
            }
            current.push((hole.name.clone(), v.clone()));
            self.fill(block, idx + 1, current, out);
            current.pop();
        }
    }

    /// Drop values of inactive holes and order the rest by declaration.
    pub fn canonicalize(&self, values: &[(String, Value)]) -> Result<Assignment> {
        for (name, v) in values {
            let hole = self.hole(name).ok_or_else(|| SketchError::UnknownHole {
                sketch: self.classifier_id.to_string(),
                hole: name.clone(),
            })?;
            if hole.position(v).is_none() {
                return Err(SketchError::NotACandidate {
                    hole: name.clone(),
                    value: v.to_string(),
                });
            }
        }
        let mut current: Vec<(String, Value)> = Vec::new();
        for hole in &self.holes {
            if !Self::is_active(hole, &current) {
                continue;
            }
            let v = values
                .iter()
                .find(|(n, _)| *n == hole.name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| SketchError::MissingValue {
                    hole: hole.name.clone(),
                })?;
            current.push((hole.name.clone(), v));
        }
        Ok(Assignment {
            sketch: self.classifier_id,
            values: current,
        })
    }

    /// Remove `value` from `hole`'s candidates and from every block. Returns
    /// false when nothing changed.
    fn drop_candidate(&mut self, hole: &str, value: &Value) -> bool {
        let Some(h) = self.holes.iter_mut().find(|h| h.name == hole) else {
            return false;
        };
        let before = h.candidates.len();
        h.candidates.retain(|c| c != value);
        if h.candidates.len() == before {
            return false;
        }
        for block in &mut self.blocks {
            if let Some(vals) = block.get_mut(hole) {
                vals.retain(|c| c != value);
            }
        }
        // A block whose restriction became empty admits nothing.
        self.blocks.retain(|b| b.values().all(|v| !v.is_empty()));
        true
    }
}

/// Build a trainable spec by filling `sketch`'s holes; absent holes keep the
/// family defaults.
pub fn generate(a: &Assignment, seed: u64) -> Result<ModelSpec> {
    let bad = |hole: &str, value: &Value| SketchError::Ungeneratable {
        sketch: a.sketch.to_string(),
        hole: hole.to_string(),
        value: value.to_string(),
    };
    let num = |hole: &str, v: &Value| v.as_f64().filter(|x| x.is_finite() && *x > 0.0).ok_or_else(|| bad(hole, v));
    let count = |hole: &str, v: &Value| match *v {
        Value::Int(i) if i > 0 => Ok(i as usize),
        _ => Err(bad(hole, v)),
    };
    let penalty = |hole: &str, v: &Value| match v.as_str() {
        Some("none") => Ok(Penalty::None),
        Some("l1") => Ok(Penalty::L1),
        Some("l2") => Ok(Penalty::L2),
        _ => Err(bad(hole, v)),
    };
    let params = match a.sketch {
        ClassifierId::Perceptron => {
            let mut p = PerceptronParams::default();
            for (h, v) in &a.values {
                match h.as_str() {
                    "penalty" => p.penalty = penalty(h, v)?,
                    "alpha" => p.alpha = num(h, v)?,
                    "max_iter" => p.max_iter = count(h, v)?,
                    "eta0" => p.eta0 = num(h, v)?,
                    "shuffle" => match v {
                        Value::Bool(b) => p.shuffle = *b,
                        _ => return Err(bad(h, v)),
                    },
                    _ => return Err(bad(h, v)),
                }
            }
            ModelParams::Perceptron(p)
        }
        ClassifierId::LogisticRegression => {
            let mut p = LogisticParams::default();
            for (h, v) in &a.values {
                match h.as_str() {
                    "solver" => {
                        p.solver = match v.as_str() {
                            Some("gradient") => LogisticSolver::Gradient,
                            Some("newton") => LogisticSolver::Newton,
                            _ => return Err(bad(h, v)),
                        }
                    }
                    "penalty" => p.penalty = penalty(h, v)?,
                    "C" => p.c = num(h, v)?,
                    "max_iter" => p.max_iter = count(h, v)?,
                    "tol" => p.tol = num(h, v)?,
                    "multi_class" => {
                        p.multi_class = match v.as_str() {
                            Some("ovr") => MultiClass::Ovr,
                            Some("multinomial") => MultiClass::Multinomial,
                            _ => return Err(bad(h, v)),
                        }
                    }
                    _ => return Err(bad(h, v)),
                }
            }
            if p.solver == LogisticSolver::Newton && p.penalty == Penalty::L1 {
                return Err(bad("penalty", &Value::text("l1")));
            }
            ModelParams::LogisticRegression(p)
        }
        ClassifierId::LinearSvm => {
            let mut p = LinearSvmParams::default();
            for (h, v) in &a.values {
                match h.as_str() {
                    "C" => p.c = num(h, v)?,
                    "loss" => {
                        p.loss = match v.as_str() {
                            Some("hinge") => SvmLoss::Hinge,
                            Some("squared_hinge") => SvmLoss::SquaredHinge,
                            _ => return Err(bad(h, v)),
                        }
                    }
                    "max_iter" => p.max_iter = count(h, v)?,
                    "tol" => p.tol = num(h, v)?,
                    _ => return Err(bad(h, v)),
                }
            }
            ModelParams::LinearSvm(p)
        }
        ClassifierId::KernelSvm => {
            let mut p = KernelSvmParams::default();
            for (h, v) in &a.values {
                match h.as_str() {
                    "kernel" => {
                        p.kernel = match v.as_str() {
                            Some("linear") => KernelKind::Linear,
                            Some("rbf") => KernelKind::Rbf,
                            Some("sigmoid") => KernelKind::Sigmoid,
                            Some("poly") => KernelKind::Poly,
                            _ => return Err(bad(h, v)),
                        }
                    }
                    "C" => p.c = num(h, v)?,
                    "degree" => p.degree = count(h, v)? as u32,
                    "tol" => p.tol = num(h, v)?,
                    "max_iter" => p.max_iter = count(h, v)?,
                    _ => return Err(bad(h, v)),
                }
            }
            ModelParams::KernelSvm(p)
        }
    };
    Ok(ModelSpec::new(params, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalKind {
    Removed,
    Reordered,
}

/// One entry of the space's history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    /// Position in the log.
    pub order: usize,
    pub rule: String,
    pub kind: RemovalKind,
    pub detail: String,
    /// Assignments that left the space, in enumeration order.
    pub removed: Vec<Assignment>,
}

/// Ordered sketches plus assignments excluded by dynamic rules.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    sketches: Vec<Sketch>,
    excluded: BTreeSet<Assignment>,
    removal_log: Vec<Removal>,
}

impl SearchSpace {
    pub fn new(sketches: Vec<Sketch>) -> Result<SearchSpace> {
        let mut ids = BTreeSet::new();
        for s in &sketches {
            s.validate()?;
            if !ids.insert(s.classifier_id) {
                return Err(s.invalid("sketch appears twice in the space".into()));
            }
            for a in s.enumerate() {
                generate(&a, 0)?;
            }
        }
        Ok(SearchSpace {
            sketches,
            excluded: BTreeSet::new(),
            removal_log: Vec::new(),
        })
    }

    /// Parse a JSON array of sketches.
    pub fn from_json(text: &str) -> Result<SearchSpace> {
        let sketches: Vec<Sketch> =
            serde_json::from_str(text).map_err(|e| SketchError::File(e.to_string()))?;
        SearchSpace::new(sketches)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.sketches).expect("sketches serialize")
    }

    pub fn sketches(&self) -> &[Sketch] {
        &self.sketches
    }

    pub fn sketch(&self, id: ClassifierId) -> Option<&Sketch> {
        self.sketches.iter().find(|s| s.classifier_id == id)
    }

    pub fn order(&self) -> Vec<ClassifierId> {
        self.sketches.iter().map(|s| s.classifier_id).collect()
    }

    pub fn removal_log(&self) -> &[Removal] {
        &self.removal_log
    }

    /// Live assignments of one sketch, in enumeration order.
    pub fn live(&self, id: ClassifierId) -> Vec<Assignment> {
        self.sketch(id)
            .map(|s| {
                s.enumerate()
                    .into_iter()
                    .filter(|a| !self.excluded.contains(a))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_live(&self, a: &Assignment) -> bool {
        !self.excluded.contains(a) && self.sketch(a.sketch).is_some_and(|s| s.enumerate().contains(a))
    }

    /// Live assignments of every sketch, in space order.
    pub fn enumerate(&self) -> Vec<Assignment> {
        self.order().into_iter().flat_map(|id| self.live(id)).collect()
    }

    pub fn size(&self) -> usize {
        self.enumerate().len()
    }

    fn log(&mut self, rule: &str, kind: RemovalKind, detail: String, removed: Vec<Assignment>) {
        let order = self.removal_log.len();
        self.removal_log.push(Removal {
            order,
            rule: rule.to_string(),
            kind,
            detail,
            removed,
        });
    }

    /// Exclude specific live assignments. Returns those actually removed.
    pub fn exclude(&mut self, rule: &str, detail: String, assignments: &[Assignment]) -> Vec<Assignment> {
        let removed: Vec<Assignment> = assignments
            .iter()
            .filter(|a| self.is_live(a))
            .cloned()
            .collect();
        if !removed.is_empty() {
            self.excluded.extend(removed.iter().cloned());
            self.log(rule, RemovalKind::Removed, detail, removed.clone());
        }
        removed
    }

    fn remove_sketch(&mut self, rule: &str, id: ClassifierId) {
        if let Some(pos) = self.sketches.iter().position(|s| s.classifier_id == id) {
            let removed = self.live(id);
            self.sketches.remove(pos);
            self.log(rule, RemovalKind::Removed, format!("{id}"), removed);
        }
    }

    fn remove_candidate(&mut self, rule: &str, id: ClassifierId, hole: &str, value: &str) {
        let before = self.live(id);
        let Some(sketch) = self.sketches.iter_mut().find(|s| s.classifier_id == id) else {
            return;
        };
        let mut trial = sketch.clone();
        if !trial.drop_candidate(hole, &Value::text(value)) {
            return;
        }
        let kept = trial.hole(hole).is_some_and(|h| !h.candidates.is_empty());
        let lost_blocks = !sketch.blocks.is_empty() && trial.blocks.is_empty();
        if !kept || lost_blocks || trial.count() == 0 {
            // Nothing of the sketch survives.
            return self.remove_sketch(rule, id);
        }
        *sketch = trial;
        let after: BTreeSet<Assignment> = self.live(id).into_iter().collect();
        let removed = before.into_iter().filter(|a| !after.contains(a)).collect();
        self.log(rule, RemovalKind::Removed, format!("{id}.{hole}={value}"), removed);
    }

    /// Stable reorder: sketches listed in `first` lead, in that order.
    pub fn reorder(&mut self, rule: &str, first: &[ClassifierId]) {
        let before = self.order();
        let rank = |id: ClassifierId| first.iter().position(|&f| f == id).unwrap_or(first.len());
        self.sketches.sort_by_key(|s| rank(s.classifier_id));
        if self.order() != before {
            let detail = self.order().iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",");
            self.log(rule, RemovalKind::Reordered, detail, Vec::new());
        }
    }

    /// Move the listed sketches to the tail, preserving relative order.
    pub fn demote(&mut self, rule: &str, ids: &[ClassifierId]) {
        let before = self.order();
        self.sketches.sort_by_key(|s| ids.contains(&s.classifier_id));
        if self.order() != before {
            let detail = self.order().iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",");
            self.log(rule, RemovalKind::Reordered, detail, Vec::new());
        }
    }
}

fn floats(v: &[f64]) -> Vec<Value> {
    v.iter().map(|&x| Value::Float(x)).collect()
}

fn ints(v: &[i64]) -> Vec<Value> {
    v.iter().map(|&x| Value::Int(x)).collect()
}

fn texts(v: &[&str]) -> Vec<Value> {
    v.iter().map(|s| Value::text(s)).collect()
}

fn block(entries: &[(&str, Vec<Value>)]) -> Block {
    entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn logistic_sketch() -> Sketch {
    use HoleKind::*;
    Sketch {
        classifier_id: ClassifierId::LogisticRegression,
        holes: vec![
            Hole::new("solver", Categorical, texts(&["gradient", "newton"])),
            Hole::new("penalty", Categorical, texts(&["l1", "l2"])),
            Hole::new("C", OrderedNumeric, floats(&[0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0])),
            Hole::new("multi_class", Categorical, texts(&["ovr", "multinomial"])),
            Hole::new("tol", Categorical, floats(&[1e-3, 1e-4])),
            Hole::new("max_iter", OrderedNumeric, ints(&[10, 100, 1000])),
        ],
        blocks: vec![
            block(&[("solver", texts(&["gradient"]))]),
            block(&[("solver", texts(&["newton"])), ("penalty", texts(&["l2"]))]),
        ],
    }
}

pub fn perceptron_sketch() -> Sketch {
    use HoleKind::*;
    Sketch {
        classifier_id: ClassifierId::Perceptron,
        holes: vec![
            Hole::new("penalty", Categorical, texts(&["none", "l1", "l2"])),
            Hole::new("alpha", OrderedNumeric, floats(&[1e-5, 1e-4, 1e-3, 1e-2]))
                .guarded("penalty", texts(&["l1", "l2"])),
            Hole::new("eta0", OrderedNumeric, floats(&[0.01, 0.1, 1.0])),
            Hole::new("shuffle", Categorical, vec![Value::Bool(true), Value::Bool(false)]),
            Hole::new("max_iter", OrderedNumeric, ints(&[10, 100, 1000])),
        ],
        blocks: Vec::new(),
    }
}

pub fn linear_svm_sketch() -> Sketch {
    use HoleKind::*;
    Sketch {
        classifier_id: ClassifierId::LinearSvm,
        holes: vec![
            Hole::new("C", OrderedNumeric, floats(&[1.0, 10.0, 100.0, 1000.0, 10000.0])),
            Hole::new("loss", Categorical, texts(&["hinge", "squared_hinge"])),
            Hole::new("tol", Categorical, floats(&[1e-3, 1e-4])),
            Hole::new("max_iter", OrderedNumeric, ints(&[100, 1000])),
        ],
        blocks: Vec::new(),
    }
}

pub fn kernel_svm_sketch() -> Sketch {
    use HoleKind::*;
    Sketch {
        classifier_id: ClassifierId::KernelSvm,
        holes: vec![
            Hole::new("kernel", Categorical, texts(&["linear", "rbf", "sigmoid", "poly"])),
            Hole::new("C", OrderedNumeric, floats(&[1.0, 10.0, 100.0, 1000.0, 10000.0])),
            Hole::new("degree", OrderedNumeric, ints(&[3, 4, 5, 6, 7])).guarded("kernel", texts(&["poly"])),
        ],
        blocks: vec![
            block(&[("kernel", texts(&["linear", "rbf", "sigmoid"]))]),
            block(&[("kernel", texts(&["poly"]))]),
        ],
    }
}

/// The built-in grids, in declaration order.
pub fn default_space() -> SearchSpace {
    SearchSpace::new(vec![
        logistic_sketch(),
        perceptron_sketch(),
        linear_svm_sketch(),
        kernel_svm_sketch(),
    ])
    .expect("built-in sketches are valid")
}

pub const RULE_MULTICLASS: &str = "static:multiclass";
pub const RULE_NOT_SEPARABLE: &str = "static:not_separable";
pub const RULE_SEPARABLE: &str = "static:separable";

/// Apply the class-count and separability rules. Fails with
/// [`SketchError::WouldEmpty`] instead of returning an empty space.
pub fn static_prune(space: &SearchSpace, profile: &DatasetProfile) -> Result<SearchSpace> {
    let verdict = profile.separability.ok_or(SketchError::ProfileIncomplete)?;
    let mut out = space.clone();
    if profile.n_classes > 2 {
        out.remove_candidate(RULE_MULTICLASS, ClassifierId::LogisticRegression, "multi_class", "ovr");
    }
    match verdict {
        Separability::NotSeparable => {
            let rule = RULE_NOT_SEPARABLE;
            out.remove_sketch(rule, ClassifierId::LinearSvm);
            out.remove_candidate(rule, ClassifierId::KernelSvm, "kernel", "linear");
            out.remove_candidate(rule, ClassifierId::LogisticRegression, "solver", "gradient");
            out.reorder(
                rule,
                &[ClassifierId::KernelSvm, ClassifierId::LogisticRegression, ClassifierId::Perceptron],
            );
        }
        Separability::Separable => {
            let rule = RULE_SEPARABLE;
            for k in ["rbf", "poly", "sigmoid"] {
                out.remove_candidate(rule, ClassifierId::KernelSvm, "kernel", k);
            }
            out.reorder(
                rule,
                &[
                    ClassifierId::LinearSvm,
                    ClassifierId::LogisticRegression,
                    ClassifierId::KernelSvm,
                    ClassifierId::Perceptron,
                ],
            );
        }
    }
    if out.size() == 0 {
        return Err(SketchError::WouldEmpty { size: space.size() });
    }
    Ok(out)
}
