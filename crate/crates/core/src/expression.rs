//! Intention detection: thresholded blendshape conditions combined with AND,
//! priority suppression between intentions, and frame debouncing.

use std::fmt;

use crate::model::{BlendShapeId, BlendShapeVector};

/// Maximum number of intentions a profile may declare.
pub const MAX_INTENTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpressionError {
    #[error("unknown blendshape name {0:?}")]
    UnknownFeature(String),
    #[error("BETWEEN requires min < max (got min {min}, max {max})")]
    EmptyRange { min: f64, max: f64 },
    #[error("threshold must be finite")]
    NonFiniteThreshold,
    #[error("intention {0:?} has no conditions")]
    NoConditions(String),
    #[error("intention {0:?} declared twice")]
    Duplicate(String),
    #[error("unknown intention {0:?}")]
    UnknownIntention(String),
    #[error("too many intentions ({0}, at most {MAX_INTENTIONS})")]
    TooMany(usize),
}

/// The comparison a condition performs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    /// `v > threshold`
    Greater(f64),
    /// `v < threshold`
    Less(f64),
    /// `min <= v <= max`
    Between { min: f64, max: f64 },
    /// `v - other > threshold` (signed)
    DiffGreater { compare_to: BlendShapeId, threshold: f64 },
    /// `|v - other| < threshold`
    DiffLess { compare_to: BlendShapeId, threshold: f64 },
}

impl Comparison {
    pub fn operator(&self) -> &'static str {
        match self {
            Comparison::Greater(_) => ">",
            Comparison::Less(_) => "<",
            Comparison::Between { .. } => "BETWEEN",
            Comparison::DiffGreater { .. } => "DIFF>",
            Comparison::DiffLess { .. } => "DIFF<",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub feature: BlendShapeId,
    pub comparison: Comparison,
}

impl Condition {
    pub fn new(feature: &str, comparison: Comparison) -> Result<Self, ExpressionError> {
        let feature = BlendShapeId::from_name(feature)
            .ok_or_else(|| ExpressionError::UnknownFeature(feature.to_string()))?;
        let finite = match comparison {
            Comparison::Greater(t) | Comparison::Less(t) => t.is_finite(),
            Comparison::Between { min, max } => {
                if !(min < max) {
                    return Err(ExpressionError::EmptyRange { min, max });
                }
                min.is_finite() && max.is_finite()
            }
            Comparison::DiffGreater { threshold, .. } | Comparison::DiffLess { threshold, .. } => {
                threshold.is_finite()
            }
        };
        if !finite {
            return Err(ExpressionError::NonFiniteThreshold);
        }
        Ok(Condition { feature, comparison })
    }

    pub fn greater(feature: &str, threshold: f64) -> Result<Self, ExpressionError> {
        Self::new(feature, Comparison::Greater(threshold))
    }

    pub fn less(feature: &str, threshold: f64) -> Result<Self, ExpressionError> {
        Self::new(feature, Comparison::Less(threshold))
    }

    pub fn between(feature: &str, min: f64, max: f64) -> Result<Self, ExpressionError> {
        Self::new(feature, Comparison::Between { min, max })
    }

    pub fn diff_greater(feature: &str, compare_to: &str, threshold: f64) -> Result<Self, ExpressionError> {
        let compare_to = BlendShapeId::from_name(compare_to)
            .ok_or_else(|| ExpressionError::UnknownFeature(compare_to.to_string()))?;
        Self::new(feature, Comparison::DiffGreater { compare_to, threshold })
    }

    pub fn diff_less(feature: &str, compare_to: &str, threshold: f64) -> Result<Self, ExpressionError> {
        let compare_to = BlendShapeId::from_name(compare_to)
            .ok_or_else(|| ExpressionError::UnknownFeature(compare_to.to_string()))?;
        Self::new(feature, Comparison::DiffLess { compare_to, threshold })
    }
}

#[inline]
pub fn eval_condition(cond: &Condition, blend: &BlendShapeVector) -> bool {
    let v = blend.value(cond.feature);
    match cond.comparison {
        Comparison::Greater(t) => v > t,
        Comparison::Less(t) => v < t,
        Comparison::Between { min, max } => min <= v && v <= max,
        Comparison::DiffGreater { compare_to, threshold } => v - blend.value(compare_to) > threshold,
        Comparison::DiffLess { compare_to, threshold } => (v - blend.value(compare_to)).abs() < threshold,
    }
}

/// A named conjunction of conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentionSpec {
    pub name: String,
    pub conditions: Vec<Condition>,
}

impl IntentionSpec {
    pub fn new(name: impl Into<String>, conditions: Vec<Condition>) -> Result<Self, ExpressionError> {
        let name = name.into();
        if conditions.is_empty() {
            return Err(ExpressionError::NoConditions(name));
        }
        Ok(IntentionSpec { name, conditions })
    }

    pub fn matches(&self, blend: &BlendShapeVector) -> bool {
        self.conditions.iter().all(|c| eval_condition(c, blend))
    }
}

/// Index of an intention within its [`ExpressionEngine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntentionId(pub u8);

/// A set of intentions as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IntentionSet(pub u64);

impl IntentionSet {
    pub const EMPTY: IntentionSet = IntentionSet(0);

    pub fn contains(self, id: IntentionId) -> bool {
        self.0 & (1 << id.0) != 0
    }

    pub fn insert(&mut self, id: IntentionId) {
        self.0 |= 1 << id.0;
    }

    pub fn remove(&mut self, id: IntentionId) {
        self.0 &= !(1 << id.0);
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn minus(self, other: IntentionSet) -> IntentionSet {
        IntentionSet(self.0 & !other.0)
    }

    pub fn union(self, other: IntentionSet) -> IntentionSet {
        IntentionSet(self.0 | other.0)
    }

    /// Members in ascending id order.
    pub fn iter(self) -> impl Iterator<Item = IntentionId> {
        (0..64u8)
            .filter(move |i| self.0 & (1 << i) != 0)
            .map(IntentionId)
    }
}

impl FromIterator<IntentionId> for IntentionSet {
    fn from_iter<T: IntoIterator<Item = IntentionId>>(iter: T) -> Self {
        let mut s = IntentionSet::EMPTY;
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl fmt::Debug for IntentionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|i| i.0)).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleTrigger {
    Intention(String),
    Any,
}

/// `when` an intention (or any intention outside `except`) is active,
/// suppress everything in `disable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityRule {
    pub when: RuleTrigger,
    pub disable: Vec<String>,
    pub except: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompiledTrigger {
    Intention(IntentionId),
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CompiledRule {
    when: CompiledTrigger,
    disable: IntentionSet,
    except: IntentionSet,
}

/// Validated intentions and priority rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionEngine {
    specs: Vec<IntentionSpec>,
    rules: Vec<CompiledRule>,
}

impl ExpressionEngine {
    pub fn new(specs: Vec<IntentionSpec>, rules: &[PriorityRule]) -> Result<Self, ExpressionError> {
        if specs.len() > MAX_INTENTIONS {
            return Err(ExpressionError::TooMany(specs.len()));
        }
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|o| o.name == s.name) {
                return Err(ExpressionError::Duplicate(s.name.clone()));
            }
        }
        let mut engine = ExpressionEngine {
            specs,
            rules: Vec::new(),
        };
        let resolve_all = |names: &[String], engine: &ExpressionEngine| -> Result<IntentionSet, ExpressionError> {
            names
                .iter()
                .map(|n| engine.id(n).ok_or_else(|| ExpressionError::UnknownIntention(n.clone())))
                .collect()
        };
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in rules {
            let when = match &rule.when {
                RuleTrigger::Any => CompiledTrigger::Any,
                RuleTrigger::Intention(n) => CompiledTrigger::Intention(
                    engine
                        .id(n)
                        .ok_or_else(|| ExpressionError::UnknownIntention(n.clone()))?,
                ),
            };
            compiled.push(CompiledRule {
                when,
                disable: resolve_all(&rule.disable, &engine)?,
                except: resolve_all(&rule.except, &engine)?,
            });
        }
        engine.rules = compiled;
        Ok(engine)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[IntentionSpec] {
        &self.specs
    }

    pub fn id(&self, name: &str) -> Option<IntentionId> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| IntentionId(i as u8))
    }

    pub fn name(&self, id: IntentionId) -> &str {
        &self.specs[id.0 as usize].name
    }

    pub fn set_of<'a, I: IntoIterator<Item = &'a str>>(&self, names: I) -> IntentionSet {
        names.into_iter().filter_map(|n| self.id(n)).collect()
    }

    pub fn names(&self, set: IntentionSet) -> Vec<&str> {
        set.iter().map(|id| self.name(id)).collect()
    }

    /// Intentions whose conditions all hold, before priority rules.
    pub fn eval_intentions(&self, blend: &BlendShapeVector) -> IntentionSet {
        let mut out = IntentionSet::EMPTY;
        for (i, spec) in self.specs.iter().enumerate() {
            if spec.matches(blend) {
                out.insert(IntentionId(i as u8));
            }
        }
        out
    }

    /// Applies the rules in declaration order, repeating until nothing changes.
    pub fn apply_priority_rules(&self, active: IntentionSet) -> IntentionSet {
        let mut current = active;
        // Each productive pass removes at least one member.
        for _ in 0..=self.specs.len() {
            let next = self.priority_pass(current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    fn priority_pass(&self, mut set: IntentionSet) -> IntentionSet {
        for rule in &self.rules {
            let fires = match rule.when {
                CompiledTrigger::Intention(id) => set.contains(id),
                CompiledTrigger::Any => !set.minus(rule.except).is_empty(),
            };
            if fires {
                set = set.minus(rule.disable);
            }
        }
        set
    }

    /// Raw evaluation followed by priority filtering.
    pub fn evaluate(&self, blend: &BlendShapeVector) -> IntentionSet {
        self.apply_priority_rules(self.eval_intentions(blend))
    }
}

/// Debounced per-intention state.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentionState {
    debounce_frames: u32,
    raw: IntentionSet,
    active: IntentionSet,
    pending: Vec<u32>,
    last_rise_ms: Vec<Option<u64>>,
    last_fall_ms: Vec<Option<u64>>,
}

/// Output of one [`IntentionState::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Edges {
    pub risen: IntentionSet,
    pub fallen: IntentionSet,
    pub active: IntentionSet,
}

impl IntentionState {
    pub fn new(intentions: usize, debounce_frames: u32) -> Self {
        IntentionState {
            debounce_frames: debounce_frames.max(1),
            raw: IntentionSet::EMPTY,
            active: IntentionSet::EMPTY,
            pending: vec![0; intentions],
            last_rise_ms: vec![None; intentions],
            last_fall_ms: vec![None; intentions],
        }
    }

    pub fn active(&self) -> IntentionSet {
        self.active
    }

    /// Last post-priority raw evaluation.
    pub fn raw(&self) -> IntentionSet {
        self.raw
    }

    pub fn last_rise_ms(&self, id: IntentionId) -> Option<u64> {
        self.last_rise_ms[id.0 as usize]
    }

    pub fn last_fall_ms(&self, id: IntentionId) -> Option<u64> {
        self.last_fall_ms[id.0 as usize]
    }

    /// Forgets all activations without emitting edges.
    pub fn reset(&mut self) {
        self.raw = IntentionSet::EMPTY;
        self.active = IntentionSet::EMPTY;
        self.pending.iter_mut().for_each(|c| *c = 0);
    }

    /// Feeds one post-priority evaluation. An intention flips after
    /// `debounce_frames` consecutive frames disagreeing with its current state.
    pub fn advance(&mut self, filtered: IntentionSet, t_ms: u64) -> Edges {
        self.raw = filtered;
        let mut edges = Edges::default();
        for i in 0..self.pending.len() {
            let id = IntentionId(i as u8);
            let want = filtered.contains(id);
            let have = self.active.contains(id);
            if want == have {
                self.pending[i] = 0;
                continue;
            }
            self.pending[i] += 1;
            if self.pending[i] >= self.debounce_frames {
                self.pending[i] = 0;
                if want {
                    self.active.insert(id);
                    edges.risen.insert(id);
                    self.last_rise_ms[i] = Some(t_ms);
                } else {
                    self.active.remove(id);
                    edges.fallen.insert(id);
                    self.last_fall_ms[i] = Some(t_ms);
                }
            }
        }
        edges.active = self.active;
        edges
    }

    pub fn step(&mut self, engine: &ExpressionEngine, blend: &BlendShapeVector, t_ms: u64) -> Edges {
        self.advance(engine.evaluate(blend), t_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blend(pairs: &[(&str, f64)]) -> BlendShapeVector {
        BlendShapeVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn jaw_engine() -> ExpressionEngine {
        let specs = vec![
            IntentionSpec::new(
                "numlock",
                vec![
                    Condition::greater("jawOpen", 0.4).unwrap(),
                    Condition::less("jawLeft", 0.1).unwrap(),
                    Condition::less("jawRight", 0.1).unwrap(),
                ],
            )
            .unwrap(),
            IntentionSpec::new("right_click", vec![Condition::greater("jawLeft", 0.3).unwrap()]).unwrap(),
            IntentionSpec::new("mid_click", vec![Condition::greater("jawRight", 0.3).unwrap()]).unwrap(),
        ];
        ExpressionEngine::new(specs, &[]).unwrap()
    }

    #[test]
    fn greater_condition() {
        let c = Condition::greater("jawOpen", 0.4).unwrap();
        assert!(eval_condition(&c, &blend(&[("jawOpen", 0.5)])));
        assert!(!eval_condition(&c, &blend(&[("jawOpen", 0.4)])));
        assert!(!eval_condition(&c, &BlendShapeVector::zeros()));
    }

    #[test]
    fn diff_greater_is_signed() {
        let c = Condition::diff_greater("mouthSmileLeft", "mouthSmileRight", 0.15).unwrap();
        assert!(eval_condition(&c, &blend(&[("mouthSmileLeft", 0.30), ("mouthSmileRight", 0.10)])));
        assert!(!eval_condition(&c, &blend(&[("mouthSmileLeft", 0.10), ("mouthSmileRight", 0.30)])));
    }

    #[test]
    fn diff_less_is_absolute() {
        let c = Condition::diff_less("mouthSmileLeft", "mouthSmileRight", 0.2).unwrap();
        assert!(eval_condition(&c, &blend(&[("mouthSmileLeft", 0.6), ("mouthSmileRight", 0.5)])));
        assert!(eval_condition(&c, &blend(&[("mouthSmileLeft", 0.5), ("mouthSmileRight", 0.6)])));
        assert!(!eval_condition(&c, &blend(&[("mouthSmileLeft", 0.9), ("mouthSmileRight", 0.5)])));
        assert!(!eval_condition(&c, &blend(&[("mouthSmileLeft", 0.5), ("mouthSmileRight", 0.9)])));
    }

    #[test]
    fn between_is_inclusive() {
        let c = Condition::between("mouthSmileLeft", 0.25, 0.45).unwrap();
        assert!(eval_condition(&c, &blend(&[("mouthSmileLeft", 0.25)])));
        assert!(eval_condition(&c, &blend(&[("mouthSmileLeft", 0.45)])));
        assert!(!eval_condition(&c, &blend(&[("mouthSmileLeft", 0.46)])));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Condition::greater("tongueOut", 0.1),
            Err(ExpressionError::UnknownFeature("tongueOut".into()))
        );
        assert!(matches!(
            Condition::between("jawOpen", 0.5, 0.5),
            Err(ExpressionError::EmptyRange { .. })
        ));
        assert!(IntentionSpec::new("x", vec![]).is_err());
    }

    #[test]
    fn jaw_open_is_distinct_from_jaw_left() {
        let e = jaw_engine();
        let numlock = e.set_of(["numlock"]);
        assert_eq!(e.eval_intentions(&blend(&[("jawOpen", 0.5)])), numlock);
        assert!(!e
            .eval_intentions(&blend(&[("jawOpen", 0.5), ("jawLeft", 0.2)]))
            .contains(e.id("numlock").unwrap()));
        assert!(e.eval_intentions(&BlendShapeVector::zeros()).is_empty());
    }

    #[test]
    fn jaw_expressions_do_not_overlap() {
        let e = jaw_engine();
        let a = e.eval_intentions(&blend(&[("jawOpen", 0.8)]));
        let b = e.eval_intentions(&blend(&[("jawLeft", 0.8)]));
        let c = e.eval_intentions(&blend(&[("jawRight", 0.8)]));
        assert_eq!([a.len(), b.len(), c.len()], [1, 1, 1]);
        assert_eq!(a.union(b).union(c).len(), 3);
    }

    #[test]
    fn debounce_rises_on_second_frame() {
        let mut st = IntentionState::new(1, 2);
        let on = IntentionSet(1);
        assert!(st.advance(on, 0).risen.is_empty());
        assert_eq!(st.advance(on, 33).risen, on);
        assert_eq!(st.last_rise_ms(IntentionId(0)), Some(33));
    }

    #[test]
    fn debounce_suppresses_flicker() {
        let mut st = IntentionState::new(1, 2);
        for i in 0..50 {
            let e = st.advance(IntentionSet((i % 2 == 0) as u64), i * 33);
            assert!(e.risen.is_empty() && e.fallen.is_empty());
        }
    }

    #[test]
    fn three_on_three_off() {
        let mut st = IntentionState::new(1, 2);
        let seq = [1, 1, 1, 0, 0, 0];
        let mut edges = Vec::new();
        for (i, v) in seq.iter().enumerate() {
            let e = st.advance(IntentionSet(*v), i as u64);
            if !e.risen.is_empty() {
                edges.push(("rise", i));
            }
            if !e.fallen.is_empty() {
                edges.push(("fall", i));
            }
        }
        assert_eq!(edges, vec![("rise", 1), ("fall", 4)]);
    }
}
