//! Constraint store and blame calculation.
//!
//! Contract monitoring records one constraint per contract occurrence,
//! linking the occurrence's outcome to its enclosing operator. A solution
//! maps each blame identifier's `subject` and `context` fields to a B4
//! value; the least solution is computed by chaotic iteration from the
//! all-`Bot` mapping, which reaches the least fixpoint because every bound
//! is monotone in the knowledge order and the lattice has finite height.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use indexmap::{IndexMap, IndexSet};
use serde::Serialize;

use crate::b4::B4Value;
use crate::syntax::BlameId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Subject,
    Context,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Subject => "subject",
            Party::Context => "context",
        })
    }
}

/// Operator part of a constraint. Operand ids are always internal variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintForm {
    /// Outcome of a flat contract, already translated to a truth value.
    Flat(B4Value),
    Function(u64, u64),
    /// Property write; inverts the responsibilities of the assigned value.
    Set(u64),
    Intersection(u64, u64),
    Union(u64, u64),
    And(u64, u64),
    Or(u64, u64),
    Neg(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub target: BlameId,
    pub form: ConstraintForm,
}

impl Constraint {
    pub fn flat(target: BlameId, outcome: B4Value) -> Self {
        Constraint {
            target,
            form: ConstraintForm::Flat(outcome),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ConstraintForm::*;
        write!(f, "{} \u{25c1} ", self.target)?;
        match &self.form {
            Flat(v) => write!(f, "{}", v),
            Function(a, b) => write!(f, "\u{03b9}{} \u{2192} \u{03b9}{}", a, b),
            Set(a) => write!(f, "set(\u{03b9}{})", a),
            Intersection(a, b) => write!(f, "\u{03b9}{} \u{2229} \u{03b9}{}", a, b),
            Union(a, b) => write!(f, "\u{03b9}{} \u{222a} \u{03b9}{}", a, b),
            And(a, b) => write!(f, "\u{03b9}{} \u{2227} \u{03b9}{}", a, b),
            Or(a, b) => write!(f, "\u{03b9}{} \u{2228} \u{03b9}{}", a, b),
            Neg(a) => write!(f, "\u{00ac}\u{03b9}{}", a),
        }
    }
}

/// A finite set of constraints; insertion order is kept for debug output,
/// duplicates collapse.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    items: IndexSet<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set union with a single constraint; returns true when it was new.
    pub fn add(&mut self, k: Constraint) -> bool {
        self.items.insert(k)
    }

    pub fn union_with(&mut self, other: &ConstraintSet) {
        for k in other.iter() {
            self.items.insert(k.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn contains(&self, k: &Constraint) -> bool {
        self.items.contains(k)
    }

    /// Every blame id mentioned as a target or operand, targets first.
    pub fn ids(&self) -> Vec<BlameId> {
        let mut out: IndexSet<BlameId> = IndexSet::new();
        for k in self.iter() {
            out.insert(k.target.clone());
        }
        for k in self.iter() {
            for op in operand_ids(&k.form) {
                out.insert(BlameId::Internal(op));
            }
        }
        out.into_iter().collect()
    }
}

fn operand_ids(form: &ConstraintForm) -> Vec<u64> {
    use ConstraintForm::*;
    match form {
        Flat(_) => vec![],
        Set(a) | Neg(a) => vec![*a],
        Function(a, b) | Intersection(a, b) | Union(a, b) | And(a, b) | Or(a, b) => {
            vec![*a, *b]
        }
    }
}

/// A mapping from (blame id, field) to B4, total with default `Bot`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Solution {
    map: HashMap<(BlameId, Party), B4Value>,
}

impl Solution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &BlameId, party: Party) -> B4Value {
        self.map
            .get(&(id.clone(), party))
            .copied()
            .unwrap_or(B4Value::Bot)
    }

    pub fn subject(&self, id: &BlameId) -> B4Value {
        self.get(id, Party::Subject)
    }

    pub fn context(&self, id: &BlameId) -> B4Value {
        self.get(id, Party::Context)
    }

    /// Record a field of a candidate mapping (knowledge join with the
    /// current entry). Used when enumerating mappings against `satisfies`.
    pub fn assign(&mut self, id: &BlameId, party: Party, v: B4Value) {
        self.join(id, party, v);
    }

    /// Knowledge-monotone update; returns true if the entry grew.
    fn join(&mut self, id: &BlameId, party: Party, v: B4Value) -> bool {
        if v == B4Value::Bot {
            return false;
        }
        let entry = self
            .map
            .entry((id.clone(), party))
            .or_insert(B4Value::Bot);
        let joined = entry.k_join(v);
        if joined != *entry {
            *entry = joined;
            true
        } else {
            false
        }
    }

    /// Pointwise knowledge order over a set of ids.
    pub fn k_leq_on(&self, other: &Solution, ids: &[BlameId]) -> bool {
        ids.iter().all(|id| {
            self.subject(id).k_leq(other.subject(id)) && self.context(id).k_leq(other.context(id))
        })
    }
}

fn internal(solution: &Solution, id: u64, party: Party) -> B4Value {
    solution.get(&BlameId::Internal(id), party)
}

/// Lower bounds `(subject, context)` a constraint imposes on its target
/// under the current mapping.
fn bounds(solution: &Solution, k: &Constraint) -> (B4Value, B4Value) {
    use ConstraintForm::*;
    use Party::*;
    match &k.form {
        Flat(v) => (*v, B4Value::T),
        Function(dom, rng) => {
            let subj = internal(solution, *dom, Context).conj(
                internal(solution, *dom, Subject).implies(internal(solution, *rng, Subject)),
            );
            let ctx =
                internal(solution, *dom, Subject).conj(internal(solution, *rng, Context));
            (subj, ctx)
        }
        Set(i) => (B4Value::T, internal(solution, *i, Subject)),
        Intersection(a, b) => (
            internal(solution, *a, Subject).conj(internal(solution, *b, Subject)),
            internal(solution, *a, Context).disj(internal(solution, *b, Context)),
        ),
        Union(a, b) => (
            internal(solution, *a, Subject).disj(internal(solution, *b, Subject)),
            internal(solution, *a, Context).conj(internal(solution, *b, Context)),
        ),
        And(a, b) => {
            let ctx = internal(solution, *a, Context).conj(internal(solution, *b, Context));
            let subj = ctx
                .implies(internal(solution, *a, Subject).conj(internal(solution, *b, Subject)));
            (subj, ctx)
        }
        Or(a, b) => {
            let ca = internal(solution, *a, Context);
            let cb = internal(solution, *b, Context);
            let sa = internal(solution, *a, Subject);
            let sb = internal(solution, *b, Subject);
            let subj = ca.disj(cb).implies(ca.conj(sa).disj(cb.conj(sb)));
            (subj, ca.disj(cb))
        }
        Neg(i) => (
            internal(solution, *i, Subject).implies(internal(solution, *i, Context).neg()),
            B4Value::T,
        ),
    }
}

/// Resume chaotic iteration from `solution` until a full pass is stable.
/// Returns the number of passes (including the final stable one).
fn iterate(set: &ConstraintSet, solution: &mut Solution) -> usize {
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for k in set.iter() {
            let (subj, ctx) = bounds(solution, k);
            changed |= solution.join(&k.target, Party::Subject, subj);
            changed |= solution.join(&k.target, Party::Context, ctx);
        }
        if !changed {
            break;
        }
    }
    passes
}

/// Least solution of a constraint set.
pub fn solve(set: &ConstraintSet) -> Solution {
    solve_counting(set).0
}

/// Least solution plus the number of iteration passes, for termination
/// diagnostics.
pub fn solve_counting(set: &ConstraintSet) -> (Solution, usize) {
    let mut solution = Solution::new();
    let passes = iterate(set, &mut solution);
    debug_assert!(satisfies(&solution, set), "fixpoint does not satisfy its own set");
    (solution, passes)
}

/// Does `solution` meet every constraint's lower bounds?
pub fn satisfies(solution: &Solution, set: &ConstraintSet) -> bool {
    set.iter().all(|k| {
        let (subj, ctx) = bounds(solution, k);
        subj.k_leq(solution.get(&k.target, Party::Subject))
            && ctx.k_leq(solution.get(&k.target, Party::Context))
    })
}

/// Outcome of the blame-state check: a violation lists every source label
/// whose subject or context field reached `f` or `⊤`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlameState {
    Ok,
    Violation(Vec<(Rc<str>, Party)>),
}

pub fn blame_state(set: &ConstraintSet) -> BlameState {
    blamed_in(set, &solve(set))
}

fn blamed_in(set: &ConstraintSet, solution: &Solution) -> BlameState {
    let mut blamed: Vec<(Rc<str>, Party)> = Vec::new();
    for id in set.ids() {
        if let BlameId::Label(label) = &id {
            for party in [Party::Subject, Party::Context] {
                if solution.get(&id, party).blames() {
                    blamed.push((label.clone(), party));
                }
            }
        }
    }
    if blamed.is_empty() {
        BlameState::Ok
    } else {
        blamed.sort();
        blamed.dedup();
        BlameState::Violation(blamed)
    }
}

/// Incremental store: keeps the set together with its current least
/// solution, resuming iteration after every addition. Correct because the
/// solution only grows under ⊑ as constraints are added.
#[derive(Debug, Default)]
pub struct ConstraintStore {
    set: ConstraintSet,
    solution: Solution,
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, k: Constraint) -> bool {
        let added = self.set.add(k);
        if added {
            iterate(&self.set, &mut self.solution);
        }
        added
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn blame_state(&self) -> BlameState {
        blamed_in(&self.set, &self.solution)
    }
}

// ---------------------------------------------------------------------------
// Debug serialization
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DumpConstraint {
    target: String,
    form: &'static str,
    args: Vec<String>,
}

#[derive(Serialize)]
struct DumpFields {
    subject: String,
    context: String,
}

#[derive(Serialize)]
struct Dump {
    constraints: Vec<DumpConstraint>,
    solution: IndexMap<String, DumpFields>,
}

fn iota(n: u64) -> String {
    format!("\u{03b9}{}", n)
}

/// JSON rendering of a constraint set and a solution, with fixed field
/// order: constraints as `{"target","form","args"}` records in insertion
/// order, then the solution keyed by blame id.
pub fn to_debug_json(set: &ConstraintSet, solution: &Solution) -> String {
    use ConstraintForm::*;
    let constraints = set
        .iter()
        .map(|k| {
            let (form, args) = match &k.form {
                Flat(v) => ("flat", vec![v.to_string()]),
                Function(a, b) => ("function", vec![iota(*a), iota(*b)]),
                Set(a) => ("set", vec![iota(*a)]),
                Intersection(a, b) => ("intersection", vec![iota(*a), iota(*b)]),
                Union(a, b) => ("union", vec![iota(*a), iota(*b)]),
                And(a, b) => ("and", vec![iota(*a), iota(*b)]),
                Or(a, b) => ("or", vec![iota(*a), iota(*b)]),
                Neg(a) => ("neg", vec![iota(*a)]),
            };
            DumpConstraint {
                target: k.target.to_string(),
                form,
                args,
            }
        })
        .collect();

    let mut ids = set.ids();
    ids.sort();
    let mut fields = IndexMap::new();
    for id in ids {
        fields.insert(
            id.to_string(),
            DumpFields {
                subject: solution.subject(&id).to_string(),
                context: solution.context(&id).to_string(),
            },
        );
    }
    let dump = Dump {
        constraints,
        solution: fields,
    };
    serde_json::to_string(&dump).expect("dump serialization cannot fail")
}
