//! Contract normalization.
//!
//! Rewrites a contract expression into canonical form: negations are pushed
//! down until they sit on an immediate or delayed contract, unions are
//! distributed out of intersections (and out of disjunctions), and every
//! intersection or disjunction node either carries an immediate contract on
//! the left or consolidates two delayed contracts into a single delayed
//! node. The delayed consolidation matters semantically: an intersection of
//! two function contracts must be enforced by one proxy that splits with
//! fresh blame variables on every use, while a union keeps the assertion-time
//! split so that conflicting uses join to `⊤` at the same variables.

use std::cell::OnceCell;
use std::rc::Rc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::interp::Env;
use crate::syntax::{classify, Abstraction, Classification, ContractExpr, Expression, Symbol};

/// Immediate part: base contracts and their negations. A base contract may
/// carry the sandbox environment of the closure it was embedded from; `None`
/// means the environment of the asserting closure applies.
#[derive(Debug, Clone, PartialEq)]
pub enum Imm {
    Base {
        param: Symbol,
        body: Rc<Expression>,
        env: Option<Env>,
    },
    Not(Rc<Imm>),
}

/// One property of an object contract; its canonical form is computed on
/// first access so that recursive contracts unroll lazily.
#[derive(Debug, Clone)]
pub struct PropContract {
    pub expr: ContractExpr,
    canon: OnceCell<Result<Rc<Canonical>, NormalizeError>>,
}

impl PropContract {
    pub fn new(expr: ContractExpr) -> Self {
        PropContract {
            expr,
            canon: OnceCell::new(),
        }
    }

    pub fn canonical(&self) -> Result<Rc<Canonical>, NormalizeError> {
        self.canon.get_or_init(|| normalize(&self.expr)).clone()
    }
}

impl PartialEq for PropContract {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

/// Delayed part: contracts enforced through a proxy at use sites.
#[derive(Debug, Clone, PartialEq)]
pub enum Del {
    Function {
        dom: Rc<Canonical>,
        rng: Rc<Canonical>,
        env: Option<Env>,
    },
    Dependent {
        abs: Rc<Abstraction>,
        env: Option<Env>,
    },
    Object {
        props: Rc<IndexMap<Rc<str>, PropContract>>,
        env: Option<Env>,
    },
    Recursive {
        abs: Rc<Abstraction>,
        env: Option<Env>,
    },
    Intersection(Rc<Del>, Rc<Del>),
    Or(Rc<Del>, Rc<Del>),
    Not(Rc<Del>),
}

/// Canonical contracts.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonical {
    Imm(Rc<Imm>),
    Del(Rc<Del>),
    /// Intersection with the immediate operand on the left.
    Intersection(Rc<Imm>, Rc<Canonical>),
    Union(Rc<Canonical>, Rc<Canonical>),
    And(Rc<Canonical>, Rc<Canonical>),
    /// Disjunction with the immediate operand on the left.
    Or(Rc<Imm>, Rc<Canonical>),
}

pub fn canonical_class(c: &Canonical) -> Classification {
    match c {
        Canonical::Imm(_) => Classification::Immediate,
        Canonical::Del(_) => Classification::Delayed,
        _ => Classification::Composite,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("object contract has duplicate property '{0}'")]
    DuplicateKey(String),
    #[error("unresolved expression in contract position: {0}")]
    UnresolvedSplice(String),
}

/// Normalize a contract expression into the canonical grammar. Idempotent:
/// normalizing the printed form of a canonical contract reproduces it.
pub fn normalize(c: &ContractExpr) -> Result<Rc<Canonical>, NormalizeError> {
    build(&push_negation(c))
}

/// Push negations down: double negations cancel and De Morgan's law rewrites
/// negated composites (`∩`↔`∪`, `∧`↔`∨`) until each negation sits on an
/// immediate or delayed contract.
pub fn push_negation(c: &ContractExpr) -> ContractExpr {
    match c {
        ContractExpr::Not(inner) => negate_pushed(push_negation(inner)),
        ContractExpr::Intersection(a, b) => ContractExpr::Intersection(
            Box::new(push_negation(a)),
            Box::new(push_negation(b)),
        ),
        ContractExpr::Union(a, b) => {
            ContractExpr::Union(Box::new(push_negation(a)), Box::new(push_negation(b)))
        }
        ContractExpr::And(a, b) => {
            ContractExpr::And(Box::new(push_negation(a)), Box::new(push_negation(b)))
        }
        ContractExpr::Or(a, b) => {
            ContractExpr::Or(Box::new(push_negation(a)), Box::new(push_negation(b)))
        }
        ContractExpr::Function(a, b) => {
            ContractExpr::Function(Box::new(push_negation(a)), Box::new(push_negation(b)))
        }
        ContractExpr::Object(props) => ContractExpr::Object(
            props
                .iter()
                .map(|(k, v)| (k.clone(), push_negation(v)))
                .collect(),
        ),
        _ => c.clone(),
    }
}

fn negate_pushed(c: ContractExpr) -> ContractExpr {
    match classify(&c) {
        // negation has reached an immediate or delayed contract
        Classification::Immediate | Classification::Delayed => match c {
            ContractExpr::Not(inner) => *inner,
            other => ContractExpr::Not(Box::new(other)),
        },
        Classification::Composite => match c {
            ContractExpr::Intersection(a, b) => {
                ContractExpr::Union(Box::new(negate_pushed(*a)), Box::new(negate_pushed(*b)))
            }
            ContractExpr::Union(a, b) => ContractExpr::Intersection(
                Box::new(negate_pushed(*a)),
                Box::new(negate_pushed(*b)),
            ),
            ContractExpr::And(a, b) => {
                ContractExpr::Or(Box::new(negate_pushed(*a)), Box::new(negate_pushed(*b)))
            }
            ContractExpr::Or(a, b) => {
                ContractExpr::And(Box::new(negate_pushed(*a)), Box::new(negate_pushed(*b)))
            }
            ContractExpr::Not(inner) => *inner,
            other => ContractExpr::Not(Box::new(other)),
        },
    }
}

fn build(c: &ContractExpr) -> Result<Rc<Canonical>, NormalizeError> {
    Ok(match c {
        ContractExpr::Base { param, body } => Rc::new(Canonical::Imm(Rc::new(Imm::Base {
            param: param.clone(),
            body: body.clone(),
            env: None,
        }))),
        ContractExpr::Function(dom, rng) => Rc::new(Canonical::Del(Rc::new(Del::Function {
            dom: normalize(dom)?,
            rng: normalize(rng)?,
            env: None,
        }))),
        ContractExpr::Dependent(abs) => Rc::new(Canonical::Del(Rc::new(Del::Dependent {
            abs: abs.clone(),
            env: None,
        }))),
        ContractExpr::Object(entries) => {
            let mut props: IndexMap<Rc<str>, PropContract> = IndexMap::new();
            for (k, v) in entries {
                if props
                    .insert(k.clone(), PropContract::new(v.clone()))
                    .is_some()
                {
                    return Err(NormalizeError::DuplicateKey(k.to_string()));
                }
            }
            Rc::new(Canonical::Del(Rc::new(Del::Object {
                props: Rc::new(props),
                env: None,
            })))
        }
        ContractExpr::Recursive(abs) => Rc::new(Canonical::Del(Rc::new(Del::Recursive {
            abs: abs.clone(),
            env: None,
        }))),
        ContractExpr::Intersection(a, b) => reorder_intersection(build(a)?, build(b)?),
        ContractExpr::Union(a, b) => Rc::new(Canonical::Union(build(a)?, build(b)?)),
        ContractExpr::And(a, b) => Rc::new(Canonical::And(build(a)?, build(b)?)),
        ContractExpr::Or(a, b) => reorder_or(build(a)?, build(b)?),
        ContractExpr::Not(inner) => {
            let built = build(inner)?;
            negate_canonical(&built)
        }
        ContractExpr::Splice(e) => {
            return Err(NormalizeError::UnresolvedSplice(e.to_string()));
        }
        ContractExpr::Embedded(cl) => stamp_env(&cl.canonical, &cl.env),
    })
}

/// Combine two canonical contracts under intersection. Unions distribute
/// out, nested intersections reassociate, a single immediate operand moves
/// to the left, and two delayed operands consolidate into one delayed node.
pub fn reorder_intersection(a: Rc<Canonical>, b: Rc<Canonical>) -> Rc<Canonical> {
    use Canonical::*;
    match (&*a, &*b) {
        (Union(u, v), _) => Rc::new(Union(
            reorder_intersection(b.clone(), u.clone()),
            reorder_intersection(b, v.clone()),
        )),
        (_, Union(u, v)) => Rc::new(Union(
            reorder_intersection(a.clone(), u.clone()),
            reorder_intersection(a, v.clone()),
        )),
        // immediate operands take the left slot before reassociation so the
        // result only depends on the operand classes, keeping normalization
        // idempotent
        (Imm(i), _) => Rc::new(Intersection(i.clone(), b)),
        (_, Imm(i)) => Rc::new(Intersection(i.clone(), a)),
        // reassociate through the combiner: the recursive result may expose
        // a union that still has to be distributed past the immediate part
        (Intersection(i, c), _) => {
            let rest = reorder_intersection(c.clone(), b);
            reorder_intersection(Rc::new(Imm(i.clone())), rest)
        }
        (_, Intersection(i, c)) => {
            let rest = reorder_intersection(a, c.clone());
            reorder_intersection(Rc::new(Imm(i.clone())), rest)
        }
        (Del(q), Del(r)) => Rc::new(Del(Rc::new(self::Del::Intersection(q.clone(), r.clone())))),
        // Boolean nodes block the grammar here; distribute as a last resort.
        (And(x, y), _) => Rc::new(And(
            reorder_intersection(x.clone(), b.clone()),
            reorder_intersection(y.clone(), b),
        )),
        (_, And(x, y)) => Rc::new(And(
            reorder_intersection(a.clone(), x.clone()),
            reorder_intersection(a, y.clone()),
        )),
        (Or(i, c), _) => Rc::new(Union(
            Rc::new(Intersection(i.clone(), b.clone())),
            reorder_intersection(c.clone(), b),
        )),
        (_, Or(i, c)) => Rc::new(Union(
            Rc::new(Intersection(i.clone(), a.clone())),
            reorder_intersection(c.clone(), a),
        )),
    }
}

/// Combine two canonical contracts under disjunction: immediate operand to
/// the left, two delayed operands consolidate, unions distribute out.
pub fn reorder_or(a: Rc<Canonical>, b: Rc<Canonical>) -> Rc<Canonical> {
    use Canonical::*;
    match (&*a, &*b) {
        (Union(u, v), _) => Rc::new(Union(
            reorder_or(u.clone(), b.clone()),
            reorder_or(v.clone(), b),
        )),
        (_, Union(u, v)) => Rc::new(Union(
            reorder_or(a.clone(), u.clone()),
            reorder_or(a, v.clone()),
        )),
        (Imm(i), _) => Rc::new(Or(i.clone(), b)),
        (_, Imm(i)) => Rc::new(Or(i.clone(), a)),
        (Del(q), Del(r)) => Rc::new(Del(Rc::new(self::Del::Or(q.clone(), r.clone())))),
        (Or(i, c), _) => {
            let rest = reorder_or(c.clone(), b);
            reorder_or(Rc::new(Imm(i.clone())), rest)
        }
        (_, Or(i, c)) => {
            let rest = reorder_or(c.clone(), a);
            reorder_or(Rc::new(Imm(i.clone())), rest)
        }
        (And(x, y), _) => Rc::new(And(
            reorder_or(x.clone(), b.clone()),
            reorder_or(y.clone(), b),
        )),
        (_, And(x, y)) => Rc::new(And(
            reorder_or(a.clone(), x.clone()),
            reorder_or(a, y.clone()),
        )),
        // intersections under a disjunction have no canonical production;
        // fall back to a union of the operands
        (Intersection(..), _) | (_, Intersection(..)) => Rc::new(Union(a, b)),
    }
}

fn negate_imm(i: &Rc<Imm>) -> Rc<Imm> {
    match &**i {
        Imm::Not(j) => j.clone(),
        _ => Rc::new(Imm::Not(i.clone())),
    }
}

fn negate_del(d: &Rc<Del>) -> Rc<Del> {
    match &**d {
        Del::Not(q) => q.clone(),
        _ => Rc::new(Del::Not(d.clone())),
    }
}

/// Negation of an already-canonical contract.
pub fn negate_canonical(c: &Canonical) -> Rc<Canonical> {
    match c {
        Canonical::Imm(i) => Rc::new(Canonical::Imm(negate_imm(i))),
        Canonical::Del(d) => Rc::new(Canonical::Del(negate_del(d))),
        Canonical::Intersection(i, rest) => Rc::new(Canonical::Union(
            Rc::new(Canonical::Imm(negate_imm(i))),
            negate_canonical(rest),
        )),
        Canonical::Union(a, b) => reorder_intersection(negate_canonical(a), negate_canonical(b)),
        Canonical::And(a, b) => reorder_or(negate_canonical(a), negate_canonical(b)),
        Canonical::Or(i, rest) => Rc::new(Canonical::And(
            Rc::new(Canonical::Imm(negate_imm(i))),
            negate_canonical(rest),
        )),
    }
}

fn stamp_imm(i: &Rc<Imm>, env: &Env) -> Rc<Imm> {
    match &**i {
        Imm::Base {
            param,
            body,
            env: None,
        } => Rc::new(Imm::Base {
            param: param.clone(),
            body: body.clone(),
            env: Some(env.clone()),
        }),
        Imm::Base { .. } => i.clone(),
        Imm::Not(j) => Rc::new(Imm::Not(stamp_imm(j, env))),
    }
}

fn stamp_del(d: &Rc<Del>, env: &Env) -> Rc<Del> {
    match &**d {
        Del::Function {
            dom,
            rng,
            env: None,
        } => Rc::new(Del::Function {
            dom: stamp_env(dom, env),
            rng: stamp_env(rng, env),
            env: Some(env.clone()),
        }),
        Del::Dependent { abs, env: None } => Rc::new(Del::Dependent {
            abs: abs.clone(),
            env: Some(env.clone()),
        }),
        Del::Object { props, env: None } => Rc::new(Del::Object {
            props: props.clone(),
            env: Some(env.clone()),
        }),
        Del::Recursive { abs, env: None } => Rc::new(Del::Recursive {
            abs: abs.clone(),
            env: Some(env.clone()),
        }),
        Del::Intersection(q, r) => {
            Rc::new(Del::Intersection(stamp_del(q, env), stamp_del(r, env)))
        }
        Del::Or(q, r) => Rc::new(Del::Or(stamp_del(q, env), stamp_del(r, env))),
        Del::Not(q) => Rc::new(Del::Not(stamp_del(q, env))),
        _ => d.clone(),
    }
}

/// Attach a sandbox environment to every leaf that does not carry one yet,
/// used when an already-normalized contract value is spliced into a larger
/// contract.
pub fn stamp_env(c: &Canonical, env: &Env) -> Rc<Canonical> {
    Rc::new(match c {
        Canonical::Imm(i) => Canonical::Imm(stamp_imm(i, env)),
        Canonical::Del(d) => Canonical::Del(stamp_del(d, env)),
        Canonical::Intersection(i, rest) => {
            Canonical::Intersection(stamp_imm(i, env), stamp_env(rest, env))
        }
        Canonical::Union(a, b) => Canonical::Union(stamp_env(a, env), stamp_env(b, env)),
        Canonical::And(a, b) => Canonical::And(stamp_env(a, env), stamp_env(b, env)),
        Canonical::Or(i, rest) => Canonical::Or(stamp_imm(i, env), stamp_env(rest, env)),
    })
}

// ---------------------------------------------------------------------------
// Back-conversion and the grammar checker
// ---------------------------------------------------------------------------

fn imm_to_expr(i: &Imm) -> ContractExpr {
    match i {
        Imm::Base { param, body, .. } => ContractExpr::Base {
            param: param.clone(),
            body: body.clone(),
        },
        Imm::Not(j) => ContractExpr::Not(Box::new(imm_to_expr(j))),
    }
}

fn del_to_expr(d: &Del) -> ContractExpr {
    match d {
        Del::Function { dom, rng, .. } => {
            ContractExpr::Function(Box::new(to_expr(dom)), Box::new(to_expr(rng)))
        }
        Del::Dependent { abs, .. } => ContractExpr::Dependent(abs.clone()),
        Del::Object { props, .. } => ContractExpr::Object(
            props
                .iter()
                .map(|(k, p)| (k.clone(), p.expr.clone()))
                .collect(),
        ),
        Del::Recursive { abs, .. } => ContractExpr::Recursive(abs.clone()),
        Del::Intersection(q, r) => {
            ContractExpr::Intersection(Box::new(del_to_expr(q)), Box::new(del_to_expr(r)))
        }
        Del::Or(q, r) => ContractExpr::Or(Box::new(del_to_expr(q)), Box::new(del_to_expr(r))),
        Del::Not(q) => ContractExpr::Not(Box::new(del_to_expr(q))),
    }
}

/// Structure-preserving conversion back to a contract expression. Embedded
/// environment stamps are dropped; only the shape survives.
pub fn to_expr(c: &Canonical) -> ContractExpr {
    match c {
        Canonical::Imm(i) => imm_to_expr(i),
        Canonical::Del(d) => del_to_expr(d),
        Canonical::Intersection(i, rest) => {
            ContractExpr::Intersection(Box::new(imm_to_expr(i)), Box::new(to_expr(rest)))
        }
        Canonical::Union(a, b) => {
            ContractExpr::Union(Box::new(to_expr(a)), Box::new(to_expr(b)))
        }
        Canonical::And(a, b) => ContractExpr::And(Box::new(to_expr(a)), Box::new(to_expr(b))),
        Canonical::Or(i, rest) => {
            ContractExpr::Or(Box::new(imm_to_expr(i)), Box::new(to_expr(rest)))
        }
    }
}

fn expr_is_imm(e: &ContractExpr) -> bool {
    match e {
        ContractExpr::Base { .. } => true,
        ContractExpr::Not(x) => expr_is_imm(x),
        ContractExpr::Embedded(cl) => {
            canonical_class(&cl.canonical) == Classification::Immediate
        }
        _ => false,
    }
}

fn expr_is_del(e: &ContractExpr) -> bool {
    match e {
        ContractExpr::Function(a, b) => is_canonical(a) && is_canonical(b),
        ContractExpr::Dependent(_) | ContractExpr::Recursive(_) => true,
        ContractExpr::Object(props) => {
            let mut seen = std::collections::HashSet::new();
            props.iter().all(|(k, _)| seen.insert(k.clone()))
        }
        ContractExpr::Intersection(a, b) | ContractExpr::Or(a, b) => {
            expr_is_del(a) && expr_is_del(b)
        }
        ContractExpr::Not(x) => expr_is_del(x),
        ContractExpr::Embedded(cl) => canonical_class(&cl.canonical) == Classification::Delayed,
        _ => false,
    }
}

/// Does a contract expression match the canonical grammar? Every
/// intersection and disjunction node must have an immediate left operand or
/// consist of two delayed contracts, and every negation must sit directly on
/// an immediate or delayed contract.
pub fn is_canonical(e: &ContractExpr) -> bool {
    if expr_is_imm(e) || expr_is_del(e) {
        return true;
    }
    match e {
        ContractExpr::Intersection(a, b) | ContractExpr::Or(a, b) => {
            expr_is_imm(a) && is_canonical(b)
        }
        ContractExpr::Union(a, b) | ContractExpr::And(a, b) => is_canonical(a) && is_canonical(b),
        _ => false,
    }
}
