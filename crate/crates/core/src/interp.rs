//! Pretty-big-step evaluator with contract monitoring.
//!
//! Evaluation threads a store of objects and a constraint store through the
//! program. Native objects hold a property dictionary, an optional function
//! closure and a prototype. Two proxy kinds mediate access: sandbox proxies
//! enforce the read-only membrane around values imported into contract code,
//! and contract proxies attach a delayed contract together with the sandbox
//! environment and blame identifier of its assertion. A violation surfaces
//! as an exception carried to the top level.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;

use crate::b4::B4Value;
use crate::canon::{self, Canonical, Del, Imm, NormalizeError};
use crate::constraints::{BlameState, Constraint, ConstraintForm, ConstraintStore, Party};
use crate::syntax::{
    format_number, Abstraction, BinOp, BlameId, Constant, ContractExpr, Expression, InternalIdGen,
    Symbol, UnOp,
};

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

static ENV_UID: AtomicU64 = AtomicU64::new(0);

fn next_env_uid() -> u64 {
    ENV_UID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
struct EnvNode {
    name: Symbol,
    value: Value,
    parent: Option<Rc<EnvNode>>,
}

/// Immutable binding chain. A sandbox environment carries the identity of
/// the membrane it belongs to; extending an environment stays within the
/// same sandbox.
#[derive(Debug, Clone, Default)]
pub struct Env {
    node: Option<Rc<EnvNode>>,
    sandbox: Option<u64>,
}

impl PartialEq for Env {
    fn eq(&self, other: &Self) -> bool {
        self.sandbox == other.sandbox
            && match (&self.node, &other.node) {
                (None, None) => true,
                (Some(a), Some(b)) => Rc::ptr_eq(a, b),
                _ => false,
            }
    }
}

impl Env {
    pub fn empty() -> Self {
        Env::default()
    }

    /// A fresh, empty sandbox environment with its own membrane identity.
    pub fn fresh_sandbox() -> Self {
        Env {
            node: None,
            sandbox: Some(next_env_uid()),
        }
    }

    pub fn is_sandbox(&self) -> bool {
        self.sandbox.is_some()
    }

    pub fn sandbox_uid(&self) -> Option<u64> {
        self.sandbox
    }

    pub fn extend(&self, name: Symbol, value: Value) -> Env {
        Env {
            node: Some(Rc::new(EnvNode {
                name,
                value,
                parent: self.node.clone(),
            })),
            sandbox: self.sandbox,
        }
    }

    pub fn lookup(&self, name: &str) -> Option<Value> {
        let mut cur = self.node.as_ref();
        while let Some(node) = cur {
            if &*node.name == name {
                return Some(node.value.clone());
            }
            cur = node.parent.as_ref();
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Values and the store
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Location(pub usize);

/// A contract value: the contract paired with the sandbox environment it was
/// created in, plus its cached canonical form.
#[derive(Debug)]
pub struct ContractClosure {
    pub env: Env,
    pub source: ContractExpr,
    pub canonical: Rc<Canonical>,
}

impl PartialEq for ContractClosure {
    fn eq(&self, other: &Self) -> bool {
        // contract values are compared by identity
        std::ptr::eq(self, other)
    }
}

/// A contract abstraction value.
#[derive(Debug)]
pub struct CtorClosure {
    pub env: Env,
    pub abs: Rc<Abstraction>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Constant(Constant),
    Location(Location),
    Contract(Rc<ContractClosure>),
    Ctor(Rc<CtorClosure>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Constant(a), Value::Constant(b)) => a == b,
            (Value::Location(a), Value::Location(b)) => a == b,
            (Value::Contract(a), Value::Contract(b)) => Rc::ptr_eq(a, b),
            (Value::Ctor(a), Value::Ctor(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Value {
    pub fn undefined() -> Value {
        Value::Constant(Constant::Undefined)
    }

    pub fn number(n: f64) -> Value {
        Value::Constant(Constant::Number(n))
    }

    pub fn string(s: &str) -> Value {
        Value::Constant(Constant::Str(Rc::from(s)))
    }

    pub fn bool(b: bool) -> Value {
        Value::Constant(Constant::Bool(b))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Constant(c) => write!(f, "{}", c),
            Value::Location(l) => write!(f, "<object:{}>", l.0),
            Value::Contract(_) => f.write_str("<contract>"),
            Value::Ctor(_) => f.write_str("<constructor>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub env: Env,
    pub param: Symbol,
    pub body: Rc<Expression>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreObject {
    Native {
        dict: IndexMap<Rc<str>, Value>,
        closure: Option<Closure>,
        proto: Value,
    },
    /// Read-only membrane around `target`, tied to a sandbox environment.
    SandboxProxy { target: Location, env: Env },
    /// Delayed contract attached to `target`.
    ContractProxy {
        target: Location,
        env: Env,
        blame: BlameId,
        contract: Rc<Del>,
    },
}

#[derive(Debug, Default)]
pub struct Store {
    objects: Vec<StoreObject>,
    wrap_cache: HashMap<(usize, u64), Location>,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn alloc(&mut self, o: StoreObject) -> Location {
        let l = Location(self.objects.len());
        self.objects.push(o);
        l
    }

    pub fn get(&self, l: Location) -> &StoreObject {
        &self.objects[l.0]
    }

    fn get_mut(&mut self, l: Location) -> &mut StoreObject {
        &mut self.objects[l.0]
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn snapshot(&self) -> Vec<StoreObject> {
        self.objects.clone()
    }
}

// ---------------------------------------------------------------------------
// Behaviors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ExnKind {
    ContractViolation(Vec<(Rc<str>, Party)>),
    SandboxViolation,
    TypeError,
    UnboundVariable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exn {
    pub kind: ExnKind,
    pub message: String,
}

impl Exn {
    fn type_error(msg: impl Into<String>) -> Self {
        Exn {
            kind: ExnKind::TypeError,
            message: msg.into(),
        }
    }

    fn sandbox(msg: impl Into<String>) -> Self {
        Exn {
            kind: ExnKind::SandboxViolation,
            message: msg.into(),
        }
    }
}

impl fmt::Display for Exn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExnKind::ContractViolation(blamed) => {
                write!(f, "contract violation:")?;
                for (label, party) in blamed {
                    write!(f, " blame {} at {};", party, label)?;
                }
                Ok(())
            }
            ExnKind::SandboxViolation => write!(f, "sandbox violation: {}", self.message),
            ExnKind::TypeError => write!(f, "type error: {}", self.message),
            ExnKind::UnboundVariable => write!(f, "unbound variable: {}", self.message),
        }
    }
}

/// The outcome of an evaluation: a value or an exception.
pub type Behavior = Result<Value, Exn>;

/// How a captured exception inside a predicate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExceptionOutcome {
    /// The exception counts as false.
    #[default]
    False,
    /// The exception counts as conflicting information.
    Top,
}

/// Truthiness of a behavior: exceptions count per configuration, falsy
/// constants count as false, everything else as true.
pub fn make_val(b: &Behavior, exceptions: ExceptionOutcome) -> B4Value {
    match b {
        Err(_) => match exceptions {
            ExceptionOutcome::False => B4Value::F,
            ExceptionOutcome::Top => B4Value::Top,
        },
        Ok(Value::Constant(c)) => B4Value::of_bool(c.is_truthy()),
        Ok(_) => B4Value::T,
    }
}

// ---------------------------------------------------------------------------
// Machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MachineConfig {
    pub exception_outcome: ExceptionOutcome,
    /// Snapshot the store around every predicate run and record any
    /// modification of a pre-existing location.
    pub audit_sandbox: bool,
    pub max_depth: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            exception_outcome: ExceptionOutcome::False,
            audit_sandbox: false,
            max_depth: 2000,
        }
    }
}

pub type TraceSink = Box<dyn FnMut(&str)>;

pub struct Machine {
    pub store: Store,
    pub constraints: ConstraintStore,
    pub config: MachineConfig,
    pub audit_failures: Vec<String>,
    ids: InternalIdGen,
    depth: usize,
    trace: Option<TraceSink>,
}

impl Default for Machine {
    fn default() -> Self {
        Machine::new(MachineConfig::default())
    }
}

impl Machine {
    pub fn new(config: MachineConfig) -> Self {
        Machine {
            store: Store::new(),
            constraints: ConstraintStore::new(),
            config,
            audit_failures: Vec::new(),
            ids: InternalIdGen::new(),
            depth: 0,
            trace: None,
        }
    }

    pub fn set_trace(&mut self, sink: TraceSink) {
        self.trace = Some(sink);
    }

    fn trace_rule(&mut self, rule: &str, term: &str, constraint: Option<&Constraint>) {
        if let Some(sink) = self.trace.as_mut() {
            let line = match constraint {
                Some(k) => format!("RULE {} | term={} | \u{03c2}+={}", rule, term, k),
                None => format!("RULE {} | term={}", rule, term),
            };
            sink(&line);
        }
    }

    fn fresh(&mut self) -> u64 {
        self.ids.fresh_raw()
    }

    fn add_constraint(&mut self, rule: &str, term: &str, k: Constraint) {
        self.trace_rule(rule, term, Some(&k));
        self.constraints.add(k);
    }

    /// Run a complete program in an empty environment.
    pub fn run(&mut self, program: &Expression) -> Behavior {
        self.eval(&Env::empty(), program)
    }

    // -- evaluation ---------------------------------------------------------

    /// Depth guard shared by every recursive entry point; grows the stack
    /// in segments so deep-but-bounded recursion does not fault before the
    /// configured limit signals an error.
    fn guarded<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, Exn>) -> Result<T, Exn> {
        if self.depth >= self.config.max_depth {
            return Err(Exn::type_error("maximum recursion depth exceeded"));
        }
        self.depth += 1;
        let r = stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || f(self));
        self.depth -= 1;
        r
    }

    pub fn eval(&mut self, env: &Env, e: &Expression) -> Behavior {
        self.guarded(|m| m.eval_inner(env, e))
    }

    fn eval_inner(&mut self, env: &Env, e: &Expression) -> Behavior {
        match e {
            Expression::Const(c) => {
                self.trace_rule("Const", &c.to_string(), None);
                Ok(Value::Constant(c.clone()))
            }
            Expression::Var(x) => {
                self.trace_rule("Var", x, None);
                env.lookup(x).ok_or_else(|| Exn {
                    kind: ExnKind::UnboundVariable,
                    message: x.to_string(),
                })
            }
            Expression::Contract(c) => self.eval_contract_literal(env, c),
            Expression::Ctor(abs) => {
                let (rule, cenv) = if env.is_sandbox() {
                    ("Constructor-Sandbox", env.clone())
                } else {
                    ("Constructor-Fresh", Env::fresh_sandbox())
                };
                self.trace_rule(rule, &format!("fun({}){{…}}", abs.param), None);
                Ok(Value::Ctor(Rc::new(CtorClosure {
                    env: cenv,
                    abs: abs.clone(),
                })))
            }
            Expression::Binary(op, a, b) => {
                let v = self.eval(env, a)?;
                let u = self.eval(env, b)?;
                self.trace_rule("Op", &format!("{:?}({}, {})", op, v, u), None);
                self.delta(*op, &v, &u)
            }
            Expression::Unary(op, a) => {
                let v = self.eval(env, a)?;
                self.trace_rule("Op", &format!("{:?}({})", op, v), None);
                self.delta1(*op, &v)
            }
            Expression::Lambda(x, body) => {
                self.trace_rule("Abs", &format!("fun({}){{…}}", x), None);
                let l = self.store.alloc(StoreObject::Native {
                    dict: IndexMap::new(),
                    closure: Some(Closure {
                        env: env.clone(),
                        param: x.clone(),
                        body: body.clone(),
                    }),
                    proto: Value::Constant(Constant::Null),
                });
                Ok(Value::Location(l))
            }
            Expression::App(f, arg) => {
                let callee = self.eval(env, f)?;
                match callee {
                    Value::Ctor(ctor) => {
                        let w = self.eval(env, arg)?;
                        self.construct(&ctor, w)
                    }
                    Value::Location(l) => {
                        let v = self.eval(env, arg)?;
                        self.apply(l, v)
                    }
                    other => Err(Exn::type_error(format!("{} is not a function", other))),
                }
            }
            Expression::New(p) => {
                let proto = self.eval(env, p)?;
                self.trace_rule("New", &format!("new {}", proto), None);
                let l = self.store.alloc(StoreObject::Native {
                    dict: IndexMap::new(),
                    closure: None,
                    proto,
                });
                Ok(Value::Location(l))
            }
            Expression::Get(obj, name) => {
                // only locations are indexable; the index evaluates after
                // the target is known to be one
                let l = match self.eval(env, obj)? {
                    Value::Location(l) => l,
                    other => {
                        return Err(Exn::type_error(format!(
                            "cannot read a property of {}",
                            other
                        )))
                    }
                };
                let key = self.eval(env, name)?;
                let key = self.property_name(&key)?;
                self.get(l, &key)
            }
            Expression::Put(obj, name, value) => {
                let l = match self.eval(env, obj)? {
                    Value::Location(l) => l,
                    other => {
                        return Err(Exn::type_error(format!(
                            "cannot write a property of {}",
                            other
                        )))
                    }
                };
                let key = self.eval(env, name)?;
                let key = self.property_name(&key)?;
                let v = self.eval(env, value)?;
                self.put(l, &key, v)
            }
            Expression::Assert(subject, label, contract) => {
                let v = self.eval(env, subject)?;
                let cv = self.eval(env, contract)?;
                match cv {
                    Value::Contract(c) => {
                        self.assert_contract(v, &c, BlameId::Label(label.0.clone()))
                    }
                    other => Err(Exn::type_error(format!(
                        "assertion requires a contract, got {}",
                        other
                    ))),
                }
            }
        }
    }

    fn property_name(&self, v: &Value) -> Result<Rc<str>, Exn> {
        match v {
            Value::Constant(c) => Ok(c.to_property_name()),
            other => Err(Exn::type_error(format!(
                "property name must be a constant, got {}",
                other
            ))),
        }
    }

    // -- primitive operations ----------------------------------------------

    fn delta(&mut self, op: BinOp, v: &Value, u: &Value) -> Behavior {
        if op == BinOp::StrictEq {
            return self.strict_eq(v, u);
        }
        let (a, b) = match (v, u) {
            (Value::Constant(a), Value::Constant(b)) => (a, b),
            _ => {
                return Err(Exn::type_error(format!(
                    "primitive operation on non-constant operands ({}, {})",
                    v, u
                )))
            }
        };
        use Constant::*;
        match op {
            BinOp::Add => match (a, b) {
                (Number(x), Number(y)) => Ok(Value::number(x + y)),
                (Str(x), Str(y)) => Ok(Value::string(&format!("{}{}", x, y))),
                (Str(x), Number(y)) => Ok(Value::string(&format!("{}{}", x, format_number(*y)))),
                (Number(x), Str(y)) => Ok(Value::string(&format!("{}{}", format_number(*x), y))),
                _ => Err(Exn::type_error("+ expects numbers or strings")),
            },
            BinOp::Sub => match (a, b) {
                (Number(x), Number(y)) => Ok(Value::number(x - y)),
                _ => Err(Exn::type_error("- expects numbers")),
            },
            BinOp::Mul => match (a, b) {
                (Number(x), Number(y)) => Ok(Value::number(x * y)),
                _ => Err(Exn::type_error("* expects numbers")),
            },
            BinOp::Lt => match (a, b) {
                (Number(x), Number(y)) => Ok(Value::bool(x < y)),
                (Str(x), Str(y)) => Ok(Value::bool(x < y)),
                _ => Err(Exn::type_error("< expects two numbers or two strings")),
            },
            BinOp::Gt => match (a, b) {
                (Number(x), Number(y)) => Ok(Value::bool(x > y)),
                (Str(x), Str(y)) => Ok(Value::bool(x > y)),
                _ => Err(Exn::type_error("> expects two numbers or two strings")),
            },
            BinOp::StrictEq => unreachable!("handled above"),
        }
    }

    fn strict_eq(&self, v: &Value, u: &Value) -> Behavior {
        use Constant::*;
        match (v, u) {
            (Value::Constant(a), Value::Constant(b)) => {
                let eq = match (a, b) {
                    // NaN is not strictly equal to itself
                    (Number(x), Number(y)) => x == y,
                    (Str(x), Str(y)) => x == y,
                    (Bool(x), Bool(y)) => x == y,
                    (Undefined, Undefined) => true,
                    (Null, Null) => true,
                    _ => false,
                };
                Ok(Value::bool(eq))
            }
            _ => Err(Exn::type_error(
                "=== expects constant operands in this calculus",
            )),
        }
    }

    fn delta1(&mut self, op: UnOp, v: &Value) -> Behavior {
        match op {
            UnOp::TypeOf => Ok(Value::string(self.type_of(v))),
            UnOp::Not => match v {
                Value::Constant(c) => Ok(Value::bool(!c.is_truthy())),
                other => Err(Exn::type_error(format!("! expects a constant, got {}", other))),
            },
        }
    }

    fn type_of(&self, v: &Value) -> &'static str {
        match v {
            Value::Constant(c) => c.type_name(),
            Value::Contract(_) | Value::Ctor(_) => "object",
            Value::Location(l) => match self.store.get(*l) {
                StoreObject::Native { closure: Some(_), .. } => "function",
                StoreObject::Native { .. } => "object",
                StoreObject::SandboxProxy { target, .. }
                | StoreObject::ContractProxy { target, .. } => {
                    self.type_of(&Value::Location(*target))
                }
            },
        }
    }

    // -- contract literals and construction ---------------------------------

    /// Evaluate a contract literal to a contract value, resolving spliced
    /// expressions in the current scope and caching the canonical form.
    fn eval_contract_literal(&mut self, env: &Env, c: &ContractExpr) -> Behavior {
        let resolved = self.resolve_splices(env, c)?;
        let (rule, cenv) = if env.is_sandbox() {
            ("Contract-Sandbox", env.clone())
        } else {
            ("Contract-Fresh", Env::fresh_sandbox())
        };
        let canonical = canon::normalize(&resolved).map_err(normalize_exn)?;
        self.trace_rule(rule, &resolved.to_string(), None);
        Ok(Value::Contract(Rc::new(ContractClosure {
            env: cenv,
            source: resolved,
            canonical,
        })))
    }

    fn resolve_splices(&mut self, env: &Env, c: &ContractExpr) -> Result<ContractExpr, Exn> {
        Ok(match c {
            ContractExpr::Splice(e) => {
                let v = self.eval(env, e)?;
                match v {
                    Value::Contract(cl) => ContractExpr::Embedded(cl),
                    other => {
                        return Err(Exn::type_error(format!(
                            "expected a contract in contract position, got {}",
                            other
                        )))
                    }
                }
            }
            ContractExpr::Function(a, b) => ContractExpr::Function(
                Box::new(self.resolve_splices(env, a)?),
                Box::new(self.resolve_splices(env, b)?),
            ),
            ContractExpr::Object(props) => {
                let mut out = Vec::with_capacity(props.len());
                for (k, v) in props {
                    out.push((k.clone(), self.resolve_splices(env, v)?));
                }
                ContractExpr::Object(out)
            }
            ContractExpr::Intersection(a, b) => ContractExpr::Intersection(
                Box::new(self.resolve_splices(env, a)?),
                Box::new(self.resolve_splices(env, b)?),
            ),
            ContractExpr::Union(a, b) => ContractExpr::Union(
                Box::new(self.resolve_splices(env, a)?),
                Box::new(self.resolve_splices(env, b)?),
            ),
            ContractExpr::And(a, b) => ContractExpr::And(
                Box::new(self.resolve_splices(env, a)?),
                Box::new(self.resolve_splices(env, b)?),
            ),
            ContractExpr::Or(a, b) => ContractExpr::Or(
                Box::new(self.resolve_splices(env, a)?),
                Box::new(self.resolve_splices(env, b)?),
            ),
            ContractExpr::Not(a) => ContractExpr::Not(Box::new(self.resolve_splices(env, a)?)),
            _ => c.clone(),
        })
    }

    /// Apply a contract abstraction: the argument crosses the membrane and
    /// the body must evaluate to a contract value sharing the extended
    /// sandbox environment.
    pub fn construct(&mut self, ctor: &Rc<CtorClosure>, w: Value) -> Behavior {
        self.trace_rule("Construct", &format!("(fun({}){{…}})({})", ctor.abs.param, w), None);
        let wrapped = self.wrap(&ctor.env, w);
        let inner = ctor.env.extend(ctor.abs.param.clone(), wrapped);
        let b = self.eval(&inner, &ctor.abs.body)?;
        match b {
            Value::Contract(_) => Ok(b),
            other => Err(Exn::type_error(format!(
                "constructor must return a contract, got {}",
                other
            ))),
        }
    }

    // -- contract assertion --------------------------------------------------

    pub fn assert_contract(
        &mut self,
        v: Value,
        contract: &Rc<ContractClosure>,
        blame: BlameId,
    ) -> Behavior {
        self.trace_rule(
            "Assert",
            &format!("{} @{} {}", v, blame, contract.source),
            None,
        );
        let canonical = contract.canonical.clone();
        self.assert_canonical(v, &canonical, &contract.env, &blame)
    }

    fn assert_canonical(
        &mut self,
        v: Value,
        c: &Canonical,
        ambient: &Env,
        blame: &BlameId,
    ) -> Behavior {
        match c {
            Canonical::Imm(i) => self.assert_immediate(v, i, ambient, blame),
            Canonical::Del(d) => self.assert_delayed(v, d, ambient, blame),
            Canonical::Intersection(i, rest) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Assert-IntersectionContract",
                    &v.to_string(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Intersection(i1, i2),
                    },
                );
                let v1 = self.assert_immediate(v, i, ambient, &BlameId::Internal(i1))?;
                self.assert_canonical(v1, rest, ambient, &BlameId::Internal(i2))
            }
            Canonical::Union(c1, c2) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Assert-UnionContract",
                    &v.to_string(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Union(i1, i2),
                    },
                );
                let v1 = self.assert_canonical(v, c1, ambient, &BlameId::Internal(i1))?;
                self.assert_canonical(v1, c2, ambient, &BlameId::Internal(i2))
            }
            Canonical::And(c1, c2) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Assert-AndContract",
                    &v.to_string(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::And(i1, i2),
                    },
                );
                let v1 = self.assert_canonical(v, c1, ambient, &BlameId::Internal(i1))?;
                self.assert_canonical(v1, c2, ambient, &BlameId::Internal(i2))
            }
            Canonical::Or(i, rest) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Assert-OrContract",
                    &v.to_string(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Or(i1, i2),
                    },
                );
                let v1 = self.assert_immediate(v, i, ambient, &BlameId::Internal(i1))?;
                self.assert_canonical(v1, rest, ambient, &BlameId::Internal(i2))
            }
        }
    }

    fn assert_immediate(
        &mut self,
        v: Value,
        i: &Imm,
        ambient: &Env,
        blame: &BlameId,
    ) -> Behavior {
        match i {
            Imm::Base { param, body, env } => {
                let pred_env = env.as_ref().unwrap_or(ambient);
                let wrapped = self.wrap(pred_env, v.clone());
                let call_env = pred_env.extend(param.clone(), wrapped);

                let audit = if self.config.audit_sandbox {
                    Some(self.store.snapshot())
                } else {
                    None
                };
                let outcome = self.eval(&call_env, body);
                if let Some(before) = audit {
                    self.audit_store(&before, blame);
                }
                // sandbox and contract violations are not contract outcomes;
                // they escalate past the base-contract boundary
                if let Err(e) = &outcome {
                    if matches!(
                        e.kind,
                        ExnKind::SandboxViolation | ExnKind::ContractViolation(_)
                    ) {
                        return outcome;
                    }
                }
                let truth = make_val(&outcome, self.config.exception_outcome);
                self.add_constraint(
                    "Assert-BaseContract",
                    &v.to_string(),
                    Constraint::flat(blame.clone(), truth),
                );
                self.check_blame(v)
            }
            Imm::Not(inner) => {
                let i1 = self.fresh();
                self.add_constraint(
                    "Assert-NotContract",
                    &v.to_string(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Neg(i1),
                    },
                );
                self.assert_immediate(v, inner, ambient, &BlameId::Internal(i1))
            }
        }
    }

    fn assert_delayed(&mut self, v: Value, d: &Rc<Del>, ambient: &Env, blame: &BlameId) -> Behavior {
        match v {
            Value::Location(l) => {
                self.trace_rule(
                    "Assert-DelayedContract",
                    &format!("<object:{}> @{}", l.0, blame),
                    None,
                );
                let proxy = self.store.alloc(StoreObject::ContractProxy {
                    target: l,
                    env: ambient.clone(),
                    blame: blame.clone(),
                    contract: d.clone(),
                });
                Ok(Value::Location(proxy))
            }
            other => Err(Exn::type_error(format!(
                "cannot assert a delayed contract to {}",
                other
            ))),
        }
    }

    fn audit_store(&mut self, before: &[StoreObject], blame: &BlameId) {
        for (i, old) in before.iter().enumerate() {
            if self.store.get(Location(i)) != old {
                self.audit_failures.push(format!(
                    "predicate at {} modified pre-existing location {}",
                    blame, i
                ));
            }
        }
    }

    /// Return the value when the constraint store is not a blame state,
    /// otherwise raise a violation carrying every blamed label and party.
    pub fn check_blame(&mut self, v: Value) -> Behavior {
        match self.constraints.blame_state() {
            BlameState::Ok => {
                self.trace_rule("NoBlame", &v.to_string(), None);
                Ok(v)
            }
            BlameState::Violation(blamed) => {
                self.trace_rule("Blame", &v.to_string(), None);
                Err(Exn {
                    kind: ExnKind::ContractViolation(blamed),
                    message: String::new(),
                })
            }
        }
    }

    // -- application ---------------------------------------------------------

    pub fn apply(&mut self, callee: Location, arg: Value) -> Behavior {
        self.guarded(|m| m.apply_inner(callee, arg))
    }

    fn apply_inner(&mut self, callee: Location, arg: Value) -> Behavior {
        match self.store.get(callee).clone() {
            StoreObject::Native { closure: Some(cl), .. } => {
                self.trace_rule("App", &format!("<object:{}>({})", callee.0, arg), None);
                let env = cl.env.extend(cl.param.clone(), arg);
                self.eval(&env, &cl.body)
            }
            StoreObject::Native { closure: None, .. } => Err(Exn::type_error(format!(
                "<object:{}> is not a function",
                callee.0
            ))),
            StoreObject::SandboxProxy { target, env } => {
                match self.store.get(target).clone() {
                    StoreObject::Native { closure: Some(cl), .. } => {
                        self.trace_rule(
                            "App-Sandbox",
                            &format!("<object:{}>({})", callee.0, arg),
                            None,
                        );
                        // the function is re-evaluated inside the sandbox:
                        // its free variables resolve against the sandbox
                        // environment, not its original closure
                        let wrapped = self.wrap(&env, arg);
                        let call_env = env.extend(cl.param.clone(), wrapped);
                        self.eval(&call_env, &cl.body)
                    }
                    _ => Err(Exn::type_error(format!(
                        "<object:{}> is not a function",
                        target.0
                    ))),
                }
            }
            StoreObject::ContractProxy {
                target,
                env,
                blame,
                contract,
            } => self.apply_contracted(callee, target, &env, &blame, &contract, arg),
        }
    }

    fn apply_contracted(
        &mut self,
        proxy: Location,
        target: Location,
        env: &Env,
        blame: &BlameId,
        contract: &Rc<Del>,
        arg: Value,
    ) -> Behavior {
        let term = || format!("<object:{}>({})", proxy.0, arg);
        match &**contract {
            Del::Function {
                dom,
                rng,
                env: fenv,
            } => {
                let e = fenv.as_ref().unwrap_or(env).clone();
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "App-FunctionContract",
                    &term(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Function(i1, i2),
                    },
                );
                let checked = self.assert_canonical(arg, dom, &e, &BlameId::Internal(i1))?;
                let result = self.apply(target, checked)?;
                self.assert_canonical(result, rng, &e, &BlameId::Internal(i2))
            }
            Del::Dependent { abs, env: denv } => {
                self.trace_rule("App-DependentContract", &term(), None);
                let e = denv.as_ref().unwrap_or(env).clone();
                let result = self.apply(target, arg.clone())?;
                let ctor = Rc::new(CtorClosure {
                    env: e,
                    abs: abs.clone(),
                });
                let built = self.construct(&ctor, arg)?;
                match built {
                    Value::Contract(c) => self.assert_contract(result, &c, blame.clone()),
                    _ => unreachable!("construct checks for a contract result"),
                }
            }
            Del::Object { .. } => self.apply(target, arg),
            Del::Recursive { .. } => {
                let proxy = self.unroll_recursive(target, env, blame, contract)?;
                self.apply(proxy, arg)
            }
            Del::Intersection(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "App-IntersectionContract",
                    &term(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Intersection(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.apply(l, arg),
                    _ => unreachable!(),
                }
            }
            Del::Or(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "App-OrContract",
                    &term(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Or(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.apply(l, arg),
                    _ => unreachable!(),
                }
            }
            Del::Not(q) => {
                let i1 = self.fresh();
                self.add_constraint(
                    "App-NotContract",
                    &term(),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Neg(i1),
                    },
                );
                let p =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                match p {
                    Value::Location(l) => self.apply(l, arg),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// One unrolling step of a recursive contract: apply the constructor to
    /// the contract value itself and re-wrap the target with the result,
    /// reusing the original blame identifier.
    fn unroll_recursive(
        &mut self,
        target: Location,
        env: &Env,
        blame: &BlameId,
        contract: &Rc<Del>,
    ) -> Result<Location, Exn> {
        let (abs, e) = match &**contract {
            Del::Recursive { abs, env: renv } => {
                (abs.clone(), renv.as_ref().unwrap_or(env).clone())
            }
            _ => unreachable!("unroll_recursive on a non-recursive contract"),
        };
        let self_value = Value::Contract(Rc::new(ContractClosure {
            env: e.clone(),
            source: ContractExpr::Recursive(abs.clone()),
            canonical: Rc::new(Canonical::Del(contract.clone())),
        }));
        let ctor = Rc::new(CtorClosure {
            env: e,
            abs,
        });
        let built = self.construct(&ctor, self_value)?;
        let cl = match built {
            Value::Contract(cl) => cl,
            _ => unreachable!("construct checks for a contract result"),
        };
        match &*cl.canonical {
            Canonical::Del(d) => {
                let proxy = self.store.alloc(StoreObject::ContractProxy {
                    target,
                    env: cl.env.clone(),
                    blame: blame.clone(),
                    contract: d.clone(),
                });
                Ok(proxy)
            }
            _ => Err(Exn::type_error(
                "recursive contract constructor must return a delayed contract",
            )),
        }
    }

    // -- property read -------------------------------------------------------

    pub fn get(&mut self, obj: Location, name: &Rc<str>) -> Behavior {
        self.guarded(|m| m.get_inner(obj, name))
    }

    fn get_inner(&mut self, obj: Location, name: &Rc<str>) -> Behavior {
        match self.store.get(obj).clone() {
            StoreObject::Native { dict, proto, .. } => {
                if let Some(v) = dict.get(name) {
                    self.trace_rule("Get", &format!("<object:{}>[{}]", obj.0, name), None);
                    Ok(v.clone())
                } else {
                    match proto {
                        Value::Location(lp) => {
                            self.trace_rule(
                                "Get-Prototype",
                                &format!("<object:{}>[{}]", obj.0, name),
                                None,
                            );
                            self.get(lp, name)
                        }
                        _ => {
                            self.trace_rule(
                                "Get-Undefined",
                                &format!("<object:{}>[{}]", obj.0, name),
                                None,
                            );
                            Ok(Value::undefined())
                        }
                    }
                }
            }
            StoreObject::SandboxProxy { target, env } => {
                self.trace_rule("Get-Sandbox", &format!("<object:{}>[{}]", obj.0, name), None);
                let v = self.get(target, name)?;
                Ok(self.wrap(&env, v))
            }
            StoreObject::ContractProxy {
                target,
                env,
                blame,
                contract,
            } => self.get_contracted(obj, target, &env, &blame, &contract, name),
        }
    }

    fn get_contracted(
        &mut self,
        proxy: Location,
        target: Location,
        env: &Env,
        blame: &BlameId,
        contract: &Rc<Del>,
        name: &Rc<str>,
    ) -> Behavior {
        match &**contract {
            Del::Object { props, env: oenv } => {
                if let Some(prop) = props.get(name) {
                    self.trace_rule(
                        "Get-Contract",
                        &format!("<object:{}>[{}]", proxy.0, name),
                        None,
                    );
                    let e = oenv.as_ref().unwrap_or(env).clone();
                    let canonical = prop.canonical().map_err(normalize_exn)?;
                    let v = self.get(target, name)?;
                    self.assert_canonical(v, &canonical, &e, blame)
                } else {
                    self.trace_rule(
                        "Get-NoContract",
                        &format!("<object:{}>[{}]", proxy.0, name),
                        None,
                    );
                    self.get(target, name)
                }
            }
            Del::Function { .. } | Del::Dependent { .. } => self.get(target, name),
            Del::Recursive { .. } => {
                let p = self.unroll_recursive(target, env, blame, contract)?;
                self.get(p, name)
            }
            Del::Intersection(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Get-Contract",
                    &format!("<object:{}>[{}]", proxy.0, name),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Intersection(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.get(l, name),
                    _ => unreachable!(),
                }
            }
            Del::Or(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Get-Contract",
                    &format!("<object:{}>[{}]", proxy.0, name),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Or(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.get(l, name),
                    _ => unreachable!(),
                }
            }
            Del::Not(q) => {
                let i1 = self.fresh();
                self.add_constraint(
                    "Get-Contract",
                    &format!("<object:{}>[{}]", proxy.0, name),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Neg(i1),
                    },
                );
                let p =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                match p {
                    Value::Location(l) => self.get(l, name),
                    _ => unreachable!(),
                }
            }
        }
    }

    // -- property write ------------------------------------------------------

    pub fn put(&mut self, obj: Location, name: &Rc<str>, v: Value) -> Behavior {
        self.guarded(|m| m.put_inner(obj, name, v))
    }

    fn put_inner(&mut self, obj: Location, name: &Rc<str>, v: Value) -> Behavior {
        match self.store.get(obj).clone() {
            StoreObject::Native { .. } => {
                self.trace_rule("Put", &format!("<object:{}>[{}] = {}", obj.0, name, v), None);
                if let StoreObject::Native { dict, .. } = self.store.get_mut(obj) {
                    dict.insert(name.clone(), v.clone());
                }
                Ok(v)
            }
            StoreObject::SandboxProxy { .. } => {
                self.trace_rule(
                    "Put-Sandbox",
                    &format!("<object:{}>[{}] = {}", obj.0, name, v),
                    None,
                );
                Err(Exn::sandbox(format!(
                    "write to '{}' through the sandbox membrane",
                    name
                )))
            }
            StoreObject::ContractProxy {
                target,
                env,
                blame,
                contract,
            } => self.put_contracted(obj, target, &env, &blame, &contract, name, v),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn put_contracted(
        &mut self,
        proxy: Location,
        target: Location,
        env: &Env,
        blame: &BlameId,
        contract: &Rc<Del>,
        name: &Rc<str>,
        v: Value,
    ) -> Behavior {
        match &**contract {
            Del::Object { props, env: oenv } => {
                if let Some(prop) = props.get(name) {
                    let e = oenv.as_ref().unwrap_or(env).clone();
                    let canonical = prop.canonical().map_err(normalize_exn)?;
                    let i1 = self.fresh();
                    self.add_constraint(
                        "Put-Contract",
                        &format!("<object:{}>[{}] = {}", proxy.0, name, v),
                        Constraint {
                            target: blame.clone(),
                            form: ConstraintForm::Set(i1),
                        },
                    );
                    let checked =
                        self.assert_canonical(v.clone(), &canonical, &e, &BlameId::Internal(i1))?;
                    self.put(target, name, checked)?;
                    Ok(v)
                } else {
                    self.trace_rule(
                        "Put-NoContract",
                        &format!("<object:{}>[{}] = {}", proxy.0, name, v),
                        None,
                    );
                    self.put(target, name, v)
                }
            }
            Del::Function { .. } | Del::Dependent { .. } => self.put(target, name, v),
            Del::Recursive { .. } => {
                let p = self.unroll_recursive(target, env, blame, contract)?;
                self.put(p, name, v)
            }
            Del::Intersection(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Put-Contract",
                    &format!("<object:{}>[{}] = {}", proxy.0, name, v),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Intersection(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.put(l, name, v),
                    _ => unreachable!(),
                }
            }
            Del::Or(q, r) => {
                let (i1, i2) = (self.fresh(), self.fresh());
                self.add_constraint(
                    "Put-Contract",
                    &format!("<object:{}>[{}] = {}", proxy.0, name, v),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Or(i1, i2),
                    },
                );
                let p1 =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                let p2 = self.assert_delayed(p1, r, env, &BlameId::Internal(i2))?;
                match p2 {
                    Value::Location(l) => self.put(l, name, v),
                    _ => unreachable!(),
                }
            }
            Del::Not(q) => {
                let i1 = self.fresh();
                self.add_constraint(
                    "Put-Contract",
                    &format!("<object:{}>[{}] = {}", proxy.0, name, v),
                    Constraint {
                        target: blame.clone(),
                        form: ConstraintForm::Neg(i1),
                    },
                );
                let p =
                    self.assert_delayed(Value::Location(target), q, env, &BlameId::Internal(i1))?;
                match p {
                    Value::Location(l) => self.put(l, name, v),
                    _ => unreachable!(),
                }
            }
        }
    }

    // -- sandbox wrapping ----------------------------------------------------

    /// Import a value into a sandbox. Constants and contract values pass
    /// through; a native object gets at most one sandbox proxy per membrane;
    /// a contract proxy is rebuilt around its wrapped target.
    pub fn wrap(&mut self, env: &Env, v: Value) -> Value {
        debug_assert!(env.is_sandbox(), "wrap outside a sandbox environment");
        match v {
            Value::Constant(_) => {
                self.trace_rule("Wrap-Constant", &v.to_string(), None);
                v
            }
            Value::Contract(_) => {
                self.trace_rule("Wrap-Contract", &v.to_string(), None);
                v
            }
            Value::Ctor(_) => {
                self.trace_rule("Wrap-Constructor", &v.to_string(), None);
                v
            }
            Value::Location(l) => Value::Location(self.wrap_location(env, l)),
        }
    }

    fn wrap_location(&mut self, env: &Env, l: Location) -> Location {
        match self.store.get(l).clone() {
            StoreObject::SandboxProxy { .. } => {
                self.trace_rule("Wrap-Proxy", &format!("<object:{}>", l.0), None);
                l
            }
            StoreObject::ContractProxy {
                target,
                env: cenv,
                blame,
                contract,
            } => {
                self.trace_rule("Wrap-Contract", &format!("<object:{}>", l.0), None);
                let wrapped_target = self.wrap_location(env, target);
                self.store.alloc(StoreObject::ContractProxy {
                    target: wrapped_target,
                    env: cenv,
                    blame,
                    contract,
                })
            }
            StoreObject::Native { .. } => {
                let uid = env.sandbox_uid().unwrap_or(u64::MAX);
                if let Some(existing) = self.store.wrap_cache.get(&(l.0, uid)).copied() {
                    self.trace_rule("Wrap-Existing", &format!("<object:{}>", l.0), None);
                    return existing;
                }
                self.trace_rule("Wrap-NonProxyObject", &format!("<object:{}>", l.0), None);
                let proxy = self.store.alloc(StoreObject::SandboxProxy {
                    target: l,
                    env: env.clone(),
                });
                self.store.wrap_cache.insert((l.0, uid), proxy);
                proxy
            }
        }
    }
}

fn normalize_exn(e: NormalizeError) -> Exn {
    Exn {
        kind: ExnKind::TypeError,
        message: e.to_string(),
    }
}

/// Convenience entry point: evaluate a program in a fresh machine.
pub fn run_program(program: &Expression, config: MachineConfig) -> (Machine, Behavior) {
    let mut machine = Machine::new(config);
    let outcome = machine.run(program);
    (machine, outcome)
}
