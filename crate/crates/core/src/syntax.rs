//! Abstract syntax: expressions, contract expressions, blame identifiers,
//! and the immediate/delayed classification of contracts.

use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::interp::ContractClosure;

pub type Symbol = Rc<str>;

/// Primitive constants: numbers, strings, booleans, `undefined`, `null`.
#[derive(Debug, Clone)]
pub enum Constant {
    Number(f64),
    Str(Rc<str>),
    Bool(bool),
    Undefined,
    Null,
}

impl PartialEq for Constant {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            // structural equality; NaN equals NaN here (strict equality in
            // the interpreter's delta is defined separately)
            (Constant::Number(a), Constant::Number(b)) => a.to_bits() == b.to_bits(),
            (Constant::Str(a), Constant::Str(b)) => a == b,
            (Constant::Bool(a), Constant::Bool(b)) => a == b,
            (Constant::Undefined, Constant::Undefined) => true,
            (Constant::Null, Constant::Null) => true,
            _ => false,
        }
    }
}

impl Constant {
    /// Truthiness: false, undefined, null, NaN and the empty string count as
    /// false; everything else (including 0) counts as true.
    pub fn is_truthy(&self) -> bool {
        match self {
            Constant::Bool(b) => *b,
            Constant::Undefined | Constant::Null => false,
            Constant::Number(n) => !n.is_nan(),
            Constant::Str(s) => !s.is_empty(),
        }
    }

    /// Coercion to a property name; numbers use their decimal rendering.
    pub fn to_property_name(&self) -> Rc<str> {
        match self {
            Constant::Str(s) => s.clone(),
            Constant::Number(n) => Rc::from(format_number(*n).as_str()),
            Constant::Bool(b) => Rc::from(if *b { "true" } else { "false" }),
            Constant::Undefined => Rc::from("undefined"),
            Constant::Null => Rc::from("null"),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Constant::Number(_) => "number",
            Constant::Str(_) => "string",
            Constant::Bool(_) => "boolean",
            Constant::Undefined => "undefined",
            // JavaScript's typeof null
            Constant::Null => "object",
        }
    }
}

pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        "NaN".to_string()
    } else {
        format!("{}", n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Gt,
    StrictEq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    TypeOf,
    Not,
}

/// Source-level assertion label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label(pub Rc<str>);

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(Constant),
    Var(Symbol),
    /// A contract literal.
    Contract(ContractExpr),
    /// A contract abstraction literal.
    Ctor(Rc<Abstraction>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Unary(UnOp, Box<Expression>),
    Lambda(Symbol, Rc<Expression>),
    App(Box<Expression>, Box<Expression>),
    New(Box<Expression>),
    Get(Box<Expression>, Box<Expression>),
    Put(Box<Expression>, Box<Expression>, Box<Expression>),
    /// `assert(e, f)` with its source label.
    Assert(Box<Expression>, Label, Box<Expression>),
}

/// A contract abstraction: one parameter, a body that must evaluate to a
/// contract value when the abstraction is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub param: Symbol,
    pub body: Expression,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContractExpr {
    /// Flat contract: a one-parameter predicate.
    Base { param: Symbol, body: Rc<Expression> },
    Function(Box<ContractExpr>, Box<ContractExpr>),
    Dependent(Rc<Abstraction>),
    /// Mapping from property names to contracts. Duplicate keys are rejected
    /// by normalization.
    Object(Vec<(Rc<str>, ContractExpr)>),
    Intersection(Box<ContractExpr>, Box<ContractExpr>),
    Union(Box<ContractExpr>, Box<ContractExpr>),
    And(Box<ContractExpr>, Box<ContractExpr>),
    Or(Box<ContractExpr>, Box<ContractExpr>),
    Not(Box<ContractExpr>),
    /// Self-referential contract; the abstraction is applied to the contract
    /// value itself when the contract is used.
    Recursive(Rc<Abstraction>),
    /// An expression in contract position, resolved when the enclosing
    /// literal is evaluated to a contract value.
    Splice(Rc<Expression>),
    /// A resolved contract value carrying its own sandbox environment.
    Embedded(Rc<ContractClosure>),
}

/// Blame identifiers: source labels from the program text or generated
/// internal variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlameId {
    Label(Rc<str>),
    Internal(u64),
}

impl fmt::Display for BlameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlameId::Label(s) => f.write_str(s),
            BlameId::Internal(n) => write!(f, "\u{03b9}{}", n),
        }
    }
}

/// Generator for internal blame variables; ids are never reused within a run.
#[derive(Debug, Default)]
pub struct InternalIdGen {
    next: AtomicU64,
}

impl InternalIdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh_raw(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    pub fn fresh(&self) -> BlameId {
        BlameId::Internal(self.fresh_raw())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Immediate,
    Delayed,
    Composite,
}

/// Classify a contract expression: base contracts (and negations of
/// immediates) may be checked right away; function, dependent, object and
/// recursive contracts, intersections/disjunctions of two delayed contracts
/// and negations of delayed contracts are checked at use sites; everything
/// else is a composite that normalization takes apart.
pub fn classify(c: &ContractExpr) -> Classification {
    use Classification::*;
    match c {
        ContractExpr::Base { .. } => Immediate,
        ContractExpr::Function(..)
        | ContractExpr::Dependent(_)
        | ContractExpr::Object(_)
        | ContractExpr::Recursive(_) => Delayed,
        ContractExpr::Not(inner) => match classify(inner) {
            Immediate => Immediate,
            Delayed => Delayed,
            Composite => Composite,
        },
        ContractExpr::Intersection(a, b) | ContractExpr::Or(a, b) => {
            if classify(a) == Delayed && classify(b) == Delayed {
                Delayed
            } else {
                Composite
            }
        }
        ContractExpr::Union(..) | ContractExpr::And(..) => Composite,
        ContractExpr::Splice(_) => Composite,
        ContractExpr::Embedded(cl) => crate::canon::canonical_class(&cl.canonical),
    }
}

/// Remove every assertion node, keeping the asserted subject expression.
pub fn strip_assertions(e: &Expression) -> Expression {
    match e {
        Expression::Const(_) | Expression::Var(_) | Expression::Contract(_) | Expression::Ctor(_) => {
            e.clone()
        }
        Expression::Binary(op, a, b) => Expression::Binary(
            *op,
            Box::new(strip_assertions(a)),
            Box::new(strip_assertions(b)),
        ),
        Expression::Unary(op, a) => Expression::Unary(*op, Box::new(strip_assertions(a))),
        Expression::Lambda(x, body) => Expression::Lambda(x.clone(), Rc::new(strip_assertions(body))),
        Expression::App(a, b) => {
            Expression::App(Box::new(strip_assertions(a)), Box::new(strip_assertions(b)))
        }
        Expression::New(a) => Expression::New(Box::new(strip_assertions(a))),
        Expression::Get(a, b) => {
            Expression::Get(Box::new(strip_assertions(a)), Box::new(strip_assertions(b)))
        }
        Expression::Put(a, b, c) => Expression::Put(
            Box::new(strip_assertions(a)),
            Box::new(strip_assertions(b)),
            Box::new(strip_assertions(c)),
        ),
        Expression::Assert(subject, _, _) => strip_assertions(subject),
    }
}

// ---------------------------------------------------------------------------
// Pretty-printing. The output is stable and re-parseable.
// ---------------------------------------------------------------------------

fn escape_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for ch in s.chars() {
        match ch {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Number(n) => f.write_str(&format_number(*n)),
            Constant::Str(s) => write!(f, "'{}'", escape_str(s)),
            Constant::Bool(b) => write!(f, "{}", b),
            Constant::Undefined => f.write_str("undefined"),
            Constant::Null => f.write_str("null"),
        }
    }
}

impl Expression {
    fn is_atomic(&self) -> bool {
        matches!(
            self,
            Expression::Const(_) | Expression::Var(_) | Expression::Contract(_)
        )
    }

    fn fmt_callee(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // callees and indexed targets keep postfix chains unparenthesized
        match self {
            Expression::Var(_) | Expression::App(..) | Expression::Get(..) => write!(f, "{}", self),
            _ => write!(f, "({})", self),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Const(c) => write!(f, "{}", c),
            Expression::Var(x) => f.write_str(x),
            Expression::Contract(c) => write!(f, "{}", c),
            Expression::Ctor(a) => write!(f, "Constructor(fun({}){{ {} }})", a.param, a.body),
            Expression::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Lt => "<",
                    BinOp::Gt => ">",
                    BinOp::StrictEq => "===",
                };
                write!(f, "({} {} {})", a, sym, b)
            }
            Expression::Unary(UnOp::TypeOf, a) => {
                if a.is_atomic() {
                    write!(f, "typeof {}", a)
                } else {
                    write!(f, "typeof ({})", a)
                }
            }
            Expression::Unary(UnOp::Not, a) => {
                if a.is_atomic() {
                    write!(f, "!{}", a)
                } else {
                    write!(f, "!({})", a)
                }
            }
            Expression::Lambda(x, body) => write!(f, "fun({}){{ {} }}", x, body),
            Expression::App(e, arg) => {
                e.fmt_callee(f)?;
                write!(f, "({})", arg)
            }
            Expression::New(e) => {
                if e.is_atomic() {
                    write!(f, "new {}", e)
                } else {
                    write!(f, "new ({})", e)
                }
            }
            Expression::Get(e, name) => {
                e.fmt_callee(f)?;
                write!(f, "[{}]", name)
            }
            Expression::Put(e, name, v) => {
                e.fmt_callee(f)?;
                write!(f, "[{}] = {}", name, v)
            }
            Expression::Assert(e, label, c) => {
                write!(f, "assert:'{}'({}, {})", escape_str(&label.0), e, c)
            }
        }
    }
}

impl fmt::Display for ContractExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractExpr::Base { param, body } => write!(f, "Base(fun({}){{ {} }})", param, body),
            ContractExpr::Function(c, d) => write!(f, "Function({}, {})", c, d),
            ContractExpr::Dependent(a) => {
                write!(f, "Dependent(fun({}){{ {} }})", a.param, a.body)
            }
            ContractExpr::Object(props) => {
                f.write_str("Object({")?;
                for (i, (k, c)) in props.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "'{}': {}", escape_str(k), c)?;
                }
                f.write_str("})")
            }
            ContractExpr::Intersection(a, b) => write!(f, "Intersection({}, {})", a, b),
            ContractExpr::Union(a, b) => write!(f, "Union({}, {})", a, b),
            ContractExpr::And(a, b) => write!(f, "And({}, {})", a, b),
            ContractExpr::Or(a, b) => write!(f, "Or({}, {})", a, b),
            ContractExpr::Not(a) => write!(f, "Not({})", a),
            ContractExpr::Recursive(a) => write!(f, "Recursive(fun({}){{ {} }})", a.param, a.body),
            ContractExpr::Splice(e) => write!(f, "{}", e),
            ContractExpr::Embedded(cl) => write!(f, "{}", cl.source),
        }
    }
}
