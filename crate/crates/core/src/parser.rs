//! Concrete syntax for `.ljc` programs.
//!
//! A program is a sequence of `let` bindings and expression statements
//! followed by a final expression. Convenience forms desugar into the core:
//! `let` becomes application of a lambda, `With` becomes a constructor
//! applied to an explicitly built binding object, `AFunction` becomes a
//! function contract over an argument-object contract, and a bare expression
//! in contract position becomes a splice resolved at contract evaluation.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::syntax::{
    Abstraction, BinOp, Constant, ContractExpr, Expression, Label, Symbol, UnOp,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number {}", n),
            Tok::Str(s) => write!(f, "string '{}'", s),
            Tok::Ident(s) => write!(f, "'{}'", s),
            Tok::Punct(p) => write!(f, "'{}'", p),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const RESERVED: &[&str] = &[
    "fun", "new", "let", "return", "assert", "typeof", "true", "false", "undefined", "null",
    "Base", "Function", "Dependent", "Object", "Intersection", "Union", "And", "Or", "Not",
    "Constructor", "With", "AFunction", "Recursive",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                b'0'..=b'9' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(b'0'..=b'9')) {
                        self.bump();
                    }
                    if self.peek() == Some(b'.')
                        && matches!(self.src.get(self.pos + 1), Some(b'0'..=b'9'))
                    {
                        self.bump();
                        while matches!(self.peek(), Some(b'0'..=b'9')) {
                            self.bump();
                        }
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    Tok::Num(text.parse().map_err(|_| self.error("bad number literal"))?)
                }
                b'\'' => {
                    self.bump();
                    let mut bytes: Vec<u8> = Vec::new();
                    loop {
                        match self.bump() {
                            None | Some(b'\n') => {
                                return Err(self.error("unterminated string literal"))
                            }
                            Some(b'\'') => break,
                            Some(b'\\') => match self.bump() {
                                Some(b'\'') => bytes.push(b'\''),
                                Some(b'\\') => bytes.push(b'\\'),
                                Some(b'n') => bytes.push(b'\n'),
                                _ => return Err(self.error("unknown escape sequence")),
                            },
                            Some(other) => bytes.push(other),
                        }
                    }
                    let s = String::from_utf8(bytes)
                        .map_err(|_| self.error("string literal is not valid utf-8"))?;
                    Tok::Str(s)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    Tok::Ident(
                        std::str::from_utf8(&self.src[start..self.pos])
                            .unwrap()
                            .to_string(),
                    )
                }
                b'=' => {
                    if self.src[self.pos..].starts_with(b"===") {
                        self.bump();
                        self.bump();
                        self.bump();
                        Tok::Punct("===")
                    } else if self.src[self.pos..].starts_with(b"==") {
                        return Err(self.error("'==' is not an operator; use '==='"));
                    } else {
                        self.bump();
                        Tok::Punct("=")
                    }
                }
                _ => {
                    let punct = match c {
                        b'(' => "(",
                        b')' => ")",
                        b'{' => "{",
                        b'}' => "}",
                        b'[' => "[",
                        b']' => "]",
                        b',' => ",",
                        b';' => ";",
                        b':' => ":",
                        b'+' => "+",
                        b'-' => "-",
                        b'*' => "*",
                        b'<' => "<",
                        b'>' => ">",
                        b'!' => "!",
                        _ => return Err(self.error(format!("unexpected character '{}'", c as char))),
                    };
                    self.bump();
                    Tok::Punct(punct)
                }
            };
            out.push(Token { tok, line, col });
        }
    }
}

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    gensym: u64,
}

/// Parse a source file into a core expression.
pub fn parse_program(src: &str) -> Result<Expression, ParseError> {
    let tokens = Lexer::new(src).tokenize()?;
    let mut p = Parser {
        tokens,
        pos: 0,
        gensym: 0,
    };
    let e = p.parse_body(&[Tok::Eof])?;
    p.expect_eof()?;
    Ok(e)
}

impl Parser {
    fn here(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.here().tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.here().tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{}', found {}", p, self.peek())))
        }
    }

    fn at_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_ident(&mut self, kw: &str) -> bool {
        if self.at_ident(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected end of input, found {}", self.peek())))
        }
    }

    fn expect_name(&mut self) -> Result<Symbol, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(Rc::from(s.as_str()))
            }
            Tok::Ident(s) => Err(self.error_here(format!("'{}' is a reserved word", s))),
            other => Err(self.error_here(format!("expected an identifier, found {}", other))),
        }
    }

    fn fresh_var(&mut self, hint: &str) -> Symbol {
        self.gensym += 1;
        // lexable, so printed programs stay re-parseable
        Rc::from(format!("_{}{}", hint, self.gensym).as_str())
    }

    /// Statement sequence ending in an expression. `terminators` are the
    /// tokens that may legally follow the final expression.
    fn parse_body(&mut self, terminators: &[Tok]) -> Result<Expression, ParseError> {
        if self.eat_ident("let") {
            let name = self.expect_name()?;
            self.expect_punct("=")?;
            let value = self.parse_expr()?;
            self.expect_punct(";")?;
            let rest = self.parse_body(terminators)?;
            // let x = e; body  ==>  (fun(x){ body })(e)
            return Ok(Expression::App(
                Box::new(Expression::Lambda(name, Rc::new(rest))),
                Box::new(value),
            ));
        }
        if self.eat_ident("return") {
            let e = self.parse_expr()?;
            self.eat_punct(";");
            return Ok(e);
        }
        let e = self.parse_expr()?;
        if self.eat_punct(";") {
            if terminators.iter().any(|t| t == self.peek()) {
                // trailing semicolon: the statement's value is the result
                return Ok(e);
            }
            let rest = self.parse_body(terminators)?;
            // e; body  ==>  (fun(_){ body })(e)
            let ignored = self.fresh_var("seq");
            return Ok(Expression::App(
                Box::new(Expression::Lambda(ignored, Rc::new(rest))),
                Box::new(e),
            ));
        }
        Ok(e)
    }

    fn parse_expr(&mut self) -> Result<Expression, ParseError> {
        self.parse_equality()
    }

    fn parse_equality(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_relational()?;
        while self.eat_punct("===") {
            let rhs = self.parse_relational()?;
            lhs = Expression::Binary(BinOp::StrictEq, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_relational(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_additive()?;
        loop {
            let op = if self.eat_punct("<") {
                BinOp::Lt
            } else if self.eat_punct(">") {
                BinOp::Gt
            } else {
                break;
            };
            let rhs = self.parse_additive()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_additive(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOp::Add
            } else if self.eat_punct("-") {
                BinOp::Sub
            } else {
                break;
            };
            let rhs = self.parse_multiplicative()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_multiplicative(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_unary()?;
        while self.eat_punct("*") {
            let rhs = self.parse_unary()?;
            lhs = Expression::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expression, ParseError> {
        if self.eat_ident("typeof") {
            let e = self.parse_unary()?;
            return Ok(Expression::Unary(UnOp::TypeOf, Box::new(e)));
        }
        if self.eat_punct("!") {
            let e = self.parse_unary()?;
            return Ok(Expression::Unary(UnOp::Not, Box::new(e)));
        }
        if self.eat_ident("new") {
            let e = self.parse_unary()?;
            return Ok(Expression::New(Box::new(e)));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expression, ParseError> {
        let mut e = self.parse_primary()?;
        loop {
            if self.eat_punct("(") {
                let arg = self.parse_expr()?;
                self.expect_punct(")")?;
                e = Expression::App(Box::new(e), Box::new(arg));
            } else if self.eat_punct("[") {
                let idx = self.parse_expr()?;
                self.expect_punct("]")?;
                if self.eat_punct("=") {
                    let v = self.parse_expr()?;
                    return Ok(Expression::Put(Box::new(e), Box::new(idx), Box::new(v)));
                }
                e = Expression::Get(Box::new(e), Box::new(idx));
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expression, ParseError> {
        let (line, col) = (self.here().line, self.here().col);
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expression::Const(Constant::Number(n)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expression::Const(Constant::Str(Rc::from(s.as_str()))))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_body(&[Tok::Punct(")")])?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expression::Const(Constant::Bool(true)))
                }
                "false" => {
                    self.bump();
                    Ok(Expression::Const(Constant::Bool(false)))
                }
                "undefined" => {
                    self.bump();
                    Ok(Expression::Const(Constant::Undefined))
                }
                "null" => {
                    self.bump();
                    Ok(Expression::Const(Constant::Null))
                }
                "fun" => {
                    let (param, body) = self.parse_fun_literal()?;
                    Ok(Expression::Lambda(param, Rc::new(body)))
                }
                "assert" => {
                    self.bump();
                    let label = if self.eat_punct(":") {
                        match self.bump() {
                            Tok::Str(s) => s,
                            other => {
                                return Err(self.error_here(format!(
                                    "expected a string label after ':', found {}",
                                    other
                                )))
                            }
                        }
                    } else {
                        format!("assert@{}:{}", line, col)
                    };
                    self.expect_punct("(")?;
                    let subject = self.parse_expr()?;
                    self.expect_punct(",")?;
                    let contract = self.parse_contract_argument()?;
                    self.expect_punct(")")?;
                    Ok(Expression::Assert(
                        Box::new(subject),
                        Label(Rc::from(label.as_str())),
                        Box::new(contract),
                    ))
                }
                "Constructor" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let abs = self.parse_abstraction()?;
                    self.expect_punct(")")?;
                    Ok(Expression::Ctor(Rc::new(abs)))
                }
                "With" => {
                    self.bump();
                    Ok(self.parse_with_form()?)
                }
                "Base" | "Function" | "Dependent" | "Object" | "Intersection" | "Union"
                | "And" | "Or" | "Not" | "AFunction" | "Recursive" => {
                    let c = self.parse_contract()?;
                    Ok(Expression::Contract(c))
                }
                "let" | "return" => Err(self.error_here(format!(
                    "'{}' is only allowed in statement position",
                    word
                ))),
                _ => {
                    let name = self.expect_name()?;
                    Ok(Expression::Var(name))
                }
            },
            other => Err(self.error_here(format!("expected an expression, found {}", other))),
        }
    }

    fn parse_fun_literal(&mut self) -> Result<(Symbol, Expression), ParseError> {
        if !self.eat_ident("fun") {
            return Err(self.error_here(format!("expected 'fun', found {}", self.peek())));
        }
        self.expect_punct("(")?;
        let param = if matches!(self.peek(), Tok::Punct(")")) {
            self.fresh_var("unused")
        } else {
            self.expect_name()?
        };
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let body = self.parse_body(&[Tok::Punct("}")])?;
        self.expect_punct("}")?;
        Ok((param, body))
    }

    fn parse_abstraction(&mut self) -> Result<Abstraction, ParseError> {
        let (param, body) = self.parse_fun_literal()?;
        Ok(Abstraction { param, body })
    }

    /// Contract position: combinator keywords build contract syntax, any
    /// other expression becomes a splice resolved at contract evaluation.
    fn parse_contract(&mut self) -> Result<ContractExpr, ParseError> {
        if self.at_ident("Base") {
            self.bump();
            self.expect_punct("(")?;
            let (param, body) = self.parse_fun_literal()?;
            self.expect_punct(")")?;
            return Ok(ContractExpr::Base {
                param,
                body: Rc::new(body),
            });
        }
        if self.at_ident("Function") {
            self.bump();
            let (a, b) = self.parse_contract_pair()?;
            return Ok(ContractExpr::Function(Box::new(a), Box::new(b)));
        }
        if self.at_ident("Dependent") {
            self.bump();
            self.expect_punct("(")?;
            let abs = if self.at_ident("Constructor") {
                self.bump();
                self.expect_punct("(")?;
                let abs = self.parse_abstraction()?;
                self.expect_punct(")")?;
                abs
            } else {
                self.parse_abstraction()?
            };
            self.expect_punct(")")?;
            return Ok(ContractExpr::Dependent(Rc::new(abs)));
        }
        if self.at_ident("Object") {
            self.bump();
            self.expect_punct("(")?;
            self.expect_punct("{")?;
            let mut props = Vec::new();
            if !matches!(self.peek(), Tok::Punct("}")) {
                loop {
                    let key = self.parse_property_key()?;
                    self.expect_punct(":")?;
                    let c = self.parse_contract()?;
                    props.push((key, c));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct("}")?;
            self.expect_punct(")")?;
            return Ok(ContractExpr::Object(props));
        }
        if self.at_ident("Intersection") {
            self.bump();
            let (a, b) = self.parse_contract_pair()?;
            return Ok(ContractExpr::Intersection(Box::new(a), Box::new(b)));
        }
        if self.at_ident("Union") {
            self.bump();
            let (a, b) = self.parse_contract_pair()?;
            return Ok(ContractExpr::Union(Box::new(a), Box::new(b)));
        }
        if self.at_ident("And") {
            self.bump();
            let (a, b) = self.parse_contract_pair()?;
            return Ok(ContractExpr::And(Box::new(a), Box::new(b)));
        }
        if self.at_ident("Or") {
            self.bump();
            let (a, b) = self.parse_contract_pair()?;
            return Ok(ContractExpr::Or(Box::new(a), Box::new(b)));
        }
        if self.at_ident("Not") {
            self.bump();
            self.expect_punct("(")?;
            let c = self.parse_contract()?;
            self.expect_punct(")")?;
            return Ok(ContractExpr::Not(Box::new(c)));
        }
        if self.at_ident("AFunction") {
            self.bump();
            self.expect_punct("(")?;
            self.expect_punct("[")?;
            let mut domains = Vec::new();
            if !matches!(self.peek(), Tok::Punct("]")) {
                loop {
                    domains.push(self.parse_contract()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct("]")?;
            self.expect_punct(",")?;
            let range = self.parse_contract()?;
            self.expect_punct(")")?;
            return Ok(desugar_afunction(domains, range));
        }
        if self.at_ident("Recursive") {
            self.bump();
            self.expect_punct("(")?;
            let abs = if self.at_ident("Constructor") {
                self.bump();
                self.expect_punct("(")?;
                let abs = self.parse_abstraction()?;
                self.expect_punct(")")?;
                abs
            } else {
                self.parse_abstraction()?
            };
            self.expect_punct(")")?;
            return Ok(ContractExpr::Recursive(Rc::new(abs)));
        }
        if self.at_ident("With") {
            self.bump();
            let app = self.parse_with_form()?;
            return Ok(ContractExpr::Splice(Rc::new(app)));
        }
        // anything else is an expression that must evaluate to a contract
        let e = self.parse_expr()?;
        Ok(ContractExpr::Splice(Rc::new(e)))
    }

    fn parse_contract_pair(&mut self) -> Result<(ContractExpr, ContractExpr), ParseError> {
        self.expect_punct("(")?;
        let a = self.parse_contract()?;
        self.expect_punct(",")?;
        let b = self.parse_contract()?;
        self.expect_punct(")")?;
        Ok((a, b))
    }

    /// Contract argument of `assert(e, C)`: contract forms become literal
    /// expressions, anything else is an ordinary expression evaluated to a
    /// contract value.
    fn parse_contract_argument(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            Tok::Ident(w)
                if matches!(
                    w.as_str(),
                    "Base"
                        | "Function"
                        | "Dependent"
                        | "Object"
                        | "Intersection"
                        | "Union"
                        | "And"
                        | "Or"
                        | "Not"
                        | "AFunction"
                        | "Recursive"
                ) =>
            {
                let c = self.parse_contract()?;
                Ok(Expression::Contract(c))
            }
            _ => self.parse_expr(),
        }
    }

    fn parse_property_key(&mut self) -> Result<Rc<str>, ParseError> {
        match self.bump() {
            Tok::Str(s) => Ok(Rc::from(s.as_str())),
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => Ok(Rc::from(s.as_str())),
            other => Err(self.error_here(format!("expected a property key, found {}", other))),
        }
    }

    /// `With({x: e, ...}, C)` — desugared into a constructor applied to an
    /// explicitly built binding object; the constructor body rebinds each
    /// name from the (membrane-wrapped) object and evaluates to `C`.
    fn parse_with_form(&mut self) -> Result<Expression, ParseError> {
        self.expect_punct("(")?;
        self.expect_punct("{")?;
        let mut bindings: Vec<(Rc<str>, Expression)> = Vec::new();
        if !matches!(self.peek(), Tok::Punct("}")) {
            loop {
                let key = self.parse_property_key()?;
                if bindings.iter().any(|(k, _)| *k == key) {
                    return Err(self.error_here(format!("duplicate binding '{}'", key)));
                }
                self.expect_punct(":")?;
                let value = self.parse_expr()?;
                bindings.push((key, value));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("}")?;
        self.expect_punct(",")?;
        let contract = self.parse_contract()?;
        self.expect_punct(")")?;
        Ok(desugar_with(self, bindings, contract))
    }
}

/// Build the expression form of a `With` contract. The binding object is
/// constructed in the program scope; inside the constructor each binding is
/// projected out of the wrapped object, so the contract's predicates can
/// read the values while writes stay sandbox violations.
fn desugar_with(
    p: &mut Parser,
    bindings: Vec<(Rc<str>, Expression)>,
    contract: ContractExpr,
) -> Expression {
    let bag = p.fresh_var("with");

    // innermost body: the contract literal under all bindings
    let mut body = Expression::Contract(contract);
    for (name, _) in bindings.iter().rev() {
        // (fun(name){ body })(bag[name])
        body = Expression::App(
            Box::new(Expression::Lambda(name.clone(), Rc::new(body))),
            Box::new(Expression::Get(
                Box::new(Expression::Var(bag.clone())),
                Box::new(Expression::Const(Constant::Str(name.clone()))),
            )),
        );
    }
    let ctor = Expression::Ctor(Rc::new(Abstraction {
        param: bag,
        body,
    }));

    // binding object, built before the membrane: let o = new undefined; o[k] = e; ...; o
    let obj = p.fresh_var("bind");
    let mut build = Expression::Var(obj.clone());
    for (name, value) in bindings.into_iter().rev() {
        let put = Expression::Put(
            Box::new(Expression::Var(obj.clone())),
            Box::new(Expression::Const(Constant::Str(name))),
            Box::new(value),
        );
        let ignored = p.fresh_var("seq");
        build = Expression::App(
            Box::new(Expression::Lambda(ignored, Rc::new(build))),
            Box::new(put),
        );
    }
    let obj_expr = Expression::App(
        Box::new(Expression::Lambda(obj, Rc::new(build))),
        Box::new(Expression::New(Box::new(Expression::Const(
            Constant::Undefined,
        )))),
    );

    Expression::App(Box::new(ctor), Box::new(obj_expr))
}

/// `AFunction([C0, ..., Cn-1], D)` — a function contract whose single
/// argument is an object carrying properties "0" ... "n-1".
pub fn desugar_afunction(domains: Vec<ContractExpr>, range: ContractExpr) -> ContractExpr {
    let props = domains
        .into_iter()
        .enumerate()
        .map(|(i, c)| (Rc::from(i.to_string().as_str()), c))
        .collect();
    ContractExpr::Function(
        Box::new(ContractExpr::Object(props)),
        Box::new(range),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parses(src: &str) -> Expression {
        parse_program(src).unwrap_or_else(|e| panic!("parse of {:?} failed: {}", src, e))
    }

    #[test]
    fn base_contract_assertion() {
        let e = parses("assert(1, Base(fun(x){ typeof x === 'number' }))");
        match e {
            Expression::Assert(subject, label, contract) => {
                assert_eq!(*subject, Expression::Const(Constant::Number(1.0)));
                assert_eq!(&*label.0, "assert@1:1");
                assert!(matches!(*contract, Expression::Contract(ContractExpr::Base { .. })));
            }
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn explicit_labels() {
        let e = parses("assert:'mine'(1, Base(fun(x){ true }))");
        match e {
            Expression::Assert(_, label, _) => assert_eq!(&*label.0, "mine"),
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn let_desugars_to_application() {
        let e = parses("let y = 1; y");
        match e {
            Expression::App(f, arg) => {
                assert!(matches!(*f, Expression::Lambda(..)));
                assert_eq!(*arg, Expression::Const(Constant::Number(1.0)));
            }
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn lambda_with_string_append_body() {
        let e = parses("fun(x){ x + '1' }");
        match e {
            Expression::Lambda(param, body) => {
                assert_eq!(&*param, "x");
                assert!(matches!(&*body, Expression::Binary(BinOp::Add, ..)));
            }
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn afunction_builds_argument_object_contract() {
        let e = parses("assert(f, AFunction([Base(fun(x){ true })], Base(fun(x){ true })))");
        match e {
            Expression::Assert(_, _, contract) => match *contract {
                Expression::Contract(ContractExpr::Function(dom, _)) => match *dom {
                    ContractExpr::Object(props) => {
                        assert_eq!(props.len(), 1);
                        assert_eq!(&*props[0].0, "0");
                    }
                    other => panic!("expected object domain, got {:?}", other),
                },
                other => panic!("expected function contract, got {:?}", other),
            },
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn ident_in_contract_position_becomes_splice() {
        let e = parses("assert(f, Function(tn, tb))");
        match e {
            Expression::Assert(_, _, contract) => match *contract {
                Expression::Contract(ContractExpr::Function(dom, rng)) => {
                    assert!(matches!(*dom, ContractExpr::Splice(_)));
                    assert!(matches!(*rng, ContractExpr::Splice(_)));
                }
                other => panic!("expected function contract, got {:?}", other),
            },
            other => panic!("unexpected AST: {:?}", other),
        }
    }

    #[test]
    fn with_duplicate_bindings_rejected() {
        let err = parse_program("assert(1, With({t: 1, t: 2}, Base(fun(x){ true })))")
            .unwrap_err();
        assert!(err.message.contains("duplicate binding"));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_program("assert(1,\n  )").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn sequencing_desugars() {
        let e = parses("let o = new undefined; o['a'] = 1; o['a']");
        // shape: ((fun(o){ (fun(#seq){ o['a'] })(o['a'] = 1) })(new undefined))
        assert!(matches!(e, Expression::App(..)));
    }

    #[test]
    fn strings_keep_multibyte_characters() {
        let e = parses("'\u{3b9}-id \\'quoted\\' \\n'");
        match e {
            Expression::Const(Constant::Str(s)) => {
                assert_eq!(&*s, "\u{3b9}-id 'quoted' \n")
            }
            other => panic!("unexpected AST: {:?}", other),
        }
        // and the printed form round-trips
        let printed = parses("'\u{3b9}'").to_string();
        assert_eq!(parses(&printed), parses("'\u{3b9}'"));
    }

    #[test]
    fn round_trip_on_printed_form() {
        let sources = [
            "assert(1, Base(fun(x){ typeof x === 'number' }))",
            "fun(x){ x + '1' }",
            "let y = 1; y",
            "new undefined",
            "(fun(o){ o['k'] = 2 })(new undefined)",
            "assert(f, Intersection(Function(Base(fun(x){ true }), Base(fun(x){ true })), g))",
            "assert:'l'(1, Not(Base(fun(x){ x === undefined })))",
            "typeof 1",
            "!(1 < 2)",
        ];
        for src in sources {
            let once = parses(src);
            let again = parses(&once.to_string());
            assert_eq!(once, again, "round trip failed for {}", src);
        }
    }
}
