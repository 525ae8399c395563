//! Model expressions: the right-hand sides of the proportionality relations
//! that drive the optimizer.
//!
//! An expression is plain real arithmetic over named values: numbers
//! (decimal or scientific), `+ - * /`, right-associative `^`, parentheses,
//! and the functions `sqrt(..)` and `abs(..)`. Names refer either to design
//! variables or to parameters; which kind a name is gets decided when the
//! expression is bound against a problem's declarations. Values are
//! unit-blind reals, so a formulation must keep each symbol in one consistent
//! unit.
//!
//! ```
//! use anmod::expression::{Environment, ModelExpression};
//! use std::collections::BTreeMap;
//!
//! let model: ModelExpression = "1 / l_res".parse().unwrap();
//! let design = BTreeMap::from([("l_res".to_string(), 7500.0)]);
//! let params = BTreeMap::new();
//! let value = model.evaluate(&Environment::new(&design, &params)).unwrap();
//! assert_eq!(value, 1.0 / 7500.0);
//! ```

mod parser;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

/// Which declaration a name resolved to. Assigned by [`ModelExpression::bind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    DesignVariable,
    Parameter,
}

/// A named reference inside an expression. `kind` is `None` until bound.
#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub kind: Option<RefKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
}

/// Expression tree. Binary precedence and associativity live in the parser
/// and the printer; the tree itself is unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ref(VarRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset} (supported: sqrt, abs)")]
    UnknownFunction { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value")]
    SqrtOfNegative,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("reference to undeclared name `{0}`")]
    UndeclaredName(String),
    #[error("model for `{0}` refers to itself")]
    SelfReference(String),
}

/// Name-to-value lookup split by declaration kind. Bound references go
/// straight to their map; unbound references try design variables first,
/// then parameters (a valid formulation never declares a name in both).
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    design: &'a BTreeMap<String, f64>,
    parameters: &'a BTreeMap<String, f64>,
}

impl<'a> Environment<'a> {
    pub fn new(design: &'a BTreeMap<String, f64>, parameters: &'a BTreeMap<String, f64>) -> Self {
        Environment { design, parameters }
    }

    fn lookup(&self, r: &VarRef) -> Option<f64> {
        match r.kind {
            Some(RefKind::DesignVariable) => self.design.get(&r.name).copied(),
            Some(RefKind::Parameter) => self.parameters.get(&r.name).copied(),
            None => self
                .design
                .get(&r.name)
                .or_else(|| self.parameters.get(&r.name))
                .copied(),
        }
    }
}

/// Referenced names partitioned by bound kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeVariables {
    pub design: BTreeSet<String>,
    pub parameters: BTreeSet<String>,
}

/// A parsed expression together with the text it came from.
///
/// Equality is structural on the tree, so differently-spaced sources of the
/// same formula compare equal while the original text stays available for
/// display and for writing configs back out.
#[derive(Debug, Clone)]
pub struct ModelExpression {
    source: String,
    ast: Expr,
}

impl PartialEq for ModelExpression {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

impl FromStr for ModelExpression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let ast = parser::Parser::parse(s)?;
        Ok(ModelExpression {
            source: s.to_string(),
            ast,
        })
    }
}

/// Parses an expression from source text.
pub fn parse(source: &str) -> Result<ModelExpression, ParseError> {
    source.parse()
}

impl ModelExpression {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Canonical text form; `parse(serialize(e))` reproduces the same tree.
    pub fn serialize(&self) -> String {
        print_expr(&self.ast, 0)
    }

    /// Resolves every name against the declared design-variable and parameter
    /// sets, tagging references in place. `self_name` is the parameter the
    /// expression belongs to; a model may not reference its own output.
    /// All problems are reported, not just the first.
    pub fn bind(
        &mut self,
        design: &BTreeSet<String>,
        parameters: &BTreeSet<String>,
        self_name: Option<&str>,
    ) -> Result<(), Vec<BindError>> {
        let mut errors = Vec::new();
        bind_expr(&mut self.ast, design, parameters, self_name, &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Every name the expression mentions, regardless of binding state.
    pub fn referenced_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        collect_names(&self.ast, &mut names);
        names
    }

    /// Referenced names partitioned by kind. Requires a bound expression.
    pub fn free_variables(&self) -> Result<FreeVariables, EvalError> {
        let mut fv = FreeVariables::default();
        collect_free(&self.ast, &mut fv)?;
        Ok(fv)
    }

    pub fn evaluate(&self, env: &Environment) -> Result<f64, EvalError> {
        eval_expr(&self.ast, env)
    }
}

impl fmt::Display for ModelExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl Serialize for ModelExpression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ModelExpression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(D::Error::custom)
    }
}

fn bind_expr(
    expr: &mut Expr,
    design: &BTreeSet<String>,
    parameters: &BTreeSet<String>,
    self_name: Option<&str>,
    errors: &mut Vec<BindError>,
) {
    match expr {
        Expr::Number(_) => {}
        Expr::Ref(r) => {
            if Some(r.name.as_str()) == self_name {
                errors.push(BindError::SelfReference(r.name.clone()));
            } else if design.contains(&r.name) {
                r.kind = Some(RefKind::DesignVariable);
            } else if parameters.contains(&r.name) {
                r.kind = Some(RefKind::Parameter);
            } else {
                errors.push(BindError::UndeclaredName(r.name.clone()));
            }
        }
        Expr::Unary(_, a) | Expr::Call(_, a) => bind_expr(a, design, parameters, self_name, errors),
        Expr::Binary(_, a, b) => {
            bind_expr(a, design, parameters, self_name, errors);
            bind_expr(b, design, parameters, self_name, errors);
        }
    }
}

fn collect_names(expr: &Expr, out: &mut BTreeSet<String>) {
    match expr {
        Expr::Number(_) => {}
        Expr::Ref(r) => {
            out.insert(r.name.clone());
        }
        Expr::Unary(_, a) | Expr::Call(_, a) => collect_names(a, out),
        Expr::Binary(_, a, b) => {
            collect_names(a, out);
            collect_names(b, out);
        }
    }
}

fn collect_free(expr: &Expr, out: &mut FreeVariables) -> Result<(), EvalError> {
    match expr {
        Expr::Number(_) => Ok(()),
        Expr::Ref(r) => match r.kind {
            Some(RefKind::DesignVariable) => {
                out.design.insert(r.name.clone());
                Ok(())
            }
            Some(RefKind::Parameter) => {
                out.parameters.insert(r.name.clone());
                Ok(())
            }
            None => Err(EvalError::UnboundVariable(r.name.clone())),
        },
        Expr::Unary(_, a) | Expr::Call(_, a) => collect_free(a, out),
        Expr::Binary(_, a, b) => {
            collect_free(a, out)?;
            collect_free(b, out)
        }
    }
}

fn eval_expr(expr: &Expr, env: &Environment) -> Result<f64, EvalError> {
    let v = match expr {
        Expr::Number(v) => *v,
        Expr::Ref(r) => env
            .lookup(r)
            .ok_or_else(|| EvalError::UnboundVariable(r.name.clone()))?,
        Expr::Unary(UnaryOp::Neg, a) => -eval_expr(a, env)?,
        Expr::Binary(op, a, b) => {
            let a = eval_expr(a, env)?;
            let b = eval_expr(b, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call(Func::Sqrt, a) => {
            let a = eval_expr(a, env)?;
            if a < 0.0 {
                return Err(EvalError::SqrtOfNegative);
            }
            a.sqrt()
        }
        Expr::Call(Func::Abs, a) => eval_expr(a, env)?.abs(),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

// Printer precedence levels; parenthesization compares child level against
// the context the child is printed in.
fn level(expr: &Expr) -> u8 {
    match expr {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Unary(..) => 3,
        Expr::Binary(BinOp::Pow, ..) => 4,
        Expr::Number(_) | Expr::Ref(_) | Expr::Call(..) => 5,
    }
}

fn print_expr(expr: &Expr, min_level: u8) -> String {
    let own = level(expr);
    let body = match expr {
        Expr::Number(v) => format!("{v}"),
        Expr::Ref(r) => r.name.clone(),
        Expr::Unary(UnaryOp::Neg, a) => format!("-{}", print_expr(a, 3)),
        Expr::Binary(op, a, b) => {
            let (sym, lhs_min, rhs_min) = match op {
                BinOp::Add => ("+", 1, 2),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                // Right-associative: the right child prints bare at its own
                // level, the left child needs parens even at equal level.
                BinOp::Pow => ("^", 5, 4),
            };
            format!(
                "{} {} {}",
                print_expr(a, lhs_min),
                sym,
                print_expr(b, rhs_min)
            )
        }
        Expr::Call(func, a) => {
            let name = match func {
                Func::Sqrt => "sqrt",
                Func::Abs => "abs",
            };
            format!("{name}({})", print_expr(a, 0))
        }
    };
    if own < min_level {
        format!("({body})")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn eval(src: &str, design: &[(&str, f64)]) -> Result<f64, EvalError> {
        let expr = parse(src).unwrap();
        let d = env_of(design);
        let p = BTreeMap::new();
        expr.evaluate(&Environment::new(&d, &p))
    }

    #[test]
    fn parses_reciprocal_length_model() {
        let expr = parse("1 / l_res").unwrap();
        let expected = Expr::Binary(
            BinOp::Div,
            Box::new(Expr::Number(1.0)),
            Box::new(Expr::Ref(VarRef {
                name: "l_res".into(),
                kind: None,
            })),
        );
        assert_eq!(*expr.ast(), expected);
    }

    #[test]
    fn parses_sqrt_product_model() {
        let expr = parse("1 / sqrt(L_qb * w_qb)").unwrap();
        let product = Expr::Binary(
            BinOp::Mul,
            Box::new(Expr::Ref(VarRef {
                name: "L_qb".into(),
                kind: None,
            })),
            Box::new(Expr::Ref(VarRef {
                name: "w_qb".into(),
                kind: None,
            })),
        );
        let expected = Expr::Binary(
            BinOp::Div,
            Box::new(Expr::Number(1.0)),
            Box::new(Expr::Call(Func::Sqrt, Box::new(product))),
        );
        assert_eq!(*expr.ast(), expected);
    }

    #[test]
    fn parses_bare_name() {
        let expr = parse("x").unwrap();
        assert_eq!(
            *expr.ast(),
            Expr::Ref(VarRef {
                name: "x".into(),
                kind: None
            })
        );
    }

    #[test]
    fn hyphen_splits_identifiers() {
        // `w_res-qb` is subtraction between two names, not one identifier.
        let expr = parse("w_res-qb").unwrap();
        let expected = Expr::Binary(
            BinOp::Sub,
            Box::new(Expr::Ref(VarRef {
                name: "w_res".into(),
                kind: None,
            })),
            Box::new(Expr::Ref(VarRef {
                name: "qb".into(),
                kind: None,
            })),
        );
        assert_eq!(*expr.ast(), expected);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", &[]).unwrap(), 512.0);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        assert_eq!(eval("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(eval("2^-3", &[]).unwrap(), 0.125);
    }

    #[test]
    fn subtraction_is_left_associative() {
        assert_eq!(eval("1-2-3", &[]).unwrap(), -4.0);
    }

    #[test]
    fn unary_minus_allowed_after_operators() {
        assert_eq!(eval("2*-3", &[]).unwrap(), -6.0);
        assert_eq!(eval("--2", &[]).unwrap(), 2.0);
    }

    #[test]
    fn scientific_notation_parses() {
        assert_eq!(eval("1.5e-3", &[]).unwrap(), 1.5e-3);
        assert_eq!(eval("2E2", &[]).unwrap(), 200.0);
    }

    #[test]
    fn evaluates_table_models() {
        assert_eq!(eval("1/l_res", &[("l_res", 7500.0)]).unwrap(), 1.0 / 7500.0);
        let v = eval("1/sqrt(L_qb * w_qb)", &[("L_qb", 12.1), ("w_qb", 400.0)]).unwrap();
        assert_eq!(v, 1.0 / (12.1_f64 * 400.0).sqrt());
        assert_eq!(eval("x", &[("x", 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn eval_error_cases_are_distinct() {
        assert_eq!(
            eval("1/x", &[]),
            Err(EvalError::UnboundVariable("x".into()))
        );
        assert_eq!(eval("1/x", &[("x", 0.0)]), Err(EvalError::DivisionByZero));
        assert_eq!(
            eval("sqrt(x)", &[("x", -1.0)]),
            Err(EvalError::SqrtOfNegative)
        );
        assert_eq!(eval("x*x", &[("x", 1e200)]), Err(EvalError::NonFinite));
        // Fractional power of a negative base has no real value.
        assert_eq!(eval("x^0.5", &[("x", -2.0)]), Err(EvalError::NonFinite));
    }

    #[test]
    fn syntax_errors_carry_offset_and_expectation() {
        match parse("1 +") {
            Err(ParseError::Syntax {
                offset, expected, ..
            }) => {
                assert_eq!(offset, 3);
                assert!(
                    expected.contains("number"),
                    "expected-set missing: {expected}"
                );
            }
            other => panic!("wanted syntax error, got {other:?}"),
        }
        match parse("(1 + 2") {
            Err(ParseError::Syntax {
                offset, expected, ..
            }) => {
                assert_eq!(offset, 6);
                assert!(expected.contains(')'), "expected-set missing: {expected}");
            }
            other => panic!("wanted syntax error, got {other:?}"),
        }
        match parse("foo(2)") {
            Err(ParseError::UnknownFunction { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("wanted unknown-function error, got {other:?}"),
        }
        match parse("1 2") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("wanted syntax error, got {other:?}"),
        }
    }

    #[test]
    fn binding_partitions_free_variables() {
        let mut expr = parse("(w_res_qb / w_qb)^2 * alpha / (Delta * (Delta - alpha))").unwrap();
        let design: BTreeSet<String> = ["w_res_qb", "w_qb"].iter().map(|s| s.to_string()).collect();
        let params: BTreeSet<String> = ["alpha", "Delta"].iter().map(|s| s.to_string()).collect();
        expr.bind(&design, &params, Some("chi")).unwrap();
        let fv = expr.free_variables().unwrap();
        assert_eq!(fv.design, design);
        assert_eq!(fv.parameters, params);
    }

    #[test]
    fn binding_rejects_self_reference_and_unknown_names() {
        let mut expr = parse("chi * w_typo").unwrap();
        let design: BTreeSet<String> = ["w_qb".to_string()].into_iter().collect();
        let params: BTreeSet<String> = ["chi".to_string()].into_iter().collect();
        let errs = expr.bind(&design, &params, Some("chi")).unwrap_err();
        assert!(errs.contains(&BindError::SelfReference("chi".into())));
        assert!(errs.contains(&BindError::UndeclaredName("w_typo".into())));
    }

    #[test]
    fn serialize_round_trips_known_forms() {
        for src in [
            "1 / l_res",
            "1 / sqrt(L_qb * w_qb)",
            "(w_res_qb / w_qb)^2 * alpha / (Delta * (Delta - alpha))",
            "l_res_tl",
            "-2^2",
            "2^-3",
            "2^3^2",
            "1-2-3",
            "a - (b - c)",
            "(a + b) * c",
            "abs(-x) + sqrt(y)",
            "x^(y + 1)",
            "(x^2)^3",
        ] {
            let once = parse(src).unwrap();
            let twice = parse(&once.serialize()).unwrap();
            assert_eq!(
                once,
                twice,
                "round-trip changed `{src}` -> `{}`",
                once.serialize()
            );
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let expr = parse("(w / v)^2 * a / (d * (d - a))").unwrap();
        let d = env_of(&[("w", 100.0), ("v", 400.0)]);
        let p = env_of(&[("a", 0.2), ("d", -2.0)]);
        let env = Environment::new(&d, &p);
        let first = expr.evaluate(&env).unwrap();
        let second = expr.evaluate(&env).unwrap();
        assert_eq!(first.to_bits(), second.to_bits());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                // Positive literals only: the printer writes negative numbers
                // with a leading `-`, which parses back as Unary(Neg, ..),
                // a different but equivalent tree.
                (0.001f64..1e6).prop_map(Expr::Number),
                "[a-z][a-z0-9_]{0,8}".prop_map(|name| Expr::Ref(VarRef { name, kind: None })),
            ];
            leaf.prop_recursive(4, 64, 8, |inner| {
                prop_oneof![
                    (
                        inner.clone(),
                        inner.clone(),
                        prop_oneof![
                            Just(BinOp::Add),
                            Just(BinOp::Sub),
                            Just(BinOp::Mul),
                            Just(BinOp::Div),
                            Just(BinOp::Pow),
                        ]
                    )
                        .prop_map(|(a, b, op)| Expr::Binary(
                            op,
                            Box::new(a),
                            Box::new(b)
                        )),
                    inner
                        .clone()
                        .prop_map(|a| Expr::Unary(UnaryOp::Neg, Box::new(a))),
                    (inner, prop_oneof![Just(Func::Sqrt), Just(Func::Abs)])
                        .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
                ]
            })
        }

        proptest! {
            #[test]
            fn serialize_parse_round_trip(ast in arb_expr()) {
                let expr = ModelExpression { source: String::new(), ast };
                let text = expr.serialize();
                let reparsed = parse(&text)
                    .unwrap_or_else(|e| panic!("`{text}` failed to reparse: {e}"));
                prop_assert_eq!(reparsed.ast(), &expr.ast, "via `{}`", text);
            }

            #[test]
            fn names_outside_the_free_set_cannot_affect_evaluation(
                ast in arb_expr(),
                noise in -1e6f64..1e6,
            ) {
                let mut expr = ModelExpression { source: String::new(), ast };
                // Alternate declared kinds so both lookup tables are in play.
                let names: Vec<String> = expr.referenced_names().into_iter().collect();
                let design: BTreeSet<String> = names.iter().step_by(2).cloned().collect();
                let params: BTreeSet<String> =
                    names.iter().skip(1).step_by(2).cloned().collect();
                expr.bind(&design, &params, None).unwrap();
                let fv = expr.free_variables().unwrap();
                prop_assert_eq!(&fv.design, &design);
                prop_assert_eq!(&fv.parameters, &params);

                let d: BTreeMap<String, f64> = design
                    .iter()
                    .enumerate()
                    .map(|(i, n)| (n.clone(), 1.5 + i as f64))
                    .collect();
                let p: BTreeMap<String, f64> = params
                    .iter()
                    .enumerate()
                    .map(|(i, n)| (n.clone(), 2.5 + i as f64))
                    .collect();
                let before = expr.evaluate(&Environment::new(&d, &p)).map(f64::to_bits);

                // Planting values under every name the expression does not
                // hold free — the other kind's names and a fresh one — must
                // leave the result bit-identical, Ok or Err alike.
                let mut d2 = d.clone();
                let mut p2 = p.clone();
                for name in &params {
                    d2.insert(name.clone(), noise);
                }
                for name in &design {
                    p2.insert(name.clone(), noise);
                }
                d2.insert("never_referenced_here".to_string(), noise);
                p2.insert("never_referenced_here".to_string(), noise);
                let after = expr.evaluate(&Environment::new(&d2, &p2)).map(f64::to_bits);
                prop_assert_eq!(before, after);
            }
        }
    }
}
