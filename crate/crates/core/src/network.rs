//! Boolean networks: rule files, rule ASTs, evaluation and dependencies.
//!
//! Rule files use one `target, expression` line per species. Expressions are
//! built from species names, `!`, `&`, `|` and parentheses with the usual
//! precedence (`!` binds tightest, then `&`, then `|`); binary operators
//! associate to the left. `#` starts a comment and an optional first line
//! `targets, factors` is ignored.
//!
//! ```text
//! # five species
//! S0, !S1
//! S1, S2 | S3
//! S2, S2 | (S2 & S4)
//! S3, (!S2) & S3
//! S4, S1 & !S4
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Rules referencing more species than this are rejected when a network is
/// built, since every rule keeps a dense truth table.
pub const MAX_RULE_DEPS: usize = 24;

/// Default bound on the dependency count accepted by
/// [`BooleanNetwork::truth_table`].
pub const DEFAULT_TABLE_BOUND: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeciesId {
    pub index: usize,
    pub name: String,
}

/// Activation states packed into a word; bit `i` is species `i`.
///
/// The integer encoding puts species 0 in the least significant bit, so a
/// state doubles as an index into a dense probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct State(pub u64);

impl State {
    pub fn from_bits(bits: &[bool]) -> Self {
        State(
            bits.iter()
                .enumerate()
                .fold(0, |acc, (i, &b)| acc | (u64::from(b) << i)),
        )
    }

    #[inline]
    pub fn get(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    #[inline]
    pub fn with(self, i: usize, value: bool) -> Self {
        if value {
            State(self.0 | (1 << i))
        } else {
            State(self.0 & !(1 << i))
        }
    }

    #[inline]
    pub fn encode(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RuleExpr {
    Var(usize),
    Not(Box<RuleExpr>),
    And(Box<RuleExpr>, Box<RuleExpr>),
    Or(Box<RuleExpr>, Box<RuleExpr>),
}

impl RuleExpr {
    pub fn var(i: usize) -> Self {
        RuleExpr::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: RuleExpr) -> Self {
        RuleExpr::Not(Box::new(e))
    }

    pub fn and(a: RuleExpr, b: RuleExpr) -> Self {
        RuleExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: RuleExpr, b: RuleExpr) -> Self {
        RuleExpr::Or(Box::new(a), Box::new(b))
    }

    /// Evaluates the expression with `value(j)` giving the state of species `j`.
    pub fn eval_with<F: Fn(usize) -> bool>(&self, value: &F) -> bool {
        match self {
            RuleExpr::Var(j) => value(*j),
            RuleExpr::Not(e) => !e.eval_with(value),
            RuleExpr::And(a, b) => a.eval_with(value) && b.eval_with(value),
            RuleExpr::Or(a, b) => a.eval_with(value) || b.eval_with(value),
        }
    }

    pub fn eval(&self, x: State) -> bool {
        self.eval_with(&|j| x.get(j))
    }

    /// Species referenced anywhere in the expression.
    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            RuleExpr::Var(j) => {
                out.insert(*j);
            }
            RuleExpr::Not(e) => e.collect_vars(out),
            RuleExpr::And(a, b) | RuleExpr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RuleExpr::Var(_) => 0,
            RuleExpr::Not(e) => 1 + e.depth(),
            RuleExpr::And(a, b) | RuleExpr::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            RuleExpr::Or(..) => 1,
            RuleExpr::And(..) => 2,
            RuleExpr::Not(_) | RuleExpr::Var(_) => 3,
        }
    }

    /// Rule text with species names and minimal parentheses.
    pub fn to_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write(names, &mut out);
        out
    }

    /// Writes the expression with the minimal parentheses needed to reparse
    /// to the same tree.
    fn write(&self, names: &[String], out: &mut String) {
        match self {
            RuleExpr::Var(j) => out.push_str(&names[*j]),
            RuleExpr::Not(e) => {
                out.push('!');
                write_operand(e, 3, false, names, out);
            }
            RuleExpr::And(a, b) => {
                write_operand(a, 2, false, names, out);
                out.push_str(" & ");
                write_operand(b, 2, true, names, out);
            }
            RuleExpr::Or(a, b) => {
                write_operand(a, 1, false, names, out);
                out.push_str(" | ");
                write_operand(b, 1, true, names, out);
            }
        }
    }
}

fn write_operand(e: &RuleExpr, parent: u8, right: bool, names: &[String], out: &mut String) {
    let p = e.precedence();
    // Left associativity: a right operand of equal precedence needs parens.
    let paren = p < parent || (right && p == parent && parent < 3);
    if paren {
        out.push('(');
    }
    e.write(names, out);
    if paren {
        out.push(')');
    }
}

/// Truth table of one rule over its syntactic dependencies.
///
/// Row `a` assigns `deps[m]` the value of bit `m` of `a`; `deps` is sorted
/// ascending, so the lowest-indexed dependency is the least significant bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    pub deps: Vec<usize>,
    pub rows: Vec<bool>,
}

impl TruthTable {
    fn build(expr: &RuleExpr, deps: Vec<usize>) -> Self {
        let n = deps.len();
        let rows = (0..1usize << n)
            .map(|a| {
                expr.eval_with(&|j| {
                    let m = deps.binary_search(&j).expect("variable is a dependency");
                    (a >> m) & 1 == 1
                })
            })
            .collect();
        TruthTable { deps, rows }
    }

    /// Row index selected by a full state.
    #[inline]
    pub fn row_of(&self, x: State) -> usize {
        self.deps
            .iter()
            .enumerate()
            .fold(0, |acc, (m, &j)| acc | ((((x.0 >> j) & 1) as usize) << m))
    }

    #[inline]
    pub fn eval(&self, x: State) -> bool {
        self.rows[self.row_of(x)]
    }

    /// Value for an assignment given as `(species, bit)` pairs.
    pub fn lookup(&self, assignment: &[(usize, bool)]) -> Option<bool> {
        let mut row = 0;
        for (m, dep) in self.deps.iter().enumerate() {
            let (_, v) = assignment.iter().find(|(s, _)| s == dep)?;
            row |= usize::from(*v) << m;
        }
        Some(self.rows[row])
    }

    /// Dependency positions whose flip changes the output for some row.
    pub fn semantic_positions(&self) -> Vec<usize> {
        (0..self.deps.len())
            .filter(|&m| {
                let bit = 1 << m;
                (0..self.rows.len())
                    .filter(|a| a & bit == 0)
                    .any(|a| self.rows[a] != self.rows[a | bit])
            })
            .collect()
    }
}

/// A network of `d` species, each updated by exactly one rule.
#[derive(Debug, Clone)]
pub struct BooleanNetwork {
    names: Vec<String>,
    rules: Vec<RuleExpr>,
    tables: Vec<TruthTable>,
}

impl PartialEq for BooleanNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.rules == other.rules
    }
}

impl BooleanNetwork {
    /// Builds a network from species names and one rule per species.
    pub fn new(names: Vec<String>, rules: Vec<RuleExpr>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::NoSpecies);
        }
        if rules.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                found: rules.len(),
            });
        }
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if !is_identifier(name) {
                return Err(Error::Syntax {
                    line: i + 1,
                    column: 1,
                    message: format!("`{name}` is not a valid species name"),
                });
            }
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::DuplicateTarget {
                    line: i + 1,
                    name: name.clone(),
                });
            }
        }
        let mut tables = Vec::with_capacity(rules.len());
        for rule in &rules {
            let deps: Vec<usize> = rule.vars().into_iter().collect();
            if let Some(&bad) = deps.iter().find(|&&j| j >= names.len()) {
                return Err(Error::InvalidRule {
                    index: bad,
                    count: names.len(),
                });
            }
            if deps.len() > MAX_RULE_DEPS {
                return Err(Error::TooManyDependencies {
                    deps: deps.len(),
                    bound: MAX_RULE_DEPS,
                });
            }
            tables.push(TruthTable::build(rule, deps));
        }
        Ok(BooleanNetwork { names, rules, tables })
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_network(text)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn species(&self) -> Vec<SpeciesId> {
        self.names
            .iter()
            .enumerate()
            .map(|(index, name)| SpeciesId {
                index,
                name: name.clone(),
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn rules(&self) -> &[RuleExpr] {
        &self.rules
    }

    pub fn rule(&self, i: usize) -> Result<&RuleExpr> {
        self.rules.get(i).ok_or(Error::InvalidRule {
            index: i,
            count: self.len(),
        })
    }

    pub(crate) fn check_rule(&self, i: usize) -> Result<()> {
        self.rule(i).map(|_| ())
    }

    /// `B_i(x)`.
    pub fn eval_rule(&self, i: usize, x: State) -> bool {
        self.tables[i].eval(x)
    }

    /// Species whose variables appear in rule `i`, ascending.
    pub fn syntactic_deps(&self, i: usize) -> &[usize] {
        &self.tables[i].deps
    }

    /// Species that actually influence rule `i`: flipping one of them changes
    /// the rule's value for at least one state.
    pub fn semantic_deps(&self, i: usize) -> Vec<usize> {
        let table = &self.tables[i];
        table
            .semantic_positions()
            .into_iter()
            .map(|m| table.deps[m])
            .collect()
    }

    /// Truth table of rule `i` under the default dependency bound.
    pub fn truth_table(&self, i: usize) -> Result<&TruthTable> {
        self.truth_table_bounded(i, DEFAULT_TABLE_BOUND)
    }

    pub fn truth_table_bounded(&self, i: usize, bound: usize) -> Result<&TruthTable> {
        self.check_rule(i)?;
        let table = &self.tables[i];
        if table.deps.len() > bound {
            return Err(Error::TooManyDependencies {
                deps: table.deps.len(),
                bound,
            });
        }
        Ok(table)
    }

    pub(crate) fn table(&self, i: usize) -> &TruthTable {
        &self.tables[i]
    }

    /// Network with species relabeled so that old species `i` becomes
    /// `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.len();
        if perm.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: perm.len(),
            });
        }
        let mut names = vec![String::new(); d];
        let mut rules = vec![RuleExpr::Var(0); d];
        for i in 0..d {
            names[perm[i]] = self.names[i].clone();
            rules[perm[i]] = relabel(&self.rules[i], perm);
        }
        BooleanNetwork::new(names, rules)
    }
}

fn relabel(e: &RuleExpr, perm: &[usize]) -> RuleExpr {
    match e {
        RuleExpr::Var(j) => RuleExpr::Var(perm[*j]),
        RuleExpr::Not(a) => RuleExpr::not(relabel(a, perm)),
        RuleExpr::And(a, b) => RuleExpr::and(relabel(a, perm), relabel(b, perm)),
        RuleExpr::Or(a, b) => RuleExpr::or(relabel(a, perm), relabel(b, perm)),
    }
}

impl fmt::Display for BooleanNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "targets, factors")?;
        for (name, rule) in self.names.iter().zip(&self.rules) {
            let mut expr = String::new();
            rule.write(&self.names, &mut expr);
            writeln!(f, "{name}, {expr}")?;
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
}

/// Tokens with their 1-based column.
fn tokenize(src: &str, line: usize, col0: usize) -> Result<Vec<(Token, usize)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut k = 0;
    while k < chars.len() {
        let (_, c) = chars[k];
        let column = col0 + k;
        match c {
            c if c.is_whitespace() => {}
            '!' => out.push((Token::Not, column)),
            '&' => out.push((Token::And, column)),
            '|' => out.push((Token::Or, column)),
            '(' => out.push((Token::LParen, column)),
            ')' => out.push((Token::RParen, column)),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = k;
                while k + 1 < chars.len() && (chars[k + 1].1.is_ascii_alphanumeric() || chars[k + 1].1 == '_')
                {
                    k += 1;
                }
                let ident: String = chars[start..=k].iter().map(|(_, c)| c).collect();
                out.push((Token::Ident(ident), column));
            }
            other => {
                return Err(Error::Syntax {
                    line,
                    column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        k += 1;
    }
    Ok(out)
}

struct ExprParser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    line: usize,
    end_column: usize,
    lookup: &'a HashMap<String, usize>,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn disjunction(&mut self) -> Result<RuleExpr> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.conjunction()?;
            lhs = RuleExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<RuleExpr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = RuleExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RuleExpr> {
        match self.peek() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(RuleExpr::not(self.unary()?))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.disjunction()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                let column = self.column();
                let index = *self.lookup.get(name).ok_or_else(|| Error::UndeclaredSpecies {
                    line: self.line,
                    column,
                    name: name.clone(),
                })?;
                self.pos += 1;
                Ok(RuleExpr::Var(index))
            }
            Some(_) => Err(self.error("expected a species, `!` or `(`")),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

/// Parses a rule file. Species are indexed in order of appearance as rule
/// targets; expressions may reference targets declared further down.
pub fn parse_network(text: &str) -> Result<BooleanNetwork> {
    struct Line<'a> {
        number: usize,
        expr: &'a str,
        expr_column: usize,
    }

    let mut names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut lines = Vec::new();
    let mut first = true;

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(comma) = content.find(',') else {
            return Err(Error::Syntax {
                line: number,
                column: content.chars().count() + 1,
                message: "expected `target, expression`".into(),
            });
        };
        let target_raw = &content[..comma];
        let target = target_raw.trim();
        let expr = &content[comma + 1..];
        let was_first = std::mem::replace(&mut first, false);
        if was_first && target.eq_ignore_ascii_case("targets") && expr.trim().eq_ignore_ascii_case("factors")
        {
            continue;
        }
        if !is_identifier(target) {
            let lead = target_raw.len() - target_raw.trim_start().len();
            return Err(Error::Syntax {
                line: number,
                column: content[..lead].chars().count() + 1,
                message: format!("`{target}` is not a valid species name"),
            });
        }
        if lookup.contains_key(target) {
            return Err(Error::DuplicateTarget {
                line: number,
                name: target.to_string(),
            });
        }
        lookup.insert(target.to_string(), names.len());
        names.push(target.to_string());
        lines.push(Line {
            number,
            expr,
            expr_column: content[..comma].chars().count() + 2,
        });
    }

    if names.is_empty() {
        return Err(Error::NoSpecies);
    }

    let mut rules = Vec::with_capacity(lines.len());
    for line in &lines {
        let tokens = tokenize(line.expr, line.number, line.expr_column)?;
        let mut parser = ExprParser {
            tokens: &tokens,
            pos: 0,
            line: line.number,
            end_column: line.expr_column + line.expr.chars().count(),
            lookup: &lookup,
        };
        let rule = parser.disjunction()?;
        if parser.pos != tokens.len() {
            return Err(parser.error("unexpected token after expression"));
        }
        rules.push(rule);
    }
    BooleanNetwork::new(names, rules)
}
