//! The dynamic probabilistic modal language, its parser and printer, its
//! semantics over stochastic models, the axiom suite, and the contextuality
//! descriptions.
//!
//! Necessity after a label quantifies over every initial-tree transition that
//! projects onto that label, so `[a]phi` reads "phi holds after `a`, whichever
//! compatible context is actually performed". A label with no transition out of
//! the current stage makes necessity and all probability comparisons hold
//! vacuously; the command-line front end flags when that reading fired.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::presheaf::{StateRef, StochasticModel};
use crate::scenario::{
    check_no_signalling, context_label, extract_empirical, find_global_section,
    global_support_assignment, is_contextual, is_strongly_contextual, Assignment, EmpiricalModel,
    MeasurementScenario, ScenarioSemiring, SectionOutcome,
};
use crate::semiring::Semiring;

/// A transition label: a single edge label, or a finite path of labels in
/// execution order. `ab∘i` parses to the path `[i, ab]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelPath(pub Vec<String>);

impl LabelPath {
    pub fn single(label: &str) -> Self {
        LabelPath(vec![label.to_string()])
    }
}

impl fmt::Display for LabelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut steps: Vec<&str> = self.0.iter().map(|s| s.as_str()).collect();
        steps.reverse();
        write!(f, "{}", steps.join("\u{2218}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Formulas of the language. Diamonds and the weak comparisons are kept in the
/// syntax and expanded into their defining forms during evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Top,
    Atom(String, String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Xor(Box<Formula>, Box<Formula>),
    Nec(LabelPath, Box<Formula>),
    Pos(LabelPath, Box<Formula>),
    Prob {
        body: Box<Formula>,
        label: LabelPath,
        op: CmpOp,
        bound: BigRational,
    },
}

impl Formula {
    pub fn atom(measurement: &str, outcome: &str) -> Formula {
        Formula::Atom(measurement.to_string(), outcome.to_string())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn nec(label: &str, f: Formula) -> Formula {
        Formula::Nec(LabelPath::single(label), Box::new(f))
    }

    pub fn pos(label: &str, f: Formula) -> Formula {
        Formula::Pos(LabelPath::single(label), Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn iff(l: Formula, r: Formula) -> Formula {
        Formula::Iff(Box::new(l), Box::new(r))
    }

    pub fn xor(l: Formula, r: Formula) -> Formula {
        Formula::Xor(Box::new(l), Box::new(r))
    }

    pub fn big_and(mut parts: Vec<Formula>) -> Formula {
        let Some(first) = (!parts.is_empty()).then(|| parts.remove(0)) else {
            return Formula::Top;
        };
        parts.into_iter().fold(first, Formula::and)
    }

    pub fn big_or(mut parts: Vec<Formula>) -> Formula {
        let Some(first) = (!parts.is_empty()).then(|| parts.remove(0)) else {
            return Formula::not(Formula::Top);
        };
        parts.into_iter().fold(first, Formula::or)
    }

    fn level(&self) -> u8 {
        match self {
            Formula::Iff(..) | Formula::Xor(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            _ => 4,
        }
    }

    fn write(&self, out: &mut String, min_level: u8) {
        let mine = self.level();
        let parens = mine < min_level;
        if parens {
            out.push('(');
        }
        match self {
            Formula::Top => out.push('T'),
            Formula::Atom(m, o) => {
                out.push_str(m);
                out.push('=');
                out.push_str(o);
            }
            Formula::Not(f) => {
                out.push('!');
                f.write(out, 4);
            }
            Formula::Nec(l, f) => {
                out.push('[');
                out.push_str(&l.to_string());
                out.push(']');
                f.write(out, 4);
            }
            Formula::Pos(l, f) => {
                out.push('<');
                out.push_str(&l.to_string());
                out.push('>');
                f.write(out, 4);
            }
            Formula::And(l, r) => {
                l.write(out, 3);
                out.push_str(" & ");
                r.write(out, 4);
            }
            Formula::Or(l, r) => {
                l.write(out, 2);
                out.push_str(" | ");
                r.write(out, 3);
            }
            Formula::Iff(l, r) => {
                l.write(out, 1);
                out.push_str(" <-> ");
                r.write(out, 2);
            }
            Formula::Xor(l, r) => {
                l.write(out, 1);
                out.push_str(" (+) ");
                r.write(out, 2);
            }
            Formula::Prob { body, label, op, bound } => {
                out.push_str("P(");
                // bodies print tight enough that the separator bar stays
                // unambiguous on reparse
                body.write(out, 3);
                out.push_str(" | ");
                out.push_str(&label.to_string());
                out.push_str(") ");
                out.push_str(op.as_str());
                out.push(' ');
                out.push_str(&rational_literal(bound));
            }
        }
        if parens {
            out.push(')');
        }
    }
}

fn rational_literal(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write(&mut out, 0);
        write!(f, "{out}")
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    f.write(&mut out, 0);
    out
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Amp,
    Pipe,
    Bang,
    Iff,
    Xor,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Le,
    Ge,
    Equals,
    Slash,
    Minus,
    Comp,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let at = |i: usize| -> usize {
        text.char_indices().nth(i).map(|(b, _)| b).unwrap_or(text.len())
    };
    while i < bytes.len() {
        let c = bytes[i];
        let pos = at(i);
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '&' => {
                toks.push((Tok::Amp, pos));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Pipe, pos));
                i += 1;
            }
            '!' => {
                toks.push((Tok::Bang, pos));
                i += 1;
            }
            '[' => {
                toks.push((Tok::LBracket, pos));
                i += 1;
            }
            ']' => {
                toks.push((Tok::RBracket, pos));
                i += 1;
            }
            '=' => {
                toks.push((Tok::Equals, pos));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, pos));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, pos));
                i += 1;
            }
            '.' | '\u{2218}' => {
                toks.push((Tok::Comp, pos));
                i += 1;
            }
            '(' => {
                if bytes.get(i + 1) == Some(&'+') && bytes.get(i + 2) == Some(&')') {
                    toks.push((Tok::Xor, pos));
                    i += 3;
                } else {
                    toks.push((Tok::LParen, pos));
                    i += 1;
                }
            }
            ')' => {
                toks.push((Tok::RParen, pos));
                i += 1;
            }
            '<' => {
                if bytes.get(i + 1) == Some(&'-') && bytes.get(i + 2) == Some(&'>') {
                    toks.push((Tok::Iff, pos));
                    i += 3;
                } else if bytes.get(i + 1) == Some(&'=') {
                    toks.push((Tok::Le, pos));
                    i += 2;
                } else {
                    toks.push((Tok::Lt, pos));
                    i += 1;
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    toks.push((Tok::Ge, pos));
                    i += 2;
                } else {
                    toks.push((Tok::Gt, pos));
                    i += 1;
                }
            }
            c if c.is_alphanumeric() || c == '_' || c == '\'' => {
                let mut ident = String::new();
                while i < bytes.len()
                    && (bytes[i].is_alphanumeric() || bytes[i] == '_' || bytes[i] == '\'')
                {
                    ident.push(bytes[i]);
                    i += 1;
                }
                toks.push((Tok::Ident(ident), pos));
            }
            other => {
                return Err(Error::Syntax {
                    position: pos,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let position = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Syntax {
                position,
                message: format!("expected {what}"),
            }),
        }
    }

    fn fail<T>(&self, message: &str) -> Result<T> {
        Err(Error::Syntax {
            position: self.here(),
            message: message.to_string(),
        })
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let position = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => Err(Error::Syntax {
                position,
                message: format!("expected {what}"),
            }),
        }
    }

    /// `lbl (comp lbl)*`, reversed from display order into execution order.
    fn label(&mut self) -> Result<LabelPath> {
        let mut display = vec![self.ident("a label")?];
        while self.peek() == Some(&Tok::Comp) {
            self.bump();
            display.push(self.ident("a label")?);
        }
        display.reverse();
        Ok(LabelPath(display))
    }

    fn rational(&mut self) -> Result<BigRational> {
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.bump();
            true
        } else {
            false
        };
        let numer_text = self.ident("a rational literal")?;
        let numer: BigInt = numer_text
            .parse()
            .map_err(|_| Error::Syntax {
                position: self.here(),
                message: format!("bad numeral {numer_text:?}"),
            })?;
        let denom: BigInt = if self.peek() == Some(&Tok::Slash) {
            self.bump();
            let d = self.ident("a denominator")?;
            d.parse().map_err(|_| Error::Syntax {
                position: self.here(),
                message: format!("bad numeral {d:?}"),
            })?
        } else {
            BigInt::one()
        };
        if denom.is_zero() {
            return self.fail("zero denominator");
        }
        let mut r = BigRational::new(numer, denom);
        if negative {
            r = -r;
        }
        Ok(r)
    }

    fn formula(&mut self, allow_pipe: bool) -> Result<Formula> {
        let mut lhs = self.or_level(allow_pipe)?;
        loop {
            match self.peek() {
                Some(Tok::Iff) => {
                    self.bump();
                    let rhs = self.or_level(allow_pipe)?;
                    lhs = Formula::iff(lhs, rhs);
                }
                Some(Tok::Xor) => {
                    self.bump();
                    let rhs = self.or_level(allow_pipe)?;
                    lhs = Formula::xor(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn or_level(&mut self, allow_pipe: bool) -> Result<Formula> {
        let mut lhs = self.and_level(allow_pipe)?;
        while allow_pipe && self.peek() == Some(&Tok::Pipe) {
            self.bump();
            let rhs = self.and_level(allow_pipe)?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_level(&mut self, allow_pipe: bool) -> Result<Formula> {
        let mut lhs = self.unary(allow_pipe)?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            let rhs = self.unary(allow_pipe)?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self, allow_pipe: bool) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.bump();
                Ok(Formula::not(self.unary(allow_pipe)?))
            }
            Some(Tok::LBracket) => {
                self.bump();
                let label = self.label()?;
                self.expect(Tok::RBracket, "a closing bracket")?;
                Ok(Formula::Nec(label, Box::new(self.unary(allow_pipe)?)))
            }
            Some(Tok::Lt) => {
                self.bump();
                let label = self.label()?;
                self.expect(Tok::Gt, "a closing angle bracket")?;
                Ok(Formula::Pos(label, Box::new(self.unary(allow_pipe)?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.formula(true)?;
                self.expect(Tok::RParen, "a closing parenthesis")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if name == "P" && self.toks.get(self.pos + 1).map(|(t, _)| t) == Some(&Tok::LParen) {
                    self.bump();
                    self.bump();
                    let body = self.formula(false)?;
                    self.expect(Tok::Pipe, "the conditioning bar")?;
                    let label = self.label()?;
                    self.expect(Tok::RParen, "a closing parenthesis")?;
                    let op = match self.bump() {
                        Some(Tok::Lt) => CmpOp::Lt,
                        Some(Tok::Le) => CmpOp::Le,
                        Some(Tok::Equals) => CmpOp::Eq,
                        Some(Tok::Ge) => CmpOp::Ge,
                        Some(Tok::Gt) => CmpOp::Gt,
                        _ => return self.fail("expected a comparison operator"),
                    };
                    let bound = self.rational()?;
                    return Ok(Formula::Prob {
                        body: Box::new(body),
                        label,
                        op,
                        bound,
                    });
                }
                self.bump();
                if name == "T" {
                    return Ok(Formula::Top);
                }
                self.expect(Tok::Equals, "an outcome equation")?;
                let outcome = self.ident("an outcome name")?;
                Ok(Formula::Atom(name, outcome))
            }
            _ => self.fail("expected a formula"),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let f = p.formula(true)?;
    if p.pos != p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// semantics
// ---------------------------------------------------------------------------

/// Extension computation with per-call memoization of formula extensions,
/// label lifts, and path compositions. The `vacuous` set records states where
/// some modality or comparison held only because no transition projected onto
/// its label.
pub struct Evaluator<'m, W: Semiring> {
    model: &'m StochasticModel<W>,
    all: Rc<BTreeSet<StateRef>>,
    memo: HashMap<Formula, Rc<BTreeSet<StateRef>>>,
    lifts: HashMap<(usize, Vec<String>), Rc<Vec<Vec<usize>>>>,
    chains: HashMap<(usize, Vec<usize>), Rc<crate::rel::RRelation<W>>>,
    pub vacuous: BTreeSet<StateRef>,
}

impl<'m, W: Semiring> Evaluator<'m, W> {
    pub fn new(model: &'m StochasticModel<W>) -> Self {
        Evaluator {
            model,
            all: Rc::new(model.all_states().into_iter().collect()),
            memo: HashMap::new(),
            lifts: HashMap::new(),
            chains: HashMap::new(),
            vacuous: BTreeSet::new(),
        }
    }

    pub fn all_states(&self) -> Rc<BTreeSet<StateRef>> {
        Rc::clone(&self.all)
    }

    fn lifted(&mut self, stage: usize, steps: &[String]) -> Result<Rc<Vec<Vec<usize>>>> {
        if let Some(hit) = self.lifts.get(&(stage, steps.to_vec())) {
            return Ok(Rc::clone(hit));
        }
        let lifted = Rc::new(self.model.lift_label_paths(stage, steps)?);
        self.lifts.insert((stage, steps.to_vec()), Rc::clone(&lifted));
        Ok(lifted)
    }

    fn chain_relation(&mut self, stage: usize, chain: &[usize]) -> Result<Rc<crate::rel::RRelation<W>>> {
        if let Some(hit) = self.chains.get(&(stage, chain.to_vec())) {
            return Ok(Rc::clone(hit));
        }
        let reached = Rc::new(self.model.system.eval_chain(stage, chain)?);
        self.chains.insert((stage, chain.to_vec()), Rc::clone(&reached));
        Ok(reached)
    }

    pub fn extension(&mut self, f: &Formula) -> Result<Rc<BTreeSet<StateRef>>> {
        if let Some(hit) = self.memo.get(f) {
            return Ok(Rc::clone(hit));
        }
        let ext: BTreeSet<StateRef> = match f {
            Formula::Top => self.all.as_ref().clone(),
            Formula::Atom(m, o) => {
                let key = format!("{m}={o}");
                self.model
                    .valuation
                    .get(&key)
                    .ok_or(Error::UnknownLetter(key))?
                    .clone()
            }
            Formula::Not(inner) => {
                let e = self.extension(inner)?;
                self.all.difference(&e).cloned().collect()
            }
            Formula::And(l, r) => {
                let (a, b) = (self.extension(l)?, self.extension(r)?);
                a.intersection(&b).cloned().collect()
            }
            Formula::Or(l, r) => {
                let (a, b) = (self.extension(l)?, self.extension(r)?);
                a.union(&b).cloned().collect()
            }
            Formula::Iff(l, r) => {
                let (a, b) = (self.extension(l)?, self.extension(r)?);
                self.all
                    .iter()
                    .filter(|s| a.contains(s) == b.contains(s))
                    .cloned()
                    .collect()
            }
            Formula::Xor(l, r) => {
                let (a, b) = (self.extension(l)?, self.extension(r)?);
                a.symmetric_difference(&b).cloned().collect()
            }
            Formula::Nec(label, body) => {
                let inner = self.extension(body)?;
                self.modal_states(label, |sat| sat, &inner)?
            }
            Formula::Pos(label, body) => {
                // defined as the dual of necessity over the negated body
                let inner = self.extension(body)?;
                let complement: BTreeSet<StateRef> =
                    self.all.difference(&inner).cloned().collect();
                let nec_not = self.modal_states(label, |sat| sat, &complement)?;
                self.all.difference(&nec_not).cloned().collect()
            }
            Formula::Prob { body, label, op: CmpOp::Le, bound } => {
                let lt = Formula::Prob {
                    body: body.clone(),
                    label: label.clone(),
                    op: CmpOp::Lt,
                    bound: bound.clone(),
                };
                let eq = Formula::Prob {
                    body: body.clone(),
                    label: label.clone(),
                    op: CmpOp::Eq,
                    bound: bound.clone(),
                };
                return self.extension(&Formula::or(lt, eq));
            }
            Formula::Prob { body, label, op: CmpOp::Ge, bound } => {
                let gt = Formula::Prob {
                    body: body.clone(),
                    label: label.clone(),
                    op: CmpOp::Gt,
                    bound: bound.clone(),
                };
                let eq = Formula::Prob {
                    body: body.clone(),
                    label: label.clone(),
                    op: CmpOp::Eq,
                    bound: bound.clone(),
                };
                return self.extension(&Formula::or(gt, eq));
            }
            Formula::Prob { body, label, op, bound } => {
                let inner = self.extension(body)?;
                self.prob_states(label, *op, bound, &inner)?
            }
        };
        let ext = Rc::new(ext);
        self.memo.insert(f.clone(), Rc::clone(&ext));
        Ok(ext)
    }

    /// States where the support after every lifted transition lands in `inner`.
    fn modal_states(
        &mut self,
        label: &LabelPath,
        _shape: impl Fn(bool) -> bool,
        inner: &BTreeSet<StateRef>,
    ) -> Result<BTreeSet<StateRef>> {
        if !self.model.label_path_exists(&label.0) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        let mut out = BTreeSet::new();
        for s in self.all.clone().iter() {
            let chains = self.lifted(s.stage, &label.0)?;
            if chains.is_empty() {
                self.vacuous.insert(s.clone());
                out.insert(s.clone());
                continue;
            }
            let mut ok = true;
            for chain in chains.iter() {
                let end = *chain.last().expect("chains are nonempty");
                let reached = self.chain_relation(s.stage, chain)?;
                let sat = reached
                    .dist(&s.state)
                    .support()
                    .all(|(u, _)| inner.contains(&StateRef::new(end, u.clone())));
                if !sat {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.insert(s.clone());
            }
        }
        Ok(out)
    }

    /// States where the mass of `inner` after every lifted transition compares
    /// as requested against the bound.
    fn prob_states(
        &mut self,
        label: &LabelPath,
        op: CmpOp,
        bound: &BigRational,
        inner: &BTreeSet<StateRef>,
    ) -> Result<BTreeSet<StateRef>> {
        if !self.model.label_path_exists(&label.0) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        let mut out = BTreeSet::new();
        for s in self.all.clone().iter() {
            let chains = self.lifted(s.stage, &label.0)?;
            if chains.is_empty() {
                self.vacuous.insert(s.clone());
                out.insert(s.clone());
                continue;
            }
            let mut ok = true;
            for chain in chains.iter() {
                let end = *chain.last().expect("chains are nonempty");
                let reached = self.chain_relation(s.stage, chain)?;
                let image = reached.image(&s.state).clone();
                let mass: BigRational = image
                    .iter()
                    .filter(|u| inner.contains(&StateRef::new(end, (*u).clone())))
                    .map(|u| reached.dist(&s.state).weight(u).as_probability())
                    .sum();
                let holds = match op {
                    CmpOp::Lt => mass < *bound,
                    CmpOp::Eq => mass == *bound,
                    CmpOp::Gt => mass > *bound,
                    CmpOp::Le | CmpOp::Ge => unreachable!("expanded before evaluation"),
                };
                if !holds {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.insert(s.clone());
            }
        }
        Ok(out)
    }
}

pub fn extension<W: Semiring>(
    model: &StochasticModel<W>,
    f: &Formula,
) -> Result<BTreeSet<StateRef>> {
    let mut eval = Evaluator::new(model);
    Ok(eval.extension(f)?.as_ref().clone())
}

/// A sequent with a finite set of antecedents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequent {
    pub antecedents: Vec<Formula>,
    pub consequent: Formula,
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ants: Vec<String> = self.antecedents.iter().map(print_formula).collect();
        write!(f, "{} |- {}", ants.join(", "), print_formula(&self.consequent))
    }
}

pub fn check_sequent<W: Semiring>(
    model: &StochasticModel<W>,
    state: &StateRef,
    seq: &Sequent,
) -> Result<bool> {
    let mut eval = Evaluator::new(model);
    for a in &seq.antecedents {
        if !eval.extension(a)?.contains(state) {
            return Ok(true);
        }
    }
    Ok(eval.extension(&seq.consequent)?.contains(state))
}

/// A model validates a sequent when it holds at every state.
pub fn validates_sequent<W: Semiring>(model: &StochasticModel<W>, seq: &Sequent) -> Result<bool> {
    let mut eval = Evaluator::new(model);
    validates_sequent_with(&mut eval, seq)
}

/// Sequent validation against a shared evaluator, so batches of instances
/// reuse extensions of repeated subformulas.
pub fn validates_sequent_with<W: Semiring>(
    eval: &mut Evaluator<'_, W>,
    seq: &Sequent,
) -> Result<bool> {
    let mut sat = eval.all_states().as_ref().clone();
    for a in &seq.antecedents {
        let e = eval.extension(a)?;
        sat = sat.intersection(&e).cloned().collect();
    }
    let cons = eval.extension(&seq.consequent)?;
    Ok(sat.iter().all(|s| cons.contains(s)))
}

/// The first sequent of the batch the model fails, if any.
pub fn first_failing_sequent<'s, W: Semiring>(
    model: &StochasticModel<W>,
    seqs: &'s [Sequent],
) -> Result<Option<&'s Sequent>> {
    let mut eval = Evaluator::new(model);
    for seq in seqs {
        if !validates_sequent_with(&mut eval, seq)? {
            return Ok(Some(seq));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// axiom schemes and descriptions
// ---------------------------------------------------------------------------

/// The context-monotonicity instances `[e0]phi |- [e1]phi` for all context
/// pairs `e0` contained in `e1`, materialized over the given bodies.
pub fn lambda_instances(scenario: &MeasurementScenario, bodies: &[Formula]) -> Vec<Sequent> {
    let contexts = scenario.all_contexts();
    let mut out = Vec::new();
    for small in &contexts {
        for big in &contexts {
            if !small.iter().all(|m| big.contains(m)) {
                continue;
            }
            for body in bodies {
                out.push(Sequent {
                    antecedents: vec![Formula::nec(&context_label(small), body.clone())],
                    consequent: Formula::nec(&context_label(big), body.clone()),
                });
            }
        }
    }
    out
}

/// Determinacy: for every measurement, some outcome is necessary.
pub fn det_sentence(scenario: &MeasurementScenario) -> Formula {
    let parts = scenario
        .measurements()
        .iter()
        .map(|(m, outs)| {
            Formula::big_or(
                outs.iter()
                    .map(|o| Formula::nec(m, Formula::atom(m, o)))
                    .collect(),
            )
        })
        .collect();
    Formula::big_and(parts)
}

/// The box description: every context possible, perfect correlation on three
/// contexts and anti-correlation on the fourth.
pub fn delta_pr() -> Vec<Formula> {
    let mut out: Vec<Formula> = ["ab", "ab'", "a'b", "a'b'"]
        .iter()
        .map(|e| Formula::pos(e, Formula::Top))
        .collect();
    out.push(Formula::nec("ab", Formula::iff(Formula::atom("a", "0"), Formula::atom("b", "0"))));
    out.push(Formula::nec("ab'", Formula::iff(Formula::atom("a", "0"), Formula::atom("b'", "0"))));
    out.push(Formula::nec("a'b", Formula::iff(Formula::atom("a'", "0"), Formula::atom("b", "0"))));
    out.push(Formula::nec("a'b'", Formula::xor(Formula::atom("a'", "0"), Formula::atom("b'", "0"))));
    out
}

/// The legal (latent-stage) form of the box description.
pub fn delta_pr_prefixed() -> Vec<Formula> {
    delta_pr()
        .into_iter()
        .map(|f| match f {
            Formula::Pos(label, body) => {
                Formula::Pos(LabelPath::single("i"), Box::new(Formula::Pos(label, body)))
            }
            Formula::Nec(label, body) => {
                Formula::Nec(LabelPath::single("i"), Box::new(Formula::Nec(label, body)))
            }
            other => other,
        })
        .collect()
}

/// The partial description of the Hardy model, latent stage included.
pub fn delta_hardy() -> Vec<Formula> {
    let mut out: Vec<Formula> = ["ab", "ab'", "a'b", "a'b'"]
        .iter()
        .map(|e| Formula::pos("i", Formula::pos(e, Formula::Top)))
        .collect();
    out.push(Formula::pos(
        "i",
        Formula::pos("ab", Formula::and(Formula::atom("a", "0"), Formula::atom("b", "0"))),
    ));
    out.push(Formula::nec(
        "i",
        Formula::nec("ab'", Formula::or(Formula::atom("a", "1"), Formula::atom("b'", "1"))),
    ));
    out.push(Formula::nec(
        "i",
        Formula::nec("a'b", Formula::or(Formula::atom("a'", "1"), Formula::atom("b", "1"))),
    ));
    out.push(Formula::nec(
        "i",
        Formula::nec("a'b'", Formula::or(Formula::atom("a'", "0"), Formula::atom("b'", "0"))),
    ));
    out
}

fn boolean_over(f: &Formula, ctx: &[String], scenario: &MeasurementScenario) -> bool {
    match f {
        Formula::Top => true,
        Formula::Atom(m, o) => {
            ctx.contains(m)
                && scenario
                    .outcomes(m)
                    .map(|outs| outs.contains(o))
                    .unwrap_or(false)
        }
        Formula::Not(inner) => boolean_over(inner, ctx, scenario),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Iff(l, r) | Formula::Xor(l, r) => {
            boolean_over(l, ctx, scenario) && boolean_over(r, ctx, scenario)
        }
        _ => false,
    }
}

/// The legal shapes: `[i][e]phi`, `<i><e>phi`, or `P(phi | e∘i) ~ r` with `phi`
/// a Boolean compound over the letters of the context `e`.
pub fn is_legal(f: &Formula, scenario: &MeasurementScenario) -> bool {
    legal_parts(f, scenario).is_some()
}

enum LegalShape<'f> {
    Every(&'f Formula),
    Some(&'f Formula),
    Mass(&'f Formula, CmpOp, &'f BigRational),
}

fn legal_parts<'f>(
    f: &'f Formula,
    scenario: &MeasurementScenario,
) -> Option<(Vec<String>, LegalShape<'f>)> {
    let ctx_of = |label: &LabelPath| -> Option<Vec<String>> {
        match label.0.as_slice() {
            [single] => scenario.context_by_label(single),
            _ => None,
        }
    };
    match f {
        Formula::Nec(i, inner) if i.0 == ["i"] => match inner.as_ref() {
            Formula::Nec(e, body) => {
                let ctx = ctx_of(e)?;
                boolean_over(body, &ctx, scenario).then_some((ctx, LegalShape::Every(body)))
            }
            _ => None,
        },
        Formula::Pos(i, inner) if i.0 == ["i"] => match inner.as_ref() {
            Formula::Pos(e, body) => {
                let ctx = ctx_of(e)?;
                boolean_over(body, &ctx, scenario).then_some((ctx, LegalShape::Some(body)))
            }
            _ => None,
        },
        Formula::Prob { body, label, op, bound } => match label.0.as_slice() {
            [first, rest @ ..] if first == "i" && rest.len() == 1 => {
                let ctx = scenario.context_by_label(&rest[0])?;
                boolean_over(body, &ctx, scenario)
                    .then_some((ctx, LegalShape::Mass(body, *op, bound)))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Truth of a Boolean compound under a joint outcome.
pub fn holds_of(f: &Formula, assignment: &Assignment) -> bool {
    match f {
        Formula::Top => true,
        Formula::Atom(m, o) => assignment.get(m) == Some(o.as_str()),
        Formula::Not(inner) => !holds_of(inner, assignment),
        Formula::And(l, r) => holds_of(l, assignment) && holds_of(r, assignment),
        Formula::Or(l, r) => holds_of(l, assignment) || holds_of(r, assignment),
        Formula::Iff(l, r) => holds_of(l, assignment) == holds_of(r, assignment),
        Formula::Xor(l, r) => holds_of(l, assignment) != holds_of(r, assignment),
        _ => false,
    }
}

/// Whether a legal sentence describes an empirical model: universally over the
/// support, existentially over the support, or by the support mass of its
/// body.
pub fn describes<W: Semiring>(f: &Formula, model: &EmpiricalModel<W>) -> Result<bool> {
    let (ctx, shape) = legal_parts(f, &model.scenario)
        .ok_or_else(|| Error::NotLegal(print_formula(f)))?;
    let table = model.context_table(&ctx)?;
    Ok(match shape {
        LegalShape::Every(body) => table.support().all(|(a, _)| holds_of(body, a)),
        LegalShape::Some(body) => table.support().any(|(a, _)| holds_of(body, a)),
        LegalShape::Mass(body, op, bound) => {
            let mass: BigRational = table
                .support()
                .filter(|(a, _)| holds_of(body, a))
                .map(|(_, w)| w.as_probability())
                .sum();
            match op {
                CmpOp::Lt => mass < *bound,
                CmpOp::Le => mass <= *bound,
                CmpOp::Eq => mass == *bound,
                CmpOp::Ge => mass >= *bound,
                CmpOp::Gt => mass > *bound,
            }
        }
    })
}

pub fn describes_all<W: Semiring>(delta: &[Formula], model: &EmpiricalModel<W>) -> Result<bool> {
    for f in delta {
        if !describes(f, model)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// the characterization harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextualityMode {
    Contextual,
    Strong,
}

#[derive(Debug, Clone)]
pub struct EmpiricalCheck {
    pub name: String,
    pub described: bool,
    /// Contextuality (or strong contextuality) of a described model.
    pub verdict: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ModelCheck {
    pub name: String,
    pub no_signalling: bool,
    pub lambda_ok: bool,
    /// Whether the applicable model validates the characterizing sequent.
    pub validates: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub from_model: String,
    pub root_satisfies_delta: bool,
    pub root_modal_det: bool,
}

#[derive(Debug, Clone)]
pub struct Theorem52Report {
    pub mode: ContextualityMode,
    pub empirical: Vec<EmpiricalCheck>,
    pub lhs_all: bool,
    pub models: Vec<ModelCheck>,
    pub rhs_all: bool,
    pub counterexample: Option<CounterexampleReport>,
    pub consistent: bool,
}

fn delta_bodies(delta: &[Formula]) -> Vec<Formula> {
    let mut bodies = vec![Formula::Top];
    for f in delta {
        let body = match f {
            Formula::Nec(_, inner) | Formula::Pos(_, inner) => match inner.as_ref() {
                Formula::Nec(_, b) | Formula::Pos(_, b) => Some(b.as_ref().clone()),
                _ => None,
            },
            Formula::Prob { body, .. } => Some(body.as_ref().clone()),
            _ => None,
        };
        if let Some(b) = body {
            if !bodies.contains(&b) {
                bodies.push(b);
            }
        }
    }
    bodies
}

/// Cross-checks the two sides of the dynamic-logical characterization on a
/// supplied finite family, exercising the constructive directions: a described
/// non-contextual model must yield a hidden-variable countermodel.
pub fn theorem52_check<W: ScenarioSemiring>(
    scenario: &MeasurementScenario,
    delta: &[Formula],
    mode: ContextualityMode,
    empirical_family: &[(String, EmpiricalModel<W>)],
    model_family: &[(String, StochasticModel<W>)],
) -> Result<Theorem52Report> {
    for ctx in scenario.maximal_contexts() {
        let wanted = Formula::pos("i", Formula::pos(&context_label(ctx), Formula::Top));
        if !delta.contains(&wanted) {
            return Err(Error::HypothesisViolated(context_label(ctx)));
        }
    }

    let mut empirical = Vec::new();
    let mut lhs_all = true;
    let mut countersource: Option<&(String, EmpiricalModel<W>)> = None;
    for entry in empirical_family {
        let (name, model) = entry;
        let described = describes_all(delta, model)?;
        let verdict = if described {
            let v = match mode {
                ContextualityMode::Contextual => is_contextual(model)?,
                ContextualityMode::Strong => is_strongly_contextual(model)?,
            };
            if !v {
                lhs_all = false;
                countersource.get_or_insert(entry);
            }
            Some(v)
        } else {
            None
        };
        empirical.push(EmpiricalCheck {
            name: name.clone(),
            described,
            verdict,
        });
    }

    let det = det_sentence(scenario);
    let sequent = Sequent {
        antecedents: delta.to_vec(),
        consequent: match mode {
            ContextualityMode::Contextual => Formula::not(Formula::nec("i", det.clone())),
            ContextualityMode::Strong => Formula::nec("i", Formula::not(det.clone())),
        },
    };
    let bodies = {
        let mut b = delta_bodies(delta);
        for (m, outs) in scenario.measurements() {
            for o in outs {
                let atom = Formula::atom(m, o);
                if !b.contains(&atom) {
                    b.push(atom);
                }
            }
        }
        b
    };
    let lambda = lambda_instances(scenario, &bodies);

    let mut models = Vec::new();
    let mut rhs_all = true;
    for (name, model) in model_family {
        let table = extract_empirical(model, scenario)?;
        let no_signalling = check_no_signalling(&table).holds;
        let mut eval = Evaluator::new(model);
        let mut lambda_ok = true;
        for seq in &lambda {
            if !validates_sequent_with(&mut eval, seq)? {
                lambda_ok = false;
                break;
            }
        }
        let validates = if no_signalling && lambda_ok {
            let v = validates_sequent_with(&mut eval, &sequent)?;
            if !v {
                rhs_all = false;
            }
            Some(v)
        } else {
            None
        };
        models.push(ModelCheck {
            name: name.clone(),
            no_signalling,
            lambda_ok,
            validates,
        });
    }

    // constructive direction: a described non-contextual model yields a
    // countermodel whose root satisfies the description and the determinacy
    // modality the sequent forbids
    let counterexample = match (lhs_all, countersource) {
        (false, Some((name, source))) => {
            let counter = match mode {
                ContextualityMode::Contextual => {
                    let SectionOutcome::Section(section) = find_global_section(source)? else {
                        return Err(Error::Internal(
                            "non-contextual model lost its section".into(),
                        ));
                    };
                    crate::scenario::build_hv_model(source, &section)?.model
                }
                ContextualityMode::Strong => {
                    let witness = global_support_assignment(source)?.ok_or_else(|| {
                        Error::Internal("non-strongly-contextual model lost its witness".into())
                    })?;
                    crate::scenario::build_weak_hv_model(source, &witness)?
                }
            };
            let mut eval = Evaluator::new(&counter);
            let root = counter.root_state()?;
            let root_satisfies_delta = {
                let mut ok = true;
                for f in delta {
                    if !eval.extension(f)?.contains(&root) {
                        ok = false;
                        break;
                    }
                }
                ok
            };
            let modal_det = match mode {
                ContextualityMode::Contextual => Formula::nec("i", det.clone()),
                ContextualityMode::Strong => Formula::pos("i", det.clone()),
            };
            let root_modal_det = eval.extension(&modal_det)?.contains(&root);
            Some(CounterexampleReport {
                from_model: name.clone(),
                root_satisfies_delta,
                root_modal_det,
            })
        }
        _ => None,
    };

    let consistent = if lhs_all {
        rhs_all
    } else {
        counterexample
            .as_ref()
            .map(|c| c.root_satisfies_delta && c.root_modal_det)
            .unwrap_or(false)
    };

    Ok(Theorem52Report {
        mode,
        empirical,
        lhs_all,
        models,
        rhs_all,
        counterexample,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        canonical_hardy_supports, canonical_hardy_table, canonical_pr_box, empirical_to_model,
        product_demo_box, scenario_222,
    };
    use crate::semiring::NonNegRational;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(d))
    }

    #[test]
    fn box_conjunct_parses_to_the_expected_tree() {
        let parsed = parse_formula("[ab](a=0 <-> b=0)").unwrap();
        let expected = Formula::nec("ab", Formula::iff(Formula::atom("a", "0"), Formula::atom("b", "0")));
        assert_eq!(parsed, expected);
    }

    #[test]
    fn nested_diamonds_parse_and_match_their_boxed_normal_form() {
        let parsed = parse_formula("<i><ab>(a=0 & b=0)").unwrap();
        let body = Formula::and(Formula::atom("a", "0"), Formula::atom("b", "0"));
        assert_eq!(
            parsed,
            Formula::pos("i", Formula::pos("ab", body.clone()))
        );
        // the diamond is evaluated as the not-box-not normal form
        let normal = Formula::not(Formula::nec(
            "i",
            Formula::not(Formula::not(Formula::nec("ab", Formula::not(body)))),
        ));
        let model = empirical_to_model(&canonical_pr_box(), true).unwrap();
        assert_eq!(
            extension(&model, &parsed).unwrap(),
            extension(&model, &normal).unwrap()
        );
    }

    #[test]
    fn probability_atoms_parse_with_exact_bounds() {
        let parsed = parse_formula("P(a=0 | ab) = 1/2").unwrap();
        assert_eq!(
            parsed,
            Formula::Prob {
                body: Box::new(Formula::atom("a", "0")),
                label: LabelPath::single("ab"),
                op: CmpOp::Eq,
                bound: q(1, 2),
            }
        );
    }

    #[test]
    fn label_paths_parse_right_to_left() {
        let parsed = parse_formula("P(a=0 & b=0 | ab\u{2218}i) = 1/2").unwrap();
        let Formula::Prob { label, .. } = &parsed else {
            panic!("probability atom expected")
        };
        assert_eq!(label.0, vec!["i".to_string(), "ab".to_string()]);
        // the dotted spelling parses identically
        assert_eq!(parse_formula("P(a=0 & b=0 | ab.i) = 1/2").unwrap(), parsed);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_formula("[ab](a=0 <-> ?)").unwrap_err();
        assert!(matches!(err, Error::Syntax { position, .. } if position == 13));
    }

    #[test]
    fn printing_then_parsing_fixes_the_verbatim_descriptions() {
        let pr_strings = [
            "<ab>T",
            "<ab'>T",
            "<a'b>T",
            "<a'b'>T",
            "[ab](a=0 <-> b=0)",
            "[ab'](a=0 <-> b'=0)",
            "[a'b](a'=0 <-> b=0)",
            "[a'b'](a'=0 (+) b'=0)",
        ];
        for (text, built) in pr_strings.iter().zip(delta_pr()) {
            assert_eq!(parse_formula(text).unwrap(), built, "{text}");
        }
        let hardy_strings = [
            "<i><ab>T",
            "<i><ab'>T",
            "<i><a'b>T",
            "<i><a'b'>T",
            "<i><ab>(a=0 & b=0)",
            "[i][ab'](a=1 | b'=1)",
            "[i][a'b](a'=1 | b=1)",
            "[i][a'b'](a'=0 | b'=0)",
        ];
        for (text, built) in hardy_strings.iter().zip(delta_hardy()) {
            assert_eq!(parse_formula(text).unwrap(), built, "{text}");
        }
    }

    #[test]
    fn random_trees_round_trip_through_the_printer() {
        let mut rng = crate::random::seeded_rng(42);
        for _ in 0..200 {
            let f = crate::random::random_formula(&mut rng, 4);
            let printed = print_formula(&f);
            let back = parse_formula(&printed)
                .unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(back, f, "{printed}");
        }
    }

    #[test]
    fn top_and_boxed_top_cover_all_states() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        let mut eval = Evaluator::new(&model);
        let all = eval.all_states();
        assert_eq!(eval.extension(&Formula::Top).unwrap(), all);
        assert_eq!(
            eval.extension(&Formula::nec("ab", Formula::Top)).unwrap(),
            all
        );
    }

    #[test]
    fn negation_complements_and_conjunction_intersects() {
        let model = empirical_to_model(&canonical_hardy_table(), false).unwrap();
        let mut eval = Evaluator::new(&model);
        let a0 = Formula::atom("a", "0");
        let b1 = Formula::atom("b", "1");
        let all = eval.all_states();
        let ext_a = eval.extension(&a0).unwrap();
        let ext_not = eval.extension(&Formula::not(a0.clone())).unwrap();
        assert_eq!(
            ext_a.union(&ext_not).cloned().collect::<BTreeSet<_>>(),
            *all
        );
        assert!(ext_a.intersection(&ext_not).next().is_none());
        let ext_b = eval.extension(&b1).unwrap();
        let ext_and = eval.extension(&Formula::and(a0, b1)).unwrap();
        assert_eq!(
            ext_and,
            Rc::new(ext_a.intersection(&ext_b).cloned().collect::<BTreeSet<_>>())
        );
    }

    #[test]
    fn box_root_satisfies_the_correlation_conjunct() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        let root = model.root_state().unwrap();
        let f = parse_formula("[ab](a=0 <-> b=0)").unwrap();
        assert!(extension(&model, &f).unwrap().contains(&root));
    }

    #[test]
    fn box_marginal_probabilities_compare_exactly() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        let root = model.root_state().unwrap();
        let eq = parse_formula("P(a=0 | a) = 1/2").unwrap();
        let gt = parse_formula("P(a=0 | a) > 1/2").unwrap();
        assert!(extension(&model, &eq).unwrap().contains(&root));
        assert!(!extension(&model, &gt).unwrap().contains(&root));
    }

    #[test]
    fn leaf_states_hold_boxes_vacuously_and_are_flagged() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        let mut eval = Evaluator::new(&model);
        let f = Formula::nec("ab", Formula::not(Formula::Top));
        let ext = eval.extension(&f).unwrap();
        let tree = model.initial_tree();
        let leaf = crate::presheaf::StateRef::new(tree.index_of("z_ab").unwrap(), "0,0");
        assert!(ext.contains(&leaf));
        assert!(eval.vacuous.contains(&leaf));
        assert!(!ext.contains(&model.root_state().unwrap()));
    }

    #[test]
    fn unknown_labels_and_letters_error() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        assert!(matches!(
            extension(&model, &Formula::nec("zz", Formula::Top)),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            extension(&model, &Formula::atom("a", "7")),
            Err(Error::UnknownLetter(_))
        ));
    }

    #[test]
    fn box_distribution_axiom_holds() {
        let model = empirical_to_model(&canonical_hardy_table(), true).unwrap();
        let phi = Formula::atom("a", "0");
        let psi = Formula::atom("b", "0");
        let seq = Sequent {
            antecedents: vec![
                Formula::nec("ab", phi.clone()),
                Formula::nec("ab", psi.clone()),
            ],
            consequent: Formula::nec("ab", Formula::and(phi, psi)),
        };
        assert!(validates_sequent(&model, &seq).unwrap());
    }

    #[test]
    fn entire_relations_validate_the_seriality_interchange() {
        let model = empirical_to_model(&canonical_hardy_table(), true).unwrap();
        let seq = Sequent {
            antecedents: vec![Formula::pos("i", Formula::pos("ab", Formula::Top))],
            consequent: Formula::nec("i", Formula::pos("ab", Formula::Top)),
        };
        assert!(validates_sequent(&model, &seq).unwrap());
    }

    #[test]
    fn the_box_validates_its_description_entailing_no_determinacy() {
        let pr = canonical_pr_box();
        let model = empirical_to_model(&pr, false).unwrap();
        let seq = Sequent {
            antecedents: delta_pr(),
            consequent: Formula::not(det_sentence(&pr.scenario)),
        };
        assert!(validates_sequent(&model, &seq).unwrap());
    }

    #[test]
    fn lambda_contains_the_expected_instances() {
        let bodies = [Formula::atom("a", "0")];
        let seqs = lambda_instances(&scenario_222(), &bodies);
        let wanted = Sequent {
            antecedents: vec![Formula::nec("a", Formula::atom("a", "0"))],
            consequent: Formula::nec("ab", Formula::atom("a", "0")),
        };
        assert!(seqs.contains(&wanted));
        // equal pairs give trivial instances
        let trivial = Sequent {
            antecedents: vec![Formula::nec("ab", Formula::atom("a", "0"))],
            consequent: Formula::nec("ab", Formula::atom("a", "0")),
        };
        assert!(seqs.contains(&trivial));

        let triangle = crate::random::scenario_triangle();
        let seqs = lambda_instances(&triangle, &bodies);
        for consequent_label in ["ab", "bc"] {
            let wanted = Sequent {
                antecedents: vec![Formula::nec("b", Formula::atom("a", "0"))],
                consequent: Formula::nec(consequent_label, Formula::atom("a", "0")),
            };
            assert!(seqs.contains(&wanted), "{consequent_label}");
        }
    }

    #[test]
    fn determinacy_of_a_single_binary_measurement() {
        let scenario = crate::scenario::MeasurementScenario::new(
            indexmap::IndexMap::from([(
                "a".to_string(),
                vec!["0".to_string(), "1".to_string()],
            )]),
            vec![vec!["a".to_string()]],
        )
        .unwrap();
        assert_eq!(print_formula(&det_sentence(&scenario)), "[a]a=0 | [a]a=1");
    }

    #[test]
    fn description_builders_end_with_the_displayed_conjuncts() {
        assert_eq!(
            print_formula(&delta_pr()[7]),
            "[a'b'](a'=0 (+) b'=0)"
        );
        assert_eq!(
            print_formula(&delta_hardy()[7]),
            "[i][a'b'](a'=0 | b'=0)"
        );
    }

    #[test]
    fn hardy_description_is_legal_and_describes_both_tables() {
        let table = canonical_hardy_table();
        let supports = canonical_hardy_supports();
        for f in delta_hardy() {
            assert!(is_legal(&f, &table.scenario), "{}", print_formula(&f));
            assert!(describes(&f, &table).unwrap(), "{}", print_formula(&f));
            assert!(describes(&f, &supports).unwrap(), "{}", print_formula(&f));
        }
        // the unprefixed description is not legal
        assert!(!is_legal(&delta_pr()[4], &table.scenario));
        assert!(matches!(
            describes(&delta_pr()[4], &table),
            Err(Error::NotLegal(_))
        ));
    }

    #[test]
    fn vacuous_universal_descriptions_hold_everywhere() {
        let f = parse_formula("[i][ab]T").unwrap();
        assert!(describes(&f, &canonical_pr_box()).unwrap());
        assert!(describes(&f, &canonical_hardy_table()).unwrap());
        assert!(describes(&f, &product_demo_box()).unwrap());
    }

    #[test]
    fn probability_descriptions_sum_the_support_mass() {
        let f = parse_formula("P(a=0 & b=0 | ab\u{2218}i) = 1/2").unwrap();
        assert!(describes(&f, &canonical_pr_box()).unwrap());
        let strict = parse_formula("P(a=0 & b=0 | ab\u{2218}i) > 1/2").unwrap();
        assert!(!describes(&strict, &canonical_pr_box()).unwrap());
    }

    #[test]
    fn characterization_harness_requires_the_nonemptiness_hypothesis() {
        let pr = canonical_pr_box();
        let partial: Vec<Formula> = delta_pr_prefixed().into_iter().skip(1).collect();
        assert!(matches!(
            theorem52_check::<NonNegRational>(
                &pr.scenario,
                &partial,
                ContextualityMode::Strong,
                &[],
                &[]
            ),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn described_non_contextual_models_yield_determinate_countermodels() {
        let product = product_demo_box();
        // the bare nonemptiness description describes every model
        let delta: Vec<Formula> = product
            .scenario
            .maximal_contexts()
            .iter()
            .map(|e| Formula::pos("i", Formula::pos(&crate::scenario::context_label(e), Formula::Top)))
            .collect();
        let staged = empirical_to_model(&product, true).unwrap();
        let report = theorem52_check(
            &product.scenario,
            &delta,
            ContextualityMode::Contextual,
            &[("product".to_string(), product.clone())],
            &[("product-staged".to_string(), staged)],
        )
        .unwrap();
        assert!(!report.lhs_all);
        let counter = report.counterexample.expect("countermodel built");
        assert!(counter.root_satisfies_delta);
        assert!(counter.root_modal_det);
        assert!(report.consistent);
    }

    #[test]
    fn hardy_description_checks_out_in_contextual_mode() {
        let hardy = canonical_hardy_table();
        let staged = empirical_to_model(&hardy, true).unwrap();
        let report = theorem52_check(
            &hardy.scenario,
            &delta_hardy(),
            ContextualityMode::Contextual,
            &[("hardy".to_string(), hardy.clone())],
            &[("hardy-staged".to_string(), staged)],
        )
        .unwrap();
        assert!(report.lhs_all);
        assert!(report.rhs_all);
        assert!(report.consistent);
    }

    #[test]
    fn weak_comparisons_expand_to_their_primitive_pairs() {
        let model = empirical_to_model(&canonical_pr_box(), false).unwrap();
        let le = parse_formula("P(a=0 | a) <= 1/2").unwrap();
        let pair = parse_formula("P(a=0 | a) < 1/2 | P(a=0 | a) = 1/2").unwrap();
        assert_eq!(
            extension(&model, &le).unwrap(),
            extension(&model, &pair).unwrap()
        );
        let ge = parse_formula("P(a=0 | a) >= 1/2").unwrap();
        let root = model.root_state().unwrap();
        assert!(extension(&model, &ge).unwrap().contains(&root));
    }

    #[test]
    fn probability_over_paths_uses_path_composition() {
        let hardy = canonical_hardy_table();
        let model = empirical_to_model(&hardy, true).unwrap();
        let root = model.root_state().unwrap();
        // P(both zero | ab after i) at the root equals the table entry 1/10
        let f = parse_formula("P(a=0 & b=0 | ab\u{2218}i) = 1/10").unwrap();
        assert!(extension(&model, &f).unwrap().contains(&root));
    }
}
