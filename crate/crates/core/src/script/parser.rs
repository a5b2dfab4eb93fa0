//! Lexer, parser and canonical printer for task scripts.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::protocols::BUILTIN_PROTOCOLS;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    UnknownIdentifier,
    ArityMismatch,
    Rebinding,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::ArityMismatch => "arity mismatch",
            ParseErrorKind::Rebinding => "rebinding",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
    pub message: String,
    /// Tokens that would have been accepted; empty for non-syntax errors.
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected one of: {})", expected.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    BellBasis(u64),
    GesBasis(u64),
    Ghz3Basis,
    Ghz4Basis,
    States(Vec<String>),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::BellBasis(d) => write!(f, "bell_basis({d})"),
            Family::GesBasis(d) => write!(f, "ges_basis({d})"),
            Family::Ghz3Basis => f.write_str("ghz3_basis"),
            Family::Ghz4Basis => f.write_str("ghz4_basis"),
            Family::States(names) => write!(f, "states[{}]", names.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CutSpec {
    Parties {
        left: Vec<String>,
        right: Vec<String>,
    },
    Auto,
    All,
}

impl fmt::Display for CutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutSpec::Parties { left, right } => write!(f, "{}:{}", left.join(","), right.join(",")),
            CutSpec::Auto => f.write_str("auto"),
            CutSpec::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Set { name: String, family: Family },
    Task { name: String, set: String, k: u64 },
    Simulate { task: String, protocol: String },
    Certify { task: String, cut: CutSpec },
}

impl fmt::Display for StmtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StmtKind::Set { name, family } => write!(f, "set {name} = {family}"),
            StmtKind::Task { name, set, k } => write!(f, "task {name} = subset({set}, k={k})"),
            StmtKind::Simulate { task, protocol } => {
                write!(f, "simulate {task} protocol {protocol}")
            }
            StmtKind::Certify { task, cut } => write!(f, "certify {task} cut {cut}"),
        }
    }
}

/// A statement and where it starts. Equality ignores the span.
#[derive(Debug, Clone, Eq)]
pub struct Statement {
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Statement {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub statements: Vec<Statement>,
}

/// Canonical text: one statement per line.
pub fn serialize(script: &Script) -> String {
    script
        .statements
        .iter()
        .map(|s| format!("{}\n", s.kind))
        .collect()
}

const RESERVED: [&str; 15] = [
    "set",
    "task",
    "simulate",
    "certify",
    "subset",
    "protocol",
    "cut",
    "auto",
    "all",
    "k",
    "bell_basis",
    "ges_basis",
    "ghz3_basis",
    "ghz4_basis",
    "states",
];

/// A state name accepted inside `states[...]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateName {
    /// `B1`..`B4`
    Bell(usize),
    /// `G1`..`G8`
    Ghz3(usize),
    /// `G4_1`..`G4_16`
    Ghz4(usize),
    /// `W{d}_{a}_{b}`, with `2 <= d <= 16`
    Weyl { d: usize, a: usize, b: usize },
    /// `K` followed by 2 to 8 bits: a computational basis ket on qubits A, B, ...
    Ket { bits: u8, len: usize },
}

pub const MAX_WEYL_DIM: usize = 16;
pub const MAX_KET_BITS: usize = 8;

impl StateName {
    pub fn parse(name: &str) -> Option<StateName> {
        let small = |s: &str| -> Option<usize> {
            if s.is_empty() || s.len() > 3 || !s.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            if s.len() > 1 && s.starts_with('0') {
                return None;
            }
            s.parse().ok()
        };
        if let Some(rest) = name.strip_prefix("G4_") {
            return small(rest)
                .filter(|i| (1..=16).contains(i))
                .map(StateName::Ghz4);
        }
        if let Some(rest) = name.strip_prefix('B') {
            return small(rest)
                .filter(|i| (1..=4).contains(i))
                .map(StateName::Bell);
        }
        if let Some(rest) = name.strip_prefix('G') {
            return small(rest)
                .filter(|i| (1..=8).contains(i))
                .map(StateName::Ghz3);
        }
        if let Some(rest) = name.strip_prefix('W') {
            let mut parts = rest.split('_');
            let (d, a, b) = (parts.next()?, parts.next()?, parts.next()?);
            if parts.next().is_some() {
                return None;
            }
            let (d, a, b) = (small(d)?, small(a)?, small(b)?);
            return ((2..=MAX_WEYL_DIM).contains(&d) && a < d && b < d)
                .then_some(StateName::Weyl { d, a, b });
        }
        if let Some(rest) = name.strip_prefix('K') {
            let len = rest.len();
            if !(2..=MAX_KET_BITS).contains(&len) || !rest.bytes().all(|b| b == b'0' || b == b'1') {
                return None;
            }
            let bits = u8::from_str_radix(rest, 2).ok()?;
            return Some(StateName::Ket { bits, len });
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Eq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(n) => format!("integer {n}"),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Eq => "=",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let span = Span { line, column };
        let mut advance = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            advance(&mut chars);
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                advance(&mut chars);
            }
            continue;
        }
        let single = match c {
            '=' => Some(Tok::Eq),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = single {
            advance(&mut chars);
            out.push(Token { tok, span });
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while chars
                .peek()
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_')
            {
                s.push(advance(&mut chars).unwrap());
            }
            if !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(lexical(span, format!("malformed number '{s}'")));
            }
            let n = s
                .parse::<u64>()
                .map_err(|_| lexical(span, format!("integer literal {s} is too large")))?;
            out.push(Token {
                tok: Tok::Int(n),
                span,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while chars
                .peek()
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_')
            {
                s.push(advance(&mut chars).unwrap());
            }
            out.push(Token {
                tok: Tok::Ident(s),
                span,
            });
        } else {
            return Err(lexical(span, format!("unexpected character {c:?}")));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, column },
    });
    Ok(out)
}

fn lexical(span: Span, message: String) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Lexical,
        span,
        message,
        expected: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binding {
    Set,
    Task,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    env: HashMap<String, Binding>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: ParseErrorKind, span: Span, message: String) -> ParseError {
        ParseError {
            kind,
            span,
            message,
            expected: Vec::new(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            kind: ParseErrorKind::Syntax,
            span: t.span,
            message: format!("unexpected {}", t.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump().span)
        } else {
            let want = format!("'{}'", tok.symbol());
            Err(self.unexpected(&[&want]))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[&format!("'{kw}'")]))
        }
    }

    /// Any identifier that is not a reserved word.
    fn name(&mut self) -> Result<(String, Span), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected(&["NAME"])),
        }
    }

    fn int(&mut self) -> Result<u64, ParseError> {
        match self.peek().tok {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected(&["INT"])),
        }
    }

    fn bind(&mut self, name: &str, span: Span, b: Binding) -> Result<(), ParseError> {
        if self.env.contains_key(name) {
            return Err(self.error(
                ParseErrorKind::Rebinding,
                span,
                format!("'{name}' is already bound"),
            ));
        }
        self.env.insert(name.to_string(), b);
        Ok(())
    }

    fn lookup(&self, name: &str, span: Span, want: Binding) -> Result<(), ParseError> {
        let noun = |b: Binding| match b {
            Binding::Set => "set",
            Binding::Task => "task",
        };
        match self.env.get(name) {
            Some(&b) if b == want => Ok(()),
            Some(&b) => Err(self.error(
                ParseErrorKind::UnknownIdentifier,
                span,
                format!("'{name}' is a {}, expected a {}", noun(b), noun(want)),
            )),
            None => Err(self.error(
                ParseErrorKind::UnknownIdentifier,
                span,
                format!("undeclared {} '{name}'", noun(want)),
            )),
        }
    }

    fn arity(&self, what: &str, expected: usize, got: &str, span: Span) -> ParseError {
        let plural = if expected == 1 { "" } else { "s" };
        self.error(
            ParseErrorKind::ArityMismatch,
            span,
            format!("{what} takes {expected} argument{plural}, got {got}"),
        )
    }

    fn script(&mut self) -> Result<Script, ParseError> {
        let mut statements = Vec::new();
        while self.peek().tok != Tok::Eof {
            statements.push(self.statement()?);
        }
        Ok(Script { statements })
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let span = self.peek().span;
        let kind = match &self.peek().tok {
            Tok::Ident(s) if s == "set" => self.set_decl()?,
            Tok::Ident(s) if s == "task" => self.task_decl()?,
            Tok::Ident(s) if s == "simulate" => self.simulate()?,
            Tok::Ident(s) if s == "certify" => self.certify()?,
            _ => {
                return Err(self.unexpected(&["'set'", "'task'", "'simulate'", "'certify'"]));
            }
        };
        Ok(Statement { kind, span })
    }

    fn set_decl(&mut self) -> Result<StmtKind, ParseError> {
        self.bump();
        let (name, span) = self.name()?;
        self.bind(&name, span, Binding::Set)?;
        self.expect(Tok::Eq)?;
        let family = self.family()?;
        Ok(StmtKind::Set { name, family })
    }

    fn family(&mut self) -> Result<Family, ParseError> {
        let Tok::Ident(head) = self.peek().tok.clone() else {
            return Err(self.unexpected(&FAMILIES));
        };
        let span = self.peek().span;
        match head.as_str() {
            "bell_basis" | "ges_basis" => {
                self.bump();
                self.expect(Tok::LParen)?;
                if self.peek().tok == Tok::RParen {
                    return Err(self.arity(&head, 1, "0", span));
                }
                let d = self.int()?;
                if self.peek().tok == Tok::Comma {
                    return Err(self.arity(&head, 1, "more", span));
                }
                self.expect(Tok::RParen)?;
                Ok(if head == "bell_basis" {
                    Family::BellBasis(d)
                } else {
                    Family::GesBasis(d)
                })
            }
            "ghz3_basis" | "ghz4_basis" => {
                self.bump();
                if self.peek().tok == Tok::LParen {
                    self.bump();
                    if self.peek().tok != Tok::RParen {
                        return Err(self.arity(&head, 0, "at least 1", span));
                    }
                    self.bump();
                }
                Ok(if head == "ghz3_basis" {
                    Family::Ghz3Basis
                } else {
                    Family::Ghz4Basis
                })
            }
            "states" => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let mut names = vec![self.state_name()?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    names.push(self.state_name()?);
                }
                self.expect(Tok::RBracket)?;
                Ok(Family::States(names))
            }
            _ => Err(self.unexpected(&FAMILIES)),
        }
    }

    fn state_name(&mut self) -> Result<String, ParseError> {
        let (name, span) = self.name()?;
        if StateName::parse(&name).is_none() {
            return Err(self.error(
                ParseErrorKind::UnknownIdentifier,
                span,
                format!("unknown state '{name}'"),
            ));
        }
        Ok(name)
    }

    fn task_decl(&mut self) -> Result<StmtKind, ParseError> {
        self.bump();
        let (name, span) = self.name()?;
        self.bind(&name, span, Binding::Task)?;
        self.expect(Tok::Eq)?;
        let head = self.keyword("subset")?;
        self.expect(Tok::LParen)?;
        if self.peek().tok == Tok::RParen {
            return Err(self.arity("subset", 2, "0", head));
        }
        let (set, set_span) = self.name()?;
        self.lookup(&set, set_span, Binding::Set)?;
        if self.peek().tok == Tok::RParen {
            return Err(self.arity("subset", 2, "1", head));
        }
        self.expect(Tok::Comma)?;
        self.keyword("k")?;
        self.expect(Tok::Eq)?;
        let k = self.int()?;
        if self.peek().tok == Tok::Comma {
            return Err(self.arity("subset", 2, "more", head));
        }
        self.expect(Tok::RParen)?;
        Ok(StmtKind::Task { name, set, k })
    }

    fn simulate(&mut self) -> Result<StmtKind, ParseError> {
        self.bump();
        let (task, span) = self.name()?;
        self.lookup(&task, span, Binding::Task)?;
        self.keyword("protocol")?;
        let (protocol, span) = self.name()?;
        if !BUILTIN_PROTOCOLS.contains(&protocol.as_str()) {
            return Err(self.error(
                ParseErrorKind::UnknownIdentifier,
                span,
                format!(
                    "unknown protocol '{protocol}' (known: {})",
                    BUILTIN_PROTOCOLS.join(", ")
                ),
            ));
        }
        Ok(StmtKind::Simulate { task, protocol })
    }

    fn certify(&mut self) -> Result<StmtKind, ParseError> {
        self.bump();
        let (task, span) = self.name()?;
        self.lookup(&task, span, Binding::Task)?;
        self.keyword("cut")?;
        let cut = if self.at_keyword("auto") {
            self.bump();
            CutSpec::Auto
        } else if self.at_keyword("all") {
            self.bump();
            CutSpec::All
        } else {
            if !matches!(&self.peek().tok, Tok::Ident(s) if !RESERVED.contains(&s.as_str())) {
                return Err(self.unexpected(&["NAME", "'auto'", "'all'"]));
            }
            let left = self.party_list()?;
            self.expect(Tok::Colon)?;
            let right = self.party_list()?;
            CutSpec::Parties { left, right }
        };
        Ok(StmtKind::Certify { task, cut })
    }

    fn party_list(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = vec![self.name()?.0];
        while self.peek().tok == Tok::Comma {
            self.bump();
            out.push(self.name()?.0);
        }
        Ok(out)
    }
}

const FAMILIES: [&str; 5] = [
    "'bell_basis'",
    "'ges_basis'",
    "'ghz3_basis'",
    "'ghz4_basis'",
    "'states'",
];

/// Parses a script, reporting the first error.
pub fn parse(text: &str) -> Result<Script, ParseError> {
    let tokens = lex(text)?;
    Parser {
        tokens,
        pos: 0,
        env: HashMap::new(),
    }
    .script()
}
