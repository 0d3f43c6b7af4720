//! Parameter Value Language reader for PDS3 labels.
//!
//! Only the subset that shows up in MSL mast-camera labels is accepted:
//! `KEY = value` statements, quoted strings, single-quoted literals, integers
//! (including `base#digits#` radix form), reals, `<unit>` annotations,
//! parenthesized sequences, brace sets, `OBJECT`/`GROUP` blocks, `/* */`
//! comments, `^POINTER` keys and the terminal `END`. Anything after `END` is
//! ignored so attached labels (label + binary payload) can be fed directly.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// A single PVL value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Integer { value: i64, unit: Option<String> },
    Real { value: f64, unit: Option<String> },
    /// Double-quoted text.
    Text(String),
    /// Unquoted token or single-quoted literal.
    Symbol(String),
    Sequence(Vec<Value>),
    Set(Vec<Value>),
    Block(Block),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Object,
    Group,
}

impl BlockKind {
    fn keyword(self) -> &'static str {
        match self {
            BlockKind::Object => "OBJECT",
            BlockKind::Group => "GROUP",
        }
    }
}

/// An `OBJECT` or `GROUP` with its nested statements.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub tree: LabelTree,
}

impl Value {
    /// Numeric view of integers and reals, with the attached unit.
    pub fn as_number(&self) -> Option<(f64, Option<&str>)> {
        match self {
            Value::Integer { value, unit } => Some((*value as f64, unit.as_deref())),
            Value::Real { value, unit } => Some((*value, unit.as_deref())),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Value::Integer { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// Text of a quoted string or symbol.
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) | Value::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&[Value]> {
        match self {
            Value::Sequence(v) | Value::Set(v) => Some(v),
            _ => None,
        }
    }
}

/// Ordered keyword → value mapping for one nesting level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTree {
    entries: IndexMap<String, Value>,
}

impl LabelTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Direct child lookup at this level.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    /// Lookup by dotted path through nested blocks, e.g.
    /// `SITE_DERIVED_GEOMETRY_PARMS.FIXED_INSTRUMENT_AZIMUTH`.
    pub fn lookup(&self, path: &str) -> Option<&Value> {
        let mut tree = self;
        let mut parts = path.split('.').peekable();
        while let Some(part) = parts.next() {
            let value = tree.entries.get(part)?;
            if parts.peek().is_none() {
                return Some(value);
            }
            match value {
                Value::Block(block) => tree = &block.tree,
                _ => return None,
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Inserts or replaces; a replaced key keeps its original position.
    /// Returns the previous value if the key existed.
    pub fn insert(&mut self, key: impl Into<String>, value: Value) -> Option<Value> {
        self.entries.insert(key.into(), value)
    }

    /// Canonical PVL text; parsing the result yields an equal tree.
    pub fn to_pvl_string(&self) -> String {
        let mut out = String::new();
        write_tree(&mut out, self, 0);
        out.push_str("END\n");
        out
    }
}

fn write_tree(out: &mut String, tree: &LabelTree, depth: usize) {
    let indent = "  ".repeat(depth);
    for (key, value) in &tree.entries {
        match value {
            Value::Block(block) => {
                let kw = block.kind.keyword();
                out.push_str(&format!("{indent}{kw} = {key}\n"));
                write_tree(out, &block.tree, depth + 1);
                out.push_str(&format!("{indent}END_{kw} = {key}\n"));
            }
            other => {
                out.push_str(&format!("{indent}{key} = "));
                write_value(out, other);
                out.push('\n');
            }
        }
    }
}

fn write_unit(out: &mut String, unit: &Option<String>) {
    if let Some(u) = unit {
        out.push_str(&format!(" <{u}>"));
    }
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Integer { value, unit } => {
            out.push_str(&value.to_string());
            write_unit(out, unit);
        }
        Value::Real { value, unit } => {
            // Debug formatting always carries a '.' or exponent and round-trips.
            out.push_str(&format!("{value:?}"));
            write_unit(out, unit);
        }
        Value::Text(s) => {
            out.push('"');
            out.push_str(s);
            out.push('"');
        }
        Value::Symbol(s) => {
            if is_bare_symbol(s) {
                out.push_str(s);
            } else {
                out.push('\'');
                out.push_str(s);
                out.push('\'');
            }
        }
        Value::Sequence(items) | Value::Set(items) => {
            let (open, close) = if matches!(value, Value::Sequence(_)) {
                ('(', ')')
            } else {
                ('{', '}')
            };
            out.push(open);
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item);
            }
            out.push(close);
        }
        Value::Block(_) => unreachable!("blocks are written as statements"),
    }
}

fn is_bare_symbol(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| !is_delimiter(c))
        && !s.contains("/*")
        && classify_number(s).is_none()
}

/// How repeated keywords at one nesting level are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// Keep the last value and record a warning.
    #[default]
    LastWins,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PvlWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for PvlWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// A parsed label together with any non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PvlDocument {
    pub tree: LabelTree,
    pub warnings: Vec<PvlWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PvlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unterminated {what} starting at {line}:{column}")]
    Unterminated {
        what: &'static str,
        line: usize,
        column: usize,
    },
    #[error("duplicate keyword {key} at {line}:{column}")]
    DuplicateKeyword {
        key: String,
        line: usize,
        column: usize,
    },
}

/// Parses with the default duplicate policy (last wins), discarding warnings.
pub fn parse_pvl(text: &str) -> Result<LabelTree, PvlError> {
    parse_pvl_with(text, DuplicatePolicy::LastWins).map(|doc| doc.tree)
}

pub fn parse_pvl_with(text: &str, duplicates: DuplicatePolicy) -> Result<PvlDocument, PvlError> {
    let mut parser = Parser {
        cursor: Cursor::new(text),
        duplicates,
        warnings: Vec::new(),
    };
    let tree = parser.parse_document()?;
    Ok(PvlDocument {
        tree,
        warnings: parser.warnings,
    })
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, ',' | '(' | ')' | '{' | '}' | '<' | '>' | '=' | '"' | '\'' | ';')
}

fn is_keyword_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '^')
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

struct Cursor<'a> {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        let src_trimmed = src.strip_prefix('\u{feff}').unwrap_or(src);
        Self {
            chars: src_trimmed.chars().collect(),
            idx: 0,
            line: 1,
            column: 1,
            _src: src,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.idx + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn at_eof(&self) -> bool {
        self.idx >= self.chars.len()
    }

    /// Skips whitespace and comments.
    fn skip_trivia(&mut self) -> Result<(), PvlError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let start = self.pos();
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(PvlError::Unterminated {
                                    what: "comment",
                                    line: start.line,
                                    column: start.column,
                                })
                            }
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn syntax(&self, pos: Pos, message: impl Into<String>) -> PvlError {
        PvlError::Syntax {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }

    fn raw_token(&mut self) -> String {
        let mut tok = String::new();
        while let Some(c) = self.peek() {
            if is_delimiter(c) || (c == '/' && self.peek_at(1) == Some('*')) {
                break;
            }
            tok.push(c);
            self.bump();
        }
        tok
    }
}

enum Statement {
    Assign { key: String, pos: Pos, value: Value },
    BeginBlock { kind: BlockKind, name: String, pos: Pos },
    EndBlock { kind: BlockKind, name: Option<String>, pos: Pos },
    End,
}

struct Parser<'a> {
    cursor: Cursor<'a>,
    duplicates: DuplicatePolicy,
    warnings: Vec<PvlWarning>,
}

struct OpenBlock {
    kind: BlockKind,
    name: String,
    pos: Pos,
    tree: LabelTree,
}

impl Parser<'_> {
    fn parse_document(&mut self) -> Result<LabelTree, PvlError> {
        let mut stack: Vec<OpenBlock> = Vec::new();
        let mut root = LabelTree::new();
        loop {
            let stmt = match self.statement()? {
                Some(stmt) => stmt,
                None => break,
            };
            match stmt {
                Statement::End => break,
                Statement::Assign { key, pos, value } => {
                    let tree = stack.last_mut().map(|b| &mut b.tree).unwrap_or(&mut root);
                    self.insert(tree, key, value, pos)?;
                }
                Statement::BeginBlock { kind, name, pos } => stack.push(OpenBlock {
                    kind,
                    name,
                    pos,
                    tree: LabelTree::new(),
                }),
                Statement::EndBlock { kind, name, pos } => {
                    let open = stack.pop().ok_or_else(|| {
                        self.cursor
                            .syntax(pos, format!("END_{} without matching {}", kind.keyword(), kind.keyword()))
                    })?;
                    if open.kind != kind {
                        return Err(self.cursor.syntax(
                            pos,
                            format!(
                                "END_{} closes {} {} opened at line {}",
                                kind.keyword(),
                                open.kind.keyword(),
                                open.name,
                                open.pos.line
                            ),
                        ));
                    }
                    if let Some(name) = name {
                        if name != open.name {
                            return Err(self.cursor.syntax(
                                pos,
                                format!("END_{} = {name} does not match {}", kind.keyword(), open.name),
                            ));
                        }
                    }
                    let value = Value::Block(Block {
                        kind: open.kind,
                        tree: open.tree,
                    });
                    let parent = stack.last_mut().map(|b| &mut b.tree).unwrap_or(&mut root);
                    self.insert(parent, open.name, value, open.pos)?;
                }
            }
        }
        if let Some(open) = stack.pop() {
            return Err(PvlError::Unterminated {
                what: if open.kind == BlockKind::Object { "OBJECT" } else { "GROUP" },
                line: open.pos.line,
                column: open.pos.column,
            });
        }
        Ok(root)
    }

    fn insert(&mut self, tree: &mut LabelTree, key: String, value: Value, pos: Pos) -> Result<(), PvlError> {
        if tree.get(&key).is_some() {
            match self.duplicates {
                DuplicatePolicy::Reject => {
                    return Err(PvlError::DuplicateKeyword {
                        key,
                        line: pos.line,
                        column: pos.column,
                    })
                }
                DuplicatePolicy::LastWins => self.warnings.push(PvlWarning {
                    line: pos.line,
                    message: format!("duplicate keyword {key}; keeping the last value"),
                }),
            }
        }
        tree.insert(key, value);
        Ok(())
    }

    fn statement(&mut self) -> Result<Option<Statement>, PvlError> {
        let c = &mut self.cursor;
        c.skip_trivia()?;
        if c.at_eof() {
            return Ok(None);
        }
        let pos = c.pos();
        let mut key = String::new();
        while let Some(ch) = c.peek() {
            if !is_keyword_char(ch) {
                break;
            }
            key.push(ch);
            c.bump();
        }
        if key.is_empty() {
            let found = c.peek().unwrap_or(' ');
            return Err(c.syntax(pos, format!("expected a keyword, found '{found}'")));
        }
        let upper = key.to_ascii_uppercase();
        c.skip_trivia()?;
        let has_eq = c.peek() == Some('=');

        if upper == "END" && !has_eq {
            return Ok(Some(Statement::End));
        }
        let block_end = match upper.as_str() {
            "END_OBJECT" => Some(BlockKind::Object),
            "END_GROUP" => Some(BlockKind::Group),
            _ => None,
        };
        if let Some(kind) = block_end {
            let name = if has_eq {
                c.bump();
                c.skip_trivia()?;
                let name_pos = c.pos();
                let name = c.raw_token();
                if name.is_empty() {
                    return Err(c.syntax(name_pos, "expected block name"));
                }
                Some(name)
            } else {
                None
            };
            return Ok(Some(Statement::EndBlock { kind, name, pos }));
        }
        if !has_eq {
            return Err(c.syntax(c.pos(), format!("expected '=' after {key}")));
        }
        c.bump();
        c.skip_trivia()?;

        let block_begin = match upper.as_str() {
            "OBJECT" | "BEGIN_OBJECT" => Some(BlockKind::Object),
            "GROUP" | "BEGIN_GROUP" => Some(BlockKind::Group),
            _ => None,
        };
        if let Some(kind) = block_begin {
            let name_pos = c.pos();
            let name = c.raw_token();
            if name.is_empty() {
                return Err(c.syntax(name_pos, "expected block name"));
            }
            return Ok(Some(Statement::BeginBlock { kind, name, pos }));
        }

        let value = self.value()?;
        Ok(Some(Statement::Assign { key, pos, value }))
    }

    fn value(&mut self) -> Result<Value, PvlError> {
        let c = &mut self.cursor;
        c.skip_trivia()?;
        let pos = c.pos();
        match c.peek() {
            None => Err(c.syntax(pos, "expected a value, found end of input")),
            Some('(') => self.collection(')').map(Value::Sequence),
            Some('{') => self.collection('}').map(Value::Set),
            Some(q @ ('"' | '\'')) => {
                c.bump();
                let mut s = String::new();
                loop {
                    match c.bump() {
                        None => {
                            return Err(PvlError::Unterminated {
                                what: "string",
                                line: pos.line,
                                column: pos.column,
                            })
                        }
                        Some(ch) if ch == q => break,
                        Some('\r') if c.peek() == Some('\n') => {}
                        Some(ch) => s.push(ch),
                    }
                }
                Ok(if q == '"' { Value::Text(s) } else { Value::Symbol(s) })
            }
            Some(ch) if is_delimiter(ch) => Err(c.syntax(pos, format!("unexpected '{ch}'"))),
            Some(_) => {
                let tok = c.raw_token();
                match classify_number(&tok) {
                    Some(num) => {
                        let unit = self.unit()?;
                        Ok(match num {
                            Number::Int(value) => Value::Integer { value, unit },
                            Number::Real(value) => Value::Real { value, unit },
                        })
                    }
                    None => Ok(Value::Symbol(tok)),
                }
            }
        }
    }

    fn unit(&mut self) -> Result<Option<String>, PvlError> {
        let c = &mut self.cursor;
        c.skip_trivia()?;
        if c.peek() != Some('<') {
            return Ok(None);
        }
        let pos = c.pos();
        c.bump();
        let mut unit = String::new();
        loop {
            match c.bump() {
                None => {
                    return Err(PvlError::Unterminated {
                        what: "unit",
                        line: pos.line,
                        column: pos.column,
                    })
                }
                Some('>') => break,
                Some(ch) => unit.push(ch),
            }
        }
        let unit = unit.trim().to_string();
        if unit.is_empty() {
            return Err(c.syntax(pos, "empty unit annotation"));
        }
        Ok(Some(unit))
    }

    fn collection(&mut self, close: char) -> Result<Vec<Value>, PvlError> {
        let start = self.cursor.pos();
        self.cursor.bump();
        let mut items = Vec::new();
        let unterminated = |pos: Pos| PvlError::Unterminated {
            what: if close == ')' { "sequence" } else { "set" },
            line: pos.line,
            column: pos.column,
        };
        self.cursor.skip_trivia()?;
        if self.cursor.peek() == Some(close) {
            self.cursor.bump();
            return Ok(items);
        }
        loop {
            self.cursor.skip_trivia()?;
            if self.cursor.at_eof() {
                return Err(unterminated(start));
            }
            items.push(self.value()?);
            self.cursor.skip_trivia()?;
            let pos = self.cursor.pos();
            match self.cursor.peek() {
                Some(',') => {
                    self.cursor.bump();
                }
                Some(ch) if ch == close => {
                    self.cursor.bump();
                    return Ok(items);
                }
                None => return Err(unterminated(start)),
                Some(ch) => {
                    return Err(self
                        .cursor
                        .syntax(pos, format!("expected ',' or '{close}', found '{ch}'")))
                }
            }
        }
    }
}

enum Number {
    Int(i64),
    Real(f64),
}

fn classify_number(tok: &str) -> Option<Number> {
    let (neg, body) = match tok.as_bytes().first()? {
        b'-' => (true, &tok[1..]),
        b'+' => (false, &tok[1..]),
        _ => (false, tok),
    };
    if body.is_empty() {
        return None;
    }
    // Radix form: base#digits#
    if let Some((base, rest)) = body.split_once('#') {
        let digits = rest.strip_suffix('#')?;
        let base: u32 = base.parse().ok()?;
        if !(2..=16).contains(&base) || digits.is_empty() {
            return None;
        }
        let v = i64::from_str_radix(digits, base).ok()?;
        return Some(Number::Int(if neg { -v } else { v }));
    }
    let bytes = body.as_bytes();
    if !(bytes[0].is_ascii_digit() || (bytes[0] == b'.' && bytes.len() > 1 && bytes[1].is_ascii_digit())) {
        return None;
    }
    if bytes.iter().all(u8::is_ascii_digit) {
        return tok.parse::<i64>().ok().map(Number::Int);
    }
    // Restrict to plain decimal/exponent syntax so dates and identifiers stay symbols.
    let valid = bytes
        .iter()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'));
    if !valid {
        return None;
    }
    let v: f64 = tok.parse().ok()?;
    v.is_finite().then_some(Number::Real(v))
}
