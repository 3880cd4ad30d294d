//! Text form of pulse programs.
//!
//! ```text
//! # pump one arm, then reset
//! repeat 40 {
//!     mw (0,+1) -> (-1,+1) 1.0pi
//!     rf (-1,+1) -> (-1,0) 0.5pi rabi 0.02
//!     laser 0.25us
//!     readout norm
//! }
//! ```
//!
//! Statements are `mw`/`rf` pulses (levels, an angle, optional `rabi` and
//! `offset` trailers), `laser` with a duration, `repeat n { ... }` blocks
//! and named `readout` markers; `#` starts a comment. Angles are written
//! as multiples of pi (`1.0pi`, `0.5pi`) whenever that reproduces the
//! stored value bit for bit, and in radians (`1.2rad`) otherwise, so
//! formatting followed by parsing is the identity. Durations take `us` or
//! `ns` and are stored in microseconds. Laser text pins only the duration;
//! rate, bias and efficiency stay at their defaults until a run
//! configuration stamps them. A program that is a single top-level
//! `repeat` keeps its count as such; any other `repeat` is unrolled.

use std::f64::consts::PI;

use crate::error::Error;
use crate::protocol::{is_marker_label, ProtocolProgram, PulseInstruction};
use crate::spin::{Channel, Level, OpticalParams, Transition};
use crate::Result;

/// Unrolling `repeat` blocks must not expand a program past this many steps.
const MAX_UNROLLED_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Word(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    LBrace,
    RBrace,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-')
}

fn lex(text: &str) -> Result<(Vec<Token>, (usize, usize))> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                column = 1;
                i += 1;
            }
            c if c.is_whitespace() => {
                column += 1;
                i += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    column += 1;
                }
            }
            '(' | ')' | ',' | '{' | '}' => {
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    ',' => TokenKind::Comma,
                    '{' => TokenKind::LBrace,
                    _ => TokenKind::RBrace,
                };
                tokens.push(Token { kind, line, column });
                column += 1;
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                tokens.push(Token {
                    kind: TokenKind::Arrow,
                    line,
                    column,
                });
                column += 2;
                i += 2;
            }
            c if is_word_char(c) => {
                let (start_line, start_column) = (line, column);
                let mut word = String::new();
                while i < chars.len() && is_word_char(chars[i]) {
                    if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                        break;
                    }
                    word.push(chars[i]);
                    column += 1;
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Word(word),
                    line: start_line,
                    column: start_column,
                });
            }
            other => {
                return Err(parse_error(
                    line,
                    column,
                    format!("unexpected character '{other}'"),
                ));
            }
        }
    }
    Ok((tokens, (line, column)))
}

/// Parsed statement before repeat blocks are resolved.
#[derive(Debug, Clone)]
enum Item {
    Step(PulseInstruction),
    Repeat {
        count: usize,
        body: Vec<Item>,
        line: usize,
        column: usize,
    },
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.column))
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        parse_error(line, column, message)
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Token> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.next().unwrap()),
            Some(t) => Err(parse_error(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.kind)),
            )),
            None => Err(self.error_here(format!("expected {what}, found end of program"))),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.next() {
            Some(Token {
                kind: TokenKind::Word(w),
                line,
                column,
            }) => Ok((w, line, column)),
            Some(t) => Err(parse_error(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.kind)),
            )),
            None => Err(self.error_here(format!("expected {what}, found end of program"))),
        }
    }

    fn projection(&mut self) -> Result<i8> {
        let (w, line, column) = self.word("a spin projection (-1, 0 or +1)")?;
        w.parse::<i8>()
            .ok()
            .filter(|m| (-1..=1).contains(m))
            .ok_or_else(|| {
                parse_error(
                    line,
                    column,
                    format!("'{w}' is not a spin projection (-1, 0 or +1)"),
                )
            })
    }

    fn level(&mut self) -> Result<(Level, usize, usize)> {
        let open = self.expect(TokenKind::LParen, "'(' to open a level")?;
        let m_s = self.projection()?;
        self.expect(TokenKind::Comma, "',' between the projections")?;
        let m_i = self.projection()?;
        self.expect(TokenKind::RParen, "')' to close the level")?;
        let level = Level::new(m_s, m_i)
            .map_err(|e| parse_error(open.line, open.column, e.to_string()))?;
        Ok((level, open.line, open.column))
    }

    fn angle(&mut self) -> Result<f64> {
        let (w, line, column) = self.word("an angle like pi, 0.5pi or 1.2rad")?;
        let value = if w == "pi" {
            Some(PI)
        } else if let Some(prefix) = w.strip_suffix("pi") {
            prefix.parse::<f64>().ok().map(|r| r * PI)
        } else if let Some(prefix) = w.strip_suffix("rad") {
            prefix.parse::<f64>().ok()
        } else {
            None
        };
        let value = value.ok_or_else(|| {
            parse_error(
                line,
                column,
                format!("'{w}' is not an angle; write pi, 0.5pi or 1.2rad"),
            )
        })?;
        if !value.is_finite() || !(0.0..=2.0 * PI).contains(&value) {
            return Err(parse_error(
                line,
                column,
                format!("angle {value} lies outside [0, 2*pi]"),
            ));
        }
        Ok(value)
    }

    fn number(&mut self, what: &str) -> Result<(f64, usize, usize)> {
        let (w, line, column) = self.word(what)?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((v, line, column)),
            _ => Err(parse_error(line, column, format!("'{w}' is not {what}"))),
        }
    }

    fn duration_us(&mut self) -> Result<f64> {
        let (w, line, column) = self.word("a duration like 0.25us or 250ns")?;
        let value = if let Some(prefix) = w.strip_suffix("us") {
            prefix.parse::<f64>().ok()
        } else if let Some(prefix) = w.strip_suffix("ns") {
            prefix.parse::<f64>().ok().map(|v| v / 1000.0)
        } else {
            None
        };
        let value = value.ok_or_else(|| {
            parse_error(
                line,
                column,
                format!("'{w}' is not a duration; write 0.25us or 250ns"),
            )
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(parse_error(
                line,
                column,
                format!("duration must be finite and nonnegative, got {value}"),
            ));
        }
        Ok(value)
    }

    fn peek_word(&self, expected: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Word(w), .. }) if w == expected)
    }

    fn pulse(&mut self, channel: Channel, line: usize, column: usize) -> Result<PulseInstruction> {
        let (from, ..) = self.level()?;
        self.expect(TokenKind::Arrow, "'->' between the levels")?;
        let (to, ..) = self.level()?;
        let transition = Transition::new(channel, from, to)
            .map_err(|e| parse_error(line, column, e.to_string()))?;
        let angle_rad = self.angle()?;
        let mut rabi_mhz = None;
        if self.peek_word("rabi") {
            self.next();
            let (omega, rline, rcolumn) = self.number("a Rabi frequency in MHz")?;
            if !(omega > 0.0) {
                return Err(parse_error(
                    rline,
                    rcolumn,
                    format!("Rabi frequency must be positive, got {omega}"),
                ));
            }
            rabi_mhz = Some(omega);
        }
        let mut offset_mhz = 0.0;
        if self.peek_word("offset") {
            self.next();
            let (delta, ..) = self.number("a carrier offset in MHz")?;
            offset_mhz = delta;
        }
        let step = PulseInstruction::Pulse {
            transition,
            angle_rad,
            rabi_mhz,
            offset_mhz,
        };
        step.validate()
            .map_err(|e| parse_error(line, column, validation_message(e)))?;
        Ok(step)
    }

    fn statement(&mut self) -> Result<Item> {
        let (word, line, column) = self.word("a statement")?;
        match word.as_str() {
            "mw" => Ok(Item::Step(self.pulse(Channel::Mw, line, column)?)),
            "rf" => Ok(Item::Step(self.pulse(Channel::Rf, line, column)?)),
            "laser" => {
                let duration = self.duration_us()?;
                Ok(Item::Step(PulseInstruction::Laser(
                    OpticalParams::default().with_duration(duration),
                )))
            }
            "readout" => {
                let (label, lline, lcolumn) = self.word("a marker label")?;
                if !is_marker_label(&label) {
                    return Err(parse_error(
                        lline,
                        lcolumn,
                        format!("'{label}' is not a readout marker label"),
                    ));
                }
                Ok(Item::Step(PulseInstruction::Readout(label)))
            }
            "repeat" => {
                let (count_word, cline, ccolumn) = self.word("a repeat count")?;
                let count = count_word.parse::<usize>().ok().filter(|n| *n >= 1).ok_or_else(
                    || {
                        parse_error(
                            cline,
                            ccolumn,
                            format!("'{count_word}' is not a repeat count of at least 1"),
                        )
                    },
                )?;
                self.expect(TokenKind::LBrace, "'{' to open the repeat block")?;
                let mut body = Vec::new();
                loop {
                    match self.peek() {
                        Some(Token {
                            kind: TokenKind::RBrace,
                            ..
                        }) => {
                            self.next();
                            break;
                        }
                        Some(_) => body.push(self.statement()?),
                        None => {
                            return Err(end_of_block_error(self));
                        }
                    }
                }
                if body.is_empty() {
                    return Err(parse_error(line, column, "repeat block is empty"));
                }
                Ok(Item::Repeat {
                    count,
                    body,
                    line,
                    column,
                })
            }
            other => Err(parse_error(
                line,
                column,
                format!("'{other}' is not a statement (mw, rf, laser, repeat or readout)"),
            )),
        }
    }
}

fn end_of_block_error(parser: &Parser) -> Error {
    parser.error_here("expected '}' to close the repeat block, found end of program")
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Word(w) => format!("'{w}'"),
        TokenKind::LParen => "'('".to_string(),
        TokenKind::RParen => "')'".to_string(),
        TokenKind::Comma => "','".to_string(),
        TokenKind::Arrow => "'->'".to_string(),
        TokenKind::LBrace => "'{'".to_string(),
        TokenKind::RBrace => "'}'".to_string(),
    }
}

fn validation_message(e: Error) -> String {
    match e {
        Error::Domain(m) | Error::Build(m) => m,
        other => other.to_string(),
    }
}

fn unroll(items: &[Item], out: &mut Vec<PulseInstruction>) -> Result<()> {
    for item in items {
        match item {
            Item::Step(step) => {
                if out.len() >= MAX_UNROLLED_STEPS {
                    return Err(Error::build(format!(
                        "program exceeds {MAX_UNROLLED_STEPS} unrolled steps"
                    )));
                }
                out.push(step.clone());
            }
            Item::Repeat {
                count,
                body,
                line,
                column,
            } => {
                for _ in 0..*count {
                    unroll(body, out).map_err(|e| match e {
                        Error::Build(m) => parse_error(*line, *column, m),
                        other => other,
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Parse program text. Errors carry the 1-based line and column of the
/// offending token.
pub fn parse_program(text: &str) -> Result<ProtocolProgram> {
    let (tokens, end) = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let mut items = Vec::new();
    while parser.peek().is_some() {
        items.push(parser.statement()?);
    }
    if items.is_empty() {
        return Err(parse_error(end.0, end.1, "the program has no statements"));
    }
    let (repeat_count, body) = match items.as_slice() {
        [Item::Repeat { count, body, .. }] => (*count, body.as_slice()),
        _ => (1, items.as_slice()),
    };
    let mut steps = Vec::new();
    unroll(body, &mut steps)?;
    ProtocolProgram::with_repeat(steps, repeat_count)
}

fn format_angle(angle: f64) -> String {
    let ratio = angle / PI;
    if ratio * PI == angle {
        format!("{ratio:?}pi")
    } else {
        format!("{angle:?}rad")
    }
}

/// One statement in program text form (no trailing newline).
pub fn format_statement(step: &PulseInstruction) -> String {
    match step {
        PulseInstruction::Pulse {
            transition,
            angle_rad,
            rabi_mhz,
            offset_mhz,
        } => {
            let mut out = format!(
                "{} {} -> {} {}",
                transition.channel(),
                transition.from(),
                transition.to(),
                format_angle(*angle_rad)
            );
            if let Some(omega) = rabi_mhz {
                out.push_str(&format!(" rabi {omega:?}"));
            }
            if *offset_mhz != 0.0 {
                out.push_str(&format!(" offset {offset_mhz:?}"));
            }
            out
        }
        PulseInstruction::Laser(optics) => format!("laser {:?}us", optics.pump_duration_us),
        PulseInstruction::Readout(label) => format!("readout {label}"),
    }
}

/// Canonical text of a program; parsing it reproduces the program exactly.
pub fn format_program(program: &ProtocolProgram) -> String {
    let mut out = String::new();
    let indent = if program.repeat_count() > 1 {
        out.push_str(&format!("repeat {} {{\n", program.repeat_count()));
        "    "
    } else {
        ""
    };
    for step in program.steps() {
        out.push_str(indent);
        out.push_str(&format_statement(step));
        out.push('\n');
    }
    if program.repeat_count() > 1 {
        out.push_str("}\n");
    }
    out
}
