use std::fmt;

use serde::{Deserialize, Serialize};

use super::IntentError;

/// One argument of a control instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arg {
    Int(i64),
    Real(f64),
    Word(String),
}

impl Arg {
    pub fn word(s: &str) -> Self {
        Arg::Word(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Arg::Int(v) => Some(*v as f64),
            Arg::Real(v) => Some(*v),
            Arg::Word(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Arg::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            Arg::Word(w) => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Int(v) => write!(f, "{v}"),
            Arg::Real(v) => {
                let s = v.to_string();
                if s.contains('.') {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            Arg::Word(w) => f.write_str(w),
        }
    }
}

/// `$Device (a1, a2, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInstruction {
    pub device: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

const RESERVED: [char; 4] = ['$', '(', ')', ','];

fn is_canonical_words(s: &str) -> bool {
    !s.is_empty() && !s.contains(RESERVED) && s.split(' ').all(|w| !w.is_empty() && !w.contains(char::is_whitespace))
}

fn looks_numeric(s: &str) -> bool {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (mantissa, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = match frac_part {
        Some(frac) => digits(int_part) && digits(frac),
        None => digits(int_part),
    };
    let exponent_ok = exponent.map_or(true, |e| digits(e.strip_prefix(['-', '+']).unwrap_or(e)));
    mantissa_ok && exponent_ok
}

fn parse_number(s: &str) -> Option<Arg> {
    if !looks_numeric(s) {
        return None;
    }
    let integral = !s.contains(['.', 'e', 'E']);
    if integral {
        if let Ok(v) = s.parse::<i64>() {
            return Some(Arg::Int(v));
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Arg::Real)
}

impl ControlInstruction {
    /// Checks that the instruction renders to text that parses back to itself.
    pub fn new(device: impl Into<String>, args: Vec<Arg>) -> Result<Self, IntentError> {
        let instr = Self {
            device: device.into(),
            args,
        };
        instr.validate()?;
        Ok(instr)
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        if !is_canonical_words(&self.device) {
            return Err(IntentError::InvalidInstruction(format!(
                "device name {:?} must be words separated by single spaces without $ ( ) ,",
                self.device
            )));
        }
        for (i, a) in self.args.iter().enumerate() {
            match a {
                Arg::Real(v) if !v.is_finite() => {
                    return Err(IntentError::InvalidInstruction(format!("argument {i} is not finite")));
                }
                Arg::Word(w) if !is_canonical_words(w) || looks_numeric(w) => {
                    return Err(IntentError::InvalidInstruction(format!(
                        "argument {i} {w:?} is not a valid word argument"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        render_instruction(self)
    }
}

impl fmt::Display for ControlInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${} (", self.device)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Canonical text: `$Device (a1, a2)`, `$Device ()` without arguments.
pub fn render_instruction(instr: &ControlInstruction) -> String {
    instr.to_string()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn err(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        offset,
        message: message.into(),
    }
}

/// Parses `$ device-words ( arg {, arg} )`. Runs of whitespace inside the
/// device name or a word argument collapse to one space.
pub fn parse_instruction(text: &str) -> Result<ControlInstruction, ParseError> {
    let body = text.trim_end();
    let start = body.len() - body.trim_start().len();
    if !body[start..].starts_with('$') {
        return Err(err(start, "expected '$'"));
    }
    let dev_start = start + 1;
    let open = match body[dev_start..].find(['(', ')', ',', '$']) {
        Some(i) if body.as_bytes()[dev_start + i] == b'(' => dev_start + i,
        Some(i) => {
            let at = dev_start + i;
            return Err(err(at, format!("unexpected '{}' in device name", &body[at..at + 1])));
        }
        None => return Err(err(body.len(), "expected '('")),
    };
    let device = collapse_ws(&body[dev_start..open]);
    if device.is_empty() {
        return Err(err(dev_start, "empty device name"));
    }

    let mut args = Vec::new();
    let mut cursor = open + 1;
    let close = loop {
        let rel = body[cursor..].find(['(', ')', ',', '$']);
        let Some(rel) = rel else {
            return Err(err(open, "unbalanced '(': missing ')'"));
        };
        let at = cursor + rel;
        let raw = &body[cursor..at];
        match body.as_bytes()[at] {
            b'(' => return Err(err(at, "nested '(' is not allowed")),
            b'$' => return Err(err(at, "unexpected '$' in arguments")),
            sep => {
                let trimmed = raw.trim();
                let empty_list = sep == b')' && args.is_empty() && trimmed.is_empty();
                if !empty_list {
                    if trimmed.is_empty() {
                        return Err(err(cursor, "empty argument"));
                    }
                    let arg = if looks_numeric(trimmed) {
                        parse_number(trimmed).ok_or_else(|| err(cursor, "number out of range"))?
                    } else {
                        Arg::Word(collapse_ws(trimmed))
                    };
                    args.push(arg);
                }
                if sep == b')' {
                    break at;
                }
                cursor = at + 1;
            }
        }
    };
    if close + 1 != body.len() {
        return Err(err(close + 1, "unexpected text after ')'"));
    }
    Ok(ControlInstruction { device, args })
}
