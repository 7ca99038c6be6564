//! The relabel directive language and typographic length handling.
//!
//! A spec file is line oriented, one statement per line, `#` starting a
//! comment. A complete example:
//!
//! ```text
//! # labels for fig1.eps
//! figure fig1.eps
//! width 3truein
//! font Helvetica 10bp
//! relabel "Ab" "A^b" offset 0pt 1pt
//! relabel "P" "P" offset -4pt 0pt
//! relabel "Bc" "B_c"
//! extralabel -0.3truein 0.3truein "First extra label"
//! relabel "IP\"" "int P''" offset 1pt 0pt
//! relabel "P'" "P'" offset 1pt 0pt
//! extralabel -1.5cm 1.5cm "Second extra label"
//! ```
//!
//! `relabel` replaces an existing figure label (matched by exact bytes) with
//! new text, optionally nudged by an offset; `extralabel` paints free text
//! relative to the lower-right corner of the bounding box. Quoted strings
//! accept `\"`, `\\`, `\t`, `\n`, `\r` and `\xHH` escapes, so any byte
//! sequence can be named. Old-label bytes are matched verbatim, and
//! replacement text is painted as literal characters in the spec's font;
//! no math typesetting happens here.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::escape::{escape_quoted, unescape_quoted};

/// TeX-style length units. `truein` equals `in`: "true" dimensions exist to
/// defeat document magnification, and there is no magnification here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Bp,
    Pt,
    In,
    TrueIn,
    Cm,
    Mm,
}

impl Unit {
    pub fn factor(self) -> f64 {
        match self {
            Unit::Bp => 1.0,
            Unit::Pt => 72.0 / 72.27,
            Unit::In | Unit::TrueIn => 72.0,
            Unit::Cm => 72.0 / 2.54,
            Unit::Mm => 7.2 / 2.54,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Bp => "bp",
            Unit::Pt => "pt",
            Unit::In => "in",
            Unit::TrueIn => "truein",
            Unit::Cm => "cm",
            Unit::Mm => "mm",
        }
    }
}

/// Longest suffixes first so `truein` is not read as `in`.
const UNIT_SUFFIXES: &[Unit] = &[Unit::TrueIn, Unit::Bp, Unit::Pt, Unit::In, Unit::Cm, Unit::Mm];

/// A value with its original unit. The unit is preserved so specs
/// re-serialize the way they were written.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length {
    pub value: f64,
    pub unit: Unit,
}

impl Length {
    pub const ZERO_PT: Length = Length {
        value: 0.0,
        unit: Unit::Pt,
    };

    pub fn new(value: f64, unit: Unit) -> Length {
        Length { value, unit }
    }

    pub fn bp_value(&self) -> f64 {
        self.value * self.unit.factor()
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.value, self.unit.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthError {
    UnknownUnit(String),
    MalformedNumber(String),
}

impl fmt::Display for LengthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthError::UnknownUnit(u) => write!(f, "unknown unit in '{}'", u),
            LengthError::MalformedNumber(t) => write!(f, "malformed number in '{}'", t),
        }
    }
}

impl core::error::Error for LengthError {}

/// Parse `"-1.5cm"`-style text into a [`Length`].
pub fn convert_length(text: &str) -> Result<Length, LengthError> {
    let unit = UNIT_SUFFIXES
        .iter()
        .copied()
        .find(|u| text.ends_with(u.suffix()))
        .ok_or_else(|| LengthError::UnknownUnit(text.to_string()))?;
    let number = &text[..text.len() - unit.suffix().len()];
    let value: f64 = number
        .parse()
        .map_err(|_| LengthError::MalformedNumber(text.to_string()))?;
    if !value.is_finite() {
        return Err(LengthError::MalformedNumber(text.to_string()));
    }
    Ok(Length::new(value, unit))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    /// Replace the figure label `old` (exact bytes) with `new_text`,
    /// offset from the recorded anchor by (dx, dy).
    Relabel {
        old: Vec<u8>,
        new_text: Vec<u8>,
        dx: Length,
        dy: Length,
    },
    /// Paint `text` at an offset from the lower-right bounding-box corner.
    ExtraLabel { x: Length, y: Length, text: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelabelSpec {
    pub figure: String,
    pub width: Option<Length>,
    pub font_name: String,
    pub font_size: Length,
    /// Order is preserved: later directives paint over earlier ones.
    pub directives: Vec<Directive>,
}

impl Default for RelabelSpec {
    fn default() -> RelabelSpec {
        RelabelSpec {
            figure: String::new(),
            width: None,
            font_name: "Helvetica".into(),
            font_size: Length::new(10.0, Unit::Bp),
            directives: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    Syntax { line: u32, message: String },
    UnknownUnit { line: u32, unit: String },
    MalformedNumber { line: u32, text: String },
    DuplicateFigureLine { line: u32 },
    MissingFigureLine,
    EmptyOldLabel { line: u32 },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Syntax { line, message } => write!(f, "line {}: {}", line, message),
            SpecError::UnknownUnit { line, unit } => {
                write!(f, "line {}: unknown unit in '{}'", line, unit)
            }
            SpecError::MalformedNumber { line, text } => {
                write!(f, "line {}: malformed number in '{}'", line, text)
            }
            SpecError::DuplicateFigureLine { line } => {
                write!(f, "line {}: duplicate figure line", line)
            }
            SpecError::MissingFigureLine => write!(f, "spec has no figure line"),
            SpecError::EmptyOldLabel { line } => {
                write!(f, "line {}: relabel needs a non-empty old label", line)
            }
        }
    }
}

impl core::error::Error for SpecError {}

#[derive(Debug, PartialEq)]
enum Word {
    Bare(String),
    Quoted(Vec<u8>),
}

impl Word {
    fn describe(&self) -> &'static str {
        match self {
            Word::Bare(_) => "word",
            Word::Quoted(_) => "quoted string",
        }
    }
}

fn syntax(line: u32, message: impl Into<String>) -> SpecError {
    SpecError::Syntax {
        line,
        message: message.into(),
    }
}

/// Split one line into words; a `#` outside quotes ends the line.
fn split_words(line: &str, line_no: u32) -> Result<Vec<Word>, SpecError> {
    let bytes = line.as_bytes();
    let mut words = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' => i += 1,
            b'#' => break,
            b'"' => {
                let start = i + 1;
                let mut j = start;
                loop {
                    match bytes.get(j) {
                        None => return Err(syntax(line_no, "unterminated quoted string")),
                        Some(b'\\') => j += 2,
                        Some(b'"') => break,
                        Some(_) => j += 1,
                    }
                }
                let inner = core::str::from_utf8(&bytes[start..j.min(bytes.len())])
                    .map_err(|_| syntax(line_no, "quoted string is not valid UTF-8"))?;
                let decoded = unescape_quoted(inner)
                    .ok_or_else(|| syntax(line_no, "bad escape in quoted string"))?;
                words.push(Word::Quoted(decoded));
                i = j + 1;
            }
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b' ' | b'\t' | b'#' | b'"') {
                    i += 1;
                }
                words.push(Word::Bare(line[start..i].to_string()));
            }
        }
    }
    Ok(words)
}

fn expect_quoted(word: Option<&Word>, line: u32, what: &str) -> Result<Vec<u8>, SpecError> {
    match word {
        Some(Word::Quoted(bytes)) => Ok(bytes.clone()),
        Some(other) => Err(syntax(
            line,
            format!("expected quoted {}, found {}", what, other.describe()),
        )),
        None => Err(syntax(line, format!("missing quoted {}", what))),
    }
}

fn expect_length(word: Option<&Word>, line: u32, what: &str) -> Result<Length, SpecError> {
    match word {
        Some(Word::Bare(text)) => convert_length(text).map_err(|e| match e {
            LengthError::UnknownUnit(unit) => SpecError::UnknownUnit { line, unit },
            LengthError::MalformedNumber(text) => SpecError::MalformedNumber { line, text },
        }),
        Some(other) => Err(syntax(
            line,
            format!("expected {} length, found {}", what, other.describe()),
        )),
        None => Err(syntax(line, format!("missing {} length", what))),
    }
}

fn ps_name_safe(name: &str) -> bool {
    !name.is_empty()
        && name.bytes().all(|b| {
            !b.is_ascii_whitespace()
                && !matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
                && (0x21..=0x7e).contains(&b)
        })
}

/// Parse a spec file. Grammar per line:
/// `figure <path>` | `width <length>` | `font <name> <length>` |
/// `relabel "<old>" "<new>" [offset <length> <length>]` |
/// `extralabel <length> <length> "<text>"`.
pub fn parse_spec(source: &str) -> Result<RelabelSpec, SpecError> {
    let mut spec = RelabelSpec::default();
    let mut figure_seen = false;

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = (idx + 1) as u32;
        let words = split_words(raw_line, line_no)?;
        let Some(first) = words.first() else {
            continue;
        };
        let keyword = match first {
            Word::Bare(k) => k.as_str(),
            Word::Quoted(_) => return Err(syntax(line_no, "line starts with a quoted string")),
        };
        match keyword {
            "figure" => {
                if figure_seen {
                    return Err(SpecError::DuplicateFigureLine { line: line_no });
                }
                figure_seen = true;
                spec.figure = match words.get(1) {
                    Some(Word::Quoted(bytes)) => {
                        if words.len() > 2 {
                            return Err(syntax(line_no, "trailing text after figure path"));
                        }
                        String::from_utf8(bytes.clone())
                            .map_err(|_| syntax(line_no, "figure path is not valid UTF-8"))?
                    }
                    Some(Word::Bare(_)) => {
                        // unquoted paths may contain spaces: take the rest of
                        // the line up to any comment
                        let after = raw_line.trim_start();
                        let after = &after["figure".len()..];
                        let path = after.split('#').next().unwrap_or("").trim();
                        path.to_string()
                    }
                    None => return Err(syntax(line_no, "missing figure path")),
                };
                if spec.figure.is_empty() {
                    return Err(syntax(line_no, "missing figure path"));
                }
            }
            "width" => {
                spec.width = Some(expect_length(words.get(1), line_no, "width")?);
                if words.len() > 2 {
                    return Err(syntax(line_no, "trailing text after width"));
                }
            }
            "font" => {
                let name = match words.get(1) {
                    Some(Word::Bare(n)) => n.clone(),
                    _ => return Err(syntax(line_no, "missing font name")),
                };
                if !ps_name_safe(&name) {
                    return Err(syntax(line_no, "font name has characters unusable in a name"));
                }
                spec.font_name = name;
                spec.font_size = expect_length(words.get(2), line_no, "font size")?;
                if words.len() > 3 {
                    return Err(syntax(line_no, "trailing text after font size"));
                }
            }
            "relabel" => {
                let old = expect_quoted(words.get(1), line_no, "old label")?;
                if old.is_empty() {
                    return Err(SpecError::EmptyOldLabel { line: line_no });
                }
                let new_text = expect_quoted(words.get(2), line_no, "replacement text")?;
                let (dx, dy) = match words.get(3) {
                    None => (Length::ZERO_PT, Length::ZERO_PT),
                    Some(Word::Bare(k)) if k == "offset" => {
                        if words.len() > 6 {
                            return Err(syntax(line_no, "trailing text after offset"));
                        }
                        (
                            expect_length(words.get(4), line_no, "offset x")?,
                            expect_length(words.get(5), line_no, "offset y")?,
                        )
                    }
                    Some(_) => return Err(syntax(line_no, "expected 'offset' or end of line")),
                };
                spec.directives.push(Directive::Relabel {
                    old,
                    new_text,
                    dx,
                    dy,
                });
            }
            "extralabel" => {
                let x = expect_length(words.get(1), line_no, "x")?;
                let y = expect_length(words.get(2), line_no, "y")?;
                let text = expect_quoted(words.get(3), line_no, "label text")?;
                if words.len() > 4 {
                    return Err(syntax(line_no, "trailing text after label"));
                }
                spec.directives.push(Directive::ExtraLabel { x, y, text });
            }
            other => {
                return Err(syntax(line_no, format!("unknown directive '{}'", other)));
            }
        }
    }

    if !figure_seen {
        return Err(SpecError::MissingFigureLine);
    }
    Ok(spec)
}

/// Canonical serialization; `parse_spec(print_spec(s))` is structurally `s`.
/// Offsets keep their original units.
pub fn print_spec(spec: &RelabelSpec) -> String {
    let mut out = String::new();
    if needs_quoting(&spec.figure) {
        let _ = writeln!(out, "figure \"{}\"", escape_quoted(spec.figure.as_bytes()));
    } else {
        let _ = writeln!(out, "figure {}", spec.figure);
    }
    if let Some(width) = &spec.width {
        let _ = writeln!(out, "width {}", width);
    }
    let _ = writeln!(out, "font {} {}", spec.font_name, spec.font_size);
    for d in &spec.directives {
        match d {
            Directive::Relabel {
                old,
                new_text,
                dx,
                dy,
            } => {
                let _ = write!(
                    out,
                    "relabel \"{}\" \"{}\"",
                    escape_quoted(old),
                    escape_quoted(new_text)
                );
                if *dx != Length::ZERO_PT || *dy != Length::ZERO_PT {
                    let _ = write!(out, " offset {} {}", dx, dy);
                }
                out.push('\n');
            }
            Directive::ExtraLabel { x, y, text } => {
                let _ = writeln!(out, "extralabel {} {} \"{}\"", x, y, escape_quoted(text));
            }
        }
    }
    out
}

fn needs_quoting(path: &str) -> bool {
    path.is_empty()
        || path != path.trim()
        || path.contains(['#', '"'])
        || path.bytes().any(|b| b < 0x20)
}
