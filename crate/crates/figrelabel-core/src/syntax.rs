//! Byte-wise tokenizer for the Level-1 PostScript subset.
//!
//! The lexer never decodes text: EPS files are arbitrary byte streams and
//! label matching is raw byte equality, so tokens carry byte slices of the
//! source. Every token records its exact raw text and byte offset, which
//! lets the emitter reproduce documents losslessly and lets diagnostics
//! point at the offending byte.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Byte offset plus 1-based line number of a token or error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub offset: usize,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Integer(i64),
    Real(f64),
    /// `base#digits` notation; always an integer value.
    RadixNumber(i64),
    /// `/name`; the name bytes exclude the slash.
    LiteralName,
    ExecutableName,
    /// `(...)`; decoded bytes live in [`Token::decoded`].
    String,
    /// `<hex>`; decoded bytes live in [`Token::decoded`].
    HexString,
    ProcOpen,
    ProcClose,
    ArrayOpen,
    ArrayClose,
    /// A `%%` or `%!` comment starting in column 0, kept for header rewriting.
    DscComment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// The exact source bytes of the token.
    pub text: Vec<u8>,
    /// Present iff `kind` is `String` or `HexString`.
    pub decoded: Option<Vec<u8>>,
    pub pos: Position,
}

impl Token {
    /// Name bytes for literal and executable names (slash stripped).
    pub fn name_bytes(&self) -> &[u8] {
        match self.kind {
            TokenKind::LiteralName => {
                let t = &self.text[1..];
                // `//name` immediate form: strip the second slash as well.
                if t.first() == Some(&b'/') {
                    &t[1..]
                } else {
                    t
                }
            }
            TokenKind::ExecutableName => &self.text,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    /// End of input inside a `(...)` or `<...>` literal.
    UnterminatedString,
    /// Non-hex byte inside `<...>`.
    InvalidHexString,
    /// Radix literal with a bad base, an out-of-range digit, or overflow.
    InvalidRadixNumber,
    /// `<~...~>` literals are rejected rather than decoded.
    Ascii85Unsupported,
    /// Level-2 `<<`/`>>` dictionary syntax.
    DictSyntaxUnsupported,
    /// A bare `)` or `>` with no opening delimiter.
    UnexpectedDelimiter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub kind: SyntaxErrorKind,
    pub pos: Position,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            SyntaxErrorKind::UnterminatedString => "unterminated string literal",
            SyntaxErrorKind::InvalidHexString => "invalid hex string",
            SyntaxErrorKind::InvalidRadixNumber => "invalid radix number",
            SyntaxErrorKind::Ascii85Unsupported => "ascii85 string literals are not supported",
            SyntaxErrorKind::DictSyntaxUnsupported => {
                "level-2 dictionary syntax is not supported"
            }
            SyntaxErrorKind::UnexpectedDelimiter => "unexpected closing delimiter",
        };
        write!(
            f,
            "{} at byte {} (line {})",
            what, self.pos.offset, self.pos.line
        )
    }
}

impl core::error::Error for SyntaxError {}

fn is_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'\0')
}

fn is_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
    )
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

/// Split `source` into tokens. Whitespace and ordinary `%` comments are
/// skipped; `%%`/`%!` comments in column 0 become [`TokenKind::DscComment`]
/// tokens so document headers survive a rewrite.
pub fn tokenize(source: &[u8]) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer {
        src: source,
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let mut tokens = Vec::new();
    while let Some(tok) = lx.next_token()? {
        tokens.push(tok);
    }
    Ok(tokens)
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.pos + ahead).copied()
    }

    /// Advance one byte, keeping the line counter in sync. CR, LF and CRLF
    /// each count as one line break.
    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' || (b == b'\r' && self.peek() != Some(b'\n')) {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(b)
    }

    fn here(&self) -> Position {
        Position {
            offset: self.pos,
            line: self.line,
        }
    }

    fn err(&self, kind: SyntaxErrorKind, pos: Position) -> SyntaxError {
        SyntaxError { kind, pos }
    }

    fn next_token(&mut self) -> Result<Option<Token>, SyntaxError> {
        loop {
            match self.peek() {
                None => return Ok(None),
                Some(b) if is_whitespace(b) => {
                    self.bump();
                }
                Some(b'%') => {
                    let at_line_start = self.pos == self.line_start;
                    let next = self.peek_at(1);
                    if at_line_start && matches!(next, Some(b'%') | Some(b'!')) {
                        return Ok(Some(self.lex_dsc_comment()));
                    }
                    self.skip_comment();
                }
                Some(_) => break,
            }
        }

        let start = self.here();
        match self.peek().unwrap() {
            b'(' => self.lex_string(start).map(Some),
            b'<' => self.lex_angle(start).map(Some),
            b'/' => Ok(Some(self.lex_literal_name(start))),
            b'{' => Ok(Some(self.single(start, TokenKind::ProcOpen))),
            b'}' => Ok(Some(self.single(start, TokenKind::ProcClose))),
            b'[' => Ok(Some(self.single(start, TokenKind::ArrayOpen))),
            b']' => Ok(Some(self.single(start, TokenKind::ArrayClose))),
            b')' | b'>' => Err(self.err(SyntaxErrorKind::UnexpectedDelimiter, start)),
            _ => self.lex_regular(start).map(Some),
        }
    }

    fn skip_comment(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'\n' || b == b'\r' {
                break;
            }
            self.bump();
        }
    }

    fn lex_dsc_comment(&mut self) -> Token {
        let start = self.here();
        self.skip_comment();
        Token {
            kind: TokenKind::DscComment,
            text: self.src[start.offset..self.pos].to_vec(),
            decoded: None,
            pos: start,
        }
    }

    fn single(&mut self, start: Position, kind: TokenKind) -> Token {
        self.bump();
        Token {
            kind,
            text: self.src[start.offset..self.pos].to_vec(),
            decoded: None,
            pos: start,
        }
    }

    fn lex_literal_name(&mut self, start: Position) -> Token {
        self.bump(); // the slash
        if self.peek() == Some(b'/') {
            self.bump();
        }
        while matches!(self.peek(), Some(b) if is_regular(b)) {
            self.bump();
        }
        Token {
            kind: TokenKind::LiteralName,
            text: self.src[start.offset..self.pos].to_vec(),
            decoded: None,
            pos: start,
        }
    }

    /// `(...)` literal: balanced nested parens, backslash escapes, octal
    /// escapes, continuation lines. Raw line ends of any flavor decode to a
    /// single LF, matching how PostScript readers treat strings.
    fn lex_string(&mut self, start: Position) -> Result<Token, SyntaxError> {
        self.bump(); // opening paren
        let mut decoded = Vec::new();
        let mut depth = 1usize;
        loop {
            let b = match self.bump() {
                Some(b) => b,
                None => return Err(self.err(SyntaxErrorKind::UnterminatedString, start)),
            };
            match b {
                b'(' => {
                    depth += 1;
                    decoded.push(b'(');
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                    decoded.push(b')');
                }
                b'\r' => {
                    if self.peek() == Some(b'\n') {
                        self.bump();
                    }
                    decoded.push(b'\n');
                }
                b'\\' => {
                    let e = match self.bump() {
                        Some(e) => e,
                        None => {
                            return Err(self.err(SyntaxErrorKind::UnterminatedString, start))
                        }
                    };
                    match e {
                        b'n' => decoded.push(b'\n'),
                        b'r' => decoded.push(b'\r'),
                        b't' => decoded.push(b'\t'),
                        b'b' => decoded.push(0x08),
                        b'f' => decoded.push(0x0c),
                        b'\\' => decoded.push(b'\\'),
                        b'(' => decoded.push(b'('),
                        b')' => decoded.push(b')'),
                        b'\n' => {} // line continuation
                        b'\r' => {
                            if self.peek() == Some(b'\n') {
                                self.bump();
                            }
                        }
                        b'0'..=b'7' => {
                            let mut value = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        value = value * 8 + (d - b'0') as u32;
                                        self.bump();
                                    }
                                    _ => break,
                                }
                            }
                            decoded.push((value & 0xff) as u8);
                        }
                        other => decoded.push(other),
                    }
                }
                other => decoded.push(other),
            }
        }
        Ok(Token {
            kind: TokenKind::String,
            text: self.src[start.offset..self.pos].to_vec(),
            decoded: Some(decoded),
            pos: start,
        })
    }

    fn lex_angle(&mut self, start: Position) -> Result<Token, SyntaxError> {
        self.bump(); // '<'
        match self.peek() {
            Some(b'~') => return Err(self.err(SyntaxErrorKind::Ascii85Unsupported, start)),
            Some(b'<') => return Err(self.err(SyntaxErrorKind::DictSyntaxUnsupported, start)),
            _ => {}
        }
        let mut decoded = Vec::new();
        let mut pending: Option<u8> = None;
        loop {
            let at = self.here();
            let b = match self.bump() {
                Some(b) => b,
                None => return Err(self.err(SyntaxErrorKind::UnterminatedString, start)),
            };
            match b {
                b'>' => break,
                b if is_whitespace(b) => {}
                b => {
                    let nibble = match b {
                        b'0'..=b'9' => b - b'0',
                        b'a'..=b'f' => b - b'a' + 10,
                        b'A'..=b'F' => b - b'A' + 10,
                        _ => return Err(self.err(SyntaxErrorKind::InvalidHexString, at)),
                    };
                    match pending.take() {
                        Some(hi) => decoded.push((hi << 4) | nibble),
                        None => pending = Some(nibble),
                    }
                }
            }
        }
        // An odd final digit is padded with zero.
        if let Some(hi) = pending {
            decoded.push(hi << 4);
        }
        Ok(Token {
            kind: TokenKind::HexString,
            text: self.src[start.offset..self.pos].to_vec(),
            decoded: Some(decoded),
            pos: start,
        })
    }

    /// A run of regular characters: number if it parses as one, otherwise an
    /// executable name.
    fn lex_regular(&mut self, start: Position) -> Result<Token, SyntaxError> {
        while matches!(self.peek(), Some(b) if is_regular(b)) {
            self.bump();
        }
        let text = &self.src[start.offset..self.pos];
        let kind = classify_regular(text).map_err(|kind| self.err(kind, start))?;
        Ok(Token {
            kind,
            text: text.to_vec(),
            decoded: None,
            pos: start,
        })
    }
}

fn classify_regular(text: &[u8]) -> Result<TokenKind, SyntaxErrorKind> {
    if let Some(hash) = text.iter().position(|&b| b == b'#') {
        let (base_part, digits) = (&text[..hash], &text[hash + 1..]);
        if !base_part.is_empty() && base_part.iter().all(u8::is_ascii_digit) {
            return parse_radix(base_part, digits).map(TokenKind::RadixNumber);
        }
    }

    let is_int_shape = {
        let body = match text.first() {
            Some(b'+') | Some(b'-') => &text[1..],
            _ => text,
        };
        !body.is_empty() && body.iter().all(u8::is_ascii_digit)
    };
    // Safe: shapes checked below are pure ASCII.
    let s = core::str::from_utf8(text).ok();
    if is_int_shape {
        if let Some(s) = s {
            if let Ok(v) = s.parse::<i64>() {
                return Ok(TokenKind::Integer(v));
            }
            // Too large for an integer: PostScript promotes to real.
            if let Ok(v) = s.parse::<f64>() {
                return Ok(TokenKind::Real(v));
            }
        }
    }

    let real_shape = text
        .iter()
        .all(|b| matches!(b, b'0'..=b'9' | b'+' | b'-' | b'.' | b'e' | b'E'))
        && text.iter().any(u8::is_ascii_digit);
    if real_shape {
        if let Some(v) = s.and_then(|s| s.parse::<f64>().ok()) {
            return Ok(TokenKind::Real(v));
        }
    }

    Ok(TokenKind::ExecutableName)
}

fn parse_radix(base_part: &[u8], digits: &[u8]) -> Result<i64, SyntaxErrorKind> {
    let base: i64 = core::str::from_utf8(base_part)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(SyntaxErrorKind::InvalidRadixNumber)?;
    if !(2..=36).contains(&base) || digits.is_empty() {
        return Err(SyntaxErrorKind::InvalidRadixNumber);
    }
    let mut value: i64 = 0;
    for &d in digits {
        let v = match d {
            b'0'..=b'9' => (d - b'0') as i64,
            b'a'..=b'z' => (d - b'a') as i64 + 10,
            b'A'..=b'Z' => (d - b'A') as i64 + 10,
            _ => return Err(SyntaxErrorKind::InvalidRadixNumber),
        };
        if v >= base {
            return Err(SyntaxErrorKind::InvalidRadixNumber);
        }
        value = value
            .checked_mul(base)
            .and_then(|x| x.checked_add(v))
            .ok_or(SyntaxErrorKind::InvalidRadixNumber)?;
    }
    Ok(value)
}

/// Encode bytes as a PostScript `(...)` literal that decodes back to the
/// same bytes: parens and backslash escaped, anything outside printable
/// ASCII as three-digit octal.
pub fn encode_ps_string(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() + 2);
    out.push(b'(');
    for &b in bytes {
        match b {
            b'(' => out.extend_from_slice(b"\\("),
            b')' => out.extend_from_slice(b"\\)"),
            b'\\' => out.extend_from_slice(b"\\\\"),
            0x20..=0x7e => out.push(b),
            _ => {
                out.push(b'\\');
                out.push(b'0' + ((b >> 6) & 7));
                out.push(b'0' + ((b >> 3) & 7));
                out.push(b'0' + (b & 7));
            }
        }
    }
    out.push(b')');
    out
}

/// Display-friendly rendering of raw label bytes (lossy, for messages only).
pub fn lossy_bytes(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &[u8]) -> Token {
        let toks = tokenize(src).unwrap();
        assert_eq!(toks.len(), 1, "expected one token from {:?}", src);
        toks.into_iter().next().unwrap()
    }

    #[test]
    fn string_escaped_paren() {
        let t = one(b"(A\\)b)");
        assert_eq!(t.kind, TokenKind::String);
        assert_eq!(t.decoded.as_deref(), Some(&b"A)b"[..]));
    }

    #[test]
    fn string_single_space() {
        let t = one(b"( )");
        assert_eq!(t.decoded.as_deref(), Some(&b" "[..]));
    }

    #[test]
    fn string_with_quote() {
        let t = one(b"(IP\")");
        assert_eq!(t.decoded.as_deref(), Some(&b"IP\""[..]));
    }

    #[test]
    fn string_nested_parens() {
        let t = one(b"(a(b)c)");
        assert_eq!(t.decoded.as_deref(), Some(&b"a(b)c"[..]));
    }

    #[test]
    fn string_octal_and_continuation() {
        let t = one(b"(\\101\\12\\n x\\\ny)");
        assert_eq!(t.decoded.as_deref(), Some(&b"A\n\n xy"[..]));
    }

    #[test]
    fn string_octal_overflow_wraps() {
        // \777 = 511, truncated to 8 bits.
        let t = one(b"(\\777)");
        assert_eq!(t.decoded.as_deref(), Some(&[0xffu8][..]));
    }

    #[test]
    fn string_raw_newline_normalized() {
        let t = one(b"(a\r\nb\rc\nd)");
        assert_eq!(t.decoded.as_deref(), Some(&b"a\nb\nc\nd"[..]));
    }

    #[test]
    fn string_unknown_escape_is_literal() {
        let t = one(b"(\\q)");
        assert_eq!(t.decoded.as_deref(), Some(&b"q"[..]));
    }

    #[test]
    fn radix_number() {
        assert_eq!(one(b"16#FF").kind, TokenKind::RadixNumber(255));
        assert_eq!(one(b"8#1777").kind, TokenKind::RadixNumber(1023));
        assert_eq!(one(b"2#1000").kind, TokenKind::RadixNumber(8));
        assert_eq!(one(b"36#z").kind, TokenKind::RadixNumber(35));
    }

    #[test]
    fn radix_errors() {
        for src in [&b"16#FG"[..], b"1#0", b"37#1", b"16#"] {
            let err = tokenize(src).unwrap_err();
            assert_eq!(err.kind, SyntaxErrorKind::InvalidRadixNumber, "{:?}", src);
        }
    }

    #[test]
    fn numbers() {
        assert_eq!(one(b"123").kind, TokenKind::Integer(123));
        assert_eq!(one(b"-98").kind, TokenKind::Integer(-98));
        assert_eq!(one(b"+17").kind, TokenKind::Integer(17));
        assert_eq!(one(b"-.002").kind, TokenKind::Real(-0.002));
        assert_eq!(one(b"34.5").kind, TokenKind::Real(34.5));
        assert_eq!(one(b"123.6e10").kind, TokenKind::Real(123.6e10));
        assert_eq!(one(b"1E6").kind, TokenKind::Real(1e6));
        assert_eq!(one(b"-1.").kind, TokenKind::Real(-1.0));
        assert_eq!(one(b".5").kind, TokenKind::Real(0.5));
    }

    #[test]
    fn number_like_names() {
        for src in [&b"1e"[..], b"-", b"+", b".", b"3-4", b"1.2.3"] {
            assert_eq!(one(src).kind, TokenKind::ExecutableName, "{:?}", src);
        }
    }

    #[test]
    fn huge_integer_becomes_real() {
        match one(b"99999999999999999999").kind {
            TokenKind::Real(v) => assert_eq!(v, 1e20),
            k => panic!("expected real, got {:?}", k),
        }
    }

    #[test]
    fn names_and_structure() {
        let toks = tokenize(b"/Helvetica findfont { dup } [ ] %c\n").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind.clone()).collect();
        assert_eq!(
            kinds,
            [
                TokenKind::LiteralName,
                TokenKind::ExecutableName,
                TokenKind::ProcOpen,
                TokenKind::ExecutableName,
                TokenKind::ProcClose,
                TokenKind::ArrayOpen,
                TokenKind::ArrayClose,
            ]
        );
        assert_eq!(toks[0].name_bytes(), b"Helvetica");
    }

    #[test]
    fn hex_strings() {
        assert_eq!(one(b"<48 65 6C>").decoded.as_deref(), Some(&b"Hel"[..]));
        // Odd digit padded with zero.
        assert_eq!(one(b"<ab3>").decoded.as_deref(), Some(&[0xab, 0x30][..]));
        let err = tokenize(b"<zz>").unwrap_err();
        assert_eq!(err.kind, SyntaxErrorKind::InvalidHexString);
    }

    #[test]
    fn ascii85_and_dict_syntax_rejected() {
        assert_eq!(
            tokenize(b"<~87cUR~>").unwrap_err().kind,
            SyntaxErrorKind::Ascii85Unsupported
        );
        assert_eq!(
            tokenize(b"<< /a 1 >>").unwrap_err().kind,
            SyntaxErrorKind::DictSyntaxUnsupported
        );
    }

    #[test]
    fn unterminated_string_offset() {
        let err = tokenize(b"ab (open").unwrap_err();
        assert_eq!(err.kind, SyntaxErrorKind::UnterminatedString);
        assert_eq!(err.pos.offset, 3);
    }

    #[test]
    fn dsc_comments_vs_plain_comments() {
        let src = b"%!PS-Adobe-2.0 EPSF-1.2\n%%BoundingBox: 0 0 10 10\n1 2 add % plain\n%% not DSC when preceded by code? no: column 0\n";
        let toks = tokenize(src).unwrap();
        let dsc: Vec<_> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::DscComment)
            .collect();
        assert_eq!(dsc.len(), 3);
        assert_eq!(dsc[0].text, b"%!PS-Adobe-2.0 EPSF-1.2");
        assert_eq!(dsc[1].text, b"%%BoundingBox: 0 0 10 10");
        assert_eq!(dsc[0].pos.line, 1);
        assert_eq!(dsc[1].pos.line, 2);
    }

    #[test]
    fn mid_line_double_percent_is_plain_comment() {
        let toks = tokenize(b"1 %% trailing\n2").unwrap();
        assert_eq!(toks.len(), 2);
        assert!(toks.iter().all(|t| t.kind != TokenKind::DscComment));
    }

    #[test]
    fn lossless_offsets() {
        let src: &[u8] = b"%!PS\n/x 16#2A def (s(t)r) <4142> { 1.5 -2 roll } [ ] x";
        for t in tokenize(src).unwrap() {
            assert!(src[t.pos.offset..].starts_with(&t.text));
        }
    }

    #[test]
    fn line_numbers_nondecreasing() {
        let src = b"1\n2\r\n(multi\nline)\r3";
        let toks = tokenize(src).unwrap();
        let lines: Vec<u32> = toks.iter().map(|t| t.pos.line).collect();
        assert_eq!(lines, [1, 2, 3, 5]);
    }

    #[test]
    fn ps_string_encode_round_trip_all_bytes() {
        let all: Vec<u8> = (0..=255u8).collect();
        let encoded = encode_ps_string(&all);
        let t = one(&encoded);
        assert_eq!(t.decoded.as_deref(), Some(&all[..]));
    }
}
