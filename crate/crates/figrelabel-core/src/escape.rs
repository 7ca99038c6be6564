//! Byte-string escaping shared by the listing formats and the directive
//! language. Printable ASCII passes through; everything else round-trips
//! through `\xHH`.

use alloc::string::String;
use alloc::vec::Vec;

const HEX: &[u8; 16] = b"0123456789ABCDEF";

/// Escape for TSV cells and similar one-line contexts: `\\`, `\t`, `\n`,
/// `\r`, and `\xHH` for anything outside printable ASCII.
pub fn escape_field(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            b'\t' => out.push_str("\\t"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            0x20..=0x7e => out.push(b as char),
            _ => push_hex(&mut out, b),
        }
    }
    out
}

/// Escape for double-quoted strings in the directive language: adds `\"`
/// to the field escapes.
pub fn escape_quoted(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\t' => out.push_str("\\t"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            0x20..=0x7e => out.push(b as char),
            _ => push_hex(&mut out, b),
        }
    }
    out
}

fn push_hex(out: &mut String, b: u8) {
    out.push_str("\\x");
    out.push(HEX[(b >> 4) as usize] as char);
    out.push(HEX[(b & 0xf) as usize] as char);
}

/// Inverse of [`escape_quoted`] minus the surrounding quotes; `None` on a
/// malformed escape. Unknown backslash escapes are rejected so specs fail
/// loudly instead of silently changing meaning.
pub fn unescape_quoted(text: &str) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(text.len());
    let mut chars = text.bytes();
    while let Some(b) = chars.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        match chars.next()? {
            b'"' => out.push(b'"'),
            b'\\' => out.push(b'\\'),
            b't' => out.push(b'\t'),
            b'n' => out.push(b'\n'),
            b'r' => out.push(b'\r'),
            b'x' => {
                let hi = hex_val(chars.next()?)?;
                let lo = hex_val(chars.next()?)?;
                out.push((hi << 4) | lo);
            }
            _ => return None,
        }
    }
    Some(out)
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_escapes() {
        assert_eq!(escape_field(b"Bc"), "Bc");
        assert_eq!(escape_field(&[0xe9]), "\\xE9");
        assert_eq!(escape_field(b"a\tb\\c"), "a\\tb\\\\c");
    }

    #[test]
    fn quoted_round_trip_all_bytes() {
        let all: Vec<u8> = (0..=255u8).collect();
        let escaped = escape_quoted(&all);
        assert_eq!(unescape_quoted(&escaped), Some(all));
    }

    #[test]
    fn bad_escapes_rejected() {
        assert_eq!(unescape_quoted("\\q"), None);
        assert_eq!(unescape_quoted("\\x4"), None);
        assert_eq!(unescape_quoted("\\xZZ"), None);
        assert_eq!(unescape_quoted("trailing\\"), None);
    }
}
