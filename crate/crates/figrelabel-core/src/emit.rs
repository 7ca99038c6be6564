//! Resolve directives against extracted labels and generate the outputs:
//! a relabeled EPS, a label listing, and a plain-coordinate overlay.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::dsc::DocumentMeta;
use crate::escape::{escape_field, escape_quoted};
use crate::labels::LabelTable;
use crate::matrix::Point;
use crate::relabel::{Directive, RelabelSpec};
use crate::syntax::encode_ps_string;

/// Which original label painting survives in the rewritten figure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Suppress {
    /// Every intercepted show paints nothing; the classic behavior.
    AllShows,
    /// Only shows of these exact byte strings are swallowed; everything
    /// else falls through to the real operators.
    Matched(BTreeSet<Vec<u8>>),
}

/// One replacement to paint: `text` at `anchor + (dx, dy)`, all in
/// unscaled figure coordinates (big points).
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub text: Vec<u8>,
    pub anchor: Point,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitPlan {
    pub placements: Vec<Placement>,
    pub suppress: Suppress,
    /// Old-label bytes with no match in the table; they get no placement.
    pub unmatched: Vec<Vec<u8>>,
    /// Output width divided by bounding-box width; 1.0 when no width given.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmitError {
    /// An extralabel or width directive needs a %%BoundingBox.
    MissingBoundingBox,
    EmptyOldLabel,
    ZeroWidthBoundingBox,
    NonPositiveWidth,
}

impl fmt::Display for EmitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmitError::MissingBoundingBox => {
                write!(f, "the figure has no %%BoundingBox, required by width/extralabel")
            }
            EmitError::EmptyOldLabel => write!(f, "relabel directive with an empty old label"),
            EmitError::ZeroWidthBoundingBox => {
                write!(f, "bounding box has zero width; cannot scale")
            }
            EmitError::NonPositiveWidth => write!(f, "requested width must be positive"),
        }
    }
}

impl core::error::Error for EmitError {}

/// Resolve every directive into a placement or an unmatched entry.
///
/// Relabels anchor at the recorded show position. Extra labels anchor at
/// the lower-right corner of the bounding box: after a box inclusion the
/// natural reference point is the right edge on the baseline, so negative
/// x / positive y offsets land inside the figure.
pub fn resolve(
    spec: &RelabelSpec,
    table: &LabelTable,
    meta: &DocumentMeta,
    keep_unmatched_drawing: bool,
) -> Result<EmitPlan, EmitError> {
    let needs_bbox =
        spec.width.is_some() || spec.directives.iter().any(|d| matches!(d, Directive::ExtraLabel { .. }));
    if needs_bbox && meta.bounding_box.is_none() {
        return Err(EmitError::MissingBoundingBox);
    }

    let scale = match &spec.width {
        None => 1.0,
        Some(width) => {
            let bbox = meta.bounding_box.as_ref().expect("checked above");
            if bbox.width() <= 0.0 {
                return Err(EmitError::ZeroWidthBoundingBox);
            }
            if width.bp_value() <= 0.0 {
                return Err(EmitError::NonPositiveWidth);
            }
            width.bp_value() / bbox.width()
        }
    };

    let mut placements = Vec::new();
    let mut unmatched = Vec::new();
    let mut matched_set = BTreeSet::new();

    for directive in &spec.directives {
        match directive {
            Directive::Relabel {
                old,
                new_text,
                dx,
                dy,
            } => {
                if old.is_empty() {
                    return Err(EmitError::EmptyOldLabel);
                }
                let (anchor, found) = table.find_label(old, Point::ZERO);
                if found {
                    matched_set.insert(old.clone());
                    placements.push(Placement {
                        text: new_text.clone(),
                        anchor,
                        dx: dx.bp_value(),
                        dy: dy.bp_value(),
                    });
                } else {
                    unmatched.push(old.clone());
                }
            }
            Directive::ExtraLabel { x, y, text } => {
                let bbox = meta.bounding_box.as_ref().expect("checked above");
                placements.push(Placement {
                    text: text.clone(),
                    anchor: Point::new(bbox.urx + x.bp_value(), bbox.lly + y.bp_value()),
                    dx: 0.0,
                    dy: 0.0,
                });
            }
        }
    }

    let suppress = if keep_unmatched_drawing {
        Suppress::Matched(matched_set)
    } else {
        Suppress::AllShows
    };

    Ok(EmitPlan {
        placements,
        suppress,
        unmatched,
        scale,
    })
}

const SHOW_OPERATORS: [(&str, usize); 9] = [
    // operand count including the string, and whether the string is on top
    ("show", 1),
    ("ashow", 3),
    ("widthshow", 4),
    ("awidthshow", 6),
    ("xshow", 2),
    ("yshow", 2),
    ("xyshow", 2),
    ("cshow", 2),
    ("kshow", 2),
];

fn pops(n: usize) -> String {
    if n >= 5 {
        format!("{} {{ pop }} repeat", n)
    } else {
        let mut s = String::new();
        for i in 0..n {
            if i > 0 {
                s.push(' ');
            }
            s.push_str("pop");
        }
        s
    }
}

/// The generated prologue: a private dictionary that redefines the nine
/// show operators to consume their operands and paint nothing (or, with a
/// keep-set, to fall through to the saved originals for non-members), and
/// neuters save/restore so a figure-internal restore cannot resurrect the
/// real operators.
fn suppression_prologue(out: &mut Vec<u8>, suppress: &Suppress) {
    let mut p = String::new();
    p.push_str("userdict /FRLdict 40 dict put\nFRLdict begin\n");
    match suppress {
        Suppress::AllShows => {
            for (name, arity) in SHOW_OPERATORS {
                let _ = writeln!(p, "/{} {{ {} }} def", name, pops(arity));
            }
        }
        Suppress::Matched(keep) => {
            for (name, _) in SHOW_OPERATORS {
                let _ = writeln!(p, "/FRLorig{} /{} load def", name, name);
            }
            let _ = writeln!(p, "/FRLkeep {} dict def", keep.len().max(1));
            for label in keep {
                p.push_str("FRLkeep ");
                p.push_str(core::str::from_utf8(&encode_ps_string(label)).expect("ascii"));
                p.push_str(" true put\n");
            }
            p.push_str("/FRLmember { FRLkeep exch known } def\n");
            for (name, arity) in SHOW_OPERATORS {
                // xshow-family carries its number array above the string
                let probe = if matches!(name, "xshow" | "yshow" | "xyshow") {
                    "1 index"
                } else {
                    "dup"
                };
                let _ = writeln!(
                    p,
                    "/{} {{ {} FRLmember {{ {} }} {{ FRLorig{} }} ifelse }} def",
                    name,
                    probe,
                    pops(arity),
                    name
                );
            }
        }
    }
    p.push_str("/save { false } def\n/restore { pop } def\nend\n");
    out.extend_from_slice(p.as_bytes());
}

/// Header end: the maximal leading run of `%`-started lines, terminators
/// included.
fn header_len(source: &[u8]) -> usize {
    let mut i = 0;
    while i < source.len() && source[i] == b'%' {
        while i < source.len() && source[i] != b'\n' && source[i] != b'\r' {
            i += 1;
        }
        if i < source.len() {
            if source[i] == b'\r' && source.get(i + 1) == Some(&b'\n') {
                i += 2;
            } else {
                i += 1;
            }
        }
    }
    i
}

/// If the body's last non-blank line is `%%EOF`, split it off so the
/// trailer can go before it.
fn split_trailing_eof(body: &[u8]) -> (&[u8], bool) {
    let mut end = body.len();
    while end > 0 && body[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    let line_start = body[..end]
        .iter()
        .rposition(|&b| b == b'\n' || b == b'\r')
        .map(|p| p + 1)
        .unwrap_or(0);
    if &body[line_start..end] == b"%%EOF" {
        (&body[..line_start], true)
    } else {
        (body, false)
    }
}

fn rewrite_header(out: &mut Vec<u8>, header: &[u8], meta: &DocumentMeta, scale: f64) {
    if scale == 1.0 {
        out.extend_from_slice(header);
        return;
    }
    let bbox = meta.bounding_box;
    for line in lines_with_terminators(header) {
        let content_end = line
            .iter()
            .position(|&b| b == b'\n' || b == b'\r')
            .unwrap_or(line.len());
        let (content, terminator) = line.split_at(content_end);
        if let Some(bbox) = bbox {
            if content.starts_with(b"%%BoundingBox:") {
                let _ = write!(
                    VecWriter(out),
                    "%%BoundingBox: {} {} {} {}",
                    floor_i(bbox.llx * scale),
                    floor_i(bbox.lly * scale),
                    ceil_i(bbox.urx * scale),
                    ceil_i(bbox.ury * scale)
                );
                out.extend_from_slice(terminator);
                continue;
            }
            if content.starts_with(b"%%HiResBoundingBox:") {
                let _ = write!(
                    VecWriter(out),
                    "%%HiResBoundingBox: {:.6} {:.6} {:.6} {:.6}",
                    bbox.llx * scale,
                    bbox.lly * scale,
                    bbox.urx * scale,
                    bbox.ury * scale
                );
                out.extend_from_slice(terminator);
                continue;
            }
        }
        out.extend_from_slice(line);
    }
}

fn lines_with_terminators(source: &[u8]) -> impl Iterator<Item = &[u8]> {
    let mut rest = source;
    core::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let mut i = 0;
        while i < rest.len() && rest[i] != b'\n' && rest[i] != b'\r' {
            i += 1;
        }
        if i < rest.len() {
            if rest[i] == b'\r' && rest.get(i + 1) == Some(&b'\n') {
                i += 2;
            } else {
                i += 1;
            }
        }
        let (line, tail) = rest.split_at(i);
        rest = tail;
        Some(line)
    })
}

fn floor_i(x: f64) -> i64 {
    crate::math::floor(x) as i64
}

fn ceil_i(x: f64) -> i64 {
    crate::math::ceil(x) as i64
}

struct VecWriter<'a>(&'a mut Vec<u8>);

impl fmt::Write for VecWriter<'_> {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

/// Rewrite the document: original header (bounding box rescaled when a
/// width was requested), the suppression prologue, the original body
/// wrapped in a state bracket inside the private dictionary, and a trailer
/// that paints every placement with a real `show`.
pub fn emit_relabeled_eps(original: &[u8], plan: &EmitPlan, spec: &RelabelSpec) -> Vec<u8> {
    let header_end = header_len(original);
    let (header, body) = original.split_at(header_end);
    let (body, had_eof) = split_trailing_eof(body);

    let mut out = Vec::with_capacity(original.len() + 1024);
    // re-derive the metadata; the caller already parsed it successfully
    let meta = crate::dsc::parse_dsc(original).unwrap_or_default();
    rewrite_header(&mut out, header, &meta, plan.scale);
    if !out.is_empty() && !out.ends_with(b"\n") {
        out.push(b'\n');
    }

    suppression_prologue(&mut out, &plan.suppress);

    out.extend_from_slice(b"/FRLsaved save def\nFRLdict begin\ngsave\n");
    if plan.scale != 1.0 {
        let _ = writeln!(VecWriter(&mut out), "{:.6} {:.6} scale", plan.scale, plan.scale);
    }
    out.extend_from_slice(body);
    if !out.ends_with(b"\n") {
        out.push(b'\n');
    }
    out.extend_from_slice(b"grestore\nend\nFRLsaved restore\n");

    for placement in &plan.placements {
        let _ = writeln!(
            VecWriter(&mut out),
            "/{} findfont {} scalefont setfont",
            spec.font_name,
            spec.font_size.bp_value()
        );
        let _ = writeln!(
            VecWriter(&mut out),
            "{:.6} {:.6} moveto",
            (placement.anchor.x + placement.dx) * plan.scale,
            (placement.anchor.y + placement.dy) * plan.scale
        );
        out.extend_from_slice(&encode_ps_string(&placement.text));
        out.extend_from_slice(b" show\n");
    }

    if had_eof {
        out.extend_from_slice(b"%%EOF\n");
    }

    debug_assert!(
        crate::syntax::tokenize(&out).is_ok(),
        "generated document must re-tokenize"
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListingFormat {
    Tsv,
    Json,
}

/// One row per recorded label, in sequence order. Label bytes are escaped
/// (`\xHH` outside printable ASCII) in both formats, so the JSON is always
/// valid UTF-8 even for binary label strings.
pub fn emit_label_listing(table: &LabelTable, format: ListingFormat) -> String {
    let mut out = String::new();
    match format {
        ListingFormat::Tsv => {
            out.push_str("seq\tx\ty\ttext\n");
            for r in table {
                let _ = writeln!(
                    out,
                    "{}\t{:.6}\t{:.6}\t{}",
                    r.seq, r.anchor.x, r.anchor.y,
                    escape_field(&r.bytes)
                );
            }
        }
        ListingFormat::Json => {
            if table.is_empty() {
                out.push_str("[]\n");
                return out;
            }
            out.push_str("[\n");
            for (i, r) in table.iter().enumerate() {
                let comma = if i + 1 < table.len() { "," } else { "" };
                let _ = writeln!(
                    out,
                    "  {{\"seq\": {}, \"x\": {:.6}, \"y\": {:.6}, \"text\": \"{}\"}}{}",
                    r.seq,
                    r.anchor.x,
                    r.anchor.y,
                    json_escape(&escape_field(&r.bytes)),
                    comma
                );
            }
            out.push_str("]\n");
        }
    }
    out
}

fn json_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out
}

/// Placement coordinates in figure space (pre-scale), for typesetting
/// overlays elsewhere.
pub fn emit_tex_overlay(plan: &EmitPlan) -> String {
    let mut out = String::new();
    for p in &plan.placements {
        let _ = writeln!(
            out,
            "label {:.6} {:.6} \"{}\"",
            p.anchor.x + p.dx,
            p.anchor.y + p.dy,
            escape_quoted(&p.text)
        );
    }
    out
}
