//! Document Structuring Convention header scanning.
//!
//! Only the handful of comments the relabel pipeline needs: the EPS
//! signature, `%%BoundingBox` (including the `(atend)` deferral), and
//! `%%Title`. Everything else is kept verbatim so a rewrite can reproduce
//! the header.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub llx: f64,
    pub lly: f64,
    pub urx: f64,
    pub ury: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.urx - self.llx
    }

    pub fn height(&self) -> f64 {
        self.ury - self.lly
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentMeta {
    pub bounding_box: Option<BoundingBox>,
    pub is_eps: bool,
    pub title: Option<String>,
    /// Remaining DSC lines, in document order, verbatim.
    pub other_comments: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DscError {
    /// A `%%BoundingBox` comment exists but does not carry four numbers
    /// (or describes an empty/inverted box). Carries the 1-based line.
    MalformedBoundingBox { line: u32 },
}

impl fmt::Display for DscError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DscError::MalformedBoundingBox { line } => {
                write!(f, "malformed %%BoundingBox comment on line {}", line)
            }
        }
    }
}

impl core::error::Error for DscError {}

/// Iterate raw lines without their terminators; LF, CRLF and CR all end a
/// line.
pub(crate) fn split_lines(source: &[u8]) -> impl Iterator<Item = &[u8]> {
    let mut rest = source;
    core::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let end = rest
            .iter()
            .position(|&b| b == b'\n' || b == b'\r')
            .unwrap_or(rest.len());
        let line = &rest[..end];
        rest = match rest.get(end) {
            Some(b'\r') if rest.get(end + 1) == Some(&b'\n') => &rest[end + 2..],
            Some(_) => &rest[end + 1..],
            None => &rest[rest.len()..],
        };
        Some(line)
    })
}

fn parse_bbox_line(rest: &[u8], line_no: u32) -> Result<Option<BoundingBox>, DscError> {
    let text = core::str::from_utf8(rest).map_err(|_| DscError::MalformedBoundingBox {
        line: line_no,
    })?;
    let text = text.trim();
    if text == "(atend)" {
        return Ok(None);
    }
    let nums: Vec<f64> = text
        .split_ascii_whitespace()
        .map(|w| w.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| DscError::MalformedBoundingBox { line: line_no })?;
    if nums.len() != 4 {
        return Err(DscError::MalformedBoundingBox { line: line_no });
    }
    let bbox = BoundingBox {
        llx: nums[0],
        lly: nums[1],
        urx: nums[2],
        ury: nums[3],
    };
    if bbox.urx < bbox.llx || bbox.ury < bbox.lly {
        return Err(DscError::MalformedBoundingBox { line: line_no });
    }
    Ok(Some(bbox))
}

/// Scan the whole document for DSC metadata. The first `%%BoundingBox`
/// wins; an `(atend)` value defers to the next one that carries numbers.
pub fn parse_dsc(source: &[u8]) -> Result<DocumentMeta, DscError> {
    let mut meta = DocumentMeta::default();
    let mut bbox_seen = false;
    let mut bbox_deferred = false;

    for (idx, line) in split_lines(source).enumerate() {
        let line_no = (idx + 1) as u32;
        let is_dsc = line.starts_with(b"%%") || line.starts_with(b"%!");
        if !is_dsc {
            continue;
        }
        if idx == 0 && line.starts_with(b"%!") {
            if line.starts_with(b"%!PS-Adobe") && window_contains(line, b"EPSF") {
                meta.is_eps = true;
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix(b"%%BoundingBox:".as_slice()) {
            if !bbox_seen || (bbox_deferred && meta.bounding_box.is_none()) {
                match parse_bbox_line(rest, line_no)? {
                    Some(bbox) => {
                        meta.bounding_box = Some(bbox);
                        bbox_deferred = false;
                    }
                    None => bbox_deferred = true,
                }
                bbox_seen = true;
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix(b"%%Title:".as_slice()) {
            if meta.title.is_none() {
                meta.title = Some(String::from_utf8_lossy(rest).trim().into());
                continue;
            }
        }
        meta.other_comments.push(line.to_vec());
    }
    Ok(meta)
}

fn window_contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}
