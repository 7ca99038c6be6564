//! Recorded label anchors and the lookup rule used to resolve directives.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::matrix::Point;

/// One intercepted show: the exact string bytes, the device-space point the
/// text would have started at, and a monotone sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub bytes: Vec<u8>,
    pub anchor: Point,
    pub seq: u32,
}

/// Append-only store of recorded labels plus a byte-string index.
#[derive(Debug, Clone, Default)]
pub struct LabelTable {
    records: Vec<LabelRecord>,
    by_bytes: BTreeMap<Vec<u8>, Vec<u32>>,
}

const NO_MATCHES: &[u32] = &[];

impl LabelTable {
    pub fn new() -> LabelTable {
        LabelTable::default()
    }

    /// Record a label; returns its sequence number.
    pub fn append(&mut self, bytes: Vec<u8>, anchor: Point) -> u32 {
        let seq = self.records.len() as u32;
        self.by_bytes.entry(bytes.clone()).or_default().push(seq);
        self.records.push(LabelRecord { bytes, anchor, seq });
        seq
    }

    /// Look up `sought` by exact byte equality.
    ///
    /// When several records share the same bytes the LOWEST sequence number
    /// wins. The interception prologue scans its recorded triples from the
    /// newest to the oldest and lets every match overwrite the result
    /// registers, so the first-recorded occurrence is the survivor; the
    /// same rule is encoded here directly as a min-seq lookup. With no
    /// match the caller's own fallback point comes back untouched (the
    /// prologue's zero-length branch leaves its position registers at the
    /// caller's coordinates, a net zero translate).
    pub fn find_label(&self, sought: &[u8], fallback: Point) -> (Point, bool) {
        match self.by_bytes.get(sought).and_then(|seqs| seqs.first()) {
            Some(&seq) => (self.records[seq as usize].anchor, true),
            None => (fallback, false),
        }
    }

    /// All sequence numbers recorded for `sought`, ascending. Lets callers
    /// warn about duplicate label strings, which the lookup rule would
    /// otherwise silently collapse.
    pub fn matches(&self, sought: &[u8]) -> &[u32] {
        self.by_bytes
            .get(sought)
            .map(|v| v.as_slice())
            .unwrap_or(NO_MATCHES)
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, LabelRecord> {
        self.records.iter()
    }

    /// Rebuild the index from the record list and compare; test support for
    /// the index-consistency invariant.
    #[doc(hidden)]
    pub fn index_is_consistent(&self) -> bool {
        let mut rebuilt: BTreeMap<Vec<u8>, Vec<u32>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.seq != i as u32 {
                return false;
            }
            rebuilt.entry(r.bytes.clone()).or_default().push(r.seq);
        }
        rebuilt == self.by_bytes
    }
}

impl<'a> IntoIterator for &'a LabelTable {
    type Item = &'a LabelRecord;
    type IntoIter = core::slice::Iter<'a, LabelRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_assigns_sequential_numbers() {
        let mut t = LabelTable::new();
        assert_eq!(t.append(b"Bc".to_vec(), Point::new(72.0, 50.0)), 0);
        assert_eq!(t.append(b"Bc".to_vec(), Point::new(1.0, 1.0)), 1);
        assert_eq!(t.append(b"Ab".to_vec(), Point::new(2.0, 2.0)), 2);
        assert!(t.index_is_consistent());
    }

    #[test]
    fn find_single_match() {
        let mut t = LabelTable::new();
        t.append(b"Bc".to_vec(), Point::new(72.0, 50.0));
        let (p, found) = t.find_label(b"Bc", Point::ZERO);
        assert!(found);
        assert_eq!(p, Point::new(72.0, 50.0));
    }

    #[test]
    fn missing_label_returns_fallback_bits() {
        let t = LabelTable::new();
        let fallback = Point::new(5.0, 5.0);
        let (p, found) = t.find_label(b"Zz", fallback);
        assert!(!found);
        assert!(p.bits_eq(&fallback));
    }

    #[test]
    fn first_occurrence_wins() {
        let mut t = LabelTable::new();
        t.append(b"P".to_vec(), Point::new(1.0, 1.0));
        t.append(b"P".to_vec(), Point::new(9.0, 9.0));
        let (p, found) = t.find_label(b"P", Point::ZERO);
        assert!(found);
        assert_eq!(p, Point::new(1.0, 1.0));
        assert_eq!(t.matches(b"P"), &[0, 1]);
    }

    #[test]
    fn matching_is_byte_exact() {
        let mut t = LabelTable::new();
        t.append(b"Bc".to_vec(), Point::new(1.0, 2.0));
        assert!(!t.find_label(b"Bc ", Point::ZERO).1);
        assert!(!t.find_label(b"bc", Point::ZERO).1);
        assert!(t.find_label(b"Bc", Point::ZERO).1);
    }
}
