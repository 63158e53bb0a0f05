//! Accept/reject curation log with a latest-wins view.
//!
//! The log is append-only; [`CurationView`] is the fold of that log, so
//! replaying the records from the start always rebuilds the live view.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRecord {
    /// Position in the log, starting at 0.
    pub seq: u64,
    pub frame_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub reviewer: String,
    pub timestamp_ms: u64,
    /// Client-chosen key; a retried submission with the same key is not
    /// recorded twice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CurationView {
    latest: BTreeMap<String, VerdictRecord>,
    history: BTreeMap<String, usize>,
    keys: BTreeMap<String, VerdictRecord>,
    accepted: usize,
    records: u64,
}

impl CurationView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn replay<'a>(records: impl IntoIterator<Item = &'a VerdictRecord>) -> Self {
        let mut view = CurationView::new();
        for r in records {
            view.apply(r.clone());
        }
        view
    }

    /// Folds one record; later records supersede earlier ones per frame.
    pub fn apply(&mut self, record: VerdictRecord) {
        *self.history.entry(record.frame_id.clone()).or_default() += 1;
        if let Some(key) = &record.idempotency_key {
            self.keys.insert(key.clone(), record.clone());
        }
        self.records += 1;
        if record.decision == Decision::Accept {
            self.accepted += 1;
        }
        if let Some(prev) = self.latest.insert(record.frame_id.clone(), record) {
            if prev.decision == Decision::Accept {
                self.accepted -= 1;
            }
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.records
    }

    pub fn latest(&self, frame_id: &str) -> Option<&VerdictRecord> {
        self.latest.get(frame_id)
    }

    /// The record stored under an idempotency key, if any.
    pub fn by_key(&self, key: &str) -> Option<&VerdictRecord> {
        self.keys.get(key)
    }

    pub fn decision(&self, frame_id: &str) -> Option<Decision> {
        self.latest.get(frame_id).map(|r| r.decision)
    }

    pub fn history_len(&self, frame_id: &str) -> usize {
        self.history.get(frame_id).copied().unwrap_or(0)
    }

    /// Frames with at least one verdict.
    pub fn reviewed(&self) -> usize {
        self.latest.len()
    }

    /// Frames whose latest verdict is Accept.
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.reviewed() > 0).then(|| self.accepted as f64 / self.reviewed() as f64)
    }

    /// Accepted frame ids in lexicographic order.
    pub fn curated(&self) -> Vec<&str> {
        self.latest
            .values()
            .filter(|r| r.decision == Decision::Accept)
            .map(|r| r.frame_id.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn rec(seq: u64, frame: &str, decision: Decision) -> VerdictRecord {
        VerdictRecord {
            seq,
            frame_id: frame.to_string(),
            decision,
            note: None,
            reviewer: "r1".to_string(),
            timestamp_ms: 1_000 + seq,
            idempotency_key: None,
        }
    }

    #[test]
    fn supersession() {
        let mut v = CurationView::new();
        v.apply(rec(0, "a", Decision::Reject));
        v.apply(rec(1, "a", Decision::Accept));
        assert_eq!(v.decision("a"), Some(Decision::Accept));
        assert_eq!(v.history_len("a"), 2);
        assert_eq!((v.accepted(), v.reviewed()), (1, 1));
        v.apply(rec(2, "a", Decision::Reject));
        assert_eq!((v.accepted(), v.reviewed()), (0, 1));
        assert!(v.curated().is_empty());
    }

    #[test]
    fn curated_in_id_order() {
        let log = [
            rec(0, "c", Decision::Accept),
            rec(1, "a", Decision::Accept),
            rec(2, "b", Decision::Reject),
            rec(3, "e", Decision::Accept),
            rec(4, "d", Decision::Reject),
        ];
        let v = CurationView::replay(&log);
        assert_eq!(v.curated(), vec!["a", "c", "e"]);
        assert_eq!(CurationView::new().curated(), Vec::<&str>::new());
        assert_eq!(CurationView::new().acceptance_rate(), None);
    }

    #[test]
    fn replay_matches_live_fold() {
        let mut live = CurationView::new();
        let mut log = Vec::new();
        for i in 0..200u64 {
            let d = if (i * 7) % 3 == 0 { Decision::Accept } else { Decision::Reject };
            let r = rec(i, &format!("f{:03}", (i * 13) % 57), d);
            live.apply(r.clone());
            log.push(r);
        }
        assert_eq!(CurationView::replay(&log), live);
        let recount = live.curated().len();
        assert_eq!(recount, live.accepted());
    }

    #[test]
    fn keyed_records_are_indexed() {
        let mut v = CurationView::new();
        let mut r = rec(0, "a", Decision::Accept);
        r.idempotency_key = Some("s1:0".to_string());
        v.apply(r.clone());
        assert_eq!(v.by_key("s1:0"), Some(&r));
        assert_eq!(v.by_key("s1:1"), None);
        let json = serde_json::to_string(&rec(1, "b", Decision::Reject)).unwrap();
        assert!(!json.contains("idempotency_key"));
    }
}
