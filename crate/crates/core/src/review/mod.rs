//! Expert review queue for corrected drafts: Affected first, first decision
//! wins, every change recorded in a hash-chained audit log.

mod audit;

pub use audit::{
    body_hash, verify_chain, AuditAction, AuditBody, AuditEntry, ChainError, GENESIS_HASH,
};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::corpus::{write_store, Evaluation, EvaluationKey, VexCategory, VexJustification};
use crate::cvss::{score, CvssVector};
use crate::inference::{apply_correction_rules, EvaluationDraft};

pub type ItemId = u64;

pub const AUDIT_LOG_FILE: &str = "audit.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Edited,
    Rejected,
}

impl ReviewStatus {
    pub fn from_label(label: &str) -> Option<Self> {
        [Self::Pending, Self::Accepted, Self::Edited, Self::Rejected]
            .into_iter()
            .find(|s| format!("{s:?}").eq_ignore_ascii_case(label.trim()))
    }
}

/// Queue position: lower category rank first, then higher score, then
/// earlier enqueue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priority {
    /// 0 Affected, 1 category unreadable, 2 NotAffected.
    pub category_rank: u8,
    /// Environmental score, else temporal, else base.
    pub score: Option<f64>,
    pub enqueue_seq: u64,
    pub enqueued_at: DateTime<Utc>,
}

impl Priority {
    /// Total order over priorities; `Less` is served first.
    pub fn queue_cmp(&self, other: &Self) -> Ordering {
        let score = |p: &Self| p.score.unwrap_or(f64::NEG_INFINITY);
        self.category_rank
            .cmp(&other.category_rank)
            .then_with(|| score(other).total_cmp(&score(self)))
            .then_with(|| self.enqueue_seq.cmp(&other.enqueue_seq))
    }
}

/// Rank of a draft category; `None` for categories that are never queued.
pub fn category_rank(category: Option<VexCategory>) -> Option<u8> {
    match category {
        Some(VexCategory::Affected) => Some(0),
        None => Some(1),
        Some(VexCategory::NotAffected) => Some(2),
        Some(VexCategory::UnderInvestigation | VexCategory::EndOfLife) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: ItemId,
    pub draft: EvaluationDraft,
    pub priority: Priority,
    pub status: ReviewStatus,
    pub reviewer: Option<String>,
    pub decided_at: Option<DateTime<Utc>>,
    pub note: Option<String>,
    /// Evaluation released by an Accept or Edit decision.
    pub result: Option<Evaluation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionAction {
    Accept,
    Edit,
    Reject,
}

fn present<'de, D, T>(deserializer: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(deserializer).map(Some)
}

/// Fields replaced by an Edit decision. For `vector`, an absent key keeps
/// the draft vector and `null` clears it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vex_category: Option<VexCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vex_justification: Option<VexJustification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_comment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer_comment: Option<String>,
    #[serde(
        default,
        deserialize_with = "present",
        skip_serializing_if = "Option::is_none"
    )]
    pub vector: Option<Option<CvssVector>>,
}

impl EvaluationPatch {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// `base` with the patched fields replaced; the score follows the vector.
    pub fn apply(&self, base: &Evaluation) -> Evaluation {
        let mut out = base.clone();
        if let Some(c) = self.vex_category {
            out.vex_category = Some(c);
        }
        if let Some(j) = self.vex_justification {
            out.vex_justification = j;
        }
        if let Some(t) = &self.internal_comment {
            out.internal_comment = t.clone();
        }
        if let Some(t) = &self.customer_comment {
            out.customer_comment = t.clone();
        }
        if let Some(v) = &self.vector {
            out.vector = v.clone();
            out.cvss_score = v
                .as_ref()
                .and_then(|v| score(v).ok())
                .map(|s| s.most_specific());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub action: DecisionAction,
    #[serde(default)]
    pub edited_fields: Option<EvaluationPatch>,
    #[serde(default)]
    pub note: String,
}

impl Decision {
    pub fn accept() -> Self {
        Self {
            action: DecisionAction::Accept,
            edited_fields: None,
            note: String::new(),
        }
    }

    pub fn reject(note: &str) -> Self {
        Self {
            action: DecisionAction::Reject,
            edited_fields: None,
            note: note.to_string(),
        }
    }

    pub fn edit(patch: EvaluationPatch) -> Self {
        Self {
            action: DecisionAction::Edit,
            edited_fields: Some(patch),
            note: String::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("review item {0} not found")]
    NotFound(ItemId),
    #[error("review item {item_id} already decided ({status:?})")]
    AlreadyDecided {
        item_id: ItemId,
        status: ReviewStatus,
    },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("{key}: category {category} is not reviewed")]
    NotReviewable {
        key: EvaluationKey,
        category: VexCategory,
    },
    #[error("review storage: {0}")]
    Storage(String),
    #[error("audit log: {0}")]
    Chain(#[from] ChainError),
}

impl From<std::io::Error> for ReviewError {
    fn from(e: std::io::Error) -> Self {
        Self::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnqueueOutcome {
    pub item_id: ItemId,
    /// False when the evaluation key was already queued.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageQuery {
    /// Last item of the previous page.
    pub cursor: Option<ItemId>,
    pub page_size: usize,
    /// `None` lists every status.
    pub status: Option<ReviewStatus>,
    pub category: Option<VexCategory>,
}

impl Default for PageQuery {
    fn default() -> Self {
        Self {
            cursor: None,
            page_size: DEFAULT_PAGE_SIZE,
            status: Some(ReviewStatus::Pending),
            category: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub items: Vec<ReviewItem>,
    pub next_cursor: Option<ItemId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    audit_len: u64,
    items: Vec<ReviewItem>,
}

#[derive(Default)]
struct State {
    items: BTreeMap<ItemId, ReviewItem>,
    by_key: HashMap<EvaluationKey, ItemId>,
    audit: Vec<AuditEntry>,
}

impl State {
    fn apply(&mut self, item: ReviewItem) {
        self.by_key
            .insert(item.draft.evaluation_key.clone(), item.item_id);
        self.items.insert(item.item_id, item);
    }
}

/// Review state behind one lock. Mutations append to the audit log before
/// they become visible.
pub struct ReviewQueue {
    state: RwLock<State>,
    dir: Option<PathBuf>,
}

impl Default for ReviewQueue {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ReviewQueue {
    pub fn in_memory() -> Self {
        Self {
            state: RwLock::new(State::default()),
            dir: None,
        }
    }

    /// Opens a queue persisted in `dir`: the snapshot if present, then the
    /// audit entries written after it. The whole audit chain is verified.
    pub fn open(dir: &Path) -> Result<Self, ReviewError> {
        fs::create_dir_all(dir)?;
        let mut state = State::default();
        let log_path = dir.join(AUDIT_LOG_FILE);
        if log_path.exists() {
            for (n, line) in BufReader::new(File::open(&log_path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: AuditEntry = serde_json::from_str(&line).map_err(|e| {
                    ReviewError::Storage(format!("{}:{}: {e}", log_path.display(), n + 1))
                })?;
                state.audit.push(entry);
            }
        }
        verify_chain(&state.audit)?;

        let mut replay_from = 0;
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        if snapshot_path.exists() {
            let snapshot: Snapshot = serde_json::from_str(&fs::read_to_string(&snapshot_path)?)
                .map_err(|e| ReviewError::Storage(format!("{}: {e}", snapshot_path.display())))?;
            if snapshot.audit_len as usize > state.audit.len() {
                return Err(ReviewError::Storage(format!(
                    "snapshot covers {} audit entries but the log has {}",
                    snapshot.audit_len,
                    state.audit.len()
                )));
            }
            replay_from = snapshot.audit_len as usize;
            for item in snapshot.items {
                state.apply(item);
            }
        }
        let tail: Vec<ReviewItem> = state.audit[replay_from..]
            .iter()
            .map(|e| e.body.after.clone())
            .collect();
        for item in tail {
            state.apply(item);
        }
        tracing::info!(
            items = state.items.len(),
            audit = state.audit.len(),
            replayed = state.audit.len() - replay_from,
            "review queue opened"
        );
        Ok(Self {
            state: RwLock::new(state),
            dir: Some(dir.to_path_buf()),
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn append(
        &self,
        state: &mut State,
        actor: &str,
        action: AuditAction,
        before: Option<ReviewItem>,
        after: ReviewItem,
    ) -> Result<(), ReviewError> {
        let body = AuditBody {
            seq: state.audit.len() as u64,
            item_id: after.item_id,
            actor: actor.to_string(),
            action,
            before,
            after: after.clone(),
            timestamp: Utc::now(),
            prev_hash: state
                .audit
                .last()
                .map_or_else(|| GENESIS_HASH.to_string(), |e| e.hash.clone()),
        };
        let entry = AuditEntry::seal(body);
        if let Some(dir) = &self.dir {
            let mut line =
                serde_json::to_string(&entry).map_err(|e| ReviewError::Storage(e.to_string()))?;
            line.push('\n');
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(AUDIT_LOG_FILE))?;
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        state.audit.push(entry);
        state.apply(after);
        Ok(())
    }

    /// Queues a draft after applying the correction rules. Re-enqueueing an
    /// evaluation key returns the existing item.
    pub fn enqueue(
        &self,
        draft: EvaluationDraft,
        actor: &str,
    ) -> Result<EnqueueOutcome, ReviewError> {
        let draft = apply_correction_rules(draft);
        let rank = category_rank(draft.vex_category).ok_or_else(|| ReviewError::NotReviewable {
            key: draft.evaluation_key.clone(),
            category: draft.vex_category.expect("unranked categories are present"),
        })?;
        let mut state = self.write();
        if let Some(&item_id) = state.by_key.get(&draft.evaluation_key) {
            return Ok(EnqueueOutcome {
                item_id,
                created: false,
            });
        }
        let item_id = state.items.keys().next_back().map_or(1, |k| k + 1);
        let item = ReviewItem {
            item_id,
            priority: Priority {
                category_rank: rank,
                score: draft.cvss_score,
                enqueue_seq: item_id,
                enqueued_at: Utc::now(),
            },
            draft,
            status: ReviewStatus::Pending,
            reviewer: None,
            decided_at: None,
            note: None,
            result: None,
        };
        self.append(&mut state, actor, AuditAction::Enqueue, None, item)?;
        Ok(EnqueueOutcome {
            item_id,
            created: true,
        })
    }

    pub fn get(&self, item_id: ItemId) -> Option<ReviewItem> {
        self.read().items.get(&item_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.read().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Items matching the query in queue order, starting after the cursor.
    pub fn next_page(&self, query: &PageQuery) -> Page {
        let state = self.read();
        let mut items: Vec<&ReviewItem> = state
            .items
            .values()
            .filter(|i| query.status.is_none_or(|s| i.status == s))
            .filter(|i| {
                query
                    .category
                    .is_none_or(|c| i.draft.vex_category == Some(c))
            })
            .collect();
        items.sort_by(|a, b| a.priority.queue_cmp(&b.priority));
        let start = match query.cursor {
            None => 0,
            Some(cursor) => match state.items.get(&cursor) {
                Some(c) => items
                    .partition_point(|i| i.priority.queue_cmp(&c.priority) != Ordering::Greater),
                None => items.len(),
            },
        };
        let size = query.page_size.clamp(1, MAX_PAGE_SIZE);
        let page: Vec<ReviewItem> = items[start..]
            .iter()
            .take(size)
            .map(|i| (*i).clone())
            .collect();
        let next_cursor = (start + page.len() < items.len())
            .then(|| page.last().map(|i| i.item_id))
            .flatten();
        Page {
            items: page,
            next_cursor,
        }
    }

    /// Moves a Pending item to its decided status. The first decision on an
    /// item wins.
    pub fn submit_decision(
        &self,
        item_id: ItemId,
        decision: &Decision,
        reviewer: &str,
    ) -> Result<ReviewItem, ReviewError> {
        let mut state = self.write();
        let before = state
            .items
            .get(&item_id)
            .cloned()
            .ok_or(ReviewError::NotFound(item_id))?;
        if before.status != ReviewStatus::Pending {
            return Err(ReviewError::AlreadyDecided {
                item_id,
                status: before.status,
            });
        }
        let base = before.draft.to_evaluation();
        let (status, action, result) = match decision.action {
            DecisionAction::Accept => {
                base.check_invariants()
                    .map_err(|e| ReviewError::InvalidEdit(e.to_string()))?;
                (ReviewStatus::Accepted, AuditAction::Accept, Some(base))
            }
            DecisionAction::Reject => (ReviewStatus::Rejected, AuditAction::Reject, None),
            DecisionAction::Edit => {
                let patch = decision
                    .edited_fields
                    .as_ref()
                    .filter(|p| !p.is_empty())
                    .ok_or_else(|| {
                        ReviewError::InvalidEdit("edit requires edited fields".into())
                    })?;
                let edited = patch.apply(&base);
                edited
                    .check_invariants()
                    .map_err(|e| ReviewError::InvalidEdit(e.to_string()))?;
                (ReviewStatus::Edited, AuditAction::Edit, Some(edited))
            }
        };
        let after = ReviewItem {
            status,
            reviewer: Some(reviewer.to_string()),
            decided_at: Some(Utc::now()),
            note: (!decision.note.is_empty()).then(|| decision.note.clone()),
            result,
            ..before.clone()
        };
        self.append(&mut state, reviewer, action, Some(before), after.clone())?;
        tracing::debug!(item_id, ?status, reviewer, "decision recorded");
        Ok(after)
    }

    pub fn audit_entries(&self) -> Vec<AuditEntry> {
        self.read().audit.clone()
    }

    pub fn verify_audit(&self) -> Result<(), ChainError> {
        verify_chain(&self.read().audit)
    }

    /// Evaluations of Accepted and Edited items in enqueue order.
    pub fn accepted_evaluations(&self) -> Vec<Evaluation> {
        self.read()
            .items
            .values()
            .filter_map(|i| i.result.clone())
            .collect()
    }

    /// Writes accepted evaluations in the evaluation store format and
    /// returns how many were written.
    pub fn export_accepted(&self, path: &Path) -> Result<usize, ReviewError> {
        let evaluations = self.accepted_evaluations();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_store(path, &evaluations)?;
        Ok(evaluations.len())
    }

    /// Writes the current items so the next open replays only later audit
    /// entries. A no-op for in-memory queues.
    pub fn snapshot(&self) -> Result<(), ReviewError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let state = self.read();
        let snapshot = Snapshot {
            audit_len: state.audit.len() as u64,
            items: state.items.values().cloned().collect(),
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(
            &tmp,
            serde_json::to_vec(&snapshot).map_err(|e| ReviewError::Storage(e.to_string()))?,
        )?;
        fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        tracing::info!(
            items = snapshot.items.len(),
            audit_len = snapshot.audit_len,
            "review snapshot written"
        );
        Ok(())
    }
}
