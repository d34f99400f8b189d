//! Okapi BM25 over evidence units, two-stage note -> unit retrieval with
//! diversity constraints, and budgeted evidence packing with dropout.
//!
//! Scoring uses the non-negative IDF form
//! `ln((N - df + 0.5) / (df + 0.5) + 1)`, so every score is `>= 0`.
//! Query terms are deduplicated before scoring.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EvidenceUnit, Note};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::text::{normalize_text, tokens};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexLevel {
    NoteLevel,
    UnitLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParameter(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Term-frequency postings over one subject's documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub version: u32,
    pub level: IndexLevel,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_len: f64,
    /// term -> (document position, term frequency), ascending by position.
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl InvertedIndex {
    /// Index `(doc_id, text)` pairs. Text is normalized, then split on whitespace.
    pub fn build<'a, I>(docs: I, level: IndexLevel) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut doc_ids = Vec::new();
        let mut doc_lengths = Vec::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (pos, (id, text)) in docs.into_iter().enumerate() {
            let pos = pos as u32;
            let normalized = normalize_text(text);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            let mut len = 0u32;
            for tok in tokens(&normalized) {
                *tf.entry(tok).or_default() += 1;
                len += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_owned()).or_default().push((pos, count));
            }
            doc_ids.push(id.to_owned());
            doc_lengths.push(len);
        }
        if doc_ids.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let avg_doc_len = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_ids.len() as f64;
        let mut index = Self {
            version: INDEX_FORMAT_VERSION,
            level,
            doc_ids,
            doc_lengths,
            avg_doc_len,
            postings,
            lookup: HashMap::new(),
        };
        index.rebuild_lookup();
        Ok(index)
    }

    pub fn for_notes(notes: &[Note]) -> Result<Self> {
        Self::build(
            notes.iter().map(|n| (n.note_id.as_str(), n.text.as_str())),
            IndexLevel::NoteLevel,
        )
    }

    pub fn for_units(units: &[EvidenceUnit]) -> Result<Self> {
        Self::build(
            units.iter().map(|u| (u.unit_id.as_str(), u.text.as_str())),
            IndexLevel::UnitLevel,
        )
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.lookup.get(doc_id).map(|&p| p as usize)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        idf(self.doc_count() as f64, df)
    }

    /// BM25 score of one document for the given query terms.
    pub fn bm25_score(&self, query_terms: &[&str], doc_id: &str, params: &Bm25Params) -> Result<f64> {
        let pos = self
            .position(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))? as u32;
        let len = self.doc_lengths[pos as usize] as f64;
        let mut score = 0.0;
        for term in distinct(query_terms) {
            let Some(list) = self.postings.get(term) else { continue };
            if let Ok(i) = list.binary_search_by_key(&pos, |&(p, _)| p) {
                let tf = list[i].1 as f64;
                score += idf(self.doc_count() as f64, list.len() as f64)
                    * tf_component(tf, len, self.avg_doc_len, params);
            }
        }
        Ok(score)
    }

    /// Scores for every document, indexed by document position.
    pub fn score_all(&self, query_terms: &[&str], params: &Bm25Params) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        let n = self.doc_count() as f64;
        for term in distinct(query_terms) {
            let Some(list) = self.postings.get(term) else { continue };
            let w = idf(n, list.len() as f64);
            for &(pos, tf) in list {
                let len = self.doc_lengths[pos as usize] as f64;
                scores[pos as usize] += w * tf_component(tf as f64, len, self.avg_doc_len, params);
            }
        }
        scores
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut index: Self = serde_json::from_str(text)?;
        if index.version != INDEX_FORMAT_VERSION {
            return Err(Error::IndexVersion {
                found: index.version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        index.rebuild_lookup();
        Ok(index)
    }
}

fn distinct<'a>(terms: &[&'a str]) -> BTreeSet<&'a str> {
    terms.iter().copied().collect()
}

fn idf(n: f64, df: f64) -> f64 {
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

fn tf_component(tf: f64, len: f64, avg_len: f64, p: &Bm25Params) -> f64 {
    tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * len / avg_len))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalParams {
    pub top_n_notes: usize,
    pub top_k_units: usize,
    pub k1: f64,
    pub b: f64,
    pub cap_per_note: usize,
    pub dedup: bool,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            top_n_notes: 35,
            top_k_units: 50,
            k1: 1.2,
            b: 0.75,
            cap_per_note: 10,
            dedup: true,
        }
    }
}

impl RetrievalParams {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn validate(&self) -> Result<()> {
        self.bm25().validate()?;
        if self.top_n_notes == 0 || self.top_k_units == 0 || self.cap_per_note == 0 {
            return Err(Error::InvalidParameter(
                "top_n_notes, top_k_units and cap_per_note must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub unit_id: String,
    pub note_id: String,
    pub score: f64,
    pub rank: usize,
}

/// One line of an exported retrieval trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub claim_id: String,
    pub unit_id: String,
    pub score: f64,
    pub rank: usize,
}

pub fn trace_records(claim_id: &str, hits: &[RetrievalHit]) -> Vec<TraceRecord> {
    hits.iter()
        .map(|h| TraceRecord {
            claim_id: claim_id.to_owned(),
            unit_id: h.unit_id.clone(),
            score: h.score,
            rank: h.rank,
        })
        .collect()
}

/// A subject's evidence units together with their note- and unit-level indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectCorpus {
    pub subject_id: String,
    pub units: Vec<EvidenceUnit>,
    pub note_index: InvertedIndex,
    pub unit_index: InvertedIndex,
}

impl SubjectCorpus {
    /// Build both indexes. `notes` and `units` must belong to one subject with
    /// excluded notes already removed.
    pub fn build(subject_id: &str, notes: &[Note], units: Vec<EvidenceUnit>) -> Result<Self> {
        let note_index = InvertedIndex::for_notes(notes)?;
        let unit_index = InvertedIndex::for_units(&units)?;
        Ok(Self {
            subject_id: subject_id.to_owned(),
            units,
            note_index,
            unit_index,
        })
    }

    pub fn unit(&self, unit_id: &str) -> Option<&EvidenceUnit> {
        self.unit_index.position(unit_id).map(|p| &self.units[p])
    }

    /// Restore lookups after deserialization.
    pub fn reindex(&mut self) {
        self.note_index.rebuild_lookup();
        self.unit_index.rebuild_lookup();
    }
}

fn by_score_then_id(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Notes selected by the first stage, best first.
pub fn select_notes(claim: &str, corpus: &SubjectCorpus, params: &RetrievalParams) -> Vec<String> {
    let normalized = normalize_text(claim);
    let terms: Vec<&str> = tokens(&normalized).collect();
    let scores = corpus.note_index.score_all(&terms, &params.bm25());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let ids = &corpus.note_index.doc_ids;
    order.sort_by(|&a, &b| by_score_then_id((scores[a], &ids[a]), (scores[b], &ids[b])));
    order
        .into_iter()
        .take(params.top_n_notes)
        .map(|i| ids[i].clone())
        .collect()
}

/// Stage 1 ranks notes, stage 2 ranks the units of the top notes, then
/// dedup and the per-note cap are applied before cutting at `top_k_units`.
///
/// Unit statistics (df, average length) come from the whole subject corpus;
/// only the candidate set is restricted to the stage-1 notes.
pub fn retrieve_two_stage(claim: &str, corpus: &SubjectCorpus, params: &RetrievalParams) -> Vec<RetrievalHit> {
    let notes: HashSet<String> = select_notes(claim, corpus, params).into_iter().collect();
    let normalized = normalize_text(claim);
    let terms: Vec<&str> = tokens(&normalized).collect();
    let scores = corpus.unit_index.score_all(&terms, &params.bm25());

    let mut candidates: Vec<usize> = (0..corpus.units.len())
        .filter(|&i| notes.contains(&corpus.units[i].note_id))
        .collect();
    candidates.sort_by(|&a, &b| {
        by_score_then_id(
            (scores[a], &corpus.units[a].unit_id),
            (scores[b], &corpus.units[b].unit_id),
        )
    });

    let mut seen_text: HashSet<&str> = HashSet::new();
    let mut per_note: HashMap<&str, usize> = HashMap::new();
    let mut hits = Vec::new();
    for i in candidates {
        if hits.len() >= params.top_k_units {
            break;
        }
        let unit = &corpus.units[i];
        if params.dedup && !seen_text.insert(unit.text.as_str()) {
            continue;
        }
        let used = per_note.entry(unit.note_id.as_str()).or_default();
        if *used >= params.cap_per_note {
            continue;
        }
        *used += 1;
        hits.push(RetrievalHit {
            unit_id: unit.unit_id.clone(),
            note_id: unit.note_id.clone(),
            score: scores[i],
            rank: hits.len(),
        });
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PackParams {
    pub token_budget: usize,
    pub per_item_tokens: usize,
    pub max_items: usize,
    pub dropout_rate: f64,
}

impl Default for PackParams {
    fn default() -> Self {
        Self {
            token_budget: 1600,
            per_item_tokens: 64,
            max_items: 50,
            dropout_rate: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedItem {
    pub text: String,
    pub unit_id: String,
    pub score: f64,
    pub time: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedEvidence {
    pub items: Vec<PackedItem>,
    pub token_budget: usize,
    pub dropped_ids: Vec<String>,
}

impl PackedEvidence {
    pub fn token_count(&self) -> usize {
        self.items.iter().map(|i| i.text.split_whitespace().count()).sum()
    }
}

/// Greedy budgeted packing ordered by (score desc, time asc, unit id asc),
/// followed by seeded per-item dropout.
///
/// Admission stops at the first item that would overflow the budget.
pub fn pack_evidence(
    hits: &[RetrievalHit],
    corpus: &SubjectCorpus,
    params: &PackParams,
    seed: u64,
) -> Result<PackedEvidence> {
    if !(0.0..1.0).contains(&params.dropout_rate) {
        return Err(Error::InvalidParameter(format!(
            "dropout_rate must lie in [0, 1), got {}",
            params.dropout_rate
        )));
    }
    if params.token_budget == 0 {
        return Err(Error::InvalidParameter("token_budget must be > 0".into()));
    }

    let mut ordered: Vec<(&RetrievalHit, &EvidenceUnit)> = hits
        .iter()
        .filter_map(|h| corpus.unit(&h.unit_id).map(|u| (h, u)))
        .collect();
    ordered.sort_by(|a, b| {
        b.0.score
            .total_cmp(&a.0.score)
            .then(a.1.time.cmp(&b.1.time))
            .then_with(|| a.0.unit_id.cmp(&b.0.unit_id))
    });

    let mut used = 0;
    let mut admitted = Vec::new();
    for (hit, unit) in ordered {
        if admitted.len() >= params.max_items {
            break;
        }
        let words: Vec<&str> = unit.text.split_whitespace().take(params.per_item_tokens).collect();
        if used + words.len() > params.token_budget {
            break;
        }
        used += words.len();
        admitted.push(PackedItem {
            text: words.join(" "),
            unit_id: hit.unit_id.clone(),
            score: hit.score,
            time: unit.time,
        });
    }

    let mut dropped_ids = Vec::new();
    if params.dropout_rate > 0.0 {
        let mut rng = rng_for(seed, &["evidence-dropout"]);
        admitted.retain(|item| {
            let drop = rng.gen::<f64>() < params.dropout_rate;
            if drop {
                dropped_ids.push(item.unit_id.clone());
            }
            !drop
        });
    }
    Ok(PackedEvidence {
        items: admitted,
        token_budget: params.token_budget,
        dropped_ids,
    })
}

/// Group notes and units by subject and build one [`SubjectCorpus`] per
/// subject, ordered by subject id. Subjects without units are skipped.
pub fn subject_corpora(notes: &[Note], units: &[EvidenceUnit]) -> Result<Vec<SubjectCorpus>> {
    let mut by_subject: BTreeMap<&str, (Vec<Note>, Vec<EvidenceUnit>)> = BTreeMap::new();
    for n in notes {
        by_subject.entry(n.subject_id.as_str()).or_default().0.push(n.clone());
    }
    for u in units {
        by_subject.entry(u.subject_id.as_str()).or_default().1.push(u.clone());
    }
    let mut out = Vec::with_capacity(by_subject.len());
    for (subject, (notes, units)) in by_subject {
        if units.is_empty() || notes.is_empty() {
            log::warn!("subject {subject} has no evidence units; skipped");
            continue;
        }
        out.push(SubjectCorpus::build(subject, &notes, units)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(note: &str, idx: usize, text: &str, time: i64) -> EvidenceUnit {
        EvidenceUnit {
            unit_id: format!("{note}#{idx}"),
            note_id: note.into(),
            subject_id: "s".into(),
            span_index: idx,
            char_len: text.chars().count(),
            text: text.into(),
            time,
        }
    }

    fn note(id: &str, text: &str) -> Note {
        Note {
            note_id: id.into(),
            subject_id: "s".into(),
            admission_id: None,
            category: String::new(),
            chart_time: 0,
            text: text.into(),
        }
    }

    fn corpus_from(units: Vec<EvidenceUnit>) -> SubjectCorpus {
        let mut by_note: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for u in &units {
            by_note.entry(u.note_id.clone()).or_default().push(u.text.clone());
        }
        let notes: Vec<Note> = by_note.iter().map(|(id, t)| note(id, &t.join("\n"))).collect();
        SubjectCorpus::build("s", &notes, units).unwrap()
    }

    #[test]
    fn two_doc_index_counts() {
        let idx = InvertedIndex::build([("d1", "a b"), ("d2", "a")], IndexLevel::UnitLevel).unwrap();
        assert_eq!(idx.doc_count(), 2);
        assert_eq!(idx.avg_doc_len, 1.5);
        assert_eq!(idx.postings["a"], vec![(0, 1), (1, 1)]);
        assert_eq!(idx.postings["b"], vec![(0, 1)]);
    }

    #[test]
    fn singleton_and_empty_index() {
        let idx = InvertedIndex::build([("d", "x y z")], IndexLevel::NoteLevel).unwrap();
        assert_eq!(idx.avg_doc_len, 3.0);
        let none: [(&str, &str); 0] = [];
        assert!(matches!(InvertedIndex::build(none, IndexLevel::UnitLevel), Err(Error::EmptyIndex)));
    }

    #[test]
    fn single_doc_score_matches_hand_value() {
        let idx = InvertedIndex::build([("d", "x")], IndexLevel::UnitLevel).unwrap();
        let s = idx.bm25_score(&["x"], "d", &Bm25Params::default()).unwrap();
        // IDF = ln(0.5/1.5 + 1) = ln(4/3); tf factor = 2.2 / 2.2 = 1
        assert!((s - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert_eq!(idx.bm25_score(&["zzz"], "d", &Bm25Params::default()).unwrap(), 0.0);
        assert!(idx.bm25_score(&["x"], "missing", &Bm25Params::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let idx = InvertedIndex::build([("d1", "a b c a"), ("d2", "c d")], IndexLevel::UnitLevel).unwrap();
        let back = InvertedIndex::from_json(&idx.to_json().unwrap()).unwrap();
        assert_eq!(back, idx);
        assert_eq!(
            back.bm25_score(&["a", "c"], "d1", &Bm25Params::default()).unwrap(),
            idx.bm25_score(&["a", "c"], "d1", &Bm25Params::default()).unwrap()
        );
        let mut wrong = idx.clone();
        wrong.version = 99;
        assert!(matches!(
            InvertedIndex::from_json(&wrong.to_json().unwrap()),
            Err(Error::IndexVersion { found: 99, .. })
        ));
    }

    #[test]
    fn undersized_corpus_returns_all_units() {
        let corpus = corpus_from(vec![
            unit("n1", 0, "fever resolved overnight", 0),
            unit("n1", 1, "started vancomycin for pneumonia", 0),
            unit("n1", 2, "creatinine 1.2 stable", 0),
        ]);
        let hits = retrieve_two_stage("vancomycin pneumonia", &corpus, &RetrievalParams::default());
        assert_eq!(hits.len(), 3);
        assert!(hits.iter().all(|h| h.note_id == "n1"));
        assert_eq!(hits[0].unit_id, "n1#1");
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn duplicate_units_are_deduplicated() {
        let corpus = corpus_from(vec![
            unit("n1", 0, "started vancomycin", 0),
            unit("n2", 0, "started vancomycin", 0),
            unit("n2", 1, "other text here", 0),
        ]);
        let hits = retrieve_two_stage("vancomycin", &corpus, &RetrievalParams::default());
        assert_eq!(hits.iter().filter(|h| h.unit_id.ends_with("#0")).count(), 1);
        let no_dedup = RetrievalParams { dedup: false, ..Default::default() };
        assert_eq!(retrieve_two_stage("vancomycin", &corpus, &no_dedup).len(), 3);
    }

    #[test]
    fn per_note_cap() {
        let units: Vec<_> = (0..12).map(|i| unit("n1", i, &format!("heparin drip rate {i}"), 0)).collect();
        let corpus = corpus_from(units);
        let hits = retrieve_two_stage("heparin", &corpus, &RetrievalParams::default());
        assert_eq!(hits.len(), 10);
    }

    #[test]
    fn stage_one_restricts_notes() {
        let mut units = Vec::new();
        for n in 0..5 {
            units.push(unit(&format!("n{n}"), 0, &format!("topic{n} alpha beta"), 0));
        }
        let corpus = corpus_from(units);
        let params = RetrievalParams { top_n_notes: 2, ..Default::default() };
        let hits = retrieve_two_stage("topic3", &corpus, &params);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].note_id, "n3");
        let allowed = select_notes("topic3", &corpus, &params);
        assert!(hits.iter().all(|h| allowed.contains(&h.note_id)));
    }

    fn pack_fixture() -> (SubjectCorpus, Vec<RetrievalHit>) {
        let corpus = corpus_from(vec![
            unit("n1", 0, "one two three four", 5),
            unit("n1", 1, "five six seven eight", 1),
            unit("n1", 2, "nine ten eleven twelve", 3),
        ]);
        let hits = vec![
            RetrievalHit { unit_id: "n1#0".into(), note_id: "n1".into(), score: 2.0, rank: 0 },
            RetrievalHit { unit_id: "n1#1".into(), note_id: "n1".into(), score: 1.0, rank: 1 },
            RetrievalHit { unit_id: "n1#2".into(), note_id: "n1".into(), score: 1.0, rank: 2 },
        ];
        (corpus, hits)
    }

    #[test]
    fn budget_admits_two_of_three() {
        let (corpus, hits) = pack_fixture();
        let params = PackParams { token_budget: 8, dropout_rate: 0.0, ..Default::default() };
        let packed = pack_evidence(&hits, &corpus, &params, 1).unwrap();
        let ids: Vec<_> = packed.items.iter().map(|i| i.unit_id.as_str()).collect();
        // equal scores fall back to time ascending: n1#1 (t=1) before n1#2 (t=3)
        assert_eq!(ids, ["n1#0", "n1#1"]);
        assert!(packed.dropped_ids.is_empty());
        assert!(packed.token_count() <= 8);
    }

    #[test]
    fn per_item_truncation() {
        let (corpus, hits) = pack_fixture();
        let params = PackParams { per_item_tokens: 2, dropout_rate: 0.0, ..Default::default() };
        let packed = pack_evidence(&hits, &corpus, &params, 1).unwrap();
        assert_eq!(packed.items[0].text, "one two");
        assert_eq!(packed.items.len(), 3);
    }

    #[test]
    fn dropout_is_seeded() {
        let units: Vec<_> = (0..40).map(|i| unit("n1", i, &format!("word{i} filler"), i as i64)).collect();
        let corpus = corpus_from(units);
        let hits = retrieve_two_stage("filler", &corpus, &RetrievalParams { cap_per_note: 50, ..Default::default() });
        let params = PackParams { dropout_rate: 0.3, ..Default::default() };
        let a = pack_evidence(&hits, &corpus, &params, 11).unwrap();
        let b = pack_evidence(&hits, &corpus, &params, 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(!a.dropped_ids.is_empty());
        assert_eq!(a.items.len() + a.dropped_ids.len(), 40);
        let bad = PackParams { dropout_rate: 1.0, ..Default::default() };
        assert!(pack_evidence(&hits, &corpus, &bad, 1).is_err());
        assert!(pack_evidence(&[], &corpus, &params, 1).unwrap().items.is_empty());
    }
}
