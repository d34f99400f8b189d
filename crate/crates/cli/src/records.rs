//! Line records exchanged between subcommands.

use claimpref::mining::SummaryStats;
use claimpref::retrieval::RetrievalParams;
use claimpref::verifier::Verdict;
use serde::{Deserialize, Serialize};

/// A claim to be paired with evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimInput {
    pub proposition_id: String,
    pub subject_id: String,
    #[serde(default, alias = "admission_id")]
    pub hadm_id: Option<String>,
    pub claim: String,
    #[serde(default)]
    pub label: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceMeta {
    pub unit_id: String,
    pub note_id: String,
    pub time: i64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalInfo {
    pub params: RetrievalParams,
    pub n_hits: usize,
    /// Packed units removed by evidence dropout.
    pub dropped_ids: Vec<String>,
    pub token_count: usize,
}

/// A claim with its packed evidence, ready for verifier training or scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub proposition_id: String,
    pub subject_id: String,
    pub hadm_id: Option<String>,
    pub claim: String,
    pub label: Option<Verdict>,
    pub evidence: Vec<String>,
    pub evidence_meta: Vec<EvidenceMeta>,
    pub retrieval: RetrievalInfo,
}

/// One system output for one prompt, as consumed by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub prompt_id: String,
    pub subject_id: String,
    pub text: String,
}

/// The candidate picked for one prompt by `best-of-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRecord {
    pub prompt_id: String,
    pub subject_id: String,
    pub chosen_index: usize,
    pub chosen_utility: f64,
    pub base_index: usize,
    pub base_utility: f64,
    pub chosen_stats: SummaryStats,
    pub base_stats: SummaryStats,
}
