//! Prompt windows, claim-level candidate scoring, the summary utility and
//! constrained preference-pair selection.
//!
//! Utility, with `n = n_used`, evaluated left to right:
//!
//! ```text
//! U = λA·nA − λB·nB − λC·nC + λcov·min(n, n0) − λdup·(dup_frac·n) − λmeta·meta_hits
//! ```
//!
//! Pair constraints for the full strategy:
//! 1. `U_chosen − U_rejected >= tau_u` (or `>` with `strict_gap`)
//! 2. `|n_used,chosen − n_used,rejected| <= tau_n`
//! 3. chosen has `n_hcns <= tau_hcns` and `n_b <= tau_b`
//! 4. rejected has `n_hcns >= 1`

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::claims::{
    clean_candidate, count_meta_hits, dedup_claims, dup_fraction, is_valid_claim, segment_claims, ClaimFilters,
};
use crate::corpus::EvidenceUnit;
use crate::error::{Error, Result};
use crate::retrieval::{retrieve_two_stage, RetrievalParams, SubjectCorpus};
use crate::seed::{derive_seed, rng_for, sha256_hex};
use crate::text::truncate_words;
use crate::verifier::{decode_with, is_hcns_with, MarginMode, Verdict, VerifierClient, VerifierLogits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
    pub jitter: usize,
    pub prompts_per_subject: usize,
    pub max_unit_words: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window: 18,
            stride: 8,
            jitter: 2,
            prompts_per_subject: 30,
            max_unit_words: 220,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptWindow {
    pub subject_id: String,
    pub window_index: usize,
    pub unit_ids: Vec<String>,
    /// One truncated unit text per line.
    pub prompt_text: String,
}

impl PromptWindow {
    pub fn prompt_id(&self) -> String {
        format!("{}:w{:03}", self.subject_id, self.window_index)
    }
}

/// Sliding windows over one subject's time-ordered units.
///
/// Window `i` starts at `i·stride + jitter_i`, clamped to the unit range. A
/// window shorter than `window` is kept only if it holds at least
/// `window / 2` units.
pub fn build_windows(units: &[EvidenceUnit], config: &WindowConfig, seed: u64) -> Vec<PromptWindow> {
    let Some(first) = units.first() else {
        return Vec::new();
    };
    let min_len = config.window.div_ceil(2).max(1);
    if units.len() < min_len {
        log::info!("subject {}: {} units is below half a window; no prompts", first.subject_id, units.len());
        return Vec::new();
    }
    let subject = first.subject_id.as_str();
    let mut rng = rng_for(seed, &["windows", subject]);
    let jitter = config.jitter as i64;
    let stride = config.stride.max(1);
    let mut out = Vec::new();
    let mut i = 0usize;
    while out.len() < config.prompts_per_subject && i * stride < units.len() {
        let offset = if jitter > 0 { rng.gen_range(-jitter..=jitter) } else { 0 };
        let start = ((i * stride) as i64 + offset).clamp(0, units.len() as i64 - 1) as usize;
        let end = (start + config.window).min(units.len());
        if end - start >= min_len {
            let slice = &units[start..end];
            out.push(PromptWindow {
                subject_id: subject.to_owned(),
                window_index: i,
                unit_ids: slice.iter().map(|u| u.unit_id.clone()).collect(),
                prompt_text: slice
                    .iter()
                    .map(|u| truncate_words(&u.text, config.max_unit_words))
                    .collect::<Vec<_>>()
                    .join("\n"),
            });
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub bias_prec: f64,
    pub delta: f64,
    pub scoring_cap: usize,
    pub margin_mode: MarginMode,
    pub retrieval: RetrievalParams,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            bias_prec: -0.34,
            delta: 0.8,
            scoring_cap: 24,
            margin_mode: MarginMode::BiasAdjusted,
            retrieval: RetrievalParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    pub n_used: usize,
    pub n_hcns: usize,
    /// Claims whose verifier call failed.
    pub n_skipped: usize,
    pub dup_frac: f64,
    pub meta_hits: usize,
    pub chars: usize,
    /// Distinct valid claims before the scoring cap.
    pub n_claims_segmented: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredClaim {
    pub claim_id: String,
    pub text: String,
    pub logits: VerifierLogits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub index: usize,
    pub text: String,
    pub claims: Vec<ScoredClaim>,
    pub stats: SummaryStats,
}

impl ScoredCandidate {
    /// Re-derive the label counts under a different bias or threshold;
    /// length, duplication and meta fields are unchanged.
    pub fn retally(&self, bias_prec: f64, delta: f64, mode: MarginMode) -> SummaryStats {
        let mut stats = self.stats;
        tally(&mut stats, self.claims.iter().map(|c| &c.logits), bias_prec, delta, mode);
        stats
    }
}

fn tally<'a>(
    stats: &mut SummaryStats,
    logits: impl Iterator<Item = &'a VerifierLogits>,
    bias_prec: f64,
    delta: f64,
    mode: MarginMode,
) {
    stats.n_a = 0;
    stats.n_b = 0;
    stats.n_c = 0;
    stats.n_hcns = 0;
    for l in logits {
        // scored logits are finite by construction
        let Ok(d) = decode_with(l, bias_prec, mode) else { continue };
        match d.verdict {
            Verdict::Supported => stats.n_a += 1,
            Verdict::NotSupported => stats.n_b += 1,
            Verdict::NotAddressed => stats.n_c += 1,
        }
        if is_hcns_with(l, bias_prec, delta, mode) {
            stats.n_hcns += 1;
        }
    }
    stats.n_used = stats.n_a + stats.n_b + stats.n_c;
}

/// Clean, segment, filter, dedup, then verify the first `scoring_cap` claims
/// against their retrieved evidence.
///
/// `meta_hits` is counted on the raw candidate, since cleaning removes meta
/// lines. A failing or non-finite verifier call skips that claim.
pub fn score_candidate(
    index: usize,
    text: &str,
    corpus: &SubjectCorpus,
    verifier: &dyn VerifierClient,
    filters: &ClaimFilters,
    config: &ScoringConfig,
) -> ScoredCandidate {
    let cleaned = clean_candidate(text, filters);
    let valid: Vec<_> = segment_claims(&cleaned)
        .into_iter()
        .filter(|c| is_valid_claim(c, filters))
        .collect();
    let dup_frac = dup_fraction(&valid);
    let distinct = dedup_claims(valid);

    let mut scored = Vec::new();
    let mut n_skipped = 0;
    for claim in distinct.iter().take(config.scoring_cap) {
        let hits = retrieve_two_stage(&claim.text, corpus, &config.retrieval);
        let evidence: Vec<&str> = hits
            .iter()
            .filter_map(|h| corpus.unit(&h.unit_id).map(|u| u.text.as_str()))
            .collect();
        match verifier.score(&claim.text, &evidence) {
            Ok(logits) if logits.is_finite() => scored.push(ScoredClaim {
                claim_id: claim.claim_id.clone(),
                text: claim.text.clone(),
                logits,
            }),
            Ok(_) => {
                log::warn!("non-finite logits for claim {}; skipped", claim.claim_id);
                n_skipped += 1;
            }
            Err(e) => {
                log::warn!("verifier failed on claim {}: {e}", claim.claim_id);
                n_skipped += 1;
            }
        }
    }

    let mut stats = SummaryStats {
        n_skipped,
        dup_frac,
        meta_hits: count_meta_hits(text, filters),
        chars: cleaned.chars().count(),
        n_claims_segmented: distinct.len(),
        ..Default::default()
    };
    tally(&mut stats, scored.iter().map(|c| &c.logits), config.bias_prec, config.delta, config.margin_mode);
    ScoredCandidate {
        index,
        text: text.to_owned(),
        claims: scored,
        stats,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityWeights {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub lambda_cov: f64,
    pub n0: usize,
    pub lambda_dup: f64,
    pub lambda_meta: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            lambda_a: 1.0,
            lambda_b: 3.0,
            lambda_c: 0.5,
            lambda_cov: 0.25,
            n0: 12,
            lambda_dup: 2.0,
            lambda_meta: 2.0,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_a, self.lambda_b, self.lambda_c, self.lambda_cov, self.lambda_dup, self.lambda_meta];
        if all.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("utility weights must be finite and >= 0".into()));
        }
        if self.n0 == 0 {
            return Err(Error::InvalidParameter("n0 must be >= 1".into()));
        }
        Ok(())
    }

    /// The same weights with coverage, duplication and meta terms removed.
    pub fn without_length_terms(&self) -> Self {
        Self {
            lambda_cov: 0.0,
            lambda_dup: 0.0,
            lambda_meta: 0.0,
            ..*self
        }
    }
}

pub fn utility(stats: &SummaryStats, w: &UtilityWeights) -> f64 {
    let n = stats.n_used as f64;
    w.lambda_a * stats.n_a as f64 - w.lambda_b * stats.n_b as f64 - w.lambda_c * stats.n_c as f64
        + w.lambda_cov * stats.n_used.min(w.n0) as f64
        - w.lambda_dup * (stats.dup_frac * n)
        - w.lambda_meta * stats.meta_hits as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairConstraints {
    pub tau_u: f64,
    pub tau_n: usize,
    pub tau_hcns: usize,
    pub tau_b: usize,
    /// Require `U_c − U_r > tau_u` instead of `>=`.
    pub strict_gap: bool,
}

impl Default for PairConstraints {
    fn default() -> Self {
        Self {
            tau_u: 2.0,
            tau_n: 6,
            tau_hcns: 1,
            tau_b: 2,
            strict_gap: false,
        }
    }
}

impl PairConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_u >= 0.0) {
            return Err(Error::InvalidParameter("tau_u must be >= 0".into()));
        }
        Ok(())
    }

    pub fn gap_ok(&self, gap: f64) -> bool {
        if self.strict_gap {
            gap > self.tau_u
        } else {
            gap >= self.tau_u
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Full,
    Random,
    NoHcns,
    NoLengthCoverage,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Full, Strategy::Random, Strategy::NoHcns, Strategy::NoLengthCoverage];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::Random => "random",
            Strategy::NoHcns => "no_hcns",
            Strategy::NoLengthCoverage => "no_length_coverage",
        }
    }

    pub fn weights(self, base: &UtilityWeights) -> UtilityWeights {
        match self {
            Strategy::NoLengthCoverage => base.without_length_terms(),
            _ => *base,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy `{s}`")))
    }
}

/// Indices and utilities of a selected pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairChoice {
    pub chosen: usize,
    pub rejected: usize,
    pub chosen_utility: f64,
    pub rejected_utility: f64,
}

impl PairChoice {
    pub fn gap(&self) -> f64 {
        self.chosen_utility - self.rejected_utility
    }
}

/// `Less` means `a` ranks ahead: fewer B, then more characters, then lower index.
fn tie_order(a: &SummaryStats, ai: usize, b: &SummaryStats, bi: usize) -> Ordering {
    a.n_b.cmp(&b.n_b).then(b.chars.cmp(&a.chars)).then(ai.cmp(&bi))
}

/// Pick (chosen, rejected) among one prompt's candidates.
///
/// `stats[i]` and `utilities[i]` describe candidate `i`; utilities must
/// already use the strategy's weights. `rng` is only consumed by
/// [`Strategy::Random`].
pub fn select_pair<R: Rng>(
    stats: &[SummaryStats],
    utilities: &[f64],
    constraints: &PairConstraints,
    strategy: Strategy,
    rng: &mut R,
) -> Option<PairChoice> {
    let k = stats.len().min(utilities.len());
    if k < 2 {
        return None;
    }
    if strategy == Strategy::Random {
        let chosen = rng.gen_range(0..k);
        let mut rejected = rng.gen_range(0..k - 1);
        if rejected >= chosen {
            rejected += 1;
        }
        return Some(PairChoice {
            chosen,
            rejected,
            chosen_utility: utilities[chosen],
            rejected_utility: utilities[rejected],
        });
    }

    let hcns_gated = strategy != Strategy::NoHcns;
    let chosen = (0..k)
        .filter(|&i| stats[i].n_b <= constraints.tau_b && (!hcns_gated || stats[i].n_hcns <= constraints.tau_hcns))
        .min_by(|&a, &b| {
            utilities[b]
                .total_cmp(&utilities[a])
                .then_with(|| tie_order(&stats[a], a, &stats[b], b))
        })?;
    let rejected = (0..k)
        .filter(|&i| i != chosen && (!hcns_gated || stats[i].n_hcns >= 1))
        .min_by(|&a, &b| {
            utilities[a]
                .total_cmp(&utilities[b])
                .then_with(|| tie_order(&stats[a], a, &stats[b], b))
        })?;

    let choice = PairChoice {
        chosen,
        rejected,
        chosen_utility: utilities[chosen],
        rejected_utility: utilities[rejected],
    };
    if !constraints.gap_ok(choice.gap()) {
        return None;
    }
    if strategy != Strategy::NoLengthCoverage && stats[chosen].n_used.abs_diff(stats[rejected].n_used) > constraints.tau_n {
        return None;
    }
    Some(choice)
}

/// Check constraints i–iv for an emitted full-strategy pair.
pub fn satisfies_constraints(
    chosen: &SummaryStats,
    rejected: &SummaryStats,
    gap: f64,
    constraints: &PairConstraints,
) -> bool {
    constraints.gap_ok(gap)
        && chosen.n_used.abs_diff(rejected.n_used) <= constraints.tau_n
        && chosen.n_hcns <= constraints.tau_hcns
        && chosen.n_b <= constraints.tau_b
        && rejected.n_hcns >= 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub candidates_per_prompt: usize,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            candidates_per_prompt: 8,
            temperature: 0.8,
            top_p: 0.95,
        }
    }
}

/// Produces candidate summaries for a prompt window.
pub trait GeneratorClient: Send + Sync {
    fn generate(&self, window: &PromptWindow, params: &GenerationParams, seed: u64) -> Result<Vec<String>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub windows: WindowConfig,
    pub scoring: ScoringConfig,
    pub weights: UtilityWeights,
    pub constraints: PairConstraints,
    pub generation: GenerationParams,
    pub bias_recall: f64,
    /// Skip prompts whose pool has no B decode under `bias_recall`.
    pub recall_prefilter: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            windows: WindowConfig::default(),
            scoring: ScoringConfig::default(),
            weights: UtilityWeights::default(),
            constraints: PairConstraints::default(),
            generation: GenerationParams::default(),
            bias_recall: 1.10,
            recall_prefilter: true,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.constraints.validate()?;
        self.scoring.retrieval.validate()?;
        if self.generation.candidates_per_prompt < 2 {
            return Err(Error::InvalidParameter("need at least two candidates per prompt".into()));
        }
        if !(self.scoring.delta >= 0.0) {
            return Err(Error::InvalidParameter("delta must be >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// All scored candidates for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPool {
    pub window: PromptWindow,
    pub candidates: Vec<ScoredCandidate>,
}

impl PromptPool {
    pub fn prompt_id(&self) -> String {
        self.window.prompt_id()
    }

    pub fn passes_recall_prefilter(&self, bias_recall: f64) -> bool {
        self.candidates.iter().flat_map(|c| &c.claims).any(|c| {
            decode_with(&c.logits, bias_recall, MarginMode::BiasAdjusted)
                .is_ok_and(|d| d.verdict == Verdict::NotSupported)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolBuild {
    pub pools: Vec<PromptPool>,
    pub n_subjects: usize,
    pub n_windows: usize,
    /// Prompts dropped because the generator failed.
    pub n_generator_failures: usize,
}

fn prompt_seed(seed: u64, window: &PromptWindow) -> u64 {
    derive_seed(seed, &["prompt", &window.subject_id, &window.window_index.to_string()])
}

/// Generate and score candidates for every window of every subject.
///
/// Output order is (subject, window) regardless of scheduling.
pub fn build_pools(
    subjects: &[SubjectCorpus],
    generator: &dyn GeneratorClient,
    verifier: &dyn VerifierClient,
    filters: &ClaimFilters,
    config: &MiningConfig,
    seed: u64,
) -> Result<PoolBuild> {
    config.validate()?;
    let jobs: Vec<(&SubjectCorpus, PromptWindow)> = subjects
        .iter()
        .flat_map(|s| build_windows(&s.units, &config.windows, seed).into_iter().map(move |w| (s, w)))
        .collect();

    let run = |(corpus, window): &(&SubjectCorpus, PromptWindow)| -> Option<PromptPool> {
        let texts = match generator.generate(window, &config.generation, prompt_seed(seed, window)) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("generator failed for {}: {e}", window.prompt_id());
                return None;
            }
        };
        let candidates = texts
            .iter()
            .enumerate()
            .map(|(i, t)| score_candidate(i, t, corpus, verifier, filters, &config.scoring))
            .collect();
        Some(PromptPool {
            window: window.clone(),
            candidates,
        })
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Option<PromptPool>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Option<PromptPool>> = jobs.iter().map(run).collect();

    let n_windows = results.len();
    let n_generator_failures = results.iter().filter(|r| r.is_none()).count();
    Ok(PoolBuild {
        pools: results.into_iter().flatten().collect(),
        n_subjects: subjects.len(),
        n_windows,
        n_generator_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub subject_id: String,
    pub window_index: usize,
    pub prompt_text: String,
    pub chosen_index: usize,
    pub rejected_index: usize,
    pub chosen_text: String,
    pub rejected_text: String,
    pub chosen_stats: SummaryStats,
    pub rejected_stats: SummaryStats,
    pub chosen_utility: f64,
    pub rejected_utility: f64,
    pub utility_gap: f64,
    pub strategy: Strategy,
    pub config_hash: String,
}

/// Headline statistics of a mining run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningSummary {
    pub strategy: Strategy,
    pub config_hash: String,
    pub n_subjects: usize,
    pub n_prompts: usize,
    pub n_generator_failures: usize,
    pub n_prefiltered: usize,
    pub n_candidates: usize,
    pub n_pairs: usize,
    pub frac_chosen_fewer_b: Option<f64>,
    pub mean_b_chosen: Option<f64>,
    pub mean_b_rejected: Option<f64>,
    pub mean_utility_gap: Option<f64>,
}

/// Per-knob overrides applied when selecting from a fixed pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSettings {
    pub strategy: Strategy,
    pub bias_prec: f64,
    pub delta: f64,
}

impl SelectionSettings {
    pub fn from_config(config: &MiningConfig, strategy: Strategy) -> Self {
        Self {
            strategy,
            bias_prec: config.scoring.bias_prec,
            delta: config.scoring.delta,
        }
    }
}

/// Select at most one pair per prompt from scored pools.
pub fn select_pairs(
    build: &PoolBuild,
    config: &MiningConfig,
    settings: SelectionSettings,
    seed: u64,
) -> (Vec<PreferencePair>, MiningSummary) {
    let weights = settings.strategy.weights(&config.weights);
    let retally = settings.bias_prec != config.scoring.bias_prec || settings.delta != config.scoring.delta;
    let mut hashed = config.clone();
    hashed.scoring.bias_prec = settings.bias_prec;
    hashed.scoring.delta = settings.delta;
    let config_hash = hashed.hash();

    let mut pairs = Vec::new();
    let mut n_prefiltered = 0;
    let mut n_candidates = 0;
    for pool in &build.pools {
        n_candidates += pool.candidates.len();
        if config.recall_prefilter && !pool.passes_recall_prefilter(config.bias_recall) {
            n_prefiltered += 1;
            continue;
        }
        let stats: Vec<SummaryStats> = pool
            .candidates
            .iter()
            .map(|c| {
                if retally {
                    c.retally(settings.bias_prec, settings.delta, config.scoring.margin_mode)
                } else {
                    c.stats
                }
            })
            .collect();
        let utilities: Vec<f64> = stats.iter().map(|s| utility(s, &weights)).collect();
        let mut rng = rng_for(prompt_seed(seed, &pool.window), &["pair", settings.strategy.name()]);
        let Some(choice) = select_pair(&stats, &utilities, &config.constraints, settings.strategy, &mut rng) else {
            continue;
        };
        let (c, r) = (&pool.candidates[choice.chosen], &pool.candidates[choice.rejected]);
        pairs.push(PreferencePair {
            prompt_id: pool.prompt_id(),
            subject_id: pool.window.subject_id.clone(),
            window_index: pool.window.window_index,
            prompt_text: pool.window.prompt_text.clone(),
            chosen_index: choice.chosen,
            rejected_index: choice.rejected,
            chosen_text: c.text.clone(),
            rejected_text: r.text.clone(),
            chosen_stats: stats[choice.chosen],
            rejected_stats: stats[choice.rejected],
            chosen_utility: choice.chosen_utility,
            rejected_utility: choice.rejected_utility,
            utility_gap: choice.gap(),
            strategy: settings.strategy,
            config_hash: config_hash.clone(),
        });
    }
    pairs.sort_by(|a, b| (&a.subject_id, a.window_index).cmp(&(&b.subject_id, b.window_index)));

    let mean = |f: &dyn Fn(&PreferencePair) -> f64| -> Option<f64> {
        (!pairs.is_empty()).then(|| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64)
    };
    let summary = MiningSummary {
        strategy: settings.strategy,
        config_hash,
        n_subjects: build.n_subjects,
        n_prompts: build.n_windows,
        n_generator_failures: build.n_generator_failures,
        n_prefiltered,
        n_candidates,
        n_pairs: pairs.len(),
        frac_chosen_fewer_b: mean(&|p| (p.chosen_stats.n_b < p.rejected_stats.n_b) as u8 as f64),
        mean_b_chosen: mean(&|p| p.chosen_stats.n_b as f64),
        mean_b_rejected: mean(&|p| p.rejected_stats.n_b as f64),
        mean_utility_gap: mean(&|p| p.utility_gap),
    };
    (pairs, summary)
}

/// Build pools and select pairs in one call.
pub fn mine_split(
    subjects: &[SubjectCorpus],
    generator: &dyn GeneratorClient,
    verifier: &dyn VerifierClient,
    filters: &ClaimFilters,
    config: &MiningConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<(Vec<PreferencePair>, MiningSummary)> {
    let build = build_pools(subjects, generator, verifier, filters, config, seed)?;
    Ok(select_pairs(&build, config, SelectionSettings::from_config(config, strategy), seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPrecChoice {
    pub bias_prec: f64,
    /// Fraction of HCNS predictions whose true label is B.
    pub precision: f64,
    pub n_hcns: usize,
}

fn hcns_precision(dev: &[(VerifierLogits, Verdict)], bias: f64, delta: f64) -> (f64, usize) {
    let mut hits = 0;
    let mut total = 0;
    for (l, y) in dev {
        if is_hcns_with(l, bias, delta, MarginMode::BiasAdjusted) {
            total += 1;
            hits += (*y == Verdict::NotSupported) as usize;
        }
    }
    (if total == 0 { 0.0 } else { hits as f64 / total as f64 }, total)
}

/// Coarse (step 0.1) then fine (step 0.01) search for the bias that maximizes
/// HCNS precision subject to at least `min_yield` HCNS predictions.
/// Ties go to the smaller bias. `None` when no grid point reaches the yield.
pub fn select_bias_prec(
    dev: &[(VerifierLogits, Verdict)],
    lo: f64,
    hi: f64,
    delta: f64,
    min_yield: usize,
) -> Result<Option<BiasPrecChoice>> {
    let best_on = |grid: Vec<f64>| -> Option<BiasPrecChoice> {
        let mut best: Option<BiasPrecChoice> = None;
        for b in grid {
            let (precision, n_hcns) = hcns_precision(dev, b, delta);
            if n_hcns < min_yield {
                continue;
            }
            if best.is_none_or(|x| precision > x.precision) {
                best = Some(BiasPrecChoice { bias_prec: b, precision, n_hcns });
            }
        }
        best
    };
    let Some(coarse) = best_on(crate::verifier::bias_grid(lo, hi, 0.1)?) else {
        return Ok(None);
    };
    let fine_lo = (coarse.bias_prec - 0.1).max(lo);
    let fine_hi = (coarse.bias_prec + 0.1).min(hi);
    Ok(best_on(crate::verifier::bias_grid(fine_lo, fine_hi, 0.01)?))
}
