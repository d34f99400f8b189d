//! NS-rate, validity rules, the anti-degeneration gate, mining diagnostics,
//! stability sweeps and judge-label aggregation, plus aligned text tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{select_pairs, MiningConfig, PoolBuild, PreferencePair, SelectionSettings, Strategy, SummaryStats};

/// `n_b / n_used`; `None` when nothing was scored.
pub fn ns_rate(stats: &SummaryStats) -> Option<f64> {
    ns_rate_counts(stats.n_b, stats.n_used)
}

pub fn ns_rate_counts(n_b: usize, n_used: usize) -> Option<f64> {
    (n_used > 0).then(|| n_b as f64 / n_used as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NsRates {
    /// Pooled over all scored claims.
    pub micro: Option<f64>,
    /// Mean of per-candidate rates over candidates with a defined rate.
    pub macro_avg: Option<f64>,
}

pub fn ns_rates<'a>(stats: impl IntoIterator<Item = &'a SummaryStats>) -> NsRates {
    let mut n_b = 0;
    let mut n_used = 0;
    let mut rates = Vec::new();
    for s in stats {
        n_b += s.n_b;
        n_used += s.n_used;
        rates.extend(ns_rate(s));
    }
    NsRates {
        micro: ns_rate_counts(n_b, n_used),
        macro_avg: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityConfig {
    pub min_chars_after_clean: usize,
    pub min_claims: usize,
    pub dup_strict: f64,
    pub dup_relaxed: f64,
    pub meta_forbidden: bool,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            min_chars_after_clean: 200,
            min_claims: 4,
            dup_strict: 0.25,
            dup_relaxed: 0.35,
            meta_forbidden: true,
        }
    }
}

impl ValidityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dup_strict) || !(self.dup_strict <= self.dup_relaxed && self.dup_relaxed <= 1.0) {
            return Err(Error::InvalidParameter("need 0 <= dup_strict <= dup_relaxed <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    TooShort,
    TooFewClaims,
    MetaText,
    /// Above the strict duplication threshold only.
    DuplicationStrict,
    /// Above the relaxed threshold (and therefore the strict one).
    DuplicationRelaxed,
}

impl InvalidReason {
    pub fn describe(self) -> &'static str {
        match self {
            InvalidReason::TooShort => "too short",
            InvalidReason::TooFewClaims => "too few claims",
            InvalidReason::MetaText => "meta text",
            InvalidReason::DuplicationStrict => "duplication above strict threshold",
            InvalidReason::DuplicationRelaxed => "duplication above relaxed threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    pub strict_valid: bool,
    pub relaxed_valid: bool,
    pub reasons: Vec<InvalidReason>,
}

/// Validity from a candidate's cleaned length, distinct claim count,
/// duplicate fraction and meta hits (all carried by [`SummaryStats`]).
pub fn validity_check(stats: &SummaryStats, config: &ValidityConfig) -> Validity {
    let mut reasons = Vec::new();
    if stats.chars < config.min_chars_after_clean {
        reasons.push(InvalidReason::TooShort);
    }
    if stats.n_claims_segmented < config.min_claims {
        reasons.push(InvalidReason::TooFewClaims);
    }
    if config.meta_forbidden && stats.meta_hits > 0 {
        reasons.push(InvalidReason::MetaText);
    }
    let base_ok = reasons.is_empty();
    if stats.dup_frac > config.dup_relaxed {
        reasons.push(InvalidReason::DuplicationRelaxed);
    } else if stats.dup_frac > config.dup_strict {
        reasons.push(InvalidReason::DuplicationStrict);
    }
    Validity {
        strict_valid: base_ok && stats.dup_frac <= config.dup_strict,
        relaxed_valid: base_ok && stats.dup_frac <= config.dup_relaxed,
        reasons,
    }
}

/// One system's aggregates over a prompt set. Means are over the
/// relaxed-valid subset; `valid_frac` is over all prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregates {
    pub name: String,
    pub prompt_ids: Vec<String>,
    pub n_prompts: usize,
    pub valid_frac: f64,
    pub strict_valid_frac: f64,
    pub mean_chars: f64,
    pub mean_claims: f64,
    pub mean_n_a: f64,
    pub mean_n_b: f64,
    pub ns_rate: NsRates,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

/// Aggregate one output per prompt. `mean_claims` is the mean number of scored claims.
pub fn aggregate_run(name: &str, outputs: &[(String, SummaryStats)], validity: &ValidityConfig) -> RunAggregates {
    let checks: Vec<Validity> = outputs.iter().map(|(_, s)| validity_check(s, validity)).collect();
    let valid: Vec<&SummaryStats> = outputs
        .iter()
        .zip(&checks)
        .filter(|(_, v)| v.relaxed_valid)
        .map(|((_, s), _)| s)
        .collect();
    let n = outputs.len().max(1) as f64;
    RunAggregates {
        name: name.to_owned(),
        prompt_ids: outputs.iter().map(|(p, _)| p.clone()).collect(),
        n_prompts: outputs.len(),
        valid_frac: checks.iter().filter(|v| v.relaxed_valid).count() as f64 / n,
        strict_valid_frac: checks.iter().filter(|v| v.strict_valid).count() as f64 / n,
        mean_chars: mean_of(valid.iter().map(|s| s.chars as f64)),
        mean_claims: mean_of(valid.iter().map(|s| s.n_used as f64)),
        mean_n_a: mean_of(valid.iter().map(|s| s.n_a as f64)),
        mean_n_b: mean_of(valid.iter().map(|s| s.n_b as f64)),
        ns_rate: ns_rates(valid.iter().copied()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionGate {
    pub min_valid_frac: f64,
    pub min_char_ratio: f64,
    pub max_claim_deficit: f64,
}

impl Default for SelectionGate {
    fn default() -> Self {
        Self { min_valid_frac: 0.80, min_char_ratio: 0.95, max_claim_deficit: 0.5 }
    }
}

impl SelectionGate {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.min_valid_frac) || !in_unit(self.min_char_ratio) || !(self.max_claim_deficit >= 0.0) {
            return Err(Error::InvalidParameter("gate ratios must lie in (0, 1] and the deficit must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub pass: bool,
    pub valid_ok: bool,
    pub chars_ok: bool,
    pub claims_ok: bool,
    /// Positive margins mean the rule holds with room to spare.
    pub valid_margin: f64,
    pub char_ratio: f64,
    pub claim_margin: f64,
}

pub fn degeneration_gate(candidate: &RunAggregates, baseline: &RunAggregates, gate: &SelectionGate) -> Result<GateResult> {
    gate.validate()?;
    let a: BTreeSet<&String> = candidate.prompt_ids.iter().collect();
    let b: BTreeSet<&String> = baseline.prompt_ids.iter().collect();
    if a != b {
        return Err(Error::PromptSetMismatch);
    }
    let char_ratio = if baseline.mean_chars > 0.0 { candidate.mean_chars / baseline.mean_chars } else { f64::INFINITY };
    let valid_ok = candidate.valid_frac >= gate.min_valid_frac;
    let chars_ok = candidate.mean_chars >= gate.min_char_ratio * baseline.mean_chars;
    let claims_ok = candidate.mean_claims >= baseline.mean_claims - gate.max_claim_deficit;
    Ok(GateResult {
        pass: valid_ok && chars_ok && claims_ok,
        valid_ok,
        chars_ok,
        claims_ok,
        valid_margin: candidate.valid_frac - gate.min_valid_frac,
        char_ratio,
        claim_margin: candidate.mean_claims - (baseline.mean_claims - gate.max_claim_deficit),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_pairs: usize,
    pub mean_b_chosen: f64,
    pub mean_b_rejected: f64,
    /// `mean_b_rejected − mean_b_chosen`
    pub delta_b: f64,
    /// Chosen minus rejected.
    pub delta_chars: f64,
    pub delta_n_used: f64,
}

pub fn mining_diagnostics(pairs: &[PreferencePair]) -> Result<DiagnosticsReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let mean = |f: &dyn Fn(&PreferencePair) -> f64| mean_of(pairs.iter().map(f));
    let mean_b_chosen = mean(&|p| p.chosen_stats.n_b as f64);
    let mean_b_rejected = mean(&|p| p.rejected_stats.n_b as f64);
    Ok(DiagnosticsReport {
        n_pairs: pairs.len(),
        mean_b_chosen,
        mean_b_rejected,
        delta_b: mean_b_rejected - mean_b_chosen,
        delta_chars: mean(&|p| p.chosen_stats.chars as f64 - p.rejected_stats.chars as f64),
        delta_n_used: mean(&|p| p.chosen_stats.n_used as f64 - p.rejected_stats.n_used as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub delta: f64,
    pub bias_prec: f64,
    pub n_pairs: usize,
    pub report: Option<DiagnosticsReport>,
}

pub const STABILITY_DELTAS: [f64; 3] = [0.6, 0.8, 1.0];
pub const STABILITY_BIASES: [f64; 3] = [-0.54, -0.34, -0.14];

/// Re-select full-strategy pairs from one fixed pool at every (δ, bias) point.
pub fn stability_sweep(
    build: &PoolBuild,
    config: &MiningConfig,
    deltas: &[f64],
    biases: &[f64],
    seed: u64,
) -> Vec<StabilityPoint> {
    let mut out = Vec::with_capacity(deltas.len() * biases.len());
    for &delta in deltas {
        for &bias_prec in biases {
            let settings = SelectionSettings { strategy: Strategy::Full, bias_prec, delta };
            let (pairs, _) = select_pairs(build, config, settings, seed);
            out.push(StabilityPoint {
                delta,
                bias_prec,
                n_pairs: pairs.len(),
                report: mining_diagnostics(&pairs).ok(),
            });
        }
    }
    out
}

/// `(max − min) / min` of the pair counts; `None` if any point has no pairs.
pub fn pair_count_spread(points: &[StabilityPoint]) -> Option<f64> {
    let counts: Vec<usize> = points.iter().map(|p| p.n_pairs).collect();
    let min = *counts.iter().min()?;
    let max = *counts.iter().max()?;
    (min > 0).then(|| (max - min) as f64 / min as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JudgeVerdict {
    S,
    NS,
    NA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeLabel {
    #[serde(default)]
    pub candidate_id: String,
    #[serde(default)]
    pub claim_id: String,
    pub label: JudgeVerdict,
    pub confidence: f64,
    #[serde(default)]
    pub evidence_ids: Vec<String>,
}

impl JudgeLabel {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.confidence) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("judge confidence {} outside [0, 1]", self.confidence)))
        }
    }
}

pub const JUDGE_HC_CONFIDENCE: f64 = 0.8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub n_s: usize,
    pub n_ns: usize,
    pub n_na: usize,
    pub n_hcns: usize,
    pub ns_rate: Option<f64>,
}

pub fn judge_aggregate(labels: &[JudgeLabel], hc_conf: f64) -> JudgeSummary {
    let mut s = JudgeSummary::default();
    for l in labels {
        match l.label {
            JudgeVerdict::S => s.n_s += 1,
            JudgeVerdict::NS => {
                s.n_ns += 1;
                if l.confidence >= hc_conf {
                    s.n_hcns += 1;
                }
            }
            JudgeVerdict::NA => s.n_na += 1,
        }
    }
    s.ns_rate = ns_rate_counts(s.n_ns, s.n_s + s.n_ns + s.n_na);
    s
}

/// Left-aligned first column, right-aligned others, two-space gutters.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let fmt_row = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_owned()
    };
    let mut out = fmt_row(headers.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.1}%", 100.0 * x))
}

pub fn diagnostics_table(rows: &[(String, DiagnosticsReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                r.n_pairs.to_string(),
                format!("{:.3}", r.mean_b_chosen),
                format!("{:.3}", r.mean_b_rejected),
                format!("{:.3}", r.delta_b),
                format!("{:+.1}", r.delta_chars),
                format!("{:+.3}", r.delta_n_used),
            ]
        })
        .collect();
    render_table(&["strategy", "pairs", "#B_c", "#B_r", "d#B", "dchars", "dn_used"], &body)
}

pub fn stability_table(points: &[StabilityPoint]) -> String {
    let body: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let r = p.report;
            vec![
                format!("{:.2}", p.delta),
                format!("{:.2}", p.bias_prec),
                p.n_pairs.to_string(),
                r.map_or("-".into(), |r| format!("{:.3}", r.delta_b)),
                r.map_or("-".into(), |r| format!("{:+.1}", r.delta_chars)),
                r.map_or("-".into(), |r| format!("{:+.3}", r.delta_n_used)),
            ]
        })
        .collect();
    render_table(&["delta", "bias_prec", "pairs", "d#B", "dchars", "dn_used"], &body)
}

pub fn runs_table(runs: &[RunAggregates]) -> String {
    let body: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.n_prompts.to_string(),
                format!("{:.1}%", 100.0 * r.valid_frac),
                opt_pct(r.ns_rate.micro),
                opt_pct(r.ns_rate.macro_avg),
                format!("{:.2}", r.mean_n_b),
                format!("{:.2}", r.mean_n_a),
                format!("{:.1}", r.mean_chars),
                format!("{:.2}", r.mean_claims),
            ]
        })
        .collect();
    render_table(
        &["system", "prompts", "valid", "NS-rate(micro)", "NS-rate(macro)", "#NS", "#S", "chars", "n_used"],
        &body,
    )
}
